fn main() {
    std::process::exit(wishart_minors::run(std::env::args_os()));
}
