//! Monte Carlo estimators for joint moments of principal minors.
//!
//! Each estimator draws a per-sample log-statistic `s` and estimates
//! `E[exp(s)]`. Sums are kept relative to a running maximum so that nothing
//! overflows, and the standard error comes from batch means over the chunks
//! of [`ChunkPlan`] rather than from the per-sample variance, which is
//! unreliable for the heavy right tails of `exp(s)`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg::{cholesky, SpdMatrix, SymMatrix};
use crate::math::{abs, compensated_sum, exp, expm1, ln, sqrt, CompensatedSum};
use crate::moments::MomentQuery;
use crate::rng::{stream_rng, ChunkPlan, StreamRng};
use crate::wishart::{Method, Regime, Sampler, WishartParams, Workspace};

/// Largest-sample share of the total above which an estimate is flagged as
/// unreliable.
pub const DOMINANCE_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub n: usize,
    /// Number of batch means behind `stderr`.
    pub chunks: usize,
    /// `exp(mean_log)`; `+∞` if that overflows.
    pub mean: f64,
    pub mean_log: f64,
    pub stderr: f64,
    /// `log stderr`; `−∞` when the statistic is constant.
    pub stderr_log: f64,
    /// Global shift subtracted from every log-statistic before exponentiating.
    pub log_shift: f64,
    pub min_log: f64,
    pub max_log: f64,
}

impl McEstimate {
    /// An estimate known only through its mean and standard error.
    pub fn from_summary(n: usize, mean: f64, stderr: f64) -> Self {
        let mean_log = ln(mean);
        Self {
            n,
            chunks: n.min(crate::rng::MAX_CHUNKS),
            mean,
            mean_log,
            stderr,
            stderr_log: ln(stderr),
            log_shift: mean_log,
            min_log: mean_log,
            max_log: mean_log,
        }
    }

    /// `stderr / mean`, computed from the logs.
    pub fn relative_stderr(&self) -> f64 {
        exp(self.stderr_log - self.mean_log)
    }

    /// Log of the share of the sample total contributed by the largest sample.
    pub fn max_share_log(&self) -> f64 {
        self.max_log - (ln(self.n as f64) + self.mean_log)
    }

    /// True when a single sample dominates the sum.
    pub fn is_unreliable(&self) -> bool {
        self.max_share_log() > ln(DOMINANCE_SHARE)
    }
}

/// Running reduction of one chunk's log-statistics.
#[derive(Debug, Clone, Copy)]
struct ChunkStats {
    count: usize,
    max_log: f64,
    min_log: f64,
    /// `Σ exp(s − max_log)`.
    scaled_sum: f64,
}

impl ChunkStats {
    fn new() -> Self {
        Self { count: 0, max_log: f64::NEG_INFINITY, min_log: f64::INFINITY, scaled_sum: 0.0 }
    }

    fn push(&mut self, s: f64) {
        self.count += 1;
        self.min_log = self.min_log.min(s);
        if s == f64::NEG_INFINITY {
            return;
        }
        if s > self.max_log {
            self.scaled_sum = self.scaled_sum * exp(self.max_log - s) + 1.0;
            self.max_log = s;
        } else {
            self.scaled_sum += exp(s - self.max_log);
        }
    }
}

fn reduce(stats: &[ChunkStats]) -> McEstimate {
    let n: usize = stats.iter().map(|c| c.count).sum();
    let nf = n as f64;
    let shift = stats.iter().fold(f64::NEG_INFINITY, |m, c| m.max(c.max_log));
    let min_log = stats.iter().fold(f64::INFINITY, |m, c| m.min(c.min_log));
    if shift == f64::NEG_INFINITY {
        // every sample was exactly zero
        return McEstimate {
            n,
            chunks: stats.len(),
            mean: 0.0,
            mean_log: f64::NEG_INFINITY,
            stderr: 0.0,
            stderr_log: f64::NEG_INFINITY,
            log_shift: shift,
            min_log,
            max_log: shift,
        };
    }
    let rescale = |c: &ChunkStats| if c.scaled_sum == 0.0 { 0.0 } else { c.scaled_sum * exp(c.max_log - shift) };
    let total = compensated_sum(stats.iter().map(rescale));
    let mean_scaled = total / nf;
    let mean_log = shift + ln(total) - ln(nf);

    let k = stats.len() as f64;
    let mut var = CompensatedSum::default();
    for c in stats {
        let w = c.count as f64 / nf;
        let dev = rescale(c) / c.count as f64 - mean_scaled;
        var.add(w * w * dev * dev);
    }
    let var = if stats.len() > 1 { var.value() * k / (k - 1.0) } else { f64::INFINITY };
    let se_scaled = sqrt(var);
    let stderr_log = shift + ln(se_scaled);
    McEstimate {
        n,
        chunks: stats.len(),
        mean: exp(mean_log),
        mean_log,
        stderr: exp(stderr_log),
        stderr_log,
        log_shift: shift,
        min_log,
        max_log: shift,
    }
}

/// Estimates `E[exp(s)]` where `make()` builds, once per chunk, a closure that
/// draws one log-statistic `s` from the chunk's random stream.
pub fn estimate_log_statistic<E, M, G>(n: usize, seed: u64, exec: &E, make: M) -> Result<McEstimate>
where
    E: Executor,
    M: Fn() -> G + Sync + Send,
    G: FnMut(&mut StreamRng) -> f64,
{
    if n < 2 {
        return Err(Error::TooFewSamples { min: 2, found: n });
    }
    let plan = ChunkPlan::new(n);
    let stats = exec.map(plan.chunks(), |c| {
        let mut rng = stream_rng(seed, c as u64);
        let mut draw = make();
        let mut acc = ChunkStats::new();
        for _ in plan.range(c) {
            acc.push(draw(&mut rng));
        }
        acc
    });
    Ok(reduce(&stats))
}

fn check_query(params: &WishartParams, query: &MomentQuery) -> Result<()> {
    let p = params.dim();
    let total = query.partition().total();
    if total != p {
        return Err(Error::DimensionMismatch { expected: p, found: total });
    }
    Ok(())
}

/// Estimates `E ∏ᵢ |X_{1:Pᵢ,1:Pᵢ}|^{νᵢ}` from Bartlett draws, reading each
/// leading minor off the draw's triangular factor.
pub fn estimate_embedded<E: Executor>(
    params: &WishartParams,
    query: &MomentQuery,
    n: usize,
    seed: u64,
    exec: &E,
) -> Result<McEstimate> {
    params.require_nonsingular()?;
    check_query(params, query)?;
    let sampler = Sampler::new(params, Method::Bartlett)?;
    let sampler = &sampler;
    let partition = query.partition();
    let nu = query.nu();
    estimate_log_statistic(n, seed, exec, || {
        let mut ws = Workspace::new(sampler.dim());
        move |rng: &mut StreamRng| {
            sampler.bartlett_into(rng, &mut ws);
            let mut logdet = 0.0;
            let mut s = 0.0;
            for (i, &v) in nu.iter().enumerate() {
                for j in partition.block_range(i) {
                    logdet += 2.0 * ln(ws.t.diag(j));
                }
                if v != 0.0 {
                    s += v * logdet;
                }
            }
            s
        }
    })
}

/// Log-determinant of the principal block `rows` of `T Tᵀ`; `−∞` if the block
/// is numerically singular.
fn block_log_det(ws: &Workspace, rows: core::ops::Range<usize>) -> f64 {
    let t = &ws.t;
    let end = rows.end;
    if rows.len() == 1 {
        let r = rows.start;
        return ln((0..=r).map(|k| t.get(r, k) * t.get(r, k)).sum::<f64>());
    }
    let start = rows.start;
    let block = SymMatrix::from_lower_fn(rows.len(), |a, b| {
        let (ra, rb) = (start + a, start + b);
        (0..end).map(|k| t.get(ra, k) * t.get(rb, k)).sum()
    });
    match cholesky(&block) {
        Ok(l) => l.leading_log_det(l.dim()),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Estimates `E ∏ᵢ |X_{ii}|^{νᵢ}` over the disjoint diagonal blocks.
///
/// Nonsingular parameters use Bartlett draws with a Cholesky factorization
/// per block. In the singular integer regime every block must be `1 × 1`,
/// and the Gaussian-sum sampler supplies the diagonal entries.
pub fn estimate_disjoint<E: Executor>(
    params: &WishartParams,
    query: &MomentQuery,
    n: usize,
    seed: u64,
    exec: &E,
) -> Result<McEstimate> {
    check_query(params, query)?;
    let partition = query.partition();
    let nu = query.nu();
    let p = params.dim();
    match params.regime() {
        Regime::Nonsingular => {
            let sampler = Sampler::new(params, Method::Bartlett)?;
            let sampler = &sampler;
            estimate_log_statistic(n, seed, exec, || {
                let mut ws = Workspace::new(p);
                move |rng: &mut StreamRng| {
                    sampler.bartlett_into(rng, &mut ws);
                    let mut s = 0.0;
                    for (i, &v) in nu.iter().enumerate() {
                        if v != 0.0 {
                            s += v * block_log_det(&ws, partition.block_range(i));
                        }
                    }
                    s
                }
            })
        }
        Regime::SingularInteger => {
            if partition.sizes().iter().any(|&s| s != 1) {
                return Err(Error::SingularRegime { alpha: params.alpha(), p });
            }
            let sampler = Sampler::new(params, Method::GaussianSum)?;
            let sampler = &sampler;
            estimate_log_statistic(n, seed, exec, || {
                let mut ws = Workspace::new(p);
                move |rng: &mut StreamRng| {
                    sampler.gaussian_sum_into(rng, &mut ws);
                    nu.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| v * ln(ws.x[i * p + i])).sum()
                }
            })
        }
    }
}

/// Estimates `E ∏ᵢ |Zᵢ|^{2νᵢ}` for `Z ~ N(0, cov)`.
pub fn estimate_gaussian_products<E: Executor>(
    cov: &SpdMatrix,
    nu: &[f64],
    n: usize,
    seed: u64,
    exec: &E,
) -> Result<McEstimate> {
    let d = cov.dim();
    if nu.len() != d {
        return Err(Error::ExponentCount { expected: d, found: nu.len() });
    }
    if let Some((index, &value)) = nu.iter().enumerate().find(|(_, &v)| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::NegativeExponent { index, value });
    }
    let l = cov.factor();
    estimate_log_statistic(n, seed, exec, || {
        let mut g = alloc::vec![0.0; d];
        move |rng: &mut StreamRng| {
            for x in g.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            let mut s = 0.0;
            for (i, &v) in nu.iter().enumerate() {
                let z: f64 = (0..=i).map(|k| l.get(i, k) * g[k]).sum();
                if v != 0.0 {
                    s += v * ln(z * z);
                }
            }
            s
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    /// `|z| ≤ 4`.
    Consistent,
    /// `4 < |z| ≤ 6`.
    Suspicious,
    /// `|z| > 6`.
    Inconsistent,
}

impl Verdict {
    pub fn from_z(z: f64) -> Self {
        let a = abs(z);
        if a <= 4.0 {
            Verdict::Consistent
        } else if a <= 6.0 {
            Verdict::Suspicious
        } else {
            Verdict::Inconsistent
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Suspicious => "suspicious",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub exact_log: f64,
    pub mc: McEstimate,
    /// `(mean − exact) / stderr`.
    pub z: f64,
    pub verdict: Verdict,
}

/// z-score of an estimate against an exact log-moment. The score is formed
/// from `log mean − exact_log` and the relative standard error, so it stays
/// finite when the moment itself overflows.
pub fn compare(exact_log: f64, mc: &McEstimate) -> Result<ComparisonReport> {
    if mc.n < 2 {
        return Err(Error::TooFewSamples { min: 2, found: mc.n });
    }
    let rel_gap = -expm1(exact_log - mc.mean_log);
    let z = if mc.stderr == 0.0 {
        if abs(expm1(mc.mean_log - exact_log)) > 1e-12 {
            return Err(Error::DegenerateEstimate);
        }
        0.0
    } else {
        rel_gap / mc.relative_stderr()
    };
    Ok(ComparisonReport { exact_log, mc: *mc, z, verdict: Verdict::from_z(z) })
}
