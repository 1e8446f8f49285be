//! Numerical exploration of product inequalities for disjoint minors.
//!
//! For `X ~ W_p(α, Σ)` split into diagonal blocks `X₁₁, …, X_dd`, the
//! conjectured inequality is `E ∏ |Xᵢᵢ|^{νᵢ} ≥ ∏ E |Xᵢᵢ|^{νᵢ}`. The Gaussian
//! analogue replaces `|Xᵢᵢ|` by `Zᵢ²` for a centered Gaussian vector `Z`.
//! The numerator is estimated by Monte Carlo; the denominator is always
//! exact. Nothing here claims a counterexample: a trial is only ever
//! consistent with the inequality or flagged for attention.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg::{BlockPartition, SpdMatrix, SymMatrix};
use crate::math::{abs, compensated_sum, exp, expm1, ln_gamma, sqrt, LN_2};
use crate::moments::{single_minor_moment_log, MomentQuery};
use crate::montecarlo::{estimate_disjoint, estimate_gaussian_products, McEstimate, Verdict};
use crate::rng::{derive_seed, stream_rng};
use crate::wishart::WishartParams;

#[derive(Debug, Clone, PartialEq)]
pub enum GpiKind {
    /// Disjoint diagonal blocks of `W_p(α, Σ)` given by the query's partition.
    Wishart { params: WishartParams, query: MomentQuery },
    /// Coordinates of `Z ~ N(0, R)` for a correlation matrix `R`.
    Gaussian { correlation: SpdMatrix, nu: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpiInstance {
    pub kind: GpiKind,
    pub label: String,
}

impl GpiInstance {
    pub fn wishart(params: WishartParams, query: MomentQuery, label: impl Into<String>) -> Result<Self> {
        params.require_nonsingular()?;
        if query.partition().total() != params.dim() {
            return Err(Error::DimensionMismatch { expected: params.dim(), found: query.partition().total() });
        }
        Ok(Self { kind: GpiKind::Wishart { params, query }, label: label.into() })
    }

    pub fn gaussian(correlation: SpdMatrix, nu: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let d = correlation.dim();
        if let Some(index) = (0..d).find(|&i| correlation.matrix().get(i, i) != 1.0) {
            return Err(Error::NotCorrelation { index, value: correlation.matrix().get(index, index) });
        }
        // reuse the query validation for the exponents
        let query = MomentQuery::new(BlockPartition::singletons(d)?, nu)?;
        Ok(Self { kind: GpiKind::Gaussian { correlation, nu: query.nu().to_vec() }, label: label.into() })
    }

    pub fn nu(&self) -> &[f64] {
        match &self.kind {
            GpiKind::Wishart { query, .. } => query.nu(),
            GpiKind::Gaussian { nu, .. } => nu,
        }
    }

    /// The scale (Wishart) or correlation (Gaussian) matrix.
    pub fn matrix(&self) -> &SpdMatrix {
        match &self.kind {
            GpiKind::Wishart { params, .. } => params.sigma(),
            GpiKind::Gaussian { correlation, .. } => correlation,
        }
    }
}

/// `log ∏ᵢ E|Xᵢᵢ|^{νᵢ}` (Wishart) or `log ∏ᵢ E|Zᵢ|^{2νᵢ}` (Gaussian).
pub fn denominator_log(instance: &GpiInstance) -> Result<f64> {
    match &instance.kind {
        GpiKind::Wishart { params, query } => {
            let partition = query.partition();
            let terms = (0..partition.len())
                .map(|i| {
                    let block = SpdMatrix::new(params.sigma().matrix().principal(partition.block_range(i)))?;
                    single_minor_moment_log(params.alpha(), &block, query.nu()[i])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(compensated_sum(terms))
        }
        GpiKind::Gaussian { correlation, nu } => Ok(compensated_sum(
            nu.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| gaussian_abs_moment_log(correlation.matrix().get(i, i), v)),
        )),
    }
}

/// `log E|Z|^{2ν}` for `Z ~ N(0, var)`: `ν log(2 var) + log Γ(ν + 1/2) − log Γ(1/2)`.
pub fn gaussian_abs_moment_log(var: f64, nu: f64) -> f64 {
    if nu == 0.0 {
        return 0.0;
    }
    nu * (LN_2 + libm::log(var)) + ln_gamma(nu + 0.5) - ln_gamma(0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpiResult {
    pub numerator: McEstimate,
    pub denominator_log: f64,
    pub ratio: f64,
    pub ratio_log: f64,
    pub ratio_stderr: f64,
    /// `(ratio − 1) / ratio_stderr`; negative values point towards a violation.
    pub violation_z: f64,
    /// One-sided: only evidence of `ratio < 1` counts against the inequality.
    pub verdict: Verdict,
    pub instance: GpiInstance,
}

pub fn gpi_ratio<E: Executor>(instance: &GpiInstance, n: usize, seed: u64, exec: &E) -> Result<GpiResult> {
    let numerator = match &instance.kind {
        GpiKind::Wishart { params, query } => estimate_disjoint(params, query, n, seed, exec)?,
        GpiKind::Gaussian { correlation, nu } => estimate_gaussian_products(correlation, nu, n, seed, exec)?,
    };
    let denominator_log = denominator_log(instance)?;
    let ratio_log = numerator.mean_log - denominator_log;
    let ratio_stderr = exp(numerator.stderr_log - denominator_log);
    let violation_z = if numerator.stderr == 0.0 {
        if abs(expm1(ratio_log)) > 1e-12 {
            return Err(Error::DegenerateEstimate);
        }
        0.0
    } else {
        expm1(ratio_log) / ratio_stderr
    };
    Ok(GpiResult {
        numerator,
        denominator_log,
        ratio: exp(ratio_log),
        ratio_log,
        ratio_stderr,
        violation_z,
        verdict: Verdict::from_z(violation_z.min(0.0)),
        instance: instance.clone(),
    })
}

const MAX_CORRELATION_ATTEMPTS: usize = 8;

/// A random correlation matrix `D^{-1/2} G D^{-1/2}`, where `G` is the Gram
/// matrix of `dim` standard normal vectors of length `dim + 2` and
/// `D = diag(G)`.
pub fn random_correlation<R: RngCore>(dim: usize, rng: &mut R) -> Result<SpdMatrix> {
    if dim == 0 {
        return Err(Error::InvalidConfig("correlation dimension must be positive".into()));
    }
    let len = dim + 2;
    let mut v = vec![0.0; len * dim];
    for _ in 0..MAX_CORRELATION_ATTEMPTS {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let gram = |i: usize, j: usize| (0..len).map(|r| v[r * dim + i] * v[r * dim + j]).sum::<f64>();
        let diag: Vec<f64> = (0..dim).map(|i| gram(i, i)).collect();
        let r = SymMatrix::from_lower_fn(dim, |i, j| if i == j { 1.0 } else { gram(i, j) / sqrt(diag[i] * diag[j]) });
        if let Ok(spd) = SpdMatrix::new(r) {
            return Ok(spd);
        }
    }
    Err(Error::RetriesExhausted(MAX_CORRELATION_ATTEMPTS))
}

/// `(1 − ρ) I + ρ 1 1ᵀ`.
pub fn equicorrelation(dim: usize, rho: f64) -> Result<SpdMatrix> {
    SpdMatrix::new(SymMatrix::from_lower_fn(dim, |i, j| if i == j { 1.0 } else { rho }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchKind {
    Wishart,
    Gaussian,
}

/// How the scale/correlation matrix of each trial is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel {
    /// [`random_correlation`] over the full dimension.
    Random,
    /// Independent random correlations inside each block, zeros across blocks.
    /// For the Gaussian kind (unit blocks) this is the identity.
    BlockDiagonal,
    /// Equicorrelation with `ρ` cycling through the grid by trial index.
    Equicorrelation(Vec<f64>),
}

pub const DEFAULT_NU_GRID: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];

/// Factor applied to the sample size when a trial is re-run.
pub const ESCALATION_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub kind: SearchKind,
    /// Inclusive range of the number of blocks `d`.
    pub dims: (usize, usize),
    /// Inclusive range of each block size (Wishart only).
    pub block_sizes: (usize, usize),
    /// Range of the degrees of freedom `α` (Wishart only); the lower end must
    /// exceed `p − 1` for the largest reachable `p`.
    pub alpha_range: (f64, f64),
    /// Each exponent is drawn uniformly from this grid.
    pub nu_grid: Vec<f64>,
    pub correlation: CorrelationModel,
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            kind: SearchKind::Wishart,
            dims: (2, 3),
            block_sizes: (1, 1),
            alpha_range: (2.5, 8.0),
            nu_grid: DEFAULT_NU_GRID.to_vec(),
            correlation: CorrelationModel::Random,
            trials: 100,
            samples: 100_000,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.samples < 2 {
            return bad("samples must be at least 2".into());
        }
        if self.dims.0 == 0 || self.dims.0 > self.dims.1 {
            return bad(format!("dims range {}..{} is empty or starts at 0", self.dims.0, self.dims.1));
        }
        if self.nu_grid.is_empty() || self.nu_grid.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return bad("nu grid must be nonempty with finite nonnegative entries".into());
        }
        if let CorrelationModel::Equicorrelation(grid) = &self.correlation {
            if grid.is_empty() {
                return bad("rho grid must be nonempty".into());
            }
            let max_p = match self.kind {
                SearchKind::Wishart => self.dims.1 * self.block_sizes.1,
                SearchKind::Gaussian => self.dims.1,
            };
            for &rho in grid {
                for p in 1..=max_p {
                    if equicorrelation(p, rho).is_err() {
                        return bad(format!("rho = {rho} is not positive definite in dimension {p}"));
                    }
                }
            }
        }
        if self.kind == SearchKind::Wishart {
            if self.block_sizes.0 == 0 || self.block_sizes.0 > self.block_sizes.1 {
                return bad("block size range is empty or starts at 0".into());
            }
            let (lo, hi) = self.alpha_range;
            let max_p = self.dims.1 * self.block_sizes.1;
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return bad(format!("alpha range {lo}..{hi} is empty"));
            }
            if !(lo > max_p as f64 - 1.0) {
                return bad(format!("alpha range must satisfy alpha > p - 1 = {} for p up to {max_p}", max_p - 1));
            }
        }
        Ok(())
    }
}

/// One evaluation of a trial's ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Pass {
    pub seed: u64,
    pub samples: usize,
    pub result: GpiResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub instance_seed: u64,
    /// Equicorrelation parameter, when that model produced the matrix.
    pub rho: Option<f64>,
    pub first: Pass,
    /// Re-run at [`ESCALATION_FACTOR`] times the samples on a fresh stream,
    /// made whenever the first pass is not consistent.
    pub escalated: Option<Pass>,
}

impl TrialRecord {
    /// The pass whose verdict is reported.
    pub fn reported(&self) -> &Pass {
        self.escalated.as_ref().unwrap_or(&self.first)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub config: SearchConfig,
    /// Sorted by ascending reported `violation_z`, ties by trial index.
    pub trials: Vec<TrialRecord>,
}

const TAG_INSTANCE: u64 = 0x696e_7374;
const TAG_ESTIMATE: u64 = 0x6573_7469;
const TAG_ESCALATE: u64 = 0x6573_6361;

fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick<R: RngCore>(rng: &mut R, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

fn block_diagonal<R: RngCore>(sizes: &[usize], rng: &mut R) -> Result<SpdMatrix> {
    let p: usize = sizes.iter().sum();
    let mut data = vec![0.0; p * p];
    let mut start = 0;
    for &s in sizes {
        let r = random_correlation(s, rng)?;
        for i in 0..s {
            for j in 0..s {
                data[(start + i) * p + start + j] = r.matrix().get(i, j);
            }
        }
        start += s;
    }
    SpdMatrix::new(SymMatrix::from_rows(p, data)?)
}

/// Builds the instance of trial `t`; depends only on `(config, t)`.
pub fn trial_instance(config: &SearchConfig, t: usize) -> Result<(GpiInstance, Option<f64>, u64)> {
    let instance_seed = derive_seed(config.seed, TAG_INSTANCE, t as u64);
    let mut rng = stream_rng(instance_seed, 0);
    let d = pick(&mut rng, config.dims.0, config.dims.1);
    let sizes: Vec<usize> = match config.kind {
        SearchKind::Wishart => (0..d).map(|_| pick(&mut rng, config.block_sizes.0, config.block_sizes.1)).collect(),
        SearchKind::Gaussian => vec![1; d],
    };
    let p: usize = sizes.iter().sum();
    let alpha = match config.kind {
        SearchKind::Wishart => config.alpha_range.0 + (config.alpha_range.1 - config.alpha_range.0) * uniform(&mut rng),
        SearchKind::Gaussian => 1.0,
    };
    let nu: Vec<f64> = (0..d).map(|_| config.nu_grid[pick(&mut rng, 0, config.nu_grid.len() - 1)]).collect();
    let (matrix, rho) = match &config.correlation {
        CorrelationModel::Random => (random_correlation(p, &mut rng)?, None),
        CorrelationModel::BlockDiagonal => (block_diagonal(&sizes, &mut rng)?, None),
        CorrelationModel::Equicorrelation(grid) => {
            let rho = grid[t % grid.len()];
            (equicorrelation(p, rho)?, Some(rho))
        }
    };
    let label = format!("trial-{t}");
    let instance = match config.kind {
        SearchKind::Wishart => {
            let query = MomentQuery::new(BlockPartition::new(sizes)?, nu)?;
            GpiInstance::wishart(WishartParams::new(alpha, matrix)?, query, label)?
        }
        SearchKind::Gaussian => GpiInstance::gaussian(matrix, nu, label)?,
    };
    Ok((instance, rho, instance_seed))
}

/// Runs trial `t` of a search, escalating once if the first pass is not
/// consistent with the inequality.
pub fn run_trial<E: Executor>(config: &SearchConfig, t: usize, exec: &E) -> Result<TrialRecord> {
    let (instance, rho, instance_seed) = trial_instance(config, t)?;
    let seed = derive_seed(config.seed, TAG_ESTIMATE, t as u64);
    let first = Pass { seed, samples: config.samples, result: gpi_ratio(&instance, config.samples, seed, exec)? };
    let escalated = if first.result.verdict != Verdict::Consistent {
        let seed = derive_seed(config.seed, TAG_ESCALATE, t as u64);
        let samples = config.samples.saturating_mul(ESCALATION_FACTOR);
        Some(Pass { seed, samples, result: gpi_ratio(&instance, samples, seed, exec)? })
    } else {
        None
    };
    Ok(TrialRecord { trial: t, instance_seed, rho, first, escalated })
}

pub fn search<E: Executor>(config: &SearchConfig, exec: &E) -> Result<SearchReport> {
    config.validate()?;
    let mut trials = exec.map(config.trials, |t| run_trial(config, t, exec)).into_iter().collect::<Result<Vec<_>>>()?;
    trials.sort_by(|a, b| {
        a.reported().result.violation_z.total_cmp(&b.reported().result.violation_z).then(a.trial.cmp(&b.trial))
    });
    Ok(SearchReport { config: config.clone(), trials })
}
