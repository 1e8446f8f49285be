//! The Wishart law `W_p(α, Σ)`: parameters, log-density and samplers.
//!
//! Two samplers are provided so that each can check the other:
//!
//! - [`Method::Bartlett`] draws `X = (L A)(L A)ᵀ` with `Σ = L Lᵀ` and `A`
//!   lower triangular, `A_ii² ~ χ²(α − i + 1)` and `A_ij ~ N(0, 1)` below the
//!   diagonal. The triangular factor `T = L A` is kept with the draw, so
//!   leading principal minors are `∏ T_jj²`.
//! - [`Method::GaussianSum`] draws `X = Σ_{j=1}^{N} Z_j Z_jᵀ` with
//!   `Z_j ~ N(0, Σ)` for integer `α = N`. This also covers the singular
//!   integer regime `N ≤ p − 1`.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg::{LowerTriangular, SpdMatrix, SymMatrix};
use crate::math::{sqrt, LN_2};
use crate::rng::{stream_rng, ChunkPlan};
use crate::specfun::{log_multigamma, MultigammaArg};

/// Which part of the Gindikin set `{0, 1, …, p−1} ∪ (p−1, ∞)` the degrees of
/// freedom fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `α > p − 1`: the law has a density on the SPD cone.
    Nonsingular,
    /// `α ∈ {1, …, p − 1}`: draws have rank `α`.
    SingularInteger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WishartParams {
    alpha: f64,
    sigma: SpdMatrix,
    regime: Regime,
}

impl WishartParams {
    pub fn new(alpha: f64, sigma: SpdMatrix) -> Result<Self> {
        let p = sigma.dim();
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::NotInGindikinSet { alpha, p });
        }
        if alpha == 0.0 {
            return Err(Error::DegenerateAlpha);
        }
        let regime = if alpha > p as f64 - 1.0 {
            Regime::Nonsingular
        } else if libm::trunc(alpha) == alpha {
            Regime::SingularInteger
        } else {
            return Err(Error::NotInGindikinSet { alpha, p });
        };
        Ok(Self { alpha, sigma, regime })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub(crate) fn require_nonsingular(&self) -> Result<()> {
        match self.regime {
            Regime::Nonsingular => Ok(()),
            Regime::SingularInteger => Err(Error::SingularRegime { alpha: self.alpha, p: self.dim() }),
        }
    }

    fn integer_alpha(&self) -> Result<usize> {
        if libm::trunc(self.alpha) != self.alpha || self.alpha > u32::MAX as f64 {
            return Err(Error::NonIntegerAlpha(self.alpha));
        }
        Ok(self.alpha as usize)
    }
}

/// `log f_{α,Σ}(x)` in the nonsingular regime.
pub fn log_density(params: &WishartParams, x: &SpdMatrix) -> Result<f64> {
    params.require_nonsingular()?;
    let p = params.dim();
    if x.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, found: x.dim() });
    }
    let (alpha, pf) = (params.alpha, p as f64);
    let half_alpha = alpha / 2.0;
    let trace = params.sigma.trace_solve(x)?;
    let log_norm =
        half_alpha * (pf * LN_2 + params.sigma.log_det()) + log_multigamma(MultigammaArg::new(p, half_alpha)?);
    Ok((half_alpha - (pf + 1.0) / 2.0) * x.log_det() - trace / 2.0 - log_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bartlett,
    GaussianSum,
}

/// One Wishart draw. Bartlett draws also carry their lower-triangular factor
/// `T` with `matrix = T Tᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub matrix: SymMatrix,
    pub factor: Option<LowerTriangular>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub params: WishartParams,
    pub count: usize,
    pub seed: u64,
    pub method: Method,
    pub draws: Vec<Draw>,
}

/// Scratch buffers reused across draws.
#[derive(Debug, Clone)]
pub struct Workspace {
    a: LowerTriangular,
    pub(crate) t: LowerTriangular,
    z: Vec<f64>,
    g: Vec<f64>,
    /// Dense row-major accumulator for Gaussian-sum draws.
    pub(crate) x: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            a: LowerTriangular::zeros(dim),
            t: LowerTriangular::zeros(dim),
            z: vec![0.0; dim],
            g: vec![0.0; dim],
            x: vec![0.0; dim * dim],
        }
    }
}

/// A prepared sampler for one `(params, method)` pair.
#[derive(Debug, Clone)]
pub struct Sampler {
    method: Method,
    scale: LowerTriangular,
    chi: Vec<ChiSquared<f64>>,
    terms: usize,
}

impl Sampler {
    pub fn new(params: &WishartParams, method: Method) -> Result<Self> {
        let p = params.dim();
        let (chi, terms) = match method {
            Method::Bartlett => {
                params.require_nonsingular()?;
                let chi = (0..p).map(|i| ChiSquared::new(params.alpha - i as f64).expect("alpha > p - 1")).collect();
                (chi, 0)
            }
            Method::GaussianSum => (Vec::new(), params.integer_alpha()?),
        };
        Ok(Self { method, scale: params.sigma.factor().clone(), chi, terms })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    /// Fills `ws.t` with the Bartlett factor `L A`.
    pub(crate) fn bartlett_into<R: RngCore>(&self, rng: &mut R, ws: &mut Workspace) {
        let p = self.dim();
        for i in 0..p {
            for j in 0..i {
                ws.a.set(i, j, StandardNormal.sample(rng));
            }
            ws.a.set(i, i, sqrt(self.chi[i].sample(rng)));
        }
        let l = &self.scale;
        for i in 0..p {
            for j in 0..=i {
                let mut s = 0.0;
                for k in j..=i {
                    s += l.get(i, k) * ws.a.get(k, j);
                }
                ws.t.set(i, j, s);
            }
        }
    }

    /// Fills the lower triangle of `ws.x` with `Σ_j Z_j Z_jᵀ`.
    pub(crate) fn gaussian_sum_into<R: RngCore>(&self, rng: &mut R, ws: &mut Workspace) {
        let p = self.dim();
        ws.x.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.terms {
            for g in ws.g.iter_mut() {
                *g = StandardNormal.sample(rng);
            }
            for i in 0..p {
                ws.z[i] = (0..=i).map(|k| self.scale.get(i, k) * ws.g[k]).sum();
            }
            for i in 0..p {
                for j in 0..=i {
                    ws.x[i * p + j] += ws.z[i] * ws.z[j];
                }
            }
        }
    }

    pub fn draw<R: RngCore>(&self, rng: &mut R, ws: &mut Workspace) -> Draw {
        let p = self.dim();
        match self.method {
            Method::Bartlett => {
                self.bartlett_into(rng, ws);
                Draw { matrix: ws.t.gram(), factor: Some(ws.t.clone()) }
            }
            Method::GaussianSum => {
                self.gaussian_sum_into(rng, ws);
                Draw { matrix: SymMatrix::from_lower_fn(p, |i, j| ws.x[i * p + j]), factor: None }
            }
        }
    }
}

/// The draws of chunk `c` of `plan`, on substream `c` of `seed`.
pub fn sample_chunk(sampler: &Sampler, plan: &ChunkPlan, c: usize, seed: u64) -> Vec<Draw> {
    let mut rng = stream_rng(seed, c as u64);
    let mut ws = Workspace::new(sampler.dim());
    plan.range(c).map(|_| sampler.draw(&mut rng, &mut ws)).collect()
}

/// Draws `count` matrices with the given method. Chunk `c` of the layout in
/// [`ChunkPlan`] uses substream `c` of `seed`.
pub fn sample<E: Executor>(
    params: &WishartParams,
    method: Method,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<SampleBatch> {
    let sampler = Sampler::new(params, method)?;
    let plan = ChunkPlan::new(count);
    let chunks = exec.map(plan.chunks(), |c| sample_chunk(&sampler, &plan, c, seed));
    Ok(SampleBatch { params: params.clone(), count, seed, method, draws: chunks.into_iter().flatten().collect() })
}

pub fn sample_bartlett<E: Executor>(params: &WishartParams, count: usize, seed: u64, exec: &E) -> Result<SampleBatch> {
    sample(params, Method::Bartlett, count, seed, exec)
}

pub fn sample_gaussian_sum<E: Executor>(
    params: &WishartParams,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<SampleBatch> {
    sample(params, Method::GaussianSum, count, seed, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::linalg::cholesky;
    use crate::math::abs;

    fn spd(dim: usize, data: &[f64]) -> SpdMatrix {
        SpdMatrix::new(SymMatrix::from_rows(dim, data.to_vec()).unwrap()).unwrap()
    }

    fn params(alpha: f64, sigma: SpdMatrix) -> WishartParams {
        WishartParams::new(alpha, sigma).unwrap()
    }

    /// Mean and standard error of a stream of values.
    fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
        for x in xs {
            n += 1.0;
            s += x;
            s2 += x * x;
        }
        let m = s / n;
        (m, sqrt((s2 / n - m * m) / (n - 1.0)))
    }

    #[test]
    fn regime_classification() {
        let s3 = SpdMatrix::identity(3);
        assert_eq!(params(2.5, s3.clone()).regime(), Regime::Nonsingular);
        assert_eq!(params(2.0, s3.clone()).regime(), Regime::SingularInteger);
        assert_eq!(params(1.0, s3.clone()).regime(), Regime::SingularInteger);
        assert!(matches!(WishartParams::new(1.5, s3.clone()), Err(Error::NotInGindikinSet { .. })));
        assert!(matches!(WishartParams::new(0.0, s3.clone()), Err(Error::DegenerateAlpha)));
        assert!(WishartParams::new(-1.0, s3.clone()).is_err());
        assert!(WishartParams::new(f64::INFINITY, s3).is_err());
    }

    #[test]
    fn log_density_univariate() {
        let p = params(2.0, SpdMatrix::identity(1));
        let v = log_density(&p, &spd(1, &[2.0])).unwrap();
        assert!(abs(v - (-1.693_147_180_559_945_3)) < 1e-14);
    }

    #[test]
    fn log_density_mode_univariate() {
        // x^{α/2−1} e^{−x/2} with α = 4 peaks at x = 2
        let p = params(4.0, SpdMatrix::identity(1));
        let f = |x: f64| log_density(&p, &spd(1, &[x])).unwrap();
        let h = 1e-5;
        assert!(abs((f(2.0 + h) - f(2.0 - h)) / (2.0 * h)) < 1e-8);
        assert!(f(2.0) > f(1.9) && f(2.0) > f(2.1));
    }

    #[test]
    fn log_density_bivariate_identity() {
        let p = params(3.0, SpdMatrix::identity(2));
        let v = log_density(&p, &SpdMatrix::identity(2)).unwrap();
        assert!(abs(v - (-3.531_024_246_969_290_8)) < 1e-13);
    }

    #[test]
    fn log_density_errors() {
        let sing = params(1.0, SpdMatrix::identity(2));
        assert!(matches!(log_density(&sing, &SpdMatrix::identity(2)), Err(Error::SingularRegime { .. })));
        let p = params(3.0, SpdMatrix::identity(2));
        assert!(matches!(log_density(&p, &SpdMatrix::identity(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sampler_method_checks() {
        let sing = params(1.0, SpdMatrix::identity(2));
        assert!(matches!(Sampler::new(&sing, Method::Bartlett), Err(Error::SingularRegime { .. })));
        let frac = params(2.5, SpdMatrix::identity(2));
        assert!(matches!(Sampler::new(&frac, Method::GaussianSum), Err(Error::NonIntegerAlpha(_))));
    }

    #[test]
    fn empty_batch() {
        let p = params(3.0, SpdMatrix::identity(2));
        let b = sample_bartlett(&p, 0, 1, &Sequential).unwrap();
        assert!(b.draws.is_empty());
    }

    #[test]
    fn bartlett_draws_are_spd_and_carry_factor() {
        let p = params(4.2, spd(3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5]));
        let b = sample_bartlett(&p, 200, 9, &Sequential).unwrap();
        assert_eq!(b.draws.len(), 200);
        for d in &b.draws {
            let t = d.factor.as_ref().unwrap();
            assert!(cholesky(&d.matrix).is_ok());
            assert_eq!(t.gram(), d.matrix);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let p = params(4.0, spd(2, &[2.0, 1.0, 1.0, 3.0]));
        for m in [Method::Bartlett, Method::GaussianSum] {
            assert_eq!(sample(&p, m, 300, 5, &Sequential).unwrap(), sample(&p, m, 300, 5, &Sequential).unwrap());
            assert_ne!(sample(&p, m, 300, 5, &Sequential).unwrap(), sample(&p, m, 300, 6, &Sequential).unwrap());
        }
    }

    #[test]
    fn rank_one_gaussian_sum_is_singular() {
        let p = params(1.0, spd(2, &[2.0, 0.3, 0.3, 1.0]));
        for d in sample_gaussian_sum(&p, 100, 3, &Sequential).unwrap().draws {
            let m = &d.matrix;
            let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
            assert!(abs(det) <= 1e-12 * m.get(0, 0) * m.get(1, 1));
        }
    }

    #[test]
    fn gaussian_sum_univariate_mean() {
        let p = params(1.0, SpdMatrix::identity(1));
        let b = sample_gaussian_sum(&p, 1_000_000, 11, &Sequential).unwrap();
        let (m, se) = mean_se(b.draws.iter().map(|d| d.matrix.get(0, 0)));
        assert!(abs(m - 1.0) <= 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn gaussian_sum_identity_mean() {
        let p = params(3.0, SpdMatrix::identity(2));
        let b = sample_gaussian_sum(&p, 1_000_000, 12, &Sequential).unwrap();
        for (i, j, want) in [(0, 0, 3.0), (1, 1, 3.0), (0, 1, 0.0)] {
            let (m, se) = mean_se(b.draws.iter().map(|d| d.matrix.get(i, j)));
            assert!(abs(m - want) <= 4.0 * se, "({i},{j}): {m} ± {se}");
        }
    }

    #[test]
    fn bartlett_univariate_mean() {
        let p = params(2.0, SpdMatrix::identity(1));
        let b = sample_bartlett(&p, 1_000_000, 13, &Sequential).unwrap();
        let (m, se) = mean_se(b.draws.iter().map(|d| d.matrix.get(0, 0)));
        assert!(abs(m - 2.0) <= 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn bartlett_bivariate_mean() {
        let sigma = spd(2, &[2.0, 1.0, 1.0, 3.0]);
        let p = params(5.0, sigma.clone());
        let b = sample_bartlett(&p, 1_000_000, 14, &Sequential).unwrap();
        for i in 0..2 {
            for j in 0..=i {
                let (m, se) = mean_se(b.draws.iter().map(|d| d.matrix.get(i, j)));
                let want = 5.0 * sigma.matrix().get(i, j);
                assert!(abs(m - want) <= 4.0 * se, "({i},{j}): {m} vs {want} ± {se}");
            }
        }
    }

    #[test]
    fn chi_square_moments() {
        // χ²_k: mean k, variance 2k, third central moment 8k
        for k in [0.7, 2.5, 9.0] {
            let chi = ChiSquared::new(k).unwrap();
            let mut rng = stream_rng(99, 0);
            let n = 1_000_000;
            let xs: Vec<f64> = (0..n).map(|_| chi.sample(&mut rng)).collect();
            let (m, se) = mean_se(xs.iter().copied());
            assert!(abs(m - k) <= 5.0 * se, "mean k={k}");
            let (v, se_v) = mean_se(xs.iter().map(|x| (x - k) * (x - k)));
            assert!(abs(v - 2.0 * k) <= 5.0 * se_v, "var k={k}");
            let (c3, se_c3) = mean_se(xs.iter().map(|x| (x - k) * (x - k) * (x - k)));
            assert!(abs(c3 - 8.0 * k) <= 5.0 * se_c3, "third k={k}: {c3} ± {se_c3}");
        }
    }

    #[test]
    fn log_det_of_bartlett_factor_matches_matrix() {
        let p = params(4.5, spd(3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.4, 0.0, 0.4, 1.0]));
        for d in sample_bartlett(&p, 50, 2, &Sequential).unwrap().draws {
            let from_t = d.factor.unwrap().leading_log_det(3);
            let direct = SpdMatrix::new(d.matrix).unwrap().log_det();
            assert!(abs(from_t - direct) <= 1e-12 * abs(direct).max(1.0));
        }
    }
}
