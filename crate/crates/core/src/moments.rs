//! Closed-form log-moments of principal minors of `X ~ W_p(α, Σ)`.
//!
//! For a partition `p = p₁ + ⋯ + p_d` with prefix sums `Pᵢ`, exponents
//! `νᵢ ≥ 0` and suffix sums `Vᵢ = νᵢ + ⋯ + ν_d`,
//!
//! ```text
//! log E ∏ᵢ |X_{1:Pᵢ,1:Pᵢ}|^{νᵢ}
//!     = Σᵢ νᵢ (Pᵢ log 2 + log |Σ_{1:Pᵢ,1:Pᵢ}|)
//!     + Σᵢ [log Γ_{pᵢ}(α/2 − P_{i−1}/2 + Vᵢ) − log Γ_{pᵢ}(α/2 − P_{i−1}/2)].
//! ```
//!
//! Peeling off the leading block by a Schur complement leaves a Wishart
//! matrix with `p₁` fewer degrees of freedom that is independent of the
//! peeled block, and `|X_{1:Pᵢ}|` factors into the top-left determinants of
//! the first `i` stages; the exponent of stage `k` is then `V_k`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{leading_logdets, BlockPartition, SpdMatrix, SymMatrix};
use crate::math::{abs, compensated_sum, LN_2};
use crate::specfun::log_multigamma_ratio;
use crate::wishart::WishartParams;

/// Off-diagonal block entries up to this multiple of the largest diagonal
/// entry count as zero.
pub const BLOCK_DIAGONAL_TOL: f64 = 1e-12;

/// A block partition together with nonnegative exponents, one per block.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentQuery {
    partition: BlockPartition,
    nu: Vec<f64>,
    suffix: Vec<f64>,
}

impl MomentQuery {
    pub fn new(partition: BlockPartition, nu: Vec<f64>) -> Result<Self> {
        if nu.len() != partition.len() {
            return Err(Error::ExponentCount { expected: partition.len(), found: nu.len() });
        }
        if let Some((index, &value)) = nu.iter().enumerate().find(|(_, &v)| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::NegativeExponent { index, value });
        }
        let mut suffix = nu.clone();
        for k in (0..suffix.len().saturating_sub(1)).rev() {
            suffix[k] += suffix[k + 1];
        }
        Ok(Self { partition, nu, suffix })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// `V₁, …, V_d`.
    pub fn suffix(&self) -> &[f64] {
        &self.suffix
    }

    pub fn is_trivial(&self) -> bool {
        self.nu.iter().all(|&v| v == 0.0)
    }
}

/// The contribution of block `i` to the log-moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentFactor {
    pub block: usize,
    /// `νᵢ (Pᵢ log 2 + log |Σ_{1:Pᵢ,1:Pᵢ}|)`.
    pub log_det_term: f64,
    /// `log Γ_{pᵢ}(βᵢ + Vᵢ) − log Γ_{pᵢ}(βᵢ)` with `βᵢ = α/2 − P_{i−1}/2`.
    pub log_gamma_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoment {
    pub log_value: f64,
    pub factors: Vec<MomentFactor>,
}

impl ExactMoment {
    /// `exp(log_value)`, which is `+∞` when it overflows.
    pub fn value(&self) -> f64 {
        libm::exp(self.log_value)
    }
}

fn require_alpha(alpha: f64, p: usize) -> Result<()> {
    let bound = p as f64 - 1.0;
    if !(alpha > bound) || !alpha.is_finite() {
        return Err(Error::AlphaOutOfRange { alpha, bound });
    }
    Ok(())
}

/// `log E |X|^ν` for `X ~ W_p(α, Σ)`.
pub fn single_minor_moment_log(alpha: f64, sigma: &SpdMatrix, nu: f64) -> Result<f64> {
    let p = sigma.dim();
    require_alpha(alpha, p)?;
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::NegativeExponent { index: 0, value: nu });
    }
    if nu == 0.0 {
        return Ok(0.0);
    }
    Ok(nu * (p as f64 * LN_2 + sigma.log_det()) + log_multigamma_ratio(p, alpha / 2.0, nu)?)
}

/// `log E ∏ᵢ |X_{1:Pᵢ,1:Pᵢ}|^{νᵢ}` for the nested leading minors of the query's
/// partition.
pub fn embedded_moment_log(alpha: f64, sigma: &SpdMatrix, query: &MomentQuery) -> Result<ExactMoment> {
    let p = sigma.dim();
    require_alpha(alpha, p)?;
    let partition = query.partition();
    let logdets = leading_logdets(sigma, partition)?;
    let prefix = partition.prefix();
    let mut factors = Vec::with_capacity(partition.len());
    for (i, &size) in partition.sizes().iter().enumerate() {
        let nu = query.nu[i];
        let log_det_term = if nu == 0.0 { 0.0 } else { nu * (prefix[i + 1] as f64 * LN_2 + logdets[i]) };
        let beta = alpha / 2.0 - prefix[i] as f64 / 2.0;
        let log_gamma_term = log_multigamma_ratio(size, beta, query.suffix[i])?;
        factors.push(MomentFactor { block: i, log_det_term, log_gamma_term });
    }
    let log_value = compensated_sum(factors.iter().flat_map(|f| [f.log_det_term, f.log_gamma_term]));
    Ok(ExactMoment { log_value, factors })
}

/// Checks that every entry outside the diagonal blocks of `partition` is
/// zero up to [`BLOCK_DIAGONAL_TOL`] times the largest diagonal entry, and
/// reports the worst offender otherwise.
pub fn check_block_diagonal(sigma: &SymMatrix, partition: &BlockPartition) -> Result<()> {
    let p = sigma.dim();
    if partition.total() != p {
        return Err(Error::DimensionMismatch { expected: p, found: partition.total() });
    }
    let scale = (0..p).fold(0.0_f64, |m, i| m.max(abs(sigma.get(i, i))));
    let mut block_of = Vec::with_capacity(p);
    for b in 0..partition.len() {
        block_of.extend(partition.block_range(b).map(|_| b));
    }
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..p {
        for j in 0..i {
            let v = sigma.get(i, j);
            if block_of[i] != block_of[j]
                && abs(v) > BLOCK_DIAGONAL_TOL * scale
                && worst.is_none_or(|(_, _, w)| abs(v) > abs(w))
            {
                worst = Some((i, j, v));
            }
        }
    }
    match worst {
        Some((row, col, value)) => Err(Error::NotBlockDiagonal { row, col, value }),
        None => Ok(()),
    }
}

/// `log E ∏ᵢ |X_{ii}|^{νᵢ}` for the disjoint diagonal blocks, valid only when
/// `Σ` is block-diagonal. The blocks are then independent and each is
/// `W_{pᵢ}(α, Σᵢᵢ)` with the full `α`, so `α` only has to exceed `pᵢ − 1`
/// for every block (on top of being a valid parameter for `W_p`).
pub fn disjoint_moment_block_diag_log(alpha: f64, sigma: &SpdMatrix, query: &MomentQuery) -> Result<f64> {
    WishartParams::new(alpha, sigma.clone())?;
    let partition = query.partition();
    check_block_diagonal(sigma.matrix(), partition)?;
    let terms = (0..partition.len())
        .map(|i| {
            let block = SpdMatrix::new(sigma.matrix().principal(partition.block_range(i)))?;
            single_minor_moment_log(alpha, &block, query.nu[i])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;
    use alloc::vec;
    use proptest::prelude::*;

    fn spd(dim: usize, data: &[f64]) -> SpdMatrix {
        SpdMatrix::new(SymMatrix::from_rows(dim, data.to_vec()).unwrap()).unwrap()
    }

    fn query(sizes: &[usize], nu: &[f64]) -> MomentQuery {
        MomentQuery::new(BlockPartition::new(sizes.to_vec()).unwrap(), nu.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        abs(a - b) <= tol * abs(b).max(1.0)
    }

    #[test]
    fn query_suffix_sums() {
        let q = query(&[1, 2, 1], &[0.5, 1.0, 0.25]);
        assert_eq!(q.suffix(), &[1.75, 1.25, 0.25]);
        assert!(matches!(
            MomentQuery::new(BlockPartition::new(vec![1, 1]).unwrap(), vec![1.0]),
            Err(Error::ExponentCount { .. })
        ));
        assert!(matches!(
            MomentQuery::new(BlockPartition::new(vec![1, 1]).unwrap(), vec![1.0, -0.5]),
            Err(Error::NegativeExponent { index: 1, .. })
        ));
    }

    #[test]
    fn single_minor_examples() {
        let i1 = SpdMatrix::identity(1);
        assert!(close(single_minor_moment_log(2.0, &i1, 1.0).unwrap(), ln(2.0), 1e-14));
        assert_eq!(single_minor_moment_log(2.0, &i1, 0.0).unwrap(), 0.0);
        // E|X| = α(α − 1)|Σ| for p = 2
        assert!(close(single_minor_moment_log(3.0, &SpdMatrix::identity(2), 1.0).unwrap(), ln(6.0), 1e-14));
        assert!(matches!(
            single_minor_moment_log(1.0, &SpdMatrix::identity(2), 1.0),
            Err(Error::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn embedded_examples() {
        let sigma = spd(3, &[2.0, 0.4, 0.1, 0.4, 1.0, 0.2, 0.1, 0.2, 3.0]);
        assert_eq!(embedded_moment_log(3.5, &sigma, &query(&[1, 2], &[0.0, 0.0])).unwrap().log_value, 0.0);

        let single = embedded_moment_log(3.5, &sigma, &query(&[3], &[1.3])).unwrap();
        assert!(close(single.log_value, single_minor_moment_log(3.5, &sigma, 1.3).unwrap(), 1e-14));

        // c₁⁴ c₂² with c₁² ~ χ²₃ and c₂² ~ χ²₂: 15 · 2
        let m = embedded_moment_log(3.0, &SpdMatrix::identity(2), &query(&[1, 1], &[1.0, 1.0])).unwrap();
        assert!(close(m.log_value, ln(30.0), 1e-14));
    }

    #[test]
    fn embedded_matches_golden_monte_carlo() {
        // 10⁷ Gaussian-sum draws of W₃(4, I): E(X₁₁^{1/2} |X|^{3/2}) = 576.383 ± 0.847
        let m = embedded_moment_log(4.0, &SpdMatrix::identity(3), &query(&[1, 2], &[0.5, 1.5])).unwrap();
        assert!(abs(m.value() - 576.383_132_356_344_6) <= 4.0 * 0.847_354_802_687_929);
        assert!(close(m.log_value, ln(576.0), 1e-14));
    }

    #[test]
    fn embedded_errors() {
        let s = SpdMatrix::identity(3);
        assert!(matches!(
            embedded_moment_log(2.0, &s, &query(&[1, 2], &[1.0, 1.0])),
            Err(Error::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            embedded_moment_log(5.0, &s, &query(&[1, 1], &[1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn block_diagonal_examples() {
        let q = query(&[1, 1], &[1.0, 1.0]);
        assert!(close(disjoint_moment_block_diag_log(2.0, &SpdMatrix::identity(2), &q).unwrap(), ln(4.0), 1e-14));
        let d = spd(2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(close(disjoint_moment_block_diag_log(3.0, &d, &q).unwrap(), ln(54.0), 1e-14));
        let corr = spd(2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(matches!(
            disjoint_moment_block_diag_log(3.0, &corr, &q),
            Err(Error::NotBlockDiagonal { row: 1, col: 0, .. })
        ));
        // singular α with unit blocks: independent χ²₁ factors
        assert!(close(disjoint_moment_block_diag_log(1.0, &SpdMatrix::identity(2), &q).unwrap(), 0.0, 1e-14));
        let q12 = query(&[1, 2], &[1.0, 1.0]);
        assert!(disjoint_moment_block_diag_log(1.0, &SpdMatrix::identity(3), &q12).is_err());
        assert!(disjoint_moment_block_diag_log(1.5, &SpdMatrix::identity(3), &query(&[1, 1, 1], &[1.0; 3])).is_err());
    }

    #[test]
    fn block_diagonal_tolerance_and_worst_entry() {
        let part = BlockPartition::new(vec![1, 2]).unwrap();
        let tiny = SymMatrix::from_rows(3, vec![1.0, 1e-13, 0.0, 1e-13, 2.0, 0.9, 0.0, 0.9, 2.0]).unwrap();
        assert!(check_block_diagonal(&tiny, &part).is_ok());
        let bad = SymMatrix::from_rows(3, vec![1.0, 1e-3, -0.2, 1e-3, 2.0, 0.9, -0.2, 0.9, 2.0]).unwrap();
        assert_eq!(check_block_diagonal(&bad, &part), Err(Error::NotBlockDiagonal { row: 2, col: 0, value: -0.2 }));
    }

    fn arb_case() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, f64)> {
        prop::collection::vec(1usize..=3, 1..=3).prop_flat_map(|sizes| {
            let d = sizes.len();
            let p: usize = sizes.iter().sum();
            (
                Just(sizes),
                prop::collection::vec(0.0f64..3.0, d),
                prop::collection::vec(-1.0f64..1.0, p * (p + 2)),
                0.01f64..6.0,
            )
        })
    }

    fn gram(p: usize, raw: &[f64]) -> SpdMatrix {
        let m = SymMatrix::from_lower_fn(p, |i, j| {
            (0..p + 2).map(|r| raw[r * p + i] * raw[r * p + j]).sum::<f64>() + if i == j { 0.1 } else { 0.0 }
        });
        SpdMatrix::new(m).unwrap()
    }

    proptest! {
        #[test]
        fn factors_sum_to_value((sizes, nu, raw, excess) in arb_case()) {
            let p: usize = sizes.iter().sum();
            let sigma = gram(p, &raw);
            let m = embedded_moment_log(p as f64 - 1.0 + excess, &sigma, &query(&sizes, &nu)).unwrap();
            let s: f64 = m.factors.iter().map(|f| f.log_det_term + f.log_gamma_term).sum();
            prop_assert!(abs(s - m.log_value) <= 1e-12 * m.log_value.abs().max(1.0));
        }

        #[test]
        fn scaling_shifts_by_nu_prefix((sizes, nu, raw, excess) in arb_case(), c in 0.1f64..10.0) {
            let p: usize = sizes.iter().sum();
            let alpha = p as f64 - 1.0 + excess;
            let sigma = gram(p, &raw);
            let q = query(&sizes, &nu);
            let base = embedded_moment_log(alpha, &sigma, &q).unwrap().log_value;
            let scaled = embedded_moment_log(alpha, &SpdMatrix::new(sigma.matrix().scaled(c)).unwrap(), &q).unwrap().log_value;
            let shift: f64 = (0..sizes.len()).map(|i| nu[i] * q.partition().prefix()[i + 1] as f64 * ln(c)).sum();
            prop_assert!(abs(scaled - base - shift) <= 1e-10, "{} vs {}", scaled - base, shift);
        }

        #[test]
        fn last_block_only_reduces_to_full_minor((sizes, nu, raw, excess) in arb_case()) {
            let p: usize = sizes.iter().sum();
            let alpha = p as f64 - 1.0 + excess;
            let sigma = gram(p, &raw);
            let mut only_last = vec![0.0; sizes.len()];
            *only_last.last_mut().unwrap() = nu[nu.len() - 1];
            let e = embedded_moment_log(alpha, &sigma, &query(&sizes, &only_last)).unwrap().log_value;
            let s = single_minor_moment_log(alpha, &sigma, nu[nu.len() - 1]).unwrap();
            prop_assert!(abs(e - s) <= 1e-11, "{} vs {}", e, s);
        }

        #[test]
        fn permutation_within_block_is_invariant((sizes, nu, raw, excess) in arb_case(), pick in 0usize..3, rot in 1usize..3) {
            let p: usize = sizes.iter().sum();
            let alpha = p as f64 - 1.0 + excess;
            let sigma = gram(p, &raw);
            let q = query(&sizes, &nu);
            let b = pick % sizes.len();
            let range = q.partition().block_range(b);
            let mut perm: Vec<usize> = (0..p).collect();
            let len = range.len();
            for (t, idx) in range.clone().enumerate() {
                perm[idx] = range.start + (t + rot) % len;
            }
            let permuted = SpdMatrix::new(sigma.matrix().permuted(&perm)).unwrap();
            let a = embedded_moment_log(alpha, &sigma, &q).unwrap().log_value;
            let c = embedded_moment_log(alpha, &permuted, &q).unwrap().log_value;
            prop_assert!(abs(a - c) <= 1e-10, "{} vs {}", a, c);
        }
    }
}
