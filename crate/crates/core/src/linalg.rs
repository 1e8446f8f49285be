//! Dense symmetric and SPD matrix kernels.
//!
//! Matrices here are tiny (p is expected to stay below 64), so everything is
//! stored densely in row-major order. The only factorization is Cholesky; the
//! Schur complement of a leading block is formed from that block's factor with
//! triangular solves, never with an explicit inverse.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math::{abs, ln, sqrt};

/// A real symmetric matrix in dense row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from full row-major data, requiring exact symmetry.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadShape { expected: 1, found: 0 });
        }
        if data.len() != dim * dim {
            return Err(Error::BadShape { expected: dim * dim, found: data.len() });
        }
        for i in 0..dim {
            for j in 0..i {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Replaces `data` by `(A + Aᵀ)/2` after checking that every mirrored pair
    /// differs by at most `rel_tol` times the largest absolute entry.
    pub fn symmetrized(dim: usize, mut data: Vec<f64>, rel_tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadShape { expected: 1, found: 0 });
        }
        if data.len() != dim * dim {
            return Err(Error::BadShape { expected: dim * dim, found: data.len() });
        }
        let scale = data.iter().fold(0.0_f64, |m, &x| m.max(abs(x)));
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if !(abs(a - b) <= rel_tol * scale) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
                let mid = 0.5 * (a + b);
                data[i * dim + j] = mid;
                data[j * dim + i] = mid;
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from `f(i, j)` evaluated on the lower triangle `i >= j`.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_lower_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_lower_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The principal submatrix on the contiguous index range `range`.
    pub fn principal(&self, range: Range<usize>) -> SymMatrix {
        assert!(range.start < range.end && range.end <= self.dim);
        let start = range.start;
        Self::from_lower_fn(range.len(), |i, j| self.get(start + i, start + j))
    }

    /// The leading `k × k` principal submatrix.
    pub fn leading(&self, k: usize) -> SymMatrix {
        self.principal(0..k)
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|x| c * x).collect() }
    }

    /// `P M Pᵀ` for the permutation sending index `i` to `perm[i]`, i.e. entry
    /// `(i, j)` of the result is `M[perm[i], perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        assert_eq!(perm.len(), self.dim);
        Self::from_lower_fn(self.dim, |i, j| self.get(perm[i], perm[j]))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(abs(x)))
    }
}

/// A square lower-triangular matrix; entries above the diagonal are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Writes entry `(i, j)`; `j <= i` is required.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i);
        self.data[i * self.dim + j] = v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `L Lᵀ`.
    pub fn gram(&self) -> SymMatrix {
        let n = self.dim;
        SymMatrix::from_lower_fn(n, |i, j| {
            // j <= i, so the shared support is 0..=j
            let (ri, rj) = (&self.data[i * n..i * n + j + 1], &self.data[j * n..j * n + j + 1]);
            ri.iter().zip(rj).map(|(a, b)| a * b).sum()
        })
    }

    /// `self · other`, both lower triangular.
    pub fn mul_lower(&self, other: &LowerTriangular) -> LowerTriangular {
        let n = self.dim;
        assert_eq!(n, other.dim);
        let mut out = LowerTriangular::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in j..=i {
                    s += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    /// Solves `L x = b` in place by forward substitution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let row = &self.data[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.data[i * n + i];
        }
    }

    /// `log |L Lᵀ|` restricted to the leading `k × k` block: `2 Σ_{j<k} log L_jj`.
    pub fn leading_log_det(&self, k: usize) -> f64 {
        2.0 * (0..k).map(|j| ln(self.diag(j))).sum::<f64>()
    }
}

/// Cholesky factor `L` with `L Lᵀ = m` and strictly positive diagonal.
pub fn cholesky(m: &SymMatrix) -> Result<LowerTriangular> {
    let n = m.dim;
    let mut l = LowerTriangular::zeros(n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            d -= v * v;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = sqrt(d);
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// A symmetric positive definite matrix together with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    base: SymMatrix,
    chol: LowerTriangular,
}

impl SpdMatrix {
    pub fn new(base: SymMatrix) -> Result<Self> {
        let chol = cholesky(&base)?;
        Ok(Self { base, chol })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim)).expect("identity is positive definite")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.base
    }

    pub fn factor(&self) -> &LowerTriangular {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.chol.leading_log_det(self.dim())
    }

    /// `tr(self⁻¹ x)`, computed as `‖L⁻¹ Lₓ‖²_F` from both Cholesky factors.
    pub fn trace_solve(&self, x: &SpdMatrix) -> Result<f64> {
        let n = self.dim();
        if x.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.dim() });
        }
        let mut col = vec![0.0; n];
        let mut total = 0.0;
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = x.chol.get(i, j);
            }
            self.chol.solve_in_place(&mut col);
            total += col.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(total)
    }
}

/// Block sizes `p₁, …, p_d` of a partition of `{1, …, p}` into consecutive
/// index ranges, with prefix sums `P₀ = 0, P₁, …, P_d = p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    prefix: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required"));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidPartition("block sizes must be positive"));
        }
        let mut prefix = Vec::with_capacity(sizes.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &s in &sizes {
            acc += s;
            prefix.push(acc);
        }
        Ok(Self { sizes, prefix })
    }

    /// A single block covering all `p` indices.
    pub fn whole(p: usize) -> Result<Self> {
        Self::new(vec![p])
    }

    /// `p` blocks of size one.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::new(vec![1; p])
    }

    /// Number of blocks `d`.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `P₀, …, P_d`.
    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn total(&self) -> usize {
        self.prefix[self.sizes.len()]
    }

    /// Index range of block `i` (0-based).
    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.prefix[i]..self.prefix[i + 1]
    }

    /// The partition formed by the first `i` blocks.
    pub fn truncated(&self, i: usize) -> Result<Self> {
        if i == 0 || i > self.len() {
            return Err(Error::InvalidPartition("truncation must keep between 1 and d blocks"));
        }
        Self::new(self.sizes[..i].to_vec())
    }

    /// The partition with the block sizes after the first, i.e. the block
    /// structure of the Schur complement of the first block.
    fn tail(&self) -> Option<Self> {
        (self.len() > 1).then(|| Self::new(self.sizes[1..].to_vec()).expect("nonempty tail"))
    }
}

fn check_partition(dim: usize, partition: &BlockPartition) -> Result<()> {
    if partition.total() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: partition.total() });
    }
    Ok(())
}

/// `log |m_{1:Pᵢ,1:Pᵢ}|` for `i = 1, …, d`, read off the single Cholesky factor.
pub fn leading_logdets(m: &SpdMatrix, partition: &BlockPartition) -> Result<Vec<f64>> {
    check_partition(m.dim(), partition)?;
    let l = m.factor();
    let mut out = Vec::with_capacity(partition.len());
    let mut acc = 0.0;
    for i in 0..partition.len() {
        for j in partition.block_range(i) {
            acc += 2.0 * ln(l.diag(j));
        }
        out.push(acc);
    }
    Ok(out)
}

/// Schur complement `m₂₂ − m₂₁ m₁₁⁻¹ m₁₂` of the leading `k × k` block.
pub fn schur_complement(m: &SymMatrix, k: usize) -> Result<SymMatrix> {
    let n = m.dim;
    if k == 0 || k >= n {
        return Err(Error::InvalidSplit { k, dim: n });
    }
    let l11 = cholesky(&m.leading(k))?;
    let r = n - k;
    // w[c] = L₁₁⁻¹ m_{1:k, k+c}, stored column by column
    let mut w = vec![0.0; r * k];
    for c in 0..r {
        let col = &mut w[c * k..(c + 1) * k];
        for (t, v) in col.iter_mut().enumerate() {
            *v = m.get(t, k + c);
        }
        l11.solve_in_place(col);
    }
    Ok(SymMatrix::from_lower_fn(r, |a, b| {
        let (wa, wb) = (&w[a * k..(a + 1) * k], &w[b * k..(b + 1) * k]);
        m.get(k + a, k + b) - wa.iter().zip(wb).map(|(x, y)| x * y).sum::<f64>()
    }))
}

/// The iterated Schur complements `M^{[0]} = M, M^{[1]}, …, M^{[d−1]}`, where
/// each stage is the complement of the leading block of the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurChain {
    partition: BlockPartition,
    stages: Vec<SymMatrix>,
}

impl SchurChain {
    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn stages(&self) -> &[SymMatrix] {
        &self.stages
    }

    pub fn stage(&self, k: usize) -> &SymMatrix {
        &self.stages[k]
    }

    /// Leading `p_{k+1} × p_{k+1}` block of stage `k`.
    pub fn top_left(&self, k: usize) -> SymMatrix {
        self.stages[k].leading(self.partition.sizes()[k])
    }

    /// `log |top_left(k)|` for every stage.
    pub fn top_left_log_dets(&self) -> Result<Vec<f64>> {
        (0..self.stages.len())
            .map(|k| {
                let l = cholesky(&self.top_left(k))?;
                Ok(l.leading_log_det(l.dim()))
            })
            .collect()
    }
}

pub fn schur_chain(m: &SpdMatrix, partition: &BlockPartition) -> Result<SchurChain> {
    check_partition(m.dim(), partition)?;
    let mut stages = Vec::with_capacity(partition.len());
    stages.push(m.matrix().clone());
    let mut rest = partition.clone();
    while let Some(tail) = rest.tail() {
        let prev = stages.last().expect("chain starts nonempty");
        let next = schur_complement(prev, rest.sizes()[0])?;
        stages.push(next);
        rest = tail;
    }
    Ok(SchurChain { partition: partition.clone(), stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sym(dim: usize, data: &[f64]) -> SymMatrix {
        SymMatrix::from_rows(dim, data.to_vec()).unwrap()
    }

    /// Determinant by Gaussian elimination with partial pivoting; independent
    /// of the Cholesky path.
    fn det_lu(m: &SymMatrix) -> f64 {
        let n = m.dim();
        let mut a = m.as_slice().to_vec();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| abs(a[x * n + c]).total_cmp(&abs(a[y * n + c]))).unwrap();
            if p != c {
                for j in 0..n {
                    a.swap(c * n + j, p * n + j);
                }
                det = -det;
            }
            let piv = a[c * n + c];
            det *= piv;
            for r in c + 1..n {
                let f = a[r * n + c] / piv;
                for j in c..n {
                    a[r * n + j] -= f * a[c * n + j];
                }
            }
        }
        det
    }

    fn spd6() -> SpdMatrix {
        // Gram matrix of 8 fixed vectors in R^6 plus a ridge
        let v: Vec<f64> = (0..48).map(|t| libm::sin(1.3 * t as f64 + 0.7) * 1.7).collect();
        let m = SymMatrix::from_lower_fn(6, |i, j| {
            (0..8).map(|r| v[r * 6 + i] * v[r * 6 + j]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
        });
        SpdMatrix::new(m).unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&SymMatrix::identity(2)).unwrap();
        assert_eq!(l.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cholesky_hand_example() {
        let l = cholesky(&sym(2, &[4.0, 2.0, 2.0, 5.0])).unwrap();
        assert_eq!(l.as_slice(), &[2.0, 0.0, 1.0, 2.0]);
        assert_eq!(l.gram(), sym(2, &[4.0, 2.0, 2.0, 5.0]));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let err = cholesky(&sym(2, &[1.0, 2.0, 2.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }));
        let err = cholesky(&sym(1, &[f64::NAN])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 0, .. }));
    }

    #[test]
    fn from_rows_requires_exact_symmetry() {
        assert!(matches!(
            SymMatrix::from_rows(2, vec![1.0, 0.5, 0.5 + 1e-16, 1.0]),
            Err(Error::NotSymmetric { row: 1, col: 0 })
        ));
        assert!(matches!(SymMatrix::from_rows(2, vec![1.0; 3]), Err(Error::BadShape { .. })));
    }

    #[test]
    fn symmetrize_averages_within_tolerance() {
        let m = SymMatrix::symmetrized(2, vec![2.0, 1.0, 1.0 + 1e-12, 2.0], 1e-9).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!(SymMatrix::symmetrized(2, vec![2.0, 1.0, 1.1, 2.0], 1e-9).is_err());
    }

    #[test]
    fn reconstruction_is_tight() {
        let m = spd6();
        let rec = m.factor().gram();
        let diff: f64 = rec.as_slice().iter().zip(m.matrix().as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm: f64 = m.matrix().as_slice().iter().map(|a| a * a).sum();
        assert!(sqrt(diff) <= 1e-10 * sqrt(norm));
    }

    #[test]
    fn leading_logdets_examples() {
        let part = BlockPartition::new(vec![2, 2]).unwrap();
        assert_eq!(leading_logdets(&SpdMatrix::identity(4), &part).unwrap(), vec![0.0, 0.0]);

        let m = SpdMatrix::new(sym(2, &[4.0, 2.0, 2.0, 5.0])).unwrap();
        let got = leading_logdets(&m, &BlockPartition::singletons(2).unwrap()).unwrap();
        assert!(abs(got[0] - ln(4.0)) < 1e-15);
        assert!(abs(got[1] - ln(16.0)) < 1e-15);
    }

    #[test]
    fn leading_logdets_match_lu_oracle() {
        let m = spd6();
        let part = BlockPartition::new(vec![2, 2, 2]).unwrap();
        let got = leading_logdets(&m, &part).unwrap();
        for (i, &g) in got.iter().enumerate() {
            let k = part.prefix()[i + 1];
            let want = ln(det_lu(&m.matrix().leading(k)));
            assert!(abs(g - want) <= 1e-10 * abs(want).max(1.0), "block {i}: {g} vs {want}");
        }
    }

    #[test]
    fn leading_logdets_dimension_mismatch() {
        let part = BlockPartition::new(vec![1, 2]).unwrap();
        assert!(matches!(
            leading_logdets(&SpdMatrix::identity(4), &part),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn schur_complement_examples() {
        assert_eq!(schur_complement(&sym(2, &[2.0, 1.0, 1.0, 2.0]), 1).unwrap(), sym(1, &[1.5]));
        assert_eq!(schur_complement(&sym(2, &[4.0, 2.0, 2.0, 5.0]), 1).unwrap(), sym(1, &[4.0]));
        for k in 1..5 {
            assert_eq!(schur_complement(&SymMatrix::identity(5), k).unwrap(), SymMatrix::identity(5 - k));
        }
    }

    #[test]
    fn schur_complement_rejects_bad_split() {
        let m = SymMatrix::identity(3);
        assert!(matches!(schur_complement(&m, 0), Err(Error::InvalidSplit { .. })));
        assert!(matches!(schur_complement(&m, 3), Err(Error::InvalidSplit { .. })));
        let bad = sym(3, &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(schur_complement(&bad, 1), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn chain_examples() {
        let part = BlockPartition::singletons(3).unwrap();
        let chain = schur_chain(&SpdMatrix::identity(3), &part).unwrap();
        let want: Vec<_> = (1..=3).rev().map(SymMatrix::identity).collect();
        assert_eq!(chain.stages(), &want[..]);

        let m = SpdMatrix::new(sym(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let chain = schur_chain(&m, &BlockPartition::singletons(2).unwrap()).unwrap();
        assert_eq!(chain.stages(), &[m.matrix().clone(), sym(1, &[1.5])]);
    }

    #[test]
    fn chain_determinant_factorization() {
        let m = SpdMatrix::new(spd6().matrix().leading(4)).unwrap();
        let part = BlockPartition::new(vec![1, 2, 1]).unwrap();
        let chain = schur_chain(&m, &part).unwrap();
        let sum: f64 = chain.top_left_log_dets().unwrap().iter().sum();
        let want = ln(det_lu(m.matrix()));
        assert!(abs(sum - want) <= 1e-10 * abs(want).max(1.0));
    }

    #[test]
    fn trace_solve_matches_explicit() {
        let s = SpdMatrix::new(sym(2, &[2.0, 0.0, 0.0, 4.0])).unwrap();
        let x = SpdMatrix::new(sym(2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        assert!(abs(s.trace_solve(&x).unwrap() - (0.5 + 0.5)) < 1e-15);
    }

    #[test]
    fn partition_bookkeeping() {
        let p = BlockPartition::new(vec![2, 1, 3]).unwrap();
        assert_eq!(p.prefix(), &[0, 2, 3, 6]);
        assert_eq!(p.total(), 6);
        assert_eq!(p.block_range(2), 3..6);
        assert_eq!(p.truncated(2).unwrap().sizes(), &[2, 1]);
        assert!(BlockPartition::new(vec![]).is_err());
        assert!(BlockPartition::new(vec![1, 0]).is_err());
    }
}
