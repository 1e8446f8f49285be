//! Matrix generators and moment oracles shared by the integration tests.

#![allow(dead_code)]

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};
use wishart_minors_core::{BlockPartition, SpdMatrix, SymMatrix};

pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `lo..=hi`.
pub fn pick<R: RngCore>(rng: &mut R, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

/// Haar-ish orthogonal matrix from Gram–Schmidt on a Gaussian matrix,
/// returned column-major.
fn orthogonal<R: RngCore>(dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while q.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        // two passes keep the columns orthogonal to working precision
        for _ in 0..2 {
            for u in &q {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q
}

/// `Q Λ Qᵀ` with eigenvalues spread log-uniformly over `[1, cond]`, the two
/// extremes included, times `scale`.
pub fn random_spd<R: RngCore>(dim: usize, cond: f64, scale: f64, rng: &mut R) -> SpdMatrix {
    let q = orthogonal(dim, rng);
    let lambda: Vec<f64> = (0..dim)
        .map(|i| {
            let t = if i == 0 {
                0.0
            } else if i == dim - 1 {
                1.0
            } else {
                uniform(rng)
            };
            scale * cond.powf(t)
        })
        .collect();
    let m = SymMatrix::from_lower_fn(dim, |i, j| (0..dim).map(|k| q[k][i] * lambda[k] * q[k][j]).sum());
    SpdMatrix::new(m).expect("well-conditioned by construction")
}

/// Block-diagonal matrix with independent [`random_spd`] blocks.
pub fn random_block_diagonal<R: RngCore>(sizes: &[usize], cond: f64, rng: &mut R) -> SpdMatrix {
    let p: usize = sizes.iter().sum();
    let mut data = vec![0.0; p * p];
    let mut start = 0;
    for &s in sizes {
        let b = random_spd(s, cond, 1.0, rng);
        for i in 0..s {
            for j in 0..s {
                data[(start + i) * p + start + j] = b.matrix().get(i, j);
            }
        }
        start += s;
    }
    SpdMatrix::new(SymMatrix::from_rows(p, data).unwrap()).unwrap()
}

/// Random composition of `p` into `d` positive parts.
pub fn random_partition<R: RngCore>(p: usize, d: usize, rng: &mut R) -> BlockPartition {
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < d - 1 {
        let c = pick(rng, 1, p - 1);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(d);
    let mut prev = 0;
    for c in cuts.into_iter().chain([p]) {
        sizes.push(c - prev);
        prev = c;
    }
    BlockPartition::new(sizes).unwrap()
}

/// `E[Z_{i₁} ⋯ Z_{i_k}]` for `Z ~ N(0, cov)`: the sum over perfect pairings
/// of the product of paired covariances.
pub fn isserlis(cov: &[Vec<f64>], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    (1..idx.len())
        .map(|k| {
            let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|&(j, _)| j + 1 != k).map(|(_, &v)| v).collect();
            cov[first][idx[k]] * isserlis(cov, &rest)
        })
        .sum()
}

/// `E[X₁₁ X₂₂]` for `X = Σⱼ Zⱼ Zⱼᵀ` with `α` independent `Zⱼ ~ N(0, cov)`,
/// expanded into fourth moments of the stacked normal vector.
pub fn wishart_diag_product(alpha: usize, cov: &[Vec<f64>]) -> f64 {
    let n = alpha * 2;
    let big: Vec<Vec<f64>> =
        (0..n).map(|a| (0..n).map(|b| if a / 2 == b / 2 { cov[a % 2][b % 2] } else { 0.0 }).collect()).collect();
    let mut total = 0.0;
    for j in 0..alpha {
        for k in 0..alpha {
            total += isserlis(&big, &[2 * j, 2 * j, 2 * k + 1, 2 * k + 1]);
        }
    }
    total
}
