//! Log-scale multivariate gamma function.
//!
//! `Γ_p(β) = π^{p(p−1)/4} ∏_{j=1}^{p} Γ(β − (j−1)/2)` for `β > (p−1)/2`.
//! Ratios are accumulated term by term as differences of univariate
//! log-gammas so that nothing is ever exponentiated.

use crate::error::{Error, Result};
use crate::math::{compensated_sum, ln_gamma, LN_PI};

/// A validated argument `(p, β)` of `Γ_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultigammaArg {
    p: usize,
    beta: f64,
}

impl MultigammaArg {
    pub fn new(p: usize, beta: f64) -> Result<Self> {
        check_domain(p, beta)?;
        Ok(Self { p, beta })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

fn check_domain(p: usize, beta: f64) -> Result<()> {
    let bound = (p as f64 - 1.0) / 2.0;
    if p == 0 || !(beta > bound) || !beta.is_finite() {
        return Err(Error::MultigammaDomain { p, beta, bound });
    }
    Ok(())
}

/// `log Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// `log Γ_p(β)`.
pub fn log_multigamma(arg: MultigammaArg) -> f64 {
    let MultigammaArg { p, beta } = arg;
    let constant = (p * (p - 1)) as f64 / 4.0 * LN_PI;
    compensated_sum(core::iter::once(constant).chain((0..p).map(|j| ln_gamma(beta - j as f64 / 2.0))))
}

/// `log Γ_p(β + shift) − log Γ_p(β)`; exactly zero when `shift == 0`.
pub fn log_multigamma_ratio(p: usize, beta: f64, shift: f64) -> Result<f64> {
    check_domain(p, beta)?;
    if !(shift >= 0.0) || !shift.is_finite() {
        return Err(Error::NegativeShift(shift));
    }
    if shift == 0.0 {
        return Ok(0.0);
    }
    Ok(compensated_sum((0..p).map(|j| {
        let b = beta - j as f64 / 2.0;
        ln_gamma(b + shift) - ln_gamma(b)
    })))
}
