//! Thin wrappers over `libm` so the rest of the crate reads like `std` code.

pub(crate) use libm::{exp, expm1, fabs as abs, lgamma as ln_gamma, log as ln, sqrt};

pub(crate) const LN_2: f64 = core::f64::consts::LN_2;
pub(crate) const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}
