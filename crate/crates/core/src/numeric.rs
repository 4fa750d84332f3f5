//! Small numerical helpers shared across modules.

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `ln(sum(exp(a_i)))`, anchored at the largest exponent. Returns `-inf` for an empty input.
pub fn log_sum_exp(exponents: &[f64]) -> f64 {
    let anchor = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !anchor.is_finite() {
        return anchor;
    }
    let scaled = compensated_sum(exponents.iter().map(|&a| (a - anchor).exp()));
    anchor + scaled.ln()
}

/// `sum(exp(a_i))` evaluated in shifted form so no intermediate overflows.
pub fn sum_exp(exponents: &[f64]) -> f64 {
    let anchor = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !anchor.is_finite() {
        return if anchor == f64::INFINITY {
            f64::INFINITY
        } else {
            0.0
        };
    }
    anchor.exp() * compensated_sum(exponents.iter().map(|&a| (a - anchor).exp()))
}

#[inline]
pub(crate) fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
