use std::ops::AddAssign;

/// Relative allowance for rounding in summed log-mass evaluations; certified
/// brackets of positive quantities are widened by this factor on each side.
pub(crate) const ROUNDING_SLOP: f64 = 64.0 * f64::EPSILON;

/// Widens a bracket of nonnegative values outward by [`ROUNDING_SLOP`].
pub(crate) fn widen(lower: f64, upper: f64) -> (f64, f64) {
    (lower * (1.0 - ROUNDING_SLOP), upper * (1.0 + ROUNDING_SLOP))
}

/// Neumaier's variant of Kahan summation.
///
/// Handles the case where the incoming term is larger in magnitude than the
/// running sum, which plain Kahan summation does not.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}
