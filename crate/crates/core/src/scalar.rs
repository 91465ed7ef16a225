//! Scalar abstraction for the analytic code paths.
//!
//! Everything that evaluates closed forms, quadratures or fits is written
//! against [`Real`], so it runs in `f32` for quick sweeps and `f64` for the
//! oracle comparisons.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point scalar usable by the analytic modules.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literal constants.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

const SMALL_FACTORIAL_CUTOFF: usize = 32;

/// `ln k!`, exact summation below 32 and the Stirling series above.
pub fn ln_factorial<T: Real>(k: usize) -> T {
    if k < SMALL_FACTORIAL_CUTOFF {
        let mut acc = 0.0f64;
        for i in 2..=k {
            acc += (i as f64).ln();
        }
        return T::lit(acc);
    }
    let kf = T::from_usize_lossy(k);
    kf * kf.ln() - kf + T::lit(0.5) * (T::TAU() * kf).ln() + stirling_correction(k)
}

/// Remainder `ln k! - (k ln k - k + ½ ln 2πk)` for large `k`.
pub(crate) fn stirling_correction<T: Real>(k: usize) -> T {
    let kf = T::from_usize_lossy(k);
    let inv = kf.recip();
    let inv2 = inv * inv;
    // 1/12k - 1/360k^3 + 1/1260k^5 - 1/1680k^7
    inv * (T::lit(1.0 / 12.0)
        - inv2 * (T::lit(1.0 / 360.0) - inv2 * (T::lit(1.0 / 1260.0) - inv2 * T::lit(1.0 / 1680.0))))
}

pub(crate) fn uses_stirling(k: usize) -> bool {
    k >= SMALL_FACTORIAL_CUTOFF
}

/// `1 + ln t - t`, the log of `e t e^{-t}`; accurate near `t = 1`.
pub fn log_critical_ratio<T: Real>(t: T) -> T {
    if t < T::lit(0.5) {
        // t - 1 would round away the low bits of small t
        return t.ln() - t + T::one();
    }
    let u = t - T::one();
    u.ln_1p() - u
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let s = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - s) + x);
        } else {
            self.comp = self.comp + ((x - s) + self.sum);
        }
        self.sum = s;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_sum_across_cutoff() {
        for k in [0usize, 1, 2, 10, 31, 32, 33, 100, 1000] {
            let direct: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
            let got: f64 = ln_factorial(k);
            assert!((got - direct).abs() <= 1e-12 * direct.max(1.0), "k={k}: {got} vs {direct}");
        }
    }

    #[test]
    fn critical_ratio_vanishes_at_one() {
        assert_eq!(log_critical_ratio(1.0f64), 0.0);
        let v: f64 = log_critical_ratio(0.5);
        assert!((v - (1.0 + 0.5f64.ln() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::<f64>::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        assert!((s.value() - (1.0 + 1e-14)).abs() < 1e-18);
    }
}
