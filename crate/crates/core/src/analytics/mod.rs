//! Closed-form cluster statistics for the Maxwell-molecule gas.
//!
//! With the collision kernel normalized so that every particle collides at
//! unit rate, the mass density of clusters of size `k` at kinetic time `t` is
//!
//! ```text
//! f_t(k) = k^{k-2} / (k-1)! · t^{k-1} · e^{-kt}
//! ```
//!
//! and the cluster-count density is `g_t(k) = f_t(k) / (k Z_t)`. The mass
//! series `F_t = Σ f_t(k)` equals one up to the gelation time `t = 1` and
//! falls below one afterwards; the deficit is the giant-cluster density.
//!
//! All terms are evaluated in log space so that `k` up to `10^6` never
//! overflows. Sums are available either as certified truncated series or
//! through the tree-function identities (see [`series`]).

mod conjugate;
mod fit;
mod series;

pub use conjugate::{solve_conjugate, tree_function, ConjugateSolution};
pub use fit::{fit_power_law, fit_power_law_at, PowerLawFit};
pub use series::{
    g_fraction, giant_mass, partition_z, partition_z_series, total_mass, total_mass_series,
    AnalyticDistribution, SeriesMode, SeriesPolicy, SeriesValue, NEAR_CRITICAL_WINDOW,
};

use crate::error::{Error, Result};
use crate::scalar::{ln_factorial, log_critical_ratio, stirling_correction, uses_stirling, Real};

/// Dimensionless time of the Maxwell model, in units of the mean free time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct KineticTime<T>(T);

impl<T: Real> KineticTime<T> {
    pub fn new(t: T) -> Result<Self> {
        if !t.is_finite() || t < T::zero() {
            return Err(Error::InvalidArgument(format!("kinetic time must be finite and >= 0, got {t}")));
        }
        Ok(Self(t))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

/// `ln(k^{k-2}/k! · t^{k-1} e^{-kt})` for `t > 0`.
pub(crate) fn ln_count_term<T: Real>(k: usize, t: T) -> T {
    debug_assert!(k >= 1 && t > T::zero());
    let kf = T::from_usize_lossy(k);
    if uses_stirling(k) {
        // k ln k cancels against ln k!; what is left is O(ln k).
        kf * log_critical_ratio(t)
            - t.ln()
            - T::lit(2.5) * kf.ln()
            - T::lit(0.5) * T::TAU().ln()
            - stirling_correction(k)
    } else {
        (kf - T::lit(2.0)) * kf.ln() - ln_factorial::<T>(k) + (kf - T::one()) * t.ln() - kf * t
    }
}

/// Numerator of the cluster-count fraction: `k^{k-2}/k! · t^{k-1} e^{-kt}`.
pub fn g_unnormalized<T: Real>(k: usize, t: KineticTime<T>) -> T {
    assert!(k >= 1, "cluster size starts at 1");
    let t = t.get();
    if t == T::zero() {
        return if k == 1 { T::one() } else { T::zero() };
    }
    ln_count_term(k, t).exp()
}

/// Mass fraction of particles in clusters of size `k`.
pub fn f_mass<T: Real>(k: usize, t: KineticTime<T>) -> T {
    T::from_usize_lossy(k) * g_unnormalized(k, t)
}

/// Which large-`k` asymptotic to evaluate in [`stirling_f`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StirlingForm {
    /// Mass density, `k^{-3/2}` prefactor.
    Mass,
    /// Cluster count before normalization by `Z_t`, `k^{-5/2}` prefactor.
    Count,
}

/// Stirling asymptotic `(e t e^{-t})^k / (√(2π) t k^{p})`, `p = 3/2` or `5/2`.
pub fn stirling_f<T: Real>(k: usize, t: KineticTime<T>, form: StirlingForm) -> T {
    assert!(k >= 1);
    let t = t.get();
    assert!(t > T::zero(), "stirling form needs t > 0");
    let kf = T::from_usize_lossy(k);
    let power = match form {
        StirlingForm::Mass => T::lit(1.5),
        StirlingForm::Count => T::lit(2.5),
    };
    (kf * log_critical_ratio(t) - power * kf.ln()).exp() / (T::TAU().sqrt() * t)
}

/// Damping length `γ(t)` of the size law `k^{-5/2} e^{-k/γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingScale<T> {
    Finite(T),
    /// At the critical time the distribution is a pure power law.
    Infinite,
}

impl<T: Real> DampingScale<T> {
    /// `1/γ`, zero at the critical time.
    pub fn rate(self) -> T {
        match self {
            DampingScale::Finite(g) => g.recip(),
            DampingScale::Infinite => T::zero(),
        }
    }

    pub fn gamma(self) -> T {
        match self {
            DampingScale::Finite(g) => g,
            DampingScale::Infinite => T::infinity(),
        }
    }
}

/// `γ(t) = 1 / |ln(e t e^{-t})|`.
pub fn gamma_damping<T: Real>(t: KineticTime<T>) -> Result<DampingScale<T>> {
    let t = t.get();
    if t == T::zero() {
        return Err(Error::InvalidArgument("damping scale undefined at t = 0".into()));
    }
    let rate = log_critical_ratio(t).abs();
    if rate == T::zero() {
        Ok(DampingScale::Infinite)
    } else {
        Ok(DampingScale::Finite(rate.recip()))
    }
}

/// Probability that a tagged particle's backward cluster has `n + 1`
/// members: `e^{-t} (1 - e^{-t})^n`.
pub fn backward_cluster_law<T: Real>(n: usize, t: KineticTime<T>) -> T {
    let t = t.get();
    if t == T::zero() {
        return if n == 0 { T::one() } else { T::zero() };
    }
    if n == 0 {
        return (-t).exp();
    }
    let log_hit = (-(-t).exp_m1()).ln();
    (-t + T::from_usize_lossy(n) * log_hit).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kt(t: f64) -> KineticTime<f64> {
        KineticTime::new(t).unwrap()
    }

    #[test]
    fn kinetic_time_rejects_negative_and_nan() {
        assert!(KineticTime::new(-1e-9).is_err());
        assert!(KineticTime::new(f64::NAN).is_err());
        assert!(KineticTime::new(f64::INFINITY).is_err());
    }

    #[test]
    fn f_mass_examples() {
        assert_relative_eq!(f_mass(1, kt(1.0)), (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(f_mass(3, kt(0.0)), 0.0);
        assert_eq!(f_mass(1, kt(0.0)), 1.0);
        assert_relative_eq!(f_mass(2, kt(1.0)), (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(f_mass(3, kt(1.0)), 1.5 * (-3.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn g_unnormalized_examples() {
        for t in [0.1, 1.0, 7.0] {
            assert_relative_eq!(g_unnormalized(1, kt(t)), (-t).exp(), max_relative = 1e-14);
        }
        assert_relative_eq!(g_unnormalized(2, kt(1.0)), (-2.0f64).exp() / 2.0, max_relative = 1e-14);
        // 16 labelled trees on 4 vertices, each weighing t^3 e^{-4t} / 4!.
        let enumerated = 16.0 / 24.0 * 0.125 * (-2.0f64).exp();
        assert_relative_eq!(g_unnormalized(4, kt(0.5)), enumerated, max_relative = 1e-14);
        assert_relative_eq!(enumerated, 0.011_277_9, max_relative = 1e-5);
    }

    #[test]
    fn log_form_continuous_across_stirling_cutoff() {
        // Both branches are exact; compare each against a plain f64 evaluation.
        for k in [30usize, 31, 32, 33, 60] {
            for t in [0.3, 1.0, 2.5] {
                let kf = k as f64;
                let direct: f64 =
                    (kf - 2.0) * kf.ln() - (2..=k).map(|i| (i as f64).ln()).sum::<f64>() + (kf - 1.0) * f64::ln(t) - kf * t;
                assert_relative_eq!(ln_count_term(k, t), direct, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn large_k_is_finite() {
        let v = f_mass(1_000_000, kt(1.0));
        assert!(v.is_finite() && v > 0.0);
        let w: f32 = f_mass(1_000_000, KineticTime::new(1.0f32).unwrap());
        assert!(w.is_finite() && w > 0.0);
    }

    #[test]
    fn stirling_examples() {
        let rel = stirling_f(100, kt(0.5), StirlingForm::Mass) / f_mass(100, kt(0.5)) - 1.0;
        assert!(rel.abs() < 0.01, "{rel}");
        assert_relative_eq!(
            stirling_f(1000, kt(1.0), StirlingForm::Mass),
            1.2615e-5,
            max_relative = 1e-4
        );
        for k in [3usize, 17, 500] {
            let ratio = stirling_f(2 * k, kt(1.0), StirlingForm::Count) / stirling_f(k, kt(1.0), StirlingForm::Count);
            assert_relative_eq!(ratio, 2f64.powf(-2.5), max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_damping(kt(1.0)).unwrap(), DampingScale::Infinite);
        assert_eq!(gamma_damping(kt(1.0)).unwrap().rate(), 0.0);
        assert_relative_eq!(gamma_damping(kt(0.5)).unwrap().gamma(), 5.1775, max_relative = 1e-4);
        assert_relative_eq!(gamma_damping(kt(2.0)).unwrap().gamma(), 3.2589, max_relative = 1e-4);
        assert!(gamma_damping(kt(0.0)).is_err());
    }

    #[test]
    fn backward_law_examples() {
        for t in [0.0, 0.4, 3.0] {
            assert_relative_eq!(backward_cluster_law(0, kt(t)), (-t).exp(), max_relative = 1e-14);
        }
        assert_eq!(backward_cluster_law(3, kt(0.0)), 0.0);
        assert_relative_eq!(backward_cluster_law(1, kt(1.0)), 0.232_544_2, max_relative = 1e-6);
    }
}
