//! Infinite sums over cluster sizes.
//!
//! Two evaluation routes are provided. `DirectSum` adds terms until a
//! Stirling majorant certifies the remainder; the declared tail bound always
//! accompanies the value. `TreeIdentity` uses
//!
//! ```text
//! Σ k^{k-1} x^k / k! = T(x),   Σ k^{k-2} x^k / k! = T(x) - T(x)²/2,
//! ```
//!
//! with `x = t e^{-t}`; on the principal branch `T(x) = t` for `t <= 1` and
//! `T(x) = t*` (the conjugate point) above it.

use super::{f_mass, g_unnormalized, solve_conjugate, KineticTime};
use crate::error::{Error, Result};
use crate::scalar::{log_critical_ratio, CompensatedSum, Real};

/// Half-width of the window around `t = 1` where [`SeriesPolicy::auto`]
/// picks the identity route.
pub const NEAR_CRITICAL_WINDOW: f64 = 0.05;

/// Floating-point allowance per unit of absolute summand mass.
const ROUNDING_FACTOR: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    DirectSum,
    TreeIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy<T> {
    pub kmax: usize,
    pub tail_tol: T,
    pub mode: SeriesMode,
}

impl<T: Real> SeriesPolicy<T> {
    pub fn direct(kmax: usize, tail_tol: T) -> Self {
        Self { kmax, tail_tol, mode: SeriesMode::DirectSum }
    }

    pub fn identity() -> Self {
        Self { kmax: 1_000_000, tail_tol: T::epsilon() * T::lit(16.0), mode: SeriesMode::TreeIdentity }
    }

    /// Direct summation away from the critical point, identities near it
    /// where the direct sum decays only like `k^{-5/2}`.
    pub fn auto(t: KineticTime<T>, kmax: usize, tail_tol: T) -> Self {
        let mode = if (t.get() - T::one()).abs() < T::lit(NEAR_CRITICAL_WINDOW) {
            SeriesMode::TreeIdentity
        } else {
            SeriesMode::DirectSum
        };
        Self { kmax, tail_tol, mode }
    }
}

impl<T: Real> Default for SeriesPolicy<T> {
    fn default() -> Self {
        Self::direct(1_000_000, T::lit(1e-12).max(T::epsilon() * T::lit(64.0)))
    }
}

/// A series value together with its certified error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<T> {
    pub value: T,
    pub tail_bound: T,
    /// Number of terms summed; zero for closed forms.
    pub terms: usize,
}

#[derive(Debug, Clone, Copy)]
enum Weight {
    /// `k^{k-2}/k!`: tail decays like `k^{-5/2}`.
    Count,
    /// `k^{k-2}/(k-1)!`: tail decays like `k^{-3/2}`.
    Mass,
}

impl Weight {
    fn power<T: Real>(self) -> T {
        match self {
            Weight::Count => T::lit(2.5),
            Weight::Mass => T::lit(1.5),
        }
    }

    fn term<T: Real>(self, k: usize, t: KineticTime<T>) -> T {
        match self {
            Weight::Count => g_unnormalized(k, t),
            Weight::Mass => f_mass(k, t),
        }
    }
}

/// Bound on `Σ_{k > last}` from `k! >= √(2πk)(k/e)^k`, i.e.
/// `term_k <= r^k / (√(2π) t k^p)` with `r = e t e^{-t} <= 1`.
fn stirling_tail<T: Real>(weight: Weight, last: usize, t: T) -> T {
    let p: T = weight.power();
    let log_r = log_critical_ratio(t);
    let next = T::from_usize_lossy(last + 1);
    let lead = (next * log_r).exp() / (T::TAU().sqrt() * t);
    // Σ_{k>K} k^{-p} <= K^{1-p}/(p-1)
    let integral = T::from_usize_lossy(last).powf(T::one() - p) / (p - T::one());
    let mut bound = lead * integral;
    if log_r < T::zero() {
        let r = log_r.exp();
        let geometric = next.powf(-p) / (T::one() - r);
        bound = bound.min(lead * geometric);
    }
    bound
}

fn direct_sum<T: Real>(weight: Weight, t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<SeriesValue<T>> {
    if policy.kmax == 0 {
        return Err(Error::InvalidArgument("kmax must be positive".into()));
    }
    if t.get() == T::zero() {
        return Ok(SeriesValue { value: T::one(), tail_bound: T::zero(), terms: 1 });
    }
    let rounding = T::epsilon() * T::lit(ROUNDING_FACTOR);
    let mut acc = CompensatedSum::new();
    let mut abs_mass = T::zero();
    let mut bound = T::infinity();
    for k in 1..=policy.kmax {
        let term = weight.term(k, t);
        acc.add(term);
        abs_mass = abs_mass + term;
        if k == policy.kmax || k < 64 || k % 64 == 0 {
            bound = stirling_tail(weight, k, t.get()) + rounding * abs_mass;
            if bound <= policy.tail_tol {
                return Ok(SeriesValue { value: acc.value(), tail_bound: bound, terms: k });
            }
        }
    }
    Err(Error::SeriesTolerance {
        kmax: policy.kmax,
        bound: bound.to_f64().unwrap_or(f64::INFINITY),
        tol: policy.tail_tol.to_f64().unwrap_or(f64::NAN),
    })
}

/// Tree function at `x = t e^{-t}` on the principal branch.
fn tree_at<T: Real>(t: KineticTime<T>) -> Result<T> {
    if t.get() <= T::one() {
        Ok(t.get())
    } else {
        Ok(solve_conjugate(t)?.t_star)
    }
}

/// `Z_t` with its error bound.
pub fn partition_z_series<T: Real>(t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<SeriesValue<T>> {
    match policy.mode {
        SeriesMode::DirectSum => direct_sum(Weight::Count, t, policy),
        SeriesMode::TreeIdentity => {
            if t.get() == T::zero() {
                return Ok(SeriesValue { value: T::one(), tail_bound: T::zero(), terms: 0 });
            }
            let tree = tree_at(t)?;
            let value = tree * (T::one() - tree * T::lit(0.5)) / t.get();
            Ok(SeriesValue { value, tail_bound: T::epsilon() * T::lit(8.0), terms: 0 })
        }
    }
}

/// Fraction of clusters per particle, `Z_t = Σ k^{k-2}/k! t^{k-1} e^{-kt}`.
pub fn partition_z<T: Real>(t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<T> {
    partition_z_series(t, policy).map(|s| s.value)
}

/// Total mass in finite clusters with its error bound.
pub fn total_mass_series<T: Real>(t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<SeriesValue<T>> {
    match policy.mode {
        SeriesMode::DirectSum => direct_sum(Weight::Mass, t, policy),
        SeriesMode::TreeIdentity => {
            let value = if t.get() <= T::one() { T::one() } else { tree_at(t)? / t.get() };
            Ok(SeriesValue { value, tail_bound: T::epsilon() * T::lit(8.0), terms: 0 })
        }
    }
}

/// `F_t = Σ f_t(k)`: one up to the critical time, `t*/t` after it.
pub fn total_mass<T: Real>(t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<T> {
    total_mass_series(t, policy).map(|s| s.value.min(T::one()))
}

/// Giant-cluster density `1 - F_t`.
pub fn giant_mass<T: Real>(t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<T> {
    total_mass(t, policy).map(|f| (T::one() - f).max(T::zero()))
}

/// Normalized cluster-count fraction `g_t(k)`.
pub fn g_fraction<T: Real>(k: usize, t: KineticTime<T>, policy: &SeriesPolicy<T>) -> Result<T> {
    let z = partition_z(t, policy)?;
    Ok(g_unnormalized(k, t) / z)
}

/// All analytic predictions at one time, tabulated up to `kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDistribution<T> {
    pub t: KineticTime<T>,
    pub kmax: usize,
    /// `f_mass[k-1] = f_t(k)`.
    pub f_mass: Vec<T>,
    /// `g_frac[k-1] = g_t(k)`.
    pub g_frac: Vec<T>,
    pub z: T,
    pub total_mass: T,
    pub giant_mass: T,
    /// Upper bound on `1 - Σ g_frac` caused by truncation at `kmax`.
    pub g_tail_bound: T,
    /// Error bound on `z` from the series evaluation.
    pub z_bound: T,
}

impl<T: Real> AnalyticDistribution<T> {
    pub fn evaluate(t: KineticTime<T>, kmax: usize, policy: &SeriesPolicy<T>) -> Result<Self> {
        if kmax == 0 {
            return Err(Error::InvalidArgument("kmax must be positive".into()));
        }
        let z_series = partition_z_series(t, policy)?;
        let z = z_series.value;
        let mass = total_mass(t, policy)?;
        let f: Vec<T> = (1..=kmax).map(|k| f_mass(k, t)).collect();
        let g: Vec<T> = (1..=kmax).map(|k| g_unnormalized(k, t) / z).collect();
        let g_tail_bound = if t.get() == T::zero() {
            T::zero()
        } else {
            (stirling_tail(Weight::Count, kmax, t.get()) + z_series.tail_bound) / z
        };
        Ok(Self {
            t,
            kmax,
            f_mass: f,
            g_frac: g,
            z,
            total_mass: mass,
            giant_mass: (T::one() - mass).max(T::zero()),
            g_tail_bound,
            z_bound: z_series.tail_bound,
        })
    }

    pub fn f(&self, k: usize) -> Option<T> {
        k.checked_sub(1).and_then(|i| self.f_mass.get(i).copied())
    }

    pub fn g(&self, k: usize) -> Option<T> {
        k.checked_sub(1).and_then(|i| self.g_frac.get(i).copied())
    }
}
