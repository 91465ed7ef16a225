use super::KineticTime;
use crate::error::{Error, Result};
use crate::scalar::{log_critical_ratio, Real};

const MAX_ITERATIONS: usize = 200;

/// Subcritical partner of a supercritical time: `t* e^{-t*} = t e^{-t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateSolution<T> {
    pub t: KineticTime<T>,
    pub t_star: T,
}

impl<T: Real> ConjugateSolution<T> {
    /// `|t* e^{-t*} - t e^{-t}| / (t e^{-t})`.
    pub fn relative_residual(&self) -> T {
        let t = self.t.get();
        let target = t * (-t).exp();
        (self.t_star * (-self.t_star).exp() - target).abs() / target
    }
}

/// Root of `ln x - x + 1 = level` on `(0, 1)` for `level < 0`, by bracketed
/// Newton iteration.
fn lower_branch<T: Real>(level: T) -> Result<T> {
    debug_assert!(level <= T::zero());
    if level == T::zero() {
        return Ok(T::one());
    }
    let phi = |x: T| log_critical_ratio(x);
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut x = if level > -T::one() {
        T::one() - (-T::lit(2.0) * level).sqrt()
    } else {
        (level - T::one()).exp()
    };
    if !(x > lo && x < hi) {
        x = T::lit(0.5);
    }
    let eps = T::epsilon();
    let mut residual = T::infinity();
    for _ in 0..MAX_ITERATIONS {
        let r = phi(x) - level;
        residual = r.abs();
        if r < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if residual <= eps * T::lit(2.0) * level.abs().max(T::one()) {
            return Ok(x);
        }
        let slope = x.recip() - T::one();
        let mut next = x - r / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo == T::zero() { hi * T::lit(0.5) } else { (lo + hi) * T::lit(0.5) };
        }
        if (next - x).abs() <= eps * T::lit(4.0) * x {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Conjugate point `t* ∈ (0, 1)` of a supercritical time `t > 1`.
pub fn solve_conjugate<T: Real>(t: KineticTime<T>) -> Result<ConjugateSolution<T>> {
    if t.get() <= T::one() {
        return Err(Error::InvalidArgument(format!("conjugate point needs t > 1, got {}", t.get())));
    }
    let t_star = lower_branch(log_critical_ratio(t.get()))?;
    Ok(ConjugateSolution { t, t_star })
}

/// Principal branch of the tree function, `T(x) e^{-T(x)} = x` with
/// `T ∈ [0, 1]`, for `x ∈ [0, 1/e]`.
pub fn tree_function<T: Real>(x: T) -> Result<T> {
    let max = (-T::one()).exp();
    if !(x >= T::zero()) || x > max * (T::one() + T::epsilon() * T::lit(4.0)) {
        return Err(Error::InvalidArgument(format!("tree function domain is [0, 1/e], got {x}")));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    lower_branch((x.ln() + T::one()).min(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kt(t: f64) -> KineticTime<f64> {
        KineticTime::new(t).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        let near = solve_conjugate(kt(1.0 + 1e-6)).unwrap().t_star;
        assert!(near > 1.0 - 1e-2 && near < 1.0, "{near}");
        let two = solve_conjugate(kt(2.0)).unwrap();
        assert_relative_eq!(two.t_star, 0.406_375_7, max_relative = 1e-7);
        assert!(two.relative_residual() < 1e-12);
        let three = solve_conjugate(kt(3.0)).unwrap();
        assert_relative_eq!(three.t_star, 0.178_560_6, max_relative = 1e-6);
        assert!(three.relative_residual() < 1e-12);
    }

    #[test]
    fn conjugate_rejects_subcritical() {
        assert!(solve_conjugate(kt(1.0)).is_err());
        assert!(solve_conjugate(kt(0.3)).is_err());
    }

    #[test]
    fn conjugate_far_supercritical() {
        for t in [20.0, 100.0, 600.0] {
            let s = solve_conjugate(kt(t)).unwrap();
            assert!(s.t_star > 0.0 && s.t_star < 1.0);
            // compare in log space, e^{-600} is representable but the product is tiny
            let lhs = s.t_star.ln() - s.t_star;
            let rhs = f64::ln(t) - t;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs(), "t={t}");
        }
    }

    #[test]
    fn conjugate_in_f32() {
        let s = solve_conjugate(KineticTime::new(2.0f32).unwrap()).unwrap();
        assert!((s.t_star - 0.406_375_7).abs() < 1e-5);
    }

    #[test]
    fn tree_function_on_principal_branch() {
        for t in [0.0, 0.1, 0.5, 0.9] {
            let x = t * f64::exp(-t);
            assert_relative_eq!(tree_function(x).unwrap(), t, max_relative = 1e-10, epsilon = 1e-15);
        }
        assert_relative_eq!(tree_function((-1.0f64).exp()).unwrap(), 1.0, max_relative = 1e-7);
        assert!(tree_function(0.5f64).is_err());
        assert!(tree_function(-0.1f64).is_err());
    }
}
