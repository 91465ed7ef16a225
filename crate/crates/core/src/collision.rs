//! Elastic binary collision and scattering-vector sampling, shared by the
//! hard-sphere and Maxwell-molecule engines.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[inline]
pub fn dot<T: Real, const D: usize>(a: &[T; D], b: &[T; D]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn sub<T: Real, const D: usize>(a: &[T; D], b: &[T; D]) -> [T; D] {
    std::array::from_fn(|i| a[i] - b[i])
}

/// In-place `v -= ω[ω·(v - v1)]`, `v1 += ω[ω·(v - v1)]` without checking
/// the incoming condition. Returns the exchanged normal speed.
#[inline]
pub fn apply_collision<T: Real, const D: usize>(v: &mut [T; D], v1: &mut [T; D], omega: &[T; D]) -> T {
    let along = dot(omega, &sub(v, v1));
    for i in 0..D {
        let dv = omega[i] * along;
        v[i] = v[i] - dv;
        v1[i] = v1[i] + dv;
    }
    along
}

/// Post-collision velocities for an incoming pair, `(v - v1)·ω > 0`.
pub fn resolve_collision<T: Real, const D: usize>(
    v: [T; D],
    v1: [T; D],
    omega: [T; D],
) -> Result<([T; D], [T; D])> {
    let along = dot(&omega, &sub(&v, &v1));
    if !(along > T::zero()) {
        return Err(Error::Outgoing(along.to_f64().unwrap_or(f64::NAN)));
    }
    let (mut a, mut b) = (v, v1);
    apply_collision(&mut a, &mut b, &omega);
    Ok((a, b))
}

/// Angular part `g(cos θ)` of a Maxwell-molecule kernel, supported on the
/// hemisphere `cos θ > 0` and normalized to unit total rate.
#[derive(Debug, Clone, PartialEq)]
pub enum ScatteringLaw<T> {
    IsotropicHemisphere,
    /// `g` sampled at `cos θ = i/(n-1)`, `i = 0..n`, linearly interpolated.
    Tabulated { values: Vec<T>, max: T },
}

impl<T: Real> ScatteringLaw<T> {
    /// Validates a tabulated kernel. Only the shape matters for sampling; the
    /// table is rescaled so that `∫ g dω = 1` over the hemisphere of `dim`.
    pub fn tabulated(values: Vec<T>, dim: usize) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("kernel table needs >= 2 finite nonnegative values".into()));
        }
        let mut law = ScatteringLaw::Tabulated { max: T::one(), values };
        let norm = law.total_rate(dim)?;
        if norm == T::zero() {
            return Err(Error::InvalidArgument("kernel table integrates to zero".into()));
        }
        if let ScatteringLaw::Tabulated { values, max } = &mut law {
            values.iter_mut().for_each(|v| *v = *v / norm);
            *max = values.iter().copied().fold(T::zero(), T::max);
        }
        Ok(law)
    }

    /// `g(c)` for `c = cos θ`; zero on the outgoing hemisphere.
    pub fn density(&self, c: T, dim: usize) -> T {
        if c <= T::zero() {
            return T::zero();
        }
        match self {
            ScatteringLaw::IsotropicHemisphere => hemisphere_area::<T>(dim).recip(),
            ScatteringLaw::Tabulated { values, .. } => {
                let n = values.len() - 1;
                let x = c.min(T::one()) * T::from_usize_lossy(n);
                let i = x.floor().to_usize().unwrap_or(0).min(n - 1);
                let frac = x - T::from_usize_lossy(i);
                values[i] * (T::one() - frac) + values[i + 1] * frac
            }
        }
    }

    /// `∫_{S^{dim-1}} g(cos θ) dω`, by midpoint quadrature in θ.
    pub fn total_rate(&self, dim: usize) -> Result<T> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        const STEPS: usize = 20_000;
        let h = T::FRAC_PI_2() / T::from_usize_lossy(STEPS);
        let mut acc = T::zero();
        for i in 0..STEPS {
            let theta = (T::from_usize_lossy(i) + T::lit(0.5)) * h;
            let jac = if dim == 3 { T::TAU() * theta.sin() } else { T::lit(2.0) };
            acc = acc + self.density(theta.cos(), dim) * jac * h;
        }
        Ok(acc)
    }
}

/// Area of the unit hemisphere in `dim` dimensions (half-circle length in 2D).
fn hemisphere_area<T: Real>(dim: usize) -> T {
    match dim {
        2 => T::PI(),
        _ => T::TAU(),
    }
}

fn random_unit<T: Real, const D: usize, R: Rng + ?Sized>(rng: &mut R) -> [T; D] {
    loop {
        let g: [f64; D] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return std::array::from_fn(|i| T::lit(g[i] / norm));
        }
    }
}

/// Draws a scattering vector `ω` with density `g(cos θ)` on the incoming
/// hemisphere `vrel·ω > 0`.
pub fn sample_scattering<T: Real, const D: usize, R: Rng + ?Sized>(
    vrel: &[T; D],
    law: &ScatteringLaw<T>,
    rng: &mut R,
) -> Result<[T; D]> {
    let speed = dot(vrel, vrel).sqrt();
    if !(speed > T::zero()) {
        return Err(Error::InvalidArgument("zero relative velocity".into()));
    }
    loop {
        let mut omega: [T; D] = random_unit(rng);
        let mut c = dot(&omega, vrel) / speed;
        if c == T::zero() {
            continue;
        }
        if c < T::zero() {
            omega.iter_mut().for_each(|x| *x = -*x);
            c = -c;
        }
        match law {
            ScatteringLaw::IsotropicHemisphere => return Ok(omega),
            ScatteringLaw::Tabulated { max, .. } => {
                let u: f64 = rng.random();
                if T::lit(u) * *max < law.density(c, D) {
                    return Ok(omega);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_on_exchange() {
        let (a, b) = resolve_collision([1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]).unwrap();
        assert_eq!(a, [-1.0, 0.0]);
        assert_eq!(b, [1.0, 0.0]);
    }

    #[test]
    fn oblique_collision() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = resolve_collision([1.0, 0.0], [0.0, 0.0], [h, h]).unwrap();
        assert_relative_eq!(a[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(a[1], -0.5, epsilon = 1e-15);
        assert_relative_eq!(b[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(b[1], 0.5, epsilon = 1e-15);
        let energy = dot(&a, &a) + dot(&b, &b);
        assert_relative_eq!(energy, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn grazing_and_outgoing_rejected() {
        assert!(matches!(resolve_collision([1.0, 0.0], [0.0, 0.0], [0.0, 1.0]), Err(Error::Outgoing(_))));
        assert!(resolve_collision([1.0, 0.0], [0.0, 0.0], [-1.0, 0.0]).is_err());
        let (mut v, mut w) = ([1.0, 0.0], [0.0, 0.0]);
        apply_collision(&mut v, &mut w, &[0.0, 1.0]);
        assert_eq!((v, w), ([1.0, 0.0], [0.0, 0.0]));
    }

    #[test]
    fn isotropic_cosine_moments_in_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vrel: [f64; 3] = [0.3, -1.2, 0.7];
        let speed = dot(&vrel, &vrel).sqrt();
        let n = 1_000_000;
        let mut cosines = Vec::with_capacity(n);
        for _ in 0..n {
            let w = sample_scattering(&vrel, &ScatteringLaw::IsotropicHemisphere, &mut rng).unwrap();
            let c: f64 = dot(&w, &vrel) / speed;
            assert!(c > 0.0);
            cosines.push(c);
        }
        let mean = cosines.iter().sum::<f64>() / n as f64;
        let se = (1.0 / 12.0f64 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
        // Kolmogorov–Smirnov against U(0,1); 1% critical value 1.628/√n
        cosines.sort_by(f64::total_cmp);
        let d = cosines
            .iter()
            .enumerate()
            .map(|(i, &c)| ((i + 1) as f64 / n as f64 - c).abs().max((c - i as f64 / n as f64).abs()))
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn tabulated_kernel_is_normalized_and_shaped() {
        // g(c) ∝ c: in 3D the cosine marginal is then 2c with mean 2/3
        let law = ScatteringLaw::tabulated(vec![0.0, 0.5, 1.0], 3).unwrap();
        assert_relative_eq!(law.total_rate(3).unwrap(), 1.0, max_relative = 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vrel: [f64; 3] = [0.0, 0.0, 2.0];
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| sample_scattering(&vrel, &law, &mut rng).unwrap()[2])
            .sum::<f64>()
            / n as f64;
        let se = f64::sqrt(0.5 - 4.0 / 9.0) / (n as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < 4.0 * se, "{mean}");
        assert_relative_eq!(ScatteringLaw::<f64>::IsotropicHemisphere.total_rate(2).unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn zero_relative_velocity_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_scattering(&[0.0f64; 3], &ScatteringLaw::IsotropicHemisphere, &mut rng).is_err());
    }
}
