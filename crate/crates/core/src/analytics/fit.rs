use crate::error::{Error, Result};
use crate::scalar::Real;

/// Result of fitting `p(k) ∝ k^{-α} e^{-k/γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit<T> {
    pub exponent: T,
    /// `1/γ`, clamped at zero.
    pub damping_rate: T,
    pub k_range: (usize, usize),
    /// RMS residual of `ln p`.
    pub residual: T,
    pub points: usize,
}

/// Least squares by modified Gram–Schmidt; columns are normalized first.
fn least_squares<T: Real>(columns: &[Vec<T>], y: &[T]) -> Option<Vec<T>> {
    let m = columns.len();
    let mut q: Vec<Vec<T>> = columns.to_vec();
    let mut scale = vec![T::one(); m];
    for (c, s) in q.iter_mut().zip(scale.iter_mut()) {
        let norm = c.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        if norm == T::zero() {
            return None;
        }
        *s = norm;
        c.iter_mut().for_each(|v| *v = *v / norm);
    }
    let mut r = vec![vec![T::zero(); m]; m];
    for j in 0..m {
        for i in 0..j {
            let dot = q[i].iter().zip(&q[j]).fold(T::zero(), |a, (&u, &v)| a + u * v);
            r[i][j] = dot;
            let qi = q[i].clone();
            q[j].iter_mut().zip(&qi).for_each(|(v, &u)| *v = *v - dot * u);
        }
        let norm = q[j].iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        if norm <= T::epsilon() * T::lit(1e3) {
            return None;
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v = *v / norm);
    }
    let qty: Vec<T> = q.iter().map(|c| c.iter().zip(y).fold(T::zero(), |a, (&u, &v)| a + u * v)).collect();
    let mut beta = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut acc = qty[i];
        for j in i + 1..m {
            acc = acc - r[i][j] * beta[j];
        }
        beta[i] = acc / r[i][i];
    }
    Some(beta.iter().zip(&scale).map(|(&b, &s)| b / s).collect())
}

/// Fits `ln p(k) = c - α ln k - k/γ` by unweighted least squares over the
/// entries of `samples` with `kmin <= k <= kmax` and `p > 0`.
///
/// A negative damping estimate is clamped to zero and the exponent refitted
/// with the pure power law.
pub fn fit_power_law<T: Real>(
    samples: impl IntoIterator<Item = (usize, T)>,
    kmin: usize,
    kmax: usize,
) -> Result<PowerLawFit<T>> {
    fit_power_law_at(samples.into_iter().map(|(k, p)| (T::from_usize_lossy(k), p)), kmin, kmax)
}

/// As [`fit_power_law`] with non-integer abscissae, e.g. centers of
/// logarithmic bins.
pub fn fit_power_law_at<T: Real>(
    samples: impl IntoIterator<Item = (T, T)>,
    kmin: usize,
    kmax: usize,
) -> Result<PowerLawFit<T>> {
    if kmin == 0 || kmax < kmin.saturating_mul(4) {
        return Err(Error::InvalidArgument(format!("fit range [{kmin}, {kmax}] needs kmin >= 1 and kmax/kmin >= 4")));
    }
    let (lo, hi) = (T::from_usize_lossy(kmin), T::from_usize_lossy(kmax));
    let (ks, ys): (Vec<T>, Vec<T>) = samples
        .into_iter()
        .filter(|&(k, p)| k >= lo && k <= hi && p > T::zero() && p.is_finite())
        .map(|(k, p)| (k, p.ln()))
        .unzip();
    if ks.len() < 4 {
        return Err(Error::InsufficientData(format!("{} nonzero bins in [{kmin}, {kmax}]", ks.len())));
    }
    let ones = vec![T::one(); ks.len()];
    let neg_log: Vec<T> = ks.iter().map(|k| -k.ln()).collect();
    let neg_k: Vec<T> = ks.iter().map(|&k| -k).collect();

    let singular = || Error::InsufficientData("degenerate design in power-law fit".into());
    let full = least_squares(&[ones.clone(), neg_log.clone(), neg_k.clone()], &ys).ok_or_else(singular)?;
    let (coef, damping) = if full[2] >= T::zero() {
        (full, true)
    } else {
        (least_squares(&[ones, neg_log.clone()], &ys).ok_or_else(singular)?, false)
    };
    let rate = if damping { coef[2] } else { T::zero() };
    let sq = ks.iter().zip(&ys).fold(T::zero(), |acc, (&k, &y)| {
        let pred = coef[0] - coef[1] * k.ln() - rate * k;
        acc + (y - pred) * (y - pred)
    });
    Ok(PowerLawFit {
        exponent: coef[1],
        damping_rate: rate,
        k_range: (kmin, kmax),
        residual: (sq / T::from_usize_lossy(ks.len())).sqrt(),
        points: ks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{f_mass, g_fraction, gamma_damping, KineticTime, SeriesPolicy};

    fn kt(t: f64) -> KineticTime<f64> {
        KineticTime::new(t).unwrap()
    }

    #[test]
    fn recovers_synthetic_law_exactly() {
        let pts = (5..400).map(|k| (k, 3.0 * (k as f64).powf(-1.7) * (-0.02 * k as f64).exp()));
        let fit = fit_power_law(pts, 5, 399).unwrap();
        assert!((fit.exponent - 1.7).abs() < 1e-9);
        assert!((fit.damping_rate - 0.02).abs() < 1e-11);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn analytic_critical_exponents() {
        let policy = SeriesPolicy::identity();
        let g = fit_power_law((10..=2000).map(|k| (k, g_fraction(k, kt(1.0), &policy).unwrap())), 10, 2000).unwrap();
        assert!((g.exponent - 2.5).abs() < 0.02, "{g:?}");
        assert!(g.damping_rate < 1e-4);
        let f = fit_power_law((10..=2000).map(|k| (k, f_mass(k, kt(1.0)))), 10, 2000).unwrap();
        assert!((f.exponent - 1.5).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn analytic_subcritical_damping() {
        let policy = SeriesPolicy::default();
        let fit = fit_power_law((10..=200).map(|k| (k, g_fraction(k, kt(0.5), &policy).unwrap())), 10, 200).unwrap();
        let expected = gamma_damping(kt(0.5)).unwrap().rate();
        assert!((fit.damping_rate - 0.1931).abs() < 0.005, "{fit:?}");
        assert!((fit.damping_rate - expected).abs() < 0.005);
    }

    #[test]
    fn rejects_thin_support() {
        assert!(fit_power_law((10..=20).map(|k| (k, 1.0 / k as f64)), 10, 20).is_err());
        assert!(matches!(fit_power_law([(10usize, 1.0f64), (50, 0.1)], 10, 100), Err(Error::InsufficientData(_))));
    }
}
