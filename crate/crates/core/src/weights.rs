//! Exponential-weights distribution and inverse-CDF sampling.

use crate::error::{Error, Result};

/// Smallest unnormalised weight after the max-shift. Keeps every probability
/// strictly positive; it only acts once `eta * (z_i - min z)` exceeds about 690.
const WEIGHT_FLOOR: f64 = 1e-300;

/// `p_i ∝ exp(-eta * z_i)`, shifted by the largest exponent before `exp`.
pub fn distribution(z: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eta {eta} must be positive and finite"
        )));
    }
    if z.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cumulative estimate {bad}")));
    }
    let shift = z.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let mut weights: Vec<f64> = z
        .iter()
        .map(|&v| (-eta * (v - shift)).exp().max(WEIGHT_FLOOR))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Smallest arm `i` with `sum_{j <= i} p_j > u`.
pub fn sample(p: &[f64], u: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!(
            "uniform draw {u} outside [0, 1)"
        )));
    }
    let mut cumulative = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        cumulative += pi;
        if cumulative > u {
            return Ok(i);
        }
    }
    // rounding left the total just below u: take the last arm with mass
    p.iter().rposition(|&pi| pi > 0.0).ok_or(Error::EmptyInput)
}

/// True when every entry is positive and the entries sum to one within `tol`.
pub fn is_simplex(p: &[f64], tol: f64) -> bool {
    !p.is_empty()
        && p.iter().all(|&v| v > 0.0 && v.is_finite())
        && (p.iter().sum::<f64>() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_give_uniform() {
        for eta in [1e-9, 0.3, 50.0] {
            let p = distribution(&[4.0; 5], eta).unwrap();
            assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        }
    }

    #[test]
    fn two_arm_ratio() {
        let eta = 0.7;
        let p = distribution(&[0.0, 2f64.ln() / eta], eta).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_inputs_stay_on_simplex() {
        let z = [0.0, 1e12, 5e11, 1.0];
        for eta in [1e-9, 1.0, 1e3] {
            let p = distribution(&z, eta).unwrap();
            assert!(is_simplex(&p, 1e-12), "{p:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(distribution(&[0.0, f64::NAN], 1.0).is_err());
        assert!(distribution(&[0.0, f64::INFINITY], 1.0).is_err());
        assert!(distribution(&[0.0, 1.0], 0.0).is_err());
        assert!(distribution(&[], 1.0).is_err());
        assert!(sample(&[0.5, 0.5], 1.0).is_err());
        assert!(sample(&[0.5, 0.5], -0.1).is_err());
    }

    #[test]
    fn point_mass_and_uniform_bins() {
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(sample(&[1.0, 0.0, 0.0], u).unwrap(), 0);
        }
        assert_eq!(sample(&[0.25; 4], 0.6).unwrap(), 2);
        assert_eq!(sample(&[0.25; 4], 0.0).unwrap(), 0);
        assert_eq!(sample(&[0.25; 4], 0.25).unwrap(), 1);
    }

    #[test]
    fn rounding_shortfall_picks_last_positive_arm() {
        assert_eq!(sample(&[0.5, 0.4999, 0.0], 0.99995).unwrap(), 1);
    }
}
