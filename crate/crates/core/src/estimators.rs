//! Loss estimates built from a single observed loss.
//!
//! Both estimators are nonzero only at the played arm, so they are stored as
//! an `(arm, value)` pair.

use crate::error::{Error, Result};

/// Sparse loss-estimate vector: `value` at `arm`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub arm: usize,
    pub value: f64,
}

impl Estimate {
    /// Value of the estimate at arm `i`.
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        if i == self.arm {
            self.value
        } else {
            0.0
        }
    }

    pub fn to_dense(&self, arms: usize) -> Vec<f64> {
        let mut v = vec![0.0; arms];
        v[self.arm] = self.value;
        v
    }
}

fn check_loss(loss: f64) -> Result<()> {
    if (0.0..=1.0).contains(&loss) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "loss {loss} outside [0, 1]"
        )))
    }
}

fn played_prob(arm: usize, probs: &[f64]) -> Result<f64> {
    probs
        .get(arm)
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("arm {arm} out of range")))
}

/// Importance-weighted estimate `loss / p[arm]` at the played arm.
pub fn iw_estimate(loss: f64, arm: usize, probs: &[f64]) -> Result<Estimate> {
    check_loss(loss)?;
    iw_from_prob(loss, arm, played_prob(arm, probs)?)
}

/// Implicit-exploration estimate `loss / (p[arm] + gamma)` at the played arm.
pub fn ix_estimate(loss: f64, arm: usize, probs: &[f64], gamma: f64) -> Result<Estimate> {
    check_loss(loss)?;
    ix_from_prob(loss, arm, played_prob(arm, probs)?, gamma)
}

/// [`iw_estimate`] given only the played arm's probability.
pub fn iw_from_prob(loss: f64, arm: usize, prob: f64) -> Result<Estimate> {
    if prob <= 0.0 {
        return Err(Error::ZeroProbability { arm });
    }
    Ok(Estimate {
        arm,
        value: loss / prob,
    })
}

/// [`ix_estimate`] given only the played arm's probability.
pub fn ix_from_prob(loss: f64, arm: usize, prob: f64, gamma: f64) -> Result<Estimate> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma {gamma} must be positive"
        )));
    }
    Ok(Estimate {
        arm,
        value: loss / (prob + gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iw_uniform_case() {
        let e = iw_estimate(0.5, 2, &[0.25; 4]).unwrap();
        assert_eq!(e.to_dense(4), vec![0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_loss_gives_zero_vector() {
        let p = [0.1, 0.2, 0.7];
        for arm in 0..3 {
            assert!(iw_estimate(0.0, arm, &p)
                .unwrap()
                .to_dense(3)
                .iter()
                .all(|&v| v == 0.0));
            assert!(ix_estimate(0.0, arm, &p, 0.1)
                .unwrap()
                .to_dense(3)
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ix_hand_case() {
        let e = ix_estimate(0.5, 1, &[0.25, 0.25, 0.5], 0.25).unwrap();
        assert_eq!(e.arm, 1);
        assert_eq!(e.value, 1.0);
        let iw = iw_estimate(0.5, 1, &[0.25, 0.25, 0.5]).unwrap();
        assert!(e.value < iw.value);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            iw_estimate(0.5, 0, &[0.0, 1.0]),
            Err(Error::ZeroProbability { arm: 0 })
        ));
        assert!(iw_estimate(1.5, 0, &[0.5, 0.5]).is_err());
        assert!(iw_estimate(-0.1, 0, &[0.5, 0.5]).is_err());
        assert!(ix_estimate(0.5, 0, &[0.5, 0.5], 0.0).is_err());
        assert!(ix_estimate(0.5, 0, &[0.5, 0.5], -1.0).is_err());
        assert!(iw_estimate(0.5, 5, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ix_allows_zero_probability() {
        let e = ix_estimate(1.0, 0, &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(e.value, 2.0);
    }
}
