//! Closed-form regret bounds, with the constants exactly as published.

use serde::{Deserialize, Serialize};

use crate::deda::delay_penalty;
use crate::error::{Error, Result};

/// `2 sqrt(6)`
pub const SKIP_HP_C1: f64 = 4.898_979_485_566_356;
/// `sqrt(2/3)`
pub const SKIP_HP_C2: f64 = 0.816_496_580_927_726;
/// `4 (sqrt(3) + 1)`
pub const SKIP_HP_C3: f64 = 10.928_203_230_275_509;
/// `1 + 2 / sqrt(3)`
pub const SKIP_HP_C4: f64 = 2.154_700_538_379_252;
/// `2 + sqrt(2)`
pub const DEDA_C: f64 = 3.414_213_562_373_095;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Cor1,
    Cor2,
    SkipExp,
    SkipHp,
    Thm4Worst,
    Thm4Bestarm,
}

/// The skipped-set term of the skipping bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkipTerm {
    /// A comparator set `R`: its size and the delay `D_{R̄}` of the other rounds.
    Candidate { skipped: usize, kept_delay: f64 },
    /// What a run actually did: `|S|` and `Σ_t d̃_t`.
    Realized {
        skipped: usize,
        effective_delay_sum: f64,
    },
}

/// Inputs for [`bound_value`]; each kind reads only what its formula needs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundParams {
    pub arms: Option<usize>,
    pub rounds: Option<usize>,
    pub total_delay: Option<f64>,
    pub d_star: Option<usize>,
    pub delta: Option<f64>,
    pub skip: Option<SkipTerm>,
    pub best_arm_loss: Option<f64>,
    pub total_arm_loss: Option<f64>,
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingParameter(name))
}

fn checked_delta(delta: f64) -> Result<f64> {
    if delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0, 1)"
        )))
    }
}

pub fn bound_value(kind: BoundKind, p: &BoundParams) -> Result<f64> {
    let k = need(p.arms, "K")?;
    match kind {
        BoundKind::Cor1 => Ok(cor1_bound(
            k,
            need(p.rounds, "T")?,
            need(p.total_delay, "D")?,
        )),
        BoundKind::Cor2 => Ok(cor2_bound(
            k,
            need(p.rounds, "T")?,
            need(p.total_delay, "D")?,
            need(p.d_star, "d_star")?,
            checked_delta(need(p.delta, "delta")?)?,
        )),
        BoundKind::SkipExp => Ok(skip_exp_bound(
            k,
            need(p.rounds, "T")?,
            need(p.skip, "skip term")?,
        )),
        BoundKind::SkipHp => Ok(skip_hp_bound(
            k,
            need(p.rounds, "T")?,
            need(p.skip, "skip term")?,
            checked_delta(need(p.delta, "delta")?)?,
        )),
        BoundKind::Thm4Worst => Ok(thm4_worst_bound(
            k,
            need(p.rounds, "T")?,
            need(p.total_delay, "D")?,
            need(p.d_star, "d_star")?,
        )),
        BoundKind::Thm4Bestarm => Ok(thm4_bestarm_bound(
            k,
            need(p.d_star, "d_star")?,
            need(p.best_arm_loss, "L_{T,A*}")?,
            need(p.total_arm_loss, "sum_i L_{T,i}")?,
        )),
    }
}

/// `3 sqrt(ln K (T K + D))`
pub fn cor1_bound(arms: usize, rounds: usize, total_delay: f64) -> f64 {
    let (k, t) = (arms as f64, rounds as f64);
    3.0 * (k.ln() * (t * k + total_delay)).sqrt()
}

/// `2 sqrt(3 ln K (2KT + D)) + (2 sqrt((2TK + D) / (3 ln K)) + d* + 2) ln(2/δ) / 2`
pub fn cor2_bound(arms: usize, rounds: usize, total_delay: f64, d_star: usize, delta: f64) -> f64 {
    let (k, t) = (arms as f64, rounds as f64);
    let ln_k = k.ln();
    let base = 2.0 * k * t + total_delay;
    2.0 * (3.0 * ln_k * base).sqrt()
        + (2.0 * (base / (3.0 * ln_k)).sqrt() + d_star as f64 + 2.0) * (2.0 / delta).ln() / 2.0
}

/// `max{2 ln K, |R| + sqrt(D_{R̄} ln K)}`
fn skip_penalty(ln_k: f64, skipped: usize, kept_delay: f64) -> f64 {
    (2.0 * ln_k).max(skipped as f64 + (kept_delay * ln_k).sqrt())
}

pub fn skip_exp_bound(arms: usize, rounds: usize, term: SkipTerm) -> f64 {
    let (k, t) = (arms as f64, rounds as f64);
    let ln_k = k.ln();
    match term {
        SkipTerm::Candidate {
            skipped,
            kept_delay,
        } => 3.0 * (t * k * ln_k).sqrt() + 10.0 * skip_penalty(ln_k, skipped, kept_delay),
        SkipTerm::Realized {
            skipped,
            effective_delay_sum,
        } => skipped as f64 + 3.0 * (ln_k * (t * k + effective_delay_sum)).sqrt(),
    }
}

pub fn skip_hp_bound(arms: usize, rounds: usize, term: SkipTerm, delta: f64) -> f64 {
    let (k, t) = (arms as f64, rounds as f64);
    let ln_k = k.ln();
    let log_delta = (2.0 / delta).ln();
    match term {
        SkipTerm::Candidate {
            skipped,
            kept_delay,
        } => {
            (SKIP_HP_C1 + SKIP_HP_C2 * log_delta / ln_k) * (k * t * ln_k).sqrt()
                + (SKIP_HP_C3 + SKIP_HP_C4 * log_delta / ln_k)
                    * skip_penalty(ln_k, skipped, kept_delay)
        }
        SkipTerm::Realized {
            skipped,
            effective_delay_sum,
        } => {
            // the largest effective delay is at most sqrt(Σ d̃ / ln K)
            let base = 2.0 * k * t + effective_delay_sum;
            let max_effective = (effective_delay_sum / ln_k).sqrt();
            skipped as f64
                + 2.0 * (3.0 * ln_k * base).sqrt()
                + (2.0 * (base / (3.0 * ln_k)).sqrt() + max_effective + 2.0) * log_delta / 2.0
        }
    }
}

/// `C_T + c sqrt(ln K (KT + 2D))` with `C_T = 4 d*² + 6 d* + 2`, `c = 2 + sqrt 2`.
pub fn thm4_worst_bound(arms: usize, rounds: usize, total_delay: f64, d_star: usize) -> f64 {
    let (k, t) = (arms as f64, rounds as f64);
    delay_penalty(d_star) + DEDA_C * (k.ln() * (k * t + 2.0 * total_delay)).sqrt()
}

/// `2 C'_T + 4 c' sqrt(d* L_{T,A*} / 2) + 2 c' sqrt(Σ_i L_{T,i})`
/// with `c' = c sqrt(ln K)` and `C'_T = C_T + c'² d*`.
pub fn thm4_bestarm_bound(
    arms: usize,
    d_star: usize,
    best_arm_loss: f64,
    total_arm_loss: f64,
) -> f64 {
    let c_prime = DEDA_C * (arms as f64).ln().sqrt();
    let d = d_star as f64;
    let c_t_prime = delay_penalty(d_star) + c_prime * c_prime * d;
    2.0 * c_t_prime
        + 4.0 * c_prime * (d * best_arm_loss / 2.0).sqrt()
        + 2.0 * c_prime * total_arm_loss.sqrt()
}

/// The comparator set minimising `|R| + sqrt(D_{R̄} ln K)`: `R` is always some
/// number of the largest delays, so scanning the sorted delays is exact.
pub fn best_skip_candidate(delays: &[usize], arms: usize) -> SkipTerm {
    let ln_k = (arms as f64).ln();
    let mut sorted = delays.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut remaining: usize = sorted.iter().sum();
    let mut best = (0usize, remaining);
    let mut best_value = (remaining as f64 * ln_k).sqrt();
    for (idx, &d) in sorted.iter().enumerate() {
        remaining -= d;
        let value = (idx + 1) as f64 + (remaining as f64 * ln_k).sqrt();
        if value < best_value {
            best_value = value;
            best = (idx + 1, remaining);
        }
    }
    SkipTerm::Candidate {
        skipped: best.0,
        kept_delay: best.1 as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_closed_forms() {
        assert!((SKIP_HP_C1 - 2.0 * 6f64.sqrt()).abs() < 1e-15);
        assert!((SKIP_HP_C2 - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((SKIP_HP_C3 - 4.0 * (3f64.sqrt() + 1.0)).abs() < 1e-14);
        assert!((SKIP_HP_C4 - (1.0 + 2.0 / 3f64.sqrt())).abs() < 1e-15);
        assert!((DEDA_C - (2.0 + 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn cor1_reference_value() {
        let v = cor1_bound(10, 5000, 0.0);
        assert!((v - 3.0 * (10f64.ln() * 50_000.0).sqrt()).abs() < 1e-12);
        // commonly quoted as ~1017.6; the formula evaluates to 1017.92
        assert!((v - 1017.92).abs() < 0.005, "{v}");
    }

    #[test]
    fn thm4_worst_zero_delay() {
        let v = thm4_worst_bound(4, 100, 0.0, 0);
        let expected = 2.0 + DEDA_C * (4f64.ln() * 400.0).sqrt();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn skip_exp_candidate_value() {
        let v = skip_exp_bound(
            10,
            5000,
            SkipTerm::Candidate {
                skipped: 1,
                kept_delay: 0.0,
            },
        );
        let ln10 = 10f64.ln();
        let expected = 3.0 * (50_000.0 * ln10).sqrt() + 10.0 * (2.0 * ln10).max(1.0);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn missing_parameters_reported() {
        let p = BoundParams {
            arms: Some(5),
            rounds: Some(10),
            ..Default::default()
        };
        assert_eq!(
            bound_value(BoundKind::Cor1, &p),
            Err(Error::MissingParameter("D"))
        );
        assert!(bound_value(BoundKind::SkipExp, &p).is_err());
        assert!(bound_value(BoundKind::Thm4Bestarm, &BoundParams::default()).is_err());
        let bad_delta = BoundParams {
            total_delay: Some(0.0),
            d_star: Some(0),
            delta: Some(1.5),
            ..p
        };
        assert!(matches!(
            bound_value(BoundKind::Cor2, &bad_delta),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn best_candidate_on_one_huge() {
        let mut delays = vec![0; 1000];
        delays[0] = 999;
        assert_eq!(
            best_skip_candidate(&delays, 10),
            SkipTerm::Candidate {
                skipped: 1,
                kept_delay: 0.0
            }
        );
        assert_eq!(
            best_skip_candidate(&[0; 5], 10),
            SkipTerm::Candidate {
                skipped: 0,
                kept_delay: 0.0
            }
        );
    }

    #[test]
    fn best_candidate_matches_subset_enumeration() {
        let delays = [3usize, 0, 7, 1, 12, 2, 5];
        let ln_k = 3f64.ln();
        let mut brute = f64::INFINITY;
        for mask in 0u32..(1 << delays.len()) {
            let r = mask.count_ones() as f64;
            let kept: usize = (0..delays.len())
                .filter(|i| mask & (1 << i) == 0)
                .map(|i| delays[i])
                .sum();
            brute = brute.min(r + (kept as f64 * ln_k).sqrt());
        }
        let SkipTerm::Candidate {
            skipped,
            kept_delay,
        } = best_skip_candidate(&delays, 3)
        else {
            unreachable!()
        };
        let found = skipped as f64 + (kept_delay * ln_k).sqrt();
        assert!((found - brute).abs() < 1e-12);
    }
}
