use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::episode::{BoundValues, RegretReport};

/// Across-seed statistics of the pseudo-regret.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub mean: f64,
    pub std_err: f64,
    pub min: f64,
    pub median: f64,
    pub q90: f64,
    /// Empirical `1 - delta` quantile.
    pub q_delta: f64,
    pub max: f64,
    pub delta: f64,
    /// Mean of each bound that applies to these runs.
    pub mean_bounds: BoundValues,
    /// Fraction of runs whose regret exceeds their own bound.
    pub violations: BoundValues,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Fraction of reports with `regret > bound`.
pub fn fraction_exceeding(reports: &[RegretReport], bound: f64) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.regret > bound).count() as f64 / reports.len() as f64
}

fn per_bound(
    reports: &[RegretReport],
    pick: impl Fn(&BoundValues) -> Option<f64>,
) -> (Option<f64>, Option<f64>) {
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| pick(&r.bounds).map(|b| (r.regret, b)))
        .collect();
    if pairs.is_empty() {
        return (None, None);
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let violated = pairs.iter().filter(|(r, b)| r > b).count() as f64 / n;
    (Some(mean), Some(violated))
}

pub fn aggregate(reports: &[RegretReport], delta: f64) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = reports.len();
    let mut regrets: Vec<f64> = reports.iter().map(|r| r.regret).collect();
    let mean = regrets.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    regrets.sort_by(f64::total_cmp);

    let mut mean_bounds = BoundValues::default();
    let mut violations = BoundValues::default();
    (mean_bounds.cor1, violations.cor1) = per_bound(reports, |b| b.cor1);
    (mean_bounds.cor2, violations.cor2) = per_bound(reports, |b| b.cor2);
    (mean_bounds.skip, violations.skip) = per_bound(reports, |b| b.skip);
    (mean_bounds.thm4_worst, violations.thm4_worst) = per_bound(reports, |b| b.thm4_worst);
    (mean_bounds.thm4_bestarm, violations.thm4_bestarm) = per_bound(reports, |b| b.thm4_bestarm);

    Ok(Summary {
        runs: n,
        mean,
        std_err,
        min: regrets[0],
        median: quantile(&regrets, 0.5),
        q90: quantile(&regrets, 0.9),
        q_delta: quantile(&regrets, 1.0 - delta),
        max: regrets[n - 1],
        delta,
        mean_bounds,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Algo;

    fn report(seed: u64, regret: f64, bound: f64) -> RegretReport {
        RegretReport {
            seed,
            algo: Algo::Dada,
            arms: 2,
            rounds: 10,
            learner_loss: regret,
            arm_losses: vec![0.0, 1.0],
            best_arm: 0,
            best_loss: 0.0,
            regret,
            total_delay: 0,
            d_star: 0,
            policy_d_star: None,
            tilde_d: None,
            skips: None,
            discarded: None,
            effective_delay_sum: None,
            extra_skip_candidates: None,
            memory_high_water: None,
            bounds: BoundValues {
                cor1: Some(bound),
                ..Default::default()
            },
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(aggregate(&[], 0.05), Err(Error::EmptyInput));
    }

    #[test]
    fn single_report_is_degenerate() {
        let s = aggregate(&[report(0, 3.5, 10.0)], 0.05).unwrap();
        assert_eq!(s.mean, 3.5);
        assert_eq!(s.std_err, 0.0);
        assert_eq!(
            (s.min, s.median, s.q90, s.q_delta, s.max),
            (3.5, 3.5, 3.5, 3.5, 3.5)
        );
    }

    #[test]
    fn identical_reports_have_zero_std_err() {
        let reports: Vec<_> = (0..7).map(|s| report(s, 2.25, 1.0)).collect();
        let s = aggregate(&reports, 0.1).unwrap();
        assert_eq!(s.std_err, 0.0);
        assert_eq!(s.violations.cor1, Some(1.0));
        assert_eq!(s.violations.cor2, None);
    }

    #[test]
    fn quantiles_and_violations() {
        let reports: Vec<_> = (0..5).map(|s| report(s, s as f64, 2.5)).collect();
        let s = aggregate(&reports, 0.25).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!(s.q_delta, 3.0);
        assert_eq!(s.violations.cor1, Some(0.4));
        assert_eq!(fraction_exceeding(&reports, 0.5), 0.8);
        let expected_se = (2.5f64 / 5.0).sqrt();
        assert!((s.std_err - expected_se).abs() < 1e-15);
    }
}
