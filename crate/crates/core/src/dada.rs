//! Delay-adaptive Exp3: exponential weights over the arrived loss estimates,
//! with a step size driven by the running count of missing feedback.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::env::FeedbackEvent;
use crate::error::{Error, Result};
use crate::estimators::{iw_from_prob, ix_from_prob, Estimate};
use crate::weights::{distribution, sample};

/// `sqrt(ln K / (t K + cum_tau))`.
pub fn step_size_cor1(t: usize, arms: usize, cum_tau: usize) -> f64 {
    ((arms as f64).ln() / (t as f64 * arms as f64 + cum_tau as f64)).sqrt()
}

/// `(1/2) sqrt(3 ln K / (2 t K + cum_tau))`; the IX parameter equals this step.
pub fn step_size_cor2(t: usize, arms: usize, cum_tau: usize) -> f64 {
    0.5 * (3.0 * (arms as f64).ln() / (2.0 * t as f64 * arms as f64 + cum_tau as f64)).sqrt()
}

/// Caller-supplied step rule `(t, K, cum_tau) -> eta`.
pub type CustomStep = Arc<dyn Fn(usize, usize, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum StepSchedule {
    Cor1,
    Cor2,
    /// Must be positive and non-increasing along the run; checked every round.
    Custom(CustomStep),
}

impl StepSchedule {
    pub fn eta(&self, t: usize, arms: usize, cum_tau: usize) -> f64 {
        match self {
            Self::Cor1 => step_size_cor1(t, arms, cum_tau),
            Self::Cor2 => step_size_cor2(t, arms, cum_tau),
            Self::Custom(rule) => rule(t, arms, cum_tau),
        }
    }
}

impl fmt::Debug for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cor1 => f.write_str("Cor1"),
            Self::Cor2 => f.write_str("Cor2"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Importance weighting.
    Iw,
    /// Implicit exploration with `gamma_t = eta_t`.
    Ix,
}

/// Everything a policy decided at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub round: usize,
    pub probs: Vec<f64>,
    pub arm: usize,
    pub eta: f64,
    pub gamma: Option<f64>,
    /// Missing-feedback count that entered the step size.
    pub tau: usize,
    /// Running sum of `tau` including this round.
    pub cum_tau: usize,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    prob: f64,
    gamma: Option<f64>,
}

/// Per-run state of the delay-adaptive Exp3 policy.
#[derive(Debug, Clone)]
pub struct DadaPolicy {
    arms: usize,
    schedule: StepSchedule,
    estimator: EstimatorMode,
    z: Vec<f64>,
    outstanding: BTreeMap<usize, Pending>,
    settled: Vec<bool>,
    cum_tau: usize,
    eta: Option<f64>,
    next_round: usize,
}

impl DadaPolicy {
    pub fn new(arms: usize, schedule: StepSchedule, estimator: EstimatorMode) -> Result<Self> {
        if arms < 2 {
            return Err(Error::InvalidParameter("K must be at least 2".into()));
        }
        Ok(Self {
            arms,
            schedule,
            estimator,
            z: vec![0.0; arms],
            outstanding: BTreeMap::new(),
            settled: vec![false],
            cum_tau: 0,
            eta: None,
            next_round: 1,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn estimator(&self) -> EstimatorMode {
        self.estimator
    }

    /// Per-arm sum of arrived estimates.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn cum_tau(&self) -> usize {
        self.cum_tau
    }

    pub fn last_eta(&self) -> Option<f64> {
        self.eta
    }

    /// Rounds whose feedback has not arrived (or been discarded), ascending.
    pub fn outstanding(&self) -> impl Iterator<Item = usize> + '_ {
        self.outstanding.keys().copied()
    }

    pub fn outstanding_len(&self) -> usize {
        self.outstanding.len()
    }

    /// Plays round `t` using `tau_t = |outstanding|`.
    pub fn act(&mut self, t: usize, u: f64) -> Result<Decision> {
        let tau = self.outstanding.len();
        self.act_with_tau(t, tau, u)
    }

    /// Plays round `t` with an externally counted missing-feedback number
    /// (the skipping controller passes its counted subset here).
    pub fn act_with_tau(&mut self, t: usize, tau: usize, u: f64) -> Result<Decision> {
        if t != self.next_round {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                got: t,
            });
        }
        let cum_tau = self.cum_tau + tau;
        let eta = self.schedule.eta(t, self.arms, cum_tau);
        let previous = self.eta.unwrap_or(f64::INFINITY);
        if !eta.is_finite() || eta <= 0.0 || eta > previous {
            return Err(Error::InvalidStepSize {
                round: t,
                value: eta,
                previous,
            });
        }
        let probs = distribution(&self.z, eta)?;
        let arm = sample(&probs, u)?;
        let gamma = match self.estimator {
            EstimatorMode::Iw => None,
            EstimatorMode::Ix => Some(eta),
        };

        self.cum_tau = cum_tau;
        self.eta = Some(eta);
        self.next_round = t + 1;
        self.settled.push(false);
        self.outstanding.insert(
            t,
            Pending {
                prob: probs[arm],
                gamma,
            },
        );
        Ok(Decision {
            round: t,
            probs,
            arm,
            eta,
            gamma,
            tau,
            cum_tau,
        })
    }

    /// Applies the feedback due at the end of round `t` and returns the
    /// estimates that entered `z`.
    pub fn receive(&mut self, t: usize, arrivals: &[FeedbackEvent]) -> Result<Vec<Estimate>> {
        let mut estimates = Vec::with_capacity(arrivals.len());
        let mut seen = Vec::with_capacity(arrivals.len());
        for event in arrivals {
            if event.due() != t {
                return Err(Error::InvalidParameter(format!(
                    "feedback of round {} is due at {}, not {t}",
                    event.origin,
                    event.due()
                )));
            }
            if seen.contains(&event.origin) {
                return Err(Error::DuplicateArrival(event.origin));
            }
            let pending = self.pending(event.origin)?;
            let estimate = match pending.gamma {
                None => iw_from_prob(event.loss, event.arm, pending.prob)?,
                Some(gamma) => ix_from_prob(event.loss, event.arm, pending.prob, gamma)?,
            };
            seen.push(event.origin);
            estimates.push(estimate);
        }
        for &origin in &seen {
            self.outstanding.remove(&origin);
            self.settled[origin] = true;
        }
        add_sparse(&mut self.z, &estimates);
        Ok(estimates)
    }

    /// Drops round `s` from the outstanding set without using its feedback.
    pub fn discard(&mut self, s: usize) -> Result<()> {
        self.pending(s)?;
        self.outstanding.remove(&s);
        self.settled[s] = true;
        Ok(())
    }

    fn pending(&self, s: usize) -> Result<Pending> {
        match self.outstanding.get(&s) {
            Some(p) => Ok(*p),
            None if self.settled.get(s).copied().unwrap_or(false) => {
                Err(Error::DuplicateArrival(s))
            }
            None => Err(Error::UnknownArrival(s)),
        }
    }
}

/// Adds a batch of sparse estimates to `acc`. Values landing on the same arm are
/// summed in sorted order first, so the result does not depend on arrival order.
pub(crate) fn add_sparse(acc: &mut [f64], estimates: &[Estimate]) {
    match estimates {
        [] => {}
        [only] => acc[only.arm] += only.value,
        _ => {
            let mut sorted: Vec<Estimate> = estimates.to_vec();
            sorted.sort_by(|a, b| a.arm.cmp(&b.arm).then(a.value.total_cmp(&b.value)));
            for group in sorted.chunk_by(|a, b| a.arm == b.arm) {
                let sum: f64 = group.iter().map(|e| e.value).sum();
                acc[group[0].arm] += sum;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(origin: usize, arm: usize, loss: f64, delay: usize) -> FeedbackEvent {
        FeedbackEvent {
            origin,
            arm,
            loss,
            delay,
        }
    }

    #[test]
    fn cor1_values() {
        assert!((step_size_cor1(1, 2, 0) - (2f64.ln() / 2.0).sqrt()).abs() < 1e-15);
        assert!((step_size_cor1(1, 2, 0) - 0.588705).abs() < 1e-6);
        // quoted as 0.140720; the closed form gives 0.1407274
        assert!((step_size_cor1(10, 4, 30) - 0.140720).abs() < 1e-5);
        assert!((step_size_cor1(10, 4, 30) - (4f64.ln() / 70.0).sqrt()).abs() < 1e-15);
        assert!(step_size_cor1(5, 3, 10) < step_size_cor1(5, 3, 9));
    }

    #[test]
    fn cor2_values() {
        assert!((step_size_cor2(1, 2, 0) - 0.5 * (3.0 * 2f64.ln() / 4.0).sqrt()).abs() < 1e-15);
        assert!((step_size_cor2(1, 2, 0) - 0.360503).abs() < 1e-5);
    }

    #[test]
    fn cor2_below_cor1_on_grid() {
        // cor2 / cor1 = (1/2) sqrt(3 (tK + c) / (2tK + c)) < 1 since 3(tK+c) < 4(2tK+c)
        for t in [1, 3, 10, 100, 5000] {
            for k in [2, 3, 10, 50] {
                for c in [0, 1, 17, 1000, 100_000] {
                    assert!(step_size_cor2(t, k, c) < step_size_cor1(t, k, c));
                }
            }
        }
    }

    #[test]
    fn first_round_uniform() {
        for schedule in [StepSchedule::Cor1, StepSchedule::Cor2] {
            let mut p = DadaPolicy::new(4, schedule, EstimatorMode::Iw).unwrap();
            let d = p.act(1, 0.3).unwrap();
            assert_eq!(d.probs, vec![0.25; 4]);
            assert_eq!(d.arm, 1);
            assert_eq!(d.tau, 0);
        }
    }

    #[test]
    fn single_estimate_ratio() {
        let mut p = DadaPolicy::new(3, StepSchedule::Cor1, EstimatorMode::Iw).unwrap();
        let d1 = p.act(1, 0.5).unwrap();
        let est = p.receive(1, &[event(1, d1.arm, 0.8, 0)]).unwrap();
        let v = est[0].value;
        assert!((v - 0.8 * 3.0).abs() < 1e-12);
        let d2 = p.act(2, 0.1).unwrap();
        let other = (d1.arm + 1) % 3;
        let ratio = d2.probs[d1.arm] / d2.probs[other];
        assert!((ratio - (-d2.eta * v).exp()).abs() < 1e-12);
    }

    #[test]
    fn no_arrivals_leave_state_unchanged() {
        let mut p = DadaPolicy::new(3, StepSchedule::Cor1, EstimatorMode::Iw).unwrap();
        p.act(1, 0.5).unwrap();
        let z = p.z().to_vec();
        assert!(p.receive(1, &[]).unwrap().is_empty());
        assert_eq!(p.z(), z.as_slice());
        assert_eq!(p.outstanding().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn arrival_order_does_not_matter() {
        let run = |swap: bool| {
            let mut p = DadaPolicy::new(3, StepSchedule::Cor1, EstimatorMode::Iw).unwrap();
            let a = p.act(1, 0.1).unwrap().arm;
            let b = p.act(2, 0.15).unwrap().arm;
            let c = p.act(3, 0.2).unwrap().arm;
            let mut evs = vec![
                event(1, a, 0.3, 2),
                event(2, b, 0.9, 1),
                event(3, c, 0.7, 0),
            ];
            if swap {
                evs.reverse();
            }
            p.receive(3, &evs).unwrap();
            p.z().to_vec()
        };
        assert_eq!(run(false), run(true));
    }

    #[test]
    fn receive_errors() {
        let mut p = DadaPolicy::new(2, StepSchedule::Cor1, EstimatorMode::Iw).unwrap();
        let a = p.act(1, 0.4).unwrap().arm;
        assert!(matches!(
            p.receive(1, &[event(3, a, 0.5, 0)]),
            Err(Error::UnknownArrival(3)) | Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            p.receive(1, &[event(1, a, 0.5, 0), event(1, a, 0.5, 0)]),
            Err(Error::DuplicateArrival(1))
        ));
        p.receive(1, &[event(1, a, 0.5, 0)]).unwrap();
        p.act(2, 0.4).unwrap();
        assert!(matches!(
            p.receive(1, &[event(1, a, 0.5, 0)]),
            Err(Error::DuplicateArrival(1))
        ));
        p.receive(2, &[]).unwrap();
        assert!(matches!(
            p.act(5, 0.1),
            Err(Error::OutOfOrder {
                expected: 3,
                got: 5
            })
        ));
    }

    #[test]
    fn increasing_custom_schedule_rejected() {
        let rule: CustomStep = Arc::new(|t, _, _| 0.01 * t as f64);
        let mut p = DadaPolicy::new(2, StepSchedule::Custom(rule), EstimatorMode::Iw).unwrap();
        p.act(1, 0.5).unwrap();
        assert!(matches!(
            p.act(2, 0.5),
            Err(Error::InvalidStepSize { round: 2, .. })
        ));

        let zero: CustomStep = Arc::new(|_, _, _| 0.0);
        let mut p = DadaPolicy::new(2, StepSchedule::Custom(zero), EstimatorMode::Iw).unwrap();
        assert!(p.act(1, 0.5).is_err());
    }

    #[test]
    fn ix_uses_gamma_frozen_at_play_time() {
        // sentinel step sizes 1/2, 1/4, 1/8, ...
        let rule: CustomStep = Arc::new(|t, _, _| 0.5f64.powi(t as i32));
        let mut p = DadaPolicy::new(2, StepSchedule::Custom(rule), EstimatorMode::Ix).unwrap();
        let d1 = p.act(1, 0.7).unwrap();
        let d2 = p.act(2, 0.7).unwrap();
        let d3 = p.act(3, 0.7).unwrap();
        assert_eq!(d3.gamma, Some(0.125));
        let est = p
            .receive(3, &[event(1, d1.arm, 1.0, 2), event(2, d2.arm, 1.0, 1)])
            .unwrap();
        assert_eq!(est[0].value, 1.0 / (d1.probs[d1.arm] + 0.5));
        assert_eq!(est[1].value, 1.0 / (d2.probs[d2.arm] + 0.25));
        assert!(est.iter().all(|e| e.value <= 1.0 / 0.125));
    }

    #[test]
    fn discard_removes_without_estimate() {
        let mut p = DadaPolicy::new(2, StepSchedule::Cor1, EstimatorMode::Iw).unwrap();
        let a = p.act(1, 0.4).unwrap().arm;
        p.discard(1).unwrap();
        assert_eq!(p.outstanding_len(), 0);
        assert!(matches!(
            p.receive(1, &[event(1, a, 0.5, 0)]),
            Err(Error::DuplicateArrival(1))
        ));
        assert_eq!(p.z(), &[0.0, 0.0]);
    }
}
