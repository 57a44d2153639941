//! Skipping controller for delay-adaptive Exp3.
//!
//! A round whose feedback has been outstanding for longer than
//! `sqrt(D̃_t / ln K)` stops being counted as missing; its eventual feedback is
//! thrown away (its loss is treated as zero). The counted statistics `τ̃_t`
//! and `D̃_t` replace `τ_t` and `Σ τ_s` in the step-size schedule.

use std::collections::BTreeSet;

use crate::dada::{DadaPolicy, Decision, EstimatorMode, StepSchedule};
use crate::env::FeedbackEvent;
use crate::error::{Error, Result};
use crate::estimators::Estimate;

#[derive(Debug, Clone)]
pub struct SkipState {
    ln_k: f64,
    counted: BTreeSet<usize>,
    skipped: BTreeSet<usize>,
    discarded: BTreeSet<usize>,
    effective_delays: Vec<Option<usize>>,
    tilde_tau: usize,
    tilde_d: usize,
    current: Option<usize>,
    next_round: usize,
    extra_candidates: usize,
}

/// Result of closing a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundClose {
    /// Arrivals that should reach the wrapped policy.
    pub kept: Vec<FeedbackEvent>,
    /// Arrivals dropped because their round was skipped earlier.
    pub discarded: Vec<FeedbackEvent>,
    pub newly_skipped: Option<usize>,
}

impl SkipState {
    pub fn new(arms: usize) -> Result<Self> {
        if arms < 2 {
            return Err(Error::InvalidParameter("K must be at least 2".into()));
        }
        Ok(Self {
            ln_k: (arms as f64).ln(),
            counted: BTreeSet::new(),
            skipped: BTreeSet::new(),
            discarded: BTreeSet::new(),
            effective_delays: vec![None],
            tilde_tau: 0,
            tilde_d: 0,
            current: None,
            next_round: 1,
            extra_candidates: 0,
        })
    }

    /// Opens round `t`: returns `(τ̃_t, D̃_t)` and registers `t` as counted.
    pub fn begin_round(&mut self, t: usize) -> Result<(usize, usize)> {
        if t != self.next_round || self.current.is_some() {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                got: t,
            });
        }
        self.tilde_tau = self.counted.len();
        self.tilde_d += self.tilde_tau;
        self.counted.insert(t);
        self.effective_delays.push(None);
        self.current = Some(t);
        Ok((self.tilde_tau, self.tilde_d))
    }

    /// Closes round `t`: filters arrivals, then tests the oldest counted round
    /// against the skip threshold.
    pub fn end_round(&mut self, t: usize, arrivals: &[FeedbackEvent]) -> Result<RoundClose> {
        if self.current != Some(t) {
            return Err(Error::OutOfOrder {
                expected: self.current.unwrap_or(self.next_round),
                got: t,
            });
        }
        let mut close = RoundClose {
            kept: Vec::with_capacity(arrivals.len()),
            discarded: Vec::new(),
            newly_skipped: None,
        };
        for event in arrivals {
            let s = event.origin;
            if self.counted.remove(&s) {
                self.effective_delays[s] = Some(event.delay);
                close.kept.push(*event);
            } else if self.skipped.contains(&s) && self.discarded.insert(s) {
                close.discarded.push(*event);
            } else if s <= t && self.effective_delays.get(s).is_some_and(|d| d.is_some()) {
                return Err(Error::DuplicateArrival(s));
            } else {
                return Err(Error::UnknownArrival(s));
            }
        }

        let threshold = (self.tilde_d as f64 / self.ln_k).sqrt();
        let mut oldest = self.counted.iter().copied();
        if let Some(s) = oldest.next() {
            if (t - s) as f64 > threshold {
                if let Some(next) = oldest.next() {
                    if (t - next) as f64 > threshold {
                        self.extra_candidates += 1;
                    }
                }
                self.counted.remove(&s);
                self.skipped.insert(s);
                self.effective_delays[s] = Some(t - s);
                close.newly_skipped = Some(s);
            }
        }
        self.current = None;
        self.next_round = t + 1;
        Ok(close)
    }

    /// `τ̃` of the most recently opened round.
    pub fn tilde_tau(&self) -> usize {
        self.tilde_tau
    }

    /// Running `D̃_t`.
    pub fn tilde_d(&self) -> usize {
        self.tilde_d
    }

    pub fn skipped(&self) -> &BTreeSet<usize> {
        &self.skipped
    }

    pub fn counted_outstanding(&self) -> &BTreeSet<usize> {
        &self.counted
    }

    pub fn discarded_count(&self) -> usize {
        self.discarded.len()
    }

    /// Effective delay `d̃_s` (1-based round), once known.
    pub fn effective_delay(&self, s: usize) -> Option<usize> {
        self.effective_delays.get(s).copied().flatten()
    }

    pub fn effective_delay_sum(&self) -> usize {
        self.effective_delays.iter().flatten().sum()
    }

    /// Rounds where a second candidate also crossed the threshold.
    pub fn extra_candidates(&self) -> usize {
        self.extra_candidates
    }
}

/// Delay-adaptive Exp3 steered by [`SkipState`].
#[derive(Debug, Clone)]
pub struct SkipDada {
    policy: DadaPolicy,
    state: SkipState,
}

impl SkipDada {
    pub fn new(arms: usize, schedule: StepSchedule, estimator: EstimatorMode) -> Result<Self> {
        Ok(Self {
            policy: DadaPolicy::new(arms, schedule, estimator)?,
            state: SkipState::new(arms)?,
        })
    }

    pub fn act(&mut self, t: usize, u: f64) -> Result<Decision> {
        let (tilde_tau, _) = self.state.begin_round(t)?;
        self.policy.act_with_tau(t, tilde_tau, u)
    }

    pub fn receive(
        &mut self,
        t: usize,
        arrivals: &[FeedbackEvent],
    ) -> Result<(Vec<Estimate>, RoundClose)> {
        let close = self.state.end_round(t, arrivals)?;
        let estimates = self.policy.receive(t, &close.kept)?;
        if let Some(s) = close.newly_skipped {
            self.policy.discard(s)?;
        }
        Ok((estimates, close))
    }

    pub fn policy(&self) -> &DadaPolicy {
        &self.policy
    }

    pub fn state(&self) -> &SkipState {
        &self.state
    }
}
