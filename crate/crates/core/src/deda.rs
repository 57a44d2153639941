//! Delay- and data-adaptive Exp3.
//!
//! The step size is driven by the squared maximum delay and by `L^bck`, a
//! running sum of products of arrived estimates that can be maintained online
//! from per-round snapshots of `z` and `m`:
//!
//! ```text
//! 1/eta_t = (4 d*² + 6 d* + 2) / ln K + sqrt(L^bck_t / ln K),   gamma_t = eta_t
//! ```
//!
//! Since every estimate is nonzero at the played arm only, each arrival touches
//! a single coordinate of `z` and `m`, and the memory holds scalars.
//!
//! The `oracle_*` functions recompute the same quantities from a full run
//! record by direct double sums; they back the `verify` subcommand.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dada::{add_sparse, Decision};
use crate::env::FeedbackEvent;
use crate::error::{Error, Result};
use crate::estimators::{ix_from_prob, Estimate};
use crate::weights::{distribution, sample};

/// Polynomial delay term `4 d² + 6 d + 2`.
pub fn delay_penalty(d_star: usize) -> f64 {
    let d = d_star as f64;
    4.0 * d * d + 6.0 * d + 2.0
}

/// Step size (equal to the IX parameter) for the given maximum delay and `L^bck`.
pub fn deda_step_size(d_star: usize, l_bck: f64, arms: usize) -> f64 {
    let ln_k = (arms as f64).ln();
    1.0 / (delay_penalty(d_star) / ln_k + (l_bck / ln_k).sqrt())
}

/// How the policy learns the maximum delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKnowledge {
    /// `d_t` is revealed when round `t` is played.
    Known,
    /// A fixed upper bound `d^B` on every delay.
    PriorBound(usize),
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    arm: usize,
    prob: f64,
    gamma: f64,
    m_at_arm: f64,
    z_at_arm: f64,
}

/// Decision plus the step-size inputs used at this round.
#[derive(Debug, Clone, PartialEq)]
pub struct DedaDecision {
    pub decision: Decision,
    pub d_star: usize,
    pub l_bck: f64,
}

#[derive(Debug, Clone)]
pub struct DedaPolicy {
    arms: usize,
    knowledge: DelayKnowledge,
    z: Vec<f64>,
    m: Vec<f64>,
    l_bck: f64,
    d_star: usize,
    memory: HashMap<usize, Snapshot>,
    memory_high_water: usize,
    cum_tau: usize,
    eta: Option<f64>,
    next_round: usize,
}

impl DedaPolicy {
    pub fn new(arms: usize, knowledge: DelayKnowledge) -> Result<Self> {
        if arms < 2 {
            return Err(Error::InvalidParameter("K must be at least 2".into()));
        }
        let d_star = match knowledge {
            DelayKnowledge::Known => 0,
            DelayKnowledge::PriorBound(bound) => bound,
        };
        Ok(Self {
            arms,
            knowledge,
            z: vec![0.0; arms],
            m: vec![0.0; arms],
            l_bck: 0.0,
            d_star,
            memory: HashMap::new(),
            memory_high_water: 0,
            cum_tau: 0,
            eta: None,
            next_round: 1,
        })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn l_bck(&self) -> f64 {
        self.l_bck
    }

    pub fn d_star(&self) -> usize {
        self.d_star
    }

    pub fn knowledge(&self) -> DelayKnowledge {
        self.knowledge
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    /// Largest number of simultaneously stored rounds so far.
    pub fn memory_high_water(&self) -> usize {
        self.memory_high_water
    }

    pub fn act(&mut self, t: usize, delay: Option<usize>, u: f64) -> Result<DedaDecision> {
        if t != self.next_round {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                got: t,
            });
        }
        let d_star = match self.knowledge {
            DelayKnowledge::Known => self.d_star.max(delay.ok_or(Error::MissingDelay(t))?),
            DelayKnowledge::PriorBound(bound) => bound,
        };
        let eta = deda_step_size(d_star, self.l_bck, self.arms);
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

        let tau = self.memory.len();
        self.cum_tau += tau;
        self.d_star = d_star;
        self.eta = Some(eta);
        self.next_round = t + 1;
        self.memory.insert(
            t,
            Snapshot {
                arm,
                prob: probs[arm],
                gamma: eta,
                m_at_arm: self.m[arm],
                z_at_arm: self.z[arm],
            },
        );
        self.memory_high_water = self.memory_high_water.max(self.memory.len());
        Ok(DedaDecision {
            decision: Decision {
                round: t,
                probs,
                arm,
                eta,
                gamma: Some(eta),
                tau,
                cum_tau: self.cum_tau,
            },
            d_star,
            l_bck: self.l_bck,
        })
    }

    /// Applies the arrivals due at the end of round `t`: `z` and `m` are
    /// completed over the whole batch before any `L^bck` increment is formed.
    pub fn receive(&mut self, t: usize, arrivals: &[FeedbackEvent]) -> Result<Vec<Estimate>> {
        let mut batch: Vec<(FeedbackEvent, Snapshot)> = Vec::with_capacity(arrivals.len());
        for event in arrivals {
            if event.due() != t {
                return Err(Error::InvalidParameter(format!(
                    "feedback of round {} is due at {}, not {t}",
                    event.origin,
                    event.due()
                )));
            }
            if batch.iter().any(|(e, _)| e.origin == event.origin) {
                return Err(Error::DuplicateArrival(event.origin));
            }
            let snap = match self.memory.get(&event.origin) {
                Some(snap) => *snap,
                None if event.origin < self.next_round => {
                    return Err(Error::DuplicateArrival(event.origin))
                }
                None => return Err(Error::UnknownArrival(event.origin)),
            };
            if snap.arm != event.arm {
                return Err(Error::InvalidParameter(format!(
                    "feedback of round {} reports arm {}, played arm {}",
                    event.origin, event.arm, snap.arm
                )));
            }
            batch.push((*event, snap));
        }
        batch.sort_by_key(|(e, _)| e.origin);

        let estimates = batch
            .iter()
            .map(|(e, snap)| ix_from_prob(e.loss, snap.arm, snap.prob, snap.gamma))
            .collect::<Result<Vec<_>>>()?;
        let weighted: Vec<Estimate> = estimates
            .iter()
            .zip(&batch)
            .map(|(est, (_, snap))| Estimate {
                arm: est.arm,
                value: est.value * snap.prob,
            })
            .collect();
        add_sparse(&mut self.z, &estimates);
        add_sparse(&mut self.m, &weighted);

        for (est, (e, snap)) in estimates.iter().zip(&batch) {
            let i = snap.arm;
            self.l_bck += est.value * (self.m[i] - snap.m_at_arm)
                + est.value * snap.prob * (self.z[i] - snap.z_at_arm);
            self.memory.remove(&e.origin);
        }
        Ok(estimates)
    }
}

/// One round of a full DeDa run, as needed by the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub arm: usize,
    /// Probability of the played arm.
    pub prob: f64,
    pub gamma: f64,
    pub eta: f64,
    pub loss: f64,
    pub delay: usize,
    /// `d*_t` used at this round.
    pub d_star: usize,
    /// `L^bck_t` used at this round.
    pub l_bck: f64,
}

/// Full record of a DeDa run on `arms` arms; `records[t - 1]` is round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTrace {
    pub arms: usize,
    pub records: Vec<RoundRecord>,
}

impl OracleTrace {
    pub fn rounds(&self) -> usize {
        self.records.len()
    }

    fn validate(&self) -> Result<()> {
        let horizon = self.records.len();
        if horizon == 0 {
            return Err(Error::IncompleteTrace("no rounds recorded".into()));
        }
        for (idx, r) in self.records.iter().enumerate() {
            let t = idx + 1;
            if t + r.delay > horizon {
                return Err(Error::IncompleteTrace(format!(
                    "feedback of round {t} arrives after the last recorded round"
                )));
            }
            if r.arm >= self.arms
                || r.gamma.is_nan()
                || r.gamma <= 0.0
                || r.prob.is_nan()
                || r.prob < 0.0
            {
                return Err(Error::IncompleteTrace(format!(
                    "round {t} record is malformed"
                )));
            }
        }
        Ok(())
    }

    fn record(&self, t: usize) -> Result<&RoundRecord> {
        t.checked_sub(1)
            .and_then(|i| self.records.get(i))
            .ok_or_else(|| Error::IncompleteTrace(format!("round {t} not recorded")))
    }

    /// IX estimate value of round `t` at its played arm.
    fn estimate(&self, t: usize) -> f64 {
        let r = &self.records[t - 1];
        r.loss / (r.prob + r.gamma)
    }
}

/// `Σ_i ℓ^bck_{s,i}` by its defining double sum over `j`.
pub fn oracle_lbck_direct(trace: &OracleTrace, s: usize) -> Result<f64> {
    trace.validate()?;
    let rs = *trace.record(s)?;
    let (lo, hi) = (s, s + rs.delay);
    let ls = trace.estimate(s);
    let mut total = 0.0;
    for (idx, rj) in trace.records.iter().enumerate() {
        let j = idx + 1;
        let arrival = j + rj.delay;
        if rj.arm == rs.arm && lo <= arrival && arrival <= hi {
            total += ls * trace.estimate(j) * (rj.prob + rs.prob);
        }
    }
    Ok(total)
}

/// `Σ_i ℓ^fwd_{t,i}` with `Δ̂_t` rebuilt from the delays.
pub fn oracle_lfwd(trace: &OracleTrace, t: usize) -> Result<f64> {
    trace.validate()?;
    let rt = *trace.record(t)?;
    let lt = trace.estimate(t);
    let missing: f64 = (1..t)
        .filter(|&s| {
            let rs = &trace.records[s - 1];
            s + rs.delay >= t && rs.arm == rt.arm
        })
        .map(|s| trace.estimate(s))
        .sum();
    Ok(lt * rt.prob * missing + lt * lt * rt.prob)
}

/// Worst-case margins of the step-size bookkeeping over every round of a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepControlReport {
    pub rounds: usize,
    /// Largest relative gap between the online `L^bck_t` and the direct sum.
    pub max_recurrence_rel_err: f64,
    /// Smallest scaled slack of the per-arm `L^bck` domination inequality.
    pub min_slack_bck: f64,
    /// Smallest scaled slack of the `ℓ^fwd` inequality.
    pub min_slack_fwd: f64,
    /// Smallest scaled slack of `eta_t <= sqrt(ln K / Σ ℓ^fwd_{1:t})`.
    pub min_slack_step: f64,
}

impl StepControlReport {
    pub fn passes(&self, rel_tol: f64, slack_tol: f64) -> bool {
        self.max_recurrence_rel_err <= rel_tol
            && self.min_slack_bck >= -slack_tol
            && self.min_slack_fwd >= -slack_tol
            && self.min_slack_step >= -slack_tol
    }
}

fn scaled_slack(rhs: f64, lhs: f64) -> f64 {
    (rhs - lhs) / rhs.abs().max(lhs.abs()).max(1.0)
}

/// Checks, at every round `t`:
/// - online `L^bck_t` equals `Σ_{s: s+d_s<t} ℓ^bck_s` computed directly;
/// - `Σ_{s: s+d_s<t} ℓ^bck_{s,i} <= 2 Σ_{j<=t} Σ_{s ∈ O_j ∪ {j} ∪ D_j} ℓ̂_{s,i} ℓ̂_{j,i} p_{j,i}` per arm;
/// - `Σ_i ℓ^fwd_{1:t,i} <= Σ_{s: s+d_s<t} ℓ^bck_s + (4 d*_t² + 6 d*_t + 2) / gamma_t`;
/// - `eta_t <= sqrt(ln K / Σ_i ℓ^fwd_{1:t,i})`.
///
/// Slacks are divided by `max(1, |lhs|, |rhs|)`.
pub fn check_step_control(trace: &OracleTrace) -> Result<StepControlReport> {
    trace.validate()?;
    let horizon = trace.rounds();
    let arms = trace.arms;
    let ln_k = (arms as f64).ln();
    let est: Vec<f64> = (1..=horizon).map(|t| trace.estimate(t)).collect();
    let rec = |t: usize| &trace.records[t - 1];

    // ℓ^bck_s lands in the step size from round s + d_s + 1 on
    let mut bck_by_release = vec![vec![0.0; arms]; horizon + 2];
    for s in 1..=horizon {
        let value = oracle_lbck_direct(trace, s)?;
        bck_by_release[s + rec(s).delay + 1][rec(s).arm] += value;
    }

    // per-j contribution to the right side of the per-arm domination
    let mut dom = vec![0.0; horizon + 1];
    for j in 1..=horizon {
        let rj = rec(j);
        let window: f64 = (1..=horizon)
            .filter(|&s| {
                let rs = rec(s);
                let in_o = s < j && s + rs.delay >= j;
                let in_d = j < s && s <= j + rj.delay;
                rs.arm == rj.arm && (in_o || s == j || in_d)
            })
            .map(|s| est[s - 1])
            .sum();
        dom[j] = 2.0 * window * est[j - 1] * rj.prob;
    }

    let mut report = StepControlReport {
        rounds: horizon,
        max_recurrence_rel_err: 0.0,
        min_slack_bck: f64::INFINITY,
        min_slack_fwd: f64::INFINITY,
        min_slack_step: f64::INFINITY,
    };
    let mut bck_per_arm = vec![0.0; arms];
    let mut dom_per_arm = vec![0.0; arms];
    let mut fwd_total = 0.0;
    for t in 1..=horizon {
        let rt = rec(t);
        for (acc, v) in bck_per_arm.iter_mut().zip(&bck_by_release[t]) {
            *acc += v;
        }
        dom_per_arm[rt.arm] += dom[t];
        fwd_total += oracle_lfwd(trace, t)?;
        let bck_total: f64 = bck_per_arm.iter().sum();

        let scale = bck_total.abs().max(rt.l_bck.abs());
        let rel = if scale > 0.0 {
            (bck_total - rt.l_bck).abs() / scale
        } else {
            0.0
        };
        report.max_recurrence_rel_err = report.max_recurrence_rel_err.max(rel);

        for i in 0..arms {
            report.min_slack_bck = report
                .min_slack_bck
                .min(scaled_slack(dom_per_arm[i], bck_per_arm[i]));
        }
        let fwd_rhs = bck_total + delay_penalty(rt.d_star) / rt.gamma;
        report.min_slack_fwd = report.min_slack_fwd.min(scaled_slack(fwd_rhs, fwd_total));
        if fwd_total > 0.0 {
            let cap = (ln_k / fwd_total).sqrt();
            report.min_slack_step = report.min_slack_step.min((cap - rt.eta) / cap.max(rt.eta));
        }
    }
    if !report.min_slack_step.is_finite() {
        report.min_slack_step = 0.0;
    }
    Ok(report)
}
