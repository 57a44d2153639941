//! One policy against one instance: the act → deliver → receive loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dada::{DadaPolicy, Decision};
use crate::deda::{DedaPolicy, OracleTrace, RoundRecord};
use crate::env::{
    delay_accounting, gen_delays, gen_losses, DelaySchedule, FeedbackEvent, FeedbackQueue,
    LossMatrix,
};
use crate::error::{Error, Result};
use crate::harness::bounds::{
    best_skip_candidate, cor1_bound, cor2_bound, skip_exp_bound, skip_hp_bound, thm4_bestarm_bound,
    thm4_worst_bound,
};
use crate::harness::config::{Algo, RunConfig};
use crate::skipper::SkipDada;

const ENV_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

/// Losses and delays of one run, generated before any policy acts.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub losses: LossMatrix,
    pub delays: DelaySchedule,
}

impl Instance {
    pub fn new(losses: LossMatrix, delays: DelaySchedule) -> Result<Self> {
        if losses.rounds() != delays.rounds() {
            return Err(Error::InvalidParameter(format!(
                "{} loss rounds but {} delays",
                losses.rounds(),
                delays.rounds()
            )));
        }
        Ok(Self { losses, delays })
    }
}

/// Environment stream for `seed` (or the config's fixed instance seed).
pub fn env_rng(config: &RunConfig, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.instance_seed.unwrap_or(seed));
    rng.set_stream(ENV_STREAM);
    rng
}

/// Learner stream for `seed`, disjoint from the environment stream.
pub fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POLICY_STREAM);
    rng
}

pub fn generate_instance(config: &RunConfig, seed: u64) -> Result<Instance> {
    let mut rng = env_rng(config, seed);
    let losses = gen_losses(&config.adversary, config.rounds, config.arms, &mut rng)?;
    let delays = gen_delays(&config.delays, config.rounds, &mut rng)?;
    Instance::new(losses, delays)
}

/// Per-round record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub arm: usize,
    pub loss: f64,
    pub delay: usize,
    pub probs: Vec<f64>,
    pub eta: f64,
    pub gamma: Option<f64>,
    /// `τ_t` (or `τ̃_t` for skipping variants) that entered the step size.
    pub tau: usize,
    pub cum_tau: usize,
    /// Origin rounds delivered at the end of this round.
    pub arrivals: Vec<usize>,
    pub d_star: Option<usize>,
    pub l_bck: Option<f64>,
    pub skipped: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rounds: Vec<RoundTrace>,
}

impl Trace {
    /// `Σ_{t<=upto} ℓ_{t,A_t} - min_i L_{upto,i}`.
    pub fn pseudo_regret_at(&self, losses: &LossMatrix, upto: usize) -> f64 {
        let learner: f64 = self.rounds.iter().take(upto).map(|r| r.loss).sum();
        let best = losses
            .arm_totals_upto(upto)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        learner - best
    }

    /// Oracle view of a DeDa run.
    pub fn oracle_trace(&self, arms: usize) -> Result<OracleTrace> {
        let records = self
            .rounds
            .iter()
            .map(|r| {
                Ok(RoundRecord {
                    arm: r.arm,
                    prob: r.probs[r.arm],
                    gamma: r.gamma.ok_or_else(|| {
                        Error::IncompleteTrace(format!("round {} has no gamma", r.round))
                    })?,
                    eta: r.eta,
                    loss: r.loss,
                    delay: r.delay,
                    d_star: r.d_star.ok_or_else(|| {
                        Error::IncompleteTrace(format!("round {} has no d*", r.round))
                    })?,
                    l_bck: r.l_bck.ok_or_else(|| {
                        Error::IncompleteTrace(format!("round {} has no L_bck", r.round))
                    })?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OracleTrace { arms, records })
    }
}

/// Theoretical bounds that apply to a run; cells for other algorithms stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub cor1: Option<f64>,
    pub cor2: Option<f64>,
    pub skip: Option<f64>,
    pub thm4_worst: Option<f64>,
    pub thm4_bestarm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub seed: u64,
    pub algo: Algo,
    pub arms: usize,
    pub rounds: usize,
    /// `Σ_t ℓ_{t,A_t}`
    pub learner_loss: f64,
    /// `L_{T,i}`
    pub arm_losses: Vec<f64>,
    pub best_arm: usize,
    pub best_loss: f64,
    pub regret: f64,
    /// `D`
    pub total_delay: usize,
    /// `max_t d_t` of the instance.
    pub d_star: usize,
    /// `d*_T` the DeDa policy used (`d^B` in prior-bound mode).
    pub policy_d_star: Option<usize>,
    pub tilde_d: Option<usize>,
    pub skips: Option<usize>,
    pub discarded: Option<usize>,
    pub effective_delay_sum: Option<usize>,
    /// Rounds with more than one round over the skip threshold.
    pub extra_skip_candidates: Option<usize>,
    pub memory_high_water: Option<usize>,
    pub bounds: BoundValues,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub report: RegretReport,
    pub trace: Option<Trace>,
}

enum Learner {
    Dada(DadaPolicy),
    Skip(SkipDada),
    Deda(DedaPolicy),
}

struct Step {
    decision: Decision,
    d_star: Option<usize>,
    l_bck: Option<f64>,
}

impl Learner {
    fn new(algo: Algo, arms: usize) -> Result<Self> {
        if let Some(knowledge) = algo.delay_knowledge() {
            return Ok(Self::Deda(DedaPolicy::new(arms, knowledge)?));
        }
        let (schedule, estimator) = algo
            .dada_parts()
            .ok_or_else(|| Error::UnknownSpec(algo.to_string()))?;
        Ok(if algo.is_skipping() {
            Self::Skip(SkipDada::new(arms, schedule, estimator)?)
        } else {
            Self::Dada(DadaPolicy::new(arms, schedule, estimator)?)
        })
    }

    fn act(&mut self, t: usize, delay: usize, u: f64) -> Result<Step> {
        Ok(match self {
            Self::Dada(p) => Step {
                decision: p.act(t, u)?,
                d_star: None,
                l_bck: None,
            },
            Self::Skip(p) => Step {
                decision: p.act(t, u)?,
                d_star: None,
                l_bck: None,
            },
            Self::Deda(p) => {
                let d = p.act(t, Some(delay), u)?;
                Step {
                    decision: d.decision,
                    d_star: Some(d.d_star),
                    l_bck: Some(d.l_bck),
                }
            }
        })
    }

    /// Returns the round newly skipped at the end of `t`, if any.
    fn receive(&mut self, t: usize, arrivals: &[FeedbackEvent]) -> Result<Option<usize>> {
        match self {
            Self::Dada(p) => p.receive(t, arrivals).map(|_| None),
            Self::Skip(p) => p.receive(t, arrivals).map(|(_, close)| close.newly_skipped),
            Self::Deda(p) => p.receive(t, arrivals).map(|_| None),
        }
    }
}

/// Runs `config.algo` on the instance generated for `seed`.
pub fn run_episode(config: &RunConfig, seed: u64, record_trace: bool) -> Result<Episode> {
    config.validate()?;
    let instance = generate_instance(config, seed)?;
    run_on_instance(config, seed, &instance, record_trace)
}

/// Runs `config.algo` on a given instance; the learner stream comes from `seed`.
pub fn run_on_instance(
    config: &RunConfig,
    seed: u64,
    instance: &Instance,
    record_trace: bool,
) -> Result<Episode> {
    let arms = instance.losses.arms();
    let rounds = instance.losses.rounds();
    let mut learner = Learner::new(config.algo, arms)?;
    let mut rng = policy_rng(seed);
    let mut queue = FeedbackQueue::new();
    let mut trace = record_trace.then(|| Trace {
        rounds: Vec::with_capacity(rounds),
    });
    let mut learner_loss = 0.0;

    for t in 1..=rounds {
        let delay = instance.delays.delay(t);
        let u: f64 = rng.random();
        let step = learner.act(t, delay, u)?;
        let arm = step.decision.arm;
        let loss = instance.losses.loss(t, arm);
        learner_loss += loss;
        queue.push(FeedbackEvent {
            origin: t,
            arm,
            loss,
            delay,
        })?;
        let arrivals = queue.pop_due(t)?;
        let skipped = learner.receive(t, &arrivals)?;
        if let Some(trace) = trace.as_mut() {
            trace.rounds.push(RoundTrace {
                round: t,
                arm,
                loss,
                delay,
                probs: step.decision.probs,
                eta: step.decision.eta,
                gamma: step.decision.gamma,
                tau: step.decision.tau,
                cum_tau: step.decision.cum_tau,
                arrivals: arrivals.iter().map(|e| e.origin).collect(),
                d_star: step.d_star,
                l_bck: step.l_bck,
                skipped,
            });
        }
    }
    debug_assert!(queue.is_empty());

    let arm_losses = instance.losses.arm_totals();
    let (best_arm, best_loss) =
        arm_losses
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, l)| if l < acc.1 { (i, l) } else { acc },
            );
    let accounting = delay_accounting(&instance.delays);

    let mut report = RegretReport {
        seed,
        algo: config.algo,
        arms,
        rounds,
        learner_loss,
        arm_losses,
        best_arm,
        best_loss,
        regret: learner_loss - best_loss,
        total_delay: accounting.total,
        d_star: accounting.d_star,
        policy_d_star: None,
        tilde_d: None,
        skips: None,
        discarded: None,
        effective_delay_sum: None,
        extra_skip_candidates: None,
        memory_high_water: None,
        bounds: BoundValues::default(),
    };
    let total_delay = accounting.total as f64;
    match &learner {
        Learner::Dada(_) => {
            if config.algo == Algo::Dada {
                report.bounds.cor1 = Some(cor1_bound(arms, rounds, total_delay));
            } else {
                report.bounds.cor2 = Some(cor2_bound(
                    arms,
                    rounds,
                    total_delay,
                    accounting.d_star,
                    config.delta,
                ));
            }
        }
        Learner::Skip(p) => {
            let state = p.state();
            report.tilde_d = Some(state.tilde_d());
            report.skips = Some(state.skipped().len());
            report.discarded = Some(state.discarded_count());
            report.effective_delay_sum = Some(state.effective_delay_sum());
            report.extra_skip_candidates = Some(state.extra_candidates());
            let candidate = best_skip_candidate(instance.delays.as_slice(), arms);
            report.bounds.skip = Some(if config.algo == Algo::DadaSkip {
                skip_exp_bound(arms, rounds, candidate)
            } else {
                skip_hp_bound(arms, rounds, candidate, config.delta)
            });
        }
        Learner::Deda(p) => {
            let d_star = p.d_star();
            report.policy_d_star = Some(d_star);
            report.memory_high_water = Some(p.memory_high_water());
            report.bounds.thm4_worst = Some(thm4_worst_bound(arms, rounds, total_delay, d_star));
            report.bounds.thm4_bestarm = Some(thm4_bestarm_bound(
                arms,
                d_star,
                best_loss,
                report.arm_losses.iter().sum(),
            ));
        }
    }
    Ok(Episode { report, trace })
}
