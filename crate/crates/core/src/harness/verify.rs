//! Randomized self-checks run by the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::deda::{check_step_control, oracle_lbck_direct, DedaPolicy, DelayKnowledge};
use crate::env::{
    delay_accounting, AdversarySpec, DelaySchedule, DelaySpec, FeedbackEvent, FeedbackQueue,
    LossMatrix,
};
use crate::error::Result;
use crate::estimators::{iw_estimate, ix_estimate};
use crate::harness::config::{Algo, RunConfig};
use crate::harness::episode::{
    generate_instance, policy_rng, run_on_instance, Instance, RoundTrace, Trace,
};
use crate::weights::is_simplex;

pub const SIMPLEX_TOL: f64 = 1e-12;
pub const ORACLE_REL_TOL: f64 = 1e-9;
pub const ORACLE_SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn from_result(name: &str, result: std::result::Result<String, String>) -> Self {
        let (passed, detail) = match result {
            Ok(detail) => (true, detail),
            Err(detail) => (false, detail),
        };
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub estimator_triples: usize,
    pub schedules: usize,
    pub deda_instances: usize,
    pub policy_instances: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            estimator_triples: 1000,
            schedules: 200,
            deda_instances: 100,
            policy_instances: 60,
        }
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// IW unbiasedness, IX downward bias and IX boundedness by exact enumeration.
pub fn check_estimators(
    rng: &mut ChaCha8Rng,
    triples: usize,
) -> std::result::Result<String, String> {
    let mut worst_iw = 0.0f64;
    let mut worst_ix = 0.0f64;
    for n in 0..triples {
        let k = rng.random_range(2..=8);
        let p = random_simplex(rng, k);
        let losses: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let gamma = rng.random_range(1e-3..1.0);
        let mut iw_mean = vec![0.0; k];
        let mut ix_mean = vec![0.0; k];
        for a in 0..k {
            let iw = iw_estimate(losses[a], a, &p).map_err(|e| e.to_string())?;
            let ix = ix_estimate(losses[a], a, &p, gamma).map_err(|e| e.to_string())?;
            if ix.value > 1.0 / gamma {
                return Err(format!("triple {n}: IX entry {} exceeds 1/gamma", ix.value));
            }
            iw_mean[iw.arm] += p[a] * iw.value;
            ix_mean[ix.arm] += p[a] * ix.value;
        }
        for i in 0..k {
            worst_iw = worst_iw.max((iw_mean[i] - losses[i]).abs());
            let expected = p[i] * losses[i] / (p[i] + gamma);
            worst_ix = worst_ix.max((ix_mean[i] - expected).abs());
            if ix_mean[i] > losses[i] + 1e-12 {
                return Err(format!(
                    "triple {n}: IX mean above the true loss at arm {i}"
                ));
            }
        }
    }
    if worst_iw > 1e-12 || worst_ix > 1e-12 {
        return Err(format!(
            "max IW error {worst_iw:e}, max IX error {worst_ix:e}"
        ));
    }
    Ok(format!(
        "{triples} triples, max IW error {worst_iw:e}, max IX error {worst_ix:e}"
    ))
}

fn random_schedule(rng: &mut ChaCha8Rng, rounds: usize, dmax: usize) -> DelaySchedule {
    let raw: Vec<usize> = (0..rounds).map(|_| rng.random_range(0..=dmax)).collect();
    DelaySchedule::clipped(&raw)
}

/// Accounting identity against a brute-force τ, and queue delivery against `O_t`.
pub fn check_env(rng: &mut ChaCha8Rng, schedules: usize) -> std::result::Result<String, String> {
    for n in 0..schedules {
        let rounds = rng.random_range(1..=50);
        let dmax = rng.random_range(0..=15);
        let schedule = random_schedule(rng, rounds, dmax);
        let d = schedule.as_slice();
        let acc = delay_accounting(&schedule);
        for t in 1..=rounds {
            let brute = (1..t).filter(|&s| s + d[s - 1] >= t).count();
            if acc.tau[t - 1] != brute {
                return Err(format!(
                    "schedule {n}: tau_{t} = {} but brute force gives {brute}",
                    acc.tau[t - 1]
                ));
            }
        }
        if acc.tau.iter().sum::<usize>() != acc.total || acc.total != d.iter().sum::<usize>() {
            return Err(format!("schedule {n}: sum of tau differs from D"));
        }

        let mut queue = FeedbackQueue::new();
        let mut delivered = vec![0usize; rounds + 1];
        for t in 1..=rounds {
            let mut pending = queue.pending_origins();
            pending.sort_unstable();
            let expected: Vec<usize> = (1..t).filter(|&s| s + d[s - 1] >= t).collect();
            if pending != expected {
                return Err(format!("schedule {n}: pending set at round {t} is not O_t"));
            }
            queue
                .push(FeedbackEvent {
                    origin: t,
                    arm: 0,
                    loss: 0.0,
                    delay: d[t - 1],
                })
                .map_err(|e| e.to_string())?;
            let due = queue.pop_due(t).map_err(|e| e.to_string())?;
            if due.windows(2).any(|w| w[0].origin >= w[1].origin) {
                return Err(format!(
                    "schedule {n}: round {t} arrivals not in origin order"
                ));
            }
            for e in due {
                if e.due() != t {
                    return Err(format!("schedule {n}: round {} delivered at {t}", e.origin));
                }
                delivered[e.origin] += 1;
            }
        }
        if !queue.is_empty() || delivered[1..].iter().any(|&c| c != 1) {
            return Err(format!(
                "schedule {n}: some feedback not delivered exactly once"
            ));
        }
    }
    Ok(format!("{schedules} schedules"))
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let rounds = rng.random_range(1..=200);
    let arms = rng.random_range(2..=5);
    let values: Vec<f64> = (0..rounds * arms).map(|_| rng.random()).collect();
    let losses = LossMatrix::from_rows(rounds, arms, values).expect("losses in range");
    let delays = random_schedule(rng, rounds, 20);
    Instance { losses, delays }
}

/// z and m against the event log, memory size, and the oracle comparisons
/// for one DeDa run.
pub fn check_deda_run(
    instance: &Instance,
    knowledge: DelayKnowledge,
    seed: u64,
) -> std::result::Result<String, String> {
    let err = |e: crate::error::Error| e.to_string();
    let arms = instance.losses.arms();
    let rounds = instance.losses.rounds();
    let d = instance.delays.as_slice();
    let d_max = instance.delays.max();
    let mut policy = DedaPolicy::new(arms, knowledge).map_err(err)?;
    let mut rng = policy_rng(seed);
    let mut queue = FeedbackQueue::new();
    // (arm, estimate, prob) per round, for the interpretation identities
    let mut log: Vec<(usize, f64, f64)> = Vec::with_capacity(rounds);
    let mut trace = Trace::default();

    for t in 1..=rounds {
        let mut z = vec![0.0; arms];
        let mut m = vec![0.0; arms];
        for (j, &(arm, est, prob)) in log.iter().enumerate() {
            if j + 1 + d[j] < t {
                z[arm] += est;
                m[arm] += est * prob;
            }
        }
        for i in 0..arms {
            let tol = 1e-12 * z[i].abs().max(1.0);
            if (policy.z()[i] - z[i]).abs() > tol || (policy.m()[i] - m[i]).abs() > tol {
                return Err(format!(
                    "round {t}: z or m differs from the event log at arm {i}"
                ));
            }
        }
        let u: f64 = rng.random();
        let step = policy.act(t, Some(d[t - 1]), u).map_err(err)?;
        if policy.memory_len() > d_max + 1 {
            return Err(format!(
                "round {t}: {} rounds in memory, d* = {d_max}",
                policy.memory_len()
            ));
        }
        let decision = step.decision;
        let arm = decision.arm;
        let loss = instance.losses.loss(t, arm);
        let prob = decision.probs[arm];
        log.push((arm, loss / (prob + decision.eta), prob));
        queue
            .push(FeedbackEvent {
                origin: t,
                arm,
                loss,
                delay: d[t - 1],
            })
            .map_err(err)?;
        let arrivals = queue.pop_due(t).map_err(err)?;
        policy.receive(t, &arrivals).map_err(err)?;
        trace.rounds.push(RoundTrace {
            round: t,
            arm,
            loss,
            delay: d[t - 1],
            probs: decision.probs,
            eta: decision.eta,
            gamma: decision.gamma,
            tau: decision.tau,
            cum_tau: decision.cum_tau,
            arrivals: arrivals.iter().map(|e| e.origin).collect(),
            d_star: Some(step.d_star),
            l_bck: Some(step.l_bck),
            skipped: None,
        });
    }
    let oracle = trace.oracle_trace(arms).map_err(err)?;
    let report = check_step_control(&oracle).map_err(err)?;
    if !report.passes(ORACLE_REL_TOL, ORACLE_SLACK_TOL) {
        return Err(format!("step-size control violated: {report:?}"));
    }
    // final L^bck against the direct sum over all rounds
    let direct: f64 = (1..=rounds)
        .map(|s| oracle_lbck_direct(&oracle, s))
        .sum::<Result<f64>>()
        .map_err(err)?;
    let online = policy.l_bck();
    if (direct - online).abs() > ORACLE_REL_TOL * direct.abs().max(online.abs()) {
        return Err(format!("final L_bck {online} vs direct {direct}"));
    }
    Ok(format!(
        "T={rounds} K={arms} max rel err {:e}, min slacks {:e} / {:e}",
        report.max_recurrence_rel_err, report.min_slack_bck, report.min_slack_fwd
    ))
}

/// DeDa oracles on `instances` random small instances, alternating delay modes.
pub fn check_deda(rng: &mut ChaCha8Rng, instances: usize) -> std::result::Result<String, String> {
    for n in 0..instances {
        let instance = random_instance(rng);
        let knowledge = if n % 2 == 0 {
            DelayKnowledge::Known
        } else {
            DelayKnowledge::PriorBound(instance.delays.max() + rng.random_range(0..=3))
        };
        let seed = rng.random();
        check_deda_run(&instance, knowledge, seed).map_err(|e| format!("instance {n}: {e}"))?;
    }
    Ok(format!("{instances} instances"))
}

/// Checks shared by every algorithm: simplex validity, positive
/// non-increasing steps, and the `τ` bookkeeping.
pub fn check_trace(
    algo: Algo,
    instance: &Instance,
    trace: &Trace,
) -> std::result::Result<(), String> {
    let acc = delay_accounting(&instance.delays);
    let mut previous = f64::INFINITY;
    let mut cum = 0usize;
    for r in &trace.rounds {
        if !is_simplex(&r.probs, SIMPLEX_TOL) {
            return Err(format!(
                "round {}: p_t is not a valid simplex vector",
                r.round
            ));
        }
        if r.eta.is_nan() || r.eta <= 0.0 || r.eta > previous {
            return Err(format!(
                "round {}: step {} after {previous}",
                r.round, r.eta
            ));
        }
        previous = r.eta;
        cum += r.tau;
        if r.cum_tau != cum {
            return Err(format!(
                "round {}: cum_tau {} but running sum {cum}",
                r.round, r.cum_tau
            ));
        }
        if !algo.is_skipping() && r.tau != acc.tau[r.round - 1] {
            return Err(format!(
                "round {}: tau {} but |O_t| = {}",
                r.round,
                r.tau,
                acc.tau[r.round - 1]
            ));
        }
        if algo.is_skipping() && r.tau > acc.tau[r.round - 1] {
            return Err(format!("round {}: counted tau exceeds |O_t|", r.round));
        }
    }
    if !algo.is_skipping() && cum != acc.total {
        return Err(format!("sum of tau {cum} but D = {}", acc.total));
    }
    Ok(())
}

/// Full runs of each algorithm on random instances: trace invariants, and for
/// skipping runs `D̃ <= D`, `|S|` = discarded arrivals, `D̃ = Σ d̃`, one candidate at a time.
pub fn check_policies(
    rng: &mut ChaCha8Rng,
    instances: usize,
) -> std::result::Result<String, String> {
    let algos = [
        Algo::Dada,
        Algo::DadaHp,
        Algo::DadaSkip,
        Algo::DadaHpSkip,
        Algo::DedaKnown,
        Algo::DedaBound(20),
    ];
    for n in 0..instances {
        let instance = random_instance(rng);
        let seed: u64 = rng.random();
        for algo in algos {
            let config = RunConfig::new(
                algo,
                AdversarySpec::Constant { c: 0.0 },
                DelaySpec::OneHuge,
                instance.losses.arms(),
                instance.losses.rounds(),
            );
            check_config_run(&config, seed, &instance)
                .map_err(|e| format!("instance {n}, {algo}: {e}"))?;
        }
    }
    Ok(format!(
        "{instances} instances x {} algorithms",
        algos.len()
    ))
}

fn check_config_run(
    config: &RunConfig,
    seed: u64,
    instance: &Instance,
) -> std::result::Result<(), String> {
    let ep = run_on_instance(config, seed, instance, true).map_err(|e| e.to_string())?;
    let trace = ep.trace.as_ref().expect("trace requested");
    check_trace(config.algo, instance, trace)?;
    let r = &ep.report;
    let recomputed = trace.pseudo_regret_at(&instance.losses, instance.losses.rounds());
    if recomputed != r.regret {
        return Err(format!("regret {} but trace gives {recomputed}", r.regret));
    }
    if config.algo.is_skipping() {
        let (tilde_d, skips, discarded, eff) = (
            r.tilde_d.unwrap_or(usize::MAX),
            r.skips.unwrap_or(usize::MAX),
            r.discarded.unwrap_or(usize::MAX),
            r.effective_delay_sum.unwrap_or(usize::MAX),
        );
        let cum = trace.rounds.last().map_or(0, |l| l.cum_tau);
        if tilde_d > r.total_delay || skips != discarded || tilde_d != eff || cum != tilde_d {
            return Err(format!(
                "skip bookkeeping: D~={tilde_d} D={} |S|={skips} discarded={discarded} sum d~={eff}",
                r.total_delay
            ));
        }
        if r.extra_skip_candidates != Some(0) {
            return Err(format!(
                "{:?} rounds with several skip candidates",
                r.extra_skip_candidates
            ));
        }
    }
    if config.algo.is_deda() {
        let high = r.memory_high_water.unwrap_or(usize::MAX);
        if high > r.d_star + 1 {
            return Err(format!("memory held {high} rounds, d* = {}", r.d_star));
        }
    }
    Ok(())
}

/// The randomized suite.
pub fn run_suite(options: &SuiteOptions) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    vec![
        CheckOutcome::from_result(
            "estimators",
            check_estimators(&mut rng, options.estimator_triples),
        ),
        CheckOutcome::from_result(
            "env accounting and delivery",
            check_env(&mut rng, options.schedules),
        ),
        CheckOutcome::from_result("deda oracles", check_deda(&mut rng, options.deda_instances)),
        CheckOutcome::from_result(
            "policy invariants",
            check_policies(&mut rng, options.policy_instances),
        ),
    ]
}

/// Invariants (and DeDa oracles) on the instances of a user config.
pub fn verify_config(config: &RunConfig) -> Result<Vec<CheckOutcome>> {
    config.validate()?;
    let mut out = Vec::new();
    for seed in config.seeds.to_vec() {
        let instance = generate_instance(config, seed)?;
        out.push(CheckOutcome::from_result(
            &format!("{} seed {seed}", config.algo),
            check_config_run(config, seed, &instance).map(|()| "invariants hold".to_string()),
        ));
        if let Some(knowledge) = config.algo.delay_knowledge() {
            out.push(CheckOutcome::from_result(
                &format!("deda oracles seed {seed}"),
                check_deda_run(&instance, knowledge, seed),
            ));
        }
    }
    Ok(out)
}
