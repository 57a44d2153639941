use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delay_bandits::dada::{DadaPolicy, EstimatorMode, StepSchedule};
use delay_bandits::env::{delay_accounting, DelaySchedule, FeedbackEvent, FeedbackQueue};
use delay_bandits::estimators::{iw_estimate, ix_estimate};
use delay_bandits::harness::episode::{generate_instance, run_episode};
use delay_bandits::harness::{Algo, RunConfig};
use delay_bandits::weights::{distribution, is_simplex, sample};

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..1.0, k).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

fn arms_probs_losses() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=8).prop_flat_map(|k| (simplex(k), prop::collection::vec(0.0f64..=1.0, k)))
}

proptest! {
    #[test]
    fn iw_is_unbiased((p, losses) in arms_probs_losses()) {
        let mut mean = vec![0.0; p.len()];
        for a in 0..p.len() {
            let e = iw_estimate(losses[a], a, &p).unwrap();
            mean[e.arm] += p[a] * e.value;
        }
        for i in 0..p.len() {
            prop_assert!((mean[i] - losses[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn ix_bias_and_cap((p, losses) in arms_probs_losses(), gamma in 1e-4f64..2.0) {
        for a in 0..p.len() {
            let e = ix_estimate(losses[a], a, &p, gamma).unwrap();
            prop_assert!(e.value <= 1.0 / gamma);
            let expected = p[a] * losses[a] / (p[a] + gamma);
            prop_assert!((p[a] * e.value - expected).abs() <= 1e-12);
            prop_assert!(p[a] * e.value <= losses[a]);
        }
    }

    #[test]
    fn distribution_shift_invariant(
        z in prop::collection::vec(0.0f64..1e4, 2..10),
        eta in 1e-6f64..5.0,
        c in 0.0f64..1e6,
    ) {
        let p = distribution(&z, eta).unwrap();
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let q = distribution(&shifted, eta).unwrap();
        prop_assert!(is_simplex(&p, 1e-12));
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn distribution_valid_at_extremes(
        z in prop::collection::vec(0.0f64..1e12, 2..10),
        eta in 1e-9f64..1.0,
    ) {
        let p = distribution(&z, eta).unwrap();
        prop_assert!(is_simplex(&p, 1e-12));
        prop_assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sample_is_inverse_cdf(p in (2usize..8).prop_flat_map(simplex), u in 0.0f64..1.0) {
        let arm = sample(&p, u).unwrap();
        let below: f64 = p[..arm].iter().sum();
        prop_assert!(below <= u);
        prop_assert!(below + p[arm] > u || arm == p.len() - 1);
    }

    #[test]
    fn accounting_identity(raw in prop::collection::vec(0usize..60, 1..80)) {
        let schedule = DelaySchedule::clipped(&raw);
        let d = schedule.as_slice();
        let acc = delay_accounting(&schedule);
        for (idx, &tau) in acc.tau.iter().enumerate() {
            let t = idx + 1;
            prop_assert_eq!(tau, (1..t).filter(|&s| s + d[s - 1] >= t).count());
        }
        prop_assert_eq!(acc.tau.iter().sum::<usize>(), acc.total);
        prop_assert_eq!(acc.d_star, d.iter().copied().max().unwrap());
        for (idx, &dt) in d.iter().enumerate() {
            prop_assert!(idx + 1 + dt <= d.len());
        }
    }

    #[test]
    fn delivery_is_complete(raw in prop::collection::vec(0usize..30, 1..60)) {
        let schedule = DelaySchedule::clipped(&raw);
        let mut queue = FeedbackQueue::new();
        let mut seen = vec![0; schedule.rounds() + 1];
        let mut total = 0;
        for t in 1..=schedule.rounds() {
            queue.push(FeedbackEvent { origin: t, arm: 0, loss: 0.5, delay: schedule.delay(t) }).unwrap();
            for e in queue.pop_due(t).unwrap() {
                prop_assert_eq!(e.origin + e.delay, t);
                seen[e.origin] += 1;
                total += 1;
            }
        }
        prop_assert_eq!(total, schedule.rounds());
        prop_assert!(seen[1..].iter().all(|&c| c == 1));
    }

    /// The DAda state fed by hand from a zero-delay run matches plain Exp3.
    #[test]
    fn zero_delay_matches_exp3(seed in any::<u64>(), k in 2usize..6, rounds in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let losses: Vec<f64> = (0..rounds * k).map(|_| rng.random()).collect();
        let mut policy = DadaPolicy::new(k, StepSchedule::Cor1, EstimatorMode::Iw).unwrap();
        let mut cum = vec![0.0f64; k];
        for t in 1..=rounds {
            let u: f64 = rng.random();
            let d = policy.act(t, u).unwrap();
            let eta = ((k as f64).ln() / (t * k) as f64).sqrt();
            prop_assert_eq!(d.eta, eta);
            let low = cum.iter().copied().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = cum.iter().map(|c| (-eta * (c - low)).exp()).collect();
            let total: f64 = w.iter().sum();
            for (pi, wi) in d.probs.iter().zip(&w) {
                prop_assert!((pi - wi / total).abs() <= 1e-12);
            }
            let loss = losses[(t - 1) * k + d.arm];
            cum[d.arm] += loss / d.probs[d.arm];
            policy.receive(t, &[FeedbackEvent { origin: t, arm: d.arm, loss, delay: 0 }]).unwrap();
        }
    }
}

#[test]
fn sample_frequencies_match_probabilities() {
    let p = [0.05, 0.4, 0.25, 0.3];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut counts = [0usize; 4];
    let draws = 1_000_000;
    for _ in 0..draws {
        counts[sample(&p, rng.random()).unwrap()] += 1;
    }
    for (c, pi) in counts.iter().zip(p) {
        assert!((*c as f64 / draws as f64 - pi).abs() < 0.005);
    }
}

#[test]
fn instance_unaffected_by_algorithm() {
    let base = RunConfig::new(
        Algo::Dada,
        "switching(7)".parse().unwrap(),
        "geometric(4)".parse().unwrap(),
        3,
        200,
    );
    let reference = generate_instance(&base, 5).unwrap();
    for algo in [Algo::DadaHpSkip, Algo::DedaKnown] {
        let cfg = RunConfig {
            algo,
            ..base.clone()
        };
        run_episode(&cfg, 5, false).unwrap();
        assert_eq!(generate_instance(&cfg, 5).unwrap(), reference);
    }
}
