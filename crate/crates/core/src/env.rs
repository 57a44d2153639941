//! Oblivious loss/delay instances and the feedback delivery queue.
//!
//! Rounds are numbered `1..=T` and arms `0..K`. A round-`s` event with delay
//! `d_s` is delivered at the end of round `s + d_s`, so it first influences the
//! decision of round `s + d_s + 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T x K` grid of losses in `[0, 1]`, fixed before the run starts.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    rounds: usize,
    arms: usize,
    values: Vec<f64>,
}

impl LossMatrix {
    /// Builds a matrix from row-major values (round 1 first).
    pub fn from_rows(rounds: usize, arms: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rounds * arms {
            return Err(Error::InvalidParameter(format!(
                "expected {} loss values, got {}",
                rounds * arms,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "loss {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            rounds,
            arms,
            values,
        })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    /// Loss of `arm` at round `t` (1-based round).
    #[inline]
    pub fn loss(&self, t: usize, arm: usize) -> f64 {
        self.values[(t - 1) * self.arms + arm]
    }

    /// Loss vector of round `t` (1-based round).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[(t - 1) * self.arms..t * self.arms]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-arm cumulative losses over rounds `1..=upto`.
    pub fn arm_totals_upto(&self, upto: usize) -> Vec<f64> {
        let mut totals = vec![0.0; self.arms];
        for t in 1..=upto.min(self.rounds) {
            for (acc, v) in totals.iter_mut().zip(self.row(t)) {
                *acc += v;
            }
        }
        totals
    }

    /// Per-arm cumulative losses `L_{T,i}`.
    pub fn arm_totals(&self) -> Vec<f64> {
        self.arm_totals_upto(self.rounds)
    }
}

/// Per-round delays with `t + d_t <= T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySchedule {
    delays: Vec<usize>,
}

impl DelaySchedule {
    /// Wraps already-clipped delays; rejects any delay that runs past the horizon.
    pub fn new(delays: Vec<usize>) -> Result<Self> {
        let horizon = delays.len();
        for (idx, &d) in delays.iter().enumerate() {
            let t = idx + 1;
            if t + d > horizon {
                return Err(Error::InvalidParameter(format!(
                    "delay {d} at round {t} exceeds horizon {horizon}"
                )));
            }
        }
        Ok(Self { delays })
    }

    /// Clips raw delays at the horizon: `d_t = min(raw_t, T - t)`.
    pub fn clipped(raw: &[usize]) -> Self {
        let horizon = raw.len();
        let delays = raw
            .iter()
            .enumerate()
            .map(|(idx, &d)| d.min(horizon - (idx + 1)))
            .collect();
        Self { delays }
    }

    pub fn rounds(&self) -> usize {
        self.delays.len()
    }

    /// Delay of round `t` (1-based).
    #[inline]
    pub fn delay(&self, t: usize) -> usize {
        self.delays[t - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.delays
    }

    pub fn total(&self) -> usize {
        self.delays.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }
}

/// Ground-truth missing-feedback statistics of a schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayAccounting {
    /// `tau[t - 1] = |{s < t : s + d_s >= t}|`.
    pub tau: Vec<usize>,
    /// `D = sum_t d_t`.
    pub total: usize,
    /// `d* = max_t d_t`.
    pub d_star: usize,
}

/// Computes `tau_t`, `D` and `d*` for a schedule.
///
/// Round `s` is missing at rounds `s + 1 ..= s + d_s`, so a difference array
/// gives every `tau_t` in linear time.
pub fn delay_accounting(schedule: &DelaySchedule) -> DelayAccounting {
    let horizon = schedule.rounds();
    let mut diff = vec![0i64; horizon + 2];
    for s in 1..=horizon {
        let d = schedule.delay(s);
        if d > 0 {
            diff[s + 1] += 1;
            diff[s + d + 1] -= 1;
        }
    }
    let tau = diff[1..=horizon]
        .iter()
        .scan(0i64, |running, step| {
            *running += step;
            Some(*running as usize)
        })
        .collect();
    DelayAccounting {
        tau,
        total: schedule.total(),
        d_star: schedule.max(),
    }
}

/// Feedback of round `origin`, delivered at the end of round `origin + delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub origin: usize,
    pub arm: usize,
    pub loss: f64,
    pub delay: usize,
}

impl FeedbackEvent {
    #[inline]
    pub fn due(&self) -> usize {
        self.origin + self.delay
    }
}

/// Pending events keyed by their due round.
#[derive(Debug, Default, Clone)]
pub struct FeedbackQueue {
    pending: BTreeMap<usize, Vec<FeedbackEvent>>,
    last_popped: usize,
    len: usize,
}

impl FeedbackQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: FeedbackEvent) -> Result<()> {
        if event.due() <= self.last_popped {
            return Err(Error::OutOfOrder {
                expected: self.last_popped + 1,
                got: event.due(),
            });
        }
        self.pending.entry(event.due()).or_default().push(event);
        self.len += 1;
        Ok(())
    }

    /// Removes and returns every event with `origin + delay == t`, ascending by origin.
    pub fn pop_due(&mut self, t: usize) -> Result<Vec<FeedbackEvent>> {
        if t <= self.last_popped {
            return Err(Error::OutOfOrder {
                expected: self.last_popped + 1,
                got: t,
            });
        }
        self.last_popped = t;
        let mut due = self.pending.remove(&t).unwrap_or_default();
        due.sort_by_key(|e| e.origin);
        self.len -= due.len();
        Ok(due)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Origin rounds still pending, ascending.
    pub fn pending_origins(&self) -> Vec<usize> {
        let mut origins: Vec<usize> = self.pending.values().flatten().map(|e| e.origin).collect();
        origins.sort_unstable();
        origins
    }
}

/// Named oblivious adversaries.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversarySpec {
    /// Every entry equals `c`.
    Constant { c: f64 },
    /// Independent Bernoulli losses; arm 0 has mean `best_mean`, the rest `other_mean`.
    BernoulliGap { best_mean: f64, other_mean: f64 },
    /// The base adversary's losses multiplied by `scale` (the loss range becomes `[0, scale]`).
    Scaled {
        base: Box<AdversarySpec>,
        scale: f64,
    },
    /// Deterministic 0/1 losses where the zero-loss arm alternates between arms 0
    /// and 1 every `period` rounds; all other arms always lose 1.
    Switching { period: usize },
}

/// Named delay generators (raw delays, clipped at the horizon afterwards).
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpec {
    Constant {
        d: i64,
    },
    /// Uniform integer in `0..=dmax`.
    Uniform {
        dmax: i64,
    },
    /// Geometric number of failures with the given mean.
    Geometric {
        mean: f64,
    },
    /// `d_1 = T - 1`, every other delay 0.
    OneHuge,
}

pub fn gen_losses<R: Rng + ?Sized>(
    spec: &AdversarySpec,
    rounds: usize,
    arms: usize,
    rng: &mut R,
) -> Result<LossMatrix> {
    if rounds < 1 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    if arms < 2 {
        return Err(Error::InvalidParameter("K must be at least 2".into()));
    }
    spec.validate()?;
    let values = spec.generate(rounds, arms, rng);
    LossMatrix::from_rows(rounds, arms, values)
}

/// Raw (unclipped) delays for `rounds` rounds.
pub fn raw_delays<R: Rng + ?Sized>(
    spec: &DelaySpec,
    rounds: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if rounds < 1 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    spec.validate()?;
    Ok(match *spec {
        DelaySpec::Constant { d } => vec![d as usize; rounds],
        DelaySpec::Uniform { dmax } => (0..rounds)
            .map(|_| rng.random_range(0..=dmax as usize))
            .collect(),
        DelaySpec::Geometric { mean } => {
            let dist = Geometric::new(1.0 / (1.0 + mean))
                .map_err(|e| Error::InvalidParameter(format!("geometric delay: {e}")))?;
            (0..rounds).map(|_| dist.sample(rng) as usize).collect()
        }
        DelaySpec::OneHuge => {
            let mut raw = vec![0; rounds];
            raw[0] = rounds - 1;
            raw
        }
    })
}

pub fn gen_delays<R: Rng + ?Sized>(
    spec: &DelaySpec,
    rounds: usize,
    rng: &mut R,
) -> Result<DelaySchedule> {
    raw_delays(spec, rounds, rng).map(|raw| DelaySchedule::clipped(&raw))
}

impl AdversarySpec {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1]"
                )))
            }
        };
        match self {
            Self::Constant { c } => in_unit("c", *c),
            Self::BernoulliGap {
                best_mean,
                other_mean,
            } => {
                in_unit("best_mean", *best_mean)?;
                in_unit("other_mean", *other_mean)
            }
            Self::Scaled { base, scale } => {
                in_unit("B", *scale)?;
                base.validate()
            }
            Self::Switching { period } => {
                if *period == 0 {
                    Err(Error::InvalidParameter(
                        "switching period must be >= 1".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn generate<R: Rng + ?Sized>(&self, rounds: usize, arms: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Self::Constant { c } => vec![*c; rounds * arms],
            Self::BernoulliGap {
                best_mean,
                other_mean,
            } => {
                let mut values = Vec::with_capacity(rounds * arms);
                for _ in 0..rounds {
                    for arm in 0..arms {
                        let mean = if arm == 0 { *best_mean } else { *other_mean };
                        values.push(if rng.random_bool(mean) { 1.0 } else { 0.0 });
                    }
                }
                values
            }
            Self::Scaled { base, scale } => {
                let mut values = base.generate(rounds, arms, rng);
                values.iter_mut().for_each(|v| *v *= scale);
                values
            }
            Self::Switching { period } => {
                let mut values = Vec::with_capacity(rounds * arms);
                for t in 1..=rounds {
                    let best = ((t - 1) / period) % 2;
                    values.extend((0..arms).map(|arm| if arm == best { 0.0 } else { 1.0 }));
                }
                values
            }
        }
    }
}

impl DelaySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { d } if d < 0 => {
                Err(Error::InvalidParameter(format!("negative delay {d}")))
            }
            Self::Uniform { dmax } if dmax < 0 => {
                Err(Error::InvalidParameter(format!("negative dmax {dmax}")))
            }
            Self::Geometric { mean } if !(mean >= 0.0 && mean.is_finite()) => Err(
                Error::InvalidParameter(format!("geometric mean {mean} must be finite and >= 0")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { c } => write!(f, "constant({c})"),
            Self::BernoulliGap {
                best_mean,
                other_mean,
            } => write!(f, "bernoulli_gap({best_mean},{other_mean})"),
            Self::Scaled { base, scale } => write!(f, "scaled({base},{scale})"),
            Self::Switching { period } => write!(f, "switching({period})"),
        }
    }
}

impl fmt::Display for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { d } => write!(f, "constant({d})"),
            Self::Uniform { dmax } => write!(f, "uniform({dmax})"),
            Self::Geometric { mean } => write!(f, "geometric({mean})"),
            Self::OneHuge => write!(f, "one_huge"),
        }
    }
}

/// Splits `name(a, b(c, d))` into `("name", ["a", "b(c, d)"])`.
fn split_call(text: &str) -> Result<(&str, Vec<&str>)> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text, Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(Error::UnknownSpec(text.to_string()));
    }
    let name = text[..open].trim();
    let inner = &text[open + 1..text.len() - 1];
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (idx, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                args.push(inner[start..idx].trim());
                start = idx + 1;
            }
            _ => {}
        }
    }
    if !inner.trim().is_empty() {
        args.push(inner[start..].trim());
    }
    // allow `key=value` arguments; only the value is used
    let args = args
        .into_iter()
        .map(|a| a.split_once('=').map_or(a, |(_, v)| v.trim()))
        .collect();
    Ok((name, args))
}

fn parse_num<T: FromStr>(text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse {what} from {text:?}")))
}

fn expect_args<'a>(name: &str, args: &'a [&'a str], n: usize) -> Result<&'a [&'a str]> {
    if args.len() == n {
        Ok(args)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} expects {n} argument(s), got {}",
            args.len()
        )))
    }
}

impl FromStr for AdversarySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, args) = split_call(text)?;
        let spec = match name {
            "constant" => {
                let a = expect_args(name, &args, 1)?;
                Self::Constant {
                    c: parse_num(a[0], "c")?,
                }
            }
            "bernoulli_gap" => {
                let a = expect_args(name, &args, 2)?;
                Self::BernoulliGap {
                    best_mean: parse_num(a[0], "best_mean")?,
                    other_mean: parse_num(a[1], "other_mean")?,
                }
            }
            "scaled" => {
                let a = expect_args(name, &args, 2)?;
                Self::Scaled {
                    base: Box::new(a[0].parse()?),
                    scale: parse_num(a[1], "B")?,
                }
            }
            "switching" => {
                let a = expect_args(name, &args, 1)?;
                Self::Switching {
                    period: parse_num(a[0], "period")?,
                }
            }
            _ => return Err(Error::UnknownSpec(text.trim().to_string())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl FromStr for DelaySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, args) = split_call(text)?;
        let spec = match name {
            "constant" => Self::Constant {
                d: parse_num(expect_args(name, &args, 1)?[0], "d")?,
            },
            "uniform" => Self::Uniform {
                dmax: parse_num(expect_args(name, &args, 1)?[0], "dmax")?,
            },
            "geometric" => Self::Geometric {
                mean: parse_num(expect_args(name, &args, 1)?[0], "mean")?,
            },
            "one_huge" => {
                expect_args(name, &args, 0)?;
                Self::OneHuge
            }
            _ => return Err(Error::UnknownSpec(text.trim().to_string())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

// JSON accepts either the compact call syntax (`"bernoulli_gap(0.3,0.5)"`) or a
// tagged object (`{"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5}`).

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TaggedAdversary {
    Constant {
        c: f64,
    },
    BernoulliGap {
        best_mean: f64,
        other_mean: f64,
    },
    Scaled {
        base: AdversarySpec,
        #[serde(rename = "B", alias = "scale")]
        scale: f64,
    },
    Switching {
        period: usize,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AdversaryInput {
    Compact(String),
    Tagged(TaggedAdversary),
}

impl TryFrom<AdversaryInput> for AdversarySpec {
    type Error = Error;

    fn try_from(input: AdversaryInput) -> Result<Self> {
        let spec = match input {
            AdversaryInput::Compact(text) => return text.parse(),
            AdversaryInput::Tagged(TaggedAdversary::Constant { c }) => Self::Constant { c },
            AdversaryInput::Tagged(TaggedAdversary::BernoulliGap {
                best_mean,
                other_mean,
            }) => Self::BernoulliGap {
                best_mean,
                other_mean,
            },
            AdversaryInput::Tagged(TaggedAdversary::Scaled { base, scale }) => Self::Scaled {
                base: Box::new(base),
                scale,
            },
            AdversaryInput::Tagged(TaggedAdversary::Switching { period }) => {
                Self::Switching { period }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl<'de> Deserialize<'de> for AdversarySpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let input = AdversaryInput::deserialize(de)?;
        Self::try_from(input).map_err(serde::de::Error::custom)
    }
}

impl Serialize for AdversarySpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TaggedDelay {
    Constant { d: i64 },
    Uniform { dmax: i64 },
    Geometric { mean: f64 },
    OneHuge,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DelayInput {
    Compact(String),
    Tagged(TaggedDelay),
}

impl<'de> Deserialize<'de> for DelaySpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let spec = match DelayInput::deserialize(de)? {
            DelayInput::Compact(text) => return text.parse().map_err(serde::de::Error::custom),
            DelayInput::Tagged(TaggedDelay::Constant { d }) => Self::Constant { d },
            DelayInput::Tagged(TaggedDelay::Uniform { dmax }) => Self::Uniform { dmax },
            DelayInput::Tagged(TaggedDelay::Geometric { mean }) => Self::Geometric { mean },
            DelayInput::Tagged(TaggedDelay::OneHuge) => Self::OneHuge,
        };
        spec.validate().map_err(serde::de::Error::custom)?;
        Ok(spec)
    }
}

impl Serialize for DelaySpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn constant_zero_losses() {
        let m = gen_losses(&AdversarySpec::Constant { c: 0.0 }, 5, 3, &mut rng(0)).unwrap();
        assert_eq!(m.values(), &[0.0; 15]);
    }

    #[test]
    fn bernoulli_column_means() {
        let spec = AdversarySpec::BernoulliGap {
            best_mean: 0.3,
            other_mean: 0.5,
        };
        let m = gen_losses(&spec, 10_000, 4, &mut rng(7)).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0 || v == 1.0));
        let means: Vec<f64> = m.arm_totals().iter().map(|l| l / 10_000.0).collect();
        assert!((means[0] - 0.3).abs() < 0.02, "{means:?}");
        for mean in &means[1..] {
            assert!((mean - 0.5).abs() < 0.02, "{means:?}");
        }
    }

    #[test]
    fn scaled_multiplies_base() {
        let base = AdversarySpec::BernoulliGap {
            best_mean: 0.3,
            other_mean: 0.5,
        };
        let scaled = AdversarySpec::Scaled {
            base: Box::new(base.clone()),
            scale: 0.01,
        };
        let a = gen_losses(&base, 200, 3, &mut rng(3)).unwrap();
        let b = gen_losses(&scaled, 200, 3, &mut rng(3)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x * 0.01, *y);
        }
        assert!(b.values().iter().all(|&v| v <= 0.01));
    }

    #[test]
    fn switching_alternates_best_arm() {
        let m = gen_losses(&AdversarySpec::Switching { period: 2 }, 6, 3, &mut rng(0)).unwrap();
        assert_eq!(m.row(1), &[0.0, 1.0, 1.0]);
        assert_eq!(m.row(2), &[0.0, 1.0, 1.0]);
        assert_eq!(m.row(3), &[1.0, 0.0, 1.0]);
        assert_eq!(m.row(5), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn invalid_adversaries_rejected() {
        let bad = AdversarySpec::BernoulliGap {
            best_mean: 1.2,
            other_mean: 0.5,
        };
        assert!(gen_losses(&bad, 5, 2, &mut rng(0)).is_err());
        assert!(gen_losses(&AdversarySpec::Constant { c: 0.0 }, 5, 1, &mut rng(0)).is_err());
        assert!(matches!(
            "wobble(3)".parse::<AdversarySpec>(),
            Err(Error::UnknownSpec(_))
        ));
    }

    #[test]
    fn constant_delay_clipped_at_horizon() {
        let s = gen_delays(&DelaySpec::Constant { d: 25 }, 100, &mut rng(0)).unwrap();
        assert_eq!(s.delay(1), 25);
        assert_eq!(s.delay(75), 25);
        assert_eq!(s.delay(80), 20);
        assert_eq!(s.delay(99), 1);
        assert_eq!(s.delay(100), 0);
        for t in 1..=100 {
            assert_eq!(s.delay(t), 25.min(100 - t));
        }
    }

    #[test]
    fn one_huge_delay() {
        let s = gen_delays(&DelaySpec::OneHuge, 1000, &mut rng(0)).unwrap();
        assert_eq!(s.delay(1), 999);
        assert!((2..=1000).all(|t| s.delay(t) == 0));
        assert_eq!(s.total(), 999);
    }

    #[test]
    fn uniform_delay_mean() {
        let raw = raw_delays(&DelaySpec::Uniform { dmax: 10 }, 10_000, &mut rng(11)).unwrap();
        let mean = raw.iter().sum::<usize>() as f64 / raw.len() as f64;
        assert!((mean - 5.0).abs() < 0.2, "mean {mean}");
        assert!(raw.iter().all(|&d| d <= 10));
    }

    #[test]
    fn geometric_delay_mean() {
        let raw = raw_delays(&DelaySpec::Geometric { mean: 4.0 }, 20_000, &mut rng(5)).unwrap();
        let mean = raw.iter().sum::<usize>() as f64 / raw.len() as f64;
        assert!((mean - 4.0).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn negative_delay_rejected() {
        assert!(gen_delays(&DelaySpec::Constant { d: -1 }, 10, &mut rng(0)).is_err());
        assert!("uniform(-3)".parse::<DelaySpec>().is_err());
        assert!(matches!(
            "poisson(3)".parse::<DelaySpec>(),
            Err(Error::UnknownSpec(_))
        ));
    }

    #[test]
    fn accounting_hand_cases() {
        let acc = delay_accounting(&DelaySchedule::new(vec![1, 0, 0]).unwrap());
        assert_eq!(acc.tau, vec![0, 1, 0]);
        assert_eq!(acc.total, 1);
        assert_eq!(acc.d_star, 1);

        let acc = delay_accounting(&DelaySchedule::new(vec![0; 8]).unwrap());
        assert_eq!(acc.tau, vec![0; 8]);
        assert_eq!(acc.total, 0);
    }

    #[test]
    fn schedule_rejects_overrun() {
        assert!(DelaySchedule::new(vec![0, 2, 0]).is_err());
        assert!(DelaySchedule::new(vec![2, 1, 0]).is_ok());
    }

    #[test]
    fn pop_due_hand_case() {
        let mut q = FeedbackQueue::new();
        q.push(FeedbackEvent {
            origin: 1,
            arm: 0,
            loss: 0.5,
            delay: 1,
        })
        .unwrap();
        assert!(q.pop_due(1).unwrap().is_empty());
        q.push(FeedbackEvent {
            origin: 2,
            arm: 1,
            loss: 0.25,
            delay: 0,
        })
        .unwrap();
        let due = q.pop_due(2).unwrap();
        assert_eq!(due.iter().map(|e| e.origin).collect::<Vec<_>>(), vec![1, 2]);
        assert!(q.is_empty());
        assert!(q.pop_due(3).unwrap().is_empty());
    }

    #[test]
    fn pop_due_out_of_order() {
        let mut q = FeedbackQueue::new();
        q.pop_due(3).unwrap();
        assert!(matches!(q.pop_due(2), Err(Error::OutOfOrder { .. })));
        assert!(q.pop_due(3).is_err());
        let late = FeedbackEvent {
            origin: 1,
            arm: 0,
            loss: 0.0,
            delay: 1,
        };
        assert!(q.push(late).is_err());
    }

    #[test]
    fn zero_delay_delivers_same_round() {
        let mut q = FeedbackQueue::new();
        for t in 1..=10 {
            q.push(FeedbackEvent {
                origin: t,
                arm: 0,
                loss: 1.0,
                delay: 0,
            })
            .unwrap();
            let due = q.pop_due(t).unwrap();
            assert_eq!(due.len(), 1);
            assert_eq!(due[0].origin, t);
        }
    }

    #[test]
    fn compact_round_trip() {
        for text in [
            "constant(0)",
            "bernoulli_gap(0.3,0.5)",
            "scaled(bernoulli_gap(0.3,0.5),0.01)",
            "switching(50)",
        ] {
            let spec: AdversarySpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        for text in ["constant(25)", "uniform(10)", "geometric(2.5)", "one_huge"] {
            let spec: DelaySpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
    }

    #[test]
    fn tagged_json_descriptors() {
        let spec: AdversarySpec = serde_json::from_str(
            r#"{"kind":"scaled","base":{"kind":"bernoulli_gap","best_mean":0.3,"other_mean":0.5},"B":0.01}"#,
        )
        .unwrap();
        assert_eq!(spec.to_string(), "scaled(bernoulli_gap(0.3,0.5),0.01)");
        let mixed: AdversarySpec =
            serde_json::from_str(r#"{"kind":"scaled","base":"constant(1)","scale":0.5}"#).unwrap();
        assert_eq!(mixed.to_string(), "scaled(constant(1),0.5)");
        let delay: DelaySpec = serde_json::from_str(r#"{"kind":"one_huge"}"#).unwrap();
        assert_eq!(delay, DelaySpec::OneHuge);
        assert!(serde_json::from_str::<DelaySpec>(r#"{"kind":"constant","d":-4}"#).is_err());
    }
}
