//! Exhaustive correctness and privacy checks by exact counting.
//!
//! Every `(W, U, D)` is enumerated in lexicographic order: message symbols
//! `W_{1,1}, ..., W_{K,L}` first, then `u_1, ..., u_r`, with `D` innermost.
//! Work is split on the leading message symbol; results are merged in
//! partition order so verdicts and counterexamples do not depend on
//! scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{FieldElement, Modulus};
use crate::protocol::{answer, draw_symbols, DeliveryScheme, Message};

pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// What the user receives: one payload per server.
pub type UserView = Vec<Vec<FieldElement>>;

/// `q^(K L + r) * K`, or `None` on overflow.
pub fn enumeration_size<S: DeliveryScheme + ?Sized>(scheme: &S) -> Option<u128> {
    let symbols = scheme.messages() * scheme.message_len() + scheme.randomness_len();
    (scheme.modulus().get() as u128)
        .checked_pow(u32::try_from(symbols).ok()?)?
        .checked_mul(scheme.messages() as u128)
}

fn check_budget<S: DeliveryScheme + ?Sized>(scheme: &S, budget: u128) -> Result<u128> {
    match enumeration_size(scheme) {
        Some(n) if n <= budget => Ok(n),
        Some(n) => Err(Error::BudgetExceeded { required: n, budget }),
        None => Err(Error::BudgetExceeded { required: u128::MAX, budget }),
    }
}

/// Splits a digit vector into messages and randomness.
fn unpack(modulus: Modulus, k: usize, len: usize, digits: &[u32]) -> (Vec<Message>, Vec<FieldElement>) {
    let el = |v: &u32| modulus.element(*v as i64);
    let messages = (0..k)
        .map(|i| Message::new(digits[i * len..(i + 1) * len].iter().map(el).collect()).expect("one field"))
        .collect();
    let u = digits[k * len..].iter().map(el).collect();
    (messages, u)
}

/// Calls `visit` on every digit vector with `digits[0] == lead`, in
/// lexicographic order, until it returns `false`.
fn for_each_with_lead(q: u32, width: usize, lead: u32, mut visit: impl FnMut(&[u32]) -> bool) {
    let mut digits = vec![0u32; width];
    digits[0] = lead;
    loop {
        if !visit(&digits) {
            return;
        }
        let mut i = width;
        loop {
            if i == 1 {
                return;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < q {
                break;
            }
            digits[i] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub messages: Vec<Message>,
    pub randomness: Vec<FieldElement>,
    pub d: usize,
    pub decoded: Option<Message>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessVerdict {
    pub pass: bool,
    /// Cases examined; the full enumeration on success.
    pub cases: u128,
    pub counterexample: Option<Counterexample>,
}

/// Checks `decode(answer(W, U, D)) = W_D` for every `(W, U, D)`.
pub fn exhaustive_correctness<S: DeliveryScheme + Sync + ?Sized>(
    scheme: &S,
    budget: u128,
) -> Result<CorrectnessVerdict> {
    let total = check_budget(scheme, budget)?;
    let (m, k, len) = (scheme.modulus(), scheme.messages(), scheme.message_len());
    let q = m.get();
    let width = k * len + scheme.randomness_len();
    let per_lead = total / q as u128;

    let partials: Vec<Result<Option<(u128, Counterexample)>>> = (0..q)
        .into_par_iter()
        .map(|lead| {
            let mut index = 0u128;
            let mut found = None;
            let mut failure = None;
            for_each_with_lead(q, width, lead, |digits| {
                let (messages, u) = unpack(m, k, len, digits);
                let storage = match scheme.store(&messages, &u) {
                    Ok(s) => s,
                    Err(e) => {
                        failure = Some(e);
                        return false;
                    }
                };
                for d in 1..=k {
                    let decoded = scheme.decode(&answer(&storage, d)).ok();
                    if decoded.as_ref() != Some(&messages[d - 1]) {
                        found = Some((
                            index,
                            Counterexample { messages: messages.clone(), randomness: u.clone(), d, decoded },
                        ));
                        return false;
                    }
                    index += 1;
                }
                true
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(found),
            }
        })
        .collect();

    for (lead, partial) in partials.into_iter().enumerate() {
        if let Some((index, cx)) = partial? {
            return Ok(CorrectnessVerdict {
                pass: false,
                cases: lead as u128 * per_lead + index + 1,
                counterexample: Some(cx),
            });
        }
    }
    Ok(CorrectnessVerdict { pass: true, cases: total, counterexample: None })
}

/// Exact count of each user view, per delivered index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerDistribution {
    /// `counts[d - 1][view]`.
    pub counts: Vec<BTreeMap<UserView, u64>>,
}

impl AnswerDistribution {
    pub fn total(&self, d: usize) -> u64 {
        self.counts[d - 1].values().sum()
    }

    fn merge(mut self, other: AnswerDistribution) -> AnswerDistribution {
        if self.counts.is_empty() {
            return other;
        }
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts) {
            for (view, c) in theirs {
                *mine.entry(view).or_default() += c;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyVerdict {
    pub pass: bool,
    pub cases: u128,
    /// `q^(K L + r) / q^N`, the count every `a` in `F_q^N` must reach.
    pub expected_count: u64,
    /// Each conditional distribution is uniform over `F_q^N`.
    pub uniform: bool,
    /// The conditional count maps coincide for all `d`.
    pub identical_across_d: bool,
    pub distribution: AnswerDistribution,
}

/// Counts every user view under every `d` and checks that each
/// conditional distribution is uniform over `F_q^N` and that they are all
/// identical, so `I(D; A) = 0` exactly.
pub fn exhaustive_privacy<S: DeliveryScheme + Sync + ?Sized>(
    scheme: &S,
    budget: u128,
) -> Result<PrivacyVerdict> {
    let total = check_budget(scheme, budget)?;
    let (m, k, len, n) = (scheme.modulus(), scheme.messages(), scheme.message_len(), scheme.servers());
    let q = m.get();
    let width = k * len + scheme.randomness_len();

    let per_d = total / k as u128;
    let space = (q as u128)
        .checked_pow(n as u32)
        .ok_or(Error::BudgetExceeded { required: u128::MAX, budget })?;
    if per_d % space != 0 {
        return Err(Error::NonIntegralCount { numerator: per_d, denominator: space });
    }
    let expected_count = (per_d / space) as u64;

    let partials: Vec<Result<AnswerDistribution>> = (0..q)
        .into_par_iter()
        .map(|lead| {
            let mut dist = AnswerDistribution { counts: vec![BTreeMap::new(); k] };
            let mut failure = None;
            for_each_with_lead(q, width, lead, |digits| {
                let (messages, u) = unpack(m, k, len, digits);
                match scheme.store(&messages, &u) {
                    Ok(storage) => {
                        for d in 1..=k {
                            *dist.counts[d - 1].entry(answer(&storage, d)).or_default() += 1;
                        }
                        true
                    }
                    Err(e) => {
                        failure = Some(e);
                        false
                    }
                }
            });
            failure.map_or(Ok(dist), Err)
        })
        .collect();

    let mut distribution = AnswerDistribution::default();
    for p in partials {
        distribution = distribution.merge(p?);
    }

    let uniform = distribution.counts.iter().all(|c| {
        c.len() as u128 == space
            && c.iter().all(|(view, count)| *count == expected_count && view.iter().all(|p| p.len() == 1))
    });
    let identical_across_d = distribution.counts.windows(2).all(|w| w[0] == w[1]);
    Ok(PrivacyVerdict {
        pass: uniform && identical_across_d,
        cases: total,
        expected_count,
        uniform,
        identical_across_d,
        distribution,
    })
}

/// Sampled privacy statistics. Advisory only: a clean probe proves nothing,
/// but a transmission-pattern anomaly is a definite leak.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSummary {
    pub trials: u64,
    pub trials_per_d: Vec<u64>,
    /// Observed `(T_1, ..., T_N)` patterns and their counts, per `d`.
    pub patterns: Vec<BTreeMap<Vec<usize>, u64>>,
    /// Some `d` shows a transmission pattern another `d` never shows.
    pub pattern_anomaly: bool,
    /// Largest chi-square statistic of a single server's symbol against
    /// uniform, over all `(d, server)` with exactly one symbol sent.
    pub max_chi_square: f64,
    /// Degrees of freedom of each chi-square statistic (`q - 1`).
    pub dof: u32,
    /// Fewer than `10 q^N` trials.
    pub underpowered: bool,
}

/// Samples `(W, U)` uniformly with `D` cycling through `1..=K`.
pub fn randomized_privacy_probe<S: DeliveryScheme + ?Sized>(
    scheme: &S,
    trials: u64,
    seed: u64,
) -> Result<ProbeSummary> {
    let (m, k, len, n) = (scheme.modulus(), scheme.messages(), scheme.message_len(), scheme.servers());
    let q = m.get() as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut patterns = vec![BTreeMap::<Vec<usize>, u64>::new(); k];
    let mut marginals = vec![vec![vec![0u64; q]; n]; k];
    let mut trials_per_d = vec![0u64; k];
    for t in 0..trials {
        let d = (t % k as u64) as usize + 1;
        let messages: Vec<Message> = (0..k)
            .map(|_| Message::new(draw_symbols(m, len, &mut rng)))
            .collect::<Result<_>>()?;
        let u = draw_symbols(m, scheme.randomness_len(), &mut rng);
        let view = answer(&scheme.store(&messages, &u)?, d);
        trials_per_d[d - 1] += 1;
        *patterns[d - 1].entry(view.iter().map(Vec::len).collect()).or_default() += 1;
        for (server, payload) in view.iter().enumerate() {
            if let [a] = payload.as_slice() {
                marginals[d - 1][server][a.value() as usize] += 1;
            }
        }
    }

    let supports: Vec<BTreeSet<&Vec<usize>>> = patterns.iter().map(|p| p.keys().collect()).collect();
    let active: Vec<&BTreeSet<&Vec<usize>>> = supports
        .iter()
        .zip(&trials_per_d)
        .filter(|(_, t)| **t > 0)
        .map(|(s, _)| s)
        .collect();
    let pattern_anomaly = active.windows(2).any(|w| w[0] != w[1]);

    let mut max_chi_square: f64 = 0.0;
    for per_server in &marginals {
        for counts in per_server {
            let total: u64 = counts.iter().sum();
            if total == 0 {
                continue;
            }
            let expected = total as f64 / q as f64;
            let chi: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
            max_chi_square = max_chi_square.max(chi);
        }
    }
    let space = (q as f64).powi(n as i32);
    Ok(ProbeSummary {
        trials,
        trials_per_d,
        patterns,
        pattern_anomaly,
        max_chi_square,
        dof: (q - 1) as u32,
        underpowered: (trials as f64) < 10.0 * space,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Correctness,
    Privacy,
}

impl Property {
    fn as_str(self) -> &'static str {
        match self {
            Property::Correctness => "correctness",
            Property::Privacy => "privacy",
        }
    }
}

/// `PROPERTY=<p> INSTANCE=<name> VERDICT=<pass|fail> CASES=<n>`.
pub fn verdict_line(property: Property, instance: &str, pass: bool, cases: u128) -> String {
    format!(
        "PROPERTY={} INSTANCE={instance} VERDICT={} CASES={cases}",
        property.as_str(),
        if pass { "pass" } else { "fail" }
    )
}

fn join_values<'a>(it: impl IntoIterator<Item = &'a FieldElement>) -> String {
    it.into_iter().map(|v| v.value().to_string()).collect::<Vec<_>>().join(",")
}

impl CorrectnessVerdict {
    pub fn report(&self, instance: &str) -> String {
        let mut out = verdict_line(Property::Correctness, instance, self.pass, self.cases);
        out.push('\n');
        if let Some(cx) = &self.counterexample {
            let w: Vec<String> = cx.messages.iter().map(|m| join_values(m.symbols())).collect();
            let _ = writeln!(
                out,
                "COUNTEREXAMPLE W={} U={} D={} EXPECTED={} DECODED={}",
                w.join(";"),
                join_values(&cx.randomness),
                cx.d,
                join_values(cx.messages[cx.d - 1].symbols()),
                cx.decoded.as_ref().map_or("none".to_string(), |m| join_values(m.symbols()))
            );
        }
        out
    }
}

impl PrivacyVerdict {
    pub fn report(&self, instance: &str) -> String {
        let mut out = verdict_line(Property::Privacy, instance, self.pass, self.cases);
        out.push('\n');
        for (i, c) in self.distribution.counts.iter().enumerate() {
            let min = c.values().min().copied().unwrap_or(0);
            let max = c.values().max().copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "DISTRIBUTION D={} DISTINCT={} MIN={min} MAX={max} EXPECTED={}",
                i + 1,
                c.len(),
                self.expected_count
            );
        }
        out
    }
}

impl ProbeSummary {
    pub fn report(&self, instance: &str) -> String {
        let mut out = format!(
            "PROBE INSTANCE={instance} TRIALS={} PATTERN_ANOMALY={} MAX_CHI2={:.3} DOF={} UNDERPOWERED={}\n",
            self.trials, self.pattern_anomaly, self.max_chi_square, self.dof, self.underpowered
        );
        for (i, p) in self.patterns.iter().enumerate() {
            for (pattern, count) in p {
                let pat: Vec<String> = pattern.iter().map(|t| t.to_string()).collect();
                let _ = writeln!(out, "PATTERN D={} T={} COUNT={count}", i + 1, pat.join(","));
            }
        }
        out
    }
}
