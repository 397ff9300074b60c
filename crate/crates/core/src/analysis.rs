//! Closed-form rates, capacities and randomness sizes, all as exact
//! rationals, plus the transmission lower bounds as checks on transcripts.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::protocol::{biregular_degrees, DeliveryTranscript, PidConfig, Rational};
use crate::schemes::active_servers;

fn int(v: usize) -> Rational {
    Ratio::from_integer(v as u64)
}

/// Formats a rational as `p/q`, including integers (`1/1`).
pub fn fmt_ratio(r: Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a plain integer.
pub fn parse_ratio(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (u64, u64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            (q != 0).then(|| Ratio::new(p, q))
        }
        None => s.parse().ok().map(Ratio::from_integer),
    }
}

/// Allowed association degrees: multiples of `N / gcd(K, N)` up to `N`.
pub fn valid_l(k: usize, n: usize) -> Vec<usize> {
    if k == 0 || n == 0 {
        return Vec::new();
    }
    biregular_degrees(k, n)
}

fn check_biregular(k: usize, n: usize, l: usize) -> Result<()> {
    if k == 0 || n == 0 || l == 0 || l > n {
        return Err(Error::InvalidParameters(format!(
            "need K, N >= 1 and 1 <= L <= N (K={k}, N={n}, L={l})"
        )));
    }
    if (k * l) % n != 0 {
        return Err(Error::InvalidParameters(format!(
            "N={n} does not divide K*L={}",
            k * l
        )));
    }
    Ok(())
}

fn check_min_memory(k: usize, n: usize, m: Rational) -> Result<()> {
    if m != Ratio::new(k as u64, n as u64) {
        return Err(Error::InvalidParameters(format!(
            "capacity holds at M = K/N = {}/{n}, got M = {}",
            k,
            fmt_ratio(m)
        )));
    }
    Ok(())
}

/// Coded-storage capacity `M L / K` at `M = K/N`.
pub fn capacity_coded(k: usize, n: usize, m: Rational, l: usize) -> Result<Rational> {
    check_biregular(k, n, l)?;
    check_min_memory(k, n, m)?;
    let c = m * int(l) / int(k);
    debug_assert_eq!(c, Ratio::new(l as u64, n as u64));
    Ok(c)
}

/// Achievable rate with `N > K/M` servers: `L / ceil(K/M)`, capped at 1.
pub fn rate_subset(k: usize, n: usize, m: Rational, l: usize) -> Result<Rational> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameters("K and L must be positive".into()));
    }
    let s = active_servers(k, m)?;
    if int(n) <= int(k) / m {
        return Err(Error::InvalidParameters(format!(
            "need N > K/M = {}, got N={n}",
            fmt_ratio(int(k) / m)
        )));
    }
    if (k * l) % s != 0 {
        return Err(Error::InvalidParameters(format!(
            "K*L/ceil(K/M) = {}/{s} is not an integer",
            k * l
        )));
    }
    Ok(if l < s { Ratio::new(l as u64, s as u64) } else { int(1) })
}

/// Uncoded-storage capacity bounds `(1/ceil(K/M), M/K)` for integer `M`.
pub fn uncoded_bounds(k: usize, n: usize, m: usize) -> Result<(Rational, Rational)> {
    if m == 0 || k == 0 || m > k {
        return Err(Error::InvalidParameters(format!("need 1 <= M <= K (K={k}, M={m})")));
    }
    let s = k.div_ceil(m);
    if n < s {
        return Err(Error::InvalidParameters(format!(
            "need N >= ceil(K/M) = {s}, got N={n}"
        )));
    }
    Ok((Ratio::new(1, s as u64), Ratio::new(m as u64, k as u64)))
}

/// `(eta, eta_n)` of the capacity scheme: `N/L - 1 = K/(ML) - 1` and `1/L`.
pub fn randomness_sizes(k: usize, n: usize, m: Rational, l: usize) -> Result<(Rational, Rational)> {
    check_biregular(k, n, l)?;
    check_min_memory(k, n, m)?;
    let eta = int(n) / int(l) - int(1);
    debug_assert_eq!(eta, int(k) / (m * int(l)) - int(1));
    Ok((eta, Ratio::new(1, l as u64)))
}

/// Transmission sums over each association set, against `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerBounds {
    /// `sum_{n in N_k} T_n` for each message.
    pub sums: Vec<usize>,
    /// Whether each sum reaches `L`.
    pub satisfied: Vec<bool>,
    /// Every sum is exactly `L`.
    pub tight: bool,
    /// Converse bound `M L / K` with `M` the per-server load.
    pub converse: Rational,
    pub rate: Option<Rational>,
}

impl AnswerBounds {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|b| *b)
    }

    /// The transcript's rate does not exceed the converse.
    pub fn within_converse(&self) -> bool {
        self.rate.map_or(true, |r| r <= self.converse)
    }
}

/// Checks `sum_{n in N_k} T_n >= L` for every `k`: for `k = D` this is the
/// correctness bound, for the others the privacy bound.
pub fn answer_bounds_check(transcript: &DeliveryTranscript, config: &PidConfig) -> AnswerBounds {
    let t = transcript.t_n();
    let l = config.message_len();
    let sums: Vec<usize> = config
        .association()
        .iter()
        .map(|set| set.iter().map(|s| t.get(s - 1).copied().unwrap_or(0)).sum())
        .collect();
    let satisfied = sums.iter().map(|s| *s >= l).collect();
    let tight = sums.iter().all(|s| *s == l);
    let load = config.storage_load();
    let converse = load.messages() * int(l) / int(config.messages());
    AnswerBounds { sums, satisfied, tight, converse, rate: transcript.rate() }
}

/// Everything known about one configuration and one delivery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateReport {
    pub c_cs: Option<Rational>,
    pub c_us: Option<(Rational, Rational)>,
    pub achieved: Option<Rational>,
    pub eta: Option<Rational>,
    pub eta_n: Option<Rational>,
    pub bounds: AnswerBounds,
    /// A rate quoted for this instance elsewhere, printed next to the
    /// measured one.
    pub reference: Option<Rational>,
}

pub fn rate_report(config: &PidConfig, transcript: &DeliveryTranscript) -> RateReport {
    let (k, n, l) = (config.messages(), config.servers(), config.message_len());
    let m = config.storage_load().messages();
    let c_cs = capacity_coded(k, n, m, l).ok();
    let c_us = m.is_integer().then(|| uncoded_bounds(k, n, m.to_integer() as usize).ok()).flatten();
    let (eta, eta_n) = match randomness_sizes(k, n, m, l) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    RateReport {
        c_cs,
        c_us,
        achieved: transcript.rate(),
        eta,
        eta_n,
        bounds: answer_bounds_check(transcript, config),
        reference: None,
    }
}

impl RateReport {
    pub fn render(&self) -> String {
        let opt = |r: Option<Rational>| r.map_or("-".to_string(), fmt_ratio);
        let mut out = String::new();
        let _ = writeln!(out, "rate_achieved={}", opt(self.achieved));
        if let Some(r) = self.reference {
            let _ = writeln!(out, "rate_reference={} matches={}", fmt_ratio(r), self.achieved == Some(r));
        }
        let _ = writeln!(out, "capacity_coded={}", opt(self.c_cs));
        let _ = writeln!(
            out,
            "capacity_uncoded_bounds={}",
            self.c_us.map_or("-".to_string(), |(a, b)| format!("{},{}", fmt_ratio(a), fmt_ratio(b)))
        );
        let _ = writeln!(out, "eta={}", opt(self.eta));
        let _ = writeln!(out, "eta_n={}", opt(self.eta_n));
        let _ = writeln!(out, "converse_bound={}", fmt_ratio(self.bounds.converse));
        let sums: Vec<String> = self.bounds.sums.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "association_sums={}", sums.join(","));
        let _ = writeln!(
            out,
            "answer_bounds={} tight={}",
            if self.bounds.all_satisfied() { "ok" } else { "violated" },
            self.bounds.tight
        );
        out
    }
}

/// One point of the rate-vs-servers comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub n: usize,
    pub c_us: Option<(Rational, Rational)>,
    pub coded: Option<Rational>,
    pub valid: bool,
}

/// Coded rate at `N` servers: capacity `L/N` at `N = K/M`, the spare-server
/// rate above it.
fn coded_rate_at(k: usize, n: usize, m: Rational, l: usize) -> Option<Rational> {
    if l > n {
        return None;
    }
    if int(n) == int(k) / m {
        capacity_coded(k, n, m, l).ok()
    } else {
        rate_subset(k, n, m, l).ok()
    }
}

pub fn sweep_rate_vs_n(k: usize, m: Rational, l: usize, n_range: RangeInclusive<usize>) -> Vec<SweepRow> {
    n_range
        .map(|n| {
            let c_us = m
                .is_integer()
                .then(|| uncoded_bounds(k, n, m.to_integer() as usize).ok())
                .flatten();
            let coded = if *m.numer() == 0 { None } else { coded_rate_at(k, n, m, l) };
            SweepRow { n, c_us, coded, valid: coded.is_some() }
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "N,c_us_lower,c_us_upper,coded_rate,valid";

/// CSV with header `N,c_us_lower,c_us_upper,coded_rate,valid`; undefined
/// entries are written as `-`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (lo, hi) = r
            .c_us
            .map_or(("-".to_string(), "-".to_string()), |(a, b)| (fmt_ratio(a), fmt_ratio(b)));
        let coded = r.coded.map_or("-".to_string(), fmt_ratio);
        let _ = writeln!(out, "{},{lo},{hi},{coded},{}", r.n, r.valid);
    }
    out
}

/// Renders a cell of the `L` table: `[a:s:N]` when the progression has more
/// than three terms (`[N]` when every `L` is allowed), a comma list otherwise.
pub fn format_l_cell(values: &[usize]) -> String {
    match values {
        [] => String::new(),
        [first, .., last] if values.len() > 3 => {
            if *first == 1 {
                format!("[{last}]")
            } else {
                format!("[{first}:{first}:{last}]")
            }
        }
        _ => values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    }
}
