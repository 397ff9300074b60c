//! Browser bindings: a rate sweep, a single delivery, and exact answer
//! histograms for small instances. Every export returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pid_core::analysis::{fmt_ratio, answer_bounds_check, parse_ratio, sweep_rate_vs_n};
use pid_core::protocol::{deliver, random_messages, seeded_randomness};
use pid_core::schemes::SplitScheme;
use pid_core::verify::exhaustive_privacy;
use pid_core::{CapacityScheme, CodePair, DeliveryScheme, Modulus, PidConfig};

/// Exhaustive histograms above this many evaluations are refused.
pub const DEMO_BUDGET: u128 = 2_000_000;

#[derive(Serialize)]
struct SweepPoint {
    n: usize,
    uncoded_lower: Option<f64>,
    uncoded_upper: Option<f64>,
    coded: Option<f64>,
    coded_exact: Option<String>,
}

#[derive(Serialize)]
struct Delivery {
    association: Vec<Vec<usize>>,
    messages: Vec<Vec<u32>>,
    storage: Vec<Vec<(usize, u32)>>,
    shares: Vec<Option<u32>>,
    answers: Vec<Vec<u32>>,
    decoded: Vec<u32>,
    rate: Option<String>,
    association_sums: Vec<usize>,
}

#[derive(Serialize)]
struct Histogram {
    pass: bool,
    expected_count: u64,
    identical_across_d: bool,
    /// `counts[d - 1]`: every distinct user view and how often it occurs.
    views: Vec<Vec<(String, u64)>>,
}

fn to_f64(r: pid_core::Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn instance(q: u32, k: usize, n: usize, l: usize) -> Result<(PidConfig, CodePair), String> {
    let f = Modulus::new(q as u64).map_err(|e| e.to_string())?;
    let config = PidConfig::canonical(f, k, n, l).map_err(|e| e.to_string())?;
    let code = CodePair::vandermonde(f, n, l, None).map_err(|e| e.to_string())?;
    Ok((config, code))
}

pub fn sweep_json(k: usize, m: &str, l: usize, n_min: usize, n_max: usize) -> Result<String, String> {
    let m = parse_ratio(m).ok_or_else(|| format!("`{m}` is not p/q"))?;
    if n_min == 0 || n_min > n_max {
        return Err("need 1 <= N_min <= N_max".into());
    }
    let points: Vec<SweepPoint> = sweep_rate_vs_n(k, m, l, n_min..=n_max)
        .into_iter()
        .map(|r| SweepPoint {
            n: r.n,
            uncoded_lower: r.c_us.map(|c| to_f64(c.0)),
            uncoded_upper: r.c_us.map(|c| to_f64(c.1)),
            coded: r.coded.map(to_f64),
            coded_exact: r.coded.map(fmt_ratio),
        })
        .collect();
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

pub fn deliver_json(q: u32, k: usize, n: usize, l: usize, d: usize, seed: u64) -> Result<String, String> {
    let (config, code) = instance(q, k, n, l)?;
    let scheme = CapacityScheme::new(config.clone(), code).map_err(|e| e.to_string())?;
    let w = random_messages(config.modulus(), k, l, seed);
    let t = deliver(&scheme, &w, d, seed).map_err(|e| e.to_string())?;
    let u = seeded_randomness(config.modulus(), scheme.randomness_len(), seed);
    let state = scheme.store(&w, &u).map_err(|e| e.to_string())?;
    let out = Delivery {
        association: config.association().to_vec(),
        messages: w.iter().map(|m| m.values()).collect(),
        storage: state
            .iter()
            .map(|s| s.coded.iter().flat_map(|(k, v)| v.iter().map(move |x| (*k, x.value()))).collect())
            .collect(),
        shares: state.iter().map(|s| s.share.map(|u| u.value())).collect(),
        answers: t.answers.iter().map(|a| a.iter().map(|x| x.value()).collect()).collect(),
        decoded: t.decoded.values(),
        rate: t.rate().map(fmt_ratio),
        association_sums: answer_bounds_check(&t, &config).sums,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn histogram_json(q: u32, k: usize, n: usize, l: usize, leaky: bool) -> Result<String, String> {
    let (config, code) = instance(q, k, n, l)?;
    let verdict = if leaky {
        exhaustive_privacy(&SplitScheme::new(config), DEMO_BUDGET)
    } else {
        let scheme = CapacityScheme::new(config, code).map_err(|e| e.to_string())?;
        exhaustive_privacy(&scheme, DEMO_BUDGET)
    }
    .map_err(|e| e.to_string())?;
    let views = verdict
        .distribution
        .counts
        .iter()
        .map(|c| {
            c.iter()
                .map(|(view, count)| {
                    let cells: Vec<String> = view
                        .iter()
                        .map(|p| {
                            if p.is_empty() {
                                "-".to_string()
                            } else {
                                p.iter().map(|x| x.value().to_string()).collect::<Vec<_>>().join("+")
                            }
                        })
                        .collect();
                    (cells.join(" "), *count)
                })
                .collect()
        })
        .collect();
    let out = Histogram {
        pass: verdict.pass,
        expected_count: verdict.expected_count,
        identical_across_d: verdict.identical_across_d,
        views,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn sweep(k: usize, m: &str, l: usize, n_min: usize, n_max: usize) -> Result<String, JsValue> {
    sweep_json(k, m, l, n_min, n_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn deliver_round(q: u32, k: usize, n: usize, l: usize, d: usize, seed: u32) -> Result<String, JsValue> {
    deliver_json(q, k, n, l, d, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn answer_histogram(q: u32, k: usize, n: usize, l: usize, leaky: bool) -> Result<String, JsValue> {
    histogram_json(q, k, n, l, leaky).map_err(|e| JsValue::from_str(&e))
}
