//! Acceptance criteria. Each test prints one `ACCEPTANCE <n> ... PASS|FAIL`
//! line before asserting.

use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use pid_core::analysis::{
    capacity_coded, answer_bounds_check, randomness_sizes, rate_subset, uncoded_bounds, valid_l,
};
use pid_core::config::Instance;
use pid_core::protocol::{deliver, deliver_with, random_messages};
use pid_core::schemes::{SplitScheme, SubsetScheme};
use pid_core::sim::{byte_accounting, simulate, Execution};
use pid_core::verify::{exhaustive_correctness, exhaustive_privacy, DEFAULT_BUDGET};
use pid_core::{CapacityScheme, CodePair, DeliveryScheme, FieldElement, Message, Modulus, PidConfig, Rational};

const WORKED_RUNTIME: Duration = Duration::from_secs(1);
const EXHAUSTIVE_RUNTIME: Duration = Duration::from_secs(60);
const EXHAUSTIVE_CASES: u128 = 234_375;
const PRIVACY_COUNT: u64 = 625;
const MIN_CAPACITY_INSTANCES: usize = 20;
const SIM_INSTANCES: usize = 1000;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn r(p: u64, q: u64) -> Rational {
    Ratio::new(p, q)
}

fn worked() -> Instance {
    Instance::parse(include_str!("../../cli/presets/paper-5a.cfg")).unwrap()
}

fn small() -> Instance {
    Instance::parse(include_str!("../../cli/presets/example-1.cfg")).unwrap()
}

/// `sum_j row[j] * x[j]` mod `q` from plain integers.
fn dot(q: i64, row: &[i64], x: &[u32]) -> u32 {
    row.iter().zip(x).map(|(a, b)| a * *b as i64).sum::<i64>().rem_euclid(q) as u32
}

fn msg(m: Modulus, v: &[u32]) -> Message {
    Message::new(v.iter().map(|x| m.element(*x as i64)).collect()).unwrap()
}

fn els(m: Modulus, v: &[u32]) -> Vec<FieldElement> {
    v.iter().map(|x| m.element(*x as i64)).collect()
}

#[test]
fn criterion_1_worked_example_golden() {
    let start = Instant::now();
    let inst = worked();
    let m = inst.config.modulus();
    let scheme = CapacityScheme::new(inst.config.clone(), inst.code.clone()).unwrap();
    let mut ok = true;

    let printed_h = vec![vec![1, 1, 1, 1, 1, 1], vec![1, 2, 3, 4, 5, 6], vec![1, 4, 9, 5, 3, 3]];
    ok &= inst.code.h().to_rows() == printed_h;

    // Printed storage coefficients for the two server groups.
    let first: [[i64; 3]; 3] = [[3, 3, -5], [-3, 4, -1], [1, 4, -5]];
    let second: [[i64; 3]; 3] = [[4, 0, -5], [-2, -1, -1], [-1, 1, -5]];
    // Printed share coefficients of u_1, u_2, u_3 per server.
    let shares: [[i64; 3]; 6] = [[3, 3, -5], [8, 4, -1], [1, 4, -5], [7, 0, 5], [2, 1, 1], [1, -1, 5]];
    // Printed decoding of H A in terms of C_{1,1..3}.
    let decode_rows: [[i64; 3]; 3] = [[1, 1, 1], [1, 2, 3], [1, 4, -2]];

    let mut rng = ChaCha20Rng::seed_from_u64(0xa11ce);
    for _ in 0..1000 {
        let w: Vec<Vec<u32>> = (0..8).map(|_| (0..3).map(|_| rng.gen_range(0..11)).collect()).collect();
        let u: Vec<u32> = (0..3).map(|_| rng.gen_range(0..11)).collect();
        let messages: Vec<Message> = w.iter().map(|x| msg(m, x)).collect();
        let storage = scheme.store(&messages, &els(m, &u)).unwrap();

        for k in 1..=8 {
            let rows = if k <= 4 { &first } else { &second };
            let base = if k <= 4 { 0 } else { 3 };
            for l in 0..3 {
                let expected = dot(11, &rows[l], &w[k - 1]);
                ok &= storage[base + l].coded[&k] == vec![m.element(expected as i64)];
            }
        }
        for n in 0..6 {
            ok &= storage[n].share == Some(m.element(dot(11, &shares[n], &u) as i64));
        }

        let t = deliver_with(&scheme, &messages, &els(m, &u), 1).unwrap();
        let c1: Vec<u32> = (0..3).map(|l| dot(11, &first[l], &w[0])).collect();
        for n in 0..6 {
            let mask = dot(11, &shares[n], &u);
            let expected = if n < 3 { (c1[n] + mask) % 11 } else { mask };
            ok &= t.answers[n] == vec![m.element(expected as i64)];
        }
        let via_c: Vec<u32> = decode_rows.iter().map(|row| dot(11, row, &c1)).collect();
        ok &= via_c == w[0];
        ok &= t.decoded.values() == w[0];
        ok &= t.rate() == Some(r(1, 2));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < WORKED_RUNTIME;
    report(1, "worked example golden", ok, &format!("1000 draws, {elapsed:?}"));
    assert!(ok);
}

#[test]
fn criterion_2_small_example_golden() {
    let inst = small();
    let m = inst.config.modulus();
    let scheme = CapacityScheme::new(inst.config.clone(), inst.code.clone()).unwrap();
    let mut ok = true;

    // Printed encodings C_{k,1}, C_{k,2} as rows over (W_{k,1}, W_{k,2}).
    let enc: [[[i64; 2]; 2]; 3] = [[[2, 4], [4, 1]], [[3, 4], [3, 1]], [[4, 2], [2, 3]]];
    // Printed storage table: (server, message, position) for every coded symbol.
    let placement = [(1, 1, 0), (2, 1, 1), (2, 2, 0), (3, 2, 1), (1, 3, 0), (3, 3, 1)];
    // Printed transmission rows: share multiplier of u per server and D.
    let share_mult = [1u32, 3, 1];
    let holds: [[bool; 3]; 3] = [[true, true, false], [false, true, true], [true, false, true]];
    let dec: [[i64; 3]; 2] = [[1, 1, 1], [1, 2, 3]];

    let mut cases = 0u64;
    for code in 0..5u32.pow(7) {
        let mut digits = [0u32; 7];
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = c % 5;
            c /= 5;
        }
        let w: Vec<Vec<u32>> = (0..3).map(|k| digits[2 * k..2 * k + 2].to_vec()).collect();
        let u = digits[6];
        let messages: Vec<Message> = w.iter().map(|x| msg(m, x)).collect();
        let storage = scheme.store(&messages, &[m.element(u as i64)]).unwrap();
        for &(server, k, pos) in &placement {
            let expected = dot(5, &enc[k - 1][pos], &w[k - 1]);
            ok &= storage[server - 1].coded[&k] == vec![m.element(expected as i64)];
        }
        for d in 1..=3 {
            let t = deliver_with(&scheme, &messages, &[m.element(u as i64)], d).unwrap();
            let mut pos = 0;
            let mut a = [0u32; 3];
            for n in 0..3 {
                let mask = share_mult[n] * u % 5;
                a[n] = if holds[d - 1][n] {
                    let c = dot(5, &enc[d - 1][pos], &w[d - 1]);
                    pos += 1;
                    (c + mask) % 5
                } else {
                    mask
                };
                ok &= t.answers[n] == vec![m.element(a[n] as i64)];
            }
            let decoded: Vec<u32> = dec.iter().map(|row| dot(5, row, &a)).collect();
            ok &= decoded == w[d - 1];
            ok &= t.decoded.values() == w[d - 1];
            cases += 1;
        }
    }
    report(2, "small example golden", ok, &format!("{cases} (W, u, D) checked"));
    assert!(ok);
}

#[test]
fn criterion_3_exhaustive_correctness() {
    let inst = small();
    let scheme = CapacityScheme::new(inst.config, inst.code).unwrap();
    let start = Instant::now();
    let v = exhaustive_correctness(&scheme, DEFAULT_BUDGET).unwrap();
    let elapsed = start.elapsed();
    let ok = v.pass && v.cases == EXHAUSTIVE_CASES && elapsed < EXHAUSTIVE_RUNTIME;
    report(3, "exhaustive correctness", ok, &format!("{} cases, {elapsed:?}", v.cases));
    assert!(ok);
}

#[test]
fn criterion_4_exhaustive_privacy() {
    let inst = small();
    let scheme = CapacityScheme::new(inst.config, inst.code).unwrap();
    let v = exhaustive_privacy(&scheme, DEFAULT_BUDGET).unwrap();
    let every_vector = v.distribution.counts.iter().all(|c| {
        c.len() == 125 && c.values().all(|n| *n == PRIVACY_COUNT)
    });
    let ok = v.pass && v.expected_count == PRIVACY_COUNT && every_vector && v.identical_across_d;
    report(
        4,
        "exhaustive privacy",
        ok,
        &format!("expected count {}, identical across d: {}", v.expected_count, v.identical_across_d),
    );
    assert!(ok);
}

#[test]
fn criterion_5_capacity_equality() {
    let primes = [2u64, 3, 5, 7, 11, 13];
    let mut checked = 0;
    let mut ok = true;
    for n in 1..=8usize {
        let q = *primes.iter().find(|p| **p as usize >= n).unwrap();
        let f = Modulus::new(q).unwrap();
        for k in 1..=8usize {
            for l in valid_l(k, n) {
                let config = PidConfig::canonical(f, k, n, l).unwrap();
                let code = CodePair::vandermonde(f, n, l, None).unwrap();
                let scheme = CapacityScheme::new(config.clone(), code).unwrap();
                let m = r(k as u64, n as u64);
                let messages = random_messages(f, k, l, (k * 100 + n * 10 + l) as u64);
                for d in 1..=k {
                    let t = deliver(&scheme, &messages, d, d as u64).unwrap();
                    let bounds = answer_bounds_check(&t, &config);
                    ok &= t.decoded == messages[d - 1];
                    ok &= t.rate() == Some(r(l as u64, n as u64));
                    ok &= t.rate() == Some(m * r(l as u64, k as u64));
                    ok &= capacity_coded(k, n, m, l).ok() == t.rate();
                    ok &= bounds.tight && bounds.within_converse() && bounds.rate == Some(bounds.converse);
                }
                checked += 1;
            }
        }
    }
    ok &= checked >= MIN_CAPACITY_INSTANCES;
    report(5, "capacity equality", ok, &format!("{checked} instances"));
    assert!(ok);
}

#[test]
fn criterion_6_spare_server_scheme() {
    let mut ok = true;
    let f = Modulus::new(7).unwrap();
    let scheme = SubsetScheme::new(f, 6, 5, r(2, 1), 2).unwrap();
    let messages = random_messages(f, 6, 2, 6);
    for d in 1..=6 {
        for seed in 0..20 {
            let t = deliver(&scheme, &messages, d, seed).unwrap();
            ok &= t.decoded == messages[d - 1];
            ok &= t.t_n() == vec![1, 1, 1, 0, 0];
            ok &= t.rate() == Some(r(2, 3));
        }
    }
    ok &= rate_subset(6, 5, r(2, 1), 2).unwrap() == r(2, 3);
    let privacy = exhaustive_privacy(&SubsetScheme::new(Modulus::new(3).unwrap(), 3, 4, r(1, 1), 1).unwrap(), DEFAULT_BUDGET);
    ok &= privacy.map(|p| p.identical_across_d).unwrap_or(false);

    let f = Modulus::new(11).unwrap();
    let scheme = SubsetScheme::new(f, 8, 6, r(3, 1), 3).unwrap();
    let messages = random_messages(f, 8, 3, 8);
    for d in 1..=8 {
        let t = deliver(&scheme, &messages, d, d as u64).unwrap();
        ok &= t.decoded == messages[d - 1];
        ok &= t.t_n() == vec![1, 1, 1, 0, 0, 0];
        ok &= t.rate() == Some(r(1, 1));
    }
    ok &= rate_subset(8, 6, r(3, 1), 3).unwrap() == r(1, 1);
    report(6, "spare server scheme", ok, "(6,2,5,2) -> 2/3, (8,3,6,3) -> 1");
    assert!(ok);
}

const TABLE: &str = "\
2 | 2,4 | 3,6 | 4,8 | 9 | 5,10 | 6,12 | 7,14 | 15 | 8,16 | 9,18 | 10,20 | 21 | 11,22 | 12,24
3 | 4 | 2,4,6 | 8 | 3,6,9 | 10 | 4,8,12 | 14 | [5:5:15] | 16 | 6,12,18 | 20 | 7,14,21 | 22 | [8:8:24]
4 | [4] | 3,6 | [2:2:8] | 9 | 5,10 | [3:3:12] | 7,14 | 15 | [4:4:16] | 9,18 | [5:5:20] | 21 | 11,22 | [6:6:24]
5 | 4 | 6 | 8 | 9 | [2:2:10] | 12 | 14 | [3:3:15] | 16 | 18 | [4:4:20] | 21 | 22 | 24
6 | 2,4 | [6] | 4,8 | 3,6,9 | 5,10 | [2:2:12] | 7,14 | [5:5:15] | 8,16 | [3:3:18] | 10,20 | 7,14,21 | 11,22 | [4:4:24]
7 | 4 | 6 | 8 | 9 | 10 | 12 | [2:2:14] | 15 | 16 | 18 | 20 | [3:3:21] | 22 | 24
8 | [4] | 3,6 | [8] | 9 | 5,10 | [3:3:12] | 7,14 | 15 | [2:2:16] | 9,18 | [5:5:20] | 21 | 11,22 | [3:3:24]
9 | 4 | 2,4,6 | 8 | [9] | 10 | 4,8,12 | 14 | [5:5:15] | 16 | [2:2:18] | 20 | 7,14,21 | 22 | [8:8:24]
10 | 2,4 | 3,6 | 4,8 | 9 | [10] | 6,12 | 7,14 | [3:3:15] | 8,16 | 9,18 | [2:2:20] | 21 | 11,22 | 12,24
11 | 4 | 6 | 8 | 9 | 10 | 12 | 14 | 15 | 16 | 18 | 20 | 21 | [2:2:22] | 24
12 | [4] | [6] | [2:2:8] | 3,6,9 | 5,10 | [12] | 7,14 | [5:5:15] | [4:4:16] | [3:3:18] | [5:5:20] | 7,14,21 | 11,22 | [2:2:24]
13 | 4 | 6 | 8 | 9 | 10 | 12 | 14 | 15 | 16 | 18 | 20 | 21 | 22 | 24
14 | 2,4 | 3,6 | 4,8 | 9 | 5,10 | 6,12 | [14] | 15 | 8,16 | 9,18 | 10,20 | [3:3:21] | 11,22 | 12,24
15 | 4 | 2,4,6 | 8 | 3,6,9 | [2:2:10] | 4,8,12 | 14 | [15] | 16 | 6,12,18 | [4:4:20] | 7,14,21 | 22 | [8:8:24]
16 | [4] | 3,6 | [8] | 9 | 5,10 | [3:3:12] | 7,14 | 15 | [16] | 9,18 | [5:5:20] | 21 | 11,22 | [3:3:24]
17 | 4 | 6 | 8 | 9 | 10 | 12 | 14 | 15 | 16 | 18 | 20 | 21 | 22 | 24
18 | 2,4 | [6] | 4,8 | [9] | 5,10 | [2:2:12] | 7,14 | [5:5:15] | 8,16 | [18] | 10,20 | 7,14,21 | 11,22 | [4:4:24]
19 | 4 | 6 | 8 | 9 | 10 | 12 | 14 | 15 | 16 | 18 | 20 | 21 | 22 | 24
20 | [4] | 3,6 | [2:2:8] | 9 | [10] | [3:3:12] | 7,14 | [3:3:15] | [4:4:16] | 9,18 | [20] | 21 | 11,22 | [6:6:24]
21 | 4 | 2,4,6 | 8 | 3,6,9 | 10 | 4,8,12 | [2:2:14] | [5:5:15] | 16 | 6,12,18 | 20 | [21] | 22 | [8:8:24]
22 | 2,4 | 3,6 | 4,8 | 9 | 5,10 | 6,12 | 7,14 | 15 | 8,16 | 9,18 | 10,20 | 21 | [22] | 12,24
23 | 4 | 6 | 8 | 9 | 10 | 12 | 14 | 15 | 16 | 18 | 20 | 21 | 22 | 24
24 | [4] | [6] | [8] | 3,6,9 | 5,10 | [12] | 7,14 | [5:5:15] | [2:2:16] | [3:3:18] | [5:5:20] | 7,14,21 | 11,22 | [24]";

const TABLE_N: [usize; 14] = [4, 6, 8, 9, 10, 12, 14, 15, 16, 18, 20, 21, 22, 24];

/// `[b]` is `1..=b`, `[a:s:b]` a progression, otherwise a comma list.
fn expand(cell: &str) -> Vec<usize> {
    if let Some(inner) = cell.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
        let parts: Vec<usize> = inner.split(':').map(|p| p.parse().unwrap()).collect();
        match parts.as_slice() {
            [b] => (1..=*b).collect(),
            [a, s, b] => (*a..=*b).step_by(*s).collect(),
            _ => panic!("bad cell {cell}"),
        }
    } else {
        cell.split(',').map(|p| p.parse().unwrap()).collect()
    }
}

#[test]
fn criterion_7_l_table() {
    let mut ok = true;
    for k in 1..=24usize {
        for n in 1..=24usize {
            let brute: Vec<usize> = (1..=n).filter(|l| (k * l) % n == 0).collect();
            ok &= valid_l(k, n) == brute;
        }
    }
    let mut cells = 0;
    for line in TABLE.lines() {
        let mut parts = line.split(" | ");
        let k: usize = parts.next().unwrap().parse().unwrap();
        for (n, cell) in TABLE_N.iter().zip(parts) {
            ok &= valid_l(k, *n) == expand(cell);
            cells += 1;
        }
    }
    ok &= cells == 322;
    report(7, "L table", ok, &format!("brute force K,N <= 24 and {cells} cited cells"));
    assert!(ok);
}

#[test]
fn criterion_8_comparison_identities() {
    let mut ok = true;
    let coded = capacity_coded(12, 6, r(2, 1), 4).unwrap();
    let (lo, hi) = uncoded_bounds(12, 6, 2).unwrap();
    ok &= coded == r(2, 3) && coded == r(4, 1) * r(2, 12);
    ok &= lo == r(1, 6) && hi == r(1, 6);
    ok &= coded == r(4, 1) * hi;
    ok &= randomness_sizes(12, 6, r(2, 1), 4).unwrap().0 == r(1, 2);
    ok &= randomness_sizes(8, 6, r(4, 3), 3).unwrap() == (r(1, 1), r(1, 3));
    report(8, "comparison identities", ok, "2/3 vs 1/6, eta 1/2; eta 1, eta_n 1/3");
    assert!(ok);
}

#[test]
fn criterion_9_negative_control() {
    let inst = small();
    let split = SplitScheme::new(inst.config);
    let c = exhaustive_correctness(&split, DEFAULT_BUDGET).unwrap();
    let p = exhaustive_privacy(&split, DEFAULT_BUDGET).unwrap();
    let ok = c.pass && !p.pass && !p.identical_across_d;
    report(
        9,
        "negative control",
        ok,
        &format!("correctness {}, privacy {}", c.pass, p.pass),
    );
    assert!(ok);
}

#[test]
fn criterion_10_simulator_equivalence() {
    let primes = [2u64, 3, 5, 7, 11, 13, 17];
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let mut ok = true;
    for i in 0..SIM_INSTANCES {
        let n = rng.gen_range(1..=8usize);
        let k = rng.gen_range(1..=8usize);
        let ls = valid_l(k, n);
        let l = ls[rng.gen_range(0..ls.len())];
        let candidates: Vec<u64> = primes.iter().copied().filter(|p| *p as usize >= n).collect();
        let f = Modulus::new(candidates[rng.gen_range(0..candidates.len())]).unwrap();
        let config = PidConfig::canonical(f, k, n, l).unwrap();
        let code = CodePair::vandermonde(f, n, l, None).unwrap();
        let scheme = CapacityScheme::new(config, code).unwrap();
        let messages = random_messages(f, k, l, i as u64);
        let d = rng.gen_range(1..=k);
        let seed = rng.gen();
        let lib = deliver(&scheme, &messages, d, seed).unwrap();
        let execution = if i % 10 == 0 { Execution::Threaded } else { Execution::Sequential };
        let a = simulate(&scheme, &messages, d, seed, execution).unwrap();
        let b = simulate(&scheme, &messages, d, seed, Execution::Sequential).unwrap();
        ok &= a.transcript == lib;
        ok &= a.log.to_bytes() == b.log.to_bytes();
        ok &= byte_accounting(&a.log).map(|acc| Some(acc.rate) == lib.rate()).unwrap_or(false);
    }
    report(10, "simulator equivalence", ok, &format!("{SIM_INSTANCES} instances"));
    assert!(ok);
}
