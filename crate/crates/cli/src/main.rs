use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pid_core::analysis::{format_l_cell, parse_ratio, rate_report, sweep_csv, sweep_rate_vs_n, valid_l};
use pid_core::config::{Instance, InstanceFile};
use pid_core::protocol::{deliver, random_messages};
use pid_core::schemes::{Corrupted, SplitScheme};
use pid_core::sim::{byte_accounting, simulate, Execution};
use pid_core::verify::{exhaustive_correctness, exhaustive_privacy, randomized_privacy_probe, DEFAULT_BUDGET};
use pid_core::{CapacityScheme, DeliveryScheme, Error, FieldMatrix, Message, ServerState};

#[derive(Parser)]
#[command(name = "pid", version, about = "Private information delivery over coded storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config and write code, messages and storage tables.
    Setup {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Deliver one message and print the transcript and rate report.
    Deliver {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check correctness and privacy, exhaustively or by sampling.
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long, conflicts_with = "probe")]
        exhaustive: bool,
        /// Number of sampled trials.
        #[arg(long)]
        probe: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SchemeKind::Capacity)]
        scheme: SchemeKind,
        /// Add one to a stored symbol, given as SERVER:MESSAGE.
        #[arg(long)]
        corrupt: Option<String>,
    },
    /// Rate against the number of servers, as CSV.
    Sweep {
        #[arg(long)]
        k: usize,
        /// Storage per server in messages, e.g. 2 or 4/3.
        #[arg(long)]
        m: String,
        #[arg(long)]
        l: usize,
        /// Inclusive range `a..b`.
        #[arg(long)]
        n: String,
    },
    /// Allowed association degrees `L` for ranges of `K` and `N`.
    TableL {
        #[arg(long)]
        k: String,
        #[arg(long)]
        n: String,
    },
    /// Run one round through the frame-level simulator.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threaded: bool,
        /// Where to write the binary frame log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// Config file or a directory written by `setup`.
    #[arg(long, alias = "config")]
    instance: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeKind {
    Capacity,
    /// Unmasked split storage; correct but not private.
    Split,
}

enum Failure {
    Validation(String),
    Verification,
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::BudgetExceeded { required, budget } => Failure::Budget(format!(
                "exhaustive check needs {required} evaluations, budget is {budget}; \
                 raise PID_BUDGET or use --probe"
            )),
            e => Failure::Validation(e.to_string()),
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Validation(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<(Instance, Option<Vec<Message>>), Failure> {
    let (cfg, dir) = if path.is_dir() { (path.join("instance.cfg"), Some(path)) } else { (path.to_path_buf(), None) };
    let text = fs::read_to_string(&cfg).map_err(|e| io(&cfg, e))?;
    let inst = Instance::parse(&text).map_err(|e| Failure::Validation(format!("{}: {e}", cfg.display())))?;
    let stored = match dir.map(|d| d.join("messages.txt")).filter(|p| p.exists()) {
        Some(p) => Some(parse_messages(&inst, &fs::read_to_string(&p).map_err(|e| io(&p, e))?)?),
        None => None,
    };
    Ok((inst, stored))
}

fn messages_for(inst: &Instance, stored: Option<Vec<Message>>) -> Vec<Message> {
    stored.or_else(|| inst.messages.clone()).unwrap_or_else(|| {
        let c = &inst.config;
        random_messages(c.modulus(), c.messages(), c.message_len(), inst.seed.unwrap_or(0))
    })
}

fn render_messages(messages: &[Message]) -> String {
    messages
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let v: Vec<String> = w.values().iter().map(|x| x.to_string()).collect();
            format!("W_{}={}\n", i + 1, v.join(","))
        })
        .collect()
}

fn parse_messages(inst: &Instance, text: &str) -> Result<Vec<Message>, Failure> {
    let m = inst.config.modulus();
    let rows: Vec<Message> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (_, v) = l.split_once('=').ok_or_else(|| Failure::Validation(format!("bad message line `{l}`")))?;
            let vals = v
                .split(',')
                .map(|x| x.trim().parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Validation(format!("bad message line `{l}`: {e}")))?;
            Ok(Message::from_values(m, &vals))
        })
        .collect::<Result<_, Failure>>()?;
    if rows.len() != inst.config.messages() || rows.iter().any(|w| w.len() != inst.config.message_len()) {
        return Err(Failure::Validation("messages.txt does not match K and L".into()));
    }
    Ok(rows)
}

fn render_matrix(name: &str, m: &FieldMatrix) -> String {
    let mut out = format!("{name} {}x{}\n", m.rows(), m.cols());
    for row in m.to_rows() {
        let v: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out += &v.join(" ");
        out.push('\n');
    }
    out
}

fn render_storage(inst: &Instance, storage: &[ServerState]) -> String {
    let mut out = String::new();
    for s in storage {
        let mut parts: Vec<String> = Vec::new();
        for (k, symbols) in &s.coded {
            let pos = inst.config.position_of(*k, s.server).expect("stored only where associated");
            for v in symbols {
                parts.push(format!("C_{k},{pos}={}", v.value()));
            }
        }
        out += &format!("Z_{} {}\n", s.server, parts.join(" "));
    }
    out
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io(path, e))
}

fn range(s: &str) -> Result<std::ops::RangeInclusive<usize>, Failure> {
    let bad = || Failure::Validation(format!("`{s}` is not a range a..b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.trim_start_matches('=').parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn budget() -> Result<u128, Failure> {
    match std::env::var("PID_BUDGET") {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Validation(format!("PID_BUDGET=`{v}` is not a number"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn verify_scheme<S: DeliveryScheme + Sync>(
    scheme: &S,
    name: &str,
    exhaustive: bool,
    probe: Option<u64>,
    seed: u64,
) -> Result<(), Failure> {
    if let Some(trials) = probe {
        let p = randomized_privacy_probe(scheme, trials, seed)?;
        print!("{}", p.report(name));
        return if p.pattern_anomaly { Err(Failure::Verification) } else { Ok(()) };
    }
    if !exhaustive {
        return Err(Failure::Validation("choose --exhaustive or --probe N".into()));
    }
    let budget = budget()?;
    let c = exhaustive_correctness(scheme, budget)?;
    print!("{}", c.report(name));
    let p = exhaustive_privacy(scheme, budget)?;
    print!("{}", p.report(name));
    if c.pass && p.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Setup { config, output_dir } => {
            let text = fs::read_to_string(&config).map_err(|e| io(&config, e))?;
            let file = InstanceFile::parse(&text)?;
            let inst = file.validate()?;
            let scheme = CapacityScheme::new(inst.config.clone(), inst.code.clone())?;
            let messages = messages_for(&inst, None);
            let storage = scheme.encode(&messages)?;
            fs::create_dir_all(&output_dir).map_err(|e| io(&output_dir, e))?;
            write(&output_dir.join("instance.cfg"), &file.to_text())?;
            let code = render_matrix("H", inst.code.h()) + &render_matrix("G", inst.code.g());
            write(&output_dir.join("code.txt"), &code)?;
            write(&output_dir.join("messages.txt"), &render_messages(&messages))?;
            let table = render_storage(&inst, &storage);
            write(&output_dir.join("storage.txt"), &table)?;
            print!("{code}{table}");
            Ok(())
        }
        Command::Deliver { source, d, seed, output_dir } => {
            let (inst, stored) = load(&source.instance)?;
            let messages = messages_for(&inst, stored);
            let scheme = CapacityScheme::new(inst.config.clone(), inst.code.clone())?;
            let seed = seed.or(inst.seed).unwrap_or(0);
            let t = deliver(&scheme, &messages, d, seed)?;
            let mut report = rate_report(&inst.config, &t);
            report.reference = inst.reference_rate;
            let text = t.render();
            if let Some(dir) = output_dir.or_else(|| source.instance.is_dir().then(|| source.instance.clone())) {
                write(&dir.join("transcript.txt"), &text)?;
            }
            print!("{text}{}", report.render());
            Ok(())
        }
        Command::Verify { source, exhaustive, probe, seed, scheme, corrupt } => {
            let (inst, _) = load(&source.instance)?;
            let capacity = CapacityScheme::new(inst.config.clone(), inst.code.clone())?;
            let name = inst.name.clone();
            match (scheme, corrupt) {
                (SchemeKind::Capacity, None) => verify_scheme(&capacity, &name, exhaustive, probe, seed),
                (SchemeKind::Split, None) => {
                    verify_scheme(&SplitScheme::new(inst.config), &name, exhaustive, probe, seed)
                }
                (SchemeKind::Capacity, Some(spec)) => {
                    let bad = || Failure::Validation(format!("--corrupt `{spec}` is not SERVER:MESSAGE"));
                    let (s, k) = spec.split_once(':').ok_or_else(bad)?;
                    let (server, message) = (s.parse().map_err(|_| bad())?, k.parse().map_err(|_| bad())?);
                    if inst.config.position_of(message, server).is_none() {
                        return Err(Failure::Validation(format!("server {server} stores nothing of message {message}")));
                    }
                    let delta = inst.config.modulus().one();
                    let wrapped = Corrupted { inner: capacity, server, message, delta };
                    verify_scheme(&wrapped, &name, exhaustive, probe, seed)
                }
                (SchemeKind::Split, Some(_)) => Err(Failure::Validation("--corrupt applies to the capacity scheme".into())),
            }
        }
        Command::Sweep { k, m, l, n } => {
            let m = parse_ratio(&m).ok_or_else(|| Failure::Validation(format!("--m `{m}` is not p/q")))?;
            print!("{}", sweep_csv(&sweep_rate_vs_n(k, m, l, range(&n)?)));
            Ok(())
        }
        Command::TableL { k, n } => {
            let (ks, ns) = (range(&k)?, range(&n)?);
            let header: Vec<String> = ns.clone().map(|n| n.to_string()).collect();
            println!("K\\N | {}", header.join(" | "));
            for k in ks {
                let cells: Vec<String> = ns.clone().map(|n| format_l_cell(&valid_l(k, n))).collect();
                println!("{k} | {}", cells.join(" | "));
            }
            Ok(())
        }
        Command::Simulate { source, d, seed, threaded, log } => {
            let (inst, stored) = load(&source.instance)?;
            let messages = messages_for(&inst, stored);
            let scheme = CapacityScheme::new(inst.config.clone(), inst.code.clone())?;
            let seed = seed.or(inst.seed).unwrap_or(0);
            let execution = if threaded { Execution::Threaded } else { Execution::Sequential };
            let sim = simulate(&scheme, &messages, d, seed, execution)?;
            let acc = byte_accounting(&sim.log)?;
            if let Some(path) = log {
                write_bytes(&path, &sim.log.to_bytes())?;
            }
            let t: Vec<String> = acc.t_n.iter().map(|t| t.to_string()).collect();
            print!("{}", sim.transcript.render());
            println!("frames={}", sim.log.records.len());
            println!("answer_symbols={}", t.join(","));
            println!("answer_header_bytes={}", acc.header_bytes);
            println!("rate={}", pid_core::analysis::fmt_ratio(acc.rate));
            Ok(())
        }
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io(path, e))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => ExitCode::from(3),
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}
