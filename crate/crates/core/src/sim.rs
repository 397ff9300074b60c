//! Message-passing simulation of one delivery round.
//!
//! A coordinator deals storage and shares, N server actors answer from
//! their local state only, and a user client decodes. Every exchange is a
//! serialized [`Frame`] passed through a [`Router`] that enforces who may
//! talk to whom, so a server cannot see another server's state or the
//! messages themselves once setup is done.
//!
//! Wire format of a frame (all integers little-endian):
//!
//! ```text
//! kind: u8 | sender: u16 | payload_len: u32 (bytes) | payload: u32 symbols
//! ```
//!
//! A frame log file is the 8-byte magic `PIDSIM01` followed by records
//! `record_len: u32 | receiver: u16 | frame bytes`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::mpsc;

use num_rational::Ratio;

use crate::code::CodePair;
use crate::error::{Error, Result};
use crate::field::{FieldElement, Modulus};
use crate::protocol::{
    seeded_randomness, CapacityScheme, DeliveryScheme, DeliveryTranscript, Message, PidConfig, Rational,
    ServerState,
};

pub const COORDINATOR: u16 = 0;
pub const USER: u16 = 0xFFFF;
/// Receiver id for frames addressed to the log only.
pub const LOG: u16 = 0xFFFE;
pub const LOG_MAGIC: &[u8; 8] = b"PIDSIM01";
pub const HEADER_BYTES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FrameKind {
    SetupStorage = 1,
    SetupShare = 2,
    DeliverCmd = 3,
    Answer = 4,
    DecodeResult = 5,
}

impl TryFrom<u8> for FrameKind {
    type Error = Error;

    fn try_from(v: u8) -> Result<FrameKind> {
        Ok(match v {
            1 => FrameKind::SetupStorage,
            2 => FrameKind::SetupShare,
            3 => FrameKind::DeliverCmd,
            4 => FrameKind::Answer,
            5 => FrameKind::DecodeResult,
            other => return Err(Error::Frame(format!("unknown frame kind {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub sender: u16,
    pub payload: Vec<u32>,
}

impl Frame {
    pub fn new(kind: FrameKind, sender: u16, payload: Vec<u32>) -> Frame {
        Frame { kind, sender, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 4 * self.payload.len());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&((4 * self.payload.len()) as u32).to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Frame(format!("{} bytes is shorter than a header", bytes.len())));
        }
        let kind = FrameKind::try_from(bytes[0])?;
        let sender = u16::from_le_bytes([bytes[1], bytes[2]]);
        let len = u32::from_le_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]) as usize;
        let body = &bytes[HEADER_BYTES..];
        if len != body.len() || len % 4 != 0 {
            return Err(Error::Frame(format!(
                "payload length {len} does not match {} body bytes",
                body.len()
            )));
        }
        let payload = body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Frame { kind, sender, payload })
    }
}

fn elements(modulus: Modulus, values: &[u32]) -> Result<Vec<FieldElement>> {
    values.iter().map(|v| FieldElement::from_reduced(*v, modulus)).collect()
}

fn values(symbols: &[FieldElement]) -> Vec<u32> {
    symbols.iter().map(|s| s.value()).collect()
}

/// A frame together with the actor it was routed to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Routed {
    pub receiver: u16,
    pub frame: Frame,
}

/// Every frame of one round, in routing order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameLog {
    pub records: Vec<Routed>,
}

impl FrameLog {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = LOG_MAGIC.to_vec();
        for r in &self.records {
            let frame = r.frame.encode();
            out.extend_from_slice(&((2 + frame.len()) as u32).to_le_bytes());
            out.extend_from_slice(&r.receiver.to_le_bytes());
            out.extend_from_slice(&frame);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FrameLog> {
        let rest = bytes
            .strip_prefix(LOG_MAGIC.as_slice())
            .ok_or_else(|| Error::Frame("missing PIDSIM01 magic".into()))?;
        let mut records = Vec::new();
        let mut at = 0;
        while at < rest.len() {
            if rest.len() - at < 6 {
                return Err(Error::Frame("truncated record header".into()));
            }
            let len = u32::from_le_bytes(rest[at..at + 4].try_into().expect("4 bytes")) as usize;
            at += 4;
            if len < 2 || rest.len() - at < len {
                return Err(Error::Frame(format!("record of {len} bytes overruns the log")));
            }
            let receiver = u16::from_le_bytes([rest[at], rest[at + 1]]);
            let frame = Frame::decode(&rest[at + 2..at + len])?;
            records.push(Routed { receiver, frame });
            at += len;
        }
        Ok(FrameLog { records })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(mut r: impl Read) -> Result<FrameLog> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Frame(e.to_string()))?;
        FrameLog::from_bytes(&bytes)
    }

    /// The user's view: ANSWER payloads in server order.
    pub fn user_view(&self, modulus: Modulus) -> Result<Vec<Vec<FieldElement>>> {
        let mut by_server = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.frame.kind == FrameKind::Answer) {
            by_server.insert(r.frame.sender, elements(modulus, &r.frame.payload)?);
        }
        Ok(by_server.into_values().collect())
    }
}

/// Admits only coordinator-to-server setup and command frames,
/// server-to-user answers, and the user's decode result.
#[derive(Debug)]
pub struct Router {
    servers: u16,
    log: FrameLog,
}

impl Router {
    pub fn new(servers: usize) -> Result<Router> {
        if servers == 0 || servers >= LOG as usize {
            return Err(Error::InvalidParameters(format!("{servers} servers cannot be addressed")));
        }
        Ok(Router { servers: servers as u16, log: FrameLog::default() })
    }

    fn is_server(&self, id: u16) -> bool {
        (1..=self.servers).contains(&id)
    }

    /// Checks the route and the payload schema, serializes the frame and
    /// returns what the receiver will parse.
    pub fn route(&mut self, receiver: u16, frame: Frame) -> Result<Frame> {
        let allowed = match frame.kind {
            FrameKind::SetupStorage | FrameKind::SetupShare | FrameKind::DeliverCmd => {
                frame.sender == COORDINATOR && self.is_server(receiver)
            }
            FrameKind::Answer => self.is_server(frame.sender) && receiver == USER,
            FrameKind::DecodeResult => frame.sender == USER && receiver == LOG,
        };
        if !allowed {
            return Err(Error::ProtocolViolation(format!(
                "{:?} frame from {} to {} is not a permitted route",
                frame.kind, frame.sender, receiver
            )));
        }
        let schema_ok = match frame.kind {
            FrameKind::SetupStorage => frame.payload.len() % 2 == 0,
            FrameKind::SetupShare => frame.payload.len() <= 1,
            FrameKind::DeliverCmd => frame.payload.len() == 1,
            FrameKind::Answer | FrameKind::DecodeResult => true,
        };
        if !schema_ok {
            return Err(Error::ProtocolViolation(format!(
                "{:?} frame with {} payload symbols",
                frame.kind,
                frame.payload.len()
            )));
        }
        let wire = frame.encode();
        let delivered = Frame::decode(&wire)?;
        self.log.records.push(Routed { receiver, frame: delivered.clone() });
        Ok(delivered)
    }

    pub fn into_log(self) -> FrameLog {
        self.log
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitStorage,
    AwaitShare,
    Ready,
    Answered,
}

/// One server. After setup its only input is the delivered index.
#[derive(Debug)]
pub struct ServerActor {
    id: u16,
    modulus: Modulus,
    messages: usize,
    state: ServerState,
    phase: Phase,
}

impl ServerActor {
    pub fn new(id: u16, modulus: Modulus, messages: usize) -> ServerActor {
        ServerActor {
            id,
            modulus,
            messages,
            state: ServerState::empty(id as usize),
            phase: Phase::AwaitStorage,
        }
    }

    fn violation(&self, frame: &Frame) -> Error {
        Error::ProtocolViolation(format!(
            "server {} got {:?} from {} while in {:?}",
            self.id, frame.kind, frame.sender, self.phase
        ))
    }

    /// Consumes one inbound frame; returns the answer once commanded.
    pub fn handle(&mut self, frame: Frame) -> Result<Option<Frame>> {
        if frame.sender != COORDINATOR {
            return Err(self.violation(&frame));
        }
        match (self.phase, frame.kind) {
            (Phase::AwaitStorage, FrameKind::SetupStorage) => {
                for pair in frame.payload.chunks_exact(2) {
                    let k = pair[0] as usize;
                    if k == 0 || k > self.messages {
                        return Err(Error::ProtocolViolation(format!("storage for message {k}")));
                    }
                    let symbol = FieldElement::from_reduced(pair[1], self.modulus)?;
                    self.state.coded.entry(k).or_default().push(symbol);
                }
                self.phase = Phase::AwaitShare;
                Ok(None)
            }
            (Phase::AwaitShare, FrameKind::SetupShare) => {
                self.state.share = match frame.payload.as_slice() {
                    [] => None,
                    [u] => Some(FieldElement::from_reduced(*u, self.modulus)?),
                    _ => return Err(self.violation(&frame)),
                };
                self.phase = Phase::Ready;
                Ok(None)
            }
            (Phase::Ready, FrameKind::DeliverCmd) => {
                let d = frame.payload[0] as usize;
                if d == 0 || d > self.messages {
                    return Err(Error::IndexOutOfRange { d, k: self.messages });
                }
                self.phase = Phase::Answered;
                let answer = values(&self.state.answer(d));
                Ok(Some(Frame::new(FrameKind::Answer, self.id, answer)))
            }
            _ => Err(self.violation(&frame)),
        }
    }
}

/// How the server actors are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// One thread per server; answers are gathered in server order.
    Threaded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    pub transcript: DeliveryTranscript,
    pub log: FrameLog,
}

fn storage_payload(state: &ServerState) -> Vec<u32> {
    state
        .coded
        .iter()
        .flat_map(|(k, symbols)| symbols.iter().flat_map(move |s| [*k as u32, s.value()]))
        .collect()
}

/// One round with an explicit randomness vector.
pub fn simulate_with<S: DeliveryScheme + ?Sized>(
    scheme: &S,
    messages: &[Message],
    randomness: &[FieldElement],
    d: usize,
    execution: Execution,
) -> Result<Simulation> {
    let (m, k, n) = (scheme.modulus(), scheme.messages(), scheme.servers());
    if d == 0 || d > k {
        return Err(Error::IndexOutOfRange { d, k });
    }
    let mut router = Router::new(n)?;
    let dealt = scheme.store(messages, randomness)?;

    let mut inbox: Vec<Vec<Frame>> = Vec::with_capacity(n);
    for (i, state) in dealt.iter().enumerate() {
        let id = (i + 1) as u16;
        let share: Vec<u32> = state.share.iter().map(|u| u.value()).collect();
        inbox.push(vec![
            router.route(id, Frame::new(FrameKind::SetupStorage, COORDINATOR, storage_payload(state)))?,
            router.route(id, Frame::new(FrameKind::SetupShare, COORDINATOR, share))?,
        ]);
    }
    for (i, frames) in inbox.iter_mut().enumerate() {
        let cmd = Frame::new(FrameKind::DeliverCmd, COORDINATOR, vec![d as u32]);
        frames.push(router.route((i + 1) as u16, cmd)?);
    }

    let run = |id: u16, frames: Vec<Frame>| -> Result<Frame> {
        let mut actor = ServerActor::new(id, m, k);
        let mut out = None;
        for f in frames {
            out = actor.handle(f)?;
        }
        out.ok_or_else(|| Error::ProtocolViolation(format!("server {id} never answered")))
    };
    let answers: Vec<Frame> = match execution {
        Execution::Sequential => inbox
            .into_iter()
            .enumerate()
            .map(|(i, frames)| run((i + 1) as u16, frames))
            .collect::<Result<_>>()?,
        Execution::Threaded => {
            let (tx, rx) = mpsc::channel();
            std::thread::scope(|scope| {
                for (i, frames) in inbox.into_iter().enumerate() {
                    let tx = tx.clone();
                    let run = &run;
                    scope.spawn(move || {
                        let _ = tx.send((i, run((i + 1) as u16, frames)));
                    });
                }
            });
            drop(tx);
            let mut gathered: Vec<(usize, Result<Frame>)> = rx.into_iter().collect();
            gathered.sort_by_key(|(i, _)| *i);
            gathered.into_iter().map(|(_, r)| r).collect::<Result<_>>()?
        }
    };

    let mut view = Vec::with_capacity(n);
    for a in answers {
        let received = router.route(USER, a)?;
        view.push(elements(m, &received.payload)?);
    }
    let decoded = scheme.decode(&view)?;
    router.route(LOG, Frame::new(FrameKind::DecodeResult, USER, values(decoded.symbols())))?;
    Ok(Simulation {
        transcript: DeliveryTranscript {
            d,
            answers: view,
            decoded,
            message_len: scheme.message_len(),
            seed: None,
        },
        log: router.into_log(),
    })
}

/// One round with randomness drawn exactly as [`crate::protocol::deliver`]
/// draws it.
pub fn simulate<S: DeliveryScheme + ?Sized>(
    scheme: &S,
    messages: &[Message],
    d: usize,
    seed: u64,
    execution: Execution,
) -> Result<Simulation> {
    let u = seeded_randomness(scheme.modulus(), scheme.randomness_len(), seed);
    let mut sim = simulate_with(scheme, messages, &u, d, execution)?;
    sim.transcript.seed = Some(seed);
    Ok(sim)
}

/// The capacity scheme counterpart of [`crate::protocol::run_delivery`].
pub fn simulate_round(
    config: &PidConfig,
    code: &CodePair,
    messages: &[Message],
    d: usize,
    seed: u64,
) -> Result<Simulation> {
    config.check_index(d)?;
    let scheme = CapacityScheme::new(config.clone(), code.clone())?;
    simulate(&scheme, messages, d, seed, Execution::Sequential)
}

/// Transmission accounting from a frame log. Headers are not part of
/// `T_n`; they are reported separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteAccounting {
    /// `T_n` in symbols, indexed by server id minus one.
    pub t_n: Vec<usize>,
    pub payload_bytes: Vec<usize>,
    pub header_bytes: usize,
    pub message_len: usize,
    pub rate: Rational,
}

pub fn byte_accounting(log: &FrameLog) -> Result<ByteAccounting> {
    let answers: Vec<&Frame> = log
        .records
        .iter()
        .map(|r| &r.frame)
        .filter(|f| f.kind == FrameKind::Answer)
        .collect();
    let result = log
        .records
        .iter()
        .find(|r| r.frame.kind == FrameKind::DecodeResult)
        .ok_or_else(|| Error::Frame("log has no decode result".into()))?;
    let servers = answers.iter().map(|f| f.sender as usize).max().unwrap_or(0);
    let mut t_n = vec![0; servers];
    for f in &answers {
        t_n[f.sender as usize - 1] += f.payload.len();
    }
    let total: usize = t_n.iter().sum();
    if total == 0 {
        return Err(Error::Frame("no answer symbols were transmitted".into()));
    }
    let message_len = result.frame.payload.len();
    Ok(ByteAccounting {
        payload_bytes: t_n.iter().map(|t| 4 * t).collect(),
        t_n,
        header_bytes: answers.len() * HEADER_BYTES,
        message_len,
        rate: Ratio::new(message_len as u64, total as u64),
    })
}
