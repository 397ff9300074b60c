//! Delivery schemes other than the capacity scheme: full message
//! splitting, the server-subset construction for spare servers, the
//! unmasked split layout (correct but leaky), and a fault-injection
//! wrapper.

use num_rational::Ratio;

use crate::code::CodePair;
use crate::error::{Error, Result};
use crate::field::{FieldElement, Modulus};
use crate::protocol::{
    deliver, CapacityScheme, DeliveryScheme, DeliveryTranscript, Message, PidConfig, Rational,
    ServerState,
};

fn check_messages(scheme: &dyn DeliveryScheme, messages: &[Message]) -> Result<()> {
    if messages.len() != scheme.messages() {
        return Err(Error::InvalidParameters(format!(
            "{} messages given for K={}",
            messages.len(),
            scheme.messages()
        )));
    }
    for (i, w) in messages.iter().enumerate() {
        if w.len() != scheme.message_len() {
            return Err(Error::InvalidParameters(format!(
                "message {} has {} symbols, expected {}",
                i + 1,
                w.len(),
                scheme.message_len()
            )));
        }
        if let Some(s) = w.symbols().iter().find(|s| s.modulus() != scheme.modulus()) {
            return Err(Error::ModulusMismatch {
                left: scheme.modulus().get(),
                right: s.modulus().get(),
            });
        }
    }
    Ok(())
}

fn no_randomness(randomness: &[FieldElement]) -> Result<()> {
    if !randomness.is_empty() {
        return Err(Error::Dimension(format!(
            "scheme uses no randomness, {} symbols given",
            randomness.len()
        )));
    }
    Ok(())
}

/// Every server stores `len / N` consecutive symbols of every message and
/// broadcasts its part of `W_d`. Rate 1, no randomness.
#[derive(Debug, Clone)]
pub struct FullyDistributedScheme {
    modulus: Modulus,
    k: usize,
    n: usize,
    len: usize,
}

impl FullyDistributedScheme {
    pub fn new(modulus: Modulus, k: usize, n: usize, len: usize) -> Result<Self> {
        if k == 0 || n == 0 || len == 0 {
            return Err(Error::InvalidParameters("K, N and message length must be positive".into()));
        }
        if len % n != 0 {
            return Err(Error::InvalidParameters(format!(
                "message length {len} is not divisible by N={n}"
            )));
        }
        Ok(FullyDistributedScheme { modulus, k, n, len })
    }

    fn part(&self) -> usize {
        self.len / self.n
    }
}

impl DeliveryScheme for FullyDistributedScheme {
    fn modulus(&self) -> Modulus {
        self.modulus
    }

    fn messages(&self) -> usize {
        self.k
    }

    fn message_len(&self) -> usize {
        self.len
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn randomness_len(&self) -> usize {
        0
    }

    fn store(&self, messages: &[Message], randomness: &[FieldElement]) -> Result<Vec<ServerState>> {
        check_messages(self, messages)?;
        no_randomness(randomness)?;
        let p = self.part();
        Ok((1..=self.n)
            .map(|s| {
                let mut state = ServerState::empty(s);
                for (i, w) in messages.iter().enumerate() {
                    state.coded.insert(i + 1, w.symbols()[(s - 1) * p..s * p].to_vec());
                }
                state
            })
            .collect())
    }

    fn decode(&self, view: &[Vec<FieldElement>]) -> Result<Message> {
        if view.len() != self.n || view.iter().any(|p| p.len() != self.part()) {
            return Err(Error::ProtocolViolation(format!(
                "expected {} payloads of {} symbols",
                self.n,
                self.part()
            )));
        }
        Message::new(view.concat())
    }
}

/// Uncoded split storage: `W_{k,l}` is kept as-is at server `f_k(l)`, and
/// only servers in `N_d` transmit. Correct at rate 1, but the set of
/// silent servers reveals `N_d`.
#[derive(Debug, Clone)]
pub struct SplitScheme {
    config: PidConfig,
}

impl SplitScheme {
    pub fn new(config: PidConfig) -> Self {
        SplitScheme { config }
    }
}

impl DeliveryScheme for SplitScheme {
    fn modulus(&self) -> Modulus {
        self.config.modulus()
    }

    fn messages(&self) -> usize {
        self.config.messages()
    }

    fn message_len(&self) -> usize {
        self.config.message_len()
    }

    fn servers(&self) -> usize {
        self.config.servers()
    }

    fn randomness_len(&self) -> usize {
        0
    }

    fn store(&self, messages: &[Message], randomness: &[FieldElement]) -> Result<Vec<ServerState>> {
        check_messages(self, messages)?;
        no_randomness(randomness)?;
        let mut storage: Vec<ServerState> =
            (1..=self.config.servers()).map(ServerState::empty).collect();
        for (i, w) in messages.iter().enumerate() {
            for (pos, symbol) in w.symbols().iter().enumerate() {
                let server = self.config.server_for(i + 1, pos + 1);
                storage[server - 1].coded.insert(i + 1, vec![*symbol]);
            }
        }
        Ok(storage)
    }

    fn decode(&self, view: &[Vec<FieldElement>]) -> Result<Message> {
        let symbols: Vec<FieldElement> = view.concat();
        if symbols.len() != self.config.message_len() {
            return Err(Error::ProtocolViolation(format!(
                "received {} symbols, expected {}",
                symbols.len(),
                self.config.message_len()
            )));
        }
        Message::new(symbols)
    }
}

#[derive(Debug, Clone)]
enum ActiveScheme {
    Capacity(CapacityScheme),
    Full(FullyDistributedScheme),
}

impl ActiveScheme {
    fn as_dyn(&self) -> &dyn DeliveryScheme {
        match self {
            ActiveScheme::Capacity(s) => s,
            ActiveScheme::Full(s) => s,
        }
    }
}

/// Spare-server construction for `N > K/M`: the first `s = ceil(K/M)`
/// servers run the bi-regular scheme for `(K, s, K/s, L)` (or full
/// splitting when `L >= s`) and the remaining `N - s` servers stay silent.
#[derive(Debug, Clone)]
pub struct SubsetScheme {
    n: usize,
    active: usize,
    inner: ActiveScheme,
}

/// `ceil(K / M)`.
pub fn active_servers(k: usize, m: Rational) -> Result<usize> {
    if *m.numer() == 0 {
        return Err(Error::InvalidParameters("M must be positive".into()));
    }
    let ratio = Ratio::from_integer(k as u64) / m;
    Ok(ratio.ceil().to_integer() as usize)
}

impl SubsetScheme {
    pub fn new(modulus: Modulus, k: usize, n: usize, m: Rational, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidParameters("K and L must be positive".into()));
        }
        let s = active_servers(k, m)?;
        if n <= s {
            return Err(Error::InvalidParameters(format!(
                "subset scheme needs N > ceil(K/M) = {s}, got N={n}; use the capacity scheme"
            )));
        }
        if (k * l) % s != 0 {
            return Err(Error::InvalidParameters(format!(
                "K*L/ceil(K/M) = {}/{s} is not an integer",
                k * l
            )));
        }
        let inner = if l >= s {
            ActiveScheme::Full(FullyDistributedScheme::new(modulus, k, s, l)?)
        } else {
            let config = PidConfig::canonical(modulus, k, s, l)?;
            let code = CodePair::vandermonde(modulus, s, l, None)?;
            ActiveScheme::Capacity(CapacityScheme::new(config, code)?)
        };
        Ok(SubsetScheme { n, active: s, inner })
    }

    /// Number of transmitting servers.
    pub fn active(&self) -> usize {
        self.active
    }
}

impl DeliveryScheme for SubsetScheme {
    fn modulus(&self) -> Modulus {
        self.inner.as_dyn().modulus()
    }

    fn messages(&self) -> usize {
        self.inner.as_dyn().messages()
    }

    fn message_len(&self) -> usize {
        self.inner.as_dyn().message_len()
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn randomness_len(&self) -> usize {
        self.inner.as_dyn().randomness_len()
    }

    fn store(&self, messages: &[Message], randomness: &[FieldElement]) -> Result<Vec<ServerState>> {
        let mut storage = self.inner.as_dyn().store(messages, randomness)?;
        storage.extend((self.active + 1..=self.n).map(ServerState::empty));
        Ok(storage)
    }

    fn decode(&self, view: &[Vec<FieldElement>]) -> Result<Message> {
        if view.len() != self.n {
            return Err(Error::ProtocolViolation(format!(
                "{} payloads for {} servers",
                view.len(),
                self.n
            )));
        }
        if view[self.active..].iter().any(|p| !p.is_empty()) {
            return Err(Error::ProtocolViolation("a spare server transmitted".into()));
        }
        self.inner.as_dyn().decode(&view[..self.active])
    }
}

/// Adds `delta` to one stored symbol of the wrapped scheme.
#[derive(Debug, Clone)]
pub struct Corrupted<S> {
    pub inner: S,
    pub server: usize,
    pub message: usize,
    pub delta: FieldElement,
}

impl<S: DeliveryScheme> DeliveryScheme for Corrupted<S> {
    fn modulus(&self) -> Modulus {
        self.inner.modulus()
    }

    fn messages(&self) -> usize {
        self.inner.messages()
    }

    fn message_len(&self) -> usize {
        self.inner.message_len()
    }

    fn servers(&self) -> usize {
        self.inner.servers()
    }

    fn randomness_len(&self) -> usize {
        self.inner.randomness_len()
    }

    fn store(&self, messages: &[Message], randomness: &[FieldElement]) -> Result<Vec<ServerState>> {
        let mut storage = self.inner.store(messages, randomness)?;
        let slot = storage
            .get_mut(self.server.wrapping_sub(1))
            .and_then(|s| s.coded.get_mut(&self.message))
            .and_then(|v| v.first_mut())
            .ok_or_else(|| {
                Error::InvalidParameters(format!(
                    "server {} stores nothing for message {}",
                    self.server, self.message
                ))
            })?;
        *slot = *slot + self.delta;
        Ok(storage)
    }

    fn decode(&self, view: &[Vec<FieldElement>]) -> Result<Message> {
        self.inner.decode(view)
    }
}

/// Delivery with `N - ceil(K/M)` silent servers.
pub fn run_subset_scheme(
    k: usize,
    n: usize,
    m: Rational,
    l: usize,
    messages: &[Message],
    d: usize,
    seed: u64,
) -> Result<DeliveryTranscript> {
    let modulus = messages
        .first()
        .and_then(|w| w.symbols().first())
        .map(|s| s.modulus())
        .ok_or_else(|| Error::InvalidParameters("no messages".into()))?;
    let scheme = SubsetScheme::new(modulus, k, n, m, l)?;
    deliver(&scheme, messages, d, seed)
}

/// Full splitting across all `N` servers.
pub fn run_fully_distributed(
    k: usize,
    n: usize,
    messages: &[Message],
    d: usize,
) -> Result<DeliveryTranscript> {
    let first = messages
        .first()
        .ok_or_else(|| Error::InvalidParameters("no messages".into()))?;
    let modulus = first
        .symbols()
        .first()
        .map(|s| s.modulus())
        .ok_or_else(|| Error::InvalidParameters("empty message".into()))?;
    let scheme = FullyDistributedScheme::new(modulus, k, n, first.len())?;
    let mut t = deliver(&scheme, messages, d, 0)?;
    t.seed = None;
    Ok(t)
}
