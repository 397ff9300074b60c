//! The delivery protocol over coded storage.
//!
//! Message `W_k` (length `L`) is associated to a set `N_k` of `L` servers.
//! It is stored as `C_k = H_{N_k}^{-1} W_k`, with `C_{k,l}` at the `l`-th
//! smallest server of `N_k`. A uniform `U` in `F_q^{N-L}` is drawn once and
//! server `n` keeps the share `g_n^T U`. To deliver `W_D`, server `n` sends
//! `C_{D,l} + U_n` if it holds a symbol of `W_D` and `U_n` otherwise; the
//! user recovers `W_D = H A` without knowing `D`.
//!
//! `L` is both the message length and the association degree.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::code::CodePair;
use crate::error::{Error, Result};
use crate::field::{FieldElement, Modulus};
use crate::matrix::FieldMatrix;

pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssociationMode {
    BiregularCanonical,
    Explicit,
}

impl fmt::Display for AssociationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssociationMode::BiregularCanonical => "biregular-canonical",
            AssociationMode::Explicit => "explicit",
        })
    }
}

/// Parameters `(q, K, N, L)` together with the association `N_1..N_K`.
///
/// Server and message indices are 1-based throughout the public API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PidConfig {
    modulus: Modulus,
    k: usize,
    n: usize,
    l: usize,
    association: Vec<Vec<usize>>,
    mode: AssociationMode,
}

/// Per-server storage as an exact `(symbols, L)` pair; `M = symbols / L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageLoad {
    pub symbols_per_server: usize,
    pub message_len: usize,
}

impl StorageLoad {
    pub fn messages(self) -> Rational {
        Ratio::new(self.symbols_per_server as u64, self.message_len as u64)
    }
}

/// Association degrees allowed by `N | K L`.
pub fn biregular_degrees(k: usize, n: usize) -> Vec<usize> {
    let step = n / k.gcd(&n);
    (1..=n / step).map(|i| i * step).collect()
}

fn check_dimensions(modulus: Modulus, k: usize, n: usize, l: usize) -> Result<()> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidParameters(format!("need K, N >= 1 (K={k}, N={n})")));
    }
    if l == 0 || l > n {
        return Err(Error::InvalidParameters(format!("need 1 <= L <= N (L={l}, N={n})")));
    }
    if (modulus.get() as usize) < n {
        return Err(Error::InvalidParameters(format!("need q >= N (q={modulus}, N={n})")));
    }
    Ok(())
}

impl PidConfig {
    /// Cyclic block association `N_k = { ((k-1) L + i) mod N + 1 : i < L }`.
    pub fn canonical(modulus: Modulus, k: usize, n: usize, l: usize) -> Result<PidConfig> {
        check_dimensions(modulus, k, n, l)?;
        if (k * l) % n != 0 {
            let allowed = biregular_degrees(k, n);
            return Err(Error::InvalidParameters(format!(
                "bi-regular association needs N | K*L (K={k}, N={n}, L={l}); \
                 L must lie in [N/gcd(N,K) : N/gcd(N,K) : N] = {allowed:?}"
            )));
        }
        let association = (0..k)
            .map(|m| {
                let mut set: Vec<usize> = (0..l).map(|i| (m * l + i) % n + 1).collect();
                set.sort_unstable();
                set
            })
            .collect();
        Ok(PidConfig {
            modulus,
            k,
            n,
            l,
            association,
            mode: AssociationMode::BiregularCanonical,
        })
    }

    /// User-supplied association. Each set must name `L` distinct servers
    /// in `1..=N`; servers need not carry equal loads.
    pub fn explicit(
        modulus: Modulus,
        k: usize,
        n: usize,
        l: usize,
        sets: Vec<Vec<usize>>,
    ) -> Result<PidConfig> {
        check_dimensions(modulus, k, n, l)?;
        if sets.len() != k {
            return Err(Error::InvalidAssociation(format!(
                "{} sets given for K={k} messages",
                sets.len()
            )));
        }
        let mut association = Vec::with_capacity(k);
        for (i, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.len() != l {
                return Err(Error::InvalidAssociation(format!(
                    "message {} has {} distinct servers, expected L={l}",
                    i + 1,
                    set.len()
                )));
            }
            if let Some(bad) = set.iter().find(|s| **s == 0 || **s > n) {
                return Err(Error::InvalidAssociation(format!(
                    "message {} names server {bad}, outside 1..={n}",
                    i + 1
                )));
            }
            association.push(set);
        }
        Ok(PidConfig { modulus, k, n, l, association, mode: AssociationMode::Explicit })
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn messages(&self) -> usize {
        self.k
    }

    pub fn servers(&self) -> usize {
        self.n
    }

    pub fn message_len(&self) -> usize {
        self.l
    }

    pub fn mode(&self) -> AssociationMode {
        self.mode
    }

    pub fn association(&self) -> &[Vec<usize>] {
        &self.association
    }

    /// `N_k`, ascending.
    pub fn servers_of(&self, k: usize) -> &[usize] {
        &self.association[k - 1]
    }

    /// `f_k(l)`: the server holding the `l`-th coded symbol of message `k`.
    pub fn server_for(&self, k: usize, l: usize) -> usize {
        self.association[k - 1][l - 1]
    }

    /// `f_k^-(n)`, or `None` when server `n` is not associated to `k`.
    pub fn position_of(&self, k: usize, server: usize) -> Option<usize> {
        self.association[k - 1].binary_search(&server).ok().map(|i| i + 1)
    }

    /// `K_n`: messages associated to server `n`.
    pub fn messages_at(&self, server: usize) -> Vec<usize> {
        (1..=self.k).filter(|k| self.position_of(*k, server).is_some()).collect()
    }

    pub fn is_biregular(&self) -> bool {
        let first = self.messages_at(1).len();
        (2..=self.n).all(|s| self.messages_at(s).len() == first)
    }

    pub fn storage_load(&self) -> StorageLoad {
        let symbols = (1..=self.n).map(|s| self.messages_at(s).len()).max().unwrap_or(0);
        StorageLoad { symbols_per_server: symbols, message_len: self.l }
    }

    pub fn check_index(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.k {
            return Err(Error::IndexOutOfRange { d, k: self.k });
        }
        Ok(())
    }
}

/// One message `W_k` in `F_q^L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    symbols: Vec<FieldElement>,
}

impl Message {
    pub fn new(symbols: Vec<FieldElement>) -> Result<Message> {
        if let Some(first) = symbols.first() {
            if let Some(bad) = symbols.iter().find(|s| s.modulus() != first.modulus()) {
                return Err(Error::ModulusMismatch {
                    left: first.modulus().get(),
                    right: bad.modulus().get(),
                });
            }
        }
        Ok(Message { symbols })
    }

    pub fn from_values(modulus: Modulus, values: &[i64]) -> Message {
        Message { symbols: values.iter().map(|v| modulus.element(*v)).collect() }
    }

    pub fn zero(modulus: Modulus, len: usize) -> Message {
        Message { symbols: vec![modulus.zero(); len] }
    }

    pub fn symbols(&self) -> &[FieldElement] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn values(&self) -> Vec<u32> {
        self.symbols.iter().map(|s| s.value()).collect()
    }
}

/// `K` messages of `len` uniform symbols from the seeded generator.
pub fn random_messages(modulus: Modulus, k: usize, len: usize, seed: u64) -> Vec<Message> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| Message { symbols: draw_symbols(modulus, len, &mut rng) })
        .collect()
}

pub(crate) fn draw_symbols<R: Rng>(modulus: Modulus, len: usize, rng: &mut R) -> Vec<FieldElement> {
    (0..len)
        .map(|_| modulus.element(rng.gen_range(0..modulus.get()) as i64))
        .collect()
}

/// What one server keeps: coded symbols per associated message and an
/// optional randomness share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerState {
    pub server: usize,
    pub coded: BTreeMap<usize, Vec<FieldElement>>,
    pub share: Option<FieldElement>,
}

impl ServerState {
    pub fn empty(server: usize) -> ServerState {
        ServerState { server, coded: BTreeMap::new(), share: None }
    }

    pub fn stored_symbols(&self) -> usize {
        self.coded.values().map(Vec::len).sum()
    }

    /// `A_n^d`, computed from this server's state alone: its symbols of
    /// `W_d` masked by the share, or the bare share when it holds none.
    pub fn answer(&self, d: usize) -> Vec<FieldElement> {
        match (self.coded.get(&d), self.share) {
            (Some(symbols), Some(u)) => symbols.iter().map(|c| *c + u).collect(),
            (Some(symbols), None) => symbols.clone(),
            (None, Some(u)) => vec![u],
            (None, None) => Vec::new(),
        }
    }
}

/// `U` and the per-server shares `G^T U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedRandomness {
    pub u: Vec<FieldElement>,
    pub shares: Vec<FieldElement>,
}

impl SharedRandomness {
    pub fn from_vector(code: &CodePair, u: Vec<FieldElement>) -> Result<SharedRandomness> {
        let m = code.modulus();
        let shares = if code.g().rows() == 0 {
            if !u.is_empty() {
                return Err(Error::Dimension(format!("{} randomness symbols for L = N", u.len())));
            }
            vec![m.zero(); code.len()]
        } else {
            code.g().transpose().mul_vec(&u)?
        };
        Ok(SharedRandomness { u, shares })
    }
}

/// Draws `U` uniformly from `F_q^{N-L}`.
///
/// The generator is ChaCha20 seeded with `seed_from_u64(seed)`, and each
/// symbol is `gen_range(0..q)` taken in order `u_1, ..., u_{N-L}`.
pub fn draw_randomness(code: &CodePair, seed: u64) -> SharedRandomness {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let u = draw_symbols(code.modulus(), code.len() - code.checks(), &mut rng);
    SharedRandomness::from_vector(code, u).expect("length matches generator rows")
}

/// A seed for the randomness generator, fixed or taken from OS entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seed {
    Fixed(u64),
    Entropy,
}

impl Seed {
    /// The concrete seed; entropy mode samples one so it can be recorded.
    pub fn resolve(self) -> u64 {
        match self {
            Seed::Fixed(s) => s,
            Seed::Entropy => rand::rngs::OsRng.next_u64(),
        }
    }
}

fn check_messages(modulus: Modulus, k: usize, len: usize, messages: &[Message]) -> Result<()> {
    if messages.len() != k {
        return Err(Error::InvalidParameters(format!(
            "{} messages given for K={k}",
            messages.len()
        )));
    }
    for (i, w) in messages.iter().enumerate() {
        if w.len() != len {
            return Err(Error::InvalidParameters(format!(
                "message {} has {} symbols, expected {len}",
                i + 1,
                w.len()
            )));
        }
        if let Some(s) = w.symbols().iter().find(|s| s.modulus() != modulus) {
            return Err(Error::ModulusMismatch { left: modulus.get(), right: s.modulus().get() });
        }
    }
    Ok(())
}

/// Encodes every message and places its symbols; shares are left unset.
pub fn encode_storage(
    config: &PidConfig,
    code: &CodePair,
    messages: &[Message],
) -> Result<Vec<ServerState>> {
    CapacityScheme::new(config.clone(), code.clone())?.encode(messages)
}

/// Installs `U_n` at every server.
pub fn assign_shares(storage: &mut [ServerState], randomness: &SharedRandomness) -> Result<()> {
    if storage.len() != randomness.shares.len() {
        return Err(Error::Dimension(format!(
            "{} servers but {} shares",
            storage.len(),
            randomness.shares.len()
        )));
    }
    for (state, share) in storage.iter_mut().zip(&randomness.shares) {
        state.share = Some(*share);
    }
    Ok(())
}

/// The answer vector `A^d`, one payload per server.
pub fn answer(storage: &[ServerState], d: usize) -> Vec<Vec<FieldElement>> {
    storage.iter().map(|s| s.answer(d)).collect()
}

/// `H A`. Takes no knowledge of the delivered index.
pub fn decode(code: &CodePair, answers: &[FieldElement]) -> Result<Message> {
    if answers.len() != code.len() {
        return Err(Error::Dimension(format!(
            "{} answers for a length-{} code",
            answers.len(),
            code.len()
        )));
    }
    Message::new(code.h().mul_vec(answers)?)
}

/// Output of one delivery as seen by the protocol designer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryTranscript {
    pub d: usize,
    /// Payload sent by each server, in server order.
    pub answers: Vec<Vec<FieldElement>>,
    pub decoded: Message,
    pub message_len: usize,
    pub seed: Option<u64>,
}

impl DeliveryTranscript {
    /// `T_n` in `F_q` symbols.
    pub fn t_n(&self) -> Vec<usize> {
        self.answers.iter().map(Vec::len).collect()
    }

    pub fn total_transmitted(&self) -> usize {
        self.answers.iter().map(Vec::len).sum()
    }

    /// `L / sum T_n`; `None` when nothing was transmitted.
    pub fn rate(&self) -> Option<Rational> {
        let total = self.total_transmitted() as u64;
        (total > 0).then(|| Ratio::new(self.message_len as u64, total))
    }

    /// `key=value` lines: index, seed, each server's payload, `T_n`, and
    /// the decoded message.
    pub fn render(&self) -> String {
        let join = |v: &[FieldElement]| v.iter().map(|s| s.value().to_string()).collect::<Vec<_>>().join(",");
        let mut out = format!("D={}\n", self.d);
        if let Some(seed) = self.seed {
            out += &format!("seed={seed}\n");
        }
        for (n, a) in self.answers.iter().enumerate() {
            out += &format!("A_{}={}\n", n + 1, join(a));
        }
        let t: Vec<String> = self.t_n().iter().map(|t| t.to_string()).collect();
        out += &format!("T_n={}\n", t.join(","));
        out += &format!("decoded={}\n", join(self.decoded.symbols()));
        out
    }
}

/// A one-round delivery scheme described by what each server stores and
/// how the user decodes.
pub trait DeliveryScheme {
    fn modulus(&self) -> Modulus;
    fn messages(&self) -> usize;
    fn message_len(&self) -> usize;
    fn servers(&self) -> usize;
    /// Number of shared random symbols drawn per setup.
    fn randomness_len(&self) -> usize;
    /// Builds every server's local state from the messages and randomness.
    fn store(&self, messages: &[Message], randomness: &[FieldElement]) -> Result<Vec<ServerState>>;
    /// Recovers the delivered message from the user's view.
    fn decode(&self, view: &[Vec<FieldElement>]) -> Result<Message>;
}

/// Runs one delivery with the given randomness vector.
pub fn deliver_with<S: DeliveryScheme + ?Sized>(
    scheme: &S,
    messages: &[Message],
    randomness: &[FieldElement],
    d: usize,
) -> Result<DeliveryTranscript> {
    if d == 0 || d > scheme.messages() {
        return Err(Error::IndexOutOfRange { d, k: scheme.messages() });
    }
    let storage = scheme.store(messages, randomness)?;
    let answers = answer(&storage, d);
    let decoded = scheme.decode(&answers)?;
    Ok(DeliveryTranscript { d, answers, decoded, message_len: scheme.message_len(), seed: None })
}

/// The `len` shared random symbols [`deliver`] uses for `seed`: ChaCha20
/// seeded with `seed_from_u64`, one `gen_range(0..q)` per symbol.
pub fn seeded_randomness(modulus: Modulus, len: usize, seed: u64) -> Vec<FieldElement> {
    draw_symbols(modulus, len, &mut ChaCha20Rng::seed_from_u64(seed))
}

/// Runs one delivery, drawing randomness from `seed`.
pub fn deliver<S: DeliveryScheme + ?Sized>(
    scheme: &S,
    messages: &[Message],
    d: usize,
    seed: u64,
) -> Result<DeliveryTranscript> {
    let u = seeded_randomness(scheme.modulus(), scheme.randomness_len(), seed);
    let mut t = deliver_with(scheme, messages, &u, d)?;
    t.seed = Some(seed);
    Ok(t)
}

/// The capacity-achieving scheme at rate `L / N`.
#[derive(Debug, Clone)]
pub struct CapacityScheme {
    config: PidConfig,
    code: CodePair,
    /// `H_{N_k}^{-1}` per message.
    inverses: Vec<FieldMatrix>,
}

impl CapacityScheme {
    pub fn new(config: PidConfig, code: CodePair) -> Result<CapacityScheme> {
        if code.modulus() != config.modulus() {
            return Err(Error::ModulusMismatch {
                left: config.modulus().get(),
                right: code.modulus().get(),
            });
        }
        if code.len() != config.servers() || code.checks() != config.message_len() {
            return Err(Error::InvalidParameters(format!(
                "code is {}x{}, config needs L={} by N={}",
                code.checks(),
                code.len(),
                config.message_len(),
                config.servers()
            )));
        }
        let mut cache: HashMap<&[usize], FieldMatrix> = HashMap::new();
        let mut inverses = Vec::with_capacity(config.messages());
        for set in config.association() {
            if !cache.contains_key(set.as_slice()) {
                let cols: Vec<usize> = set.iter().map(|s| s - 1).collect();
                let inv = code.block_inverse(&cols).map_err(|e| match e {
                    Error::Singular => Error::InvalidCode(format!(
                        "H restricted to servers {set:?} is singular; code is corrupt"
                    )),
                    e => e,
                })?;
                cache.insert(set, inv);
            }
            inverses.push(cache[set.as_slice()].clone());
        }
        Ok(CapacityScheme { config, code, inverses })
    }

    pub fn config(&self) -> &PidConfig {
        &self.config
    }

    pub fn code(&self) -> &CodePair {
        &self.code
    }

    /// Coded storage without shares.
    pub fn encode(&self, messages: &[Message]) -> Result<Vec<ServerState>> {
        let c = &self.config;
        check_messages(c.modulus(), c.messages(), c.message_len(), messages)?;
        let mut storage: Vec<ServerState> = (1..=c.servers()).map(ServerState::empty).collect();
        for (i, w) in messages.iter().enumerate() {
            let coded = self.inverses[i].mul_vec(w.symbols())?;
            for (pos, symbol) in coded.into_iter().enumerate() {
                let server = c.server_for(i + 1, pos + 1);
                storage[server - 1].coded.insert(i + 1, vec![symbol]);
            }
        }
        Ok(storage)
    }
}

impl DeliveryScheme for CapacityScheme {
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
        self.code.len() - self.code.checks()
    }

    fn store(&self, messages: &[Message], randomness: &[FieldElement]) -> Result<Vec<ServerState>> {
        let mut storage = self.encode(messages)?;
        let shared = SharedRandomness::from_vector(&self.code, randomness.to_vec())?;
        assign_shares(&mut storage, &shared)?;
        Ok(storage)
    }

    fn decode(&self, view: &[Vec<FieldElement>]) -> Result<Message> {
        let symbols = view
            .iter()
            .enumerate()
            .map(|(i, p)| match p.as_slice() {
                [a] => Ok(*a),
                _ => Err(Error::ProtocolViolation(format!(
                    "server {} sent {} symbols, expected 1",
                    i + 1,
                    p.len()
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        decode(&self.code, &symbols)
    }
}

/// Encodes, distributes randomness from `seed`, answers and decodes.
pub fn run_delivery(
    config: &PidConfig,
    code: &CodePair,
    messages: &[Message],
    d: usize,
    seed: u64,
) -> Result<DeliveryTranscript> {
    config.check_index(d)?;
    let scheme = CapacityScheme::new(config.clone(), code.clone())?;
    deliver(&scheme, messages, d, seed)
}
