//! Read access to on-chain state: runtime code, storage words and read-only
//! calls. Backed by a JSON-RPC endpoint, an offline snapshot file, or an
//! in-memory code map, and stackable so that the first layer holding an
//! answer wins.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::primitives::{decode_hex, encode_hex, Address, B256};
use crate::records::StorageSample;

pub const RPC_URL_ENV: &str = "USCSCAN_RPC_URL";

/// `keccak256("eip1967.proxy.implementation") - 1`
pub const IMPLEMENTATION_SLOT: B256 = B256(hex_literal(
    "360894a13ba1a3210667c828492db98dca3e2076cc3735a920a3ca505d382bbc",
));
/// `keccak256("eip1967.proxy.beacon") - 1`
pub const BEACON_SLOT: B256 = B256(hex_literal(
    "a3f0ad74e5423aebfd80d3ef4346578335a9a72aeaee59ff6cb3582b35133d50",
));
/// `keccak256("eip1967.proxy.admin") - 1`
pub const ADMIN_SLOT: B256 = B256(hex_literal(
    "b53127684a568b3173ae13b9f8a6016e243e63b6e8ee1178d6a717850b5d6103",
));

/// `implementation()`
pub const IMPLEMENTATION_ACCESSOR: [u8; 4] = [0x5c, 0x60, 0xda, 0x1b];

const fn hex_literal(s: &str) -> [u8; 32] {
    const fn nibble(c: u8) -> u8 {
        match c {
            b'0'..=b'9' => c - b'0',
            b'a'..=b'f' => c - b'a' + 10,
            _ => panic!("lowercase hex only"),
        }
    }
    let b = s.as_bytes();
    assert!(b.len() == 64);
    let mut out = [0u8; 32];
    let mut i = 0;
    while i < 32 {
        out[i] = (nibble(b[2 * i]) << 4) | nibble(b[2 * i + 1]);
        i += 1;
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    /// Network-level failure; worth retrying.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rpc error {code}: {message}")]
    Rpc { code: i64, message: String },
    /// The source has no answer for this query.
    #[error("not available: {0}")]
    Missing(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl StateError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, StateError::Transport(_))
    }
}

pub trait ChainState: Send + Sync {
    fn code(&self, address: &Address) -> Result<Vec<u8>, StateError>;
    fn storage(&self, address: &Address, slot: &B256) -> Result<B256, StateError>;
    fn call(&self, to: &Address, data: &[u8]) -> Result<Vec<u8>, StateError>;
}

/// Runtime code known up front, such as the corpus being scanned.
#[derive(Clone, Debug, Default)]
pub struct CodeMap(pub HashMap<Address, Vec<u8>>);

impl ChainState for CodeMap {
    fn code(&self, address: &Address) -> Result<Vec<u8>, StateError> {
        self.0.get(address).cloned().ok_or_else(|| StateError::Missing(format!("code of {address}")))
    }

    fn storage(&self, address: &Address, slot: &B256) -> Result<B256, StateError> {
        Err(StateError::Missing(format!("storage {slot} of {address}")))
    }

    fn call(&self, to: &Address, _data: &[u8]) -> Result<Vec<u8>, StateError> {
        Err(StateError::Missing(format!("call to {to}")))
    }
}

/// Offline state file:
///
/// ```json
/// {"code": {"0xaddr": "0x6080..."},
///  "storage": {"0xaddr": {"0xslot": "0xword"}},
///  "calls": {"0xaddr": {"0xcalldata": "0xreturn"}}}
/// ```
///
/// Accounts listed under `code` or `storage` read unlisted slots as zero.
/// Addresses absent from `code` are unknown, not empty; list EOAs with `"0x"`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    #[serde(default)]
    pub code: BTreeMap<Address, String>,
    #[serde(default)]
    pub storage: BTreeMap<Address, BTreeMap<B256, B256>>,
    #[serde(default)]
    pub calls: BTreeMap<Address, BTreeMap<String, String>>,
}

impl StateSnapshot {
    pub fn load(path: &Path) -> Result<Self, StateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StateError::Missing(format!("{}: {e}", path.display())))?;
        let snap: StateSnapshot =
            serde_json::from_str(&text).map_err(|e| StateError::Malformed(format!("{}: {e}", path.display())))?;
        for (addr, code) in &snap.code {
            decode_hex(code).map_err(|e| StateError::Malformed(format!("code of {addr}: {e}")))?;
        }
        Ok(snap)
    }

    pub fn set_code(&mut self, address: Address, code: &[u8]) {
        self.code.insert(address, encode_hex(code));
    }

    pub fn set_storage(&mut self, address: Address, slot: B256, word: B256) {
        self.storage.entry(address).or_default().insert(slot, word);
    }

    pub fn set_call(&mut self, to: Address, data: &[u8], ret: &[u8]) {
        self.calls.entry(to).or_default().insert(encode_hex(data), encode_hex(ret));
    }
}

impl ChainState for StateSnapshot {
    fn code(&self, address: &Address) -> Result<Vec<u8>, StateError> {
        let hex = self.code.get(address).ok_or_else(|| StateError::Missing(format!("code of {address}")))?;
        decode_hex(hex).map_err(|e| StateError::Malformed(e.to_string()))
    }

    fn storage(&self, address: &Address, slot: &B256) -> Result<B256, StateError> {
        match self.storage.get(address) {
            Some(words) => Ok(words.get(slot).copied().unwrap_or(B256::ZERO)),
            None if self.code.contains_key(address) => Ok(B256::ZERO),
            None => Err(StateError::Missing(format!("storage of {address}"))),
        }
    }

    fn call(&self, to: &Address, data: &[u8]) -> Result<Vec<u8>, StateError> {
        let ret = self
            .calls
            .get(to)
            .and_then(|c| c.get(&encode_hex(data)))
            .ok_or_else(|| StateError::Missing(format!("call to {to}")))?;
        decode_hex(ret).map_err(|e| StateError::Malformed(e.to_string()))
    }
}

/// Consults each layer in turn; a layer answering `Missing` defers to the next.
#[derive(Default)]
pub struct LayeredState {
    layers: Vec<Box<dyn ChainState>>,
}

impl LayeredState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: Box<dyn ChainState>) {
        self.layers.push(layer);
    }

    pub fn with(mut self, layer: impl ChainState + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }

    fn first<T>(&self, f: impl Fn(&dyn ChainState) -> Result<T, StateError>, what: String) -> Result<T, StateError> {
        for layer in &self.layers {
            match f(layer.as_ref()) {
                Err(StateError::Missing(_)) => continue,
                other => return other,
            }
        }
        Err(StateError::Missing(what))
    }
}

impl ChainState for LayeredState {
    fn code(&self, address: &Address) -> Result<Vec<u8>, StateError> {
        self.first(|l| l.code(address), format!("code of {address}"))
    }

    fn storage(&self, address: &Address, slot: &B256) -> Result<B256, StateError> {
        self.first(|l| l.storage(address, slot), format!("storage {slot} of {address}"))
    }

    fn call(&self, to: &Address, data: &[u8]) -> Result<Vec<u8>, StateError> {
        self.first(|l| l.call(to, data), format!("call to {to}"))
    }
}

#[derive(Clone, Debug)]
pub struct RpcConfig {
    pub url: String,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
    pub block: String,
}

impl RpcConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            max_attempts: 5,
            initial_backoff: Duration::from_millis(200),
            max_in_flight: 8,
            timeout: Duration::from_secs(30),
            block: "latest".to_string(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    Code(Address),
    Storage(Address, B256),
    Call(Address, Vec<u8>),
}

struct Semaphore {
    free: Mutex<usize>,
    cond: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cond.wait(free).unwrap();
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cond.notify_one();
    }
}

/// Blocking JSON-RPC client, shareable across threads.
pub struct RpcClient {
    config: RpcConfig,
    agent: ureq::Agent,
    next_id: AtomicU64,
    in_flight: Semaphore,
    cache: RwLock<HashMap<CacheKey, Vec<u8>>>,
}

impl RpcClient {
    pub fn new(config: RpcConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let in_flight = Semaphore { free: Mutex::new(config.max_in_flight.max(1)), cond: Condvar::new() };
        Self { config, agent, next_id: AtomicU64::new(1), in_flight, cache: RwLock::new(HashMap::new()) }
    }

    pub fn from_url(url: &str) -> Self {
        Self::new(RpcConfig::new(url))
    }

    pub fn url(&self) -> &str {
        &self.config.url
    }

    fn send_once(&self, method: &str, params: &Value) -> Result<Value, StateError> {
        let _permit = self.in_flight.acquire();
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params});
        let resp = match self.agent.post(&self.config.url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                return Err(StateError::Transport(format!("http status {code}")))
            }
            Err(ureq::Error::Status(code, r)) => {
                return Err(StateError::Rpc { code: code as i64, message: r.status_text().to_string() })
            }
            Err(e) => return Err(StateError::Transport(e.to_string())),
        };
        let v: Value = resp.into_json().map_err(|e| StateError::Transport(e.to_string()))?;
        if let Some(err) = v.get("error") {
            return Err(StateError::Rpc {
                code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                message: err.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
            });
        }
        v.get("result").cloned().ok_or_else(|| StateError::Malformed("response without result".into()))
    }

    /// Sends with exponential backoff on transport errors.
    fn request(&self, method: &str, params: Value) -> Result<Vec<u8>, StateError> {
        let mut delay = self.config.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.send_once(method, &params) {
                Ok(Value::String(s)) => return decode_hex(&s).map_err(|e| StateError::Malformed(e.to_string())),
                Ok(other) => return Err(StateError::Malformed(format!("expected hex string, got {other}"))),
                Err(e) if e.is_retriable() && attempt < self.config.max_attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn cached(&self, key: CacheKey, fetch: impl FnOnce() -> Result<Vec<u8>, StateError>) -> Result<Vec<u8>, StateError> {
        if let Some(v) = self.cache.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = fetch()?;
        self.cache.write().unwrap().insert(key, v.clone());
        Ok(v)
    }
}

impl ChainState for RpcClient {
    fn code(&self, address: &Address) -> Result<Vec<u8>, StateError> {
        self.cached(CacheKey::Code(*address), || {
            self.request("eth_getCode", json!([address.to_string(), self.config.block]))
        })
    }

    fn storage(&self, address: &Address, slot: &B256) -> Result<B256, StateError> {
        let raw = self.cached(CacheKey::Storage(*address, *slot), || {
            self.request("eth_getStorageAt", json!([address.to_string(), slot.to_string(), self.config.block]))
        })?;
        word_from(&raw)
    }

    fn call(&self, to: &Address, data: &[u8]) -> Result<Vec<u8>, StateError> {
        self.cached(CacheKey::Call(*to, data.to_vec()), || {
            self.request(
                "eth_call",
                json!([{"to": to.to_string(), "data": encode_hex(data)}, self.config.block]),
            )
        })
    }
}

/// Left-pads a storage response to 32 bytes; nodes sometimes trim zeros.
fn word_from(raw: &[u8]) -> Result<B256, StateError> {
    if raw.len() > 32 {
        return Err(StateError::Malformed(format!("storage word of {} bytes", raw.len())));
    }
    let mut w = [0u8; 32];
    w[32 - raw.len()..].copy_from_slice(raw);
    Ok(B256(w))
}

pub fn fetch_code(state: &dyn ChainState, address: &Address) -> Result<Vec<u8>, StateError> {
    state.code(address)
}

/// Slots 0..31 plus the standardized admin and implementation slots.
pub fn default_sample_slots() -> Vec<B256> {
    let mut slots: Vec<B256> = (0..32).map(B256::from_u64).collect();
    slots.push(ADMIN_SLOT);
    slots.push(IMPLEMENTATION_SLOT);
    slots
}

/// Reads every requested slot; any failure discards the whole sample.
pub fn fetch_storage_sample(
    state: &dyn ChainState,
    address: &Address,
    slots: &[B256],
) -> Result<StorageSample, StateError> {
    let words = slots
        .iter()
        .map(|s| state.storage(address, s).map(|w| (*s, w)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(StorageSample::new(*address, words))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicProbe {
    ImplementationSlot,
    Beacon,
    Slot0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicResolution {
    pub address: Address,
    pub probe: LogicProbe,
}

/// Finds the logic contract behind a proxy by probing, in order, the
/// standardized implementation slot, the beacon slot followed by the
/// beacon's `implementation()`, and slot 0 when it holds an address with
/// code.
pub fn resolve_logic_address(state: &dyn ChainState, proxy: &Address) -> Result<Option<LogicResolution>, StateError> {
    let imp = state.storage(proxy, &IMPLEMENTATION_SLOT)?.low_address();
    if !imp.is_zero() {
        return Ok(Some(LogicResolution { address: imp, probe: LogicProbe::ImplementationSlot }));
    }

    let beacon = state.storage(proxy, &BEACON_SLOT)?.low_address();
    if !beacon.is_zero() {
        match state.call(&beacon, &IMPLEMENTATION_ACCESSOR) {
            Ok(ret) if ret.len() >= 32 => {
                let addr = B256::from_slice(&ret[..32]).expect("32 bytes").low_address();
                if !addr.is_zero() {
                    return Ok(Some(LogicResolution { address: addr, probe: LogicProbe::Beacon }));
                }
            }
            Err(e) if e.is_retriable() => return Err(e),
            _ => {}
        }
    }

    let slot0 = state.storage(proxy, &B256::ZERO)?.low_address();
    if !slot0.is_zero() {
        match state.code(&slot0) {
            Ok(code) if !code.is_empty() => {
                return Ok(Some(LogicResolution { address: slot0, probe: LogicProbe::Slot0 }))
            }
            Err(e) if e.is_retriable() => return Err(e),
            _ => {}
        }
    }
    Ok(None)
}
