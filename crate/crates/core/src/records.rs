//! Fixture records and their line-oriented file formats.
//!
//! | kind         | file shape                                                   |
//! |--------------|--------------------------------------------------------------|
//! | contracts    | JSON Lines, one [`ContractRecord`] per line                  |
//! | transactions | JSON Lines, one [`TransactionRecord`] per line               |
//! | traces       | JSON Lines, one [`CreationTrace`] per line                   |
//! | migrations   | CSV `old_address,new_address,announcement_time,note`         |
//! | tokenlist    | token-list JSON `{"name", "tokens": [{"address", ...}]}`     |
//!
//! Every reader has a matching writer, and reading what a writer produced
//! yields the same records.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::primitives::{hex_bytes, Address, B256};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{kind} line {line}: {message}")]
    Parse { kind: FixtureKind, line: usize, message: String },
    #[error("unknown fixture kind {0:?} (expected contracts, transactions, traces, migrations or tokenlist)")]
    UnknownKind(String),
}

impl IngestError {
    fn parse(kind: FixtureKind, line: usize, message: impl fmt::Display) -> Self {
        IngestError::Parse { kind, line, message: message.to_string() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixtureKind {
    Contracts,
    Transactions,
    Traces,
    Migrations,
    TokenList,
}

impl FixtureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixtureKind::Contracts => "contracts",
            FixtureKind::Transactions => "transactions",
            FixtureKind::Traces => "traces",
            FixtureKind::Migrations => "migrations",
            FixtureKind::TokenList => "tokenlist",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureKind {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "contracts" => FixtureKind::Contracts,
            "transactions" => FixtureKind::Transactions,
            "traces" => FixtureKind::Traces,
            "migrations" => FixtureKind::Migrations,
            "tokenlist" => FixtureKind::TokenList,
            _ => return Err(IngestError::UnknownKind(s.to_string())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRecord {
    pub address: Address,
    #[serde(with = "hex_bytes")]
    pub bytecode: Vec<u8>,
    pub creator: Address,
    pub creation_tx: B256,
    pub creation_block: u64,
    /// Position of the creation transaction within its block.
    #[serde(default)]
    pub creation_tx_index: u64,
    pub created_by_contract: bool,
}

impl ContractRecord {
    pub fn code_hash(&self) -> B256 {
        B256::keccak(&self.bytecode)
    }

    pub fn creation_order(&self) -> (u64, u64) {
        (self.creation_block, self.creation_tx_index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub hash: B256,
    pub from: Address,
    pub to: Address,
    #[serde(with = "hex_bytes")]
    pub input: Vec<u8>,
    pub block: u64,
    pub tx_index: u64,
    #[serde(deserialize_with = "deserialize_status")]
    pub status: bool,
    /// Whether `from` is a contract account. Only internal-call exports
    /// carry it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caller_is_contract: Option<bool>,
    /// Block timestamp in unix seconds, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl TransactionRecord {
    pub fn order_key(&self) -> (u64, u64, B256) {
        (self.block, self.tx_index, self.hash)
    }
}

/// Accepts `true`/`false`, `1`/`0` and the receipt forms `"0x1"`/`"0x0"`.
fn deserialize_status<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Status {
        Bool(bool),
        Int(u64),
        Text(String),
    }
    match Status::deserialize(d)? {
        Status::Bool(b) => Ok(b),
        Status::Int(0) => Ok(false),
        Status::Int(1) => Ok(true),
        Status::Text(s) if s == "0x1" || s == "1" => Ok(true),
        Status::Text(s) if s == "0x0" || s == "0" => Ok(false),
        _ => Err(serde::de::Error::custom("status must be a boolean, 0/1 or \"0x0\"/\"0x1\"")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreationTrace {
    pub tx_hash: B256,
    pub created_address: Address,
    pub opcodes: Vec<String>,
}

pub fn creation_trace_has_create2(trace: &CreationTrace) -> bool {
    trace.opcodes.iter().any(|op| op.eq_ignore_ascii_case("CREATE2"))
}

/// When a migration was announced. The file form is a plain integer for a
/// block number or `@<unix seconds>` for a timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnouncementTime {
    Block(u64),
    Timestamp(u64),
}

impl AnnouncementTime {
    /// Whether `tx` happened strictly after the announcement, or `None` when
    /// the transaction lacks the timestamp a timestamp announcement needs.
    pub fn precedes(&self, tx: &TransactionRecord) -> Option<bool> {
        match *self {
            AnnouncementTime::Block(b) => Some(tx.block > b),
            AnnouncementTime::Timestamp(t) => tx.timestamp.map(|ts| ts > t),
        }
    }
}

impl fmt::Display for AnnouncementTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnouncementTime::Block(b) => write!(f, "{b}"),
            AnnouncementTime::Timestamp(t) => write!(f, "@{t}"),
        }
    }
}

impl FromStr for AnnouncementTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.strip_prefix('@') {
            Some(t) => t.parse().map(AnnouncementTime::Timestamp),
            None => s.parse().map(AnnouncementTime::Block),
        }
        .map_err(|_| format!("bad announcement time {s:?}"))
    }
}

impl Serialize for AnnouncementTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AnnouncementTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub old_address: Address,
    pub new_address: Address,
    pub announcement_time: AnnouncementTime,
    #[serde(default)]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StorageSample {
    pub address: Address,
    pub words: BTreeMap<B256, B256>,
    pub all_zero: bool,
}

impl StorageSample {
    pub fn new(address: Address, words: BTreeMap<B256, B256>) -> Self {
        let all_zero = words.values().all(B256::is_zero);
        Self { address, words, all_zero }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenList {
    pub source: String,
    pub addresses: BTreeSet<Address>,
}

#[derive(Serialize, Deserialize)]
struct TokenListFile {
    name: String,
    tokens: Vec<TokenEntry>,
}

#[derive(Serialize, Deserialize)]
struct TokenEntry {
    address: Address,
}

/// Records read by [`load_fixtures`], tagged by kind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fixtures {
    Contracts(Vec<ContractRecord>),
    Transactions(Vec<TransactionRecord>),
    Traces(Vec<CreationTrace>),
    Migrations(Vec<MigrationRecord>),
    TokenList(TokenList),
}

impl Fixtures {
    pub fn len(&self) -> usize {
        match self {
            Fixtures::Contracts(v) => v.len(),
            Fixtures::Transactions(v) => v.len(),
            Fixtures::Traces(v) => v.len(),
            Fixtures::Migrations(v) => v.len(),
            Fixtures::TokenList(t) => t.addresses.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

pub fn load_fixtures(path: &Path, kind: FixtureKind) -> Result<Fixtures, IngestError> {
    let r = open(path)?;
    Ok(match kind {
        FixtureKind::Contracts => Fixtures::Contracts(read_contracts(r)?),
        FixtureKind::Transactions => Fixtures::Transactions(read_transactions(r)?),
        FixtureKind::Traces => Fixtures::Traces(read_traces(r)?),
        FixtureKind::Migrations => Fixtures::Migrations(read_migrations(r)?),
        FixtureKind::TokenList => Fixtures::TokenList(read_tokenlist(r)?),
    })
}

fn read_jsonl<T, R, F>(reader: R, kind: FixtureKind, mut check: F) -> Result<Vec<T>, IngestError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
    F: FnMut(&T) -> Result<(), String>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::parse(kind, line_no, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| IngestError::parse(kind, line_no, e))?;
        check(&rec).map_err(|e| IngestError::parse(kind, line_no, e))?;
        out.push(rec);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_contracts<R: BufRead>(reader: R) -> Result<Vec<ContractRecord>, IngestError> {
    read_jsonl(reader, FixtureKind::Contracts, |_| Ok(()))
}

/// Rejects a second record at an already-seen `(block, tx_index)`.
pub fn read_transactions<R: BufRead>(reader: R) -> Result<Vec<TransactionRecord>, IngestError> {
    let mut seen = HashSet::new();
    read_jsonl(reader, FixtureKind::Transactions, |t: &TransactionRecord| {
        if seen.insert((t.block, t.tx_index)) {
            Ok(())
        } else {
            Err(format!("duplicate position block {} index {}", t.block, t.tx_index))
        }
    })
}

pub fn read_traces<R: BufRead>(reader: R) -> Result<Vec<CreationTrace>, IngestError> {
    read_jsonl(reader, FixtureKind::Traces, |t: &CreationTrace| {
        if t.opcodes.is_empty() {
            Err("creation trace has no opcodes".to_string())
        } else {
            Ok(())
        }
    })
}

pub fn read_migrations<R: Read>(reader: R) -> Result<Vec<MigrationRecord>, IngestError> {
    let kind = FixtureKind::Migrations;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for result in rdr.deserialize::<MigrationRecord>() {
        let rec = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IngestError::parse(kind, line, e)
        })?;
        if rec.old_address == rec.new_address {
            return Err(IngestError::parse(kind, out.len() + 2, "old_address equals new_address"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_tokenlist<R: Read>(reader: R) -> Result<TokenList, IngestError> {
    let file: TokenListFile =
        serde_json::from_reader(reader).map_err(|e| IngestError::parse(FixtureKind::TokenList, e.line(), e))?;
    Ok(TokenList { source: file.name, addresses: file.tokens.into_iter().map(|t| t.address).collect() })
}

pub fn write_contracts<W: Write>(w: W, records: &[ContractRecord]) -> std::io::Result<()> {
    write_jsonl(w, records)
}

pub fn write_transactions<W: Write>(w: W, records: &[TransactionRecord]) -> std::io::Result<()> {
    write_jsonl(w, records)
}

pub fn write_traces<W: Write>(w: W, records: &[CreationTrace]) -> std::io::Result<()> {
    write_jsonl(w, records)
}

pub fn write_migrations<W: Write>(w: W, records: &[MigrationRecord]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wtr.write_record(["old_address", "new_address", "announcement_time", "note"])?;
    }
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()
}

pub fn write_tokenlist<W: Write>(w: W, list: &TokenList) -> std::io::Result<()> {
    let file = TokenListFile {
        name: list.source.clone(),
        tokens: list.addresses.iter().map(|a| TokenEntry { address: *a }).collect(),
    };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}
