//! The upgrade-function selector database.
//!
//! A database is compiled from candidate signatures (typically the result of
//! querying a 4-byte directory for the upgrade keywords) and a manual
//! allowlist. The on-disk text format is one signature per line:
//!
//! ```text
//! # comment
//! setImplementation(address)
//! !upgradeTo(address)            manual entry
//! 0x3659cfe6 !upgradeTo(address) optional explicit selector, checked on load
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::BytecodeFeatures;
use crate::keccak::keccak256;
use crate::primitives::{Address, Selector};
use crate::signature::{FunctionSignature, SignatureError};

/// Shipped candidate list and manual allowlist.
pub const DEFAULT_DB_TEXT: &str = include_str!("../data/upgrade_functions.db");

pub const DEFAULT_RELATED_WORDS: [&str; 9] = [
    "contract",
    "implementation",
    "logic",
    "target",
    "code",
    "module",
    "address",
    "proxy",
    "delegate",
];

pub const DEFAULT_RULES_VERSION: &str = "related-words/1";

#[derive(Debug, Error)]
pub enum DbError {
    #[error("line {line}: {source}")]
    Signature { line: usize, source: SignatureError },
    #[error("line {line}: bad selector {text:?}")]
    BadSelector { line: usize, text: String },
    #[error("line {line}: selector {stated} does not match {signature} (computed {computed})")]
    SelectorMismatch { line: usize, stated: Selector, computed: Selector, signature: String },
    #[error("line {line}: invalid JSON: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("selector collision at {selector}: {first} vs {second}")]
    Collision { selector: Selector, first: String, second: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpgradeKeyword {
    Set,
    Upgrade,
    Update,
    Change,
    Replace,
    Manual,
}

impl UpgradeKeyword {
    pub const SEARCHED: [UpgradeKeyword; 5] = [
        UpgradeKeyword::Set,
        UpgradeKeyword::Upgrade,
        UpgradeKeyword::Update,
        UpgradeKeyword::Change,
        UpgradeKeyword::Replace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UpgradeKeyword::Set => "set",
            UpgradeKeyword::Upgrade => "upgrade",
            UpgradeKeyword::Update => "update",
            UpgradeKeyword::Change => "change",
            UpgradeKeyword::Replace => "replace",
            UpgradeKeyword::Manual => "manual",
        }
    }
}

impl fmt::Display for UpgradeKeyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordRules {
    /// Lowercase words, at least one of which must appear in a retained name.
    pub related_words: Vec<String>,
    /// Canonical signatures retained regardless of the keyword predicate.
    pub manual: BTreeSet<String>,
    pub version: String,
}

impl Default for KeywordRules {
    fn default() -> Self {
        Self {
            related_words: DEFAULT_RELATED_WORDS.iter().map(|w| w.to_string()).collect(),
            manual: BTreeSet::new(),
            version: DEFAULT_RULES_VERSION.to_string(),
        }
    }
}

impl KeywordRules {
    /// The keyword a name is filed under, when it also carries a related
    /// word. The earliest keyword occurrence in the name wins.
    pub fn keyword_for(&self, name: &str) -> Option<UpgradeKeyword> {
        let lower = name.to_ascii_lowercase();
        let keyword = UpgradeKeyword::SEARCHED
            .iter()
            .filter_map(|k| lower.find(k.as_str()).map(|pos| (pos, *k)))
            .min()?
            .1;
        self.related_words
            .iter()
            .any(|w| lower.contains(&w.to_ascii_lowercase()))
            .then_some(keyword)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DbEntry {
    pub signature: FunctionSignature,
    pub keyword: UpgradeKeyword,
    pub address_param_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpgradeFunctionDb {
    entries: BTreeMap<Selector, DbEntry>,
    rules_version: String,
}

/// Candidate signatures plus the manual flags read from a database file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DbSource {
    pub signatures: Vec<FunctionSignature>,
    pub manual: BTreeSet<String>,
}

pub fn compile_db(signatures: &[FunctionSignature], rules: &KeywordRules) -> Result<UpgradeFunctionDb, DbError> {
    let manual: Vec<FunctionSignature> = rules
        .manual
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .map_err(|source| DbError::Signature { line: 0, source })?;

    let mut entries: BTreeMap<Selector, DbEntry> = BTreeMap::new();
    for sig in signatures.iter().chain(manual.iter()) {
        let keyword = match rules.keyword_for(&sig.name) {
            Some(k) => k,
            None if rules.manual.contains(&sig.canonical()) => UpgradeKeyword::Manual,
            None => continue,
        };
        let selector = sig.selector();
        if let Some(existing) = entries.get(&selector) {
            if existing.signature != *sig {
                return Err(DbError::Collision {
                    selector,
                    first: existing.signature.canonical(),
                    second: sig.canonical(),
                });
            }
            continue;
        }
        entries.insert(
            selector,
            DbEntry {
                signature: sig.clone(),
                keyword,
                address_param_indices: sig.address_param_indices(),
            },
        );
    }
    Ok(UpgradeFunctionDb { entries, rules_version: rules.version.clone() })
}

/// Parses the line-oriented database format.
pub fn parse_db_text(text: &str) -> Result<DbSource, DbError> {
    let mut source = DbSource::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (stated, rest) = match line.split_once(char::is_whitespace) {
            Some((first, rest)) if first.starts_with("0x") => {
                let sel: Selector = first
                    .parse()
                    .map_err(|_| DbError::BadSelector { line: line_no, text: first.to_string() })?;
                (Some(sel), rest.trim())
            }
            _ => (None, line),
        };
        let (manual, sig_text) = match rest.strip_prefix('!') {
            Some(s) => (true, s.trim()),
            None => (false, rest),
        };
        let sig: FunctionSignature =
            sig_text.parse().map_err(|source| DbError::Signature { line: line_no, source })?;
        if let Some(stated) = stated {
            let computed = sig.selector();
            if stated != computed {
                return Err(DbError::SelectorMismatch {
                    line: line_no,
                    stated,
                    computed,
                    signature: sig.canonical(),
                });
            }
        }
        if manual {
            source.manual.insert(sig.canonical());
        }
        source.signatures.push(sig);
    }
    Ok(source)
}

#[derive(Deserialize)]
struct FourByteLine {
    signature: String,
}

/// Reads a 4-byte directory dump as JSON Lines `{"signature": "..."}`.
/// Signatures outside the supported type subset are skipped and counted.
pub fn import_4byte_jsonl<R: BufRead>(reader: R) -> Result<(Vec<FunctionSignature>, usize), DbError> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FourByteLine =
            serde_json::from_str(&line).map_err(|source| DbError::Json { line: i + 1, source })?;
        match rec.signature.parse() {
            Ok(sig) => out.push(sig),
            Err(_) => skipped += 1,
        }
    }
    Ok((out, skipped))
}

impl UpgradeFunctionDb {
    /// Compiles a database file, merging its manual entries into `rules`.
    pub fn from_text(text: &str, rules: &KeywordRules) -> Result<Self, DbError> {
        let source = parse_db_text(text)?;
        let mut rules = rules.clone();
        rules.manual.extend(source.manual);
        let db = compile_db(&source.signatures, &rules)?;
        debug_assert!(db.verify().is_ok());
        Ok(db)
    }

    pub fn load(path: &Path, rules: &KeywordRules) -> Result<Self, DbError> {
        Self::from_text(&std::fs::read_to_string(path)?, rules)
    }

    /// The shipped database compiled under the default rules.
    pub fn bundled() -> Self {
        Self::from_text(DEFAULT_DB_TEXT, &KeywordRules::default()).expect("bundled database compiles")
    }

    pub fn get(&self, selector: &Selector) -> Option<&DbEntry> {
        self.entries.get(selector)
    }

    pub fn contains(&self, selector: &Selector) -> bool {
        self.entries.contains_key(selector)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Selector, &DbEntry)> {
        self.entries.iter()
    }

    pub fn selectors(&self) -> BTreeSet<Selector> {
        self.entries.keys().copied().collect()
    }

    pub fn rules_version(&self) -> &str {
        &self.rules_version
    }

    /// Recomputes every selector from its signature.
    pub fn verify(&self) -> Result<(), DbError> {
        for (sel, entry) in &self.entries {
            let computed = entry.signature.selector();
            if computed != *sel {
                return Err(DbError::SelectorMismatch {
                    line: 0,
                    stated: *sel,
                    computed,
                    signature: entry.signature.canonical(),
                });
            }
        }
        Ok(())
    }

    /// Writes the retained entries back in the text format, selectors explicit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (sel, entry) in &self.entries {
            let bang = if entry.keyword == UpgradeKeyword::Manual { "!" } else { "" };
            out.push_str(&format!("{sel} {bang}{}\n", entry.signature));
        }
        out
    }

    /// Content fingerprint: first 8 bytes of keccak-256 over the text form.
    pub fn version(&self) -> String {
        hex::encode(&keccak256(self.to_text().as_bytes())[..8])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeMatches {
    pub local: BTreeSet<Selector>,
    pub outbound: BTreeSet<Selector>,
}

impl UpgradeMatches {
    pub fn is_empty(&self) -> bool {
        self.local.is_empty() && self.outbound.is_empty()
    }
}

pub fn match_upgrade_selectors(features: &BytecodeFeatures, db: &UpgradeFunctionDb) -> UpgradeMatches {
    UpgradeMatches {
        local: features.local_selectors.iter().filter(|s| db.contains(s)).copied().collect(),
        outbound: features.outbound_selectors.iter().filter(|s| db.contains(s)).copied().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecodedUpgradeCall {
    pub selector: Selector,
    pub signature: Option<FunctionSignature>,
    pub new_logic_candidates: Vec<Address>,
    #[serde(serialize_with = "serialize_words")]
    pub raw_words: Vec<[u8; 32]>,
}

fn serialize_words<S: serde::Serializer>(words: &[[u8; 32]], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(words.len()))?;
    for w in words {
        seq.serialize_element(&crate::primitives::encode_hex(w))?;
    }
    seq.end()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("calldata of {len} bytes is too short to carry a selector")]
    NotACall { len: usize },
    #[error("calldata truncated: {needed} head words required, {available} present")]
    Truncated { needed: usize, available: usize, partial: Box<DecodedUpgradeCall> },
}

/// Splits calldata into selector and argument words and, for selectors in
/// the database, pulls the address arguments out of the head. Dynamic
/// parameters consume only their offset word; tails are not read.
pub fn decode_upgrade_call(input: &[u8], db: &UpgradeFunctionDb) -> Result<DecodedUpgradeCall, DecodeError> {
    if input.len() < 4 {
        return Err(DecodeError::NotACall { len: input.len() });
    }
    let selector = Selector::from_slice(&input[..4]).expect("four bytes");
    let raw_words: Vec<[u8; 32]> = input[4..]
        .chunks_exact(32)
        .map(|c| c.try_into().expect("32-byte chunk"))
        .collect();

    let Some(entry) = db.get(&selector) else {
        return Ok(DecodedUpgradeCall { selector, signature: None, new_logic_candidates: vec![], raw_words });
    };

    let mut candidates = Vec::new();
    let mut head = 0;
    for ty in &entry.signature.param_types {
        if *ty == crate::signature::AbiType::Address {
            if let Some(word) = raw_words.get(head) {
                let mut a = [0u8; 20];
                a.copy_from_slice(&word[12..]);
                candidates.push(Address(a));
            }
        }
        head += ty.head_words();
    }

    let decoded = DecodedUpgradeCall {
        selector,
        signature: Some(entry.signature.clone()),
        new_logic_candidates: candidates,
        raw_words,
    };
    if decoded.raw_words.len() < head {
        return Err(DecodeError::Truncated {
            needed: head,
            available: decoded.raw_words.len(),
            partial: Box::new(decoded),
        });
    }
    Ok(decoded)
}
