//! Rule-based upgrade-pattern classification.
//!
//! | rule        | clauses                                                        |
//! |-------------|----------------------------------------------------------------|
//! | metamorphic | SELFDESTRUCT, CREATE2 in the creation trace                    |
//! | proxy       | upgrade selector in proxy or logic dispatcher, DELEGATECALL, fallback |
//! | strategy    | upgrade selector in dispatcher, CALL or STATICCALL, outbound selectors |
//!
//! Metamorphic takes precedence; proxy and strategy together make a mix.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chainstate::LogicResolution;
use crate::features::{features_of, BytecodeFeatures, ExtractionConfig};
use crate::primitives::{Address, Selector, B256};
use crate::records::{creation_trace_has_create2, ContractRecord, CreationTrace, TransactionRecord};
use crate::sigdb::{match_upgrade_selectors, UpgradeFunctionDb, UpgradeMatches};

pub const DEFAULT_DIRECTION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pattern {
    Proxy,
    DataSeparation,
    Strategy,
    DataOrStrategy,
    Mix,
    Metamorphic,
    Migration,
    NotUpgradeable,
}

impl Pattern {
    pub const ALL: [Pattern; 8] = [
        Pattern::Proxy,
        Pattern::DataSeparation,
        Pattern::Strategy,
        Pattern::DataOrStrategy,
        Pattern::Mix,
        Pattern::Metamorphic,
        Pattern::Migration,
        Pattern::NotUpgradeable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Proxy => "Proxy",
            Pattern::DataSeparation => "DataSeparation",
            Pattern::Strategy => "Strategy",
            Pattern::DataOrStrategy => "DataOrStrategy",
            Pattern::Mix => "Mix",
            Pattern::Metamorphic => "Metamorphic",
            Pattern::Migration => "Migration",
            Pattern::NotUpgradeable => "NotUpgradeable",
        }
    }

    pub fn is_upgradeable(self) -> bool {
        self != Pattern::NotUpgradeable
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown pattern {s:?}"))
    }
}

/// Everything the rules look at for one contract.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContractAnalysis {
    pub record: ContractRecord,
    pub features: BytecodeFeatures,
    pub upgrade_matches: UpgradeMatches,
    pub logic_address: Option<LogicResolution>,
    /// Present only when the logic address resolved to nonempty code.
    pub logic_features: Option<BytecodeFeatures>,
    pub logic_upgrade_matches: Option<UpgradeMatches>,
    pub creation_trace: Option<CreationTrace>,
}

impl ContractAnalysis {
    pub fn new(record: ContractRecord, db: &UpgradeFunctionDb, config: &ExtractionConfig) -> Self {
        let features = features_of(&record.bytecode, config);
        Self::from_features(record, features, db)
    }

    pub fn from_features(record: ContractRecord, features: BytecodeFeatures, db: &UpgradeFunctionDb) -> Self {
        let upgrade_matches = match_upgrade_selectors(&features, db);
        Self {
            record,
            features,
            upgrade_matches,
            logic_address: None,
            logic_features: None,
            logic_upgrade_matches: None,
            creation_trace: None,
        }
    }

    /// Attaches a resolved logic contract. Empty logic code leaves the
    /// logic features unset.
    pub fn with_logic(
        mut self,
        resolution: LogicResolution,
        logic_code: &[u8],
        db: &UpgradeFunctionDb,
        config: &ExtractionConfig,
    ) -> Self {
        self.logic_address = Some(resolution);
        if logic_code.is_empty() {
            self.logic_features = None;
            self.logic_upgrade_matches = None;
        } else {
            let f = features_of(logic_code, config);
            self.logic_upgrade_matches = Some(match_upgrade_selectors(&f, db));
            self.logic_features = Some(f);
        }
        self
    }

    pub fn with_creation_trace(mut self, trace: CreationTrace) -> Self {
        self.creation_trace = Some(trace);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Metamorphic,
    Proxy,
    Strategy,
}

/// One satisfied clause and the concrete evidence behind it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum Clause {
    Opcode { opcode: String },
    Create2InTrace { tx_hash: B256 },
    UpgradeSelectorInProxy { selectors: BTreeSet<Selector> },
    UpgradeSelectorInLogic { logic: Address, selectors: BTreeSet<Selector> },
    ExternalCall { opcodes: Vec<String> },
    OutboundSelectors { selectors: BTreeSet<Selector> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEvidence {
    pub rule: Rule,
    pub clauses: Vec<Clause>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    /// SELFDESTRUCT present but no creation trace to check for CREATE2.
    NoCreationTrace,
    /// Forwarder-shaped contract whose logic address did not resolve.
    LogicUnresolved,
    /// Logic address resolved to an account without code.
    LogicCodeEmpty,
}

/// Inbound call direction counts used to split data separation from strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionEvidence {
    pub from_contracts: usize,
    pub from_eoas: usize,
    pub unknown_caller: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternClassification {
    pub subject: Address,
    pub pattern: Pattern,
    /// Upgrade function found on the logic side only.
    pub uups: bool,
    pub evidence: Vec<RuleEvidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degradations: Vec<Degradation>,
    /// What proxy/strategy rules alone would give, for metamorphic results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary_pattern: Option<Pattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionEvidence>,
}

impl PatternClassification {
    pub fn satisfied_rules(&self) -> BTreeSet<Rule> {
        self.evidence.iter().map(|e| e.rule).collect()
    }

    pub fn not_upgradeable(subject: Address) -> Self {
        Self {
            subject,
            pattern: Pattern::NotUpgradeable,
            uups: false,
            evidence: vec![],
            degradations: vec![],
            secondary_pattern: None,
            direction: None,
        }
    }

    fn outbound_selectors(&self) -> BTreeSet<Selector> {
        self.evidence
            .iter()
            .flat_map(|e| &e.clauses)
            .filter_map(|c| match c {
                Clause::OutboundSelectors { selectors } => Some(selectors.clone()),
                _ => None,
            })
            .flatten()
            .collect()
    }
}

fn opcode_clause(name: &str) -> Clause {
    Clause::Opcode { opcode: name.to_string() }
}

fn metamorphic_rule(a: &ContractAnalysis) -> Option<RuleEvidence> {
    let trace = a.creation_trace.as_ref()?;
    (a.features.has_selfdestruct && creation_trace_has_create2(trace)).then(|| RuleEvidence {
        rule: Rule::Metamorphic,
        clauses: vec![opcode_clause("SELFDESTRUCT"), Clause::Create2InTrace { tx_hash: trace.tx_hash }],
    })
}

/// Returns the evidence and whether the match was on the logic side only.
fn proxy_rule(a: &ContractAnalysis) -> Option<(RuleEvidence, bool)> {
    if !(a.features.has_delegatecall && a.features.has_fallback) {
        return None;
    }
    let proxy_side = &a.upgrade_matches.local;
    let logic_side = a
        .logic_upgrade_matches
        .as_ref()
        .map(|m| m.local.clone())
        .unwrap_or_default();
    let upgrade = if !proxy_side.is_empty() {
        Clause::UpgradeSelectorInProxy { selectors: proxy_side.clone() }
    } else if !logic_side.is_empty() {
        let logic = a.logic_address.expect("logic matches imply a resolved address").address;
        Clause::UpgradeSelectorInLogic { logic, selectors: logic_side }
    } else {
        return None;
    };
    let uups = matches!(upgrade, Clause::UpgradeSelectorInLogic { .. });
    Some((
        RuleEvidence {
            rule: Rule::Proxy,
            clauses: vec![upgrade, opcode_clause("DELEGATECALL"), opcode_clause("FALLBACK")],
        },
        uups,
    ))
}

fn strategy_rule(a: &ContractAnalysis) -> Option<RuleEvidence> {
    let f = &a.features;
    if a.upgrade_matches.local.is_empty() || f.outbound_selectors.is_empty() {
        return None;
    }
    let mut calls = Vec::new();
    if f.has_call {
        calls.push("CALL".to_string());
    }
    if f.has_staticcall {
        calls.push("STATICCALL".to_string());
    }
    if calls.is_empty() {
        return None;
    }
    Some(RuleEvidence {
        rule: Rule::Strategy,
        clauses: vec![
            Clause::UpgradeSelectorInProxy { selectors: a.upgrade_matches.local.clone() },
            Clause::ExternalCall { opcodes: calls },
            Clause::OutboundSelectors { selectors: f.outbound_selectors.clone() },
        ],
    })
}

fn degradations(a: &ContractAnalysis) -> Vec<Degradation> {
    let mut out = Vec::new();
    if a.features.has_selfdestruct && a.creation_trace.is_none() {
        out.push(Degradation::NoCreationTrace);
    }
    if a.features.has_delegatecall && a.features.has_fallback {
        match (&a.logic_address, &a.logic_features) {
            (None, _) => out.push(Degradation::LogicUnresolved),
            (Some(_), None) => out.push(Degradation::LogicCodeEmpty),
            _ => {}
        }
    }
    out
}

pub fn classify(a: &ContractAnalysis) -> PatternClassification {
    let proxy = proxy_rule(a);
    let strategy = strategy_rule(a);
    let metamorphic = metamorphic_rule(a);

    let (base, uups) = match (&proxy, &strategy) {
        (Some((_, uups)), Some(_)) => (Pattern::Mix, *uups),
        (Some((_, uups)), None) => (Pattern::Proxy, *uups),
        (None, Some(_)) => (Pattern::DataOrStrategy, false),
        (None, None) => (Pattern::NotUpgradeable, false),
    };

    let mut evidence = Vec::new();
    evidence.extend(metamorphic.clone());
    evidence.extend(proxy.map(|(e, _)| e));
    evidence.extend(strategy);

    let (pattern, uups, secondary_pattern) = if metamorphic.is_some() {
        (Pattern::Metamorphic, false, base.is_upgradeable().then_some(base))
    } else {
        (base, uups, None)
    };

    PatternClassification {
        subject: a.record.address,
        pattern,
        uups,
        evidence,
        degradations: degradations(a),
        secondary_pattern,
        direction: None,
    }
}

/// Splits a `DataOrStrategy` result by who calls the subject. Only
/// non-upgrade calls whose caller kind is known are counted; a strict
/// majority above `threshold` decides.
pub fn resolve_strategy_vs_data(
    cls: &PatternClassification,
    txs: &[TransactionRecord],
    db: &UpgradeFunctionDb,
    threshold: f64,
) -> PatternClassification {
    let mut out = cls.clone();
    if cls.pattern != Pattern::DataOrStrategy {
        return out;
    }
    let mut dir = DirectionEvidence::default();
    for tx in txs.iter().filter(|t| t.to == cls.subject && t.input.len() >= 4) {
        let selector = Selector::from_slice(&tx.input[..4]).expect("four bytes");
        if db.contains(&selector) {
            continue;
        }
        match tx.caller_is_contract {
            Some(true) => dir.from_contracts += 1,
            Some(false) => dir.from_eoas += 1,
            None => dir.unknown_caller += 1,
        }
    }
    let known = dir.from_contracts + dir.from_eoas;
    if known > 0 {
        let contract_share = dir.from_contracts as f64 / known as f64;
        let eoa_share = dir.from_eoas as f64 / known as f64;
        if contract_share > threshold {
            out.pattern = Pattern::DataSeparation;
        } else if eoa_share > threshold && !cls.outbound_selectors().is_empty() {
            out.pattern = Pattern::Strategy;
        }
    }
    if known > 0 || dir.unknown_caller > 0 {
        out.direction = Some(dir);
    }
    out
}

/// True when the contract calls another contract's proxy upgrade function.
pub fn detect_hierarchy_upgrader(a: &ContractAnalysis, proxy_upgrade_selectors: &BTreeSet<Selector>) -> bool {
    a.upgrade_matches.outbound.iter().any(|s| proxy_upgrade_selectors.contains(s))
}

/// Re-evaluates the recorded clauses against the analysis. Every clause must
/// still hold for the result to be reproducible.
pub fn replay_evidence(cls: &PatternClassification, a: &ContractAnalysis) -> bool {
    cls.evidence.iter().flat_map(|e| &e.clauses).all(|c| match c {
        Clause::Opcode { opcode } => match opcode.as_str() {
            "SELFDESTRUCT" => a.features.has_selfdestruct,
            "DELEGATECALL" => a.features.has_delegatecall,
            "FALLBACK" => a.features.has_fallback,
            _ => false,
        },
        Clause::Create2InTrace { tx_hash } => a
            .creation_trace
            .as_ref()
            .is_some_and(|t| t.tx_hash == *tx_hash && creation_trace_has_create2(t)),
        Clause::UpgradeSelectorInProxy { selectors } => {
            !selectors.is_empty() && selectors.is_subset(&a.upgrade_matches.local)
        }
        Clause::UpgradeSelectorInLogic { logic, selectors } => {
            a.logic_address.is_some_and(|r| r.address == *logic)
                && a.logic_upgrade_matches.as_ref().is_some_and(|m| !selectors.is_empty() && selectors.is_subset(&m.local))
        }
        Clause::ExternalCall { opcodes } => !opcodes.is_empty()
            && opcodes.iter().all(|o| match o.as_str() {
                "CALL" => a.features.has_call,
                "STATICCALL" => a.features.has_staticcall,
                _ => false,
            }),
        Clause::OutboundSelectors { selectors } => {
            !selectors.is_empty() && selectors.is_subset(&a.features.outbound_selectors)
        }
    })
}
