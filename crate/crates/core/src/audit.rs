//! Security audits over upgrade chains, logic contracts and migrations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::chain::{LogicTarget, UpgradeChain};
use crate::chainstate::ChainState;
use crate::classify::{detect_hierarchy_upgrader, ContractAnalysis, Pattern, PatternClassification};
use crate::features::{features_of, BytecodeFeatures, ExtractionConfig};
use crate::primitives::{Address, Selector, B256};
use crate::records::{MigrationRecord, StorageSample, TokenList, TransactionRecord};
use crate::sigdb::UpgradeFunctionDb;

/// `upgradeToAndCall(address,bytes)`
pub const UPGRADE_TO_AND_CALL: Selector = Selector([0x4f, 0x1e, 0xf2, 0x86]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingCategory {
    MissingAccessControl,
    UninitializedLogicCaseI,
    UninitializedLogicCaseII,
    SameAddress,
    ZeroAddress,
    EOATarget,
    EmptyContractTarget,
    NonUpgradeableUUPSTarget,
    OldContractStillUsed,
    StaleTokenListing,
    HierarchyUpgrade,
}

impl FindingCategory {
    pub const ALL: [FindingCategory; 11] = [
        FindingCategory::MissingAccessControl,
        FindingCategory::UninitializedLogicCaseI,
        FindingCategory::UninitializedLogicCaseII,
        FindingCategory::SameAddress,
        FindingCategory::ZeroAddress,
        FindingCategory::EOATarget,
        FindingCategory::EmptyContractTarget,
        FindingCategory::NonUpgradeableUUPSTarget,
        FindingCategory::OldContractStillUsed,
        FindingCategory::StaleTokenListing,
        FindingCategory::HierarchyUpgrade,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FindingCategory::MissingAccessControl => "MissingAccessControl",
            FindingCategory::UninitializedLogicCaseI => "UninitializedLogicCaseI",
            FindingCategory::UninitializedLogicCaseII => "UninitializedLogicCaseII",
            FindingCategory::SameAddress => "SameAddress",
            FindingCategory::ZeroAddress => "ZeroAddress",
            FindingCategory::EOATarget => "EOATarget",
            FindingCategory::EmptyContractTarget => "EmptyContractTarget",
            FindingCategory::NonUpgradeableUUPSTarget => "NonUpgradeableUUPSTarget",
            FindingCategory::OldContractStillUsed => "OldContractStillUsed",
            FindingCategory::StaleTokenListing => "StaleTokenListing",
            FindingCategory::HierarchyUpgrade => "HierarchyUpgrade",
        }
    }

    pub fn severity(self) -> Severity {
        use FindingCategory::*;
        match self {
            NonUpgradeableUUPSTarget | UninitializedLogicCaseI | UninitializedLogicCaseII => Severity::Critical,
            ZeroAddress | EOATarget | EmptyContractTarget | MissingAccessControl => Severity::Warn,
            SameAddress | StaleTokenListing | OldContractStillUsed | HierarchyUpgrade => Severity::Info,
        }
    }
}

impl fmt::Display for FindingCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    Critical,
}

/// References backing a finding. Unused fields are omitted from JSON.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tx_hashes: Vec<B256>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_logic: Option<LogicTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_logic: Option<LogicTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy: Option<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub senders: Vec<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attempted_senders: Vec<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selectors: Vec<Selector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sampled_slots: Vec<B256>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_address: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_address: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announcement_time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_list: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        *self == Evidence::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityFinding {
    pub category: FindingCategory,
    pub severity: Severity,
    pub subject: Address,
    pub evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_position: Option<usize>,
}

impl SecurityFinding {
    pub fn new(category: FindingCategory, subject: Address, evidence: Evidence, chain_position: Option<usize>) -> Self {
        debug_assert!(!evidence.is_empty());
        Self { category, severity: category.severity(), subject, evidence, chain_position }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("findings serialize")
    }
}

/// Sorts by subject, category, chain position, then evidence text, and
/// drops exact duplicates.
pub fn canonical_order(findings: &mut Vec<SecurityFinding>) {
    findings.sort_by_cached_key(|f| {
        (f.subject, f.category, f.chain_position, serde_json::to_string(&f.evidence).expect("evidence serializes"))
    });
    findings.dedup();
}

/// A check that could not run because a lookup failed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnresolvedCheck {
    pub subject: Address,
    pub chain_position: usize,
    pub target: LogicTarget,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LogicTargetAudit {
    pub findings: Vec<SecurityFinding>,
    pub unresolved: Vec<UnresolvedCheck>,
}

/// Code and features of upgrade targets.
pub trait TargetLookup: Sync {
    fn code(&self, address: &Address) -> Result<Vec<u8>, String>;
    fn features(&self, address: &Address) -> Result<BytecodeFeatures, String>;
}

/// Lookup over a [`ChainState`] with features cached per address.
pub struct StateLookup<'a> {
    state: &'a dyn ChainState,
    config: ExtractionConfig,
    cache: RwLock<HashMap<Address, BytecodeFeatures>>,
}

impl<'a> StateLookup<'a> {
    pub fn new(state: &'a dyn ChainState, config: ExtractionConfig) -> Self {
        Self { state, config, cache: RwLock::new(HashMap::new()) }
    }
}

impl TargetLookup for StateLookup<'_> {
    fn code(&self, address: &Address) -> Result<Vec<u8>, String> {
        self.state.code(address).map_err(|e| e.to_string())
    }

    fn features(&self, address: &Address) -> Result<BytecodeFeatures, String> {
        if let Some(f) = self.cache.read().unwrap().get(address) {
            return Ok(f.clone());
        }
        let f = features_of(&self.code(address)?, &self.config);
        self.cache.write().unwrap().insert(*address, f.clone());
        Ok(f)
    }
}

fn is_uups_chain(chain: &UpgradeChain) -> bool {
    chain.pattern.uups && matches!(chain.pattern.pattern, Pattern::Proxy | Pattern::Mix)
}

/// Checks each successful upgrade's target: repeated, zero, codeless,
/// selector-less, and for UUPS chains, lacking an upgrade function.
pub fn audit_logic_targets(chain: &UpgradeChain, lookup: &dyn TargetLookup, db: &UpgradeFunctionDb) -> LogicTargetAudit {
    let mut out = LogicTargetAudit::default();
    let uups = is_uups_chain(chain);
    let subject = chain.subject;

    for (i, ev) in chain.events.iter().enumerate() {
        let base = Evidence { tx_hashes: vec![ev.tx_hash], new_logic: Some(ev.new_logic), ..Default::default() };
        let target = match ev.new_logic {
            LogicTarget::Address(a) => a,
            LogicTarget::CodeHash(_) => continue,
            LogicTarget::Unknown => {
                out.unresolved.push(UnresolvedCheck {
                    subject,
                    chain_position: i,
                    target: ev.new_logic,
                    reason: "upgrade calldata carried no decodable address".into(),
                });
                continue;
            }
        };

        if i > 0 && chain.events[i - 1].new_logic == ev.new_logic {
            let ev_prev = &chain.events[i - 1];
            out.findings.push(SecurityFinding::new(
                FindingCategory::SameAddress,
                subject,
                Evidence {
                    tx_hashes: vec![ev_prev.tx_hash, ev.tx_hash],
                    previous_logic: Some(ev_prev.new_logic),
                    ..base.clone()
                },
                Some(i),
            ));
        }

        let uups_finding = |note: &str| {
            SecurityFinding::new(
                FindingCategory::NonUpgradeableUUPSTarget,
                subject,
                Evidence { note: Some(note.to_string()), ..base.clone() },
                Some(i),
            )
        };

        if target.is_zero() {
            out.findings.push(SecurityFinding::new(FindingCategory::ZeroAddress, subject, base.clone(), Some(i)));
            if uups {
                out.findings.push(uups_finding("target is the zero address"));
            }
            continue;
        }

        let code = match lookup.code(&target) {
            Ok(c) => c,
            Err(reason) => {
                out.unresolved.push(UnresolvedCheck { subject, chain_position: i, target: ev.new_logic, reason });
                continue;
            }
        };
        if code.is_empty() {
            out.findings.push(SecurityFinding::new(FindingCategory::EOATarget, subject, base.clone(), Some(i)));
            if uups {
                out.findings.push(uups_finding("target has no code"));
            }
            continue;
        }

        let features = match lookup.features(&target) {
            Ok(f) => f,
            Err(reason) => {
                out.unresolved.push(UnresolvedCheck { subject, chain_position: i, target: ev.new_logic, reason });
                continue;
            }
        };
        if features.local_selectors.is_empty() && !features.has_fallback {
            out.findings.push(SecurityFinding::new(
                FindingCategory::EmptyContractTarget,
                subject,
                Evidence { note: Some("no dispatcher selectors and no fallback".into()), ..base.clone() },
                Some(i),
            ));
        }
        if uups && !features.local_selectors.iter().any(|s| db.contains(s)) {
            out.findings.push(uups_finding("target dispatcher has no known upgrade function"));
        }
    }
    canonical_order(&mut out.findings);
    out
}

/// Flags chains upgraded by several senders where some sender upgraded only
/// once. A candidate only: ownership checks in the upgrade function must be
/// confirmed separately.
pub fn audit_access_control(chain: &UpgradeChain) -> Vec<SecurityFinding> {
    if chain.events.len() < 2 {
        return vec![];
    }
    let mut counts: BTreeMap<Address, usize> = BTreeMap::new();
    for ev in &chain.events {
        *counts.entry(ev.sender).or_default() += 1;
    }
    let one_shot: Vec<Address> = counts.iter().filter(|(_, n)| **n == 1).map(|(a, _)| *a).collect();
    if counts.len() < 2 || one_shot.is_empty() {
        return vec![];
    }
    let attempted: BTreeSet<Address> = chain.attempted.iter().map(|e| e.sender).collect();
    let tx_hashes = chain
        .events
        .iter()
        .filter(|e| one_shot.contains(&e.sender))
        .map(|e| e.tx_hash)
        .chain(chain.attempted.iter().map(|e| e.tx_hash))
        .collect();
    vec![SecurityFinding::new(
        FindingCategory::MissingAccessControl,
        chain.subject,
        Evidence {
            tx_hashes,
            senders: one_shot,
            attempted_senders: attempted.into_iter().collect(),
            note: Some(format!(
                "candidate: {} distinct upgrade senders; confirm the upgrade function's access check",
                counts.len()
            )),
            ..Default::default()
        },
        None,
    )]
}

/// Checks the logic contract behind a proxy for the never-initialized
/// states in which anyone can take it over.
pub fn audit_uninitialized_logic(
    proxy: &ContractAnalysis,
    classification: &PatternClassification,
    storage: &StorageSample,
    db: &UpgradeFunctionDb,
) -> Vec<SecurityFinding> {
    let (Some(logic), Some(features)) = (proxy.logic_address, proxy.logic_features.as_ref()) else {
        return vec![];
    };
    if !matches!(classification.pattern, Pattern::Proxy | Pattern::Mix) || !storage.all_zero {
        return vec![];
    }
    let base = Evidence {
        logic: Some(logic.address),
        proxy: Some(proxy.record.address),
        sampled_slots: storage.words.keys().copied().collect(),
        ..Default::default()
    };
    let mut out = Vec::new();
    if features.has_selfdestruct {
        out.push(SecurityFinding::new(
            FindingCategory::UninitializedLogicCaseI,
            logic.address,
            Evidence { note: Some("uninitialized logic contains SELFDESTRUCT".into()), ..base.clone() },
            None,
        ));
    }
    if classification.uups && db.contains(&UPGRADE_TO_AND_CALL) && features.local_selectors.contains(&UPGRADE_TO_AND_CALL) {
        out.push(SecurityFinding::new(
            FindingCategory::UninitializedLogicCaseII,
            logic.address,
            Evidence {
                selectors: vec![UPGRADE_TO_AND_CALL],
                note: Some("uninitialized UUPS logic exposes upgradeToAndCall".into()),
                ..base
            },
            None,
        ));
    }
    canonical_order(&mut out);
    out
}

/// Checks migrated contracts for continued use and stale token listings.
pub fn audit_version(
    migrations: &[MigrationRecord],
    txs: &[TransactionRecord],
    tokenlists: &[TokenList],
) -> Vec<SecurityFinding> {
    let mut out = Vec::new();
    for m in migrations {
        let mut late: Vec<&TransactionRecord> = Vec::new();
        let mut incomparable = 0;
        for tx in txs.iter().filter(|t| t.to == m.old_address && t.status) {
            match m.announcement_time.precedes(tx) {
                Some(true) => late.push(tx),
                Some(false) => {}
                None => incomparable += 1,
            }
        }
        late.sort_by_key(|t| t.order_key());
        if !late.is_empty() {
            out.push(SecurityFinding::new(
                FindingCategory::OldContractStillUsed,
                m.old_address,
                Evidence {
                    tx_hashes: late.iter().map(|t| t.hash).collect(),
                    old_address: Some(m.old_address),
                    new_address: Some(m.new_address),
                    announcement_time: Some(m.announcement_time.to_string()),
                    tx_count: Some(late.len()),
                    note: (incomparable > 0)
                        .then(|| format!("{incomparable} transactions lacked a timestamp and were not compared")),
                    ..Default::default()
                },
                None,
            ));
        }
        for list in tokenlists {
            if list.addresses.contains(&m.old_address) && !list.addresses.contains(&m.new_address) {
                out.push(SecurityFinding::new(
                    FindingCategory::StaleTokenListing,
                    m.old_address,
                    Evidence {
                        old_address: Some(m.old_address),
                        new_address: Some(m.new_address),
                        token_list: Some(list.source.clone()),
                        ..Default::default()
                    },
                    None,
                ));
            }
        }
    }
    canonical_order(&mut out);
    out
}

/// Reports a contract that calls other contracts' proxy upgrade functions.
pub fn audit_hierarchy(
    analysis: &ContractAnalysis,
    classification: &PatternClassification,
    proxy_upgrade_selectors: &BTreeSet<Selector>,
) -> Vec<SecurityFinding> {
    let eligible = matches!(
        classification.pattern,
        Pattern::Strategy | Pattern::DataSeparation | Pattern::DataOrStrategy | Pattern::Mix
    );
    if !eligible || !detect_hierarchy_upgrader(analysis, proxy_upgrade_selectors) {
        return vec![];
    }
    let selectors = analysis
        .upgrade_matches
        .outbound
        .iter()
        .filter(|s| proxy_upgrade_selectors.contains(s))
        .copied()
        .collect();
    vec![SecurityFinding::new(
        FindingCategory::HierarchyUpgrade,
        analysis.record.address,
        Evidence {
            selectors,
            note: Some("calls the upgrade function of other proxy contracts".into()),
            ..Default::default()
        },
        None,
    )]
}
