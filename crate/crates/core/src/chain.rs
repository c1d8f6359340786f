//! Upgrade chains: the time-ordered upgrades applied to one contract.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::PatternClassification;
use crate::primitives::{Address, Selector, B256};
use crate::records::{creation_trace_has_create2, ContractRecord, CreationTrace, MigrationRecord, TransactionRecord};
use crate::sigdb::{decode_upgrade_call, DecodeError, UpgradeFunctionDb};

/// What an upgrade switched to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicTarget {
    Address(Address),
    /// Hash of redeployed runtime code, for contracts that change code in place.
    CodeHash(B256),
    /// The calldata did not carry a decodable address.
    Unknown,
}

impl LogicTarget {
    pub fn address(&self) -> Option<Address> {
        match self {
            LogicTarget::Address(a) => Some(*a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum EventNote {
    TruncatedCalldata { needed_words: usize, available_words: usize },
    NoAddressArgument,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeEvent {
    pub block: u64,
    pub tx_index: u64,
    pub tx_hash: B256,
    pub sender: Address,
    pub new_logic: LogicTarget,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Selector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<EventNote>,
}

impl UpgradeEvent {
    pub fn order_key(&self) -> (u64, u64, B256) {
        (self.block, self.tx_index, self.tx_hash)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum ChainNote {
    /// A redeploy whose trace lacks CREATE2 was left out of the chain.
    CreationWithoutCreate2 { tx_hash: B256, block: u64 },
    CreationTraceMissing { tx_hash: B256, block: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeChain {
    pub subject: Address,
    pub pattern: PatternClassification,
    /// Successful upgrades in (block, tx_index) order.
    pub events: Vec<UpgradeEvent>,
    /// Failed upgrade attempts in the same order.
    pub attempted: Vec<UpgradeEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<ChainNote>,
}

impl UpgradeChain {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("creation at {found} does not belong to the chain for {expected}")]
    AddressMismatch { expected: Address, found: Address },
    #[error("no creation events for {0}")]
    NoCreations(Address),
}

/// Turns every transaction to `subject` that calls a known upgrade function
/// into an event. Input order does not matter.
pub fn build_upgrade_chain(
    subject: Address,
    txs: &[TransactionRecord],
    db: &UpgradeFunctionDb,
    pattern: PatternClassification,
) -> UpgradeChain {
    let mut events = Vec::new();
    let mut attempted = Vec::new();
    for tx in txs.iter().filter(|t| t.to == subject) {
        let (decoded, mut notes) = match decode_upgrade_call(&tx.input, db) {
            Ok(d) => (d, vec![]),
            Err(DecodeError::NotACall { .. }) => continue,
            Err(DecodeError::Truncated { needed, available, partial }) => (
                *partial,
                vec![EventNote::TruncatedCalldata { needed_words: needed, available_words: available }],
            ),
        };
        if decoded.signature.is_none() {
            continue;
        }
        let new_logic = match decoded.new_logic_candidates.first() {
            Some(a) => LogicTarget::Address(*a),
            None => {
                if notes.is_empty() {
                    notes.push(EventNote::NoAddressArgument);
                }
                LogicTarget::Unknown
            }
        };
        let event = UpgradeEvent {
            block: tx.block,
            tx_index: tx.tx_index,
            tx_hash: tx.hash,
            sender: tx.from,
            new_logic,
            success: tx.status,
            selector: Some(decoded.selector),
            notes,
        };
        if tx.status {
            events.push(event);
        } else {
            attempted.push(event);
        }
    }
    events.sort_by_key(UpgradeEvent::order_key);
    attempted.sort_by_key(UpgradeEvent::order_key);
    UpgradeChain { subject, pattern, events, attempted, notes: vec![] }
}

/// Chains redeployments of different code at one address. Each creation
/// after the first becomes an event carrying the new code hash, provided its
/// trace shows CREATE2.
pub fn build_metamorphic_chain(
    address: Address,
    creations: &[(ContractRecord, Option<CreationTrace>)],
    pattern: PatternClassification,
) -> Result<UpgradeChain, ChainError> {
    if creations.is_empty() {
        return Err(ChainError::NoCreations(address));
    }
    if let Some((r, _)) = creations.iter().find(|(r, _)| r.address != address) {
        return Err(ChainError::AddressMismatch { expected: address, found: r.address });
    }
    let mut ordered: Vec<_> = creations.iter().collect();
    ordered.sort_by_key(|(r, _)| (r.creation_block, r.creation_tx_index, r.creation_tx));

    let mut events = Vec::new();
    let mut notes = Vec::new();
    for (i, (rec, trace)) in ordered.iter().enumerate() {
        let has_create2 = match trace {
            Some(t) => creation_trace_has_create2(t),
            None => {
                notes.push(ChainNote::CreationTraceMissing { tx_hash: rec.creation_tx, block: rec.creation_block });
                false
            }
        };
        if trace.is_some() && !has_create2 {
            notes.push(ChainNote::CreationWithoutCreate2 { tx_hash: rec.creation_tx, block: rec.creation_block });
        }
        if i == 0 || !has_create2 {
            continue;
        }
        events.push(UpgradeEvent {
            block: rec.creation_block,
            tx_index: rec.creation_tx_index,
            tx_hash: rec.creation_tx,
            sender: rec.creator,
            new_logic: LogicTarget::CodeHash(rec.code_hash()),
            success: true,
            selector: None,
            notes: vec![],
        });
    }
    Ok(UpgradeChain { subject: address, pattern, events, attempted: vec![], notes })
}

/// A run of migrations, each record's new address being the next one's old.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationChain {
    pub subject: Address,
    pub steps: Vec<MigrationRecord>,
}

/// Links migration records into chains rooted at addresses that are never a
/// migration target. Records on a cycle are chained from their smallest
/// old address.
pub fn build_migration_chains(records: &[MigrationRecord]) -> Vec<MigrationChain> {
    let mut by_old: BTreeMap<Address, Vec<&MigrationRecord>> = BTreeMap::new();
    for r in records {
        by_old.entry(r.old_address).or_default().push(r);
    }
    for v in by_old.values_mut() {
        v.sort_by_key(|r| (r.announcement_time, r.new_address));
    }
    let targets: BTreeSet<Address> = records.iter().map(|r| r.new_address).collect();

    let mut used: BTreeSet<(Address, Address)> = BTreeSet::new();
    let mut chains = Vec::new();
    let roots: Vec<Address> = by_old
        .keys()
        .filter(|a| !targets.contains(a))
        .copied()
        .chain(by_old.keys().copied())
        .collect();
    for root in roots {
        let mut steps = Vec::new();
        let mut cur = root;
        while let Some(next) = by_old
            .get(&cur)
            .and_then(|v| v.iter().find(|r| !used.contains(&(r.old_address, r.new_address))))
        {
            used.insert((next.old_address, next.new_address));
            steps.push((*next).clone());
            cur = next.new_address;
        }
        if !steps.is_empty() {
            chains.push(MigrationChain { subject: root, steps });
        }
    }
    chains
}
