//! Builds upgrade chains from the audit fixtures' transaction history and
//! migration chains from their announcements.

use std::path::Path;

use uscscan::chain::{build_migration_chains, build_upgrade_chain};
use uscscan::classify::PatternClassification;
use uscscan::corpus::{CorpusInputs, CorpusPaths};
use uscscan::UpgradeFunctionDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = UpgradeFunctionDb::bundled();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/audit");
    let inputs = CorpusInputs::load(&CorpusPaths::from_dir(&dir)?)?;
    for c in &inputs.contracts {
        let chain = build_upgrade_chain(c.address, &inputs.transactions, &db, PatternClassification::not_upgradeable(c.address));
        if chain.events.is_empty() && chain.attempted.is_empty() {
            continue;
        }
        println!("{}: {} upgrades, {} failed attempts", c.address, chain.events.len(), chain.attempted.len());
        for e in chain.events.iter().chain(&chain.attempted) {
            let target = e.new_logic.address().map_or("unknown".to_string(), |a| a.to_string());
            let sig = e.selector.and_then(|s| db.get(&s)).map(|d| d.signature.to_string()).unwrap_or_default();
            println!("  block {:>4}.{:<2} {} {sig} -> {target} from {}", e.block, e.tx_index, if e.success { "ok  " } else { "fail" }, e.sender);
        }
    }
    for m in build_migration_chains(&inputs.migrations) {
        let path: Vec<String> = std::iter::once(m.subject.to_string()).chain(m.steps.iter().map(|s| format!("{} ({})", s.new_address, s.announcement_time))).collect();
        println!("migration: {}", path.join(" -> "));
    }
    Ok(())
}
