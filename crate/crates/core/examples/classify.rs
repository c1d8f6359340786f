//! Classifies each contract of the pattern fixtures and prints the pattern,
//! the satisfied rules and their evidence.

use std::path::Path;

use uscscan::config::ScanConfig;
use uscscan::corpus::{run_corpus, CorpusInputs, CorpusPaths};
use uscscan::chainstate::StateSnapshot;
use uscscan::UpgradeFunctionDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/patterns");
    let inputs = CorpusInputs::load(&CorpusPaths::from_dir(&dir)?)?;
    let state = StateSnapshot::load(&dir.join("state.json"))?;
    let out = run_corpus(&inputs, &UpgradeFunctionDb::bundled(), &ScanConfig::default(), Some(Box::new(state)), None);
    for r in &out.results {
        let c = &r.classification;
        let rules: Vec<String> = c.satisfied_rules().iter().map(|r| format!("{r:?}")).collect();
        print!("{} {:<15} rules [{}]", c.subject, c.pattern.as_str(), rules.join(", "));
        if c.uups {
            print!(" uups");
        }
        if let Some(s) = c.secondary_pattern {
            print!(" secondary {s}");
        }
        if !c.degradations.is_empty() {
            print!(" degraded {:?}", c.degradations);
        }
        println!();
        for e in &c.evidence {
            println!("    {}", serde_json::to_string(e)?);
        }
    }
    Ok(())
}
