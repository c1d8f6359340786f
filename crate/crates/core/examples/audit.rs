//! Runs the security audit over the audit fixtures and prints one JSON line
//! per finding followed by a per-category summary.

use std::collections::BTreeMap;
use std::path::Path;

use uscscan::chainstate::StateSnapshot;
use uscscan::config::ScanConfig;
use uscscan::corpus::{run_corpus, CorpusInputs, CorpusPaths};
use uscscan::UpgradeFunctionDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/audit");
    let inputs = CorpusInputs::load(&CorpusPaths::from_dir(&dir)?)?;
    let state = StateSnapshot::load(&dir.join("state.json"))?;
    let out = run_corpus(&inputs, &UpgradeFunctionDb::bundled(), &ScanConfig::default(), Some(Box::new(state)), Some(2));
    for f in &out.findings {
        println!("{}", f.to_json_line());
    }
    let mut by_severity: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for f in &out.findings {
        by_severity.entry(format!("{:?}", f.severity)).or_default().push(f.category.as_str());
    }
    for (sev, cats) in by_severity {
        println!("{sev:<8} {}", cats.join(", "));
    }
    println!("exit code {}", out.exit_code());
    Ok(())
}
