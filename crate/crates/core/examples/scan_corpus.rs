//! Scans a corpus directory (default: the demo fixtures) and writes the
//! report files to an output directory.
//!
//! `cargo run --example scan_corpus -- <corpus-dir> <out-dir>`

use std::path::PathBuf;

use uscscan::chainstate::{ChainState, StateSnapshot};
use uscscan::config::ScanConfig;
use uscscan::corpus::{run_corpus, CorpusInputs, CorpusPaths};
use uscscan::UpgradeFunctionDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo"));
    let out_dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("uscscan-demo"));

    let paths = CorpusPaths::from_dir(&dir)?;
    let inputs = CorpusInputs::load(&paths)?;
    let state: Option<Box<dyn ChainState>> = match &paths.snapshot {
        Some(p) => Some(Box::new(StateSnapshot::load(p)?)),
        None => None,
    };
    let out = run_corpus(&inputs, &UpgradeFunctionDb::bundled(), &ScanConfig::default(), state, None);
    out.write(&out_dir)?;

    let report = out.report();
    println!("{:<15} {:>4} {:>6} {:>7}", "pattern", "raw", "dedup", "chains");
    for (p, c) in &report.counts {
        println!("{:<15} {:>4} {:>6} {:>7}", p.as_str(), c.raw, c.dedup, report.chains[p]);
    }
    println!("{} findings, exit code {}, written to {}", out.findings.len(), out.exit_code(), out_dir.display());
    Ok(())
}
