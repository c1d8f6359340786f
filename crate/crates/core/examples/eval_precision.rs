//! Scores pattern predictions against labels: first the pattern fixtures,
//! then a labeled sample given as per-pattern true/false positive counts.

use std::collections::BTreeMap;
use std::path::Path;

use uscscan::chainstate::StateSnapshot;
use uscscan::classify::Pattern;
use uscscan::config::ScanConfig;
use uscscan::corpus::{run_corpus, CorpusInputs, CorpusPaths};
use uscscan::report::{evaluate_precision, read_pattern_csv, EvalMetrics, PrecisionRow};
use uscscan::UpgradeFunctionDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/patterns");
    let inputs = CorpusInputs::load(&CorpusPaths::from_dir(&dir)?)?;
    let state = StateSnapshot::load(&dir.join("state.json"))?;
    let out = run_corpus(&inputs, &UpgradeFunctionDb::bundled(), &ScanConfig::default(), Some(Box::new(state)), None);
    let labels = read_pattern_csv(std::fs::File::open(dir.join("labels.csv"))?)?;
    print!("{}", evaluate_precision(&out.predictions(), &labels).to_table());

    let sample = [
        (Pattern::Proxy, 244, 6),
        (Pattern::DataSeparation, 43, 2),
        (Pattern::Strategy, 70, 2),
        (Pattern::DataOrStrategy, 308, 15),
        (Pattern::Mix, 50, 3),
        (Pattern::Metamorphic, 7, 0),
    ];
    let rows: BTreeMap<Pattern, PrecisionRow> = sample.into_iter().map(|(p, tp, fp)| (p, PrecisionRow { tp, fp })).collect();
    println!();
    print!("{}", EvalMetrics::from_rows(rows).to_table());
    Ok(())
}
