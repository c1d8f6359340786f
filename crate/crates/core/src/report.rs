//! Bytecode grouping, corpus report types and precision evaluation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::audit::FindingCategory;
use crate::classify::Pattern;
use crate::primitives::{Address, B256};
use crate::records::ContractRecord;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BytecodeGroup {
    /// keccak-256 of the exact runtime bytes, metadata trailer included.
    pub code_hash: B256,
    /// The earliest-created member.
    pub representative: ContractRecord,
    pub member_count: usize,
    pub members: Vec<Address>,
    /// Every member was created by a contract.
    pub factory_created: bool,
}

/// Groups contracts with identical runtime bytes. Groups come out ordered
/// by their representative's creation position.
pub fn dedup_group(contracts: &[ContractRecord]) -> Vec<BytecodeGroup> {
    let mut by_hash: BTreeMap<B256, Vec<&ContractRecord>> = BTreeMap::new();
    for c in contracts {
        by_hash.entry(c.code_hash()).or_default().push(c);
    }
    let mut groups: Vec<BytecodeGroup> = by_hash
        .into_iter()
        .map(|(code_hash, mut members)| {
            members.sort_by_key(|c| (c.creation_block, c.creation_tx_index, c.address));
            BytecodeGroup {
                code_hash,
                representative: members[0].clone(),
                member_count: members.len(),
                members: members.iter().map(|c| c.address).collect(),
                factory_created: members.iter().all(|c| c.created_by_contract),
            }
        })
        .collect();
    groups.sort_by_key(|g| {
        let r = &g.representative;
        (r.creation_block, r.creation_tx_index, r.address, g.code_hash)
    });
    groups
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCount {
    /// Every analyzed contract.
    pub raw: usize,
    /// Bytecode groups, excluding factory-created ones, counted by representative.
    pub dedup: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub inputs: BTreeMap<String, usize>,
    pub db_version: String,
    pub related_words_version: String,
    pub template_set_version: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunError {
    pub address: Option<Address>,
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub header: ReportHeader,
    pub counts: BTreeMap<Pattern, PatternCount>,
    pub chains: BTreeMap<Pattern, usize>,
    /// One per finding occurrence.
    pub findings: BTreeMap<FindingCategory, usize>,
    /// Distinct subjects per category.
    pub finding_subjects: BTreeMap<FindingCategory, usize>,
    pub errors: Vec<RunError>,
    pub config_fingerprint: String,
}

impl CorpusReport {
    pub fn empty(header: ReportHeader, config_fingerprint: String) -> Self {
        Self {
            header,
            counts: Pattern::ALL.iter().map(|p| (*p, PatternCount::default())).collect(),
            chains: Pattern::ALL.iter().map(|p| (*p, 0)).collect(),
            findings: FindingCategory::ALL.iter().map(|c| (*c, 0)).collect(),
            finding_subjects: FindingCategory::ALL.iter().map(|c| (*c, 0)).collect(),
            errors: vec![],
            config_fingerprint,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report without its header, for reproducibility comparisons.
    pub fn body_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("header");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub tp: u64,
    pub fp: u64,
}

impl PrecisionRow {
    pub fn predicted(&self) -> u64 {
        self.tp + self.fp
    }

    /// `None` when nothing was predicted.
    pub fn precision(&self) -> Option<f64> {
        (self.predicted() > 0).then(|| self.tp as f64 / self.predicted() as f64)
    }

    /// Percentage to two decimals, rounded half to even on exact integers.
    pub fn percent(&self) -> Option<String> {
        (self.predicted() > 0).then(|| format_percent(self.tp, self.predicted()))
    }
}

/// `num / den` as a percentage with two decimals, rounded half to even.
/// Computed on integers so that ties are detected exactly.
pub fn format_percent(num: u64, den: u64) -> String {
    assert!(den > 0, "percentage of an empty row");
    let scaled = num as u128 * 10_000;
    let den = den as u128;
    let mut q = scaled / den;
    let r = scaled % den;
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    format!("{}.{:02}", q / 100, q % 100)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Rows only for patterns predicted for at least one labeled address.
    pub rows: BTreeMap<Pattern, PrecisionRow>,
    pub total: PrecisionRow,
    /// Labeled addresses with no prediction.
    pub coverage_gap: Vec<Address>,
    /// Predicted addresses with no label; not scored.
    pub unlabeled: usize,
}

impl EvalMetrics {
    pub fn from_rows(rows: BTreeMap<Pattern, PrecisionRow>) -> Self {
        let total = rows.values().fold(PrecisionRow::default(), |acc, r| PrecisionRow {
            tp: acc.tp + r.tp,
            fp: acc.fp + r.fp,
        });
        Self { rows, total, coverage_gap: vec![], unlabeled: 0 }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("pattern            tp     fp  precision\n");
        let line = |name: &str, r: &PrecisionRow| {
            format!("{name:<16} {:>4} {:>6}  {:>8}%\n", r.tp, r.fp, r.percent().unwrap_or_else(|| "-".into()))
        };
        for (p, r) in &self.rows {
            out.push_str(&line(p.as_str(), r));
        }
        out.push_str(&line("Total", &self.total));
        if !self.coverage_gap.is_empty() {
            out.push_str(&format!("labels without prediction: {}\n", self.coverage_gap.len()));
        }
        out
    }
}

/// Scores predictions against labels for the addresses both cover.
pub fn evaluate_precision(predictions: &BTreeMap<Address, Pattern>, labels: &BTreeMap<Address, Pattern>) -> EvalMetrics {
    let mut rows: BTreeMap<Pattern, PrecisionRow> = BTreeMap::new();
    let mut coverage_gap = Vec::new();
    for (addr, label) in labels {
        match predictions.get(addr) {
            Some(pred) => {
                let row = rows.entry(*pred).or_default();
                if pred == label {
                    row.tp += 1;
                } else {
                    row.fp += 1;
                }
            }
            None => coverage_gap.push(*addr),
        }
    }
    let mut m = EvalMetrics::from_rows(rows);
    m.coverage_gap = coverage_gap;
    m.unlabeled = predictions.keys().filter(|a| !labels.contains_key(a)).count();
    m
}

/// Distinct subjects per category.
pub fn subjects_per_category<'a>(
    findings: impl IntoIterator<Item = &'a crate::audit::SecurityFinding>,
) -> BTreeMap<FindingCategory, usize> {
    let mut sets: BTreeMap<FindingCategory, BTreeSet<Address>> = BTreeMap::new();
    for f in findings {
        sets.entry(f.category).or_default().insert(f.subject);
    }
    sets.into_iter().map(|(c, s)| (c, s.len())).collect()
}

/// Reads `address,pattern` CSV (header required), as written for predictions
/// and expected for labels.
pub fn read_pattern_csv<R: std::io::Read>(reader: R) -> Result<BTreeMap<Address, Pattern>, String> {
    #[derive(Deserialize)]
    struct Row {
        address: Address,
        pattern: String,
    }
    let mut out = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| e.to_string())?;
        let pattern = row.pattern.parse()?;
        out.insert(row.address, pattern);
    }
    Ok(out)
}
