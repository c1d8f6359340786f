//! End-to-end corpus scan: load, group, analyze, classify, chain, audit and
//! report.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::audit::{
    audit_access_control, audit_hierarchy, audit_logic_targets, audit_uninitialized_logic, audit_version,
    canonical_order, SecurityFinding, Severity, StateLookup, UnresolvedCheck,
};
use crate::chain::{build_metamorphic_chain, build_migration_chains, build_upgrade_chain, MigrationChain, UpgradeChain};
use crate::chainstate::{fetch_storage_sample, resolve_logic_address, ADMIN_SLOT, IMPLEMENTATION_SLOT};
use crate::chainstate::{ChainState, CodeMap, LayeredState, StateError};
use crate::classify::{classify, resolve_strategy_vs_data, ContractAnalysis, Pattern, PatternClassification};
use crate::config::ScanConfig;
use crate::dispatch::TEMPLATE_SET_VERSION;
use crate::features::{features_of, BytecodeFeatures};
use crate::primitives::{Address, Selector, B256};
use crate::records::{
    read_contracts, read_migrations, read_tokenlist, read_traces, read_transactions, ContractRecord, CreationTrace,
    IngestError, MigrationRecord, TokenList, TransactionRecord,
};
use crate::report::{dedup_group, subjects_per_category, CorpusReport, ReportHeader, RunError};
use crate::sigdb::UpgradeFunctionDb;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

/// `upgradeTo(address)` and `upgradeToAndCall(address,bytes)`: proxy upgrade
/// entry points assumed even when no proxy in the corpus exposes them.
pub const BASELINE_PROXY_UPGRADE_SELECTORS: [Selector; 2] =
    [Selector([0x36, 0x59, 0xcf, 0xe6]), Selector([0x4f, 0x1e, 0xf2, 0x86])];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CorpusError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CorpusError::MissingInput(_) | CorpusError::Ingest(_) => EXIT_USAGE,
            CorpusError::Io { .. } => EXIT_INTERNAL,
        }
    }
}

/// Input file locations. Only `contracts` is mandatory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusPaths {
    pub contracts: Option<PathBuf>,
    pub transactions: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub migrations: Option<PathBuf>,
    pub tokenlists: Vec<PathBuf>,
    pub snapshot: Option<PathBuf>,
}

impl CorpusPaths {
    /// Picks up the conventional file names in `dir`: `contracts.jsonl`,
    /// `transactions.jsonl`, `traces.jsonl`, `migrations.csv`,
    /// `tokenlist*.json` and `state.json`.
    pub fn from_dir(dir: &Path) -> Result<Self, CorpusError> {
        let existing = |name: &str| {
            let p = dir.join(name);
            p.is_file().then_some(p)
        };
        let mut tokenlists: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|source| CorpusError::Io { path: dir.display().to_string(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("tokenlist") && n.ends_with(".json"))
            })
            .collect();
        tokenlists.sort();
        Ok(Self {
            contracts: existing("contracts.jsonl"),
            transactions: existing("transactions.jsonl"),
            traces: existing("traces.jsonl"),
            migrations: existing("migrations.csv"),
            tokenlists,
            snapshot: existing("state.json"),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusInputs {
    pub contracts: Vec<ContractRecord>,
    pub transactions: Vec<TransactionRecord>,
    pub traces: Vec<CreationTrace>,
    pub migrations: Vec<MigrationRecord>,
    pub tokenlists: Vec<TokenList>,
}

fn open(path: &Path) -> Result<std::io::BufReader<fs::File>, CorpusError> {
    fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
}

impl CorpusInputs {
    pub fn load(paths: &CorpusPaths) -> Result<Self, CorpusError> {
        let contracts_path = paths
            .contracts
            .as_ref()
            .ok_or_else(|| CorpusError::MissingInput("a contracts file is required".into()))?;
        let mut inputs = CorpusInputs { contracts: read_contracts(open(contracts_path)?)?, ..Default::default() };
        if let Some(p) = &paths.transactions {
            inputs.transactions = read_transactions(open(p)?)?;
        }
        if let Some(p) = &paths.traces {
            inputs.traces = read_traces(open(p)?)?;
        }
        if let Some(p) = &paths.migrations {
            inputs.migrations = read_migrations(open(p)?)?;
        }
        for p in &paths.tokenlists {
            inputs.tokenlists.push(read_tokenlist(open(p)?)?);
        }
        Ok(inputs)
    }
}

/// Per-contract results.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractResult {
    pub analysis: ContractAnalysis,
    pub classification: PatternClassification,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusOutcome {
    pub report: Option<CorpusReport>,
    pub results: Vec<ContractResult>,
    pub chains: Vec<UpgradeChain>,
    pub migration_chains: Vec<MigrationChain>,
    pub findings: Vec<SecurityFinding>,
    pub unresolved: Vec<UnresolvedCheck>,
}

impl CorpusOutcome {
    pub fn report(&self) -> &CorpusReport {
        self.report.as_ref().expect("report is set by run_corpus")
    }

    pub fn has_critical(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Critical)
    }

    pub fn exit_code(&self) -> i32 {
        if self.has_critical() {
            EXIT_CRITICAL
        } else {
            EXIT_OK
        }
    }

    pub fn predictions(&self) -> BTreeMap<Address, Pattern> {
        self.results.iter().map(|r| (r.analysis.record.address, r.classification.pattern)).collect()
    }

    /// Writes `report.json`, `findings.jsonl`, `classifications.jsonl`,
    /// `chains.jsonl` and `predictions.csv`.
    pub fn write(&self, out_dir: &Path) -> Result<(), CorpusError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| CorpusError::Io { path, source }
        };
        fs::create_dir_all(out_dir).map_err(io(out_dir))?;

        let p = out_dir.join("report.json");
        fs::write(&p, self.report().to_json()).map_err(io(&p))?;

        let p = out_dir.join("findings.jsonl");
        write_lines(&p, self.findings.iter().map(SecurityFinding::to_json_line)).map_err(io(&p))?;

        let p = out_dir.join("classifications.jsonl");
        write_lines(
            &p,
            self.results.iter().map(|r| serde_json::to_string(&r.classification).expect("serializes")),
        )
        .map_err(io(&p))?;

        let p = out_dir.join("chains.jsonl");
        write_lines(&p, self.chains.iter().map(|c| serde_json::to_string(c).expect("serializes"))).map_err(io(&p))?;

        let p = out_dir.join("predictions.csv");
        let mut lines = vec!["address,pattern".to_string()];
        lines.extend(self.predictions().iter().map(|(a, p)| format!("{a},{p}")));
        write_lines(&p, lines.into_iter()).map_err(io(&p))?;
        Ok(())
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for line in lines {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

struct Context<'a> {
    db: &'a UpgradeFunctionDb,
    config: &'a ScanConfig,
    state: &'a dyn ChainState,
    external_state: bool,
    features_by_hash: HashMap<B256, BytecodeFeatures>,
    traces: HashMap<Address, Vec<&'a CreationTrace>>,
    txs_to: HashMap<Address, Vec<TransactionRecord>>,
    history: HashMap<Address, Vec<&'a ContractRecord>>,
}

impl Context<'_> {
    fn trace_for(&self, rec: &ContractRecord) -> Option<CreationTrace> {
        let traces = self.traces.get(&rec.address)?;
        traces
            .iter()
            .find(|t| t.tx_hash == rec.creation_tx)
            .or_else(|| (traces.len() == 1).then(|| &traces[0]))
            .map(|t| (*t).clone())
    }

    fn txs_to(&self, address: &Address) -> &[TransactionRecord] {
        self.txs_to.get(address).map_or(&[], Vec::as_slice)
    }

    fn sample_slots(&self) -> Vec<B256> {
        let mut slots: Vec<B256> = (0..self.config.sample_slots).map(B256::from_u64).collect();
        slots.push(ADMIN_SLOT);
        slots.push(IMPLEMENTATION_SLOT);
        slots
    }
}

fn analyze(rec: &ContractRecord, ctx: &Context<'_>, errors: &mut Vec<RunError>) -> ContractResult {
    let features = ctx.features_by_hash[&rec.code_hash()].clone();
    let mut analysis = ContractAnalysis::from_features(rec.clone(), features, ctx.db);

    if analysis.features.has_delegatecall && ctx.external_state {
        match resolve_logic_address(ctx.state, &rec.address) {
            Ok(Some(res)) => match ctx.state.code(&res.address) {
                Ok(code) => analysis = analysis.with_logic(res, &code, ctx.db, &ctx.config.extraction()),
                Err(e) => errors.push(run_error(Some(rec.address), "fetch_logic_code", &e)),
            },
            Ok(None) | Err(StateError::Missing(_)) => {}
            Err(e) => errors.push(run_error(Some(rec.address), "resolve_logic_address", &e)),
        }
    }
    if let Some(trace) = ctx.trace_for(rec) {
        analysis = analysis.with_creation_trace(trace);
    }

    let classification = resolve_strategy_vs_data(
        &classify(&analysis),
        ctx.txs_to(&rec.address),
        ctx.db,
        ctx.config.direction_threshold,
    );
    ContractResult { analysis, classification }
}

fn run_error(address: Option<Address>, stage: &str, err: &dyn std::fmt::Display) -> RunError {
    RunError { address, stage: stage.to_string(), message: err.to_string() }
}

struct Audited {
    chain: Option<UpgradeChain>,
    findings: Vec<SecurityFinding>,
    unresolved: Vec<UnresolvedCheck>,
    errors: Vec<RunError>,
}

fn chain_and_audit(r: &ContractResult, ctx: &Context<'_>, proxy_selectors: &BTreeSet<Selector>) -> Audited {
    let mut out = Audited { chain: None, findings: vec![], unresolved: vec![], errors: vec![] };
    let cls = &r.classification;
    let address = r.analysis.record.address;

    match cls.pattern {
        Pattern::NotUpgradeable | Pattern::Migration => {}
        Pattern::Metamorphic => {
            let creations: Vec<_> = ctx.history[&address].iter().map(|c| ((*c).clone(), ctx.trace_for(c))).collect();
            match build_metamorphic_chain(address, &creations, cls.clone()) {
                Ok(chain) => out.chain = Some(chain),
                Err(e) => out.errors.push(run_error(Some(address), "build_metamorphic_chain", &e)),
            }
        }
        _ => {
            let chain = build_upgrade_chain(address, ctx.txs_to(&address), ctx.db, cls.clone());
            let lookup = StateLookup::new(ctx.state, ctx.config.extraction());
            let logic = audit_logic_targets(&chain, &lookup, ctx.db);
            out.findings.extend(logic.findings);
            out.unresolved.extend(logic.unresolved);
            out.findings.extend(audit_access_control(&chain));
            out.chain = Some(chain);
        }
    }

    if matches!(cls.pattern, Pattern::Proxy | Pattern::Mix) && ctx.external_state {
        if let (Some(logic), Some(_)) = (r.analysis.logic_address, &r.analysis.logic_features) {
            match fetch_storage_sample(ctx.state, &logic.address, &ctx.sample_slots()) {
                Ok(sample) => out.findings.extend(audit_uninitialized_logic(&r.analysis, cls, &sample, ctx.db)),
                Err(e) => out.errors.push(run_error(Some(logic.address), "fetch_storage_sample", &e)),
            }
        }
    }
    out.findings.extend(audit_hierarchy(&r.analysis, cls, proxy_selectors));
    out
}

fn header(inputs: &CorpusInputs, db: &UpgradeFunctionDb) -> ReportHeader {
    ReportHeader {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: BTreeMap::from([
            ("contracts".to_string(), inputs.contracts.len()),
            ("transactions".to_string(), inputs.transactions.len()),
            ("traces".to_string(), inputs.traces.len()),
            ("migrations".to_string(), inputs.migrations.len()),
            ("tokenlists".to_string(), inputs.tokenlists.len()),
        ]),
        db_version: db.version(),
        related_words_version: db.rules_version().to_string(),
        template_set_version: TEMPLATE_SET_VERSION.to_string(),
    }
}

/// Runs the whole pipeline. `state` supplies storage and code beyond the
/// corpus (an RPC client or snapshot); without it logic addresses are not
/// resolved and logic storage is not sampled. `jobs` bounds the worker pool.
pub fn run_corpus(
    inputs: &CorpusInputs,
    db: &UpgradeFunctionDb,
    config: &ScanConfig,
    state: Option<Box<dyn ChainState>>,
    jobs: Option<usize>,
) -> CorpusOutcome {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    match builder.build() {
        Ok(pool) => pool.install(|| run_in_pool(inputs, db, config, state)),
        Err(_) => run_in_pool(inputs, db, config, state),
    }
}

fn run_in_pool(
    inputs: &CorpusInputs,
    db: &UpgradeFunctionDb,
    config: &ScanConfig,
    state: Option<Box<dyn ChainState>>,
) -> CorpusOutcome {
    let mut report = CorpusReport::empty(header(inputs, db), config.fingerprint(db));

    // The latest record per address is what gets classified; earlier ones
    // only feed redeploy chains.
    let mut history: HashMap<Address, Vec<&ContractRecord>> = HashMap::new();
    for c in &inputs.contracts {
        history.entry(c.address).or_default().push(c);
    }
    for v in history.values_mut() {
        v.sort_by_key(|c| (c.creation_block, c.creation_tx_index, c.creation_tx));
    }
    let mut latest: Vec<ContractRecord> = history.values().map(|v| (*v.last().unwrap()).clone()).collect();
    latest.sort_by_key(|c| c.address);

    let groups = dedup_group(&latest);
    let extraction = config.extraction();
    let features_by_hash: HashMap<B256, BytecodeFeatures> = groups
        .par_iter()
        .map(|g| (g.code_hash, features_of(&g.representative.bytecode, &extraction)))
        .collect();

    let external_state = state.is_some();
    let mut layered = LayeredState::new()
        .with(CodeMap(latest.iter().map(|c| (c.address, c.bytecode.clone())).collect()));
    if let Some(s) = state {
        layered.push(s);
    }

    let mut traces: HashMap<Address, Vec<&CreationTrace>> = HashMap::new();
    for t in &inputs.traces {
        traces.entry(t.created_address).or_default().push(t);
    }
    let mut txs_to: HashMap<Address, Vec<TransactionRecord>> = HashMap::new();
    for t in &inputs.transactions {
        txs_to.entry(t.to).or_default().push(t.clone());
    }

    let ctx = Context {
        db,
        config,
        state: &layered,
        external_state,
        features_by_hash,
        traces,
        txs_to,
        history,
    };

    let analyzed: Vec<(Option<ContractResult>, Vec<RunError>)> = latest
        .par_iter()
        .map(|rec| {
            let mut errors = Vec::new();
            match catch_unwind(AssertUnwindSafe(|| analyze(rec, &ctx, &mut errors))) {
                Ok(r) => (Some(r), errors),
                Err(_) => {
                    errors.push(run_error(Some(rec.address), "analyze", &"analysis panicked"));
                    (None, errors)
                }
            }
        })
        .collect();
    let mut results = Vec::new();
    for (r, errs) in analyzed {
        results.extend(r);
        report.errors.extend(errs);
    }

    let migrated: BTreeSet<Address> = inputs.migrations.iter().map(|m| m.old_address).collect();
    for r in &mut results {
        if r.classification.pattern == Pattern::NotUpgradeable && migrated.contains(&r.analysis.record.address) {
            r.classification.pattern = Pattern::Migration;
        }
    }

    let mut proxy_selectors: BTreeSet<Selector> = BASELINE_PROXY_UPGRADE_SELECTORS.into_iter().collect();
    for r in results.iter().filter(|r| matches!(r.classification.pattern, Pattern::Proxy | Pattern::Mix)) {
        proxy_selectors.extend(&r.analysis.upgrade_matches.local);
        if let Some(m) = &r.analysis.logic_upgrade_matches {
            proxy_selectors.extend(&m.local);
        }
    }

    let audited: Vec<Audited> = results.par_iter().map(|r| chain_and_audit(r, &ctx, &proxy_selectors)).collect();

    let mut outcome = CorpusOutcome::default();
    for a in audited {
        outcome.chains.extend(a.chain);
        outcome.findings.extend(a.findings);
        outcome.unresolved.extend(a.unresolved);
        report.errors.extend(a.errors);
    }
    outcome.findings.extend(audit_version(&inputs.migrations, &inputs.transactions, &inputs.tokenlists));
    canonical_order(&mut outcome.findings);
    outcome.unresolved.sort();
    outcome.migration_chains = build_migration_chains(&inputs.migrations);

    // counts
    let pattern_of: HashMap<Address, Pattern> =
        results.iter().map(|r| (r.analysis.record.address, r.classification.pattern)).collect();
    for r in &results {
        report.counts.get_mut(&r.classification.pattern).expect("all patterns present").raw += 1;
    }
    for g in groups.iter().filter(|g| !g.factory_created) {
        if let Some(p) = pattern_of.get(&g.representative.address) {
            report.counts.get_mut(p).expect("all patterns present").dedup += 1;
        }
    }
    for c in outcome.chains.iter().filter(|c| !c.is_empty()) {
        *report.chains.get_mut(&c.pattern.pattern).expect("all patterns present") += 1;
    }
    *report.chains.get_mut(&Pattern::Migration).expect("present") += outcome.migration_chains.len();
    for f in &outcome.findings {
        *report.findings.get_mut(&f.category).expect("all categories present") += 1;
    }
    report.finding_subjects.extend(subjects_per_category(&outcome.findings));
    for u in &outcome.unresolved {
        report.errors.push(RunError {
            address: Some(u.subject),
            stage: format!("audit_logic_targets[{}]", u.chain_position),
            message: u.reason.clone(),
        });
    }
    report.errors.sort();

    outcome.results = results;
    outcome.report = Some(report);
    outcome
}
