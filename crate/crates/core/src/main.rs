use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uscscan::audit::{audit_access_control, audit_logic_targets, canonical_order, StateLookup};
use uscscan::chain::build_upgrade_chain;
use uscscan::chainstate::{
    resolve_logic_address, ChainState, LayeredState, RpcClient, RpcConfig, StateSnapshot, RPC_URL_ENV,
};
use uscscan::classify::{classify, ContractAnalysis, PatternClassification};
use uscscan::config::ScanConfig;
use uscscan::corpus::{run_corpus, CorpusInputs, CorpusPaths, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};
use uscscan::disasm::disassemble;
use uscscan::features::extract_features_with;
use uscscan::primitives::{decode_hex, Address, B256};
use uscscan::records::{read_transactions, ContractRecord, CreationTrace};
use uscscan::report::{evaluate_precision, read_pattern_csv};
use uscscan::sigdb::UpgradeFunctionDb;

#[derive(Parser)]
#[command(name = "uscscan", version, about = "Detect, classify and audit upgradeable EVM contracts")]
struct Cli {
    /// JSON-RPC endpoint for code, storage and eth_call.
    #[arg(long, global = true, env = RPC_URL_ENV)]
    rpc: Option<String>,
    /// Offline state file consulted before the RPC endpoint.
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    /// Upgrade-function database; the bundled one by default.
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    #[arg(long, global = true, default_value = "uscscan-out")]
    out_dir: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML file of threshold knobs.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CorpusArgs {
    /// Directory holding contracts.jsonl, transactions.jsonl, traces.jsonl,
    /// migrations.csv, tokenlist*.json and state.json.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    contracts: Option<PathBuf>,
    #[arg(long)]
    transactions: Option<PathBuf>,
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    migrations: Option<PathBuf>,
    #[arg(long = "tokenlist")]
    tokenlists: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline over a corpus; writes report.json and findings.jsonl.
    Scan(CorpusArgs),
    /// Print the instructions and features of one bytecode.
    Disasm {
        /// Hex runtime code, or @path to a file containing hex.
        code: String,
    },
    /// Classify one contract from its code or its address.
    Classify {
        /// Hex runtime code or @path; omit to fetch by --address.
        #[arg(long)]
        code: Option<String>,
        #[arg(long)]
        address: Option<Address>,
        /// Logic contract code for proxies, when no state source is given.
        #[arg(long)]
        logic_code: Option<String>,
        /// Opcode names from the creation trace, comma separated.
        #[arg(long, value_delimiter = ',')]
        trace: Vec<String>,
    },
    /// Print upgrade chains reconstructed from transactions.
    Chains {
        #[arg(long)]
        transactions: PathBuf,
        /// Only this subject; every transaction target by default.
        #[arg(long)]
        subject: Option<Address>,
    },
    /// Run the audits over a corpus and print findings as JSON Lines.
    Audit(CorpusArgs),
    /// Precision of predictions against labels (CSV address,pattern).
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE as u8, message: message.to_string() }
}

fn internal(message: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INTERNAL as u8, message: message.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("uscscan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let config = match &cli.config {
        Some(p) => ScanConfig::load(p).map_err(usage)?,
        None => ScanConfig::default(),
    };
    let db = match &cli.db {
        Some(p) => UpgradeFunctionDb::load(p, &config.keyword_rules()).map_err(usage)?,
        None => UpgradeFunctionDb::from_text(uscscan::sigdb::DEFAULT_DB_TEXT, &config.keyword_rules()).map_err(internal)?,
    };

    match &cli.command {
        Command::Scan(args) => {
            let (inputs, state) = load_corpus(cli, args, &config)?;
            let outcome = run_corpus(&inputs, &db, &config, state, cli.jobs);
            outcome.write(&cli.out_dir).map_err(internal)?;
            let r = outcome.report();
            eprintln!(
                "scanned {} contracts, {} findings, {} errors; report in {}",
                inputs.contracts.len(),
                outcome.findings.len(),
                r.errors.len(),
                cli.out_dir.display()
            );
            Ok(outcome.exit_code())
        }
        Command::Audit(args) => {
            let (inputs, state) = load_corpus(cli, args, &config)?;
            let outcome = run_corpus(&inputs, &db, &config, state, cli.jobs);
            let mut out = std::io::stdout().lock();
            for f in &outcome.findings {
                writeln!(out, "{}", f.to_json_line()).map_err(internal)?;
            }
            Ok(outcome.exit_code())
        }
        Command::Disasm { code } => {
            let bytes = read_code(code)?;
            let stream = disassemble(&bytes);
            let mut out = std::io::stdout().lock();
            for ins in &stream.instructions {
                writeln!(out, "{ins}").map_err(internal)?;
            }
            if let Some(t) = &stream.metadata_trailer {
                writeln!(out, "metadata trailer: {} bytes", t.len()).map_err(internal)?;
            }
            let features = extract_features_with(&stream, &config.extraction());
            writeln!(out, "{}", serde_json::to_string_pretty(&features).map_err(internal)?).map_err(internal)?;
            Ok(EXIT_OK)
        }
        Command::Classify { code, address, logic_code, trace } => {
            let state = state_source(cli, &config)?;
            let cls = classify_one(&db, &config, state.as_deref(), code.as_deref(), *address, logic_code.as_deref(), trace)?;
            println!("{}", serde_json::to_string_pretty(&cls).map_err(internal)?);
            Ok(EXIT_OK)
        }
        Command::Chains { transactions, subject } => {
            let txs = read_transactions(open(transactions)?).map_err(usage)?;
            let subjects: BTreeSet<Address> = match subject {
                Some(s) => BTreeSet::from([*s]),
                None => txs.iter().map(|t| t.to).collect(),
            };
            let state = state_source(cli, &config)?;
            let mut out = std::io::stdout().lock();
            for s in subjects {
                let chain = build_upgrade_chain(s, &txs, &db, PatternClassification::not_upgradeable(s));
                if chain.events.is_empty() && chain.attempted.is_empty() {
                    continue;
                }
                writeln!(out, "{}", serde_json::to_string(&chain).map_err(internal)?).map_err(internal)?;
                if let Some(state) = &state {
                    let lookup = StateLookup::new(state.as_ref(), config.extraction());
                    let mut findings = audit_logic_targets(&chain, &lookup, &db).findings;
                    findings.extend(audit_access_control(&chain));
                    canonical_order(&mut findings);
                    for f in findings {
                        writeln!(out, "{}", f.to_json_line()).map_err(internal)?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Eval { predictions, labels, json } => {
            let preds = read_pattern_csv(open(predictions)?).map_err(usage)?;
            let labels = read_pattern_csv(open(labels)?).map_err(usage)?;
            let m = evaluate_precision(&preds, &labels);
            if *json {
                println!("{}", serde_json::to_string_pretty(&m).map_err(internal)?);
            } else {
                print!("{}", m.to_table());
            }
            Ok(EXIT_OK)
        }
    }
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, Failure> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_code(arg: &str) -> Result<Vec<u8>, Failure> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?,
        None => arg.to_string(),
    };
    decode_hex(&text).map_err(usage)
}

fn state_source(cli: &Cli, config: &ScanConfig) -> Result<Option<Box<dyn ChainState>>, Failure> {
    state_from(cli, config, None)
}

fn state_from(cli: &Cli, config: &ScanConfig, default_snapshot: Option<PathBuf>) -> Result<Option<Box<dyn ChainState>>, Failure> {
    let mut layers = LayeredState::new();
    let mut any = false;
    if let Some(p) = cli.snapshot.clone().or(default_snapshot) {
        layers.push(Box::new(StateSnapshot::load(&p).map_err(usage)?));
        any = true;
    }
    if let Some(url) = &cli.rpc {
        let mut rc = RpcConfig::new(url.clone());
        rc.max_attempts = config.rpc_max_attempts;
        rc.max_in_flight = config.rpc_max_in_flight;
        rc.initial_backoff = std::time::Duration::from_millis(config.rpc_initial_backoff_ms);
        layers.push(Box::new(RpcClient::new(rc)));
        any = true;
    }
    Ok(any.then(|| Box::new(layers) as Box<dyn ChainState>))
}

fn load_corpus(
    cli: &Cli,
    args: &CorpusArgs,
    config: &ScanConfig,
) -> Result<(CorpusInputs, Option<Box<dyn ChainState>>), Failure> {
    let mut paths = match &args.corpus {
        Some(dir) => CorpusPaths::from_dir(dir).map_err(usage)?,
        None => CorpusPaths::default(),
    };
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            *slot = v.clone();
        }
    };
    set(&mut paths.contracts, &args.contracts);
    set(&mut paths.transactions, &args.transactions);
    set(&mut paths.traces, &args.traces);
    set(&mut paths.migrations, &args.migrations);
    paths.tokenlists.extend(args.tokenlists.iter().cloned());

    let inputs = CorpusInputs::load(&paths).map_err(|e| Failure { code: e.exit_code() as u8, message: e.to_string() })?;
    let state = state_from(cli, config, paths.snapshot.clone())?;
    Ok((inputs, state))
}

fn classify_one(
    db: &UpgradeFunctionDb,
    config: &ScanConfig,
    state: Option<&dyn ChainState>,
    code: Option<&str>,
    address: Option<Address>,
    logic_code: Option<&str>,
    trace: &[String],
) -> Result<PatternClassification, Failure> {
    let address = address.unwrap_or(Address::ZERO);
    let bytecode = match (code, state) {
        (Some(c), _) => read_code(c)?,
        (None, Some(s)) if !address.is_zero() => s.code(&address).map_err(internal)?,
        _ => return Err(usage("give --code, or --address with --rpc/--snapshot")),
    };
    let record = ContractRecord {
        address,
        bytecode,
        creator: Address::ZERO,
        creation_tx: B256::ZERO,
        creation_block: 0,
        creation_tx_index: 0,
        created_by_contract: false,
    };
    let mut analysis = ContractAnalysis::new(record, db, &config.extraction());
    if let Some(lc) = logic_code {
        let resolution = uscscan::chainstate::LogicResolution {
            address: Address::ZERO,
            probe: uscscan::chainstate::LogicProbe::ImplementationSlot,
        };
        analysis = analysis.with_logic(resolution, &read_code(lc)?, db, &config.extraction());
    } else if let (Some(s), false) = (state, address.is_zero()) {
        if analysis.features.has_delegatecall {
            if let Some(res) = resolve_logic_address(s, &address).map_err(internal)? {
                let code = s.code(&res.address).map_err(internal)?;
                analysis = analysis.with_logic(res, &code, db, &config.extraction());
            }
        }
    }
    if !trace.is_empty() {
        analysis = analysis.with_creation_trace(CreationTrace {
            tx_hash: B256::ZERO,
            created_address: address,
            opcodes: trace.to_vec(),
        });
    }
    Ok(classify(&analysis))
}
