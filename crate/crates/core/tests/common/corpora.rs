//! The fixture corpora under `fixtures/`, built from code so the committed
//! files can be checked against their source.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use uscscan::chainstate::{ChainState, StateSnapshot, BEACON_SLOT, IMPLEMENTATION_ACCESSOR, IMPLEMENTATION_SLOT};
use uscscan::classify::Pattern;
use uscscan::corpus::CorpusInputs;
use uscscan::records::{
    write_contracts, write_migrations, write_tokenlist, write_traces, write_transactions, AnnouncementTime,
    ContractRecord, CreationTrace, MigrationRecord, TokenList, TransactionRecord,
};
use uscscan::{Address, B256};

use super::abi::{encode_call, Token};
use super::contracts::{contract, forwarder, minimal_proxy, old_solc_contract, storage_only, with_metadata, Body, NoMatch};

pub fn addr(tag: u8, n: u8) -> Address {
    let mut a = [0u8; 20];
    a[0] = tag;
    a[19] = n;
    Address(a)
}

fn word(v: u64) -> B256 {
    B256::from_u64(v)
}

/// Expected finding: category name, subject, severity name.
pub type ExpectedFinding = (&'static str, Address, &'static str);

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub contracts: Vec<ContractRecord>,
    pub transactions: Vec<TransactionRecord>,
    pub traces: Vec<CreationTrace>,
    pub migrations: Vec<MigrationRecord>,
    pub tokenlists: Vec<TokenList>,
    pub state: StateSnapshot,
    pub labels: BTreeMap<Address, Pattern>,
    pub expected_findings: Vec<ExpectedFinding>,
    next_tx: u64,
}

impl Corpus {
    fn deploy(&mut self, address: Address, code: Vec<u8>, block: u64, creator: Address, by_contract: bool) -> B256 {
        let creation_tx = B256::keccak(format!("create {address} {block}").as_bytes());
        self.contracts.push(ContractRecord {
            address,
            bytecode: code,
            creator,
            creation_tx,
            creation_block: block,
            creation_tx_index: 0,
            created_by_contract: by_contract,
        });
        creation_tx
    }

    fn trace(&mut self, tx_hash: B256, created: Address, opcodes: &[&str]) {
        self.traces.push(CreationTrace {
            tx_hash,
            created_address: created,
            opcodes: opcodes.iter().map(|s| s.to_string()).collect(),
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn tx(&mut self, from: Address, to: Address, input: Vec<u8>, block: u64, ok: bool, from_contract: Option<bool>) {
        self.next_tx += 1;
        let index = self.next_tx;
        self.transactions.push(TransactionRecord {
            hash: B256::keccak(format!("tx {index}").as_bytes()),
            from,
            to,
            input,
            block,
            tx_index: index,
            status: ok,
            caller_is_contract: from_contract,
            timestamp: Some(1_600_000_000 + block * 12),
        });
    }

    fn upgrade_to(&mut self, from: Address, proxy: Address, target: Address, block: u64, ok: bool) {
        let input = encode_call("upgradeTo(address)", &[Token::Address(target.0)]);
        self.tx(from, proxy, input, block, ok, Some(false));
    }

    fn set_impl(&mut self, proxy: Address, logic: Address) {
        self.state.set_storage(proxy, IMPLEMENTATION_SLOT, B256::from_address(&logic));
    }

    fn label(&mut self, address: Address, pattern: Pattern) {
        self.labels.insert(address, pattern);
    }

    pub fn inputs(&self) -> CorpusInputs {
        CorpusInputs {
            contracts: self.contracts.clone(),
            transactions: self.transactions.clone(),
            traces: self.traces.clone(),
            migrations: self.migrations.clone(),
            tokenlists: self.tokenlists.clone(),
        }
    }

    pub fn state_box(&self) -> Box<dyn ChainState> {
        Box::new(self.state.clone())
    }

    /// File name and contents, in the layout `CorpusPaths::from_dir` reads.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut buf = Vec::new();
        write_contracts(&mut buf, &self.contracts).unwrap();
        out.push(("contracts.jsonl".to_string(), std::mem::take(&mut buf)));
        if !self.transactions.is_empty() {
            write_transactions(&mut buf, &self.transactions).unwrap();
            out.push(("transactions.jsonl".to_string(), std::mem::take(&mut buf)));
        }
        if !self.traces.is_empty() {
            write_traces(&mut buf, &self.traces).unwrap();
            out.push(("traces.jsonl".to_string(), std::mem::take(&mut buf)));
        }
        if !self.migrations.is_empty() {
            write_migrations(&mut buf, &self.migrations).unwrap();
            out.push(("migrations.csv".to_string(), std::mem::take(&mut buf)));
        }
        for (i, list) in self.tokenlists.iter().enumerate() {
            write_tokenlist(&mut buf, list).unwrap();
            buf.push(b'\n');
            let name = if i == 0 { "tokenlist.json".to_string() } else { format!("tokenlist-{i}.json") };
            out.push((name, std::mem::take(&mut buf)));
        }
        let mut state = serde_json::to_vec_pretty(&self.state).unwrap();
        state.push(b'\n');
        out.push(("state.json".to_string(), state));
        if !self.labels.is_empty() {
            let mut text = String::from("address,pattern\n");
            for (a, p) in &self.labels {
                text.push_str(&format!("{a},{p}\n"));
            }
            out.push(("labels.csv".to_string(), text.into_bytes()));
        }
        if !self.expected_findings.is_empty() {
            let mut rows: Vec<_> = self.expected_findings.clone();
            rows.sort();
            let mut text = String::from("category,subject,severity\n");
            for (c, s, sev) in rows {
                text.push_str(&format!("{c},{s},{sev}\n"));
            }
            out.push(("expected_findings.csv".to_string(), text.into_bytes()));
        }
        out
    }

    pub fn write(&self, dir: &Path) {
        std::fs::create_dir_all(dir).unwrap();
        for (name, bytes) in self.files() {
            std::fs::write(dir.join(name), bytes).unwrap();
        }
    }
}

const ADMIN: Address = Address([0xe0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
const ATTACKER: Address = Address([0xe0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x66]);
const FACTORY: Address = Address([0xfa, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);

fn user(n: u8) -> Address {
    addr(0xe1, n)
}

fn caller_contract(n: u8) -> Address {
    addr(0xc1, n)
}

fn uups_logic() -> Vec<u8> {
    contract(
        &[("upgradeTo(address)", Body::Store), ("upgradeToAndCall(address,bytes)", Body::Store), ("value()", Body::Store)],
        NoMatch::Revert,
    )
}

fn plain_logic() -> Vec<u8> {
    contract(&[("value()", Body::Store), ("setValue(uint256)", Body::Store)], NoMatch::Revert)
}

fn token() -> Vec<u8> {
    contract(
        &[("transfer(address,uint256)", Body::Store), ("balanceOf(address)", Body::Store)],
        NoMatch::Revert,
    )
}

fn metamorphic_v1() -> Vec<u8> {
    contract(&[("kill()", Body::SelfDestruct), ("value()", Body::Store)], NoMatch::Revert)
}

fn metamorphic_v2() -> Vec<u8> {
    contract(
        &[("kill()", Body::SelfDestruct), ("value()", Body::Store), ("version()", Body::Store)],
        NoMatch::Revert,
    )
}

fn data_contract() -> Vec<u8> {
    contract(
        &[("setLogicContract(address)", Body::Store), ("store(uint256)", Body::Call("notify(uint256)"))],
        NoMatch::Revert,
    )
}

fn strategy_contract() -> Vec<u8> {
    contract(&[("setTarget(address)", Body::Store), ("harvest()", Body::Call("harvest(uint256)"))], NoMatch::Revert)
}

fn mix_contract() -> Vec<u8> {
    contract(
        &[("upgradeTo(address)", Body::Store), ("rebalance()", Body::Call("rebalance(uint256)"))],
        NoMatch::Forward,
    )
}

fn non_upgrade_call(sig: &str) -> Vec<u8> {
    encode_call(sig, &[])
}

/// One contract per pattern plus a minimal proxy, and a UUPS upgrade to a
/// selector-less target.
pub fn demo() -> Corpus {
    let mut c = Corpus::default();

    let proxy = addr(0x10, 1);
    let logic = addr(0x20, 1);
    let hollow = addr(0x20, 2);
    c.deploy(proxy, with_metadata(forwarder(), 1), 100, ADMIN, false);
    c.state.set_code(logic, &uups_logic());
    c.state.set_storage(logic, word(0), word(1));
    c.state.set_code(hollow, &storage_only());
    c.set_impl(proxy, logic);
    c.upgrade_to(ADMIN, proxy, hollow, 150, true);
    c.label(proxy, Pattern::Proxy);

    let data = addr(0x11, 1);
    c.deploy(data, data_contract(), 101, ADMIN, false);
    for (i, from_contract) in [true, true, true, false].into_iter().enumerate() {
        let from = if from_contract { caller_contract(1) } else { user(i as u8) };
        c.tx(from, data, encode_call("store(uint256)", &[Token::Uint(i as u128)]), 160 + i as u64, true, Some(from_contract));
    }
    c.label(data, Pattern::DataSeparation);

    let strategy = addr(0x12, 1);
    let strategy_impl = addr(0x22, 1);
    c.deploy(strategy, strategy_contract(), 102, ADMIN, false);
    c.state.set_code(strategy_impl, &contract(&[("harvest(uint256)", Body::Store)], NoMatch::Revert));
    for i in 0..3 {
        c.tx(user(10 + i), strategy, non_upgrade_call("harvest()"), 170 + i as u64, true, Some(false));
    }
    let input = encode_call("setTarget(address)", &[Token::Address(strategy_impl.0)]);
    c.tx(ADMIN, strategy, input, 175, true, Some(false));
    c.label(strategy, Pattern::Strategy);

    let mix = addr(0x13, 1);
    let mix_logic = addr(0x23, 1);
    c.deploy(mix, mix_contract(), 103, ADMIN, false);
    c.state.set_code(mix_logic, &plain_logic());
    c.state.set_storage(mix_logic, word(0), word(1));
    c.set_impl(mix, mix_logic);
    c.label(mix, Pattern::Mix);

    let meta = addr(0x14, 1);
    let t1 = c.deploy(meta, metamorphic_v1(), 104, FACTORY, true);
    c.trace(t1, meta, &["CALL", "CREATE2"]);
    let t2 = c.deploy(meta, metamorphic_v2(), 180, FACTORY, true);
    c.trace(t2, meta, &["CALL", "CREATE2"]);
    c.label(meta, Pattern::Metamorphic);

    let old = addr(0x15, 1);
    let new = addr(0x15, 2);
    c.deploy(old, token(), 105, ADMIN, false);
    c.migrations.push(MigrationRecord {
        old_address: old,
        new_address: new,
        announcement_time: AnnouncementTime::Block(190),
        note: "token v2".into(),
    });
    let transfer = |to: Address| encode_call("transfer(address,uint256)", &[Token::Address(to.0), Token::Uint(5)]);
    c.tx(user(20), old, transfer(user(21)), 185, true, Some(false));
    c.tx(user(20), old, transfer(user(22)), 195, true, Some(false));
    c.tokenlists.push(TokenList { source: "demo-dex".into(), addresses: BTreeSet::from([old]) });
    c.label(old, Pattern::Migration);

    let clone = addr(0x16, 1);
    c.deploy(clone, minimal_proxy(addr(0x20, 9).0), 106, ADMIN, false);
    c.label(clone, Pattern::NotUpgradeable);

    c.expected_findings = vec![
        ("EmptyContractTarget", proxy, "warn"),
        ("NonUpgradeableUUPSTarget", proxy, "critical"),
        ("OldContractStillUsed", old, "info"),
        ("StaleTokenListing", old, "info"),
    ];
    c
}

/// Labeled classification fixtures, at least one per rule.
pub fn patterns() -> Corpus {
    let mut c = Corpus::default();

    let transparent = addr(0x30, 1);
    let plain = addr(0x38, 1);
    c.deploy(
        transparent,
        with_metadata(contract(&[("upgradeTo(address)", Body::Store), ("admin()", Body::Store)], NoMatch::Forward), 7),
        10,
        ADMIN,
        false,
    );
    c.state.set_code(plain, &plain_logic());
    c.state.set_storage(plain, word(0), word(1));
    c.set_impl(transparent, plain);
    c.label(transparent, Pattern::Proxy);

    let uups = addr(0x30, 2);
    let uups_impl = addr(0x38, 2);
    c.deploy(uups, forwarder(), 11, ADMIN, false);
    c.state.set_code(uups_impl, &uups_logic());
    c.state.set_storage(uups_impl, word(0), word(1));
    c.set_impl(uups, uups_impl);
    c.label(uups, Pattern::Proxy);

    let old_proxy = addr(0x30, 3);
    c.deploy(
        old_proxy,
        old_solc_contract(
            &[("upgradeToAndCall(address,bytes)", Body::Store), ("implementation()", Body::Store)],
            NoMatch::Forward,
        ),
        12,
        ADMIN,
        false,
    );
    c.label(old_proxy, Pattern::Proxy);

    let beacon_proxy = addr(0x30, 4);
    let beacon = addr(0x38, 4);
    c.deploy(beacon_proxy, with_metadata(forwarder(), 4), 13, ADMIN, false);
    c.state.set_storage(beacon_proxy, BEACON_SLOT, B256::from_address(&beacon));
    c.state.set_code(beacon, &contract(&[("implementation()", Body::Store)], NoMatch::Revert));
    c.state.set_call(beacon, &IMPLEMENTATION_ACCESSOR, &B256::from_address(&uups_impl).0);
    c.label(beacon_proxy, Pattern::Proxy);

    let clone = addr(0x30, 5);
    c.deploy(clone, minimal_proxy(uups_impl.0), 14, ADMIN, false);
    c.label(clone, Pattern::NotUpgradeable);

    let unresolved = addr(0x30, 6);
    c.deploy(unresolved, with_metadata(forwarder(), 6), 15, ADMIN, false);
    c.label(unresolved, Pattern::NotUpgradeable);

    let strategy = addr(0x31, 1);
    c.deploy(strategy, strategy_contract(), 16, ADMIN, false);
    for i in 0..3 {
        c.tx(user(i), strategy, non_upgrade_call("harvest()"), 100 + i as u64, true, Some(false));
    }
    c.label(strategy, Pattern::Strategy);

    let static_strategy = addr(0x31, 2);
    c.deploy(
        static_strategy,
        contract(&[("setLogic(address)", Body::Store), ("quote()", Body::StaticCall("quote(uint256)"))], NoMatch::Revert),
        17,
        ADMIN,
        false,
    );
    for i in 0..2 {
        c.tx(user(10 + i), static_strategy, non_upgrade_call("quote()"), 110 + i as u64, true, Some(false));
    }
    c.label(static_strategy, Pattern::Strategy);

    let data = addr(0x32, 1);
    c.deploy(data, data_contract(), 18, ADMIN, false);
    for i in 0..3 {
        c.tx(caller_contract(i), data, encode_call("store(uint256)", &[Token::Uint(1)]), 120 + i as u64, true, Some(true));
    }
    c.label(data, Pattern::DataSeparation);

    let undirected = addr(0x32, 2);
    c.deploy(
        undirected,
        contract(&[("updateTarget(address)", Body::Store), ("sync()", Body::Call("sync(uint256)"))], NoMatch::Revert),
        19,
        ADMIN,
        false,
    );
    c.label(undirected, Pattern::DataOrStrategy);

    let mix = addr(0x33, 1);
    c.deploy(mix, mix_contract(), 20, ADMIN, false);
    c.set_impl(mix, plain);
    c.label(mix, Pattern::Mix);

    let meta = addr(0x34, 1);
    let t1 = c.deploy(meta, metamorphic_v1(), 21, FACTORY, true);
    c.trace(t1, meta, &["CALL", "CREATE2"]);
    let t2 = c.deploy(meta, metamorphic_v2(), 60, FACTORY, true);
    c.trace(t2, meta, &["CALL", "CREATE2"]);
    c.label(meta, Pattern::Metamorphic);

    let meta_proxy = addr(0x34, 2);
    let t = c.deploy(
        meta_proxy,
        contract(&[("upgradeTo(address)", Body::Store), ("kill()", Body::SelfDestruct)], NoMatch::Forward),
        22,
        FACTORY,
        true,
    );
    c.trace(t, meta_proxy, &["CREATE2"]);
    c.label(meta_proxy, Pattern::Metamorphic);

    let plain_create = addr(0x35, 1);
    let t = c.deploy(plain_create, metamorphic_v1(), 23, FACTORY, true);
    c.trace(t, plain_create, &["CREATE"]);
    c.label(plain_create, Pattern::NotUpgradeable);

    let tok = addr(0x36, 1);
    c.deploy(tok, with_metadata(token(), 9), 24, ADMIN, false);
    c.label(tok, Pattern::NotUpgradeable);

    let old = addr(0x37, 1);
    c.deploy(old, token(), 25, ADMIN, false);
    c.migrations.push(MigrationRecord {
        old_address: old,
        new_address: addr(0x37, 2),
        announcement_time: AnnouncementTime::Timestamp(1_600_010_000),
        note: String::new(),
    });
    c.label(old, Pattern::Migration);

    c
}

/// Upgrade chains and deployments that trigger every finding category once.
pub fn audit() -> Corpus {
    let mut c = Corpus::default();

    // UUPS proxy: a repeated upgrade, a failed attempt, and uninitialized
    // logic that can self-destruct and exposes upgradeToAndCall.
    let p1 = addr(0x40, 1);
    let l2 = addr(0x48, 2);
    c.deploy(p1, with_metadata(forwarder(), 0x41), 10, ADMIN, false);
    c.state.set_code(
        l2,
        &contract(
            &[
                ("upgradeTo(address)", Body::Store),
                ("upgradeToAndCall(address,bytes)", Body::Store),
                ("kill()", Body::SelfDestruct),
            ],
            NoMatch::Revert,
        ),
    );
    c.set_impl(p1, l2);
    c.upgrade_to(ADMIN, p1, l2, 100, true);
    c.upgrade_to(ADMIN, p1, l2, 101, true);
    c.upgrade_to(ATTACKER, p1, addr(0x48, 0x99), 102, false);

    // transparent proxy: zero, codeless and selector-less targets, then a
    // one-off upgrade from a second sender
    let p2 = addr(0x40, 2);
    let l3 = addr(0x48, 3);
    let eoa = addr(0xe2, 1);
    let hollow = addr(0x48, 4);
    c.deploy(
        p2,
        contract(&[("upgradeTo(address)", Body::Store), ("admin()", Body::Store)], NoMatch::Forward),
        11,
        ADMIN,
        false,
    );
    c.state.set_code(l3, &plain_logic());
    c.state.set_storage(l3, word(0), word(1));
    c.state.set_code(eoa, &[]);
    c.state.set_code(hollow, &storage_only());
    c.set_impl(p2, l3);
    c.upgrade_to(ADMIN, p2, Address::ZERO, 110, true);
    c.upgrade_to(ADMIN, p2, eoa, 111, true);
    c.upgrade_to(ADMIN, p2, hollow, 112, true);
    c.upgrade_to(ATTACKER, p2, l3, 113, true);

    // UUPS proxy upgraded to logic without an upgrade function
    let p3 = addr(0x40, 3);
    let l4 = addr(0x48, 5);
    let dead_end = addr(0x48, 6);
    c.deploy(p3, with_metadata(forwarder(), 0x43), 12, ADMIN, false);
    c.state.set_code(l4, &uups_logic());
    c.state.set_storage(l4, word(0), word(1));
    c.state.set_code(dead_end, &token());
    c.set_impl(p3, l4);
    c.upgrade_to(ADMIN, p3, dead_end, 120, true);

    // migrated token still in use and still listed
    let old = addr(0x41, 1);
    let new = addr(0x41, 2);
    c.deploy(old, token(), 13, ADMIN, false);
    c.migrations.push(MigrationRecord {
        old_address: old,
        new_address: new,
        announcement_time: AnnouncementTime::Block(200),
        note: "v2 launch".into(),
    });
    let transfer = encode_call("transfer(address,uint256)", &[Token::Address(user(9).0), Token::Uint(1)]);
    c.tx(user(1), old, transfer.clone(), 150, true, Some(false));
    c.tx(user(2), old, transfer.clone(), 250, true, Some(false));
    c.tx(user(3), old, transfer, 251, false, Some(false));
    c.tokenlists.push(TokenList { source: "fixture-dex".into(), addresses: BTreeSet::from([old]) });

    // strategy-shaped contract that upgrades other proxies
    let h = addr(0x42, 1);
    c.deploy(
        h,
        contract(&[("setLogic(address)", Body::Store), ("rollout(address)", Body::Call("upgradeTo(address)"))], NoMatch::Revert),
        14,
        ADMIN,
        false,
    );
    for i in 0..2 {
        c.tx(user(30 + i), h, encode_call("rollout(address)", &[Token::Address(p2.0)]), 130 + i as u64, true, Some(false));
    }

    c.labels = BTreeMap::from([
        (p1, Pattern::Proxy),
        (p2, Pattern::Proxy),
        (p3, Pattern::Proxy),
        (old, Pattern::Migration),
        (h, Pattern::Strategy),
    ]);
    c.expected_findings = vec![
        ("SameAddress", p1, "info"),
        ("UninitializedLogicCaseI", l2, "critical"),
        ("UninitializedLogicCaseII", l2, "critical"),
        ("ZeroAddress", p2, "warn"),
        ("EOATarget", p2, "warn"),
        ("EmptyContractTarget", p2, "warn"),
        ("MissingAccessControl", p2, "warn"),
        ("NonUpgradeableUUPSTarget", p3, "critical"),
        ("OldContractStillUsed", old, "info"),
        ("StaleTokenListing", old, "info"),
        ("HierarchyUpgrade", h, "info"),
    ];
    c
}

/// Name and builder of every committed corpus.
pub fn all() -> Vec<(&'static str, Corpus)> {
    vec![("demo", demo()), ("patterns", patterns()), ("audit", audit())]
}
