//! Extracts dispatcher selectors, outbound selectors and call features from
//! every contract of the pattern fixtures, naming upgrade functions from the
//! bundled database.

use std::path::Path;

use uscscan::records::read_contracts;
use uscscan::{disassemble, extract_features, match_upgrade_selectors, UpgradeFunctionDb};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = UpgradeFunctionDb::bundled();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/patterns/contracts.jsonl");
    let contracts = read_contracts(std::io::BufReader::new(std::fs::File::open(path)?))?;
    for c in &contracts {
        let f = extract_features(&disassemble(&c.bytecode));
        let m = match_upgrade_selectors(&f, &db);
        println!("{}", c.address);
        println!(
            "  call={} staticcall={} delegatecall={} selfdestruct={} fallback={}",
            f.has_call, f.has_staticcall, f.has_delegatecall, f.has_selfdestruct, f.has_fallback
        );
        let list = |s: &std::collections::BTreeSet<uscscan::Selector>| {
            s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        println!("  local:    {}", list(&f.local_selectors));
        println!("  outbound: {}", list(&f.outbound_selectors));
        for s in m.local.iter().chain(&m.outbound) {
            println!("  upgrade:  {s} {}", db.get(s).expect("matched").signature);
        }
    }
    Ok(())
}
