//! Resolves logic contracts behind the pattern fixtures from an offline
//! state snapshot, or from a JSON-RPC endpoint given as the first argument.
//!
//! `cargo run --example resolve_logic -- https://rpc.example 0xproxy...`

use std::path::Path;

use uscscan::chainstate::{resolve_logic_address, ChainState, RpcClient, StateSnapshot};
use uscscan::records::read_contracts;
use uscscan::Address;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (state, targets): (Box<dyn ChainState>, Vec<Address>) = if args.len() >= 2 {
        let targets = args[1..].iter().map(|a| a.parse()).collect::<Result<_, _>>()?;
        (Box::new(RpcClient::from_url(&args[0])), targets)
    } else {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/patterns");
        let contracts = read_contracts(std::io::BufReader::new(std::fs::File::open(dir.join("contracts.jsonl"))?))?;
        (Box::new(StateSnapshot::load(&dir.join("state.json"))?), contracts.iter().map(|c| c.address).collect())
    };
    for proxy in targets {
        match resolve_logic_address(state.as_ref(), &proxy) {
            Ok(Some(r)) => {
                let code = state.code(&r.address).map(|c| c.len()).unwrap_or(0);
                println!("{proxy} -> {} via {:?}, {code} bytes of code", r.address, r.probe)
            }
            Ok(None) => println!("{proxy} -> none"),
            Err(e) => println!("{proxy} -> error: {e}"),
        }
    }
    Ok(())
}
