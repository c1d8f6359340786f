//! Disassembles runtime bytecode given as hex on the command line, or the
//! first contract of the bundled pattern fixtures.
//!
//! `cargo run --example disassemble -- 0x6080604052...`

use std::path::Path;

use uscscan::primitives::decode_hex;
use uscscan::records::read_contracts;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let code = match std::env::args().nth(1) {
        Some(hex) => decode_hex(&hex)?,
        None => {
            let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/patterns/contracts.jsonl");
            let contracts = read_contracts(std::io::BufReader::new(std::fs::File::open(path)?))?;
            contracts[0].bytecode.clone()
        }
    };
    let stream = uscscan::disassemble(&code);
    for ins in &stream.instructions {
        println!("{ins}");
    }
    if let Some(trailer) = &stream.metadata_trailer {
        println!("; metadata trailer, {} bytes", trailer.len());
    }
    assert_eq!(stream.to_bytes(), code);
    println!("; {} instructions over {} bytes", stream.len(), code.len());
    Ok(())
}
