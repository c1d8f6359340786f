//! Decodes upgrade calldata: the selector, the matched signature and the
//! address arguments that name the new logic contract.

use uscscan::sigdb::DecodeError;
use uscscan::{decode_upgrade_call, Address, FunctionSignature, UpgradeFunctionDb};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = UpgradeFunctionDb::bundled();
    let sig: FunctionSignature = "upgradeToAndCall(address,bytes)".parse()?;
    let logic: Address = "0x00000000000000000000000000000000000000aa".parse()?;

    // head: address word, offset word; tail: length word and 4 bytes of data
    let mut data = sig.selector().0.to_vec();
    let mut word = [0u8; 32];
    word[12..].copy_from_slice(&logic.0);
    data.extend(word);
    data.extend(u256(64));
    data.extend(u256(4));
    data.extend([0x81, 0x29, 0xfc, 0x1c]);
    data.extend([0u8; 28]);

    let decoded = decode_upgrade_call(&data, &db)?;
    println!("{}", serde_json::to_string_pretty(&decoded)?);

    match decode_upgrade_call(&data[..20], &db) {
        Err(DecodeError::Truncated { needed, available, partial }) => {
            println!("truncated: {available}/{needed} head words, selector {}", partial.selector)
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}

fn u256(v: u64) -> [u8; 32] {
    let mut w = [0u8; 32];
    w[24..].copy_from_slice(&v.to_be_bytes());
    w
}
