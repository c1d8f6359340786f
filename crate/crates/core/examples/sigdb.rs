//! Lists the bundled upgrade-function database and compiles a small one from
//! candidate signatures with the keyword rules.

use uscscan::sigdb::KeywordRules;
use uscscan::{compile_db, FunctionSignature, UpgradeFunctionDb};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = UpgradeFunctionDb::bundled();
    println!("bundled database {} ({} entries)", db.version(), db.len());
    for (selector, entry) in db.iter() {
        println!("  {selector}  {:<8} {}", entry.keyword, entry.signature);
    }

    let candidates: Vec<FunctionSignature> = [
        "setImplementation(address)",
        "setOwner(address)",
        "updateLogicContract(address,bytes)",
        "changeFee(uint256)",
    ]
    .iter()
    .map(|s| s.parse())
    .collect::<Result<_, _>>()?;
    let custom = compile_db(&candidates, &KeywordRules::default())?;
    println!("\nkept {} of {} candidates:", custom.len(), candidates.len());
    for (selector, entry) in custom.iter() {
        println!("  {selector}  {}", entry.signature);
    }
    Ok(())
}
