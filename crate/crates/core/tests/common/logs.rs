//! Random transaction logs against one subject.

use rand::Rng;
use uscscan::records::TransactionRecord;
use uscscan::{Address, B256};

use super::abi::{encode_call, Token};

pub const SUBJECT: Address = Address([0x5b; 20]);

/// Upgrade calls (some failing or truncated), ordinary calls and calls to
/// other contracts, with unique (block, tx_index) positions.
pub fn random_log<R: Rng>(rng: &mut R, len: usize) -> Vec<TransactionRecord> {
    let senders = [Address([0xe1; 20]), Address([0xe2; 20]), Address([0xe3; 20])];
    let targets: Vec<Address> = (0..4u8).map(|i| Address([0x70 + i; 20])).collect();
    let mut positions = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let block = rng.gen_range(0..len as u64 / 2 + 2);
        let tx_index = rng.gen_range(0..4u64);
        if !positions.insert((block, tx_index)) {
            continue;
        }
        let target = targets[rng.gen_range(0..targets.len())];
        let mut input = match rng.gen_range(0..6) {
            0 | 1 => encode_call("upgradeTo(address)", &[Token::Address(target.0)]),
            2 => encode_call("upgradeToAndCall(address,bytes)", &[Token::Address(target.0), Token::Bytes(vec![1])]),
            3 => encode_call("setImplementation(address)", &[Token::Address(target.0)]),
            4 => encode_call("transfer(address,uint256)", &[Token::Address(target.0), Token::Uint(1)]),
            _ => vec![0xaa, 0xbb],
        };
        if rng.gen_bool(0.05) && input.len() > 8 {
            input.truncate(8);
        }
        out.push(TransactionRecord {
            hash: B256(rng.gen()),
            from: senders[rng.gen_range(0..senders.len())],
            to: if rng.gen_bool(0.85) { SUBJECT } else { Address([0x99; 20]) },
            input,
            block,
            tx_index,
            status: rng.gen_bool(0.85),
            caller_is_contract: None,
            timestamp: None,
        });
    }
    out
}
