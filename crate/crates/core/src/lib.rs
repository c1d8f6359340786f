//! Detection, classification and auditing of upgradeable EVM contracts from
//! runtime bytecode and transaction history.

pub mod audit;
pub mod chain;
pub mod chainstate;
pub mod classify;
pub mod config;
pub mod corpus;
pub mod disasm;
pub mod dispatch;
pub mod features;
pub mod keccak;
pub mod opcode;
pub mod primitives;
pub mod records;
pub mod report;
pub mod sigdb;
pub mod signature;

pub use disasm::{disassemble, Instruction, InstructionStream};
pub use dispatch::{detect_fallback, extract_local_selectors, extract_outbound_selectors};
pub use features::{extract_features, BytecodeFeatures, ExtractionConfig};
pub use opcode::Opcode;
pub use primitives::{Address, Selector, B256};
pub use sigdb::{compile_db, decode_upgrade_call, match_upgrade_selectors, UpgradeFunctionDb};
pub use signature::{keccak_selector, FunctionSignature};
