//! The per-contract evidence vector the rule engine consumes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::disasm::{disassemble, InstructionStream};
use crate::dispatch::{analyze_dispatcher, fallback_with, outbound_selectors_with, DEFAULT_OUTBOUND_WINDOW};
use crate::opcode::Opcode;
use crate::primitives::Selector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Instructions downstream of a pushed selector searched for an external call.
    pub outbound_window: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self { outbound_window: DEFAULT_OUTBOUND_WINDOW }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BytecodeFeatures {
    pub has_call: bool,
    pub has_staticcall: bool,
    pub has_delegatecall: bool,
    pub has_selfdestruct: bool,
    pub has_create2: bool,
    pub has_fallback: bool,
    pub local_selectors: BTreeSet<Selector>,
    pub outbound_selectors: BTreeSet<Selector>,
}

pub fn extract_features(stream: &InstructionStream) -> BytecodeFeatures {
    extract_features_with(stream, &ExtractionConfig::default())
}

pub fn extract_features_with(stream: &InstructionStream, config: &ExtractionConfig) -> BytecodeFeatures {
    let dispatcher = analyze_dispatcher(stream);
    let has = |op: Opcode| stream.contains_opcode(op);
    BytecodeFeatures {
        has_call: has(Opcode::CALL),
        has_staticcall: has(Opcode::STATICCALL),
        has_delegatecall: has(Opcode::DELEGATECALL),
        has_selfdestruct: has(Opcode::SELFDESTRUCT),
        has_create2: has(Opcode::CREATE2),
        has_fallback: fallback_with(stream, &dispatcher),
        local_selectors: dispatcher.selectors(),
        outbound_selectors: outbound_selectors_with(stream, &dispatcher, config.outbound_window),
    }
}

/// Disassembles and extracts in one step.
pub fn features_of(code: &[u8], config: &ExtractionConfig) -> BytecodeFeatures {
    extract_features_with(&disassemble(code), config)
}
