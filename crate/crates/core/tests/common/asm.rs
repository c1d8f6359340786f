//! A small assembler with labels for building test bytecode.

use std::collections::HashMap;

fn opcode_byte(name: &str) -> u8 {
    match name {
        "STOP" => 0x00,
        "ADD" => 0x01,
        "SUB" => 0x03,
        "DIV" => 0x04,
        "LT" => 0x10,
        "GT" => 0x11,
        "EQ" => 0x14,
        "ISZERO" => 0x15,
        "AND" => 0x16,
        "SHL" => 0x1b,
        "SHR" => 0x1c,
        "ADDRESS" => 0x30,
        "CALLER" => 0x33,
        "CALLVALUE" => 0x34,
        "CALLDATALOAD" => 0x35,
        "CALLDATASIZE" => 0x36,
        "CALLDATACOPY" => 0x37,
        "RETURNDATASIZE" => 0x3d,
        "RETURNDATACOPY" => 0x3e,
        "POP" => 0x50,
        "MLOAD" => 0x51,
        "MSTORE" => 0x52,
        "SLOAD" => 0x54,
        "SSTORE" => 0x55,
        "JUMP" => 0x56,
        "JUMPI" => 0x57,
        "GAS" => 0x5a,
        "JUMPDEST" => 0x5b,
        "PUSH0" => 0x5f,
        "DUP1" => 0x80,
        "DUP2" => 0x81,
        "SWAP1" => 0x90,
        "CREATE" => 0xf0,
        "CALL" => 0xf1,
        "RETURN" => 0xf3,
        "DELEGATECALL" => 0xf4,
        "CREATE2" => 0xf5,
        "STATICCALL" => 0xfa,
        "REVERT" => 0xfd,
        "INVALID" => 0xfe,
        "SELFDESTRUCT" => 0xff,
        other => panic!("assembler: unknown mnemonic {other}"),
    }
}

#[derive(Clone, Debug, Default)]
pub struct Asm {
    code: Vec<u8>,
    labels: HashMap<String, usize>,
    fixups: Vec<(usize, String)>,
}

impl Asm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whitespace-separated mnemonics.
    pub fn ops(&mut self, text: &str) -> &mut Self {
        for name in text.split_whitespace() {
            self.code.push(opcode_byte(name));
        }
        self
    }

    /// `PUSHn` with n = `bytes.len()`.
    pub fn push(&mut self, bytes: &[u8]) -> &mut Self {
        assert!((1..=32).contains(&bytes.len()), "push width {}", bytes.len());
        self.code.push(0x5f + bytes.len() as u8);
        self.code.extend_from_slice(bytes);
        self
    }

    /// Minimal-width push of an integer.
    pub fn push_int(&mut self, v: u64) -> &mut Self {
        let be = v.to_be_bytes();
        let first = be.iter().position(|b| *b != 0).unwrap_or(7);
        self.push(&be[first..])
    }

    /// `PUSH2` of a label's offset, patched at build time.
    pub fn push_label(&mut self, label: &str) -> &mut Self {
        self.code.push(0x61);
        self.fixups.push((self.code.len(), label.to_string()));
        self.code.extend_from_slice(&[0, 0]);
        self
    }

    /// Defines `label` here and emits its `JUMPDEST`.
    pub fn label(&mut self, label: &str) -> &mut Self {
        let prev = self.labels.insert(label.to_string(), self.code.len());
        assert!(prev.is_none(), "label {label} defined twice");
        self.code.push(0x5b);
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.code.extend_from_slice(bytes);
        self
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn build(&self) -> Vec<u8> {
        let mut code = self.code.clone();
        for (at, label) in &self.fixups {
            let target = *self.labels.get(label).unwrap_or_else(|| panic!("undefined label {label}"));
            let target = u16::try_from(target).expect("label within PUSH2 range");
            code[*at..*at + 2].copy_from_slice(&target.to_be_bytes());
        }
        code
    }
}

/// Reference decoder: start offset and size of each instruction, with no
/// trailer handling.
pub fn reference_offsets(code: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut pc = 0;
    while pc < code.len() {
        let b = code[pc];
        let width = if (0x60..=0x7f).contains(&b) { (b - 0x5f) as usize } else { 0 };
        let size = (1 + width).min(code.len() - pc);
        out.push((pc, size));
        pc += size;
    }
    out
}
