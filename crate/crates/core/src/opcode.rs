//! The EVM opcode table.

use std::fmt;

#[rustfmt::skip]
const NAMES: [Option<&str>; 256] = {
    let mut t: [Option<&str>; 256] = [None; 256];
    t[0x00] = Some("STOP"); t[0x01] = Some("ADD"); t[0x02] = Some("MUL"); t[0x03] = Some("SUB");
    t[0x04] = Some("DIV"); t[0x05] = Some("SDIV"); t[0x06] = Some("MOD"); t[0x07] = Some("SMOD");
    t[0x08] = Some("ADDMOD"); t[0x09] = Some("MULMOD"); t[0x0a] = Some("EXP"); t[0x0b] = Some("SIGNEXTEND");
    t[0x10] = Some("LT"); t[0x11] = Some("GT"); t[0x12] = Some("SLT"); t[0x13] = Some("SGT");
    t[0x14] = Some("EQ"); t[0x15] = Some("ISZERO"); t[0x16] = Some("AND"); t[0x17] = Some("OR");
    t[0x18] = Some("XOR"); t[0x19] = Some("NOT"); t[0x1a] = Some("BYTE"); t[0x1b] = Some("SHL");
    t[0x1c] = Some("SHR"); t[0x1d] = Some("SAR");
    t[0x20] = Some("KECCAK256");
    t[0x30] = Some("ADDRESS"); t[0x31] = Some("BALANCE"); t[0x32] = Some("ORIGIN"); t[0x33] = Some("CALLER");
    t[0x34] = Some("CALLVALUE"); t[0x35] = Some("CALLDATALOAD"); t[0x36] = Some("CALLDATASIZE");
    t[0x37] = Some("CALLDATACOPY"); t[0x38] = Some("CODESIZE"); t[0x39] = Some("CODECOPY");
    t[0x3a] = Some("GASPRICE"); t[0x3b] = Some("EXTCODESIZE"); t[0x3c] = Some("EXTCODECOPY");
    t[0x3d] = Some("RETURNDATASIZE"); t[0x3e] = Some("RETURNDATACOPY"); t[0x3f] = Some("EXTCODEHASH");
    t[0x40] = Some("BLOCKHASH"); t[0x41] = Some("COINBASE"); t[0x42] = Some("TIMESTAMP"); t[0x43] = Some("NUMBER");
    t[0x44] = Some("PREVRANDAO"); t[0x45] = Some("GASLIMIT"); t[0x46] = Some("CHAINID");
    t[0x47] = Some("SELFBALANCE"); t[0x48] = Some("BASEFEE"); t[0x49] = Some("BLOBHASH"); t[0x4a] = Some("BLOBBASEFEE");
    t[0x50] = Some("POP"); t[0x51] = Some("MLOAD"); t[0x52] = Some("MSTORE"); t[0x53] = Some("MSTORE8");
    t[0x54] = Some("SLOAD"); t[0x55] = Some("SSTORE"); t[0x56] = Some("JUMP"); t[0x57] = Some("JUMPI");
    t[0x58] = Some("PC"); t[0x59] = Some("MSIZE"); t[0x5a] = Some("GAS"); t[0x5b] = Some("JUMPDEST");
    t[0x5c] = Some("TLOAD"); t[0x5d] = Some("TSTORE"); t[0x5e] = Some("MCOPY"); t[0x5f] = Some("PUSH0");
    const PUSH: [&str; 32] = [
        "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8",
        "PUSH9", "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16",
        "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24",
        "PUSH25", "PUSH26", "PUSH27", "PUSH28", "PUSH29", "PUSH30", "PUSH31", "PUSH32",
    ];
    const DUP: [&str; 16] = [
        "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8",
        "DUP9", "DUP10", "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
    ];
    const SWAP: [&str; 16] = [
        "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8",
        "SWAP9", "SWAP10", "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
    ];
    let mut i = 0;
    while i < 32 { t[0x60 + i] = Some(PUSH[i]); i += 1; }
    i = 0;
    while i < 16 { t[0x80 + i] = Some(DUP[i]); t[0x90 + i] = Some(SWAP[i]); i += 1; }
    t[0xa0] = Some("LOG0"); t[0xa1] = Some("LOG1"); t[0xa2] = Some("LOG2"); t[0xa3] = Some("LOG3"); t[0xa4] = Some("LOG4");
    t[0xf0] = Some("CREATE"); t[0xf1] = Some("CALL"); t[0xf2] = Some("CALLCODE"); t[0xf3] = Some("RETURN");
    t[0xf4] = Some("DELEGATECALL"); t[0xf5] = Some("CREATE2"); t[0xfa] = Some("STATICCALL");
    t[0xfd] = Some("REVERT"); t[0xfe] = Some("INVALID"); t[0xff] = Some("SELFDESTRUCT");
    t
};

/// One opcode byte. Every byte value is an `Opcode`; the ones outside the
/// table are reported as `INVALID`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Opcode(pub u8);

impl Opcode {
    pub const STOP: Opcode = Opcode(0x00);
    pub const SUB: Opcode = Opcode(0x03);
    pub const DIV: Opcode = Opcode(0x04);
    pub const LT: Opcode = Opcode(0x10);
    pub const GT: Opcode = Opcode(0x11);
    pub const EQ: Opcode = Opcode(0x14);
    pub const ISZERO: Opcode = Opcode(0x15);
    pub const AND: Opcode = Opcode(0x16);
    pub const SHR: Opcode = Opcode(0x1c);
    pub const CALLDATALOAD: Opcode = Opcode(0x35);
    pub const POP: Opcode = Opcode(0x50);
    pub const MSTORE: Opcode = Opcode(0x52);
    pub const JUMP: Opcode = Opcode(0x56);
    pub const JUMPI: Opcode = Opcode(0x57);
    pub const JUMPDEST: Opcode = Opcode(0x5b);
    pub const PUSH0: Opcode = Opcode(0x5f);
    pub const PUSH1: Opcode = Opcode(0x60);
    pub const PUSH2: Opcode = Opcode(0x61);
    pub const PUSH3: Opcode = Opcode(0x62);
    pub const PUSH4: Opcode = Opcode(0x63);
    pub const PUSH20: Opcode = Opcode(0x73);
    pub const PUSH32: Opcode = Opcode(0x7f);
    pub const DUP1: Opcode = Opcode(0x80);
    pub const DUP2: Opcode = Opcode(0x81);
    pub const DUP3: Opcode = Opcode(0x82);
    pub const SWAP1: Opcode = Opcode(0x90);
    pub const CREATE: Opcode = Opcode(0xf0);
    pub const CALL: Opcode = Opcode(0xf1);
    pub const CALLCODE: Opcode = Opcode(0xf2);
    pub const RETURN: Opcode = Opcode(0xf3);
    pub const DELEGATECALL: Opcode = Opcode(0xf4);
    pub const CREATE2: Opcode = Opcode(0xf5);
    pub const STATICCALL: Opcode = Opcode(0xfa);
    pub const REVERT: Opcode = Opcode(0xfd);
    pub const INVALID: Opcode = Opcode(0xfe);
    pub const SELFDESTRUCT: Opcode = Opcode(0xff);

    pub fn is_defined(self) -> bool {
        NAMES[self.0 as usize].is_some()
    }

    /// The mnemonic; undefined bytes report as `INVALID`.
    pub fn mnemonic(self) -> &'static str {
        NAMES[self.0 as usize].unwrap_or("INVALID")
    }

    /// Looks up an opcode by mnemonic (case-insensitive). `SHA3` and
    /// `SUICIDE` are accepted as legacy aliases.
    pub fn from_mnemonic(name: &str) -> Option<Opcode> {
        let upper = name.trim().to_ascii_uppercase();
        let upper = match upper.as_str() {
            "SHA3" => "KECCAK256",
            "SUICIDE" => "SELFDESTRUCT",
            "DIFFICULTY" => "PREVRANDAO",
            other => other,
        };
        NAMES
            .iter()
            .position(|n| *n == Some(upper))
            .map(|i| Opcode(i as u8))
    }

    /// Operand width in bytes: 1..=32 for PUSH1..PUSH32, 0 otherwise.
    pub fn push_width(self) -> usize {
        if (0x60..=0x7f).contains(&self.0) {
            (self.0 - 0x5f) as usize
        } else {
            0
        }
    }

    pub fn is_push(self) -> bool {
        self.push_width() > 0
    }

    pub fn is_dup(self) -> bool {
        (0x80..=0x8f).contains(&self.0)
    }

    pub fn is_swap(self) -> bool {
        (0x90..=0x9f).contains(&self.0)
    }

    /// CALL, CALLCODE, DELEGATECALL or STATICCALL.
    pub fn is_external_call(self) -> bool {
        matches!(self, Opcode::CALL | Opcode::CALLCODE | Opcode::DELEGATECALL | Opcode::STATICCALL)
    }

    /// Ends a basic block: jumps and halting instructions.
    pub fn ends_block(self) -> bool {
        matches!(
            self,
            Opcode::JUMP
                | Opcode::JUMPI
                | Opcode::STOP
                | Opcode::RETURN
                | Opcode::REVERT
                | Opcode::INVALID
                | Opcode::SELFDESTRUCT
        ) || !self.is_defined()
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_defined() {
            f.write_str(self.mnemonic())
        } else {
            write!(f, "INVALID(0x{:02x})", self.0)
        }
    }
}

impl fmt::Debug for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
