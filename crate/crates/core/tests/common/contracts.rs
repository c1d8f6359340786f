//! Hand-built contracts for the pattern and audit fixtures.

use super::asm::Asm;
use super::keccak::{selector, slot_minus_one};

#[derive(Clone, Debug)]
pub enum Body {
    /// Writes a storage slot and stops.
    Store,
    /// Calls out with the given function signature's selector.
    Call(&'static str),
    StaticCall(&'static str),
    SelfDestruct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoMatch {
    Revert,
    /// Forward to the address in the standard implementation slot.
    Forward,
}

fn forward(asm: &mut Asm) {
    asm.ops("CALLDATASIZE").push(&[0]).ops("DUP1 CALLDATACOPY");
    asm.push(&[0]).ops("DUP1 CALLDATASIZE").push(&[0]);
    asm.push(&slot_minus_one("eip1967.proxy.implementation")).ops("SLOAD GAS DELEGATECALL");
    asm.ops("RETURNDATASIZE").push(&[0]).ops("DUP1 RETURNDATACOPY").push_label("ok").ops("JUMPI");
    asm.ops("RETURNDATASIZE").push(&[0]).ops("REVERT");
    asm.label("ok").ops("RETURNDATASIZE").push(&[0]).ops("RETURN");
}

fn body(asm: &mut Asm, i: usize, b: &Body) {
    match b {
        Body::Store => {
            asm.ops("CALLVALUE").push_int(i as u64 + 1).ops("SSTORE STOP");
        }
        Body::Call(sig) | Body::StaticCall(sig) => {
            asm.push(&selector(sig)).push(&[0xe0]).ops("SHL").push(&[0]).ops("MSTORE");
            asm.push(&[0]).push(&[0]).push(&[0x24]).push(&[0]);
            if matches!(b, Body::Call(_)) {
                asm.push(&[0]);
            }
            asm.push(&[1]).ops("SLOAD GAS");
            asm.ops(if matches!(b, Body::Call(_)) { "CALL" } else { "STATICCALL" });
            asm.ops("POP STOP");
        }
        Body::SelfDestruct => {
            asm.ops("CALLER SELFDESTRUCT");
        }
    }
}

/// A solc-style linear dispatcher over `funcs`.
pub fn contract(funcs: &[(&str, Body)], no_match: NoMatch) -> Vec<u8> {
    let mut asm = Asm::new();
    asm.push(&[0x80]).push(&[0x40]).ops("MSTORE");
    asm.push(&[0]).ops("CALLDATALOAD").push(&[0xe0]).ops("SHR");
    for (i, (sig, _)) in funcs.iter().enumerate() {
        asm.ops("DUP1").push(&selector(sig)).ops("EQ").push_label(&format!("f{i}")).ops("JUMPI");
    }
    match no_match {
        NoMatch::Revert => {
            asm.push(&[0]).ops("DUP1 REVERT");
        }
        NoMatch::Forward => forward(&mut asm),
    }
    for (i, (_, b)) in funcs.iter().enumerate() {
        asm.label(&format!("f{i}"));
        body(&mut asm, i, b);
    }
    asm.build()
}

/// Same as [`contract`] but with the pre-0.5 `DIV` selector extraction.
pub fn old_solc_contract(funcs: &[(&str, Body)], no_match: NoMatch) -> Vec<u8> {
    let mut asm = Asm::new();
    let mut shift = [0u8; 29];
    shift[0] = 1;
    asm.push(&[0x60]).push(&[0x40]).ops("MSTORE");
    asm.push(&[0]).ops("CALLDATALOAD").push(&shift).ops("SWAP1 DIV").push(&[0xff; 4]).ops("AND");
    for (i, (sig, _)) in funcs.iter().enumerate() {
        asm.ops("DUP1").push(&selector(sig)).ops("EQ").push_label(&format!("f{i}")).ops("JUMPI");
    }
    match no_match {
        NoMatch::Revert => {
            asm.push(&[0]).ops("DUP1 REVERT");
        }
        NoMatch::Forward => forward(&mut asm),
    }
    for (i, (_, b)) in funcs.iter().enumerate() {
        asm.label(&format!("f{i}"));
        body(&mut asm, i, b);
    }
    asm.build()
}

/// Dispatcher-less forwarder reading the standard implementation slot, as
/// deployed in front of UUPS logic.
pub fn forwarder() -> Vec<u8> {
    let mut asm = Asm::new();
    asm.push(&[0x80]).push(&[0x40]).ops("MSTORE");
    forward(&mut asm);
    asm.build()
}

/// The EIP-1167 minimal proxy runtime.
pub fn minimal_proxy(target: [u8; 20]) -> Vec<u8> {
    let mut code = hex::decode("363d3d373d3d3d363d73").unwrap();
    code.extend_from_slice(&target);
    code.extend(hex::decode("5af43d82803e903d91602b57fd5bf3").unwrap());
    code
}

/// Code with no dispatcher and no external call.
pub fn storage_only() -> Vec<u8> {
    let mut asm = Asm::new();
    asm.push(&[1]).push(&[0]).ops("SSTORE STOP");
    asm.build()
}

/// Appends a solc-style CBOR metadata trailer.
pub fn with_metadata(mut code: Vec<u8>, seed: u8) -> Vec<u8> {
    let mut cbor = vec![0xa2, 0x64];
    cbor.extend_from_slice(b"ipfs");
    cbor.extend_from_slice(&[0x58, 0x22]);
    cbor.extend((0..34).map(|i| seed.wrapping_add(i)));
    cbor.push(0x64);
    cbor.extend_from_slice(b"solc");
    cbor.extend_from_slice(&[0x43, 0x00, 0x08, 0x13]);
    let len = cbor.len() as u16;
    code.extend(cbor);
    code.extend_from_slice(&len.to_be_bytes());
    code
}
