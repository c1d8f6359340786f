//! Random dispatcher generator with known ground truth.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::asm::Asm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Linear,
    BinarySearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Header {
    /// `PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR`
    Shr,
    /// `PUSH0 CALLDATALOAD PUSH1 0xe0 SHR`
    Push0Shr,
    /// `PUSH1 0 CALLDATALOAD PUSH29 1<<224 SWAP1 DIV PUSH4 0xffffffff AND`
    Div,
}

#[derive(Clone, Copy, Debug)]
pub struct Entry {
    pub selector: u32,
    /// Push all four bytes even when leading bytes are zero.
    pub full_width: bool,
    /// `PUSH sel DUP2` instead of `DUP1 PUSH sel`.
    pub dup_after: bool,
    pub sub_iszero: bool,
    /// Outbound selector called from the function body.
    pub calls_out: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct DispatcherSpec {
    pub entries: Vec<Entry>,
    pub layout: Layout,
    pub header: Header,
    /// Largest run compared linearly in a binary-search layout.
    pub leaf_size: usize,
    pub calldata_size_check: bool,
    /// Unmatched calls forward with DELEGATECALL instead of reverting.
    pub fallback: bool,
}

impl DispatcherSpec {
    pub fn selectors(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.selector).collect()
    }

    pub fn outbound(&self) -> BTreeSet<u32> {
        self.entries.iter().filter_map(|e| e.calls_out).collect()
    }
}

fn random_selector<R: Rng>(rng: &mut R) -> u32 {
    let v: u32 = rng.gen();
    match rng.gen_range(0..20) {
        0 => v & 0x0000_ffff,
        1..=3 => v & 0x00ff_ffff,
        4 => v & 0x0000_00ff,
        _ => v,
    }
}

fn random_outbound<R: Rng>(rng: &mut R) -> u32 {
    loop {
        let v: u32 = rng.gen();
        if v >> 24 != 0 && ![0xffff_ffff, 0x08c3_79a0, 0x4e48_7b71].contains(&v) {
            return v;
        }
    }
}

pub fn random_spec<R: Rng>(rng: &mut R, count: usize) -> DispatcherSpec {
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(count);
    while entries.len() < count {
        let selector = random_selector(rng);
        if !seen.insert(selector) {
            continue;
        }
        entries.push(Entry {
            selector,
            full_width: rng.gen_bool(0.3),
            dup_after: rng.gen_bool(0.3),
            sub_iszero: rng.gen_bool(0.25),
            calls_out: rng.gen_bool(0.2).then(|| random_outbound(rng)),
        });
    }
    DispatcherSpec {
        entries,
        layout: if rng.gen_bool(0.5) { Layout::Linear } else { Layout::BinarySearch },
        header: *[Header::Shr, Header::Push0Shr, Header::Div].choose(rng).unwrap(),
        leaf_size: rng.gen_range(2..=6),
        calldata_size_check: rng.gen_bool(0.5),
        fallback: rng.gen_bool(0.3),
    }
}

fn push_selector(asm: &mut Asm, selector: u32, full_width: bool) {
    let be = selector.to_be_bytes();
    if full_width {
        asm.push(&be);
    } else {
        let first = be.iter().position(|b| *b != 0).unwrap_or(3);
        asm.push(&be[first..]);
    }
}

fn compare(asm: &mut Asm, e: &Entry, index: usize) {
    if e.dup_after {
        push_selector(asm, e.selector, e.full_width);
        asm.ops("DUP2");
    } else {
        asm.ops("DUP1");
        push_selector(asm, e.selector, e.full_width);
    }
    asm.ops(if e.sub_iszero { "SUB ISZERO" } else { "EQ" });
    asm.push_label(&format!("fn{index}")).ops("JUMPI");
}

fn linear(asm: &mut Asm, entries: &[(usize, Entry)]) {
    for (i, e) in entries {
        compare(asm, e, *i);
    }
    asm.push_label("nomatch").ops("JUMP");
}

fn split(asm: &mut Asm, entries: &[(usize, Entry)], leaf: usize, counter: &mut usize) {
    if entries.len() <= leaf {
        linear(asm, entries);
        return;
    }
    let mid = entries.len() / 2;
    let right = format!("split{}", *counter);
    *counter += 1;
    asm.ops("DUP1");
    push_selector(asm, entries[mid].1.selector, true);
    asm.ops("GT").push_label(&right).ops("JUMPI");
    split(asm, &entries[..mid], leaf, counter);
    asm.label(&right);
    split(asm, &entries[mid..], leaf, counter);
}

pub fn assemble(spec: &DispatcherSpec) -> Vec<u8> {
    let mut asm = Asm::new();
    asm.push(&[0x80]).push(&[0x40]).ops("MSTORE");
    if spec.calldata_size_check {
        asm.push(&[4]).ops("CALLDATASIZE LT").push_label("nomatch").ops("JUMPI");
    }
    match spec.header {
        Header::Shr => {
            asm.push(&[0]).ops("CALLDATALOAD").push(&[0xe0]).ops("SHR");
        }
        Header::Push0Shr => {
            asm.ops("PUSH0 CALLDATALOAD").push(&[0xe0]).ops("SHR");
        }
        Header::Div => {
            let mut shift = [0u8; 29];
            shift[0] = 1;
            asm.push(&[0]).ops("CALLDATALOAD").push(&shift).ops("SWAP1 DIV").push(&[0xff; 4]).ops("AND");
        }
    }

    let mut indexed: Vec<(usize, Entry)> = spec.entries.iter().copied().enumerate().collect();
    match spec.layout {
        Layout::Linear => linear(&mut asm, &indexed),
        Layout::BinarySearch => {
            indexed.sort_by_key(|(_, e)| e.selector);
            split(&mut asm, &indexed, spec.leaf_size, &mut 0);
        }
    }

    asm.label("nomatch");
    if spec.fallback {
        asm.ops("CALLDATASIZE").push(&[0]).ops("DUP1 CALLDATACOPY").push(&[0]).ops("DUP1 CALLDATASIZE").push(&[0]);
        asm.push(&[0]).ops("SLOAD GAS DELEGATECALL").push(&[0]).ops("DUP1 RETURN");
    } else {
        asm.push(&[0]).ops("DUP1 REVERT");
    }

    for (i, e) in spec.entries.iter().enumerate() {
        asm.label(&format!("fn{i}"));
        match e.calls_out {
            Some(out) => {
                asm.push(&out.to_be_bytes()).push(&[0xe0]).ops("SHL").push(&[0]).ops("MSTORE");
                asm.push(&[0]).push(&[0]).push(&[4]).push(&[0]).push(&[0]).push(&[1]).ops("SLOAD GAS CALL POP STOP");
            }
            None => {
                asm.push(&[1]).push_int(i as u64 + 1).ops("SSTORE STOP");
            }
        }
    }
    asm.build()
}
