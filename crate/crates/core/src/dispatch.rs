//! Dispatcher recovery: which selectors a contract answers to, which it calls
//! out to, and whether unmatched calls reach a fallback.
//!
//! The dispatcher is located by its selector load (`CALLDATALOAD` of word 0
//! followed by `SHR 0xe0` or the older `DIV` form) and then walked block by
//! block. The walk only steps through a small alphabet of stack and compare
//! instructions; the first instruction outside it marks a no-match exit.
//!
//! Recognised comparison templates, ending at a `JUMPI`:
//!
//! ```text
//! [DUP1|DUP2] PUSH1..4 c  (EQ | SUB ISZERO)  PUSHn target  JUMPI
//!  PUSH1..4 c [DUP1|DUP2] (EQ | SUB ISZERO)  PUSHn target  JUMPI
//! ```
//!
//! `GT`/`LT` in the compare position marks a binary-search split node; its
//! target is walked as more dispatcher code.

use std::collections::{BTreeSet, HashSet};

use crate::disasm::{Instruction, InstructionStream};
use crate::opcode::Opcode;
use crate::primitives::Selector;

/// Versioned name of the comparison template set, recorded in reports.
pub const TEMPLATE_SET_VERSION: &str = "dispatch-templates/1";

pub const DEFAULT_OUTBOUND_WINDOW: usize = 64;

/// Selector-shaped constants that are masks or revert payloads, not calls.
const NON_CALL_CONSTANTS: [u32; 4] = [0x0000_0000, 0xffff_ffff, 0x08c3_79a0, 0x4e48_7b71];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompareKind {
    Eq,
    SubIsZero,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectorSite {
    pub selector: Selector,
    /// Index of the constant push in the instruction list.
    pub push_index: usize,
    pub kind: CompareKind,
    pub target: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExitKind {
    /// REVERT, STOP, INVALID or running off the end of the code.
    RevertOrStop,
    /// Any other instruction: the no-match path executes real code.
    Code,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DispatchExit {
    pub index: usize,
    pub kind: ExitKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DispatcherInfo {
    /// Index of the `CALLDATALOAD` that reads the selector.
    pub selector_load: Option<usize>,
    pub sites: Vec<SelectorSite>,
    /// Constant pushes consumed by comparisons, including split pivots.
    pub comparison_pushes: HashSet<usize>,
    pub exits: Vec<DispatchExit>,
}

impl DispatcherInfo {
    /// A dispatcher exists once at least one comparison template matched.
    pub fn is_present(&self) -> bool {
        !self.sites.is_empty()
    }

    pub fn selectors(&self) -> BTreeSet<Selector> {
        self.sites.iter().map(|s| s.selector).collect()
    }
}

enum JumpShape {
    Compare { push_index: usize, kind: CompareKind, selector: Selector },
    Split { push_index: usize },
    Other,
}

pub fn analyze_dispatcher(stream: &InstructionStream) -> DispatcherInfo {
    let ins = &stream.instructions;
    let mut info = DispatcherInfo::default();
    let Some(load) = find_selector_load(ins) else {
        return info;
    };
    info.selector_load = Some(load);

    let mut visited = HashSet::new();
    let mut exits = HashSet::new();
    let mut work = vec![load + 1];
    while let Some(start) = work.pop() {
        if !visited.insert(start) {
            continue;
        }
        let mut k = start;
        loop {
            let Some(cur) = ins.get(k) else {
                exits.insert(DispatchExit { index: k, kind: ExitKind::RevertOrStop });
                break;
            };
            if !in_dispatch_alphabet(cur.opcode) {
                let kind = match cur.opcode {
                    Opcode::REVERT | Opcode::STOP | Opcode::INVALID => ExitKind::RevertOrStop,
                    op if !op.is_defined() => ExitKind::RevertOrStop,
                    _ => ExitKind::Code,
                };
                exits.insert(DispatchExit { index: k, kind });
                break;
            }
            match cur.opcode {
                Opcode::JUMPI => {
                    let target = push_target(stream, k);
                    match classify_jumpi(ins, k) {
                        JumpShape::Compare { push_index, kind, selector } => {
                            info.comparison_pushes.insert(push_index);
                            info.sites.push(SelectorSite { selector, push_index, kind, target });
                        }
                        JumpShape::Split { push_index } => {
                            info.comparison_pushes.insert(push_index);
                            work.extend(target);
                        }
                        JumpShape::Other => work.extend(target),
                    }
                    k += 1;
                }
                Opcode::JUMP => {
                    match push_target(stream, k) {
                        Some(t) => work.push(t),
                        // computed jump: cannot tell where it lands
                        None => {
                            exits.insert(DispatchExit { index: k, kind: ExitKind::Code });
                        }
                    }
                    break;
                }
                _ => k += 1,
            }
        }
    }

    info.sites.sort_by_key(|s| s.push_index);
    let mut exits: Vec<_> = exits.into_iter().collect();
    exits.sort_by_key(|e| e.index);
    info.exits = exits;
    info
}

fn in_dispatch_alphabet(op: Opcode) -> bool {
    op.is_push()
        || op == Opcode::PUSH0
        || matches!(
            op,
            Opcode::JUMPDEST
                | Opcode::DUP1
                | Opcode::DUP2
                | Opcode::DUP3
                | Opcode::SWAP1
                | Opcode::POP
                | Opcode::EQ
                | Opcode::GT
                | Opcode::LT
                | Opcode::SUB
                | Opcode::ISZERO
                | Opcode::AND
                | Opcode::SHR
                | Opcode::DIV
                | Opcode::JUMPI
                | Opcode::JUMP
        )
}

/// `CALLDATALOAD` of offset zero whose result is shifted or divided down to
/// the top four bytes within the next few instructions.
fn find_selector_load(ins: &[Instruction]) -> Option<usize> {
    (1..ins.len()).find(|&i| {
        ins[i].opcode == Opcode::CALLDATALOAD
            && ins[i - 1].pushes_zero()
            && ins[i + 1..ins.len().min(i + 6)].iter().enumerate().any(|(j, x)| match x.opcode {
                Opcode::DIV => true,
                Opcode::SHR => {
                    let prev = &ins[i + j];
                    prev.opcode.is_push() && prev.operand_u64() == Some(0xe0)
                        || prev.opcode == Opcode::SWAP1
                }
                _ => false,
            })
    })
}

/// Resolves `PUSHn target; JUMP(I)` to the index of the destination `JUMPDEST`.
fn push_target(stream: &InstructionStream, jump_index: usize) -> Option<usize> {
    let push = stream.instructions.get(jump_index.checked_sub(1)?)?;
    if !push.opcode.is_push() || push.truncated {
        return None;
    }
    let offset = usize::try_from(push.operand_u64()?).ok()?;
    let idx = stream.index_at(offset)?;
    (stream.instructions[idx].opcode == Opcode::JUMPDEST).then_some(idx)
}

fn is_selector_push(ins: &Instruction) -> bool {
    (Opcode::PUSH1.0..=Opcode::PUSH4.0).contains(&ins.opcode.0) && !ins.truncated
}

fn classify_jumpi(ins: &[Instruction], j: usize) -> JumpShape {
    let at = |i: Option<usize>| i.and_then(|i| ins.get(i));
    // the jump target push
    match at(j.checked_sub(1)) {
        Some(p) if p.opcode.is_push() => {}
        _ => return JumpShape::Other,
    }
    let Some(cmp_idx) = j.checked_sub(2) else {
        return JumpShape::Other;
    };
    let (kind, operands_end) = match ins[cmp_idx].opcode {
        Opcode::EQ => (Some(CompareKind::Eq), cmp_idx),
        Opcode::GT | Opcode::LT => (None, cmp_idx),
        Opcode::ISZERO => match at(cmp_idx.checked_sub(1)) {
            Some(s) if s.opcode == Opcode::SUB => (Some(CompareKind::SubIsZero), cmp_idx - 1),
            _ => return JumpShape::Other,
        },
        _ => return JumpShape::Other,
    };

    let push_index = match at(operands_end.checked_sub(1)) {
        Some(p) if is_selector_push(p) => operands_end - 1,
        Some(d) if matches!(d.opcode, Opcode::DUP1 | Opcode::DUP2) => {
            match at(operands_end.checked_sub(2)) {
                Some(p) if is_selector_push(p) => operands_end - 2,
                _ => return JumpShape::Other,
            }
        }
        _ => return JumpShape::Other,
    };

    match kind {
        None => JumpShape::Split { push_index },
        Some(kind) => {
            let selector = Selector::from_short(ins[push_index].operand())
                .expect("PUSH1..PUSH4 operand fits a selector");
            JumpShape::Compare { push_index, kind, selector }
        }
    }
}

pub fn extract_local_selectors(stream: &InstructionStream) -> BTreeSet<Selector> {
    analyze_dispatcher(stream).selectors()
}

pub fn extract_outbound_selectors(stream: &InstructionStream) -> BTreeSet<Selector> {
    outbound_selectors_with(stream, &analyze_dispatcher(stream), DEFAULT_OUTBOUND_WINDOW)
}

/// Four-byte constants pushed outside comparison sites with an external call
/// in the same basic block or within `window` instructions downstream.
///
/// A `PUSH32` carrying a left-aligned selector (the remaining 28 bytes zero)
/// counts as well.
pub fn outbound_selectors_with(
    stream: &InstructionStream,
    dispatcher: &DispatcherInfo,
    window: usize,
) -> BTreeSet<Selector> {
    let ins = &stream.instructions;
    let calls: Vec<usize> = ins
        .iter()
        .enumerate()
        .filter(|(_, i)| i.opcode.is_external_call())
        .map(|(i, _)| i)
        .collect();
    if calls.is_empty() {
        return BTreeSet::new();
    }

    let mut out = BTreeSet::new();
    for (i, cur) in ins.iter().enumerate() {
        if dispatcher.comparison_pushes.contains(&i) || cur.truncated {
            continue;
        }
        let selector = match cur.opcode {
            Opcode::PUSH4 => Selector::from_slice(cur.operand()).ok(),
            Opcode::PUSH32 if cur.operand()[4..].iter().all(|b| *b == 0) => {
                Selector::from_slice(&cur.operand()[..4]).ok()
            }
            _ => None,
        };
        let Some(selector) = selector else { continue };
        if NON_CALL_CONSTANTS.contains(&selector.to_u32()) {
            continue;
        }
        if matches!(ins.get(i + 1).map(|n| n.opcode), Some(Opcode::JUMP | Opcode::JUMPI)) {
            continue;
        }

        // next external call at or after i + 1
        let next_call = calls[calls.partition_point(|&c| c <= i)..].first().copied();
        let Some(next_call) = next_call else { continue };
        let in_window = next_call - i <= window;
        let same_block = || {
            ins[i + 1..next_call]
                .iter()
                .all(|x| x.opcode != Opcode::JUMPDEST && !x.opcode.ends_block())
        };
        if in_window || same_block() {
            out.insert(selector);
        }
    }
    out
}

/// True when unmatched calls execute something other than an immediate
/// revert or stop, or when there is no dispatcher but the code forwards via
/// an external call.
pub fn detect_fallback(stream: &InstructionStream) -> bool {
    fallback_with(stream, &analyze_dispatcher(stream))
}

pub fn fallback_with(stream: &InstructionStream, dispatcher: &DispatcherInfo) -> bool {
    if dispatcher.is_present() {
        dispatcher.exits.iter().any(|e| e.kind == ExitKind::Code)
    } else {
        !stream.code.is_empty()
            && stream.instructions.iter().any(|i| i.opcode.is_external_call())
    }
}
