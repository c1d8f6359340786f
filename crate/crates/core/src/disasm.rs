//! Total disassembly of EVM runtime code.
//!
//! Every input byte lands in exactly one place: an instruction's opcode byte,
//! a push operand, or the compiler metadata trailer. Decoding never fails;
//! undefined bytes become single-byte `INVALID` entries and a push that runs
//! past the end of the code is kept with its `truncated` flag set.

use std::fmt;

use crate::opcode::Opcode;

#[derive(Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: Opcode,
    /// Present only for PUSH1..PUSH32.
    pub push_operand: Option<Vec<u8>>,
    pub truncated: bool,
}

impl Instruction {
    /// Number of code bytes this instruction occupies.
    pub fn size(&self) -> usize {
        1 + self.push_operand.as_ref().map_or(0, Vec::len)
    }

    pub fn operand(&self) -> &[u8] {
        self.push_operand.as_deref().unwrap_or(&[])
    }

    /// Operand as an integer, when it fits in 8 bytes.
    pub fn operand_u64(&self) -> Option<u64> {
        let op = self.push_operand.as_ref()?;
        let significant: &[u8] = {
            let first = op.iter().position(|b| *b != 0).unwrap_or(op.len());
            &op[first..]
        };
        if significant.len() > 8 {
            return None;
        }
        Some(significant.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64))
    }

    /// True for `PUSH0` and any `PUSHn` whose operand is all zeros.
    pub fn pushes_zero(&self) -> bool {
        self.opcode == Opcode::PUSH0
            || (self.opcode.is_push() && !self.truncated && self.operand().iter().all(|b| *b == 0))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06x}: {}", self.offset, self.opcode)?;
        if let Some(op) = &self.push_operand {
            write!(f, " 0x{}", hex::encode(op))?;
            if self.truncated {
                f.write_str(" (truncated)")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstructionStream {
    pub code: Vec<u8>,
    pub instructions: Vec<Instruction>,
    pub metadata_trailer: Option<Vec<u8>>,
}

impl InstructionStream {
    /// Concatenates instruction bytes and the trailer. Equals `code` for
    /// every stream produced by [`disassemble`].
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.code.len());
        for ins in &self.instructions {
            out.push(ins.opcode.0);
            out.extend_from_slice(ins.operand());
        }
        if let Some(trailer) = &self.metadata_trailer {
            out.extend_from_slice(trailer);
        }
        out
    }

    /// Length of the decoded region, excluding the trailer.
    pub fn body_len(&self) -> usize {
        self.code.len() - self.metadata_trailer.as_ref().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Index of the instruction starting at `offset`, if one does.
    pub fn index_at(&self, offset: usize) -> Option<usize> {
        self.instructions.binary_search_by_key(&offset, |i| i.offset).ok()
    }

    pub fn contains_opcode(&self, op: Opcode) -> bool {
        self.instructions.iter().any(|i| i.opcode == op)
    }
}

pub fn disassemble(code: &[u8]) -> InstructionStream {
    let trailer_len = metadata_trailer_len(code).unwrap_or(0);
    let body = &code[..code.len() - trailer_len];

    let mut instructions = Vec::with_capacity(body.len() / 2 + 1);
    let mut pc = 0;
    while pc < body.len() {
        let opcode = Opcode(body[pc]);
        let width = opcode.push_width();
        let (push_operand, truncated) = if width > 0 {
            let start = pc + 1;
            let end = (start + width).min(body.len());
            (Some(body[start..end].to_vec()), end - start < width)
        } else {
            (None, false)
        };
        let ins = Instruction { offset: pc, opcode, push_operand, truncated };
        pc += ins.size();
        instructions.push(ins);
    }

    InstructionStream {
        code: code.to_vec(),
        instructions,
        metadata_trailer: (trailer_len > 0).then(|| code[code.len() - trailer_len..].to_vec()),
    }
}

/// Length of a well-formed CBOR metadata trailer (including its 2-byte
/// big-endian length suffix), or `None` when the suffix does not describe one.
pub fn metadata_trailer_len(code: &[u8]) -> Option<usize> {
    if code.len() < 3 {
        return None;
    }
    let n = code.len();
    let cbor_len = u16::from_be_bytes([code[n - 2], code[n - 1]]) as usize;
    if cbor_len == 0 || cbor_len + 2 > n {
        return None;
    }
    let cbor = &code[n - 2 - cbor_len..n - 2];
    // Compilers emit a single map keyed by text strings.
    if cbor[0] >> 5 != 5 {
        return None;
    }
    let end = cbor_item(cbor, 0, 0, true)?;
    (end == cbor.len()).then_some(cbor_len + 2)
}

const CBOR_MAX_DEPTH: usize = 8;

fn cbor_argument(buf: &[u8], pos: usize) -> Option<(u64, usize)> {
    let info = buf.get(pos)? & 0x1f;
    let pos = pos + 1;
    let width = match info {
        0..=23 => return Some((info as u64, pos)),
        24 => 1,
        25 => 2,
        26 => 4,
        27 => 8,
        // reserved or indefinite-length
        _ => return None,
    };
    let bytes = buf.get(pos..pos + width)?;
    Some((bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64), pos + width))
}

/// Returns the position just past one CBOR item starting at `pos`.
fn cbor_item(buf: &[u8], pos: usize, depth: usize, text_keys: bool) -> Option<usize> {
    if depth > CBOR_MAX_DEPTH {
        return None;
    }
    let major = buf.get(pos)? >> 5;
    let (arg, mut pos) = cbor_argument(buf, pos)?;
    match major {
        0 | 1 => Some(pos),
        2 | 3 => {
            let end = pos.checked_add(usize::try_from(arg).ok()?)?;
            (end <= buf.len()).then_some(end)
        }
        4 => {
            for _ in 0..arg {
                pos = cbor_item(buf, pos, depth + 1, false)?;
            }
            Some(pos)
        }
        5 => {
            for _ in 0..arg {
                if text_keys && buf.get(pos)? >> 5 != 3 {
                    return None;
                }
                pos = cbor_item(buf, pos, depth + 1, false)?;
                pos = cbor_item(buf, pos, depth + 1, false)?;
            }
            Some(pos)
        }
        6 => cbor_item(buf, pos, depth + 1, false),
        // simple values and floats; reserved widths were rejected above
        _ => Some(pos),
    }
}
