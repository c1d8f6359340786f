//! Minimal ABI calldata encoder, independent of the library's decoder.

use super::keccak::selector;

#[derive(Clone, Debug)]
pub enum Token {
    Address([u8; 20]),
    Uint(u128),
    Bool(bool),
    Bytes(Vec<u8>),
    Str(String),
}

impl Token {
    fn is_dynamic(&self) -> bool {
        matches!(self, Token::Bytes(_) | Token::Str(_))
    }

    fn static_word(&self) -> [u8; 32] {
        let mut w = [0u8; 32];
        match self {
            Token::Address(a) => w[12..].copy_from_slice(a),
            Token::Uint(v) => w[16..].copy_from_slice(&v.to_be_bytes()),
            Token::Bool(b) => w[31] = *b as u8,
            Token::Bytes(_) | Token::Str(_) => unreachable!("dynamic token"),
        }
        w
    }

    fn tail(&self) -> Vec<u8> {
        let data = match self {
            Token::Bytes(b) => b.clone(),
            Token::Str(s) => s.as_bytes().to_vec(),
            _ => unreachable!("static token"),
        };
        let mut out = Token::Uint(data.len() as u128).static_word().to_vec();
        out.extend_from_slice(&data);
        while !out.len().is_multiple_of(32) {
            out.push(0);
        }
        out
    }
}

/// Head/tail encoding of `tokens` after the selector of `signature`.
pub fn encode_call(signature: &str, tokens: &[Token]) -> Vec<u8> {
    let mut out = selector(signature).to_vec();
    let head_len = 32 * tokens.len();
    let mut head = Vec::with_capacity(head_len);
    let mut tail = Vec::new();
    for t in tokens {
        if t.is_dynamic() {
            head.extend_from_slice(&Token::Uint((head_len + tail.len()) as u128).static_word());
            tail.extend(t.tail());
        } else {
            head.extend_from_slice(&t.static_word());
        }
    }
    out.extend(head);
    out.extend(tail);
    out
}
