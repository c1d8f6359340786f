//! Canonical function signatures and their 4-byte selectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::keccak::keccak256;
use crate::primitives::Selector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("malformed signature {0:?}: {1}")]
    Malformed(String, &'static str),
    #[error("unsupported parameter type {0:?}")]
    UnsupportedType(String),
}

/// Elementary ABI types plus fixed and dynamic arrays of them. Tuples are not
/// supported.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AbiType {
    Address,
    Bool,
    Uint(u16),
    Int(u16),
    FixedBytes(u8),
    Bytes,
    String,
    FixedArray(Box<AbiType>, usize),
    Array(Box<AbiType>),
}

impl AbiType {
    pub fn is_dynamic(&self) -> bool {
        match self {
            AbiType::Bytes | AbiType::String | AbiType::Array(_) => true,
            AbiType::FixedArray(inner, _) => inner.is_dynamic(),
            _ => false,
        }
    }

    /// Words this parameter occupies in the head of the argument block.
    pub fn head_words(&self) -> usize {
        match self {
            _ if self.is_dynamic() => 1,
            AbiType::FixedArray(inner, n) => inner.head_words() * n,
            _ => 1,
        }
    }
}

impl FromStr for AbiType {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unsupported = || SignatureError::UnsupportedType(s.to_string());
        if let Some(inner) = s.strip_suffix("[]") {
            return Ok(AbiType::Array(Box::new(inner.parse()?)));
        }
        if let Some(open) = s.strip_suffix(']').and_then(|t| t.rfind('[')) {
            let n: usize = s[open + 1..s.len() - 1].parse().map_err(|_| unsupported())?;
            if n == 0 {
                return Err(unsupported());
            }
            return Ok(AbiType::FixedArray(Box::new(s[..open].parse()?), n));
        }
        let bits = |digits: &str| -> Result<u16, SignatureError> {
            if digits.is_empty() {
                return Ok(256);
            }
            match digits.parse::<u16>() {
                Ok(b) if b > 0 && b <= 256 && b % 8 == 0 && !digits.starts_with('0') => Ok(b),
                _ => Err(unsupported()),
            }
        };
        Ok(match s {
            "address" => AbiType::Address,
            "bool" => AbiType::Bool,
            "bytes" => AbiType::Bytes,
            "string" => AbiType::String,
            _ if s.starts_with("uint") => AbiType::Uint(bits(&s[4..])?),
            _ if s.starts_with("int") => AbiType::Int(bits(&s[3..])?),
            _ if s.starts_with("bytes") => match s[5..].parse::<u8>() {
                Ok(n) if (1..=32).contains(&n) && !s[5..].starts_with('0') => AbiType::FixedBytes(n),
                _ => return Err(unsupported()),
            },
            _ => return Err(unsupported()),
        })
    }
}

impl fmt::Display for AbiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbiType::Address => f.write_str("address"),
            AbiType::Bool => f.write_str("bool"),
            AbiType::Uint(b) => write!(f, "uint{b}"),
            AbiType::Int(b) => write!(f, "int{b}"),
            AbiType::FixedBytes(n) => write!(f, "bytes{n}"),
            AbiType::Bytes => f.write_str("bytes"),
            AbiType::String => f.write_str("string"),
            AbiType::FixedArray(inner, n) => write!(f, "{inner}[{n}]"),
            AbiType::Array(inner) => write!(f, "{inner}[]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionSignature {
    pub name: String,
    pub param_types: Vec<AbiType>,
}

impl FunctionSignature {
    /// `name(type1,type2,...)` with no spaces; aliases such as `uint` are
    /// already expanded.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn selector(&self) -> Selector {
        keccak_selector(self)
    }

    /// Positions of plain `address` parameters.
    pub fn address_param_indices(&self) -> Vec<usize> {
        self.param_types
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == AbiType::Address)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn keccak_selector(sig: &FunctionSignature) -> Selector {
    let digest = keccak256(sig.canonical().as_bytes());
    Selector([digest[0], digest[1], digest[2], digest[3]])
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

impl FromStr for FunctionSignature {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let malformed = |why| SignatureError::Malformed(s.to_string(), why);
        let open = compact.find('(').ok_or_else(|| malformed("missing '('"))?;
        let inner = compact[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| malformed("missing trailing ')'"))?;
        let name = &compact[..open];
        if !is_identifier(name) {
            return Err(malformed("function name is not an identifier"));
        }
        if inner.contains(['(', ')']) {
            return Err(SignatureError::UnsupportedType(inner.to_string()));
        }
        let param_types = if inner.is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(str::parse).collect::<Result<_, _>>()?
        };
        Ok(FunctionSignature { name: name.to_string(), param_types })
    }
}

impl fmt::Display for FunctionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, t) in self.param_types.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for FunctionSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for FunctionSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
