#![allow(dead_code)]

pub mod abi;
pub mod asm;
pub mod contracts;
pub mod corpora;
pub mod dispatchers;
pub mod keccak;
pub mod logs;

use std::path::PathBuf;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
