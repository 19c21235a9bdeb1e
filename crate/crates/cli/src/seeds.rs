//! Order-independent seeds for sweep cells.
//!
//! Every seed is the first eight bytes (little endian) of the SHA-256 digest
//! of a `|`-separated description of what it seeds, so adding, removing or
//! reordering cells never changes another cell's randomness.
//!
//! Dataset and evaluation seeds leave out the method, `tau` and `n`: all
//! methods with the same seed index train on the same demonstrations and are
//! scored from the same start states. The training seed hashes the whole
//! cell key.

use sha2::{Digest, Sha256};
use swarmbc_core::EnvId;

use crate::store::CellKey;

pub fn hash_seed(parts: &[&str]) -> u64 {
    let digest = Sha256::digest(parts.join("|").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn dataset_seed(master: u64, env: EnvId, episodes: usize, seed_index: usize) -> u64 {
    hash_seed(&[&master.to_string(), env.name(), "data", &episodes.to_string(), &seed_index.to_string()])
}

pub fn eval_seed(master: u64, env: EnvId, episodes: usize, seed_index: usize) -> u64 {
    hash_seed(&[&master.to_string(), env.name(), "eval", &episodes.to_string(), &seed_index.to_string()])
}

pub fn train_seed(master: u64, key: &CellKey) -> u64 {
    hash_seed(&[
        &master.to_string(),
        key.env.name(),
        key.method.name(),
        &key.tau.to_string(),
        &key.n.to_string(),
        &key.episodes.to_string(),
        &key.seed.to_string(),
    ])
}

pub fn baseline_seed(master: u64, env: EnvId) -> u64 {
    hash_seed(&[&master.to_string(), env.name(), "baselines"])
}
