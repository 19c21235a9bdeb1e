//! Expert demonstrations: ordered `(state, action)` samples.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::ensemble::{ActionKind, Normalizer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("sample {index}: state has {found} dims, expected {expected}")]
    StateDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {index}: action has {found} dims, expected {expected}")]
    ActionDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    /// Continuous action, or a one-hot vector for discrete action spaces.
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub env: String,
    pub episodes: usize,
    pub seed: u64,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_kind: ActionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    meta: DatasetMeta,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, samples: Vec<Sample>) -> Result<Self, DatasetError> {
        for (index, s) in samples.iter().enumerate() {
            if s.state.len() != meta.obs_dim {
                return Err(DatasetError::StateDimension {
                    index,
                    expected: meta.obs_dim,
                    found: s.state.len(),
                });
            }
            if s.action.len() != meta.action_dim {
                return Err(DatasetError::ActionDimension {
                    index,
                    expected: meta.action_dim,
                    found: s.action.len(),
                });
            }
        }
        Ok(Dataset { meta, samples })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// State statistics of this dataset's samples.
    pub fn normalizer(&self) -> Normalizer {
        Normalizer::fit(
            self.samples.iter().map(|s| s.state.as_slice()),
            self.meta.obs_dim,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn meta() -> DatasetMeta {
        DatasetMeta {
            env: "point_reach".to_string(),
            episodes: 1,
            seed: 0,
            obs_dim: 2,
            action_dim: 1,
            action_kind: ActionKind::Continuous,
        }
    }

    #[test]
    fn rejects_ragged_states() {
        let err = Dataset::new(
            meta(),
            vec![
                Sample { state: vec![0.0, 1.0], action: vec![0.0] },
                Sample { state: vec![0.0], action: vec![0.0] },
            ],
        )
        .unwrap_err();
        assert_eq!(err, DatasetError::StateDimension { index: 1, expected: 2, found: 1 });
    }

    #[test]
    fn normalizer_uses_sample_statistics() {
        let d = Dataset::new(
            meta(),
            vec![
                Sample { state: vec![1.0, 5.0], action: vec![0.0] },
                Sample { state: vec![3.0, 5.0], action: vec![0.0] },
            ],
        )
        .unwrap();
        let n = d.normalizer();
        assert_eq!(n.mean, vec![2.0, 5.0]);
        // The constant second dimension keeps unit scale.
        assert_eq!(n.std, vec![1.0, 1.0]);
    }
}
