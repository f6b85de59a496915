//! Measurement results.
//!
//! Bitstring keys follow one convention everywhere in this crate: character
//! `i` of a key is classical bit `i`, so the leftmost character is clbit 0.

use std::collections::BTreeMap;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CountsError {
    #[error("key {key:?} is not a {num_bits}-bit string of '0'/'1'")]
    BadKey { key: String, num_bits: usize },
    #[error("declared total {declared} does not match the sum of counts {actual}")]
    TotalMismatch { declared: u64, actual: u64 },
    #[error("cannot draw {requested} shots from a distribution of {available}")]
    NotEnoughShots { requested: u64, available: u64 },
}

fn check_key(key: &str, num_bits: usize) -> Result<(), CountsError> {
    if key.len() == num_bits && key.bytes().all(|b| b == b'0' || b == b'1') {
        Ok(())
    } else {
        Err(CountsError::BadKey {
            key: key.to_string(),
            num_bits,
        })
    }
}

/// Histogram of measured bitstrings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCounts")]
pub struct CountsDistribution {
    num_bits: usize,
    counts: BTreeMap<String, u64>,
    total_shots: u64,
}

#[derive(Deserialize)]
struct RawCounts {
    num_bits: usize,
    counts: BTreeMap<String, u64>,
    total_shots: Option<u64>,
}

impl TryFrom<RawCounts> for CountsDistribution {
    type Error = CountsError;

    fn try_from(raw: RawCounts) -> Result<Self, Self::Error> {
        let dist = CountsDistribution::new(raw.num_bits, raw.counts)?;
        match raw.total_shots {
            Some(declared) if declared != dist.total_shots => Err(CountsError::TotalMismatch {
                declared,
                actual: dist.total_shots,
            }),
            _ => Ok(dist),
        }
    }
}

impl CountsDistribution {
    /// Builds a distribution; zero-count entries are dropped.
    pub fn new(num_bits: usize, counts: BTreeMap<String, u64>) -> Result<Self, CountsError> {
        for key in counts.keys() {
            check_key(key, num_bits)?;
        }
        let counts: BTreeMap<String, u64> = counts.into_iter().filter(|(_, n)| *n > 0).collect();
        let total_shots = counts.values().sum();
        Ok(CountsDistribution {
            num_bits,
            counts,
            total_shots,
        })
    }

    pub fn from_pairs<'a>(
        num_bits: usize,
        pairs: impl IntoIterator<Item = (&'a str, u64)>,
    ) -> Result<Self, CountsError> {
        let mut counts = BTreeMap::new();
        for (k, n) in pairs {
            *counts.entry(k.to_string()).or_insert(0) += n;
        }
        Self::new(num_bits, counts)
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Most frequent outcome; ties resolve to the lexicographically smallest key.
    pub fn most_frequent(&self) -> Option<&str> {
        let mut best: Option<(&str, u64)> = None;
        for (k, &n) in &self.counts {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((k, n));
            }
        }
        best.map(|(k, _)| k)
    }

    /// Draws `shots` of the recorded shots without replacement.
    pub fn downsample(&self, shots: u64, rng: &mut impl RngCore) -> Result<Self, CountsError> {
        if shots > self.total_shots {
            return Err(CountsError::NotEnoughShots {
                requested: shots,
                available: self.total_shots,
            });
        }
        let keys: Vec<&String> = self.counts.keys().collect();
        let mut remaining: Vec<u64> = self.counts.values().copied().collect();
        let mut left = self.total_shots;
        let mut drawn = vec![0u64; keys.len()];
        for _ in 0..shots {
            let mut pick = rng.next_u64() % left;
            for (i, r) in remaining.iter_mut().enumerate() {
                if pick < *r {
                    *r -= 1;
                    drawn[i] += 1;
                    break;
                }
                pick -= *r;
            }
            left -= 1;
        }
        let counts = keys
            .into_iter()
            .zip(drawn)
            .map(|(k, n)| (k.clone(), n))
            .collect();
        Self::new(self.num_bits, counts)
    }
}

/// Exact outcome probabilities over classical bitstrings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution {
    pub num_bits: usize,
    pub probs: BTreeMap<String, f64>,
}

impl ProbabilityDistribution {
    pub fn get(&self, key: &str) -> f64 {
        self.probs.get(key).copied().unwrap_or(0.0)
    }

    /// Every key whose probability is within `tol` of the maximum.
    pub fn argmax_set(&self, tol: f64) -> Vec<&str> {
        let max = self.probs.values().copied().fold(0.0, f64::max);
        self.probs
            .iter()
            .filter(|(_, &p)| p >= max - tol)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Anything that can be viewed as a discrete distribution over bitstrings.
pub trait Distribution {
    fn num_bits(&self) -> usize;
    /// Unnormalised weight of every key with positive weight.
    fn weights(&self) -> Vec<(&str, f64)>;
}

impl Distribution for CountsDistribution {
    fn num_bits(&self) -> usize {
        self.num_bits
    }

    fn weights(&self) -> Vec<(&str, f64)> {
        self.counts.iter().map(|(k, &n)| (k.as_str(), n as f64)).collect()
    }
}

impl Distribution for ProbabilityDistribution {
    fn num_bits(&self) -> usize {
        self.num_bits
    }

    fn weights(&self) -> Vec<(&str, f64)> {
        self.probs
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k.as_str(), p))
            .collect()
    }
}
