//! Splits the results of a composed run back into per-job histograms.
//!
//! Every composed key is cut into the clbit windows recorded at composition
//! time; each window's counts are re-aggregated. This is exactly the
//! marginal of the composed histogram onto that window, so shot totals are
//! preserved and nothing is renormalised.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::composer::Placement;
use crate::counts::CountsDistribution;
use crate::queue::JobId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnscheduleError {
    #[error("key has {found} bits, composed circuit has {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Bits `[clbit_offset, clbit_offset + clbit_count)` of `key`, where
/// `composed_bits` is the width every composed key must have.
pub fn slice_key<'a>(key: &'a str, placement: &Placement, composed_bits: usize) -> Result<&'a str, UnscheduleError> {
    if key.len() != composed_bits || placement.clbit_range().end > composed_bits {
        return Err(UnscheduleError::LengthMismatch {
            expected: composed_bits,
            found: key.len(),
        });
    }
    Ok(&key[placement.clbit_range()])
}

/// Per-placement histograms, in placement order.
pub fn demux(
    composed: &CountsDistribution,
    placements: &[Placement],
) -> Result<Vec<(JobId, CountsDistribution)>, UnscheduleError> {
    let width: usize = placements.iter().map(|p| p.clbit_count).sum();
    if composed.num_bits() != width {
        return Err(UnscheduleError::LengthMismatch {
            expected: width,
            found: composed.num_bits(),
        });
    }
    placements
        .iter()
        .map(|p| {
            let mut window: BTreeMap<String, u64> = BTreeMap::new();
            for (key, &n) in composed.counts() {
                let part = slice_key(key, p, width)?;
                *window.entry(part.to_string()).or_insert(0) += n;
            }
            let dist = CountsDistribution::new(p.clbit_count, window).expect("slices of valid keys");
            Ok((p.job_id.clone(), dist))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn placements(widths: &[usize]) -> Vec<Placement> {
        let mut off = 0;
        widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let p = Placement {
                    job_id: JobId::from(format!("j{i}")),
                    qubit_offset: off,
                    qubit_count: w,
                    clbit_offset: off,
                    clbit_count: w,
                };
                off += w;
                p
            })
            .collect()
    }

    #[test]
    fn slices_case_study_key() {
        let ps = placements(&[4, 6, 3]);
        let key = "1010011100110";
        assert_eq!(slice_key(key, &ps[0], 13).unwrap(), "1010");
        assert_eq!(slice_key(key, &ps[1], 13).unwrap(), "011100");
        assert_eq!(slice_key(key, &ps[2], 13).unwrap(), "110");
        assert_eq!(slice_key("0110", &placements(&[4])[0], 4).unwrap(), "0110");
        assert_eq!(
            slice_key("01", &ps[0], 13),
            Err(UnscheduleError::LengthMismatch { expected: 13, found: 2 })
        );
    }

    #[test]
    fn single_outcome_decomposition() {
        let composed = CountsDistribution::from_pairs(7, [("0000111", 10_000)]).unwrap();
        let out = demux(&composed, &placements(&[4, 3])).unwrap();
        assert_eq!(out[0].1, CountsDistribution::from_pairs(4, [("0000", 10_000)]).unwrap());
        assert_eq!(out[1].1, CountsDistribution::from_pairs(3, [("111", 10_000)]).unwrap());
    }

    #[test]
    fn marginalises_by_hand() {
        let composed = CountsDistribution::from_pairs(2, [("00", 5000), ("01", 5000)]).unwrap();
        let out = demux(&composed, &placements(&[1, 1])).unwrap();
        assert_eq!(out[0].1, CountsDistribution::from_pairs(1, [("0", 10_000)]).unwrap());
        assert_eq!(out[1].1, CountsDistribution::from_pairs(1, [("0", 5000), ("1", 5000)]).unwrap());
    }

    #[test]
    fn width_mismatch() {
        let composed = CountsDistribution::from_pairs(3, [("000", 1)]).unwrap();
        assert!(demux(&composed, &placements(&[2, 2])).is_err());
    }

    fn arb_tiling() -> impl Strategy<Value = (Vec<usize>, Vec<(u32, u64)>)> {
        proptest::collection::vec(1usize..4, 1..5).prop_flat_map(|widths| {
            let n: usize = widths.iter().sum();
            let outcomes = proptest::collection::vec((0u32..(1 << n), 1u64..50), 1..30);
            (Just(widths), outcomes)
        })
    }

    proptest! {
        #[test]
        fn demux_equals_brute_force_marginal((widths, outcomes) in arb_tiling()) {
            let n: usize = widths.iter().sum();
            let mut counts = BTreeMap::new();
            for (v, c) in &outcomes {
                let key: String = (0..n).map(|i| if v >> i & 1 == 1 { '1' } else { '0' }).collect();
                *counts.entry(key).or_insert(0) += c;
            }
            let composed = CountsDistribution::new(n, counts.clone()).unwrap();
            let ps = placements(&widths);
            let out = demux(&composed, &ps).unwrap();
            for ((_, dist), p) in out.iter().zip(&ps) {
                prop_assert_eq!(dist.total_shots(), composed.total_shots());
                // brute force over every window value
                for w in 0u32..(1 << p.clbit_count) {
                    let wkey: String = (0..p.clbit_count).map(|i| if w >> i & 1 == 1 { '1' } else { '0' }).collect();
                    let expected: u64 = counts
                        .iter()
                        .filter(|(k, _)| k[p.clbit_range()] == wkey)
                        .map(|(_, c)| *c)
                        .sum();
                    prop_assert_eq!(dist.get(&wkey), expected);
                }
            }
        }
    }
}
