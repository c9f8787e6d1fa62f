//! Proof-length statistics and the canonical length buckets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LengthBucket {
    pub lower: usize,
    pub upper: usize,
}

impl LengthBucket {
    pub fn contains(&self, len: usize) -> bool {
        (self.lower..=self.upper).contains(&len)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.lower, self.upper)
    }
}

pub const BUCKETS: [LengthBucket; 7] = [
    LengthBucket { lower: 1, upper: 2 },
    LengthBucket { lower: 3, upper: 5 },
    LengthBucket {
        lower: 6,
        upper: 10,
    },
    LengthBucket {
        lower: 11,
        upper: 15,
    },
    LengthBucket {
        lower: 16,
        upper: 25,
    },
    LengthBucket {
        lower: 26,
        upper: 100,
    },
    LengthBucket {
        lower: 101,
        upper: 298,
    },
];

/// The canonical bucket holding `len`, if any.
pub fn bucket_of(len: usize) -> Option<LengthBucket> {
    BUCKETS.iter().copied().find(|b| b.contains(len))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("no proof lengths to summarize")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: usize,
    pub min: usize,
    pub total: usize,
    /// Counts per canonical bucket, in bucket order.
    pub histogram: Vec<(LengthBucket, usize)>,
    /// Lengths outside every canonical bucket.
    pub out_of_range: usize,
}

pub fn length_stats(lengths: &[usize]) -> Result<LengthStats, StatsError> {
    if lengths.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let count = lengths.len();
    let total: usize = lengths.iter().sum();
    let mean = total as f64 / count as f64;
    let var = lengths
        .iter()
        .map(|&l| (l as f64 - mean).powi(2))
        .sum::<f64>()
        / count as f64;
    let mut histogram: Vec<(LengthBucket, usize)> = BUCKETS.iter().map(|b| (*b, 0)).collect();
    let mut out_of_range = 0;
    for &l in lengths {
        match histogram.iter_mut().find(|(b, _)| b.contains(l)) {
            Some((_, c)) => *c += 1,
            None => out_of_range += 1,
        }
    }
    Ok(LengthStats {
        count,
        mean,
        std: var.sqrt(),
        max: *lengths.iter().max().expect("non-empty"),
        min: *lengths.iter().min().expect("non-empty"),
        total,
        histogram,
        out_of_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_lengths() {
        let s = length_stats(&[3, 3, 3]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn boundary_buckets() {
        let s = length_stats(&[1, 298]).unwrap();
        assert_eq!(s.histogram[0].1, 1);
        assert_eq!(s.histogram[6].1, 1);
        assert_eq!(s.histogram.iter().map(|h| h.1).sum::<usize>(), 2);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(length_stats(&[]), Err(StatsError::EmptyInput));
    }

    #[test]
    fn population_std() {
        // Deviations from mean 5: -3, -1, 1, 3 -> variance (9+1+1+9)/4 = 5.
        let s = length_stats(&[2, 4, 6, 8]).unwrap();
        assert!((s.std - 5f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn buckets_partition_the_range(len in 1usize..=298) {
            prop_assert_eq!(BUCKETS.iter().filter(|b| b.contains(len)).count(), 1);
        }

        #[test]
        fn histogram_agrees_with_mean(lengths in proptest::collection::vec(1usize..=298, 1..60)) {
            let s = length_stats(&lengths).unwrap();
            prop_assert_eq!(s.histogram.iter().map(|h| h.1).sum::<usize>(), lengths.len());
            let recomputed = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
            prop_assert_eq!(s.mean, recomputed);
        }
    }
}
