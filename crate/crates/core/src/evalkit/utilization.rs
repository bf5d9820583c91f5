use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFrequency {
    pub token: u64,
    pub count: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub codebook_size: u64,
    pub total_tokens: u64,
    pub used_count: u64,
    pub utilization_rate: f64,
    /// Every observed code, most frequent first (ties by token id).
    pub frequencies: Vec<CodeFrequency>,
}

impl UtilizationReport {
    pub fn top(&self, k: usize) -> &[CodeFrequency] {
        &self.frequencies[..k.min(self.frequencies.len())]
    }

    /// `rank,token,count,ratio` rows for the `k` most frequent codes.
    pub fn frequency_csv(&self, k: usize) -> String {
        let mut out = String::from("rank,token,count,ratio\n");
        for (i, f) in self.top(k).iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, f.token, f.count, f.ratio).unwrap();
        }
        out
    }
}

/// Counts distinct tokens across `streams` against a vocabulary of
/// `vocab_size` codes.
pub fn codebook_utilization<'a, I>(streams: I, vocab_size: u64) -> Result<UtilizationReport>
where
    I: IntoIterator<Item = &'a [u64]>,
{
    if vocab_size == 0 {
        return Err(Error::InvalidArgument("vocabulary size must be at least 1".into()));
    }
    let mut counts: HashMap<u64, u64> = HashMap::new();
    let mut total = 0u64;
    for s in streams {
        for &t in s {
            if t >= vocab_size {
                return Err(Error::InvalidArgument(format!("token {t} outside vocabulary of {vocab_size}")));
            }
            *counts.entry(t).or_default() += 1;
            total += 1;
        }
    }
    let mut frequencies: Vec<CodeFrequency> = counts
        .into_iter()
        .map(|(token, count)| CodeFrequency {
            token,
            count,
            ratio: count as f64 / total as f64,
        })
        .collect();
    frequencies.sort_by(|a, b| b.count.cmp(&a.count).then(a.token.cmp(&b.token)));
    let used = frequencies.len() as u64;
    Ok(UtilizationReport {
        codebook_size: vocab_size,
        total_tokens: total,
        used_count: used,
        utilization_rate: used as f64 / vocab_size as f64,
        frequencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn hand_counts() {
        let r = codebook_utilization([&[0u64, 1, 2, 1][..]], 512).unwrap();
        assert_eq!(r.used_count, 3);
        assert_eq!(r.utilization_rate, 3.0 / 512.0);
        assert_eq!(r.frequencies[0], CodeFrequency { token: 1, count: 2, ratio: 0.5 });
        let all: Vec<u64> = (0..8).collect();
        assert_eq!(codebook_utilization([&all[..]], 8).unwrap().utilization_rate, 1.0);
        assert!(codebook_utilization([&[8u64][..]], 8).is_err());
        assert!(codebook_utilization([&[0u64][..]], 0).is_err());
    }

    #[test]
    fn random_tokens_match_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<u64> = (0..6000).map(|_| rng.random_range(0..512)).collect();
        let b: Vec<u64> = (0..4000).map(|_| rng.random_range(0..512)).collect();
        let r = codebook_utilization([&a[..], &b[..]], 512).unwrap();
        let mut oracle = BTreeMap::new();
        for t in a.iter().chain(&b) {
            *oracle.entry(*t).or_insert(0u64) += 1;
        }
        assert_eq!(r.used_count as usize, oracle.len());
        for f in &r.frequencies {
            assert_eq!(oracle[&f.token], f.count);
        }
        let sum: f64 = r.frequencies.iter().map(|f| f.ratio).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(r.frequencies.windows(2).all(|w| w[0].count >= w[1].count));
        assert_eq!(r.frequency_csv(3).lines().count(), 4);
    }
}
