//! Co-association consensus of an ensemble and its mean-thresholded
//! binarisation.
//!
//! Entries are kept as integer co-clustering counts alongside the number of
//! models, so every entry is an exact rational `count / T`. Only the strict
//! upper triangle is stored; the diagonal is implicitly `T`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::{BitMatrix, Ensemble};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusMatrix {
    n: usize,
    models: u32,
    upper: Vec<u32>,
}

#[inline]
fn row_offset(n: usize, i: usize) -> usize {
    i * n - i * (i + 1) / 2
}

impl ConsensusMatrix {
    /// Average of the connectivity matrices of every ensemble member.
    pub fn build(ensemble: &Ensemble) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(Error::InvalidInput("empty ensemble".into()));
        }
        let n = ensemble.n();
        let models = u32::try_from(ensemble.len())
            .map_err(|_| Error::InvalidInput("too many models".into()))?;
        let labels: Vec<&[usize]> = ensemble.partitions().iter().map(|p| p.labels()).collect();

        let mut upper = vec![0u32; n * n.saturating_sub(1) / 2];
        let mut rows: Vec<(usize, &mut [u32])> = Vec::with_capacity(n);
        let mut rest = upper.as_mut_slice();
        for i in 0..n {
            let (row, tail) = rest.split_at_mut(n - 1 - i);
            rows.push((i, row));
            rest = tail;
        }
        rows.into_par_iter().for_each(|(i, row)| {
            for l in &labels {
                let li = l[i];
                for (cell, &lj) in row.iter_mut().zip(&l[i + 1..]) {
                    *cell += (lj == li) as u32;
                }
            }
        });
        Ok(ConsensusMatrix { n, models, upper })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of averaged connectivity matrices, `T`.
    pub fn models(&self) -> u32 {
        self.models
    }

    /// Number of models co-clustering `i` and `j`.
    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u32 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.models,
            std::cmp::Ordering::Less => self.upper[row_offset(self.n, i) + j - i - 1],
            std::cmp::Ordering::Greater => self.upper[row_offset(self.n, j) + i - j - 1],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) as f64 / self.models as f64
    }

    /// Counts for `(i, j)` with `j > i`, in column order.
    #[inline]
    pub fn upper_row(&self, i: usize) -> &[u32] {
        let start = row_offset(self.n, i);
        &self.upper[start..start + self.n - 1 - i]
    }

    /// Sum of counts over all `n²` ordered entries, diagonal included.
    pub fn total_count(&self) -> u128 {
        let off: u128 = self.upper.iter().map(|&c| c as u128).sum();
        2 * off + self.n as u128 * self.models as u128
    }

    /// Arithmetic mean over all `n²` entries, diagonal included.
    pub fn mean(&self) -> f64 {
        let n2 = (self.n as f64) * (self.n as f64);
        self.total_count() as f64 / (self.models as f64 * n2)
    }

    /// Threshold at the mean; entries equal to the mean map to 1.
    pub fn binarise(&self) -> BinarisedConsensus {
        let n = self.n;
        let total = self.total_count();
        let n2 = (n as u128) * (n as u128);
        // count / T >= total / (T n²)  <=>  count · n² >= total
        let keep = |c: u32| (c as u128) * n2 >= total;
        let mut bits = BitMatrix::zeros(n);
        for i in 0..n {
            if keep(self.models) {
                bits.set(i, i);
            }
            for (off, &c) in self.upper_row(i).iter().enumerate() {
                if keep(c) {
                    let j = i + 1 + off;
                    bits.set(i, j);
                    bits.set(j, i);
                }
            }
        }
        BinarisedConsensus {
            bits,
            threshold: self.mean(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Consensus thresholded at its own mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarisedConsensus {
    bits: BitMatrix,
    threshold: f64,
}

impl BinarisedConsensus {
    pub fn n(&self) -> usize {
        self.bits.n()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits.get(i, j)
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.bits.to_rows()
    }
}
