//! Hard partitions, ensembles of partitions and their packed connectivity
//! matrices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A hard assignment of `n` observations to `k` clusters.
///
/// Labels are always stored canonically: `0..k` in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

/// Relabel `labels` by order of first appearance.
pub fn canonicalise(labels: &[usize]) -> Result<Partition> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("partition has no observations".into()));
    }
    let mut map: HashMap<usize, usize> = HashMap::new();
    let canonical = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    Ok(Partition {
        labels: canonical,
        k: map.len(),
    })
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        canonicalise(&labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct clusters.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Single-cluster and all-singleton partitions carry no ranking signal.
    pub fn is_degenerate(&self) -> bool {
        self.k == 1 || self.k == self.labels.len()
    }

    /// Cluster sizes indexed by canonical label.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn connectivity(&self) -> ConnectivityMatrix {
        ConnectivityMatrix::from_partition(self)
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Partition::new(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// Ordered pool of partitions over the same observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ensemble {
    partitions: Vec<Partition>,
    n: usize,
}

impl Ensemble {
    pub fn new(partitions: Vec<Partition>) -> Result<Self> {
        let first = partitions
            .first()
            .ok_or_else(|| Error::InvalidInput("ensemble has no partitions".into()))?;
        let n = first.len();
        for p in &partitions {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.len(),
                });
            }
        }
        Ok(Ensemble { partitions, n })
    }

    /// Convenience constructor from raw label vectors.
    pub fn from_labels<I, L>(models: I) -> Result<Self>
    where
        I: IntoIterator<Item = L>,
        L: AsRef<[usize]>,
    {
        let partitions = models
            .into_iter()
            .map(|l| canonicalise(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(partitions)
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn get(&self, t: usize) -> Option<&Partition> {
        self.partitions.get(t)
    }

    /// Number of models, `T`.
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Keep the non-degenerate members, returning them with their original
    /// indices. Fails when nothing survives.
    pub fn without_degenerate(&self) -> Result<(Ensemble, Vec<usize>)> {
        let (kept, idx): (Vec<_>, Vec<_>) = self
            .partitions
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_degenerate())
            .map(|(i, p)| (p.clone(), i))
            .unzip();
        if kept.is_empty() {
            return Err(Error::InvalidInput(
                "every partition in the ensemble is degenerate".into(),
            ));
        }
        Ok((Ensemble { partitions: kept, n: self.n }, idx))
    }
}

/// Square binary matrix packed as rows of 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    n: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        BitMatrix {
            n,
            words_per_row,
            words: vec![0; n * words_per_row],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.words[i * self.words_per_row + j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.words[i * self.words_per_row + j / 64] |= 1 << (j % 64);
    }

    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Number of set entries.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Number of entries where `self` and `other` differ. Both must share `n`.
    pub fn hamming(&self, other: &BitMatrix) -> u64 {
        debug_assert_eq!(self.n, other.n);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }
}

/// Binary co-membership matrix of one partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConnectivityMatrix {
    bits: BitMatrix,
}

impl ConnectivityMatrix {
    pub fn from_partition(p: &Partition) -> Self {
        let n = p.len();
        let mut bits = BitMatrix::zeros(n);
        // Members of each cluster share one row pattern.
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); p.k()];
        for (i, &l) in p.labels().iter().enumerate() {
            members[l].push(i);
        }
        let wpr = bits.words_per_row;
        for cluster in &members {
            let mut row = vec![0u64; wpr];
            for &j in cluster {
                row[j / 64] |= 1 << (j % 64);
            }
            for &i in cluster {
                bits.words[i * wpr..(i + 1) * wpr].copy_from_slice(&row);
            }
        }
        ConnectivityMatrix { bits }
    }

    pub fn n(&self) -> usize {
        self.bits.n
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
