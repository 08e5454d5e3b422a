//! Pairwise partition agreement (ARI, NMI) and ensemble averages of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Ensemble, Partition};

/// Co-occurrence counts between two partitions of the same observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(p: &Partition, q: &Partition) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: q.len(),
            });
        }
        let (rows, cols) = (p.k(), q.k());
        let mut counts = vec![0u64; rows * cols];
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for (&a, &b) in p.labels().iter().zip(q.labels()) {
            counts[a * cols + b] += 1;
            row_sums[a] += 1;
            col_sums[b] += 1;
        }
        Ok(ContingencyTable {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            n: p.len() as u64,
        })
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols + c]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().copied().filter(|&c| c > 0)
    }
}

fn pairs(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Hubert-Arabie adjusted Rand index.
pub fn ari(p: &Partition, q: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(p, q)?;
    let index: f64 = table.cells().map(pairs).sum();
    let sum_a: f64 = table.row_sums().iter().map(|&a| pairs(a)).sum();
    let sum_b: f64 = table.col_sums().iter().map(|&b| pairs(b)).sum();
    let total = pairs(table.n());
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if p == q { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let pr = c as f64 / n;
            -pr * pr.ln()
        })
        .sum()
}

/// Mutual information normalised by the geometric mean of the two label
/// entropies.
pub fn nmi(p: &Partition, q: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(p, q)?;
    let n = table.n() as f64;
    let hp = entropy(table.row_sums(), n);
    let hq = entropy(table.col_sums(), n);
    if hp == 0.0 || hq == 0.0 {
        return Ok(if hp == 0.0 && hq == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for r in 0..table.rows {
        for c in 0..table.cols {
            let nij = table.get(r, c);
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            let outer = table.row_sums[r] as f64 * table.col_sums[c] as f64;
            mi += nij / n * (n * nij / outer).ln();
        }
    }
    Ok((mi / (hp * hq).sqrt()).clamp(0.0, 1.0))
}

/// Which pairwise agreement to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    Ari,
    Nmi,
}

impl Agreement {
    pub fn eval(self, p: &Partition, q: &Partition) -> Result<f64> {
        match self {
            Agreement::Ari => ari(p, q),
            Agreement::Nmi => nmi(p, q),
        }
    }
}

fn average_against(e: &Ensemble, t: usize, metric: Agreement) -> Result<f64> {
    if e.len() < 2 {
        return Err(Error::InvalidInput(
            "an average agreement needs at least 2 models".into(),
        ));
    }
    let target = e
        .get(t)
        .ok_or_else(|| Error::InvalidInput(format!("model index {t} out of range")))?;
    let mut sum = 0.0;
    for (s, other) in e.partitions().iter().enumerate() {
        if s != t {
            sum += metric.eval(target, other)?;
        }
    }
    Ok(sum / (e.len() - 1) as f64)
}

/// Mean ARI of model `t` against every other member.
pub fn aari(e: &Ensemble, t: usize) -> Result<f64> {
    average_against(e, t, Agreement::Ari)
}

/// Mean NMI of model `t` against every other member.
pub fn anmi(e: &Ensemble, t: usize) -> Result<f64> {
    average_against(e, t, Agreement::Nmi)
}

/// Symmetric `T × T` agreement matrix, computed once per ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseAgreement {
    models: usize,
    values: Vec<f64>,
    /// Number of pairwise metric evaluations performed.
    pub evaluations: usize,
}

impl PairwiseAgreement {
    pub fn compute(e: &Ensemble, metric: Agreement) -> Result<Self> {
        let models = e.len();
        let pairs: Vec<(usize, usize)> = (0..models)
            .flat_map(|a| (a + 1..models).map(move |b| (a, b)))
            .collect();
        let parts = e.partitions();
        let computed = pairs
            .par_iter()
            .map(|&(a, b)| metric.eval(&parts[a], &parts[b]))
            .collect::<Result<Vec<f64>>>()?;
        let mut values = vec![1.0; models * models];
        for (&(a, b), &v) in pairs.iter().zip(&computed) {
            values[a * models + b] = v;
            values[b * models + a] = v;
        }
        Ok(PairwiseAgreement {
            models,
            values,
            evaluations: computed.len(),
        })
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.models + b]
    }

    /// Per-model averages over the other `T − 1` members.
    pub fn averages(&self) -> Result<Vec<f64>> {
        if self.models < 2 {
            return Err(Error::InvalidInput(
                "an average agreement needs at least 2 models".into(),
            ));
        }
        Ok((0..self.models)
            .map(|t| {
                let row = &self.values[t * self.models..(t + 1) * self.models];
                let sum: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|&(s, _)| s != t)
                    .map(|(_, v)| v)
                    .sum();
                sum / (self.models - 1) as f64
            })
            .collect())
    }
}
