//! Distance-based internal validity indices over raw observations.
//!
//! All distances are Euclidean. Degenerate geometry (zero within-cluster
//! dispersion, coincident centroids) yields infinite sentinels rather than
//! errors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Row-major `n × d` matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput("data matrix must be non-empty".into()));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data matrix has non-finite entries".into()));
        }
        Ok(DataMatrix { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        DataMatrix::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_len(x: &DataMatrix, p: &Partition) -> Result<()> {
    if x.n() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: p.len(),
        });
    }
    Ok(())
}

/// Per-cluster centroids, `k × d` row-major.
fn centroids(x: &DataMatrix, p: &Partition) -> Vec<f64> {
    let d = x.d();
    let mut sums = vec![0.0; p.k() * d];
    for (i, &l) in p.labels().iter().enumerate() {
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for (l, size) in p.cluster_sizes().into_iter().enumerate() {
        for s in &mut sums[l * d..(l + 1) * d] {
            *s /= size as f64;
        }
    }
    sums
}

/// Within-group sum of squared distances to cluster centroids.
pub fn wgss(x: &DataMatrix, p: &Partition) -> Result<f64> {
    check_len(x, p)?;
    let d = x.d();
    let c = centroids(x, p);
    Ok(p.labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x.row(i), &c[l * d..(l + 1) * d]))
        .sum())
}

/// Calinski-Harabasz variance ratio. `+∞` when within-group dispersion is 0.
pub fn chi(x: &DataMatrix, p: &Partition) -> Result<f64> {
    check_len(x, p)?;
    let (n, k) = (p.len(), p.k());
    if k < 2 || k + 1 > n {
        return Err(Error::UndefinedIndex { k, n });
    }
    let d = x.d();
    let c = centroids(x, p);
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let between: f64 = p
        .cluster_sizes()
        .iter()
        .enumerate()
        .map(|(l, &size)| size as f64 * sq_dist(&c[l * d..(l + 1) * d], &mean))
        .sum();
    let within = wgss(x, p)?;
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(between / within * (n - k) as f64 / (k - 1) as f64)
}

/// Mean silhouette width. Samples in singleton clusters contribute 0.
pub fn silhouette(x: &DataMatrix, p: &Partition) -> Result<f64> {
    check_len(x, p)?;
    let (n, k) = (p.len(), p.k());
    if k < 2 || k + 1 > n {
        return Err(Error::UndefinedIndex { k, n });
    }
    let labels = p.labels();
    let sizes = p.cluster_sizes();
    let widths: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += sq_dist(x.row(i), x.row(j)).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&l| l != own)
                .map(|l| sums[l] / sizes[l] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(widths.iter().sum::<f64>() / n as f64)
}

/// Davies-Bouldin index. Coincident centroids make the index `+∞`.
pub fn dbi(x: &DataMatrix, p: &Partition) -> Result<f64> {
    check_len(x, p)?;
    let (n, k) = (p.len(), p.k());
    if k < 2 {
        return Err(Error::UndefinedIndex { k, n });
    }
    let d = x.d();
    let c = centroids(x, p);
    let sizes = p.cluster_sizes();
    let mut spread = vec![0.0; k];
    for (i, &l) in p.labels().iter().enumerate() {
        spread[l] += sq_dist(x.row(i), &c[l * d..(l + 1) * d]).sqrt();
    }
    for (s, &size) in spread.iter_mut().zip(&sizes) {
        *s /= size as f64;
    }
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in (0..k).filter(|&b| b != a) {
            let sep = sq_dist(&c[a * d..(a + 1) * d], &c[b * d..(b + 1) * d]).sqrt();
            let r = if sep == 0.0 {
                f64::INFINITY
            } else {
                (spread[a] + spread[b]) / sep
            };
            worst = worst.max(r);
        }
        total += worst;
    }
    Ok(total / k as f64)
}
