//! Seeded Lloyd's KMeans for building model pools from raw observations.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indices::{sq_dist, DataMatrix};
use crate::partition::{Ensemble, Partition};
use crate::synth::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    RandomPoints,
    KMeansPlusPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
    pub seed: u64,
    pub init: Init,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iterations: 300,
            tolerance: 1e-6,
            seed,
            init: Init::KMeansPlusPlus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub partition: Partition,
    /// `k × d` row-major centroids, indexed by internal cluster id.
    pub centroids: Vec<f64>,
    pub iterations: usize,
    /// Sum of squared distances right after each assignment step.
    pub objective: Vec<f64>,
}

fn init_centroids<R: Rng>(x: &DataMatrix, k: usize, init: Init, rng: &mut R) -> Vec<f64> {
    let n = x.n();
    let chosen: Vec<usize> = match init {
        Init::RandomPoints => rand::seq::index::sample(rng, n, k).into_vec(),
        Init::KMeansPlusPlus => {
            let mut chosen = vec![rng.gen_range(0..n)];
            let mut nearest: Vec<f64> = (0..n)
                .map(|i| sq_dist(x.row(i), x.row(chosen[0])))
                .collect();
            while chosen.len() < k {
                let total: f64 = nearest.iter().sum();
                let next = if total > 0.0 {
                    let mut target = rng.gen::<f64>() * total;
                    let mut pick = n - 1;
                    for (i, &w) in nearest.iter().enumerate() {
                        if w > 0.0 && target < w {
                            pick = i;
                            break;
                        }
                        target -= w;
                    }
                    // Rounding can land on an already-chosen point.
                    if nearest[pick] == 0.0 {
                        pick = (0..n).rev().find(|&i| nearest[i] > 0.0).unwrap_or(pick);
                    }
                    pick
                } else {
                    // All remaining points duplicate a centroid.
                    let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                    free[rng.gen_range(0..free.len())]
                };
                chosen.push(next);
                for (i, w) in nearest.iter_mut().enumerate() {
                    *w = w.min(sq_dist(x.row(i), x.row(next)));
                }
            }
            chosen
        }
    };
    chosen.iter().flat_map(|&i| x.row(i).to_vec()).collect()
}

fn nearest_centroid(point: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    centroids
        .chunks_exact(d)
        .map(|c| sq_dist(point, c))
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, dist)| {
            if dist < best.1 {
                (j, dist)
            } else {
                best
            }
        })
}

/// Lloyd iterations from a seeded initialisation.
pub fn fit(x: &DataMatrix, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let (n, d, k) = (x.n(), x.d(), cfg.k);
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "k = {k} must lie in [1, {n}]"
        )));
    }
    if cfg.max_iterations == 0 || cfg.tolerance.is_nan() || cfg.tolerance < 0.0 {
        return Err(Error::InvalidInput(
            "max_iterations must be >= 1 and tolerance >= 0".into(),
        ));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut centroids = init_centroids(x, k, cfg.init, &mut rng);
    let mut assign = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        for i in 0..n {
            let (j, dist) = nearest_centroid(x.row(i), &centroids, d);
            assign[i] = j;
            dists[i] = dist;
        }
        objective.push(dists.iter().sum());

        let mut sums = vec![0.0; k * d];
        let mut sizes = vec![0usize; k];
        for i in 0..n {
            sizes[assign[i]] += 1;
            for (s, v) in sums[assign[i] * d..(assign[i] + 1) * d].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        let mut taken = vec![false; n];
        for j in 0..k {
            let new: Vec<f64> = if sizes[j] == 0 {
                // Reseed from the point farthest from its own centroid.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                dists[far] = 0.0;
                x.row(far).to_vec()
            } else {
                sums[j * d..(j + 1) * d]
                    .iter()
                    .map(|s| s / sizes[j] as f64)
                    .collect()
            };
            shift = shift.max(sq_dist(&new, &centroids[j * d..(j + 1) * d]).sqrt());
            centroids[j * d..(j + 1) * d].copy_from_slice(&new);
        }
        if shift <= cfg.tolerance {
            break;
        }
    }
    for (i, a) in assign.iter_mut().enumerate() {
        *a = nearest_centroid(x.row(i), &centroids, d).0;
    }
    Ok(KMeansFit {
        partition: Partition::new(assign)?,
        centroids,
        iterations,
        objective,
    })
}

pub fn kmeans(x: &DataMatrix, cfg: &KMeansConfig) -> Result<Partition> {
    fit(x, cfg).map(|f| f.partition)
}

/// One KMeans run per `(k, repeat)` with split seeds, degenerate runs dropped.
pub fn generate_pool(
    x: &DataMatrix,
    k_range: std::ops::RangeInclusive<usize>,
    repeats: usize,
    seed: u64,
) -> Result<Ensemble> {
    if k_range.is_empty() || repeats == 0 {
        return Err(Error::InvalidInput("empty pool configuration".into()));
    }
    let runs: Vec<(usize, usize)> = k_range
        .flat_map(|k| (0..repeats).map(move |r| (k, r)))
        .collect();
    let partitions = runs
        .par_iter()
        .map(|&(k, r)| {
            let run_seed = stream_rng(seed, ((k as u64) << 32) | r as u64).next_u64();
            kmeans(x, &KMeansConfig::new(k, run_seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<Partition> = partitions.into_iter().filter(|p| !p.is_degenerate()).collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("every pool member is degenerate".into()));
    }
    Ensemble::new(kept)
}
