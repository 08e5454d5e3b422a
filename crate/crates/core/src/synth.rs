//! Label-space synthetic ensembles with controlled accuracy.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, stream)`.
//! Model `t` always uses stream `t + 1`, so each model is reproducible on its
//! own and generation can run in parallel.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Ensemble, Partition};

/// Conservation rates of the two hubs.
pub const HUB_A_RATE: f64 = 0.2;
pub const HUB_B_RATE: f64 = 0.9;
/// Range of per-model conservation rates relative to a hub.
pub const HUB_MODEL_RATES: (f64, f64) = (0.2, 0.9);
/// Lower bound of per-model conservation rates in the uniform scenario.
pub const MIN_RATE: f64 = 0.1;

const HUB_A_STREAM: u64 = 1 << 62;
const HUB_B_STREAM: u64 = (1 << 62) + 1;

/// Child generator for one independent stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Keep each label with probability `rho`; otherwise move it uniformly to one
/// of the other `k − 1` labels in `0..k`.
pub fn perturb_labels<R: Rng + ?Sized>(
    labels: &[usize],
    k: usize,
    rho: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInput(
            "perturbation needs at least 2 clusters".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rate {rho} outside [0, 1]")));
    }
    Ok(labels
        .iter()
        .map(|&l| {
            if rng.gen_bool(rho) {
                l
            } else {
                let r = rng.gen_range(0..k - 1);
                if r >= l {
                    r + 1
                } else {
                    r
                }
            }
        })
        .collect())
}

pub fn perturb<R: Rng + ?Sized>(gt: &Partition, rho: f64, rng: &mut R) -> Result<Partition> {
    Partition::new(perturb_labels(gt.labels(), gt.k(), rho, rng)?)
}

/// Balanced ground truth: observation `i` belongs to cluster `i mod k`.
pub fn balanced_truth(n: usize, k: usize) -> Result<Partition> {
    if k < 2 || n < k {
        return Err(Error::InvalidInput(format!(
            "need n >= k >= 2, got n = {n}, k = {k}"
        )));
    }
    Partition::new((0..n).map(|i| i % k).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformScenarioConfig {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub rho_max: f64,
    pub seed: u64,
}

impl UniformScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.n < self.k {
            return Err(Error::InvalidInput("need n >= k >= 2".into()));
        }
        if self.t < 1 {
            return Err(Error::InvalidInput("need at least one model".into()));
        }
        if !(self.rho_max > MIN_RATE && self.rho_max <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "rho_max must lie in (0.1, 1], got {}",
                self.rho_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubScenarioConfig {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl HubScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.n < self.k {
            return Err(Error::InvalidInput("need n >= k >= 2".into()));
        }
        if self.t < 2 {
            return Err(Error::InvalidInput("need at least two models".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Number of models derived from hub A, `⌊αT⌋`.
    pub fn hub_a_models(&self) -> usize {
        (self.alpha * self.t as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HubSource {
    #[serde(rename = "hub-a")]
    HubA,
    #[serde(rename = "hub-b")]
    HubB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubInfo {
    pub hub_a: Partition,
    pub hub_b: Partition,
    /// Hub each model was derived from, in ensemble order.
    pub sources: Vec<HubSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutput {
    pub ground_truth: Partition,
    pub ensemble: Ensemble,
    /// Conservation rate each model was generated with.
    pub rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hubs: Option<HubInfo>,
}

/// Models with conservation rates drawn uniformly from `[0.1, rho_max]`.
pub fn scenario_uniform(cfg: &UniformScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let gt = balanced_truth(cfg.n, cfg.k)?;
    let models: Vec<(f64, Partition)> = (0..cfg.t)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(cfg.seed, t as u64 + 1);
            let rho = rng.gen_range(MIN_RATE..=cfg.rho_max);
            Ok((rho, perturb(&gt, rho, &mut rng)?))
        })
        .collect::<Result<_>>()?;
    let (rates, partitions): (Vec<f64>, Vec<Partition>) = models.into_iter().unzip();
    Ok(ScenarioOutput {
        ground_truth: gt,
        ensemble: Ensemble::new(partitions)?,
        rates,
        hubs: None,
    })
}

/// Models concentrated around a poor hub (fraction `alpha`) and an accurate
/// hub (the rest). Hub A keeps 20% of the truth, hub B 90%.
pub fn scenario_hub(cfg: &HubScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let gt = balanced_truth(cfg.n, cfg.k)?;
    // Hubs stay in the truth's label space so perturbing them uses all k labels.
    let hub_a = perturb_labels(
        gt.labels(),
        cfg.k,
        HUB_A_RATE,
        &mut stream_rng(cfg.seed, HUB_A_STREAM),
    )?;
    let hub_b = perturb_labels(
        gt.labels(),
        cfg.k,
        HUB_B_RATE,
        &mut stream_rng(cfg.seed, HUB_B_STREAM),
    )?;
    let from_a = cfg.hub_a_models();
    let models: Vec<(f64, HubSource, Partition)> = (0..cfg.t)
        .into_par_iter()
        .map(|t| {
            let (source, hub) = if t < from_a {
                (HubSource::HubA, &hub_a)
            } else {
                (HubSource::HubB, &hub_b)
            };
            let mut rng = stream_rng(cfg.seed, t as u64 + 1);
            let rho = rng.gen_range(HUB_MODEL_RATES.0..=HUB_MODEL_RATES.1);
            let labels = perturb_labels(hub, cfg.k, rho, &mut rng)?;
            Ok((rho, source, Partition::new(labels)?))
        })
        .collect::<Result<_>>()?;
    let mut rates = Vec::with_capacity(cfg.t);
    let mut sources = Vec::with_capacity(cfg.t);
    let mut partitions = Vec::with_capacity(cfg.t);
    for (rho, source, p) in models {
        rates.push(rho);
        sources.push(source);
        partitions.push(p);
    }
    Ok(ScenarioOutput {
        ground_truth: gt,
        ensemble: Ensemble::new(partitions)?,
        rates,
        hubs: Some(HubInfo {
            hub_a: Partition::new(hub_a)?,
            hub_b: Partition::new(hub_b)?,
            sources,
        }),
    })
}
