//! Consensus-distance scores for ranking the members of an ensemble.
//!
//! Every score is normalised by `n²` and summed over ordered pairs, so the
//! binarised and total-variation variants are mismatch ratios in `[0, 1]` and
//! compose directly with the constraint-violation rate.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{BinarisedConsensus, ConsensusMatrix};
use crate::error::{Error, Result};
use crate::partition::{ConnectivityMatrix, Ensemble};

/// Distance between a connectivity entry and a consensus entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    /// Bernoulli KL divergence (natural log).
    Kl,
    /// Total variation.
    Tv,
    /// Squared Hellinger.
    H2,
    /// Mismatch ratio against the mean-binarised consensus.
    Binary,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 4] = [
        DistanceKind::Kl,
        DistanceKind::Tv,
        DistanceKind::H2,
        DistanceKind::Binary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Kl => "kl",
            DistanceKind::Tv => "tv",
            DistanceKind::H2 => "h2",
            DistanceKind::Binary => "binary",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(DistanceKind::Kl),
            "tv" => Ok(DistanceKind::Tv),
            "h2" => Ok(DistanceKind::H2),
            "binary" => Ok(DistanceKind::Binary),
            other => Err(Error::InvalidInput(format!("unknown distance `{other}`"))),
        }
    }
}

/// Distance between a Bernoulli with parameter `a ∈ {0, 1}` and one with
/// parameter `c`.
pub fn pair_distance(kind: DistanceKind, a: bool, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidInput(format!("consensus value {c} outside [0, 1]")));
    }
    let a_val = if a { 1.0 } else { 0.0 };
    if c == a_val {
        return Ok(0.0);
    }
    if (a && c == 0.0) || (!a && c == 1.0) {
        return Err(Error::Infeasible { a: a as u8, c });
    }
    // Distance to the nearer endpoint's complement.
    let p = if a { c } else { 1.0 - c };
    Ok(match kind {
        DistanceKind::Kl => -p.ln(),
        DistanceKind::Tv => 1.0 - p,
        DistanceKind::H2 => 1.0 - p.sqrt(),
        DistanceKind::Binary => {
            return Err(Error::InvalidInput(
                "binary scores use the binarised consensus".into(),
            ))
        }
    })
}

/// Normalised distance between a model's connectivity and the consensus.
pub fn discotec_score(
    a: &ConnectivityMatrix,
    c: &ConsensusMatrix,
    kind: DistanceKind,
) -> Result<f64> {
    if a.n() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            found: a.n(),
        });
    }
    let table = DistanceTable::new(kind, c.models())?;
    let score = table.score(a, c);
    if score.is_nan() {
        for i in 0..c.n() {
            for j in i + 1..c.n() {
                pair_distance(kind, a.get(i, j), c.get(i, j))?;
            }
        }
    }
    Ok(score)
}

/// Per-count distance lookup: a consensus entry only takes `T + 1` values.
struct DistanceTable {
    apart: Vec<f64>,
    together: Vec<f64>,
}

impl DistanceTable {
    fn new(kind: DistanceKind, models: u32) -> Result<Self> {
        if kind == DistanceKind::Binary {
            return Err(Error::InvalidInput(
                "binary scores use the binarised consensus".into(),
            ));
        }
        let t = models as f64;
        let entry = |a: bool, count: u32| pair_distance(kind, a, count as f64 / t).unwrap_or(f64::NAN);
        Ok(DistanceTable {
            apart: (0..=models).map(|m| entry(false, m)).collect(),
            together: (0..=models).map(|m| entry(true, m)).collect(),
        })
    }

    fn score(&self, a: &ConnectivityMatrix, c: &ConsensusMatrix) -> f64 {
        let n = c.n();
        let mut upper = 0.0;
        for i in 0..n {
            let mut row_sum = 0.0;
            for (off, &count) in c.upper_row(i).iter().enumerate() {
                let d = if a.get(i, i + 1 + off) {
                    self.together[count as usize]
                } else {
                    self.apart[count as usize]
                };
                row_sum += d;
            }
            upper += row_sum;
        }
        let n2 = (n as f64) * (n as f64);
        2.0 * upper / n2
    }
}

/// Fraction of ordered entries where the connectivity disagrees with the
/// binarised consensus.
pub fn binary_discotec_score(a: &ConnectivityMatrix, q: &BinarisedConsensus) -> Result<f64> {
    if a.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            found: a.n(),
        });
    }
    let n = a.n() as f64;
    Ok(a.bits().hamming(q.bits()) as f64 / (n * n))
}

/// Must-link and cannot-link pairs over 0-based observation indices.
///
/// Pairs are unordered and stored as `(min, max)` without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    must_link: Vec<(usize, usize)>,
    cannot_link: Vec<(usize, usize)>,
}

impl ConstraintSet {
    pub fn new<M, C>(must_link: M, cannot_link: C) -> Result<Self>
    where
        M: IntoIterator<Item = (usize, usize)>,
        C: IntoIterator<Item = (usize, usize)>,
    {
        let norm = |pairs: &mut dyn Iterator<Item = (usize, usize)>| -> Result<BTreeSet<(usize, usize)>> {
            pairs
                .map(|(a, b)| {
                    if a == b {
                        Err(Error::InvalidInput(format!("self-pair ({a}, {b})")))
                    } else {
                        Ok((a.min(b), a.max(b)))
                    }
                })
                .collect()
        };
        let ml = norm(&mut must_link.into_iter())?;
        let cl = norm(&mut cannot_link.into_iter())?;
        if let Some(&(a, b)) = ml.intersection(&cl).next() {
            return Err(Error::InvalidInput(format!(
                "pair ({a}, {b}) is both must-link and cannot-link"
            )));
        }
        Ok(ConstraintSet {
            must_link: ml.into_iter().collect(),
            cannot_link: cl.into_iter().collect(),
        })
    }

    pub fn must_link(&self) -> &[(usize, usize)] {
        &self.must_link
    }

    pub fn cannot_link(&self) -> &[(usize, usize)] {
        &self.cannot_link
    }

    pub fn len(&self) -> usize {
        self.must_link.len() + self.cannot_link.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest referenced index, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.must_link
            .iter()
            .chain(&self.cannot_link)
            .map(|&(_, b)| b)
            .max()
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.max_index() {
            Some(m) if m >= n => Err(Error::InvalidInput(format!(
                "constraint index {m} out of range for {n} observations"
            ))),
            _ => Ok(()),
        }
    }
}

/// Violation rate of a constraint set under one model.
pub fn informativeness(a: &ConnectivityMatrix, cs: &ConstraintSet) -> Result<f64> {
    if cs.is_empty() {
        return Err(Error::InvalidInput("empty constraint set".into()));
    }
    cs.check_bounds(a.n())?;
    let broken_ml = cs.must_link.iter().filter(|&&(i, j)| !a.get(i, j)).count();
    let broken_cl = cs.cannot_link.iter().filter(|&&(i, j)| a.get(i, j)).count();
    Ok((broken_ml + broken_cl) as f64 / cs.len() as f64)
}

/// Whether lower or higher scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Minimise,
    Maximise,
}

impl Orientation {
    /// Map a raw score so that larger is better.
    pub fn orient(self, v: f64) -> f64 {
        match self {
            Orientation::Minimise => -v,
            Orientation::Maximise => v,
        }
    }
}

/// Scores, constraint penalties and the induced best-first ranking for one
/// method over one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method: String,
    pub orientation: Orientation,
    pub scores: Vec<f64>,
    pub regularisation: Vec<f64>,
    pub totals: Vec<f64>,
    /// Model indices, best first. Ties go to the smaller index.
    pub ranking: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ScoreReport {
    /// Combine raw scores with constraint penalties. Penalties are added for
    /// minimised scores and subtracted for maximised ones.
    pub fn new(
        method: impl Into<String>,
        orientation: Orientation,
        scores: Vec<f64>,
        regularisation: Option<Vec<f64>>,
    ) -> Self {
        let regularisation = regularisation.unwrap_or_else(|| vec![0.0; scores.len()]);
        debug_assert_eq!(regularisation.len(), scores.len());
        let totals: Vec<f64> = scores
            .iter()
            .zip(&regularisation)
            .map(|(s, r)| match orientation {
                Orientation::Minimise => s + r,
                Orientation::Maximise => s - r,
            })
            .collect();
        let ranking = rank_best_first(&totals, orientation);
        ScoreReport {
            method: method.into(),
            orientation,
            scores,
            regularisation,
            totals,
            ranking,
            warnings: Vec::new(),
        }
    }

    pub fn best(&self) -> Option<usize> {
        self.ranking.first().copied()
    }
}

/// Model indices sorted best first under `orientation`, ties by index.
pub fn rank_best_first(values: &[f64], orientation: Orientation) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (va, vb) = (orientation.orient(values[a]), orientation.orient(values[b]));
        vb.total_cmp(&va).then(a.cmp(&b))
    });
    idx
}

/// Shared consensus state for scoring members of one ensemble.
pub struct ConsensusScorer {
    consensus: ConsensusMatrix,
    binarised: BinarisedConsensus,
}

impl ConsensusScorer {
    pub fn new(ensemble: &Ensemble) -> Result<Self> {
        let consensus = ConsensusMatrix::build(ensemble)?;
        let binarised = consensus.binarise();
        Ok(ConsensusScorer {
            consensus,
            binarised,
        })
    }

    pub fn consensus(&self) -> &ConsensusMatrix {
        &self.consensus
    }

    pub fn binarised(&self) -> &BinarisedConsensus {
        &self.binarised
    }

    /// Raw scores of every member, in ensemble order.
    pub fn scores(&self, ensemble: &Ensemble, kind: DistanceKind) -> Result<Vec<f64>> {
        if ensemble.n() != self.consensus.n() {
            return Err(Error::DimensionMismatch {
                expected: self.consensus.n(),
                found: ensemble.n(),
            });
        }
        match kind {
            DistanceKind::Binary => ensemble
                .partitions()
                .par_iter()
                .map(|p| binary_discotec_score(&p.connectivity(), &self.binarised))
                .collect(),
            _ => {
                let table = DistanceTable::new(kind, self.consensus.models())?;
                let scores: Vec<f64> = ensemble
                    .partitions()
                    .par_iter()
                    .map(|p| table.score(&p.connectivity(), &self.consensus))
                    .collect();
                // Only a foreign partition can hit an infeasible entry.
                if let Some(t) = scores.iter().position(|s| s.is_nan()) {
                    return discotec_score(
                        &ensemble.partitions()[t].connectivity(),
                        &self.consensus,
                        kind,
                    )
                    .map(|_| scores);
                }
                Ok(scores)
            }
        }
    }
}

/// Violation rate of every member, in ensemble order.
pub fn constraint_penalties(ensemble: &Ensemble, cs: &ConstraintSet) -> Result<Vec<f64>> {
    if cs.is_empty() {
        return Err(Error::InvalidInput("empty constraint set".into()));
    }
    cs.check_bounds(ensemble.n())?;
    Ok(ensemble
        .partitions()
        .iter()
        .map(|p| {
            let l = p.labels();
            let broken_ml = cs.must_link.iter().filter(|&&(i, j)| l[i] != l[j]).count();
            let broken_cl = cs.cannot_link.iter().filter(|&&(i, j)| l[i] == l[j]).count();
            (broken_ml + broken_cl) as f64 / cs.len() as f64
        })
        .collect())
}

/// Score and rank every member of `ensemble`; lower totals rank first.
pub fn rank_ensemble(
    ensemble: &Ensemble,
    kind: DistanceKind,
    constraints: Option<&ConstraintSet>,
) -> Result<ScoreReport> {
    let scorer = ConsensusScorer::new(ensemble)?;
    let scores = scorer.scores(ensemble, kind)?;
    let reg = match constraints {
        Some(cs) if !cs.is_empty() => Some(constraint_penalties(ensemble, cs)?),
        _ => None,
    };
    let mut report = ScoreReport::new(kind.name(), Orientation::Minimise, scores, reg);
    if ensemble.len() < 3 {
        report.warnings.push(format!(
            "ensemble has {} models; a consensus needs at least 3",
            ensemble.len()
        ));
    }
    Ok(report)
}
