//! Correlation-based evaluation of ranking methods against external ARI.
//!
//! For every dataset, each method scores every model of the pool; scores are
//! oriented so that larger is better and correlated (Kendall tau-b and
//! Pearson) with each model's ARI against the targets. Per-method averages,
//! standard deviations and regrets are then aggregated across datasets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreement::{ari, Agreement, PairwiseAgreement};
use crate::error::{Error, Result};
use crate::indices::{chi, dbi, silhouette, wgss, DataMatrix};
use crate::partition::{Ensemble, Partition};
use crate::scoring::{
    constraint_penalties, ConsensusScorer, ConstraintSet, DistanceKind, Orientation, ScoreReport,
};
use crate::synth::stream_rng;

/// Kendall rank correlation with tie correction (tau-b), in `O(n log n)`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation("fewer than 2 observations"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::UndefinedCorrelation("NaN in input"));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = (n * (n - 1) / 2) as i64;
    let mut tied_x = 0i64;
    let mut tied_xy = 0i64;
    let (mut run_x, mut run_xy) = (1i64, 1i64);
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            run_x += 1;
            if w[0].1 == w[1].1 {
                run_xy += 1;
            } else {
                tied_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            tied_x += run_x * (run_x - 1) / 2;
            tied_xy += run_xy * (run_xy - 1) / 2;
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += run_x * (run_x - 1) / 2;
    tied_xy += run_xy * (run_xy - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = ys.clone();
    let swaps = merge_count(&mut ys, &mut buf) as i64;

    let mut tied_y = 0i64;
    let mut run_y = 1i64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += run_y * (run_y - 1) / 2;
            run_y = 1;
        }
    }
    tied_y += run_y * (run_y - 1) / 2;

    if tied_x == total || tied_y == total {
        return Err(Error::UndefinedCorrelation("all values tied"));
    }
    let numerator = (total - tied_x - tied_y + tied_xy - 2 * swaps) as f64;
    let denom = (((total - tied_x) as f64) * ((total - tied_y) as f64)).sqrt();
    Ok((numerator / denom).clamp(-1.0, 1.0))
}

/// Stable merge sort of `v` returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(left, bl) + merge_count(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation("fewer than 2 observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite input"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean gap to the best method per dataset. `values[m][d]` is method `m` on
/// dataset `d`.
pub fn regret(values: &[Vec<f64>], orientation: Orientation) -> Result<Vec<f64>> {
    let cells: Vec<Vec<Option<f64>>> = values
        .iter()
        .map(|row| row.iter().map(|&v| Some(v)).collect())
        .collect();
    if values.is_empty() || values[0].is_empty() {
        return Err(Error::InvalidInput("empty regret matrix".into()));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("regret needs finite values".into()));
    }
    regret_with_missing(&cells, orientation)?
        .into_iter()
        .map(|r| r.ok_or_else(|| Error::InvalidInput("empty regret row".into())))
        .collect()
}

/// Regret where some cells may be missing. Each dataset's best is taken over
/// the methods present; a method's regret averages the datasets it has.
pub fn regret_with_missing(
    values: &[Vec<Option<f64>>],
    orientation: Orientation,
) -> Result<Vec<Option<f64>>> {
    let datasets = values.first().map_or(0, Vec::len);
    if values.is_empty() || datasets == 0 {
        return Err(Error::InvalidInput("empty regret matrix".into()));
    }
    if let Some(row) = values.iter().find(|r| r.len() != datasets) {
        return Err(Error::DimensionMismatch {
            expected: datasets,
            found: row.len(),
        });
    }
    let best: Vec<Option<f64>> = (0..datasets)
        .map(|d| {
            values
                .iter()
                .filter_map(|row| row[d].filter(|v| v.is_finite()))
                .map(|v| orientation.orient(v))
                .max_by(f64::total_cmp)
        })
        .collect();
    Ok(values
        .iter()
        .map(|row| {
            let gaps: Vec<f64> = row
                .iter()
                .zip(&best)
                .filter_map(|(v, b)| match (v, b) {
                    (Some(v), Some(b)) if v.is_finite() => Some(b - orientation.orient(*v)),
                    _ => None,
                })
                .collect();
            (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
        })
        .collect())
}

/// A model-ranking method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Discotec(DistanceKind),
    Aari,
    Anmi,
    Wgss,
    Chi,
    Silhouette,
    Dbi,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Discotec(DistanceKind::Kl),
        Method::Discotec(DistanceKind::Tv),
        Method::Discotec(DistanceKind::H2),
        Method::Discotec(DistanceKind::Binary),
        Method::Aari,
        Method::Anmi,
        Method::Wgss,
        Method::Chi,
        Method::Silhouette,
        Method::Dbi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Discotec(k) => k.name(),
            Method::Aari => "aari",
            Method::Anmi => "anmi",
            Method::Wgss => "wgss",
            Method::Chi => "chi",
            Method::Silhouette => "silhouette",
            Method::Dbi => "dbi",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Method::Discotec(_) | Method::Wgss | Method::Dbi => Orientation::Minimise,
            Method::Aari | Method::Anmi | Method::Chi | Method::Silhouette => {
                Orientation::Maximise
            }
        }
    }

    /// Ensemble methods accept the constraint penalty; distance-based indices
    /// do not.
    pub fn accepts_constraints(self) -> bool {
        matches!(self, Method::Discotec(_) | Method::Aari | Method::Anmi)
    }

    pub fn needs_data(self) -> bool {
        matches!(
            self,
            Method::Wgss | Method::Chi | Method::Silhouette | Method::Dbi
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One method's raw per-model scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub scores: Vec<f64>,
    pub orientation: Orientation,
}

impl MethodScores {
    /// Scores mapped so that larger is better.
    pub fn oriented(&self) -> Vec<f64> {
        self.scores.iter().map(|&v| self.orientation.orient(v)).collect()
    }
}

/// Raw (unconstrained) scores of every model under `method`.
///
/// Internal indices that are undefined for a model (for instance a
/// single-cluster model under the silhouette) score as the worst possible
/// value and are reported in the returned warnings.
pub fn raw_scores(
    method: Method,
    ensemble: &Ensemble,
    data: Option<&DataMatrix>,
) -> Result<(Vec<f64>, Vec<String>)> {
    let mut warnings = Vec::new();
    let scores = match method {
        Method::Discotec(kind) => ConsensusScorer::new(ensemble)?.scores(ensemble, kind)?,
        Method::Aari => PairwiseAgreement::compute(ensemble, Agreement::Ari)?.averages()?,
        Method::Anmi => PairwiseAgreement::compute(ensemble, Agreement::Nmi)?.averages()?,
        Method::Wgss | Method::Chi | Method::Silhouette | Method::Dbi => {
            let x = data.ok_or_else(|| {
                Error::InvalidInput(format!("method `{method}` needs a data matrix"))
            })?;
            let index = match method {
                Method::Wgss => wgss,
                Method::Chi => chi,
                Method::Silhouette => silhouette,
                _ => dbi,
            };
            let worst = -method.orientation().orient(f64::INFINITY);
            let results: Vec<Result<f64>> =
                ensemble.partitions().par_iter().map(|p| index(x, p)).collect();
            let mut scores = Vec::with_capacity(results.len());
            for (t, r) in results.into_iter().enumerate() {
                match r {
                    Ok(v) => scores.push(v),
                    Err(Error::UndefinedIndex { .. }) => {
                        warnings.push(format!("model {t}: {method} undefined, scored as worst"));
                        scores.push(worst);
                    }
                    Err(e) => return Err(e),
                }
            }
            scores
        }
    };
    Ok((scores, warnings))
}

/// Score and rank every model of `ensemble` with `method`.
pub fn score_method(
    method: Method,
    ensemble: &Ensemble,
    data: Option<&DataMatrix>,
    constraints: Option<&ConstraintSet>,
) -> Result<ScoreReport> {
    let (scores, warnings) = raw_scores(method, ensemble, data)?;
    let reg = match constraints {
        Some(cs) if !cs.is_empty() && method.accepts_constraints() => {
            Some(constraint_penalties(ensemble, cs)?)
        }
        _ => None,
    };
    let mut report = ScoreReport::new(method.name(), method.orientation(), scores, reg);
    report.warnings = warnings;
    if ensemble.len() < 3 && matches!(method, Method::Discotec(_)) {
        report.warnings.push(format!(
            "ensemble has {} models; a consensus needs at least 3",
            ensemble.len()
        ));
    }
    Ok(report)
}

/// One benchmark dataset: a pool of models plus its targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub group: Option<String>,
    pub ensemble: Ensemble,
    pub targets: Partition,
    pub data: Option<DataMatrix>,
    pub constraints: Option<ConstraintSet>,
}

/// Constraints sampled from the targets of `m` random observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintExperiment {
    pub observations: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub methods: Vec<Method>,
    pub filter_degenerate: bool,
    pub constraint_experiment: Option<ConstraintExperiment>,
}

impl ProtocolConfig {
    pub fn new(methods: Vec<Method>) -> Self {
        ProtocolConfig {
            methods,
            filter_degenerate: true,
            constraint_experiment: None,
        }
    }
}

/// Mean and population standard deviation over the present values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

impl Stat {
    pub fn of<I: IntoIterator<Item = Option<f64>>>(values: I) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return Stat {
                mean: None,
                std: None,
                count: 0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Stat {
            mean: Some(mean),
            std: Some(var.sqrt()),
            count: v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCell {
    pub method: Method,
    pub kendall: Option<f64>,
    pub pearson: Option<f64>,
    /// ARI of the rank-1 model.
    pub selected_ari: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub group: Option<String>,
    /// Models kept after degenerate filtering.
    pub models: usize,
    pub best_ari: Option<f64>,
    pub cells: Vec<MethodCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub kendall: Stat,
    pub pearson: Stat,
    pub regret_kendall: Option<f64>,
    pub regret_pearson: Option<f64>,
    pub regret_ari: Option<f64>,
    /// Datasets where the correlation could not be computed.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPoint {
    pub observations: usize,
    pub method: Method,
    pub kendall: Stat,
    pub pearson: Stat,
    /// Mean Kendall tau per dataset over the repeats.
    pub per_dataset: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub methods: Vec<Method>,
    pub datasets: Vec<DatasetResult>,
    pub summary: Vec<MethodSummary>,
    pub groups: Vec<GroupSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_curve: Option<Vec<ConstraintPoint>>,
}

impl ProtocolResult {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Datasets where every method failed.
    pub fn failed_datasets(&self) -> usize {
        self.datasets
            .iter()
            .filter(|d| d.cells.iter().all(|c| c.kendall.is_none() && c.pearson.is_none()))
            .count()
    }
}

/// Filtered pool and per-model target ARI.
struct Prepared {
    ensemble: Ensemble,
    target_ari: Vec<f64>,
}

fn prepare(dataset: &Dataset, filter: bool) -> Result<Prepared> {
    if dataset.targets.len() != dataset.ensemble.n() {
        return Err(Error::DimensionMismatch {
            expected: dataset.ensemble.n(),
            found: dataset.targets.len(),
        });
    }
    if let Some(x) = &dataset.data {
        if x.n() != dataset.ensemble.n() {
            return Err(Error::DimensionMismatch {
                expected: dataset.ensemble.n(),
                found: x.n(),
            });
        }
    }
    let ensemble = if filter {
        dataset.ensemble.without_degenerate()?.0
    } else {
        dataset.ensemble.clone()
    };
    if ensemble.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{} models left after filtering; at least 3 are required",
            ensemble.len()
        )));
    }
    let target_ari = ensemble
        .partitions()
        .iter()
        .map(|p| ari(p, &dataset.targets))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        ensemble,
        target_ari,
    })
}

fn correlate(report: &ScoreReport, target_ari: &[f64], cell: &mut MethodCell) {
    let oriented: Vec<f64> = report
        .totals
        .iter()
        .map(|&v| report.orientation.orient(v))
        .collect();
    match kendall_tau_b(&oriented, target_ari) {
        Ok(v) => cell.kendall = Some(v),
        Err(e) => cell.errors.push(format!("kendall: {e}")),
    }
    match pearson(&oriented, target_ari) {
        Ok(v) => cell.pearson = Some(v),
        Err(e) => cell.errors.push(format!("pearson: {e}")),
    }
    cell.selected_ari = report.best().map(|t| target_ari[t]);
}

fn evaluate_dataset(dataset: &Dataset, cfg: &ProtocolConfig) -> DatasetResult {
    let empty_cells = || {
        cfg.methods
            .iter()
            .map(|&method| MethodCell {
                method,
                kendall: None,
                pearson: None,
                selected_ari: None,
                errors: Vec::new(),
            })
            .collect::<Vec<_>>()
    };
    let prepared = match prepare(dataset, cfg.filter_degenerate) {
        Ok(p) => p,
        Err(e) => {
            return DatasetResult {
                name: dataset.name.clone(),
                group: dataset.group.clone(),
                models: 0,
                best_ari: None,
                cells: empty_cells(),
                error: Some(e.to_string()),
            }
        }
    };
    let constraints = dataset.constraints.as_ref().filter(|cs| !cs.is_empty());
    let mut cells = empty_cells();
    for cell in &mut cells {
        match score_method(
            cell.method,
            &prepared.ensemble,
            dataset.data.as_ref(),
            constraints,
        ) {
            Ok(report) => {
                cell.errors.extend(report.warnings.iter().cloned());
                correlate(&report, &prepared.target_ari, cell);
            }
            Err(e) => cell.errors.push(e.to_string()),
        }
    }
    DatasetResult {
        name: dataset.name.clone(),
        group: dataset.group.clone(),
        models: prepared.ensemble.len(),
        best_ari: prepared.target_ari.iter().copied().max_by(f64::total_cmp),
        cells,
        error: None,
    }
}

fn summarise(methods: &[Method], datasets: &[&DatasetResult]) -> Vec<MethodSummary> {
    let column = |m: usize, f: fn(&MethodCell) -> Option<f64>| -> Vec<Option<f64>> {
        datasets.iter().map(|d| f(&d.cells[m])).collect()
    };
    let matrix = |f: fn(&MethodCell) -> Option<f64>| -> Vec<Vec<Option<f64>>> {
        (0..methods.len()).map(|m| column(m, f)).collect()
    };
    let regrets = |f: fn(&MethodCell) -> Option<f64>| -> Vec<Option<f64>> {
        regret_with_missing(&matrix(f), Orientation::Maximise)
            .unwrap_or_else(|_| vec![None; methods.len()])
    };
    let rk = regrets(|c| c.kendall);
    let rp = regrets(|c| c.pearson);
    let ra = regrets(|c| c.selected_ari);
    methods
        .iter()
        .enumerate()
        .map(|(m, &method)| MethodSummary {
            method,
            kendall: Stat::of(column(m, |c| c.kendall)),
            pearson: Stat::of(column(m, |c| c.pearson)),
            regret_kendall: rk[m],
            regret_pearson: rp[m],
            regret_ari: ra[m],
            missing: datasets.iter().filter(|d| d.cells[m].kendall.is_none()).count(),
        })
        .collect()
}

/// Targets-implied constraints among `observations`.
pub fn constraints_from_targets(targets: &Partition, observations: &[usize]) -> Result<ConstraintSet> {
    let labels = targets.labels();
    let mut ml = Vec::new();
    let mut cl = Vec::new();
    for (a, &i) in observations.iter().enumerate() {
        for &j in &observations[a + 1..] {
            if labels[i] == labels[j] {
                ml.push((i, j));
            } else {
                cl.push((i, j));
            }
        }
    }
    ConstraintSet::new(ml, cl)
}

fn constraint_curve(
    datasets: &[Dataset],
    cfg: &ProtocolConfig,
    exp: &ConstraintExperiment,
) -> Vec<ConstraintPoint> {
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| m.accepts_constraints())
        .collect();
    // per dataset -> per method -> per m -> per repeat (kendall, pearson)
    type Cell = (Option<f64>, Option<f64>);
    let per_dataset: Vec<Option<Vec<Vec<Vec<Cell>>>>> = datasets
        .par_iter()
        .enumerate()
        .map(|(d, dataset)| {
            let prepared = prepare(dataset, cfg.filter_degenerate).ok()?;
            let n = prepared.ensemble.n();
            let raw: Vec<Option<Vec<f64>>> = methods
                .iter()
                .map(|&m| raw_scores(m, &prepared.ensemble, None).ok().map(|r| r.0))
                .collect();
            let samples: Vec<Vec<Option<ConstraintSet>>> = exp
                .observations
                .iter()
                .enumerate()
                .map(|(mi, &m)| {
                    (0..exp.repeats)
                        .map(|r| {
                            let mut rng = stream_rng(
                                exp.seed.wrapping_add(d as u64),
                                ((mi as u64) << 32) | r as u64,
                            );
                            let chosen = sample(&mut rng, n, m.min(n)).into_vec();
                            constraints_from_targets(&dataset.targets, &chosen)
                                .ok()
                                .filter(|cs| !cs.is_empty())
                        })
                        .collect()
                })
                .collect();
            Some(
                methods
                    .iter()
                    .zip(&raw)
                    .map(|(&method, scores)| {
                        samples
                            .iter()
                            .map(|reps| {
                                reps.iter()
                                    .map(|cs| {
                                        let Some(scores) = scores else {
                                            return (None, None);
                                        };
                                        let reg = cs.as_ref().and_then(|cs| {
                                            constraint_penalties(&prepared.ensemble, cs).ok()
                                        });
                                        let report = ScoreReport::new(
                                            method.name(),
                                            method.orientation(),
                                            scores.clone(),
                                            reg,
                                        );
                                        let mut cell = MethodCell {
                                            method,
                                            kendall: None,
                                            pearson: None,
                                            selected_ari: None,
                                            errors: Vec::new(),
                                        };
                                        correlate(&report, &prepared.target_ari, &mut cell);
                                        (cell.kendall, cell.pearson)
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect(),
            )
        })
        .collect();

    let mut points = Vec::new();
    for (mi, &m) in exp.observations.iter().enumerate() {
        for (k, &method) in methods.iter().enumerate() {
            let cells: Vec<&Cell> = per_dataset
                .iter()
                .flatten()
                .flat_map(|d| d[k][mi].iter())
                .collect();
            points.push(ConstraintPoint {
                observations: m,
                method,
                kendall: Stat::of(cells.iter().map(|c| c.0)),
                pearson: Stat::of(cells.iter().map(|c| c.1)),
                per_dataset: per_dataset
                    .iter()
                    .map(|d| d.as_ref().and_then(|d| Stat::of(d[k][mi].iter().map(|c| c.0)).mean))
                    .collect(),
            });
        }
    }
    points
}

/// Evaluate every method on every dataset and aggregate.
pub fn run_protocol(datasets: &[Dataset], cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidInput("no methods to evaluate".into()));
    }
    if datasets.is_empty() {
        return Err(Error::InvalidInput("no datasets to evaluate".into()));
    }
    let results: Vec<DatasetResult> = datasets
        .par_iter()
        .map(|d| evaluate_dataset(d, cfg))
        .collect();

    let all: Vec<&DatasetResult> = results.iter().collect();
    let summary = summarise(&cfg.methods, &all);

    let mut by_group: BTreeMap<&str, Vec<&DatasetResult>> = BTreeMap::new();
    for r in &results {
        if let Some(g) = &r.group {
            by_group.entry(g.as_str()).or_default().push(r);
        }
    }
    let groups = by_group
        .into_iter()
        .map(|(g, rs)| GroupSummary {
            group: g.to_string(),
            methods: summarise(&cfg.methods, &rs),
        })
        .collect();

    let constraint_curve = cfg
        .constraint_experiment
        .as_ref()
        .map(|exp| constraint_curve(datasets, cfg, exp));

    Ok(ProtocolResult {
        methods: cfg.methods.clone(),
        datasets: results,
        summary,
        groups,
        constraint_curve,
    })
}
