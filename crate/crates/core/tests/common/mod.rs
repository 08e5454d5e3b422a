//! Naive reference implementations and random instance generators shared by
//! the integration targets.

#![allow(dead_code)]

use std::collections::HashMap;

use discotec::agreement::{aari, anmi, ari, nmi};
use discotec::evaluation::kendall_tau_b;
use discotec::indices::{chi, dbi, silhouette, wgss, DataMatrix};
use discotec::{
    binary_discotec_score, discotec_score, ConsensusMatrix, DistanceKind, Ensemble, Partition,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize, max_k: usize) -> Vec<usize> {
    let k = rng.gen_range(1..=max_k.min(n).max(1));
    (0..n).map(|_| rng.gen_range(0..k) * 7 + 3).collect()
}

pub fn random_ensemble<R: Rng>(rng: &mut R, n: usize, t: usize) -> Vec<Vec<usize>> {
    (0..t).map(|_| random_labels(rng, n, 6)).collect()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect()
}

/// Relative closeness with a tiny absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    let diff = (a - b).abs();
    diff <= rel * a.abs().max(b.abs()) || diff <= 1e-12
}

// Consensus and scores.

pub fn naive_counts(models: &[Vec<usize>]) -> Vec<Vec<u64>> {
    let n = models[0].len();
    let mut c = vec![vec![0u64; n]; n];
    for m in models {
        for i in 0..n {
            for j in 0..n {
                if m[i] == m[j] {
                    c[i][j] += 1;
                }
            }
        }
    }
    c
}

pub fn naive_pair_distance(kind: DistanceKind, a: bool, c: f64) -> f64 {
    let c = if a { c } else { 1.0 - c };
    if c == 1.0 {
        return 0.0;
    }
    match kind {
        DistanceKind::Kl => -c.ln(),
        DistanceKind::Tv => 1.0 - c,
        DistanceKind::H2 => 1.0 - c.sqrt(),
        DistanceKind::Binary => unreachable!(),
    }
}

pub fn naive_score(model: &[usize], models: &[Vec<usize>], kind: DistanceKind) -> f64 {
    let n = model.len();
    let t = models.len() as f64;
    let counts = naive_counts(models);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = model[i] == model[j];
            total += naive_pair_distance(kind, a, counts[i][j] as f64 / t);
        }
    }
    total / (n * n) as f64
}

/// Binarised consensus with the mean taken over all `n²` entries, ties to 1.
pub fn naive_binarised(models: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = models[0].len();
    let counts = naive_counts(models);
    let sum: u64 = counts.iter().flatten().sum();
    // count / T >= sum / (T n²) compared without division.
    counts
        .iter()
        .map(|row| row.iter().map(|&c| c * (n * n) as u64 >= sum).collect())
        .collect()
}

pub fn naive_binary_score(model: &[usize], models: &[Vec<usize>]) -> f64 {
    let n = model.len();
    let q = naive_binarised(models);
    let mut mismatches = 0u64;
    for i in 0..n {
        for j in 0..n {
            if (model[i] == model[j]) != q[i][j] {
                mismatches += 1;
            }
        }
    }
    mismatches as f64 / (n * n) as f64
}

// External agreement.

/// Pair-counting ARI over all unordered pairs.
pub fn naive_ari(p: &[usize], q: &[usize]) -> f64 {
    let n = p.len();
    let (mut both, mut in_p, mut in_q) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sp = p[i] == p[j];
            let sq = q[i] == q[j];
            both += (sp && sq) as u8 as f64;
            in_p += sp as u8 as f64;
            in_q += sq as u8 as f64;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let expected = in_p * in_q / pairs;
    let max = (in_p + in_q) / 2.0;
    if max == expected {
        let same = (0..n).all(|i| (0..n).all(|j| (p[i] == p[j]) == (q[i] == q[j])));
        return if same { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .map(|c| c as f64 / n)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

pub fn naive_nmi(p: &[usize], q: &[usize]) -> f64 {
    let n = p.len() as f64;
    let mut cp: HashMap<usize, usize> = HashMap::new();
    let mut cq: HashMap<usize, usize> = HashMap::new();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in p.iter().zip(q) {
        *cp.entry(a).or_default() += 1;
        *cq.entry(b).or_default() += 1;
        *joint.entry((a, b)).or_default() += 1;
    }
    let hp = entropy(cp.values().copied(), n);
    let hq = entropy(cq.values().copied(), n);
    if hp == 0.0 && hq == 0.0 {
        return 1.0;
    }
    if hp == 0.0 || hq == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (&(a, b), &c) in &joint {
        let pab = c as f64 / n;
        let pa = cp[&a] as f64 / n;
        let pb = cq[&b] as f64 / n;
        mi += pab * (pab / (pa * pb)).ln();
    }
    mi / (hp * hq).sqrt()
}

pub fn naive_average(models: &[Vec<usize>], t: usize, f: fn(&[usize], &[usize]) -> f64) -> f64 {
    let others: Vec<f64> = (0..models.len())
        .filter(|&s| s != t)
        .map(|s| f(&models[t], &models[s]))
        .collect();
    others.iter().sum::<f64>() / others.len() as f64
}

// Rank correlation.

/// Tau-b by direct enumeration of all pairs. `None` when either side is constant.
pub fn naive_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                tx += 1;
                ty += 1;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let denom = (((pairs - tx) * (pairs - ty)) as f64).sqrt();
    if denom == 0.0 {
        None
    } else {
        Some((conc - disc) as f64 / denom)
    }
}

// Internal indices.

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut map: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    let mut g: Vec<Vec<usize>> = map.into_values().collect();
    g.sort();
    g
}

fn mean_of(x: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let d = x[0].len();
    (0..d)
        .map(|c| members.iter().map(|&i| x[i][c]).sum::<f64>() / members.len() as f64)
        .collect()
}

pub fn naive_wgss(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    groups(labels)
        .iter()
        .map(|g| {
            let m = mean_of(x, g);
            g.iter().map(|&i| dist(&x[i], &m).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Variance ratio via total scatter minus within scatter.
pub fn naive_chi(x: &[Vec<f64>], labels: &[usize]) -> Option<f64> {
    let n = x.len();
    let k = groups(labels).len();
    if k < 2 || k >= n {
        return None;
    }
    let all: Vec<usize> = (0..n).collect();
    let m = mean_of(x, &all);
    let total: f64 = x.iter().map(|r| dist(r, &m).powi(2)).sum();
    let within = naive_wgss(x, labels);
    if within == 0.0 {
        return Some(f64::INFINITY);
    }
    Some((total - within) / (k - 1) as f64 / (within / (n - k) as f64))
}

pub fn naive_silhouette(x: &[Vec<f64>], labels: &[usize]) -> Option<f64> {
    let n = x.len();
    let gs = groups(labels);
    if gs.len() < 2 || gs.len() >= n {
        return None;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = gs.iter().find(|g| g.contains(&i)).unwrap();
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| dist(&x[i], &x[j])).sum::<f64>()
            / (own.len() - 1) as f64;
        let b = gs
            .iter()
            .filter(|g| !g.contains(&i))
            .map(|g| g.iter().map(|&j| dist(&x[i], &x[j])).sum::<f64>() / g.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / n as f64)
}

pub fn naive_dbi(x: &[Vec<f64>], labels: &[usize]) -> Option<f64> {
    let gs = groups(labels);
    if gs.len() < 2 {
        return None;
    }
    let centres: Vec<Vec<f64>> = gs.iter().map(|g| mean_of(x, g)).collect();
    let spreads: Vec<f64> = gs
        .iter()
        .zip(&centres)
        .map(|(g, c)| g.iter().map(|&i| dist(&x[i], c)).sum::<f64>() / g.len() as f64)
        .collect();
    let k = gs.len();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in 0..k {
            if a != b {
                let sep = dist(&centres[a], &centres[b]);
                let r = if sep == 0.0 {
                    f64::INFINITY
                } else {
                    (spreads[a] + spreads[b]) / sep
                };
                worst = worst.max(r);
            }
        }
        total += worst;
    }
    Some(total / k as f64)
}

// Instance sweep.

/// Outcome of comparing the library against the references on random instances.
#[derive(Debug, Default)]
pub struct Sweep {
    pub instances: usize,
    pub comparisons: usize,
    pub max_rel_error: f64,
    pub failures: Vec<String>,
}

impl Sweep {
    fn check(&mut self, what: &str, got: f64, want: f64, rel: f64) {
        self.comparisons += 1;
        if got.is_finite() && want.is_finite() && got != want {
            let e = (got - want).abs() / got.abs().max(want.abs());
            self.max_rel_error = self.max_rel_error.max(e);
        }
        if !close(got, want, rel) && self.failures.len() < 20 {
            self.failures.push(format!("{what}: library {got}, reference {want}"));
        }
    }

    fn check_exact(&mut self, what: &str, got: f64, want: f64) {
        self.comparisons += 1;
        if got != want && self.failures.len() < 20 {
            self.failures.push(format!("{what}: library {got}, reference {want}"));
        }
    }

    fn check_opt(&mut self, what: &str, got: Option<f64>, want: Option<f64>, rel: f64) {
        match (got, want) {
            (Some(g), Some(w)) => self.check(what, g, w, rel),
            (None, None) => self.comparisons += 1,
            _ => {
                self.comparisons += 1;
                self.failures.push(format!("{what}: library {got:?}, reference {want:?}"));
            }
        }
    }
}

/// Compare every score, metric and index against the references on
/// `instances` random ensembles with `n ≤ 40`, `T ≤ 12`.
pub fn oracle_sweep(instances: usize, seed: u64, rel: f64) -> Sweep {
    let mut r = rng(seed);
    let mut sweep = Sweep::default();
    for inst in 0..instances {
        let n = r.gen_range(2..=40);
        let t = r.gen_range(2..=12);
        let models = random_ensemble(&mut r, n, t);
        let e = Ensemble::from_labels(&models).unwrap();
        let c = ConsensusMatrix::build(&e).unwrap();
        let q = c.binarise();
        let counts = naive_counts(&models);
        let tag = |what: &str, m: usize| format!("instance {inst} (n={n}, T={t}) model {m} {what}");

        for i in 0..n {
            for j in 0..n {
                if c.count(i, j) as u64 != counts[i][j] {
                    sweep.failures.push(tag("consensus count", 0));
                }
            }
        }
        for (m, labels) in models.iter().enumerate() {
            let a = e.partitions()[m].connectivity();
            for kind in [DistanceKind::Kl, DistanceKind::Tv, DistanceKind::H2] {
                let got = discotec_score(&a, &c, kind).unwrap();
                sweep.check(&tag(kind.name(), m), got, naive_score(labels, &models, kind), rel);
            }
            let got = binary_discotec_score(&a, &q).unwrap();
            sweep.check_exact(&tag("binary", m), got, naive_binary_score(labels, &models));
            sweep.check(&tag("aari", m), aari(&e, m).unwrap(), naive_average(&models, m, naive_ari), rel);
            sweep.check(&tag("anmi", m), anmi(&e, m).unwrap(), naive_average(&models, m, naive_nmi), rel);
        }

        let (p0, p1) = (&e.partitions()[0], &e.partitions()[1]);
        sweep.check(&tag("ari", 1), ari(p0, p1).unwrap(), naive_ari(&models[0], &models[1]), rel);
        sweep.check(&tag("nmi", 1), nmi(p0, p1).unwrap(), naive_nmi(&models[0], &models[1]), rel);

        // Tau-b on tied and untied vectors.
        let len = r.gen_range(2..=40);
        let levels = r.gen_range(1..=8);
        let x: Vec<f64> = (0..len).map(|_| r.gen_range(0..levels) as f64).collect();
        let y: Vec<f64> = (0..len).map(|_| r.gen::<f64>()).collect();
        for (u, v) in [(&x, &y), (&x, &x), (&y, &x)] {
            sweep.check_opt(&tag("tau-b", 0), kendall_tau_b(u, v).ok(), naive_tau_b(u, v), rel);
        }

        // Internal indices on points, sometimes with duplicated coordinates.
        let d = r.gen_range(1..=5);
        let mut pts = random_points(&mut r, n, d);
        if inst % 5 == 0 {
            for i in 1..n {
                if r.gen_bool(0.3) {
                    pts[i] = pts[i - 1].clone();
                }
            }
        }
        let x = DataMatrix::from_rows(&pts).unwrap();
        let labels = &models[inst % t];
        let p = &e.partitions()[inst % t];
        sweep.check(&tag("wgss", 0), wgss(&x, p).unwrap(), naive_wgss(&pts, labels), rel);
        sweep.check_opt(&tag("chi", 0), chi(&x, p).ok(), naive_chi(&pts, labels), rel);
        sweep.check_opt(&tag("silhouette", 0), silhouette(&x, p).ok(), naive_silhouette(&pts, labels), rel);
        sweep.check_opt(&tag("dbi", 0), dbi(&x, p).ok(), naive_dbi(&pts, labels), rel);

        sweep.instances += 1;
    }
    sweep
}

/// Partition helper for tests that build models by hand.
pub fn part(labels: &[usize]) -> Partition {
    Partition::new(labels.to_vec()).unwrap()
}
