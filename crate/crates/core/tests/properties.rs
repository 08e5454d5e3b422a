mod common;

use common::*;
use discotec::agreement::ari;
use discotec::evaluation::{
    kendall_tau_b, pearson, regret, run_protocol, ConstraintExperiment, Dataset, Method, MethodScores,
    ProtocolConfig,
};
use discotec::indices::{chi, dbi, silhouette, wgss, DataMatrix};
use discotec::synth::{
    balanced_truth, perturb_labels, scenario_hub, scenario_uniform, stream_rng, HubScenarioConfig,
    HubSource, UniformScenarioConfig,
};
use discotec::{rank_ensemble, ConstraintSet, DistanceKind, Ensemble, Orientation};
use rand::Rng;

fn rotate(points: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let d = points[0].len();
    let shift: Vec<f64> = (0..d).map(|_| r.gen_range(-50.0..50.0)).collect();
    let mut out = points.to_vec();
    // Compose random plane rotations.
    for _ in 0..2 * d {
        if d < 2 {
            break;
        }
        let a = r.gen_range(0..d);
        let b = (a + r.gen_range(1..d)) % d;
        let (s, c) = r.gen_range(0.0..std::f64::consts::TAU).sin_cos();
        for p in &mut out {
            let (x, y) = (p[a], p[b]);
            p[a] = c * x - s * y;
            p[b] = s * x + c * y;
        }
    }
    if d == 1 && r.gen_bool(0.5) {
        out.iter_mut().for_each(|p| p[0] = -p[0]);
    }
    for p in &mut out {
        for (v, s) in p.iter_mut().zip(&shift) {
            *v += s;
        }
    }
    out
}

#[test]
fn indices_are_invariant_under_rigid_motions() {
    let mut r = rng(21);
    for seed in 0..200 {
        let n = r.gen_range(4..=60);
        let d = r.gen_range(1..=5);
        let pts = random_points(&mut r, n, d);
        let labels = random_labels(&mut r, n, 5);
        let p = part(&labels);
        let x = DataMatrix::from_rows(&pts).unwrap();
        let y = DataMatrix::from_rows(&rotate(&pts, seed)).unwrap();
        assert!(close(wgss(&x, &p).unwrap(), wgss(&y, &p).unwrap(), 1e-9));
        for f in [chi, silhouette, dbi] {
            match (f(&x, &p), f(&y, &p)) {
                (Ok(a), Ok(b)) => assert!(close(a, b, 1e-9), "{a} vs {b}"),
                (a, b) => assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }
}

#[test]
fn internal_indices_match_references_on_wider_data() {
    let mut r = rng(5);
    for _ in 0..200 {
        let n = r.gen_range(3..=60);
        let d = r.gen_range(1..=5);
        let pts = random_points(&mut r, n, d);
        let labels = random_labels(&mut r, n, 7);
        let p = part(&labels);
        let x = DataMatrix::from_rows(&pts).unwrap();
        assert!(close(wgss(&x, &p).unwrap(), naive_wgss(&pts, &labels), 1e-9));
        for (got, want) in [
            (chi(&x, &p).ok(), naive_chi(&pts, &labels)),
            (silhouette(&x, &p).ok(), naive_silhouette(&pts, &labels)),
            (dbi(&x, &p).ok(), naive_dbi(&pts, &labels)),
        ] {
            match (got, want) {
                (Some(a), Some(b)) => assert!(close(a, b, 1e-9), "{a} vs {b}"),
                (a, b) => assert_eq!(a, b),
            }
        }
    }
}

#[test]
fn best_split_never_raises_wgss() {
    let mut r = rng(8);
    for _ in 0..100 {
        let n = r.gen_range(3..=10);
        let pts = random_points(&mut r, n, 2);
        let labels = random_labels(&mut r, n, 3);
        let x = DataMatrix::from_rows(&pts).unwrap();
        let p = part(&labels);
        let before = wgss(&x, &p).unwrap();
        let fresh = p.k();
        for cluster in 0..p.k() {
            let members: Vec<usize> = (0..n).filter(|&i| p.labels()[i] == cluster).collect();
            if members.len() < 2 {
                continue;
            }
            // Every bipartition with the first member on the kept side.
            let mut best = f64::INFINITY;
            for mask in 1..(1u32 << (members.len() - 1)) {
                let mut split = p.labels().to_vec();
                for (b, &i) in members[1..].iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        split[i] = fresh;
                    }
                }
                best = best.min(wgss(&x, &part(&split)).unwrap());
            }
            assert!(best <= before + 1e-9, "{best} > {before}");
        }
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            out[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    out
}

#[test]
fn model_accuracy_follows_conservation_rate() {
    let cfg = UniformScenarioConfig { n: 2000, k: 10, t: 50, rho_max: 0.9, seed: 4 };
    let out = scenario_uniform(&cfg).unwrap();
    let aris: Vec<f64> = out
        .ensemble
        .partitions()
        .iter()
        .map(|p| ari(p, &out.ground_truth).unwrap())
        .collect();
    let spearman = pearson(&ranks(&out.rates), &ranks(&aris)).unwrap();
    assert!(spearman > 0.95, "spearman {spearman}");
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    pmf[0] = (1.0 - p).powi(n as i32);
    for x in 1..=n {
        pmf[x as usize] = pmf[x as usize - 1] * (n - x + 1) as f64 / x as f64 * p / (1.0 - p);
    }
    pmf
}

#[test]
fn conserved_fraction_is_binomial() {
    let (n, k, rho, draws) = (50usize, 10usize, 0.3, 4000);
    let truth = balanced_truth(n, k).unwrap();
    let mut r = stream_rng(77, 0);
    // Bins: <=10, 11..=19 individually, >=20.
    let bin = |x: usize| x.clamp(10, 20) - 10;
    let mut observed = [0f64; 11];
    for _ in 0..draws {
        let labels = perturb_labels(truth.labels(), k, rho, &mut r).unwrap();
        let kept = labels.iter().zip(truth.labels()).filter(|(a, b)| a == b).count();
        observed[bin(kept)] += 1.0;
    }
    let mut expected = [0f64; 11];
    for (x, p) in binomial_pmf(n as u64, rho).into_iter().enumerate() {
        expected[bin(x)] += p * draws as f64;
    }
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    // Upper 1% point of chi-square with 10 degrees of freedom.
    assert!(stat < 23.209, "chi-square {stat}, observed {observed:?}");
}

#[test]
fn scenarios_are_deterministic() {
    let u = UniformScenarioConfig { n: 120, k: 4, t: 12, rho_max: 0.7, seed: 5 };
    assert_eq!(scenario_uniform(&u).unwrap(), scenario_uniform(&u).unwrap());
    let h = HubScenarioConfig { n: 120, k: 4, t: 12, alpha: 0.25, seed: 5 };
    let out = scenario_hub(&h).unwrap();
    assert_eq!(out, scenario_hub(&h).unwrap());
    let sources = out.hubs.unwrap().sources;
    assert_eq!(sources.iter().filter(|&&s| s == HubSource::HubA).count(), 3);
}

#[test]
fn orientation_and_negation_compose_to_identity() {
    let mut r = rng(2);
    for _ in 0..50 {
        let scores: Vec<f64> = (0..20).map(|_| r.gen_range(0.0..1.0)).collect();
        let target: Vec<f64> = (0..20).map(|_| r.gen_range(-1.0..1.0)).collect();
        let min = MethodScores {
            method: "x".into(),
            scores: scores.clone(),
            orientation: Orientation::Minimise,
        };
        let max = MethodScores {
            method: "x".into(),
            scores: scores.iter().map(|v| -v).collect(),
            orientation: Orientation::Maximise,
        };
        assert_eq!(
            kendall_tau_b(&min.oriented(), &target).unwrap(),
            kendall_tau_b(&max.oriented(), &target).unwrap()
        );
        assert_eq!(
            pearson(&min.oriented(), &target).unwrap(),
            pearson(&max.oriented(), &target).unwrap()
        );
    }
}

#[test]
fn regret_is_translation_invariant_per_dataset() {
    let mut r = rng(6);
    let values: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..6).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut shifted = values.clone();
    for row in &mut shifted {
        row[2] += 3.5;
    }
    for o in [Orientation::Minimise, Orientation::Maximise] {
        let a = regret(&values, o).unwrap();
        let b = regret(&shifted, o).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

fn datasets(count: u64) -> Vec<Dataset> {
    (0..count)
        .map(|seed| {
            let out = scenario_uniform(&UniformScenarioConfig {
                n: 80,
                k: 4,
                t: 10,
                rho_max: 0.8,
                seed,
            })
            .unwrap();
            Dataset {
                name: format!("d{seed}"),
                group: Some(if seed % 2 == 0 { "even" } else { "odd" }.into()),
                ensemble: out.ensemble,
                targets: out.ground_truth,
                data: None,
                constraints: None,
            }
        })
        .collect()
}

#[test]
fn protocol_is_deterministic_across_thread_counts() {
    let ds = datasets(6);
    let mut cfg = ProtocolConfig::new(vec![
        Method::Discotec(DistanceKind::Binary),
        Method::Discotec(DistanceKind::Kl),
        Method::Aari,
    ]);
    cfg.constraint_experiment = Some(ConstraintExperiment {
        observations: vec![0, 5],
        repeats: 3,
        seed: 1,
    });
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_protocol(&ds, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.groups.len(), 2);
    assert_eq!(one.constraint_curve.as_ref().unwrap().len(), 6);
}

#[test]
fn adding_constraints_is_monotone_on_random_ensembles() {
    let mut r = rng(31);
    for _ in 0..100 {
        let n = r.gen_range(4..=20);
        let e = Ensemble::from_labels(random_ensemble(&mut r, n, 5)).unwrap();
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        if a == b || (a.min(b), a.max(b)) == (0, 1) {
            continue;
        }
        let base = ConstraintSet::new([(0, 1)], []).unwrap();
        let with_ml = ConstraintSet::new([(0, 1), (a, b)], []).unwrap();
        let before = rank_ensemble(&e, DistanceKind::Binary, Some(&base)).unwrap();
        let after = rank_ensemble(&e, DistanceKind::Binary, Some(&with_ml)).unwrap();
        for (t, p) in e.partitions().iter().enumerate() {
            let violated = p.labels()[a] != p.labels()[b];
            let old_rate = before.regularisation[t];
            let new_rate = after.regularisation[t];
            if violated {
                assert!(new_rate >= old_rate);
            } else {
                assert!(new_rate <= old_rate);
            }
        }
    }
}
