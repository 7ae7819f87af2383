//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts
//! it; run with `--nocapture` to see the lines of passing criteria too.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wallreg_core::dataset::{inner_split, split_dataset, FORCED_TRAIN_MACHS};
use wallreg_core::flow::{generate_doe, reynolds};
use wallreg_core::global::{
    classical_mds, energy_rank, isomap_dim_scan, knn_fit, knn_predict, pod_fit, pod_predict, FieldMlpSpec,
    GlobalModel, GlobalSpec, IsomapSpec, KnnSpec, PodSpec, RbfSpec,
};
use wallreg_core::metrics::{r2_weighted, score_submission, wrmae, MeanMode};
use wallreg_core::numerics::{knn_graph, pairwise_distances};
use wallreg_core::oracle::generate_dataset;
use wallreg_core::pointwise::{
    best_split, gradient_check, tree_fit, tree_predict, Activation, LambdaDnn, Mlp, TreeSpec,
};
use wallreg_core::{DoeSpec, FlowCondition, GasModel, OracleConfig, ScoreReport, Split};

fn verdict(criterion: u32, title: &str, ok: bool, detail: String, elapsed: Duration, limit: Option<Duration>) {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = ok && in_time;
    let budget = limit.map(|l| format!(" / limit {l:.0?}")).unwrap_or_default();
    println!(
        "{} criterion {criterion:>2} {title}: {detail} ({elapsed:.2?}{budget})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
    assert!(in_time, "criterion {criterion} exceeded its time limit: {elapsed:.2?}");
}

fn wallreg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wallreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = wallreg(args);
    assert!(
        out.status.success(),
        "wallreg {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn criterion_01_reynolds_anchor() {
    let start = Instant::now();
    let gas = GasModel::air();
    let re: Vec<f64> = [1e5, 2e5, 4e5]
        .iter()
        .map(|&p| reynolds(&FlowCondition::new(0.85, 0.0, p), &gas).unwrap())
        .collect();
    let targets = [2.5e6, 5e6, 10e6];
    let worst_rel = re
        .iter()
        .zip(targets)
        .map(|(r, t)| (r - t).abs() / t)
        .fold(0.0, f64::max);
    let ratio_err = ((re[1] / re[0] - 2.0).abs()).max((re[2] / re[0] - 4.0).abs()) / 4.0;
    verdict(
        1,
        "Reynolds anchor",
        worst_rel <= 1e-3 && ratio_err <= 1e-12,
        format!(
            "Re = {:.6e} / {:.6e} / {:.6e}, max rel err {worst_rel:.2e}, ratio err {ratio_err:.1e}",
            re[0], re[1], re[2]
        ),
        start.elapsed(),
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_02_split_protocol() {
    let start = Instant::now();
    let conds = generate_doe(&DoeSpec::default()).unwrap();
    let split = split_dataset(&conds, 0).unwrap();
    let n_train = split.values().filter(|s| **s == Split::Train).count();
    let n_test = split.len() - n_train;

    let mut groups: BTreeMap<(u64, u64), Vec<&FlowCondition>> = BTreeMap::new();
    for c in &conds {
        groups.entry((c.mach.to_bits(), c.p_i.to_bits())).or_default().push(c);
    }
    let group_ok = groups.values().all(|g| {
        let t = g.iter().filter(|c| split[&c.id] == Split::Test).count();
        g.len() == 12 && t == 4
    });

    let mut violations = 0;
    for seed in 0..100 {
        let split = split_dataset(&conds, seed).unwrap();
        for g in groups.values() {
            if !FORCED_TRAIN_MACHS.iter().any(|m| (g[0].mach - m).abs() < 1e-12) {
                continue;
            }
            let lo = g.iter().min_by(|a, b| a.aoa_deg.total_cmp(&b.aoa_deg)).unwrap();
            let hi = g.iter().max_by(|a, b| a.aoa_deg.total_cmp(&b.aoa_deg)).unwrap();
            violations += [lo, hi].iter().filter(|c| split[&c.id] != Split::Train).count();
        }
    }
    verdict(
        2,
        "split protocol",
        n_train == 312 && n_test == 156 && group_ok && violations == 0,
        format!(
            "{n_train}/{n_test}, {} groups of 8/4: {group_ok}, forced-extreme violations over 100 seeds: {violations}",
            groups.len()
        ),
        start.elapsed(),
        Some(Duration::from_secs(1)),
    );
}

fn copy_truth_submission(data: &Path, sub: &Path) {
    fs::create_dir_all(sub.join("fields")).unwrap();
    fs::copy(data.join("FORMAT"), sub.join("FORMAT")).unwrap();
    let table = fs::read_to_string(data.join("conditions.csv")).unwrap();
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[4] == "test" {
            let name = format!("{}.csv", cols[0]);
            fs::copy(data.join("fields").join(&name), sub.join("fields").join(&name)).unwrap();
        }
    }
}

#[test]
fn criterion_03_metric_hand_values() {
    let start = Instant::now();
    let truth: [&[f64]; 2] = [&[1.0, 2.0], &[3.0, 4.0]];
    let pred: [&[f64]; 2] = [&[1.0, 2.0], &[2.0, 4.0]];
    let r2 = r2_weighted(&truth, &pred, &[1.0, 0.5], MeanMode::Unweighted).unwrap();
    let r2_err = (r2 - 13.0 / 15.0).abs();

    let truth: [&[f64]; 3] = [&[1.0, -1.0], &[2.0, 2.0], &[5.0, 7.0]];
    let pred: [&[f64]; 3] = [&[1.1, -0.9], &[1.0, 2.0], &[0.0, 0.0]];
    let (w, argmax, _) = wrmae(&truth, &pred, &[1.0, 1.0, 0.5]).unwrap();
    let wr_err = (w - 0.25).abs();

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[oracle]\nn_p = 40\n").unwrap();
    run_ok(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    let sub = dir.path().join("sub");
    copy_truth_submission(&data, &sub);
    let scores = dir.path().join("scores");
    run_ok(&["evaluate", "--dataset", s(&data), "--submission", s(&sub), "--out", s(&scores)]);
    let report = ScoreReport::from_json(&fs::read_to_string(scores.join("scores.json")).unwrap()).unwrap();
    let perfect = report.variables.iter().all(|v| v.r2 == 1.0 && v.wrmae == 0.0);

    verdict(
        3,
        "metric hand values",
        r2_err <= 1e-12 && wr_err <= 1e-12 && argmax == 1 && perfect,
        format!(
            "R2 = {r2:.15} (err {r2_err:.1e}), wrMAE = {w} argmax flow {argmax}, copied truth via CLI: R2 {} wrMAE {}",
            report.mean_r2, report.mean_wrmae
        ),
        start.elapsed(),
        Some(Duration::from_secs(5)),
    );
}

#[test]
fn criterion_04_pod_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_tr = rng.random_range(5..=30);
        let n_p = rng.random_range(20..=200);
        let params = DMatrix::from_fn(n_tr, 3, |_, j| {
            match j {
                0 => rng.random_range(0.3..0.96),
                1 => rng.random_range(-15.0..15.0),
                _ => rng.random_range(1e5..4e5),
            }
        });
        let snaps: Vec<DMatrix<f64>> = (0..n_tr)
            .map(|_| DMatrix::from_fn(n_p, 4, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let spec = PodSpec {
            energy_threshold: 1.0,
            rbf: RbfSpec { reg: 0.0, ..RbfSpec::default() },
        };
        let m = pod_fit(&spec, &params, &snaps).unwrap();
        for (i, snap) in snaps.iter().enumerate() {
            let p = [params[(i, 0)], params[(i, 1)], params[(i, 2)]];
            worst = worst.max((pod_predict(&m, &p) - snap).norm() / snap.norm());
        }
    }
    let r = energy_rank(&[10.0, 5.0, 1.0, 0.5], 0.99).unwrap();
    verdict(
        4,
        "POD identity",
        worst <= 1e-6 && r == 4,
        format!("worst relative reproduction error {worst:.2e} over 10 datasets, energy rank {r}"),
        start.elapsed(),
        Some(Duration::from_secs(10)),
    );
}

#[test]
fn criterion_05_isomap_mds() {
    let start = Instant::now();
    let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 3.0, 1.0, 0.0, 2.0, 3.0, 2.0, 0.0]);
    let emb = classical_mds(&d, 1).unwrap();
    let hand = (&d - pairwise_distances(&emb.coords)).norm();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
    let connected = knn_graph(&points, 10).unwrap().component_count() == 1;
    let dist = pairwise_distances(&points);
    let emb = classical_mds(&dist, 3).unwrap();
    let r3 = (&dist - pairwise_distances(&emb.coords)).norm();
    let scan = isomap_dim_scan(&dist, &emb, 1..=6);
    let monotone = scan.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);

    verdict(
        5,
        "IsoMap/MDS",
        hand <= 1e-9 && connected && r3 <= 1e-8 && monotone,
        format!(
            "collinear residual {hand:.1e}, k=10 graph connected {connected}, r=3 residual {r3:.1e}, scan {:?}",
            scan.iter().map(|(r, v)| format!("{r}:{v:.2e}")).collect::<Vec<_>>()
        ),
        start.elapsed(),
        Some(Duration::from_secs(10)),
    );
}

#[test]
fn criterion_06_gradient_checks() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = DMatrix::from_fn(16, 9, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(16, 4, |_, _| rng.random_range(-1.0..1.0));
        let mlp = Mlp::init(9, &[12, 10], 4, Activation::Tanh, 0.01, seed);
        let dnn = LambdaDnn::init(&[8, 6], &[5], &[7], 4, Activation::Tanh, 0.01, seed).unwrap();
        worst = worst.max(gradient_check(&mlp, &x, &y, 1e-3, 1e-6));
        worst = worst.max(gradient_check(&dnn, &x, &y, 1e-3, 1e-6));
    }
    verdict(
        6,
        "neural gradient checks",
        worst <= 1e-5,
        format!("max relative error {worst:.2e} (MLP and lambda-DNN, 3 seeds)"),
        start.elapsed(),
        Some(Duration::from_secs(30)),
    );
}

/// Exhaustive search over midpoints between distinct sorted values.
fn brute_force_root(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mut xs: Vec<f64> = x.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let sse = |vals: &[f64]| {
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let mut best: Option<(f64, f64)> = None;
    for w in xs.windows(2) {
        let mut t = 0.5 * (w[0] + w[1]);
        if t >= w[1] {
            t = w[0];
        }
        let left: Vec<f64> = x.iter().zip(y).filter(|(a, _)| **a <= t).map(|(_, b)| *b).collect();
        let right: Vec<f64> = x.iter().zip(y).filter(|(a, _)| **a > t).map(|(_, b)| *b).collect();
        let total = sse(&left) + sse(&right);
        if best.is_none_or(|(_, b)| total < b) {
            best = Some((t, total));
        }
    }
    best
}

#[test]
fn criterion_07_tree_oracle() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..40);
        // Coarse grid so that repeated feature values occur.
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64 * 0.4).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let xm = DMatrix::from_column_slice(n, 1, &x);
        let ym = DMatrix::from_column_slice(n, 1, &y);
        let rows: Vec<usize> = (0..n).collect();
        let got = best_split(&xm, &ym, &rows, 1).map(|c| c.threshold);
        let want = brute_force_root(&x, &y).map(|(t, _)| t);
        if got != want {
            mismatches.push((seed, got, want));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let x = DMatrix::from_fn(300, 9, |_, _| rng.random_range(-1.0..1.0));
    let y = DMatrix::from_fn(300, 4, |_, _| rng.random_range(-1.0..1.0));
    let tree = tree_fit(&TreeSpec::default(), &x, &y).unwrap();
    let pred = tree_predict(&tree, &x).unwrap();
    let mean = y.mean();
    let r2 = 1.0 - (&y - &pred).norm_squared() / y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();

    verdict(
        7,
        "tree oracle",
        mismatches.is_empty() && r2 == 1.0,
        format!("root split mismatches {}/200 {:?}, memorization R2 {r2}", mismatches.len(), mismatches.first()),
        start.elapsed(),
        Some(Duration::from_secs(30)),
    );
}

#[test]
fn criterion_08_synthetic_benchmark() {
    let start = Instant::now();
    let ds = generate_dataset(&DoeSpec::default(), &OracleConfig::default(), &GasModel::air(), 0).unwrap();
    let (fit_ids, val_ids) = inner_split(&ds.train_ids(), 0.75, 0).unwrap();
    let specs = [
        ("knn", GlobalSpec::Knn(KnnSpec::default()), 0.90),
        ("pod_rbf", GlobalSpec::PodRbf(PodSpec::default()), 0.90),
        ("isomap_rbf", GlobalSpec::IsomapRbf(IsomapSpec::default()), 0.90),
        ("mlp_global", GlobalSpec::MlpGlobal(FieldMlpSpec::default()), 0.80),
    ];
    let test = ds.test_ids();
    let conds: Vec<&FlowCondition> = test.iter().map(|id| ds.condition(id).unwrap()).collect();
    let results: Vec<(&str, f64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|(name, spec, threshold)| {
                let (ds, fit_ids, val_ids, conds) = (&ds, &fit_ids, &val_ids, &conds);
                scope.spawn(move || {
                    let model = GlobalModel::fit(spec, ds, fit_ids, val_ids).unwrap();
                    let pred = model.predict_fields(conds).unwrap();
                    let report = score_submission(ds, &pred, MeanMode::Unweighted).unwrap();
                    (*name, report.mean_r2, *threshold)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let ok = results.iter().all(|(_, r2, t)| r2 >= t);
    verdict(
        8,
        "synthetic benchmark",
        ok,
        results
            .iter()
            .map(|(n, r2, t)| format!("{n} R2 {r2:.4} (>= {t})"))
            .collect::<Vec<_>>()
            .join(", "),
        start.elapsed(),
        Some(Duration::from_secs(15 * 60)),
    );
}

#[test]
fn criterion_09_knn_reproduction() {
    let start = Instant::now();
    let cfg = OracleConfig { n_p: 200, ..OracleConfig::default() };
    let ds = generate_dataset(&DoeSpec::default(), &cfg, &GasModel::air(), 0).unwrap();
    let ids = ds.train_ids();
    let (x, y) = ds.assemble_global(&ids).unwrap();
    let model = knn_fit(&KnnSpec::default(), &x, y.clone()).unwrap();
    let mismatched = (0..ids.len())
        .filter(|&i| {
            let got = knn_predict(&model, &[x[(i, 0)], x[(i, 1)], x[(i, 2)]]);
            got.iter().zip(y[i].iter()).any(|(a, b)| a.to_bits() != b.to_bits())
        })
        .count();
    verdict(
        9,
        "kNN reproduction",
        mismatched == 0,
        format!("{mismatched} of {} training conditions differ bitwise", ids.len()),
        start.elapsed(),
        Some(Duration::from_secs(1)),
    );
}

fn pipeline(root: &Path, cfg: &Path) -> Vec<PathBuf> {
    let data = root.join("data");
    run_ok(&["generate", "--config", s(cfg), "--out", s(&data)]);
    for name in ["knn", "pod_rbf", "isomap_rbf", "mlp_global", "mlp_pointwise", "lambda_dnn", "tree"] {
        let out = root.join(name);
        let common = ["--config", s(cfg), "--dataset", s(&data), "--out", s(&out)];
        run_ok(&[&["train", "--regressor", name][..], &common].concat());
        run_ok(&[&["predict"][..], &common].concat());
        run_ok(&[&["evaluate"][..], &common].concat());
    }
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_10_reproducibility() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 3\n\
         [oracle]\nn_p = 60\n\
         [models.mlp_global]\nhidden_sizes = [8]\ntrain = { epochs = 20, activation = \"tanh\" }\n\
         [models.mlp_pointwise]\nhidden_sizes = [8]\ntrain = { epochs = 2, batch_fraction = 0.05 }\n\
         [models.lambda_dnn]\ngeo_branch = [4]\ncond_branch = [4]\ntrunk = [4]\ntrain = { epochs = 2, batch_fraction = 0.05 }\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    fs::create_dir(&a).unwrap();
    fs::create_dir(&b).unwrap();
    let files_a = pipeline(&a, &cfg);
    let files_b = pipeline(&b, &cfg);
    let differing: Vec<&PathBuf> = files_a
        .iter()
        .filter(|f| fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap())
        .collect();
    let kinds = ["manifest.json", "model.json", "scores.json"]
        .iter()
        .all(|k| files_a.iter().any(|f| f.ends_with(k)));
    verdict(
        10,
        "reproducibility",
        files_a == files_b && differing.is_empty() && kinds,
        format!("{} files compared across two runs, {} differ", files_a.len(), differing.len()),
        start.elapsed(),
        None,
    );
}
