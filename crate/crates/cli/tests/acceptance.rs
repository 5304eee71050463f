//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use shapr::dataset::{location_holdout_split, stratified_split, Dataset, Task};
use shapr::eval::{receiver_ablation, run_experiment, ModelKind, ModelParams};
use shapr::gpr::{gram_matrix, log_marginal_likelihood, GprHyperparams, GprModel, MeanPolicy};
use shapr::rng;
use shapr::simulator::{generate_dataset, simulate_sweep, synth_sweep_frames, Occupancy, Scenario};
use shapr::spectrum::{assemble_sweep, band_average_power, BandPlan, IqFrame, DEFAULT_FRAME_BYTES};

type Check = fn() -> Outcome;
type Suite = fn() -> Result<(), String>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn scene_dataset(scenario: Scenario, task: Task, categories: usize, per: usize) -> Dataset {
    let scene = scenario.scene(42).expect("preset scene");
    generate_dataset(&scene, task, categories, per, 42).expect("simulated dataset")
}

fn power_oracle(b: &[u8]) -> f64 {
    10.0 * (b.iter().map(|&v| (f64::from(v) / 127.5 - 1.0).powi(2)).sum::<f64>() / (b.len() as f64 / 2.0)).log10()
}

fn band_power_oracle() -> Outcome {
    let mut r = rng::stream(1, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let bytes: Vec<u8> = (0..DEFAULT_FRAME_BYTES).map(|_| r.random()).collect();
        let expected = power_oracle(&bytes);
        let frame = IqFrame::new(0, 300_000_000, 2_400_000, bytes).unwrap();
        let got = band_average_power(&frame).unwrap();
        worst = worst.max(((got - expected) / expected).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("1000 random frames, max relative error {worst:.1e}"),
    )
}

fn feature_dimension() -> Outcome {
    let plan = BandPlan::default();
    let d = scene_dataset(Scenario::LivingRoom, Task::Authentication, 7, 2);
    let n = d.feature_len();
    outcome(
        plan.band_count() == 101 && d.sensor_ids().len() == 5 && n == 505,
        format!(
            "{} bands x {} sensors = {n} features",
            plan.band_count(),
            d.sensor_ids().len()
        ),
    )
}

/// Gauss-Jordan inverse with partial pivoting; also returns ln|det|.
fn dense_inverse(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let pivot = m[c][c];
        log_det += pivot.abs().ln();
        for v in &mut m[c] {
            *v /= pivot;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot_row = m[c].clone();
                    for (v, p) in m[r].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), log_det)
}

fn se(a: &[f64], b: &[f64], sigma: f64, l: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sigma * sigma * (-d2 / (2.0 * l * l)).exp()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn gpr_oracle() -> Outcome {
    let mut r = rng::stream(3, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(2..=20);
        let d = r.random_range(1..=10);
        let m = r.random_range(1..=2);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let y = DMatrix::from_fn(n, m, |_, _| r.random_range(-2.0..2.0));
        let sigma = r.random_range(0.5..2.0);
        let l = r.random_range(0.3..2.0);
        let jitter = r.random_range(1e-3..1e-1);
        let hp = GprHyperparams::new(sigma, l, jitter).unwrap();
        let k: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| se(&x[i], &x[j], sigma, l) + if i == j { jitter } else { 0.0 })
                    .collect()
            })
            .collect();
        let (inv, log_det) = dense_inverse(&k);

        let mut lml = 0.0;
        for c in 0..m {
            let quad: f64 = (0..n)
                .map(|i| (0..n).map(|j| y[(i, c)] * inv[i][j] * y[(j, c)]).sum::<f64>())
                .sum();
            lml += -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln();
        }
        let got = log_marginal_likelihood(&x, &y, &hp).unwrap();
        worst = worst.max((got - lml).abs() / lml.abs().max(1.0));

        for policy in [MeanPolicy::Zero, MeanPolicy::TrainingMean] {
            let model = GprModel::fit(&x, &y, hp, policy).unwrap();
            let q: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            let pred = model.predict_mean(&q).unwrap();
            for c in 0..m {
                let mean = match policy {
                    MeanPolicy::Zero => 0.0,
                    MeanPolicy::TrainingMean => (0..n).map(|i| y[(i, c)]).sum::<f64>() / n as f64,
                };
                let ks: Vec<f64> = x.iter().map(|xi| se(&q, xi, sigma, l)).collect();
                let expected = mean
                    + (0..n)
                        .map(|i| ks[i] * (0..n).map(|j| inv[i][j] * (y[(j, c)] - mean)).sum::<f64>())
                        .sum::<f64>();
                worst = worst.max((pred[c] - expected).abs() / expected.abs().max(1.0));
            }
        }
    }
    outcome(
        worst <= 1e-8,
        format!("50 problems, max deviation from dense inverse {worst:.1e}"),
    )
}

fn gpr_hand_case() -> Outcome {
    let x = vec![vec![0.0], vec![1.0]];
    let y = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let hp = GprHyperparams::new(1.0, 1.0, 0.0).unwrap();
    let model = GprModel::fit(&x, &y, hp, MeanPolicy::Zero).unwrap();
    let got = model.predict_mean(&[0.5]).unwrap()[0];
    outcome((got - 0.549319).abs() <= 1e-5, format!("prediction at 0.5 = {got:.7}"))
}

fn accuracy_of(d: &Dataset, kind: ModelKind) -> f64 {
    let split = stratified_split(d, 0.7, 42).unwrap();
    run_experiment(d, &split, kind, &ModelParams::default(), 42)
        .unwrap()
        .accuracy()
        .unwrap()
}

fn authentication() -> Outcome {
    let d = scene_dataset(Scenario::LivingRoom, Task::Authentication, 7, 20);
    let acc = accuracy_of(&d, ModelKind::Rfr);
    outcome(
        d.len() == 140 && acc >= 0.95,
        format!("{} samples, random forest accuracy {acc:.3}", d.len()),
    )
}

fn vehicle() -> Outcome {
    let d = scene_dataset(Scenario::Vehicle, Task::GridLocalization, 4, 20);
    let rf = accuracy_of(&d, ModelKind::Rfr);
    let knn = accuracy_of(&d, ModelKind::Knn);
    outcome(
        rf >= 0.95 && knn >= 0.95,
        format!("random forest {rf:.3}, k-NN {knn:.3}"),
    )
}

fn activity() -> Outcome {
    let d = scene_dataset(Scenario::Laboratory, Task::Activity, 8, 100);
    let acc = accuracy_of(&d, ModelKind::Rfr);
    outcome(
        d.len() == 800 && acc >= 0.95,
        format!("{} samples, random forest accuracy {acc:.3}", d.len()),
    )
}

fn classroom() -> Outcome {
    let d = scene_dataset(Scenario::Classroom, Task::CoordLocalization, 20, 20);
    let mut errors = Vec::new();
    for seed in 0..5 {
        let split = location_holdout_split(&d, 3, seed).unwrap();
        let r = run_experiment(&d, &split, ModelKind::Gpr, &ModelParams::default(), seed).unwrap();
        errors.push(r.mean_error_m().unwrap());
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let per: Vec<String> = errors.iter().map(|e| format!("{e:.3}")).collect();
    outcome(
        mean <= 0.9,
        format!(
            "mean error {mean:.3} m over holdout seeds 0..5 (per seed [{}])",
            per.join(", ")
        ),
    )
}

fn ablation() -> Outcome {
    let d = scene_dataset(Scenario::LivingRoom, Task::Authentication, 7, 20);
    let counts = [1, 2, 3, 4, 5];
    let mut ok = true;
    let mut curves = Vec::new();
    for seed in [42, 1, 2] {
        let split = stratified_split(&d, 0.7, seed).unwrap();
        let res = receiver_ablation(&d, &split, ModelKind::Rfr, &ModelParams::default(), &counts, &[seed]).unwrap();
        let acc: Vec<f64> = counts.iter().map(|&m| res.mean_accuracy(m).unwrap()).collect();
        ok &= acc[4] >= acc[0];
        ok &= acc.windows(2).all(|w| w[1] >= w[0] - 0.02);
        let c: Vec<String> = acc.iter().map(|a| format!("{a:.3}")).collect();
        curves.push(format!("seed {seed}: [{}]", c.join(", ")));
    }
    outcome(ok, curves.join("; "))
}

fn kernel_properties() -> Result<(), String> {
    let mut r = rng::stream(10, 0);
    for _ in 0..20 {
        let n = r.random_range(2..=15);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let hp = GprHyperparams::new(r.random_range(0.5..2.0), r.random_range(0.2..2.0), 0.0).unwrap();
        let k = gram_matrix(&x, &hp).unwrap();
        if k != k.transpose() {
            return Err("gram matrix not symmetric".into());
        }
        let min = SymmetricEigen::new(k.clone()).eigenvalues.min();
        if min < -1e-9 * k.max() {
            return Err(format!("gram matrix eigenvalue {min:e} is negative"));
        }
    }
    Ok(())
}

fn gpr_interpolation_and_permutation() -> Result<(), String> {
    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.7, (i as f64 * 1.3).sin()]).collect();
    let y = DMatrix::from_fn(8, 2, |i, c| (i as f64 + c as f64).cos());
    let hp = GprHyperparams::new(1.0, 0.5, 1e-12).unwrap();
    let model = GprModel::fit(&x, &y, hp, MeanPolicy::TrainingMean).map_err(|e| e.to_string())?;
    for (i, xi) in x.iter().enumerate() {
        let p = model.predict_mean(xi).unwrap();
        if (0..2).any(|c| (p[c] - y[(i, c)]).abs() > 1e-6) {
            return Err(format!("no interpolation at training point {i}"));
        }
    }
    let order = [3, 7, 0, 5, 1, 6, 2, 4];
    let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let yp = DMatrix::from_fn(8, 2, |i, c| y[(order[i], c)]);
    let hp = GprHyperparams::new(1.0, 0.5, 1e-4).unwrap();
    let a = GprModel::fit(&x, &y, hp, MeanPolicy::TrainingMean).unwrap();
    let b = GprModel::fit(&xp, &yp, hp, MeanPolicy::TrainingMean).unwrap();
    let lml_a = log_marginal_likelihood(&x, &y, &hp).unwrap();
    let lml_b = log_marginal_likelihood(&xp, &yp, &hp).unwrap();
    if !close(lml_a, lml_b, 1e-10) {
        return Err("likelihood changes under permutation".into());
    }
    for q in [[0.3, 0.1], [2.0, -0.5], [4.1, 0.9]] {
        let (pa, pb) = (a.predict_mean(&q).unwrap(), b.predict_mean(&q).unwrap());
        if (0..2).any(|c| !close(pa[c], pb[c], 1e-9)) {
            return Err("prediction changes under permutation".into());
        }
    }
    Ok(())
}

fn split_properties() -> Result<(), String> {
    let auth = scene_dataset(Scenario::LivingRoom, Task::Authentication, 7, 20);
    for seed in 0..5 {
        let s = stratified_split(&auth, 0.7, seed).unwrap();
        s.validate(&auth).map_err(|e| e.to_string())?;
        if (s.train.len(), s.test.len()) != (98, 42) {
            return Err(format!("stratified split gave {}/{}", s.train.len(), s.test.len()));
        }
    }
    let coord = scene_dataset(Scenario::Classroom, Task::CoordLocalization, 20, 2);
    for seed in 0..5 {
        let s = location_holdout_split(&coord, 3, seed).unwrap();
        s.validate(&coord).map_err(|e| e.to_string())?;
        let train: Vec<_> = coord.select(&s.train).unwrap().iter().map(|x| x.coords).collect();
        if coord.select(&s.test).unwrap().iter().any(|x| train.contains(&x.coords)) {
            return Err("holdout split leaks a location".into());
        }
    }
    Ok(())
}

fn confusion_identities() -> Result<(), String> {
    let d = scene_dataset(Scenario::Vehicle, Task::GridLocalization, 4, 20);
    let split = stratified_split(&d, 0.7, 5).unwrap();
    for kind in [ModelKind::Knn, ModelKind::Dt, ModelKind::Rfr] {
        let r = run_experiment(&d, &split, kind, &ModelParams::default(), 5).unwrap();
        let cm = r.confusion.as_ref().unwrap();
        for (label, row) in cm.labels().iter().zip(cm.counts()) {
            let expected = r.rows.iter().filter(|x| &x.truth == label).count();
            if row.iter().sum::<usize>() != expected {
                return Err(format!("row sum for {label} differs from its test count"));
            }
        }
        let correct = r.rows.iter().filter(|x| x.truth == x.predicted).count();
        if cm.trace() != correct || cm.total() != r.rows.len() {
            return Err("trace or total disagrees with the predictions".into());
        }
        if r.accuracy().unwrap() != cm.trace() as f64 / cm.total() as f64 {
            return Err("accuracy is not trace / total".into());
        }
    }
    Ok(())
}

fn simulator_featurizer_consistency() -> Result<(), String> {
    let scene = Scenario::LivingRoom.scene(42).unwrap();
    let profile = scene.subject(2).unwrap();
    let occupancy = Occupancy::Static {
        profile: &profile,
        position: scene.anchor,
    };
    let mut r = rng::stream(7, 0);
    let sweep = simulate_sweep(&scene, &occupancy, Some(&mut r)).unwrap();
    let bands = scene.bands();
    let mut worst = 0.0f64;
    for (j, id) in scene.sensor_ids().into_iter().enumerate() {
        let powers = &sweep[j * bands..(j + 1) * bands];
        let frames = synth_sweep_frames(id, &scene.plan, powers, DEFAULT_FRAME_BYTES, 9).unwrap();
        let recovered = assemble_sweep(&frames, &scene.plan).unwrap();
        for (a, b) in powers.iter().zip(recovered.powers_db()) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst > 0.2 {
        return Err(format!("featurized power off by {worst:.3} dB"));
    }
    Ok(())
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let bin = env!("CARGO_BIN_EXE_shapr");
    let bands = [
        "--band-start",
        "300000000",
        "--band-stop",
        "330000000",
        "--band-step",
        "1200000",
    ];
    let steps: Vec<Vec<&str>> = vec![
        [
            &[
                "simulate",
                "--task",
                "auth",
                "--seed",
                "11",
                "--out",
                "sim.csv",
                "--emit-iq",
                "iq",
                "--frame-bytes",
                "1024",
            ][..],
            &bands,
        ]
        .concat(),
        [
            &["featurize", "--input", "iq", "--task", "auth", "--out", "data.csv"][..],
            &bands,
        ]
        .concat(),
        vec!["split", "--data", "data.csv", "--out", "split.txt", "--seed", "11"],
        vec![
            "train",
            "--data",
            "data.csv",
            "--split",
            "split.txt",
            "--model",
            "rfr",
            "--trees",
            "25",
            "--out",
            "model.txt",
            "--seed",
            "11",
        ],
        vec![
            "eval",
            "--model",
            "model.txt",
            "--data",
            "data.csv",
            "--split",
            "split.txt",
            "--out",
            "report.csv",
            "--confusion",
            "cm.csv",
        ],
        vec![
            "predict",
            "--model",
            "model.txt",
            "--data",
            "data.csv",
            "--out",
            "pred.csv",
        ],
        vec![
            "ablate",
            "--data",
            "data.csv",
            "--split",
            "split.txt",
            "--model",
            "knn",
            "--seeds",
            "1,2",
            "--out",
            "ablation.csv",
        ],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(&args)
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "`shapr {}` failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    let mut files: Vec<String> = [
        "sim.csv",
        "data.csv",
        "split.txt",
        "model.txt",
        "report.csv",
        "cm.csv",
        "pred.csv",
        "ablation.csv",
    ]
    .map(String::from)
    .to_vec();
    files.push("iq/labels.csv".into());
    files.push("iq/auth_00000.shiq".into());
    files
        .into_iter()
        .map(|f| std::fs::read(dir.join(&f)).map(|b| (f, b)).map_err(|e| e.to_string()))
        .collect()
}

fn cli_rerun() -> Result<(), String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(())
}

fn property_suites() -> Outcome {
    let suites: [(&str, Suite); 6] = [
        ("kernel symmetry/PSD", kernel_properties),
        (
            "GPR interpolation and permutation invariance",
            gpr_interpolation_and_permutation,
        ),
        ("split disjointness/coverage", split_properties),
        ("confusion identities", confusion_identities),
        ("simulator/featurizer consistency", simulator_featurizer_consistency),
        ("CLI rerun determinism", cli_rerun),
    ];
    let failures: Vec<String> = suites
        .iter()
        .filter_map(|(name, f)| f().err().map(|e| format!("{name}: {e}")))
        .collect();
    if failures.is_empty() {
        outcome(true, format!("{} suites", suites.len()))
    } else {
        outcome(false, failures.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 10] = [
        ("band power oracle", Duration::from_secs(1), band_power_oracle),
        ("feature dimension", Duration::from_secs(1), feature_dimension),
        ("GPR dense-inverse oracle", Duration::from_secs(5), gpr_oracle),
        ("GPR hand case", Duration::from_secs(1), gpr_hand_case),
        ("authentication", Duration::from_secs(30), authentication),
        ("vehicle grid localization", Duration::from_secs(10), vehicle),
        ("classroom coordinate localization", Duration::from_secs(60), classroom),
        ("activity recognition", Duration::from_secs(60), activity),
        ("receiver ablation trend", Duration::from_secs(90), ablation),
        ("property suites", Duration::from_secs(120), property_suites),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = o.passed && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {} ({:.2} s, limit {} s{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" },
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
