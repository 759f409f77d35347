//! Acceptance criteria 1–10. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured values, then asserts.
//!
//! Run with `cargo test -p kansr --test acceptance -- --nocapture` to see the
//! report lines.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use kansr::RunConfig;
use kansr_core::concepts::{boundary_scores, cluster_segments, detect_boundaries};
use kansr_core::forecast::{
    fit_concept_transitions, forecast_horizon, predict_next_concept, segment_sequence,
    ForecastConfig,
};
use kansr_core::ingest::{
    generate_synthetic_labeled, GeneratorFamily, GroundTruth, RegimeSpec, SineComponent,
    SyntheticSpec,
};
use kansr_core::kan::{bspline_basis, GridConfig, SplineGrid};
use kansr_core::linalg::Matrix;
use kansr_core::metrics::{adjusted_rand_index, boundary_f1, rmse};
use kansr_core::patching::{denormalize_patch, normalize_patches, patchify, NormStats, PatchSet};
use kansr_core::rng::SeededRng;
use kansr_core::selfrep::{
    column_differences, difference_matrix, train, ArchConfig, LossWeights, SelfRepModel,
    TrainConfig,
};

fn report(criterion: u32, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn preset() -> RunConfig {
    RunConfig::load(&workspace_root().join("configs/synthetic.toml"))
        .unwrap()
        .resolve()
        .unwrap()
}

/// The three-regime stream of the shipped preset, normalized into patches.
fn fixture(seed: u64) -> (PatchSet, GroundTruth) {
    let config = preset();
    let (spec, labels) = config.synth.spec(seed).unwrap();
    let (series, truth) = generate_synthetic_labeled(&spec, &labels).unwrap();
    let raw = patchify(&series, config.data.width, false).unwrap();
    (normalize_patches(&raw).unwrap(), truth)
}

// 1 -----------------------------------------------------------------------

fn gradient_case(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let input = 1 + rng.below(6);
    let arch = ArchConfig {
        hidden: (0..rng.below(2)).map(|_| 1 + rng.below(6)).collect(),
        latent_dim: 1 + rng.below(6),
        grid: GridConfig::default(),
    };
    let n = 2 + rng.below(7);
    let weights = LossWeights {
        lambda1: rng.uniform_range(0.0, 2.0),
        lambda2: rng.uniform_range(0.0, 10.0),
        lambda3: rng.uniform_range(0.0, 2.0),
        eps_norm: 1e-2,
    };
    let mut model = SelfRepModel::init(input, n, &arch, weights, seed).unwrap();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                model.theta_s.set(i, j, rng.uniform_range(-0.6, 0.6));
            }
        }
    }
    let p = Matrix::from_fn(n, input, |_, _| rng.uniform_range(-1.5, 1.5));
    let (_, grad) = model.loss_and_grad(&p).unwrap();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (t, g) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let orig = model.tensors_mut()[t][i];
            model.tensors_mut()[t][i] = orig + h;
            let up = model.total_loss(&p).unwrap().total;
            model.tensors_mut()[t][i] = orig - h;
            let down = model.total_loss(&p).unwrap().total;
            model.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2));
        }
    }
    worst
}

#[test]
fn criterion_01_gradient_suite() {
    let start = Instant::now();
    let worst = (0..100).map(gradient_case).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst < 1e-4 && secs < 60.0,
        format!("100 configs, max rel err {worst:.2e}, {secs:.2}s"),
    );
}

// 2 -----------------------------------------------------------------------

#[test]
fn criterion_02_normalization_round_trip() {
    let mut rng = SeededRng::new(2);
    let (w, ch) = (20, 5);
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|i| {
            let offset = rng.uniform_range(-50.0, 50.0);
            let scale = 10f64.powf(rng.uniform_range(-2.0, 2.0));
            (0..w * ch)
                .map(|k| {
                    if i % 4 == 0 && k % ch == 1 {
                        offset
                    } else {
                        offset + scale * rng.normal()
                    }
                })
                .collect()
        })
        .collect();
    let raw = PatchSet {
        patches: Matrix::from_rows(&rows).unwrap(),
        stats: vec![NormStats::identity(ch); 1000],
        width: w,
        channels: ch,
        dropped_tail: 0,
        normalized: false,
    };
    let norm = normalize_patches(&raw).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let back = denormalize_patch(&norm.patch(i), &norm.stats[i]).unwrap();
        for (a, b) in back.data.iter().zip(&rows[i]) {
            worst = worst.max((a - b).abs());
        }
    }
    report(
        2,
        worst <= 1e-9,
        format!("1000 patches, 250 with a constant channel, max abs err {worst:.2e}"),
    );
}

// 3 -----------------------------------------------------------------------

#[test]
fn criterion_03_difference_matrix_identity() {
    let mut rng = SeededRng::new(3);
    let (mut diff_err, mut mean_err): (f64, f64) = (0.0, 0.0);
    for n in [2, 5, 50] {
        let theta = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.normal() });
        let r = difference_matrix(n).unwrap();
        let tr = theta.matmul(&r).unwrap();
        let direct = column_differences(&theta);
        for i in 0..n {
            for j in 0..n - 1 {
                let want = theta.get(i, j + 1) - theta.get(i, j);
                diff_err = diff_err
                    .max((tr.get(i, j) - want).abs())
                    .max((direct.get(i, j) - want).abs());
            }
        }
        let scores = boundary_scores(&theta, &r).unwrap();
        for j in 0..n - 1 {
            let brute = (0..n)
                .map(|i| (theta.get(i, j + 1) - theta.get(i, j)).abs())
                .sum::<f64>()
                / n as f64;
            mean_err = mean_err.max((scores.mu_b[j] - brute).abs());
        }
    }
    report(
        3,
        diff_err < 1e-12 && mean_err < 1e-12,
        format!("n in {{2,5,50}}, column diff err {diff_err:.1e}, mean err {mean_err:.1e}"),
    );
}

// 4 -----------------------------------------------------------------------

fn de_boor(knots: &[f64], coeffs: &[f64], k: usize, x: f64) -> f64 {
    let mut s = k;
    while s < coeffs.len() - 1 && x >= knots[s + 1] {
        s += 1;
    }
    let mut d: Vec<f64> = (0..=k).map(|j| coeffs[j + s - k]).collect();
    for r in 1..=k {
        for j in (r..=k).rev() {
            let i = j + s - k;
            let denom = knots[i + k + 1 - r] - knots[i];
            let alpha = if denom > 0.0 {
                (x - knots[i]) / denom
            } else {
                0.0
            };
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    }
    d[k]
}

#[test]
fn criterion_04_spline_suite() {
    let grid = SplineGrid::new(GridConfig::default()).unwrap();
    let xs: Vec<f64> = (0..1000).map(|i| -2.0 + 4.0 * i as f64 / 999.0).collect();
    let unity = xs
        .iter()
        .map(|&x| (bspline_basis(x, &grid).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut rng = SeededRng::new(4);
    let coeffs: Vec<f64> = (0..grid.basis_len()).map(|_| rng.normal()).collect();
    let oracle = xs
        .iter()
        .map(|&x| {
            let (v, _) = grid.eval_with_deriv(&coeffs, &grid.local_basis(x));
            (v - de_boor(grid.knots(), &coeffs, grid.order(), x)).abs()
        })
        .fold(0.0, f64::max);
    report(
        4,
        unity < 1e-9 && oracle < 1e-10,
        format!("1000 points, unity err {unity:.1e}, de Boor err {oracle:.1e}"),
    );
}

// 5 -----------------------------------------------------------------------

#[test]
fn criterion_05_segmentation_recovery() {
    let config = preset();
    let start = Instant::now();
    let (mut f1s, mut aris) = (Vec::new(), Vec::new());
    for seed in 0..5 {
        let (patches, truth) = fixture(seed);
        let mut tc = config.train.clone();
        tc.seed = seed;
        let (model, _) = train(&patches, &tc).unwrap();
        let n = patches.len();
        let scores = boundary_scores(&model.theta_s, &difference_matrix(n).unwrap()).unwrap();
        let seg = detect_boundaries(&scores, &config.segment.peak_options()).unwrap();
        let latent = model.encode(&patches.patches).unwrap();
        let map = cluster_segments(
            &seg,
            &latent,
            &model.theta_s,
            &config.segment.cluster_options(),
        )
        .unwrap();
        let width = config.data.width;
        f1s.push(
            boundary_f1(&truth.patch_boundaries(width, n), &seg.boundaries, 1)
                .unwrap()
                .f1,
        );
        aris.push(adjusted_rand_index(&truth.patch_labels(width, n), &map.patch_labels).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let f1 = f1s.iter().sum::<f64>() / 5.0;
    let ari = aris.iter().sum::<f64>() / 5.0;
    report(
        5,
        f1 >= 0.8 && ari >= 0.7 && secs < 600.0,
        format!("mean F1 {f1:.3} {f1s:.2?}, mean ARI {ari:.3} {aris:.2?}, {secs:.0}s"),
    );
}

// 6 -----------------------------------------------------------------------

/// 40 patches, 20 from each of two random rank-3 linear generators.
fn two_subspace_patches(seed: u64) -> PatchSet {
    let (w, ch, rank, per) = (8, 4, 3, 20);
    let d = w * ch;
    let mut rng = SeededRng::new(seed);
    let bases: Vec<Matrix> = (0..2)
        .map(|_| Matrix::from_fn(d, rank, |_, _| rng.normal()))
        .collect();
    let rows: Vec<Vec<f64>> = (0..2 * per)
        .map(|i| {
            let c: Vec<f64> = (0..rank).map(|_| rng.normal()).collect();
            let b = &bases[i / per];
            (0..d)
                .map(|k| (0..rank).map(|j| b.get(k, j) * c[j]).sum::<f64>() / (rank as f64).sqrt())
                .collect()
        })
        .collect();
    PatchSet {
        patches: Matrix::from_rows(&rows).unwrap(),
        stats: vec![NormStats::identity(ch); 2 * per],
        width: w,
        channels: ch,
        dropped_tail: 0,
        normalized: true,
    }
}

#[test]
fn criterion_06_block_diagonal() {
    let mut tc = preset().train;
    tc.epochs = 600;
    tc.pretrain_epochs = 150;
    tc.loss_weights.lambda1 = 10.0;
    tc.loss_weights.lambda2 = 30.0;
    tc.loss_weights.lambda3 = 1.0;
    let mut fractions = Vec::new();
    for seed in 0..5 {
        tc.seed = seed;
        let (model, _) = train(&two_subspace_patches(seed), &tc).unwrap();
        let th = &model.theta_s;
        let (mut on, mut off) = (0.0, 0.0);
        for i in 0..40 {
            for j in 0..40 {
                if (i < 20) == (j < 20) {
                    on += th.get(i, j).abs();
                } else {
                    off += th.get(i, j).abs();
                }
            }
        }
        fractions.push(off / (on + off));
    }
    let worst = fractions.iter().copied().fold(0.0, f64::max);
    report(
        6,
        worst < 0.2,
        format!("off-block l1 fraction per seed {fractions:.3?}"),
    );
}

// 7 -----------------------------------------------------------------------

#[test]
fn criterion_07_training_sanity() {
    let (patches, _) = fixture(0);
    let mut worst_rise = f64::NEG_INFINITY;
    for mut tc in [preset().train, TrainConfig::default()] {
        tc.epochs = 50;
        let (_, rep) = train(&patches, &tc).unwrap();
        let totals: Vec<f64> = rep.trace.iter().map(|l| l.total).collect();
        let ma: Vec<f64> = totals
            .windows(5)
            .map(|w| w.iter().sum::<f64>() / 5.0)
            .collect();
        for w in ma.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    let mut tc = preset().train;
    tc.epochs = 30;
    tc.pretrain_epochs = 10;
    let a = serde_json::to_vec(&train(&patches, &tc).unwrap().0).unwrap();
    let b = serde_json::to_vec(&train(&patches, &tc).unwrap().0).unwrap();
    report(
        7,
        worst_rise <= 0.0 && a == b,
        format!(
            "largest 5-epoch average rise {worst_rise:.3e}, checkpoints identical: {}",
            a == b
        ),
    );
}

// 8 -----------------------------------------------------------------------

fn alternating_regime(periods: [f64; 2], shift: f64) -> GeneratorFamily {
    GeneratorFamily::SinusoidMixture {
        components: vec![
            SineComponent {
                amplitude: 1.0,
                period: periods[0],
                phase: 0.0,
            },
            SineComponent {
                amplitude: 0.6,
                period: periods[1],
                phase: 0.4,
            },
        ],
        channel_shift: shift,
    }
}

#[test]
fn criterion_08_forecast_sanity() {
    let (w, per_segment, segments, held_out) = (20, 3, 24, 10);
    let mut concept_hits = 0;
    let mut wins = Vec::new();
    for seed in 0..5 {
        let regimes: Vec<RegimeSpec> = (0..segments)
            .map(|s| RegimeSpec {
                generator: if s % 2 == 0 {
                    alternating_regime([5.0, 10.0], 0.0)
                } else {
                    alternating_regime([4.0, 20.0], 1.1)
                },
                duration: w * per_segment,
            })
            .collect();
        let spec = SyntheticSpec {
            length: w * per_segment * segments,
            channels: 4,
            regimes,
            noise_sigma: 0.1,
            seed,
        };
        let labels: Vec<usize> = (0..segments).map(|s| s % 2).collect();
        let (series, truth) = generate_synthetic_labeled(&spec, &labels).unwrap();
        let raw = patchify(&series, w, true).unwrap();
        let patches = normalize_patches(&raw).unwrap();
        let n = patches.len();
        let patch_labels = truth.patch_labels(w, n);

        let first = segments - held_out;
        for s in first..segments {
            let history = segment_sequence(&patch_labels[..s * per_segment]);
            let model = fit_concept_transitions(&history).unwrap();
            let next = predict_next_concept(&model, *history.last().unwrap(), 0.0, seed).unwrap();
            if seed == 0 && next == patch_labels[s * per_segment] {
                concept_hits += 1;
            }
        }

        let (mut ours, mut naive) = (Vec::new(), Vec::new());
        for t in first * per_segment..n {
            let mut history = patches.clone();
            history.patches = Matrix::from_rows(&patches.patches.to_rows()[..t]).unwrap();
            history.stats.truncate(t);
            let f = forecast_horizon(&history, &patch_labels[..t], &ForecastConfig::default(), 1)
                .unwrap();
            let actual = Matrix::from_vec(w, 4, raw.patches.row(t).to_vec()).unwrap();
            let last = Matrix::from_vec(w, 4, raw.patches.row(t - 1).to_vec()).unwrap();
            ours.push(f[0].denormalized.clone());
            naive.push((actual, last));
        }
        let stack = |ms: Vec<&Matrix>| {
            Matrix::from_rows(&ms.iter().flat_map(|m| m.to_rows()).collect::<Vec<_>>()).unwrap()
        };
        let actual = stack(naive.iter().map(|p| &p.0).collect());
        let e_ours = rmse(&actual, &stack(ours.iter().collect())).unwrap();
        let e_naive = rmse(&actual, &stack(naive.iter().map(|p| &p.1).collect())).unwrap();
        wins.push((e_ours, e_naive));
    }
    let beat = wins.iter().filter(|(a, b)| a < b).count();
    report(
        8,
        concept_hits == held_out && beat >= 4,
        format!(
            "next-concept accuracy {}/{held_out}, RMSE below repeat-last on {beat}/5 seeds {:.3?}",
            concept_hits, wins
        ),
    );
}

// 9 -----------------------------------------------------------------------

fn partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                let next = p.iter().copied().max().map_or(0, |m| m + 1).min(2);
                (0..=next).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

fn ari_pairs(x: &[usize], y: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * (a * d - b * c) / denom
    }
}

fn best_matching(truth: &[usize], pred: &[usize], tol: usize, used: u32) -> usize {
    let Some((&p, rest)) = pred.split_first() else {
        return 0;
    };
    let mut best = best_matching(truth, rest, tol, used);
    for (j, &t) in truth.iter().enumerate() {
        if used >> j & 1 == 0 && p.abs_diff(t) <= tol {
            best = best.max(1 + best_matching(truth, rest, tol, used | 1 << j));
        }
    }
    best
}

#[test]
fn criterion_09_metric_oracles() {
    let (mut ari_err, mut f1_err): (f64, f64) = (0.0, 0.0);
    let mut cases = 0usize;
    for n in 2..=8 {
        let parts = partitions(n);
        for x in &parts {
            for y in &parts {
                ari_err = ari_err.max((adjusted_rand_index(x, y).unwrap() - ari_pairs(x, y)).abs());
                cases += 1;
            }
        }
        let sets: Vec<Vec<usize>> = (0u32..1 << (n - 1))
            .map(|m| (1..n).filter(|b| m >> (b - 1) & 1 == 1).collect())
            .collect();
        for t in &sets {
            for p in &sets {
                let got = boundary_f1(t, p, 1).unwrap().f1;
                let want = match (t.is_empty(), p.is_empty()) {
                    (true, true) => 1.0,
                    (true, false) | (false, true) => 0.0,
                    _ => {
                        let tp = best_matching(t, p, 1, 0) as f64;
                        if tp == 0.0 {
                            0.0
                        } else {
                            2.0 * tp / (t.len() + p.len()) as f64
                        }
                    }
                };
                f1_err = f1_err.max((got - want).abs());
                cases += 1;
            }
        }
    }
    report(
        9,
        ari_err < 1e-12 && f1_err < 1e-12,
        format!("{cases} exhaustive cases, ARI err {ari_err:.1e}, F1 err {f1_err:.1e}"),
    );
}

// 10 ----------------------------------------------------------------------

fn run_cli(dir: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_kansr"))
        .args(args)
        .current_dir(dir)
        .env_remove(kansr::config::OUTPUT_DIR_ENV)
        .output()
        .unwrap();
    status.status.code().unwrap_or(-1)
}

fn pipeline(dir: &Path) -> Vec<i32> {
    fs::copy(
        workspace_root().join("configs/synthetic.toml"),
        dir.join("run.toml"),
    )
    .unwrap();
    let steps: [&[&str]; 4] = [
        &["--config", "run.toml", "--output-dir", "out", "synth"],
        &[
            "--config",
            "run.toml",
            "--output-dir",
            "out",
            "train",
            "--epochs",
            "120",
            "--pretrain-epochs",
            "30",
        ],
        &["--config", "run.toml", "--output-dir", "out", "segment"],
        &[
            "--config",
            "run.toml",
            "--output-dir",
            "out",
            "eval",
            "--truth",
            "out/truth.json",
        ],
    ];
    steps.iter().map(|a| run_cli(dir, a)).collect()
}

fn schema_ok(dir: &Path, file: &str, schema: &str, keys: &[&str]) -> bool {
    let text = fs::read_to_string(dir.join("out").join(file)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["schema"] == schema && keys.iter().all(|k| v.get(*k).is_some())
}

#[test]
fn criterion_10_cli_end_to_end() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let codes = [pipeline(a.path()), pipeline(b.path())];
    let mut names: Vec<String> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let identical = names.iter().all(|f| {
        fs::read(a.path().join("out").join(f)).unwrap()
            == fs::read(b.path().join("out").join(f)).unwrap()
    });
    let schemas = schema_ok(
        a.path(),
        "model.json",
        "kansr.checkpoint/1",
        &["patch_meta", "model", "config"],
    ) && schema_ok(
        a.path(),
        "train_report.json",
        "kansr.train_report/1",
        &["trace", "epochs_run"],
    ) && schema_ok(
        a.path(),
        "concepts.json",
        "kansr.concepts/1",
        &["boundaries", "segments", "labels_per_patch", "k"],
    ) && schema_ok(
        a.path(),
        "eval.json",
        "kansr.eval/1",
        &["f1", "ari", "tolerance"],
    );
    let all_zero = codes.iter().flatten().all(|&c| c == 0);
    report(
        10,
        all_zero && identical && schemas,
        format!(
            "exit codes {codes:?}, {} files byte-identical: {identical}, schemas valid: {schemas}",
            names.len()
        ),
    );
}
