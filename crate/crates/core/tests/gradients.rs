//! Analytic gradients against central finite differences.

use std::time::Instant;

use kansr_core::kan::{init_network, GridConfig};
use kansr_core::linalg::Matrix;
use kansr_core::rng::SeededRng;
use kansr_core::selfrep::{ArchConfig, LossWeights, SelfRepModel};

const STEP: f64 = 1e-6;
/// Gradients smaller than this are compared in absolute terms.
const SCALE_FLOOR: f64 = 1e-2;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(SCALE_FLOOR)
}

struct Case {
    model: SelfRepModel,
    patches: Matrix,
}

fn random_case(seed: u64) -> Case {
    let mut rng = SeededRng::new(seed);
    let input = 1 + rng.below(6);
    let hidden: Vec<usize> = (0..rng.below(2)).map(|_| 1 + rng.below(6)).collect();
    let latent = 1 + rng.below(6);
    let n = 2 + rng.below(7);
    let arch = ArchConfig {
        hidden,
        latent_dim: latent,
        grid: GridConfig::default(),
    };
    let weights = LossWeights {
        lambda1: rng.uniform_range(0.0, 2.0),
        lambda2: rng.uniform_range(0.0, 10.0),
        lambda3: rng.uniform_range(0.0, 2.0),
        eps_norm: 10f64.powf(rng.uniform_range(-3.0, -1.0)),
    };
    let mut model = SelfRepModel::init(input, n, &arch, weights, seed).unwrap();
    // keep entries away from the steep region of the smoothed norms
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = rng.uniform_range(0.1, 0.6);
                model
                    .theta_s
                    .set(i, j, if rng.uniform() < 0.5 { -v } else { v });
            }
        }
    }
    let patches = Matrix::from_fn(n, input, |_, _| rng.uniform_range(-1.5, 1.5));
    Case { model, patches }
}

/// Largest relative error over every parameter of one model.
fn full_loss_error(case: &mut Case) -> f64 {
    let (_, grad) = case.model.loss_and_grad(&case.patches).unwrap();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
    let sizes: Vec<usize> = analytic.iter().map(|t| t.len()).collect();
    let mut worst: f64 = 0.0;
    for (t, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = case.model.tensors_mut()[t][i];
            case.model.tensors_mut()[t][i] = orig + STEP;
            let up = case.model.total_loss(&case.patches).unwrap().total;
            case.model.tensors_mut()[t][i] = orig - STEP;
            let down = case.model.total_loss(&case.patches).unwrap().total;
            case.model.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(rel_err(analytic[t][i], numeric));
        }
    }
    worst
}

#[test]
fn full_loss_gradient_over_random_configurations() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..120 {
        let mut case = random_case(seed);
        let err = full_loss_error(&mut case);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    println!("120 configurations, worst relative error {worst:e}, {secs:.2}s");
    assert!(secs < 60.0);
}

#[test]
fn network_gradients_including_input() {
    let mut rng = SeededRng::new(77);
    for seed in 0..20 {
        let dims = [1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(5)];
        let mut net = init_network(&dims, GridConfig::default(), seed).unwrap();
        let x = Matrix::from_fn(4, dims[0], |_, _| rng.uniform_range(-2.5, 2.5));
        let weights = Matrix::from_fn(4, dims[2], |_, _| rng.normal());
        let objective = |net: &kansr_core::kan::KanNetwork, x: &Matrix| -> f64 {
            let y = net.predict(x).unwrap();
            y.as_slice()
                .iter()
                .zip(weights.as_slice())
                .map(|(a, b)| a * b)
                .sum()
        };
        let (_, cache) = net.forward(&x).unwrap();
        let grad = net.backward(&cache, &weights).unwrap();

        for (l, lg) in grad.layers.iter().enumerate() {
            for (t, tensor) in lg.tensors().iter().enumerate() {
                for i in 0..tensor.len() {
                    let orig = net.layers_mut()[l].tensors_mut()[t][i];
                    net.layers_mut()[l].tensors_mut()[t][i] = orig + STEP;
                    let up = objective(&net, &x);
                    net.layers_mut()[l].tensors_mut()[t][i] = orig - STEP;
                    let down = objective(&net, &x);
                    net.layers_mut()[l].tensors_mut()[t][i] = orig;
                    let numeric = (up - down) / (2.0 * STEP);
                    assert!(
                        rel_err(tensor[i], numeric) < 1e-5,
                        "layer {l} tensor {t} index {i}"
                    );
                }
            }
        }
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                // the clamp has a kink at the grid ends
                if (x.get(i, j).abs() - 2.0).abs() < 1e-3 {
                    continue;
                }
                let mut xp = x.clone();
                xp.set(i, j, x.get(i, j) + STEP);
                let mut xm = x.clone();
                xm.set(i, j, x.get(i, j) - STEP);
                let numeric = (objective(&net, &xp) - objective(&net, &xm)) / (2.0 * STEP);
                assert!(
                    rel_err(grad.input.get(i, j), numeric) < 1e-5,
                    "input ({i}, {j})"
                );
            }
        }
    }
}

#[test]
fn smoothed_norm_tends_to_exact_norm() {
    let mut rng = SeededRng::new(4);
    let theta = Matrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { rng.normal() });
    let exact: f64 = theta.as_slice().iter().map(|v| v.abs()).sum();
    let mut prev = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-4, 1e-8] {
        let gap = (kansr_core::selfrep::sparsity_penalty(&theta, eps) - exact).abs();
        assert!(gap <= prev);
        prev = gap;
    }
    assert!(prev < 1e-6);
}
