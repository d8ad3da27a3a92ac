//! Analytic gradients against central finite differences of the loss.

use eauq::nn::{loss_and_gradient, DropoutMode, Loss, Mlp, Sample};
use eauq::seed;
use rand::Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const ABS_FLOOR: f64 = 1e-7;

/// Central difference of the batch loss with respect to parameter `idx`.
fn numeric_grad(model: &Mlp<f64>, batch: &[Sample<'_, f64>], loss: Loss, mode: DropoutMode, idx: usize) -> f64 {
    let eval = |delta: f64| {
        let mut m = model.clone();
        *m.params_mut().nth(idx).unwrap() += delta;
        loss_and_gradient(&m, batch, loss, mode).unwrap().0
    };
    (eval(H) - eval(-H)) / (2.0 * H)
}

fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= ABS_FLOOR || diff <= REL_TOL * analytic.abs().max(numeric.abs())
}

#[test]
fn two_four_one_every_coordinate() {
    let model = Mlp::<f64>::new(&[2, 4, 1], 0.0, 17).unwrap();
    let xs = [[0.3, -1.1], [1.7, 0.4], [-0.6, 0.9]];
    let ts = [1.0, 0.0, 0.75];
    let batch: Vec<_> = xs.iter().zip(ts).map(|(x, t)| Sample::new(&x[..], t)).collect();
    for loss in [Loss::BinaryCrossEntropy, Loss::MeanSquaredError] {
        let (_, g) = loss_and_gradient(&model, &batch, loss, DropoutMode::Deterministic).unwrap();
        for (i, a) in g.flat().enumerate() {
            let n = numeric_grad(&model, &batch, loss, DropoutMode::Deterministic, i);
            assert!(close(a, n), "{loss:?} param {i}: analytic {a}, numeric {n}");
        }
    }
}

#[test]
fn random_models_and_batches() {
    let mut rng = seed::rng(2024);
    let mut checked = 0;
    for case in 0..40 {
        let n_hidden = rng.random_range(1..=2);
        let mut sizes = vec![rng.random_range(1..=6)];
        sizes.extend((0..n_hidden).map(|_| rng.random_range(1..=8)));
        sizes.push(1);
        let rate = if case % 2 == 0 { 0.0 } else { 0.3 };
        let mut model = Mlp::<f64>::new(&sizes, rate, 0).unwrap();
        model.params_mut().for_each(|p| *p = rng.random_range(-1.0..1.0));
        let n = rng.random_range(1..=5);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let batch: Vec<_> = xs.iter().map(|x| Sample::new(&x[..], rng.random_range(0.0..=1.0))).collect();
        let loss = if case % 3 == 0 { Loss::MeanSquaredError } else { Loss::BinaryCrossEntropy };
        let mode = if rate > 0.0 { DropoutMode::Active(rng.random()) } else { DropoutMode::Deterministic };

        let (_, g) = loss_and_gradient(&model, &batch, loss, mode).unwrap();
        let grads: Vec<f64> = g.flat().collect();
        for _ in 0..4 {
            let i = rng.random_range(0..grads.len());
            let num = numeric_grad(&model, &batch, loss, mode, i);
            assert!(close(grads[i], num), "case {case} {sizes:?} param {i}: {} vs {num}", grads[i]);
            checked += 1;
        }
    }
    assert!(checked >= 100);
}
