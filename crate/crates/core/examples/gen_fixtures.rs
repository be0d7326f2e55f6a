//! Regenerates the synthetic detection fixtures in `tests/fixtures`.
//!
//! Three classes, each a mixture of two 2-D Gaussians. Five softmax
//! regression members on quadratic features are fit by gradient descent, each
//! on its own bootstrap resample. Outputs (logits, T = 1):
//!
//! * `in_dist.uqt`: held-out draws from the training distribution,
//! * `ood.uqt`: draws from a shifted Gaussian away from all classes,
//! * `noisy.uqt` + `noisy_labels.csv`: draws from a wider, overlapping
//!   version of the classes, labelled by the generating component, so many
//!   samples are misclassified for aleatoric reasons.
//!
//! Run with `cargo run -p uqt-core --example gen_fixtures [out_dir]`.

use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use uqt_core::io::write_ensemble;
use uqt_core::{EnsemblePredictions, ValueKind};

const SEED: u64 = 20240917;
const K: usize = 3;
const MEMBERS: usize = 5;
const TRAIN: usize = 600;
const TEST: usize = 300;
const FEATURES: usize = 6;

/// Two component centres per class.
const CENTRES: [[[f64; 2]; 2]; K] = [
    [[-2.0, 0.0], [-1.0, 2.0]],
    [[2.0, 0.0], [1.0, 2.0]],
    [[0.0, -2.5], [0.5, -1.0]],
];

/// Centre of the out-of-distribution Gaussian: above the classes, on the
/// boundary between classes 0 and 1, where bootstrap members disagree.
const OOD_CENTRE: [f64; 2] = [0.0, 9.0];

fn features(x: [f64; 2]) -> [f64; FEATURES] {
    [1.0, x[0], x[1], x[0] * x[0] / 4.0, x[1] * x[1] / 4.0, x[0] * x[1] / 4.0]
}

fn sample_class(rng: &mut ChaCha20Rng, class: usize, sd: f64) -> [f64; 2] {
    let c = CENTRES[class][rng.gen_range(0..2)];
    let n = Normal::new(0.0, sd).unwrap();
    [c[0] + n.sample(rng), c[1] + n.sample(rng)]
}

fn labelled(rng: &mut ChaCha20Rng, n: usize, sd: f64) -> Vec<([f64; 2], usize)> {
    (0..n)
        .map(|_| {
            let y = rng.gen_range(0..K);
            (sample_class(rng, y, sd), y)
        })
        .collect()
}

type Weights = [[f64; FEATURES]; K];

fn logits(w: &Weights, x: [f64; 2]) -> [f64; K] {
    let f = features(x);
    let mut out = [0.0; K];
    for (o, wk) in out.iter_mut().zip(w) {
        *o = wk.iter().zip(&f).map(|(a, b)| a * b).sum();
    }
    out
}

fn fit(data: &[([f64; 2], usize)], rng: &mut ChaCha20Rng) -> Weights {
    let init = Normal::new(0.0, 0.1).unwrap();
    let mut w = [[0.0; FEATURES]; K];
    for row in w.iter_mut() {
        for v in row.iter_mut() {
            *v = init.sample(rng);
        }
    }
    let lr = 0.5;
    let l2 = 1e-3;
    for _ in 0..400 {
        let mut grad = [[0.0; FEATURES]; K];
        for &(x, y) in data {
            let z = logits(&w, x);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            let f = features(x);
            for k in 0..K {
                let d = e[k] / s - if k == y { 1.0 } else { 0.0 };
                for j in 0..FEATURES {
                    grad[k][j] += d * f[j];
                }
            }
        }
        for k in 0..K {
            for j in 0..FEATURES {
                w[k][j] -= lr * (grad[k][j] / data.len() as f64 + l2 * w[k][j]);
            }
        }
    }
    w
}

fn ensemble(models: &[Weights], xs: &[[f64; 2]]) -> EnsemblePredictions {
    let mut values = Vec::with_capacity(models.len() * xs.len() * K);
    for w in models {
        for &x in xs {
            values.extend_from_slice(&logits(w, x));
        }
    }
    EnsemblePredictions::new(models.len(), xs.len(), K, ValueKind::Logits, 1.0, values).unwrap()
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);

    let train = labelled(&mut rng, TRAIN, 0.6);
    let models: Vec<Weights> = (0..MEMBERS)
        .map(|_| {
            let boot: Vec<_> = (0..train.len()).map(|_| *train.choose(&mut rng).unwrap()).collect();
            fit(&boot, &mut rng)
        })
        .collect();

    let test: Vec<[f64; 2]> = labelled(&mut rng, TEST, 0.6).into_iter().map(|(x, _)| x).collect();
    let shift = Normal::new(0.0, 0.7).unwrap();
    let ood: Vec<[f64; 2]> = (0..TEST)
        .map(|_| {
            [
                OOD_CENTRE[0] + shift.sample(&mut rng),
                OOD_CENTRE[1] + shift.sample(&mut rng),
            ]
        })
        .collect();
    let noisy = labelled(&mut rng, TEST, 1.6);
    let noisy_x: Vec<[f64; 2]> = noisy.iter().map(|(x, _)| *x).collect();

    write_ensemble(out.join("in_dist.uqt"), &ensemble(&models, &test)).unwrap();
    write_ensemble(out.join("ood.uqt"), &ensemble(&models, &ood)).unwrap();
    write_ensemble(out.join("noisy.uqt"), &ensemble(&models, &noisy_x)).unwrap();
    let labels: String = std::iter::once("label".to_string())
        .chain(noisy.iter().map(|(_, y)| y.to_string()))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(out.join("noisy_labels.csv"), labels + "\n").unwrap();
    println!("wrote fixtures to {}", out.display());
}
