//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the crate's loss or forward code: the network is
//! re-evaluated from its raw parameters with plain loops.
#![allow(dead_code)]

use dnfer_core::data::BatchViews;
use dnfer_core::matrix::Matrix;
use dnfer_core::nn::{MlpModel, ParamBuffers};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FLOOR: f64 = 1e-12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random row-stochastic matrix, `b` rows and `c` columns.
pub fn random_probs(rng: &mut ChaCha8Rng, b: usize, c: usize) -> Vec<Vec<f64>> {
    (0..b)
        .map(|_| {
            let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.01..1.0f64).powi(3)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Softmax of `W x + b` through ReLU hidden layers, evaluated from raw parameters.
pub fn naive_forward(model: &MlpModel<f64>, x: &[f64]) -> Vec<f64> {
    let p = model.params();
    let layers = model.num_layers();
    let mut a = x.to_vec();
    for l in 0..layers {
        let w = &p.weights[l];
        let (out, inp) = w.shape();
        let mut z = vec![0.0; out];
        for o in 0..out {
            let mut acc = p.biases[l][o];
            for k in 0..inp {
                acc += w.get(o, k) * a[k];
            }
            z[o] = if l + 1 < layers { acc.max(0.0) } else { acc };
        }
        a = z;
    }
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn naive_ce(p: &[f64], y: usize) -> f64 {
    -p[y].max(FLOOR).ln()
}

pub fn naive_kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for l in 0..p.len() {
        s += p[l] * (p[l].max(FLOOR) / q[l].max(FLOOR)).ln();
    }
    s
}

/// `alpha * mean SKL + (1 - alpha) * (masked CE weak + masked CE strong)`.
pub fn naive_objective(
    model: &MlpModel<f64>,
    weak: &[Vec<f64>],
    strong: &[Vec<f64>],
    labels: &[usize],
    selected: &[bool],
    alpha: f64,
    supervise_strong: bool,
) -> f64 {
    let b = weak.len();
    let pw: Vec<Vec<f64>> = weak.iter().map(|x| naive_forward(model, x)).collect();
    let ps: Vec<Vec<f64>> = strong.iter().map(|x| naive_forward(model, x)).collect();
    let k = selected.iter().filter(|&&s| s).count();
    let mut sup = 0.0;
    if k > 0 {
        let mut w = 0.0;
        let mut s = 0.0;
        for i in 0..b {
            if selected[i] {
                w += naive_ce(&pw[i], labels[i]);
                s += naive_ce(&ps[i], labels[i]);
            }
        }
        sup = w / k as f64 + if supervise_strong { s / k as f64 } else { 0.0 };
    }
    let mut cons = 0.0;
    for i in 0..b {
        cons += naive_kl(&ps[i], &pw[i]) + naive_kl(&pw[i], &ps[i]);
    }
    cons /= b as f64;
    alpha * cons + (1.0 - alpha) * sup
}

pub const H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

pub struct Case {
    pub model: MlpModel<f64>,
    pub weak: Vec<Vec<f64>>,
    pub strong: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub selected: Vec<bool>,
}

pub fn case(seed: u64, dims: &[usize], b: usize) -> Case {
    let mut r = rng(seed);
    let mut model = MlpModel::init(dims, &mut r).unwrap();
    for bias in model.params_mut().biases.iter_mut().flatten() {
        *bias = r.random_range(-0.3..0.3);
    }
    let d = dims[0];
    let c = *dims.last().unwrap();
    let mut rows =
        || (0..b).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect::<Vec<f64>>()).collect::<Vec<_>>();
    let weak = rows();
    let strong = rows();
    let labels = (0..b).map(|_| r.random_range(0..c)).collect();
    let selected = (0..b).map(|_| r.random_bool(0.6)).collect();
    Case { model, weak, strong, labels, selected }
}

pub fn views(c: &Case) -> BatchViews<f64> {
    BatchViews {
        weak: Matrix::from_rows(&c.weak).unwrap(),
        strong: Matrix::from_rows(&c.strong).unwrap(),
        labels: c.labels.clone(),
        true_labels: None,
        sample_ids: (0..c.labels.len()).collect(),
    }
}

/// Largest relative error over all parameters, `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn max_rel_error(c: &Case, analytic: &ParamBuffers<f64>, alpha: f64, strong_sup: bool) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = c.model.clone();
    let n_tensors = analytic.tensors().count();
    for t in 0..n_tensors {
        let len = analytic.tensors().nth(t).unwrap().len();
        for i in 0..len {
            let orig = probe.params().tensors().nth(t).unwrap()[i];
            let eval = |v: f64, probe: &mut MlpModel<f64>| {
                probe.params_mut().tensors_mut().nth(t).unwrap()[i] = v;
                naive_objective(probe, &c.weak, &c.strong, &c.labels, &c.selected, alpha, strong_sup)
            };
            let plus = eval(orig + H, &mut probe);
            let minus = eval(orig - H, &mut probe);
            eval(orig, &mut probe);
            let numeric = (plus - minus) / (2.0 * H);
            let a = analytic.tensors().nth(t).unwrap()[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
