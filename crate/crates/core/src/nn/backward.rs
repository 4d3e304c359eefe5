use crate::data::BatchViews;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::loss::{masked_cross_entropy, symmetric_kl, PosteriorMatrix};
use crate::nn::model::{ForwardTrace, MlpModel, ParamBuffers};
use crate::scalar::Scalar;

/// Gradients of a scalar objective with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub params: ParamBuffers<T>,
    pub loss: T,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros(layer_dims: &[usize]) -> Self {
        Self { params: ParamBuffers::zeros(layer_dims), loss: T::zero() }
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.params.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.params.biases
    }

    pub fn max_abs(&self) -> T {
        self.params.tensors().flatten().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Weighting of the two loss terms for one batch.
///
/// `alpha` weights the consistency term and `1 - alpha` the supervision term.
/// `selected` marks the rows that contribute to supervision. With
/// `supervise_strong = false` only the weak view is supervised.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a, T> {
    pub alpha: T,
    pub selected: &'a [bool],
    pub supervise_strong: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub supervision: T,
    pub consistency: T,
    pub total: T,
}

/// Gradient of the combined objective with respect to all parameters.
///
/// Forward passes both views, then backpropagates supervision through the
/// selected rows and consistency through both views.
pub fn backward<T: Scalar>(
    model: &MlpModel<T>,
    views: &BatchViews<T>,
    selected: &[bool],
    alpha: T,
) -> Result<GradientSet<T>> {
    let weak = model.forward_trace(&views.weak)?;
    let strong = model.forward_trace(&views.strong)?;
    let objective = Objective { alpha, selected, supervise_strong: true };
    Ok(backward_from_traces(model, &weak, &strong, &views.labels, &objective)?.0)
}

pub fn backward_from_traces<T: Scalar>(
    model: &MlpModel<T>,
    weak: &ForwardTrace<T>,
    strong: &ForwardTrace<T>,
    labels: &[usize],
    objective: &Objective<'_, T>,
) -> Result<(GradientSet<T>, LossBreakdown<T>)> {
    let alpha = objective.alpha;
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let (pw, ps) = (&weak.posteriors, &strong.posteriors);
    let b = pw.batch_size();
    if ps.batch_size() != b || objective.selected.len() != b || labels.len() != b {
        return Err(Error::input("views, labels and selection must be index-aligned"));
    }

    let mut supervision = masked_cross_entropy(pw, labels, objective.selected)?;
    if objective.supervise_strong {
        supervision += masked_cross_entropy(ps, labels, objective.selected)?;
    }
    let consistency = symmetric_kl(pw, ps)?;
    let total = alpha * consistency + (T::one() - alpha) * supervision;

    let c = pw.num_classes();
    let mut dz_weak = Matrix::zeros(b, c);
    let mut dz_strong = Matrix::zeros(b, c);

    let selected_count = objective.selected.iter().filter(|&&s| s).count();
    let sup_weight = T::one() - alpha;
    if selected_count > 0 && sup_weight > T::zero() {
        let scale = sup_weight / T::lit(selected_count as f64);
        add_ce_grad(&mut dz_weak, pw, labels, objective.selected, scale);
        if objective.supervise_strong {
            add_ce_grad(&mut dz_strong, ps, labels, objective.selected, scale);
        }
    }
    if alpha > T::zero() && b > 0 {
        add_skl_grad(&mut dz_weak, &mut dz_strong, pw, ps, alpha / T::lit(b as f64));
    }

    let mut grads = GradientSet::zeros(model.layer_dims());
    grads.loss = total;
    backprop(model, weak, dz_weak, &mut grads.params)?;
    backprop(model, strong, dz_strong, &mut grads.params)?;
    Ok((grads, LossBreakdown { supervision, consistency, total }))
}

/// d/dz of `scale * -ln max(p_y, floor)` is `scale * (p - e_y)` above the floor, zero below.
fn add_ce_grad<T: Scalar>(dz: &mut Matrix<T>, p: &PosteriorMatrix<T>, labels: &[usize], selected: &[bool], scale: T) {
    let floor = T::prob_floor();
    for (i, (&y, _)) in labels.iter().zip(selected).enumerate().filter(|(_, (_, &s))| s) {
        if p.get(i, y) < floor {
            continue;
        }
        let row = dz.row_mut(i);
        for (k, d) in row.iter_mut().enumerate() {
            let target = if k == y { T::one() } else { T::zero() };
            *d += scale * (p.get(i, k) - target);
        }
    }
}

/// Per row, `f = sum_l (p_l - q_l)(ln p~_l - ln q~_l)`; pulled back through each softmax.
fn add_skl_grad<T: Scalar>(
    dz_p: &mut Matrix<T>,
    dz_q: &mut Matrix<T>,
    p: &PosteriorMatrix<T>,
    q: &PosteriorMatrix<T>,
    scale: T,
) {
    let floor = T::prob_floor();
    let c = p.num_classes();
    let mut gp = vec![T::zero(); c];
    let mut gq = vec![T::zero(); c];
    for i in 0..p.batch_size() {
        let (pr, qr) = (p.row(i), q.row(i));
        for l in 0..c {
            let log_ratio = pr[l].max(floor).ln() - qr[l].max(floor).ln();
            let diff = pr[l] - qr[l];
            gp[l] = log_ratio + if pr[l] >= floor { diff / pr[l] } else { T::zero() };
            gq[l] = -log_ratio - if qr[l] >= floor { diff / qr[l] } else { T::zero() };
        }
        softmax_pullback(dz_p.row_mut(i), pr, &gp, scale);
        softmax_pullback(dz_q.row_mut(i), qr, &gq, scale);
    }
}

fn softmax_pullback<T: Scalar>(dz: &mut [T], p: &[T], g: &[T], scale: T) {
    let inner: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
    for ((d, &pk), &gk) in dz.iter_mut().zip(p).zip(g) {
        *d += scale * pk * (gk - inner);
    }
}

/// Accumulate parameter gradients for one view given d(loss)/d(logits).
fn backprop<T: Scalar>(
    model: &MlpModel<T>,
    trace: &ForwardTrace<T>,
    mut dz: Matrix<T>,
    grads: &mut ParamBuffers<T>,
) -> Result<()> {
    if !dz.is_finite() {
        return Err(Error::Numeric { layer: model.num_layers() - 1, detail: "non-finite output gradient".into() });
    }
    for l in (0..model.num_layers()).rev() {
        let a = &trace.inputs[l];
        let w = &model.params().weights[l];
        let (out_dim, in_dim) = w.shape();
        let dw = &mut grads.weights[l];
        let db = &mut grads.biases[l];
        for i in 0..a.rows() {
            let (ai, dzi) = (a.row(i), dz.row(i));
            for o in 0..out_dim {
                let g = dzi[o];
                if g == T::zero() {
                    continue;
                }
                db[o] += g;
                let dwo = dw.row_mut(o);
                for k in 0..in_dim {
                    dwo[k] += g * ai[k];
                }
            }
        }
        if l == 0 {
            break;
        }
        let mut da = Matrix::zeros(a.rows(), in_dim);
        for i in 0..a.rows() {
            let (ai, dzi) = (a.row(i), dz.row(i));
            let dai = da.row_mut(i);
            for o in 0..out_dim {
                let g = dzi[o];
                if g == T::zero() {
                    continue;
                }
                let wo = w.row(o);
                for k in 0..in_dim {
                    dai[k] += g * wo[k];
                }
            }
            // ReLU gate: the stored activation is zero exactly where the unit was off.
            for (d, &act) in dai.iter_mut().zip(ai) {
                if act <= T::zero() {
                    *d = T::zero();
                }
            }
        }
        if !da.is_finite() {
            return Err(Error::Numeric { layer: l, detail: "non-finite backpropagated gradient".into() });
        }
        dz = da;
    }
    if !grads.is_finite() {
        return Err(Error::Numeric { layer: 0, detail: "non-finite parameter gradient".into() });
    }
    Ok(())
}
