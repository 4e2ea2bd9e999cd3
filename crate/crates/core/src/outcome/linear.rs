//! Multinomial logistic regression and a one-vs-rest linear SVM.
//!
//! Both use the same penalty scaling: the data term is a weighted mean over
//! examples and the L2 term is `lambda / (2 S) * |W|^2` with `S` the total
//! sample weight, i.e. `lambda` plays the role of `1 / C` in the usual
//! sum-of-losses formulation. Biases are never penalized.

use std::collections::VecDeque;

use super::{argmax, Parameters, CLASSES};

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 5000;
const LBFGS_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const SVM_EPOCHS: usize = 1000;
const SVM_STEP: f64 = 1.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn active_classes(y: &[usize]) -> Vec<usize> {
    let mut seen = [false; CLASSES];
    for &c in y {
        seen[c] = true;
    }
    (0..CLASSES).filter(|&c| seen[c]).collect()
}

/// Regularized weighted negative log-likelihood of a softmax model over the
/// classes present in `y`.
///
/// Parameters are flattened per class as `[w_c (r values), b_c]`.
pub struct SoftmaxObjective<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    weights: &'a [f64],
    lambda: f64,
    width: usize,
    classes: Vec<usize>,
    total_weight: f64,
}

impl<'a> SoftmaxObjective<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [usize], weights: &'a [f64], lambda: f64, width: usize) -> Self {
        SoftmaxObjective {
            x,
            y,
            weights,
            lambda,
            width,
            classes: active_classes(y),
            total_weight: weights.iter().sum(),
        }
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.classes.len() * (self.width + 1)
    }

    fn block<'p>(&self, params: &'p [f64], k: usize) -> (&'p [f64], f64) {
        let start = k * (self.width + 1);
        (&params[start..start + self.width], params[start + self.width])
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let norm: f64 =
            (0..self.classes.len()).map(|k| self.block(params, k).0.iter().map(|w| w * w).sum::<f64>()).sum();
        self.lambda / (2.0 * self.total_weight) * norm
    }

    /// Log-probabilities for one row, shifted for stability.
    fn log_probs(&self, params: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.classes.len()).map(|k| {
            let (w, b) = self.block(params, k);
            dot(w, x) + b
        }));
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + out.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for z in out.iter_mut() {
            *z -= lse;
        }
    }

    fn position(&self, class: usize) -> usize {
        self.classes.iter().position(|&c| c == class).expect("label is an active class")
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let mut lp = Vec::with_capacity(self.classes.len());
        let mut nll = 0.0;
        for ((x, &y), &w) in self.x.iter().zip(self.y).zip(self.weights) {
            self.log_probs(params, x, &mut lp);
            nll -= w * lp[self.position(y)];
        }
        nll / self.total_weight + self.penalty(params)
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.dim()];
        let mut lp = Vec::with_capacity(self.classes.len());
        let mut nll = 0.0;
        let stride = self.width + 1;
        for ((x, &y), &w) in self.x.iter().zip(self.y).zip(self.weights) {
            self.log_probs(params, x, &mut lp);
            let target = self.position(y);
            nll -= w * lp[target];
            for (k, &l) in lp.iter().enumerate() {
                let residual = w * (l.exp() - f64::from(u8::from(k == target)));
                let g = &mut grad[k * stride..(k + 1) * stride];
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj += residual * xj;
                }
                g[self.width] += residual;
            }
        }
        let s = self.total_weight;
        for k in 0..self.classes.len() {
            for j in 0..self.width {
                let i = k * stride + j;
                grad[i] = grad[i] / s + self.lambda / s * params[i];
            }
            grad[k * stride + self.width] /= s;
        }
        (nll / s + self.penalty(params), grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub params: Vec<f64>,
    /// Loss at the start and after every accepted step.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// L-BFGS from zero with Armijo backtracking along the quasi-Newton
/// direction. Stops when the gradient norm drops below the tolerance, after
/// the iteration cap, or when no step length gives sufficient decrease.
pub fn minimize(objective: &SoftmaxObjective<'_>, tolerance: f64, max_iterations: usize) -> Descent {
    let mut params = vec![0.0; objective.dim()];
    let (mut loss, mut grad) = objective.loss_and_gradient(&params);
    let mut losses = vec![loss];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut iterations = 0;
    let mut converged = false;
    let mut candidate = vec![0.0; params.len()];
    while iterations < max_iterations {
        if dot(&grad, &grad).sqrt() < tolerance {
            converged = true;
            break;
        }
        let mut direction = lbfgs_direction(&grad, &history);
        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            history.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        // The first step has no curvature estimate, so scale it to unit length.
        let mut step = if history.is_empty() { 1.0 / dot(&direction, &direction).sqrt().max(1.0) } else { 1.0 };
        let accepted = loop {
            for ((c, p), d) in candidate.iter_mut().zip(&params).zip(&direction) {
                *c = p + step * d;
            }
            let trial = objective.loss(&candidate);
            if trial <= loss + ARMIJO * step * slope {
                break true;
            }
            step *= 0.5;
            if step < 1e-20 {
                break false;
            }
        };
        if !accepted {
            break;
        }
        let (next_loss, next_grad) = objective.loss_and_gradient(&candidate);
        let s: Vec<f64> = candidate.iter().zip(&params).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut params, &mut candidate);
        (loss, grad) = (next_loss, next_grad);
        losses.push(loss);
        iterations += 1;
    }
    Descent { params, losses, iterations, converged }
}

/// Two-loop recursion: the negated inverse-Hessian estimate applied to `grad`.
fn lbfgs_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

fn empty_linear(width: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<bool>) {
    (vec![vec![0.0; width]; CLASSES], vec![0.0; CLASSES], vec![false; CLASSES])
}

pub(super) fn fit_logistic(x: &[Vec<f64>], y: &[usize], w: &[f64], lambda: f64, width: usize) -> Parameters {
    let objective = SoftmaxObjective::new(x, y, w, lambda, width);
    let descent = minimize(&objective, GRADIENT_TOLERANCE, MAX_ITERATIONS);
    let (mut weights, mut bias, mut active) = empty_linear(width);
    for (k, &c) in objective.classes().iter().enumerate() {
        let (wc, bc) = objective.block(&descent.params, k);
        weights[c] = wc.to_vec();
        bias[c] = bc;
        active[c] = true;
    }
    Parameters::Linear { weights, bias, active }
}

pub(super) fn softmax_probabilities(weights: &[Vec<f64>], bias: &[f64], active: &[bool], x: &[f64]) -> [f64; CLASSES] {
    let z: Vec<f64> = (0..CLASSES).map(|c| dot(&weights[c], x) + bias[c]).collect();
    let max = (0..CLASSES).filter(|&c| active[c]).map(|c| z[c]).fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; CLASSES];
    for c in 0..CLASSES {
        if active[c] {
            p[c] = (z[c] - max).exp();
        }
    }
    p
}

/// Binary hinge objective for one class against the rest.
fn hinge(x: &[Vec<f64>], t: &[f64], w: &[f64], lambda: f64, s: f64, wc: &[f64], b: f64) -> f64 {
    let data: f64 = x.iter().zip(t).zip(w).map(|((xi, ti), wi)| wi * (1.0 - ti * (dot(wc, xi) + b)).max(0.0)).sum();
    data / s + lambda / (2.0 * s) * dot(wc, wc)
}

/// Subgradient descent with step `eta0 / sqrt(t)`, keeping the best iterate.
fn fit_binary_svm(x: &[Vec<f64>], t: &[f64], w: &[f64], lambda: f64, width: usize) -> (Vec<f64>, f64) {
    let s: f64 = w.iter().sum();
    let mut wc = vec![0.0; width];
    let mut b = 0.0;
    let mut best = (hinge(x, t, w, lambda, s, &wc, b), wc.clone(), b);
    let mut gw = vec![0.0; width];
    for epoch in 1..=SVM_EPOCHS {
        for (g, v) in gw.iter_mut().zip(&wc) {
            *g = lambda / s * v;
        }
        let mut gb = 0.0;
        for ((xi, &ti), &wi) in x.iter().zip(t).zip(w) {
            if ti * (dot(&wc, xi) + b) < 1.0 {
                for (g, xj) in gw.iter_mut().zip(xi) {
                    *g -= wi * ti * xj / s;
                }
                gb -= wi * ti / s;
            }
        }
        let eta = SVM_STEP / (epoch as f64).sqrt();
        for (v, g) in wc.iter_mut().zip(&gw) {
            *v -= eta * g;
        }
        b -= eta * gb;
        let j = hinge(x, t, w, lambda, s, &wc, b);
        if j < best.0 {
            best = (j, wc.clone(), b);
        }
    }
    (best.1, best.2)
}

pub(super) fn fit_svm(x: &[Vec<f64>], y: &[usize], w: &[f64], lambda: f64, width: usize) -> Parameters {
    let classes = active_classes(y);
    let (mut weights, mut bias, mut active) = empty_linear(width);
    for &c in &classes {
        active[c] = true;
    }
    if classes.len() > 1 {
        for &c in &classes {
            let t: Vec<f64> = y.iter().map(|&yi| if yi == c { 1.0 } else { -1.0 }).collect();
            let (wc, bc) = fit_binary_svm(x, &t, w, lambda, width);
            weights[c] = wc;
            bias[c] = bc;
        }
    }
    Parameters::Linear { weights, bias, active }
}

/// One-hot on the highest decision value among trained classes.
pub(super) fn svm_probabilities(weights: &[Vec<f64>], bias: &[f64], active: &[bool], x: &[f64]) -> [f64; CLASSES] {
    let scores: Vec<f64> =
        (0..CLASSES).map(|c| if active[c] { dot(&weights[c], x) + bias[c] } else { f64::NEG_INFINITY }).collect();
    let mut p = [0.0; CLASSES];
    p[argmax(&scores)] = 1.0;
    p
}
