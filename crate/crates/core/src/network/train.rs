//! Full-batch Adam on a flattened copy of the network.

use serde::{Deserialize, Serialize};

use super::{Activation, SymbolicNetwork, LOG_FLOOR};
use crate::dataset::Sample;
use crate::dimensional::evaluate_group;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Regression loss. Networks whose output neuron is exponential are fitted
/// in log space, where a multiplicative formula becomes linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    LogMse,
}

impl LossKind {
    pub fn for_network(net: &SymbolicNetwork) -> Self {
        if net.output_neuron().activation == Activation::Exp {
            LossKind::LogMse
        } else {
            LossKind::Mse
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_kind: LossKind,
    /// Loss stayed non-finite; the candidate cannot be ranked.
    pub dead: bool,
}

/// Row-major input-group values with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    width: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl TrainingData {
    pub fn from_pairs(rows: &[(Vec<f64>, f64)]) -> Self {
        let width = rows.first().map_or(0, |r| r.0.len());
        let mut inputs = Vec::with_capacity(width * rows.len());
        let mut targets = Vec::with_capacity(rows.len());
        for (x, y) in rows {
            assert_eq!(x.len(), width, "ragged training rows");
            inputs.extend_from_slice(x);
            targets.push(*y);
        }
        TrainingData { width, inputs, targets }
    }

    /// Input groups and output-group targets of `net` evaluated on samples.
    pub fn for_network(net: &SymbolicNetwork, samples: &[Sample]) -> Self {
        let width = net.inputs.len();
        let mut inputs = Vec::with_capacity(width * samples.len());
        let mut targets = Vec::with_capacity(samples.len());
        for s in samples {
            inputs.extend(net.inputs.iter().map(|g| evaluate_group(g, s)));
            targets.push(evaluate_group(&net.output, s));
        }
        TrainingData { width, inputs, targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.width..(i + 1) * self.width]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// The network laid out as a flat neuron list. Value slots `0..width` hold
/// inputs and slot `width + j` holds neuron `j`.
struct Flat {
    width: usize,
    activation: Vec<Activation>,
    edge_range: Vec<(usize, usize)>,
    edge_source: Vec<usize>,
    edge_param: Vec<usize>,
    bias_param: Vec<usize>,
    n_params: usize,
}

impl Flat {
    fn new(net: &SymbolicNetwork) -> Self {
        let width = net.inputs.len();
        let mut flat = Flat {
            width,
            activation: Vec::new(),
            edge_range: Vec::new(),
            edge_source: Vec::new(),
            edge_param: Vec::new(),
            bias_param: Vec::new(),
            n_params: 0,
        };
        let mut layer_base = 0usize;
        let mut next_base = width;
        let mut p = 0usize;
        for layer in &net.layers {
            for n in layer {
                let start = flat.edge_source.len();
                for e in &n.inputs {
                    flat.edge_source.push(layer_base + e.source);
                    flat.edge_param.push(p);
                    p += 1;
                }
                flat.edge_range.push((start, flat.edge_source.len()));
                flat.bias_param.push(p);
                p += 1;
                flat.activation.push(n.activation);
            }
            layer_base = next_base;
            next_base += layer.len();
        }
        flat.n_params = p;
        flat
    }

    fn n_values(&self) -> usize {
        self.width + self.activation.len()
    }

    #[inline]
    fn forward(&self, params: &[f64], x: &[f64], vals: &mut [f64], pre: &mut [f64]) -> f64 {
        vals[..self.width].copy_from_slice(x);
        for j in 0..self.activation.len() {
            let (a, b) = self.edge_range[j];
            let mut z = params[self.bias_param[j]];
            for e in a..b {
                z += params[self.edge_param[e]] * vals[self.edge_source[e]];
            }
            pre[j] = z;
            vals[self.width + j] = self.activation[j].apply(z);
        }
        vals[self.n_values() - 1]
    }

    #[inline]
    fn backward(&self, params: &[f64], vals: &[f64], pre: &[f64], seed: f64, gv: &mut [f64], grad: &mut [f64]) {
        gv.iter_mut().for_each(|g| *g = 0.0);
        let last = self.n_values() - 1;
        gv[last] = seed;
        for j in (0..self.activation.len()).rev() {
            let slot = self.width + j;
            let upstream = gv[slot];
            if upstream == 0.0 {
                continue;
            }
            let g = upstream * self.activation[j].derivative(pre[j], vals[slot]);
            if g == 0.0 {
                continue;
            }
            grad[self.bias_param[j]] += g;
            let (a, b) = self.edge_range[j];
            for e in a..b {
                let src = self.edge_source[e];
                grad[self.edge_param[e]] += g * vals[src];
                if src >= self.width {
                    gv[src] += g * params[self.edge_param[e]];
                }
            }
        }
    }
}

struct Workspace {
    vals: Vec<f64>,
    pre: Vec<f64>,
    gv: Vec<f64>,
}

impl Workspace {
    fn new(flat: &Flat) -> Self {
        Workspace {
            vals: vec![0.0; flat.n_values()],
            pre: vec![0.0; flat.activation.len()],
            gv: vec![0.0; flat.n_values()],
        }
    }
}

/// Residual and d(loss term)/d(prediction) for one row.
#[inline]
fn residual(kind: LossKind, pred: f64, target: f64) -> (f64, f64) {
    match kind {
        LossKind::Mse => {
            let r = pred - target;
            (r * r, 2.0 * r)
        }
        LossKind::LogMse => {
            let p = pred.max(LOG_FLOOR);
            let r = p.ln() - target.ln();
            let dp = if pred > LOG_FLOOR { 2.0 * r / pred } else { 0.0 };
            (r * r, dp)
        }
    }
}

fn evaluate(
    flat: &Flat,
    params: &[f64],
    data: &TrainingData,
    kind: LossKind,
    ws: &mut Workspace,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|x| *x = 0.0);
    }
    let n = data.len() as f64;
    let mut total = 0.0;
    for i in 0..data.len() {
        let pred = flat.forward(params, data.row(i), &mut ws.vals, &mut ws.pre);
        let (sq, dp) = residual(kind, pred, data.targets[i]);
        total += sq;
        if let Some(g) = grad.as_deref_mut() {
            flat.backward(params, &ws.vals, &ws.pre, dp / n, &mut ws.gv, g);
        }
    }
    total / n
}

/// Mean loss of `net` on `data` under `kind`.
pub fn loss(net: &SymbolicNetwork, data: &TrainingData, kind: LossKind) -> f64 {
    let flat = Flat::new(net);
    let mut ws = Workspace::new(&flat);
    evaluate(&flat, &net.params(), data, kind, &mut ws, None)
}

/// Loss and its gradient with respect to [`SymbolicNetwork::params`].
pub fn loss_and_gradient(net: &SymbolicNetwork, data: &TrainingData, kind: LossKind) -> (f64, Vec<f64>) {
    let flat = Flat::new(net);
    let mut ws = Workspace::new(&flat);
    let mut grad = vec![0.0; flat.n_params];
    let l = evaluate(&flat, &net.params(), data, kind, &mut ws, Some(&mut grad));
    (l, grad)
}

/// Trains `net` in place and keeps the lowest-loss parameters visited, so the
/// final loss never exceeds the initial one.
pub fn train(net: &mut SymbolicNetwork, data: &TrainingData, config: &TrainConfig) -> TrainOutcome {
    let kind = LossKind::for_network(net);
    let flat = Flat::new(net);
    let mut ws = Workspace::new(&flat);
    let mut params = net.params();
    let mut grad = vec![0.0; flat.n_params];
    let mut m = vec![0.0; flat.n_params];
    let mut v = vec![0.0; flat.n_params];

    let initial = evaluate(&flat, &params, data, kind, &mut ws, Some(&mut grad));
    if !initial.is_finite() || data.is_empty() {
        return TrainOutcome {
            initial_loss: initial,
            final_loss: initial,
            loss_kind: kind,
            dead: true,
        };
    }
    let mut best = initial;
    let mut best_params = params.clone();
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for epoch in 0..config.epochs {
        b1t *= config.beta1;
        b2t *= config.beta2;
        let mut moved = false;
        for k in 0..params.len() {
            let g = grad[k];
            if !g.is_finite() {
                continue;
            }
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
            let mhat = m[k] / (1.0 - b1t);
            let vhat = v[k] / (1.0 - b2t);
            let step = config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
            if step != 0.0 {
                params[k] -= step;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        let last = epoch + 1 == config.epochs;
        let l = evaluate(&flat, &params, data, kind, &mut ws, (!last).then_some(&mut grad[..]));
        if l.is_finite() && l < best {
            best = l;
            best_params.copy_from_slice(&params);
        }
    }
    net.set_params(&best_params);
    TrainOutcome {
        initial_loss: initial,
        final_loss: best,
        loss_kind: kind,
        dead: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimensional::CandidateSet;
    use crate::network::{Edge, Neuron};

    fn two_layer(a0: Activation, a1: Activation, out: Activation) -> SymbolicNetwork {
        let c = CandidateSet::ldc();
        SymbolicNetwork {
            inputs: vec![c.inputs[0].clone(), c.inputs[1].clone()],
            output: c.outputs[2].clone(),
            layers: vec![
                vec![
                    Neuron::new(a0, vec![Edge { source: 0, weight: 0.7 }], 0.1),
                    Neuron::new(a1, vec![Edge { source: 1, weight: -0.4 }], 0.2),
                ],
                vec![Neuron::new(
                    out,
                    vec![Edge { source: 0, weight: 0.3 }, Edge { source: 1, weight: 0.5 }],
                    -0.2,
                )],
            ],
        }
    }

    fn data() -> TrainingData {
        let rows: Vec<(Vec<f64>, f64)> = (0..12)
            .map(|i| {
                let x = 1.0 + i as f64 * 0.37;
                let y = 0.5 + (i % 5) as f64 * 0.21;
                (vec![x, y], 2.0 * x / y)
            })
            .collect();
        TrainingData::from_pairs(&rows)
    }

    fn finite_difference(net: &SymbolicNetwork, data: &TrainingData, kind: LossKind) -> Vec<f64> {
        let p = net.params();
        let mut out = Vec::new();
        for k in 0..p.len() {
            let h = 1e-6 * p[k].abs().max(1.0);
            let mut plus = net.clone();
            let mut q = p.clone();
            q[k] += h;
            plus.set_params(&q);
            let mut minus = net.clone();
            q[k] = p[k] - h;
            minus.set_params(&q);
            out.push((loss(&plus, data, kind) - loss(&minus, data, kind)) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradient_matches_finite_difference() {
        use Activation::*;
        let d = data();
        for (a0, a1, out) in [
            (LogAbs, LogAbs, Exp),
            (Identity, Sigmoid, Identity),
            (Exp, Identity, Sigmoid),
            (Sigmoid, LogAbs, Identity),
        ] {
            let net = two_layer(a0, a1, out);
            for kind in [LossKind::Mse, LossKind::LogMse] {
                let (_, g) = loss_and_gradient(&net, &d, kind);
                let fd = finite_difference(&net, &d, kind);
                for (a, b) in g.iter().zip(&fd) {
                    let rel = (a - b).abs() / b.abs().max(1e-3);
                    assert!(rel < 1e-5, "{a0:?}/{a1:?}/{out:?} {kind:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn recovers_power_law_in_log_space() {
        let mut net = two_layer(Activation::LogAbs, Activation::LogAbs, Activation::Exp);
        net.layers[0][0].bias = 0.0;
        net.layers[0][1].bias = 0.0;
        let d = data();
        let cfg = TrainConfig {
            epochs: 20000,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let out = train(&mut net, &d, &cfg);
        assert_eq!(out.loss_kind, LossKind::LogMse);
        assert!(out.final_loss < 1e-4, "loss {}", out.final_loss);
        // ln|a·x| = ln|a| + ln|x|: the exponent of x is the outer weight
        let kx = net.layers[1][0].inputs[0].weight;
        assert!((kx - 1.0).abs() < 0.02, "{kx} loss {}", out.final_loss);
    }

    #[test]
    fn final_never_exceeds_initial() {
        let d = data();
        for out in Activation::ALL {
            let mut net = two_layer(Activation::Identity, Activation::Sigmoid, out);
            let r = train(&mut net, &d, &TrainConfig { epochs: 50, ..Default::default() });
            assert!(r.final_loss <= r.initial_loss);
            assert!((loss(&net, &d, r.loss_kind) - r.final_loss).abs() <= 1e-12 * r.final_loss.max(1.0));
        }
    }

    #[test]
    fn non_positive_targets_kill_log_loss() {
        let mut net = two_layer(Activation::LogAbs, Activation::LogAbs, Activation::Exp);
        let d = TrainingData::from_pairs(&[(vec![1.0, 1.0], -1.0), (vec![2.0, 1.0], 1.0)]);
        let r = train(&mut net, &d, &TrainConfig::default());
        assert!(r.dead);
    }
}
