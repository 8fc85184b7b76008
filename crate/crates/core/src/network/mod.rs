//! Layered networks whose neurons apply symbolic primitives. A trained
//! network is a closed-form formula: topology is the functional form and
//! weights are its parameters.

mod expr;
mod train;

pub use expr::{decode, extract_power_law, fit_power_law, simplify, Expression, FitData, PowerLaw, PowerLawSource};
pub use train::{
    loss, loss_and_gradient, train, LossKind, TrainConfig, TrainOutcome, TrainingData,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;
use crate::dimensional::{evaluate_group, PiGroup};

/// Floor applied to |x| before taking a logarithm.
pub const LOG_FLOOR: f64 = 1e-12;
/// Exponential arguments are clamped to ±this value.
pub const EXP_CLAMP: f64 = 60.0;

pub fn guarded_exp(x: f64) -> f64 {
    x.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

pub fn guarded_ln_abs(x: f64) -> f64 {
    x.abs().max(LOG_FLOOR).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + guarded_exp(-x))
}

/// The activation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    /// a1(x) = 1
    #[serde(rename = "a1")]
    Const,
    /// a2(x) = x
    #[serde(rename = "a2")]
    Identity,
    /// a3(x) = exp(x)
    #[serde(rename = "a3")]
    Exp,
    /// a4(x) = ln|x|
    #[serde(rename = "a4")]
    LogAbs,
    /// a5(x) = 1 / (1 + exp(-x))
    #[serde(rename = "a5")]
    Sigmoid,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Const,
        Activation::Identity,
        Activation::Exp,
        Activation::LogAbs,
        Activation::Sigmoid,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Activation::Const => "a1",
            Activation::Identity => "a2",
            Activation::Exp => "a3",
            Activation::LogAbs => "a4",
            Activation::Sigmoid => "a5",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Const => 1.0,
            Activation::Identity => z,
            Activation::Exp => guarded_exp(z),
            Activation::LogAbs => guarded_ln_abs(z),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// d activation / dz given the pre-activation `z` and output `a`.
    /// Guarded regions have zero slope.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Const => 0.0,
            Activation::Identity => 1.0,
            Activation::Exp => {
                if z.abs() <= EXP_CLAMP {
                    a
                } else {
                    0.0
                }
            }
            Activation::LogAbs => {
                if z.abs() > LOG_FLOOR {
                    1.0 / z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                if z.abs() <= EXP_CLAMP {
                    a * (1.0 - a)
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Input slot (first layer) or neuron index in the previous layer.
    pub source: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub activation: Activation,
    pub inputs: Vec<Edge>,
    pub bias: f64,
}

impl Neuron {
    pub fn new(activation: Activation, inputs: Vec<Edge>, bias: f64) -> Self {
        Neuron {
            activation,
            inputs,
            bias,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("network has no layers")]
    NoLayers,
    #[error("output layer must hold exactly one neuron, found {0}")]
    OutputWidth(usize),
    #[error("network depth {depth} does not match topology depth {expected}")]
    Depth { depth: usize, expected: usize },
    #[error("layer {layer} has {size} neurons, bound is {bound}")]
    LayerTooWide { layer: usize, size: usize, bound: usize },
    #[error("layer {layer} is empty")]
    EmptyLayer { layer: usize },
    #[error("neuron {neuron} in layer {layer} reads missing source {source_index}")]
    DanglingEdge { layer: usize, neuron: usize, source_index: usize },
    #[error("non-finite parameter in layer {layer}")]
    NonFinite { layer: usize },
    #[error("output group must carry a dependent variable")]
    NotAnOutputGroup,
}

/// A candidate formula. `inputs` are the dimensionless groups fed to the
/// first layer; `output` is the normalized target the network predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicNetwork {
    pub inputs: Vec<PiGroup>,
    pub output: PiGroup,
    pub layers: Vec<Vec<Neuron>>,
}

impl SymbolicNetwork {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_neuron(&self) -> &Neuron {
        &self.layers.last().expect("network has layers")[0]
    }

    pub fn neurons(&self) -> impl Iterator<Item = &Neuron> {
        self.layers.iter().flatten()
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.neurons().map(|n| n.inputs.len()).sum()
    }

    /// Edges with a non-zero weight.
    pub fn active_edge_count(&self) -> usize {
        self.neurons().flat_map(|n| &n.inputs).filter(|e| e.weight != 0.0).count()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// Structural checks; with `topology`, also the depth and per-layer
    /// width bounds.
    pub fn validate(&self, topology: Option<&[usize]>) -> Result<(), NetworkError> {
        if self.layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        let out_width = self.layers.last().map_or(0, Vec::len);
        if out_width != 1 {
            return Err(NetworkError::OutputWidth(out_width));
        }
        if !self.output.is_output() {
            return Err(NetworkError::NotAnOutputGroup);
        }
        if let Some(bounds) = topology {
            if bounds.len() != self.layers.len() {
                return Err(NetworkError::Depth {
                    depth: self.layers.len(),
                    expected: bounds.len(),
                });
            }
            for (layer, (l, &b)) in self.layers.iter().zip(bounds).enumerate() {
                if l.len() > b {
                    return Err(NetworkError::LayerTooWide {
                        layer,
                        size: l.len(),
                        bound: b,
                    });
                }
            }
        }
        for (li, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(NetworkError::EmptyLayer { layer: li });
            }
            let sources = if li == 0 { self.inputs.len() } else { self.layers[li - 1].len() };
            for (ni, n) in layer.iter().enumerate() {
                if !n.bias.is_finite() || n.inputs.iter().any(|e| !e.weight.is_finite()) {
                    return Err(NetworkError::NonFinite { layer: li });
                }
                if let Some(e) = n.inputs.iter().find(|e| e.source >= sources) {
                    return Err(NetworkError::DanglingEdge {
                        layer: li,
                        neuron: ni,
                        source_index: e.source,
                    });
                }
            }
        }
        Ok(())
    }

    /// Values of the input groups at a sample.
    pub fn input_values(&self, sample: &Sample) -> Vec<f64> {
        self.inputs.iter().map(|g| evaluate_group(g, sample)).collect()
    }

    /// Layered evaluation on input-group values: each neuron outputs
    /// activation(bias + Σ wᵢ·inᵢ).
    pub fn forward(&self, inputs: &[f64]) -> f64 {
        let mut prev: Vec<f64> = inputs.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.clear();
            for n in layer {
                let mut z = n.bias;
                for e in &n.inputs {
                    z += e.weight * prev[e.source];
                }
                next.push(n.activation.apply(z));
            }
            std::mem::swap(&mut prev, &mut next);
        }
        prev[0]
    }

    /// Predicted value of the dimensionless output group.
    pub fn forward_sample(&self, sample: &Sample) -> f64 {
        self.forward(&self.input_values(sample))
    }

    /// Predicted dependent variable: network output times the normalizer.
    pub fn predict(&self, sample: &Sample) -> f64 {
        self.forward_sample(sample) * self.output.normalizer_value(sample)
    }

    /// Parameters in layer order; per neuron its edge weights then its bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for n in self.neurons() {
            p.extend(n.inputs.iter().map(|e| e.weight));
            p.push(n.bias);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for n in self.layers.iter_mut().flatten() {
            for e in &mut n.inputs {
                e.weight = it.next().expect("parameter vector too short");
            }
            n.bias = it.next().expect("parameter vector too short");
        }
        assert!(it.next().is_none(), "parameter vector too long");
    }

    /// True when every non-output neuron feeds exactly one neuron of the
    /// next layer, so the network is a tree rooted at the output.
    pub fn is_tree(&self) -> bool {
        for l in 1..self.layers.len() {
            let mut fan_out = vec![0usize; self.layers[l - 1].len()];
            for n in &self.layers[l] {
                for e in &n.inputs {
                    fan_out[e.source] += 1;
                }
            }
            if fan_out.iter().any(|&f| f != 1) {
                return false;
            }
        }
        true
    }
}
