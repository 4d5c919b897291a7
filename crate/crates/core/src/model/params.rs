//! Parameter plumbing shared by weight loading, random initialization and
//! analytic accounting.
//!
//! Every block constructor pulls its tensors, in a fixed order, from a
//! [`ParamSource`]. Swapping the source turns the same construction code into
//! a loader, an initializer or a layout recorder.

use std::collections::HashSet;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::weights::{ModelWeights, WeightTensor};
use crate::{Error, Result};

/// What a tensor is, which fixes its initializer and whether it is learnable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// Uniform in `±bound`.
    Weight { bound: f32 },
    Bias { bound: f32 },
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
    Slope,
}

impl Kind {
    pub fn learnable(self) -> bool {
        !matches!(self, Kind::RunningMean | Kind::RunningVar)
    }

    fn constant(self) -> Option<f32> {
        match self {
            Kind::Gamma | Kind::RunningVar => Some(1.0),
            Kind::Beta | Kind::RunningMean => Some(0.0),
            Kind::Slope => Some(0.25),
            Kind::Weight { .. } | Kind::Bias { .. } => None,
        }
    }
}

/// `1/sqrt(fan_in)`, the usual default bound for weights and biases.
pub fn fan_in_bound(fan_in: usize) -> f32 {
    1.0 / (fan_in.max(1) as f32).sqrt()
}

pub trait ParamSource {
    fn tensor(&mut self, name: &str, shape: &[usize], kind: Kind) -> Result<Vec<f32>>;

    /// Multiply-accumulates per frame of the layer just built.
    fn macs(&mut self, _layer: &str, _per_frame: u64) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: Kind,
}

impl TensorInfo {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Records the layout without producing meaningful values.
#[derive(Debug, Default)]
pub struct Recorder {
    pub tensors: Vec<TensorInfo>,
    pub layers: Vec<(String, u64)>,
}

impl Recorder {
    pub fn learnable_params(&self) -> usize {
        self.tensors.iter().filter(|t| t.kind.learnable()).map(TensorInfo::numel).sum()
    }

    pub fn macs_per_frame(&self) -> u64 {
        self.layers.iter().map(|(_, m)| m).sum()
    }
}

impl ParamSource for Recorder {
    fn tensor(&mut self, name: &str, shape: &[usize], kind: Kind) -> Result<Vec<f32>> {
        self.tensors.push(TensorInfo { name: name.to_string(), shape: shape.to_vec(), kind });
        Ok(vec![kind.constant().unwrap_or(0.0); shape.iter().product()])
    }

    fn macs(&mut self, layer: &str, per_frame: u64) {
        self.layers.push((layer.to_string(), per_frame));
    }
}

/// Draws fresh values from a seeded generator and keeps them.
pub struct RandomInit {
    rng: ChaCha8Rng,
    pub tensors: IndexMap<String, WeightTensor>,
}

impl RandomInit {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), tensors: IndexMap::new() }
    }
}

impl ParamSource for RandomInit {
    fn tensor(&mut self, name: &str, shape: &[usize], kind: Kind) -> Result<Vec<f32>> {
        let n = shape.iter().product();
        let data: Vec<f32> = match kind {
            Kind::Weight { bound } | Kind::Bias { bound } => (0..n).map(|_| self.rng.random_range(-bound..=bound)).collect(),
            _ => vec![kind.constant().unwrap_or(0.0); n],
        };
        self.tensors.insert(name.to_string(), WeightTensor { shape: shape.to_vec(), data: data.clone() });
        Ok(data)
    }
}

/// Serves tensors from loaded weights, checking names and shapes.
pub struct Loader<'a> {
    weights: &'a ModelWeights,
    used: HashSet<&'a str>,
}

impl<'a> Loader<'a> {
    pub fn new(weights: &'a ModelWeights) -> Self {
        Self { weights, used: HashSet::new() }
    }

    /// Fails if the weights hold tensors the architecture never asked for.
    pub fn finish(self) -> Result<()> {
        match self.weights.tensors().keys().find(|k| !self.used.contains(k.as_str())) {
            Some(extra) => Err(Error::Format(format!("unexpected tensor {extra:?}"))),
            None => Ok(()),
        }
    }
}

impl<'a> ParamSource for Loader<'a> {
    fn tensor(&mut self, name: &str, shape: &[usize], _kind: Kind) -> Result<Vec<f32>> {
        let weights: &'a ModelWeights = self.weights;
        let (_, key, t) = weights
            .tensors()
            .get_full(name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))?;
        if t.shape != shape {
            return Err(Error::Format(format!("tensor {name:?} has shape {:?}, expected {shape:?}", t.shape)));
        }
        self.used.insert(key.as_str());
        Ok(t.data.clone())
    }
}
