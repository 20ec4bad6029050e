//! Named parameter tensors with deterministic initialization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::degrade::Prng;
use crate::error::{config_err, Result};
use crate::tensor::{Scalar, Shape, Tape, Tensor, Var};

/// Position of a parameter in its [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal with the given standard deviation, redrawn outside ±2σ.
    TruncNormal(f64),
}

/// Insertion-ordered map from hierarchical names to `f32` tensors.
/// Equality compares names and values; the seed only drives initialization.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    seed: u64,
    names: Vec<String>,
    tensors: Vec<Tensor<f32>>,
    index: HashMap<String, usize>,
}

impl PartialEq for ParameterStore {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.tensors == other.tensors
    }
}

impl ParameterStore {
    /// Empty store; random initializers draw from streams keyed by `seed`
    /// and the parameter name.
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, shape: Shape, init: Init) -> Result<ParamId> {
        let tensor = match init {
            Init::Zeros => Tensor::zeros(shape),
            Init::Ones => Tensor::full(shape, 1.0),
            Init::TruncNormal(std) => {
                let mut rng = Prng::new(self.seed, name);
                Tensor::from_fn(shape, |_| loop {
                    let z = rng.normal();
                    if z.abs() <= 2.0 {
                        break (z * std) as f32;
                    }
                })
            }
        };
        self.insert(name, tensor)
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<f32>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(config_err!("duplicate parameter name {name:?}"));
        }
        let id = self.names.len();
        self.index.insert(name.to_string(), id);
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: ParamId) -> &Tensor<f32> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<f32> {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<f32>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<f32>> {
        self.id(name).map(|id| &mut self.tensors[id.0])
    }

    pub fn tensors(&self) -> &[Tensor<f32>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Places every parameter on `tape`, as trainable leaves or constants.
    pub fn bind<T: Scalar>(&self, tape: &mut Tape<T>, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| {
                let v = t.cast::<T>();
                if trainable {
                    tape.param(v)
                } else {
                    tape.constant(v)
                }
            })
            .collect()
    }

    /// Places parameters on `tape` from explicit tensors (same order and
    /// shapes as the store), e.g. double-precision copies for checking.
    pub fn bind_values<T: Scalar>(tape: &mut Tape<T>, values: &[Tensor<T>]) -> Vec<Var> {
        values.iter().map(|t| tape.param(t.clone())).collect()
    }
}
