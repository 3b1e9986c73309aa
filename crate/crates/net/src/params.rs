//! Named parameter tensors with seeded initialization.
//!
//! A `ParamStore` owns every trainable tensor of a model in registration
//! order. Models bind the whole store onto a tape at the start of each
//! forward pass (one leaf per tensor), which keeps the tape free of any
//! persistent state: after backward, gradients are harvested from those
//! leaves in the same order.
//!
//! Weight tensors draw from a uniform distribution scaled by fan-in,
//! `U(-sqrt(1/fan_in), sqrt(1/fan_in))`; biases start at zero and
//! normalization scales at one. All draws come from a single counter-based
//! generator seeded once per model, so construction order fixes every
//! initial value bit for bit.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    data: Vec<Vec<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a tensor with explicit contents. Returns its index.
    pub fn add(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) -> Result<usize> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::InvalidInput(format!(
                "parameter {name}: shape {shape:?} wants {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::InvalidInput(format!("duplicate parameter name {name}")));
        }
        self.names.push(name.to_string());
        self.shapes.push(shape);
        self.data.push(data);
        Ok(self.names.len() - 1)
    }

    /// Register a fan-in-scaled uniform weight tensor.
    pub fn add_weight(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        let bound = (1.0 / fan_in as f64).sqrt();
        let n = shape.iter().product::<usize>();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, shape, data)
    }

    /// Register a zero-initialized tensor (biases, shifts).
    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<usize> {
        let n = shape.iter().product::<usize>();
        self.add(name, shape, vec![0.0; n])
    }

    /// Register a ones-initialized tensor (normalization scales).
    pub fn add_ones(&mut self, name: &str, shape: Vec<usize>) -> Result<usize> {
        let n = shape.iter().product::<usize>();
        self.add(name, shape, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn data(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn data_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Total scalar count across all tensors.
    pub fn total_params(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    /// Bind every tensor as a tape leaf, in registration order.
    pub fn bind_all(&self, tape: &mut Tape, requires: bool) -> Result<Vec<Var>> {
        let mut vars = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            vars.push(tape.leaf(&self.shapes[i], self.data[i].clone(), requires)?);
        }
        Ok(vars)
    }

    /// Collect gradients from leaves previously produced by `bind_all`.
    pub fn harvest_grads(&self, tape: &Tape, vars: &[Var]) -> Vec<Vec<f64>> {
        vars.iter().map(|&v| tape.grad(v).to_vec()).collect()
    }

    /// Fresh zero gradient buffers matching every tensor.
    pub fn zero_like(&self) -> Vec<Vec<f64>> {
        self.data.iter().map(|d| vec![0.0; d.len()]).collect()
    }
}
