//! Finite-difference verification of tape gradients.
//!
//! `grad_check_inputs` builds a scalar graph twice over: once with analytic
//! backward, then with central differences `(f(x+h) - f(x-h)) / 2h` at
//! `h = 1e-5` on a sampled subset of coordinates. The relative error uses a
//! floored denominator so coordinates whose true derivative is zero (dead
//! ReLU units, clamped losses) compare against an absolute scale instead of
//! dividing noise by noise.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Coordinates sampled per input tensor when the tensor is larger than this.
pub const MAX_COORDS_PER_INPUT: usize = 48;
/// Floor for the relative-error denominator.
const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative disagreement across all checked coordinates.
    pub max_rel_err: f64,
    /// Number of coordinates compared.
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_err <= rel_tol
    }
}

/// Compare analytic and numeric gradients of a scalar-valued graph.
///
/// `build` receives a fresh tape and one leaf per entry of `inputs` (in
/// order) and must return a scalar output. Every input participates in the
/// check. Inputs larger than [`MAX_COORDS_PER_INPUT`] are spot-checked on a
/// seeded sample of coordinates so big kernels stay affordable.
pub fn grad_check_inputs<F>(
    build: F,
    inputs: &[(Vec<usize>, Vec<f64>)],
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if inputs.is_empty() {
        return Err(Error::InvalidInput("grad_check_inputs: no inputs given".into()));
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let mut vars = Vec::with_capacity(inputs.len());
    for (shape, data) in inputs {
        vars.push(tape.leaf(shape, data.clone(), true)?);
    }
    let loss = build(&mut tape, &vars)?;
    if tape.value(loss).len() != 1 {
        return Err(Error::InvalidInput(format!(
            "grad_check_inputs: graph output must be scalar, got shape {:?}",
            tape.shape(loss)
        )));
    }
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v).to_vec()).collect();

    // Numeric passes on perturbed copies.
    let eval = |perturbed: &[Vec<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let mut vs = Vec::with_capacity(inputs.len());
        for ((shape, _), data) in inputs.iter().zip(perturbed) {
            vs.push(t.leaf(shape, data.clone(), false)?);
        }
        let out = build(&mut t, &vs)?;
        Ok(t.value(out)[0])
    };

    let mut data: Vec<Vec<f64>> = inputs.iter().map(|(_, d)| d.clone()).collect();
    let mut max_rel_err: f64 = 0.0;
    let mut checked = 0;
    for (idx, (_, original)) in inputs.iter().enumerate() {
        let coords = sample_coords(original.len(), seed ^ (idx as u64).wrapping_mul(0x9E37));
        for &c in &coords {
            let base = original[c];
            data[idx][c] = base + GRAD_CHECK_STEP;
            let up = eval(&data)?;
            data[idx][c] = base - GRAD_CHECK_STEP;
            let down = eval(&data)?;
            data[idx][c] = base;
            let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
            let a = analytic[idx][c];
            let scale = a.abs().max(numeric.abs()).max(SCALE_FLOOR);
            max_rel_err = max_rel_err.max((a - numeric).abs() / scale);
            checked += 1;
        }
    }
    Ok(GradCheckReport { max_rel_err, checked })
}

/// Single-input convenience wrapper.
pub fn grad_check<F>(build: F, shape: &[usize], data: &[f64], seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_inputs(
        |tape, vars| build(tape, vars[0]),
        &[(shape.to_vec(), data.to_vec())],
        seed,
    )
}

fn sample_coords(len: usize, seed: u64) -> Vec<usize> {
    if len <= MAX_COORDS_PER_INPUT {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < MAX_COORDS_PER_INPUT {
        picked.insert(rng.gen_range(0..len));
    }
    picked.into_iter().collect()
}
