//! Adversarial training loop for the coefficient generator.
//!
//! Every step draws one batch and makes two adaptive-moment updates. First
//! the discriminator descends its own loss with the generator frozen,
//!
//! ```text
//! L_D = mean_i [ -log D(B_i) - log(1 - D(G(e_i))) ]
//! ```
//!
//! then the generator descends
//!
//! ```text
//! L_G = mean_i [ log(1 - D(G(e_i))) + lambda * ||B_i - G(e_i)||^2 ]
//! ```
//!
//! against the refreshed discriminator. Probabilities are clamped as in
//! [`Tape::bce`] before any logarithm. The generator's learning rate
//! follows its configured schedule per epoch; the discriminator's stays
//! fixed.
//!
//! Batching shuffles the sample order once per epoch from a seeded stream
//! and drops the final short batch, so every step sees exactly
//! `batch_size` pairs. Per-sample forward/backward work fans out over
//! [`crate::parallel::par_map`]; gradients are averaged in sample order
//! afterwards, which keeps the whole run bit-identical for a fixed seed no
//! matter how many threads participate.
//!
//! After every epoch the current weights overwrite `checkpoint.json` and
//! the accumulated loss traces overwrite `traces.csv` in the output
//! directory. A non-finite loss or gradient aborts the run with a
//! numerical error naming the epoch and step; the previous epoch's
//! checkpoint is left on disk as the last good state.

use std::path::{Path, PathBuf};

use crate::adam::{Adam, AdamConfig};
use crate::checkpoint::save_checkpoint;
use crate::error::{Error, Result};
use crate::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::parallel::par_map;
use crate::schedule::LrSchedule;
use crate::tensor::{Tape, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use superdir_core::dataset::{NormStats, Sample};

// ── configuration ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the reconstruction term in the generator loss.
    pub lambda_recon: f64,
    /// Generator learning rate per epoch.
    pub g_lr: LrSchedule,
    /// Discriminator learning rate, constant over the run.
    pub d_lr: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            seed: 0,
            lambda_recon: 1.0,
            g_lr: LrSchedule::Constant { lr: 4e-4 },
            d_lr: 4e-5,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_samples: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidInput("training needs at least one epoch".into()));
        }
        if self.batch_size == 0 || self.batch_size > num_samples {
            return Err(Error::InvalidInput(format!(
                "batch size {} must lie in 1..={num_samples} (the training-set size)",
                self.batch_size
            )));
        }
        if !(self.lambda_recon.is_finite() && self.lambda_recon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "reconstruction weight must be finite and nonnegative, got {}",
                self.lambda_recon
            )));
        }
        if !(self.d_lr.is_finite() && self.d_lr > 0.0) {
            return Err(Error::InvalidInput(format!(
                "discriminator learning rate must be positive, got {}",
                self.d_lr
            )));
        }
        self.adam.validate()?;
        self.g_lr.validate()?;
        self.g_lr.lr_at(self.epochs - 1).map_err(|_| {
            Error::InvalidInput(format!(
                "learning-rate schedule does not cover epoch {} (the last of {})",
                self.epochs - 1,
                self.epochs
            ))
        })?;
        Ok(())
    }
}

/// One `epoch,step,d_loss,g_loss,g_recon,lr` record of the loss traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Unweighted reconstruction component `mean ||B - G(e)||^2`.
    pub g_recon: f64,
    /// Generator learning rate used at this step.
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub traces: Vec<TraceRow>,
    pub checkpoint_path: PathBuf,
    pub traces_path: PathBuf,
}

// ── standalone losses ──────────────────────────────────────────────────────

/// Mean over the batch of `-log D(real) - log(1 - D(fake))`, the quantity
/// the discriminator update descends. Both batches are plain values here;
/// nothing is differentiated.
pub fn discriminator_loss(
    disc: &Discriminator,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
) -> Result<f64> {
    if real.is_empty() || real.len() != fake.len() {
        return Err(Error::InvalidInput(format!(
            "discriminator loss wants matching nonempty batches, got {} real and {} fake",
            real.len(),
            fake.len()
        )));
    }
    let mut total = 0.0;
    for (r, f) in real.iter().zip(fake) {
        let mut tape = Tape::new();
        let params = disc.store().bind_all(&mut tape, false)?;
        let rv = tape.constant(&[r.len()], r.clone())?;
        let fv = tape.constant(&[f.len()], f.clone())?;
        let pr = disc.forward(&mut tape, &params, rv)?;
        let pf = disc.forward(&mut tape, &params, fv)?;
        let real_term = tape.bce(pr, &[1.0])?;
        let fake_term = tape.bce(pf, &[0.0])?;
        total += tape.value(real_term)[0] + tape.value(fake_term)[0];
    }
    Ok(total / real.len() as f64)
}

/// Mean over the batch of `log(1 - D(G(e))) + lambda * ||B - G(e)||^2`,
/// the quantity the generator update descends.
pub fn generator_loss(
    gen: &Generator,
    disc: &Discriminator,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    lambda: f64,
) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidInput(format!(
            "generator loss wants matching nonempty batches, got {} inputs and {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "reconstruction weight must be finite and nonnegative, got {lambda}"
        )));
    }
    let m = gen.config().m_antennas;
    let mut total = 0.0;
    for (e, b) in inputs.iter().zip(targets) {
        if b.len() != 2 * m {
            return Err(Error::InvalidInput(format!(
                "target wants {} values (2 per antenna), got {}",
                2 * m,
                b.len()
            )));
        }
        let mut tape = Tape::new();
        let g_params = gen.store().bind_all(&mut tape, false)?;
        let d_params = disc.store().bind_all(&mut tape, false)?;
        let x = tape.constant(&[e.len()], e.clone())?;
        let fake = gen.forward(&mut tape, &g_params, x)?;
        let p = disc.forward(&mut tape, &d_params, fake)?;
        let adv = tape.bce(p, &[0.0])?; // -log(1 - p), clamped
        let target = tape.constant(&[m, 2, 1], b.clone())?;
        let diff = tape.sub(target, fake)?;
        let recon = tape.sum_sq(diff)?;
        total += -tape.value(adv)[0] + lambda * tape.value(recon)[0];
    }
    Ok(total / inputs.len() as f64)
}

// ── per-sample passes ──────────────────────────────────────────────────────

/// Per-sample discriminator loss and gradients on a throwaway tape: the
/// real coefficients score toward 1, the (detached) fake ones toward 0.
fn disc_sample_grads(
    disc: &Discriminator,
    real: &[f64],
    fake: &[f64],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let params = disc.store().bind_all(&mut tape, true)?;
    let rv = tape.constant(&[real.len()], real.to_vec())?;
    let fv = tape.constant(&[fake.len()], fake.to_vec())?;
    let pr = disc.forward(&mut tape, &params, rv)?;
    let pf = disc.forward(&mut tape, &params, fv)?;
    let real_term = tape.bce(pr, &[1.0])?;
    let fake_term = tape.bce(pf, &[0.0])?;
    let loss = tape.add(real_term, fake_term)?;
    tape.backward(loss)?;
    let grads = disc.store().harvest_grads(&tape, &params);
    Ok((tape.value(loss)[0], grads))
}

/// One sample's state carried from the discriminator phase into the
/// generator phase: the live generator tape plus the discriminator's
/// contribution to its own update.
struct Kept {
    index: usize,
    tape: Tape,
    g_params: Vec<Var>,
    fake: Var,
    d_loss: f64,
    d_grads: Vec<Vec<f64>>,
}

/// Discriminator phase for one sample: run the generator forward on a kept
/// tape (so the generator phase can extend it) and collect the
/// discriminator's loss and gradients against the detached fake.
fn phase_disc(
    gen: &Generator,
    disc: &Discriminator,
    index: usize,
    input: &[f64],
    target: &[f64],
) -> Result<Kept> {
    let mut tape = Tape::new();
    let g_params = gen.store().bind_all(&mut tape, true)?;
    let x = tape.constant(&[input.len()], input.to_vec())?;
    let fake = gen.forward(&mut tape, &g_params, x)?;
    let fake_value = tape.value(fake).to_vec();
    let (d_loss, d_grads) = disc_sample_grads(disc, target, &fake_value)?;
    Ok(Kept { index, tape, g_params, fake, d_loss, d_grads })
}

/// Generator phase for one sample: extend the kept tape with the refreshed
/// discriminator (frozen) and backpropagate the generator loss.
/// Returns (gradients, loss, unweighted reconstruction term).
fn phase_gen(
    mut kept: Kept,
    gen: &Generator,
    disc: &Discriminator,
    target: &[f64],
    lambda: f64,
) -> Result<(Vec<Vec<f64>>, f64, f64)> {
    let m = gen.config().m_antennas;
    let tape = &mut kept.tape;
    let d_params = disc.store().bind_all(tape, false)?;
    let p = disc.forward(tape, &d_params, kept.fake)?;
    let adv = tape.bce(p, &[0.0])?;
    let neg_adv = tape.scale(adv, -1.0)?; // +log(1 - p)
    let target_var = tape.constant(&[m, 2, 1], target.to_vec())?;
    let diff = tape.sub(target_var, kept.fake)?;
    let recon = tape.sum_sq(diff)?;
    let weighted = tape.scale(recon, lambda)?;
    let loss = tape.add(neg_adv, weighted)?;
    tape.backward(loss)?;
    let grads = gen.store().harvest_grads(tape, &kept.g_params);
    Ok((grads, tape.value(loss)[0], tape.value(recon)[0]))
}

// ── reductions ─────────────────────────────────────────────────────────────

/// Elementwise mean of per-sample gradient lists, accumulated in sample
/// order so the result is independent of how the samples were computed.
fn mean_grads(per_sample: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let n = per_sample.len() as f64;
    let mut acc: Vec<Vec<f64>> =
        per_sample[0].iter().map(|t| vec![0.0; t.len()]).collect();
    for sample in per_sample {
        for (a, g) in acc.iter_mut().zip(sample) {
            for (x, y) in a.iter_mut().zip(g) {
                *x += y;
            }
        }
    }
    for t in &mut acc {
        for x in t {
            *x /= n;
        }
    }
    acc
}

fn grads_finite(grads: &[Vec<f64>]) -> bool {
    grads.iter().all(|t| t.iter().all(|x| x.is_finite()))
}

fn non_finite_abort(what: &str, epoch: usize, step: usize, ckpt: &Path, saved: bool) -> Error {
    let state = if saved {
        format!("last good checkpoint: {}", ckpt.display())
    } else {
        "no checkpoint had been written yet".to_string()
    };
    Error::Numerical(format!("non-finite {what} at epoch {epoch}, step {step}; {state}"))
}

/// Write the loss traces with their documented header.
pub fn write_traces_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut out = String::from("epoch,step,d_loss,g_loss,g_recon,lr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.step, r.d_loss, r.g_loss, r.g_recon, r.lr
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ── the loop ───────────────────────────────────────────────────────────────

/// Train a fresh generator/discriminator pair on `samples`, writing
/// `checkpoint.json` and `traces.csv` into `out_dir` after every epoch.
///
/// Both models are seeded from `cfg.seed` (on decorrelated streams), so a
/// fixed seed and config reproduce the run bit for bit.
pub fn train(
    samples: &[Sample],
    stats: &NormStats,
    g_config: &GeneratorConfig,
    d_config: &DiscriminatorConfig,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutput> {
    g_config.validate()?;
    d_config.validate()?;
    cfg.validate(samples.len())?;
    let m = g_config.m_antennas;
    if d_config.m_antennas != m {
        return Err(Error::InvalidInput(format!(
            "generator covers {m} antennas but the discriminator covers {}",
            d_config.m_antennas
        )));
    }
    for s in samples {
        if s.m != m {
            return Err(Error::InvalidInput(format!(
                "the models cover {m} antennas but a sample has {}",
                s.m
            )));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let checkpoint_path = out_dir.join("checkpoint.json");
    let traces_path = out_dir.join("traces.csv");

    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| stats.normalized_input(s)).collect();
    let targets: Vec<Vec<f64>> = samples.iter().map(|s| stats.normalized_target(s)).collect();

    let mut gen = Generator::new(g_config.clone(), cfg.seed)?;
    // decorrelate the two initialization streams sharing one user seed
    let mut disc = Discriminator::new(d_config.clone(), cfg.seed ^ 0x9E37_79B9_7F4A_7C15)?;
    let mut opt_g = Adam::new(cfg.adam, gen.store())?;
    let mut opt_d = Adam::new(cfg.adam, disc.store())?;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut traces: Vec<TraceRow> = Vec::new();
    let mut saved = false;

    for epoch in 0..cfg.epochs {
        let lr = cfg.g_lr.lr_at(epoch)?;
        order.shuffle(&mut shuffle_rng);
        for (step, batch) in order.chunks_exact(cfg.batch_size).enumerate() {
            // discriminator step against the current generator
            let kept: Result<Vec<Kept>> = par_map(batch.to_vec(), |i| {
                phase_disc(&gen, &disc, i, &inputs[i], &targets[i])
            })
            .into_iter()
            .collect();
            let kept = kept?;

            let d_loss =
                kept.iter().map(|k| k.d_loss).sum::<f64>() / kept.len() as f64;
            let d_per_sample: Vec<Vec<Vec<f64>>> =
                kept.iter().map(|k| k.d_grads.clone()).collect();
            let d_grads = mean_grads(&d_per_sample);
            if !d_loss.is_finite() || !grads_finite(&d_grads) {
                return Err(non_finite_abort(
                    "discriminator update",
                    epoch,
                    step,
                    &checkpoint_path,
                    saved,
                ));
            }
            opt_d.step(disc.store_mut(), &d_grads, cfg.d_lr)?;

            // generator step against the refreshed discriminator
            let gen_results: Result<Vec<(Vec<Vec<f64>>, f64, f64)>> =
                par_map(kept, |k| {
                    let target = &targets[k.index];
                    phase_gen(k, &gen, &disc, target, cfg.lambda_recon)
                })
                .into_iter()
                .collect();
            let gen_results = gen_results?;

            let n = gen_results.len() as f64;
            let g_loss = gen_results.iter().map(|r| r.1).sum::<f64>() / n;
            let g_recon = gen_results.iter().map(|r| r.2).sum::<f64>() / n;
            let g_per_sample: Vec<Vec<Vec<f64>>> =
                gen_results.into_iter().map(|r| r.0).collect();
            let g_grads = mean_grads(&g_per_sample);
            if !g_loss.is_finite() || !g_recon.is_finite() || !grads_finite(&g_grads) {
                return Err(non_finite_abort(
                    "generator update",
                    epoch,
                    step,
                    &checkpoint_path,
                    saved,
                ));
            }
            opt_g.step(gen.store_mut(), &g_grads, lr)?;

            traces.push(TraceRow { epoch, step, d_loss, g_loss, g_recon, lr });
        }
        save_checkpoint(&checkpoint_path, &gen, &disc)?;
        write_traces_csv(&traces_path, &traces)?;
        saved = true;
    }

    Ok(TrainOutput { generator: gen, discriminator: disc, traces, checkpoint_path, traces_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InputWiring;

    fn tiny_gen(m: usize) -> GeneratorConfig {
        GeneratorConfig {
            m_antennas: m,
            spatial: 4,
            base_channels: 2,
            depth: 1,
            transformer_dim: 4,
            transformer_heads: 2,
            transformer_layers: 1,
            gsa_reduction: 2,
            input_wiring: InputWiring::FeatureChannels,
        }
    }

    // four channels per block: two-channel stacks can die completely under
    // ReLU at unlucky seeds, parking the discriminator on a zero-gradient
    // saddle that would make the movement assertions vacuous
    fn tiny_disc(m: usize) -> DiscriminatorConfig {
        DiscriminatorConfig { m_antennas: m, spatial: 4, channels: vec![4, 4, 4, 4, 4] }
    }

    /// Deterministic synthetic samples with nondegenerate spans.
    fn toy_samples(m: usize, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Sample {
                    theta_deg: 30.0 + 10.0 * t,
                    phi_deg: 45.0 + 5.0 * t,
                    spacing_wl: 0.1 + 0.01 * t,
                    m,
                    field: (0..m)
                        .map(|e| {
                            [1.0 + 0.1 * e as f64 + 0.2 * t, -1.0 + 0.3 * e as f64 - 0.1 * t]
                        })
                        .collect(),
                    coeff: (0..m)
                        .map(|e| [0.5 + 0.05 * e as f64 * (t + 1.0), 0.2 * e as f64 - 0.3 * t])
                        .collect(),
                }
            })
            .collect()
    }

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir =
            std::env::temp_dir().join(format!("superdir-train-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    fn zero_tensor(store: &mut crate::params::ParamStore, name: &str) {
        let i = store.index_of(name).expect("tensor exists");
        for x in store.data_mut(i) {
            *x = 0.0;
        }
    }

    #[test]
    fn discriminator_loss_at_the_indifferent_point_is_two_log_two() {
        let mut disc = Discriminator::new(tiny_disc(2), 3).unwrap();
        // zero head weights force D = sigmoid(0) = 1/2 on every input
        zero_tensor(disc.store_mut(), "d.head.w");
        let real = vec![vec![0.3, 0.1, 0.9, -0.4], vec![0.0, 0.5, 0.2, 0.8]];
        let fake = vec![vec![0.6, -0.2, 0.4, 0.0], vec![1.0, 0.2, 0.3, 0.1]];
        let loss = discriminator_loss(&disc, &real, &fake).unwrap();
        assert!(
            (loss - 2.0 * std::f64::consts::LN_2).abs() <= 1e-15,
            "indifferent discriminator loss should be 2 ln 2, got {loss}"
        );
    }

    #[test]
    fn confident_discriminator_loss_sits_at_the_clamp_floor() {
        // rig an m=1 discriminator so a nonzero input saturates toward 1
        // and the zero input toward 0: all-positive names up to the head,
        // a large positive head weight, and a large negative head bias.
        let mut disc =
            Discriminator::new(DiscriminatorConfig { m_antennas: 1, spatial: 4, channels: vec![1; 5] }, 0)
                .unwrap();
        let store = disc.store_mut();
        for name in ["d.lift.w", "d.conv1.w", "d.conv2.w", "d.conv3.w", "d.conv4.w", "d.conv5.w"] {
            let i = store.index_of(name).expect("tensor exists");
            for x in store.data_mut(i) {
                *x = 1.0;
            }
        }
        let hw = store.index_of("d.head.w").unwrap();
        for x in store.data_mut(hw) {
            *x = 1000.0;
        }
        let hb = store.index_of("d.head.b").unwrap();
        store.data_mut(hb)[0] = -40.0;

        let real = vec![vec![1.0, 0.5]];
        let fake = vec![vec![0.0, 0.0]];
        assert!(discriminator_loss(&disc, &fake, &real).unwrap() > 10.0, "inverted labels blow up");
        let loss = discriminator_loss(&disc, &real, &fake).unwrap();
        assert!(
            loss > 0.0 && loss < 1e-6,
            "perfect discrimination should bottom out near the probability clamp, got {loss}"
        );
    }

    #[test]
    fn generator_loss_with_perfect_reconstruction_is_log_half() {
        let gen = Generator::new(tiny_gen(2), 11).unwrap();
        let mut disc = Discriminator::new(tiny_disc(2), 12).unwrap();
        zero_tensor(disc.store_mut(), "d.head.w");
        let input = vec![0.2, 0.4, 0.6, 0.8, 0.1, 0.3, 0.5, 0.7];
        // make the target exactly the generator's own output: recon = 0
        let target = crate::model::generator_predict(&gen, &input).unwrap();
        let loss =
            generator_loss(&gen, &disc, &[input], &[target], 1.0).unwrap();
        assert!(
            (loss - 0.5f64.ln()).abs() <= 1e-15,
            "zero reconstruction and D = 1/2 should give ln(1/2), got {loss}"
        );
    }

    #[test]
    fn reconstruction_term_is_the_plain_squared_norm() {
        let mut gen = Generator::new(tiny_gen(1), 4).unwrap();
        // zero head -> generator output identically zero
        zero_tensor(gen.store_mut(), "g.head.w");
        let mut disc = Discriminator::new(tiny_disc(1), 5).unwrap();
        zero_tensor(disc.store_mut(), "d.head.w");
        let inputs = vec![vec![0.1, 0.2, 0.3, 0.4]];
        let targets = vec![vec![1.0, 0.0]]; // ||B - 0||^2 = 1
        let with = generator_loss(&gen, &disc, &inputs, &targets, 1.0).unwrap();
        let without = generator_loss(&gen, &disc, &inputs, &targets, 0.0).unwrap();
        assert!(
            (with - without - 1.0).abs() <= 1e-15,
            "the lambda-weighted gap should be exactly the squared norm, got {}",
            with - without
        );
        assert!(
            (without - 0.5f64.ln()).abs() <= 1e-15,
            "with lambda = 0 only the adversarial ln(1/2) remains, got {without}"
        );
    }

    #[test]
    fn one_step_changes_both_parameter_sets() {
        let samples = toy_samples(2, 2);
        let stats = superdir_core::dataset::fit_norm_stats(&samples).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 2,
            seed: 7,
            ..Default::default()
        };
        let dir = scratch_dir("onestep");
        let out = train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &cfg, &dir).unwrap();

        let fresh_gen = Generator::new(tiny_gen(2), cfg.seed).unwrap();
        let fresh_disc =
            Discriminator::new(tiny_disc(2), cfg.seed ^ 0x9E37_79B9_7F4A_7C15).unwrap();
        let gen_moved = (0..fresh_gen.store().len())
            .any(|i| fresh_gen.store().data(i) != out.generator.store().data(i));
        let disc_moved = (0..fresh_disc.store().len())
            .any(|i| fresh_disc.store().data(i) != out.discriminator.store().data(i));
        assert!(gen_moved, "the generator parameters should move after one step");
        assert!(disc_moved, "the discriminator parameters should move after one step");
        assert_eq!(out.traces.len(), 1, "one epoch of one full batch is one step");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn fixed_seed_reproduces_checkpoint_and_traces_byte_for_byte() {
        let samples = toy_samples(2, 4);
        let stats = superdir_core::dataset::fit_norm_stats(&samples).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 2, seed: 21, ..Default::default() };
        let dir_a = scratch_dir("det-a");
        let dir_b = scratch_dir("det-b");
        train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &cfg, &dir_a).unwrap();
        train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &cfg, &dir_b).unwrap();
        let ckpt_a = std::fs::read(dir_a.join("checkpoint.json")).unwrap();
        let ckpt_b = std::fs::read(dir_b.join("checkpoint.json")).unwrap();
        assert_eq!(ckpt_a, ckpt_b, "same seed and config must give identical checkpoints");
        let tr_a = std::fs::read(dir_a.join("traces.csv")).unwrap();
        let tr_b = std::fs::read(dir_b.join("traces.csv")).unwrap();
        assert_eq!(tr_a, tr_b, "same seed and config must give identical traces");
        std::fs::remove_dir_all(&dir_a).unwrap();
        std::fs::remove_dir_all(&dir_b).unwrap();
    }

    #[test]
    fn one_discriminator_step_descends_its_own_loss() {
        // frozen generator stand-in: fixed fake batch; tiny learning rate
        // so the first-order descent property holds
        let mut disc = Discriminator::new(tiny_disc(2), 33).unwrap();
        let real = vec![vec![0.9, 0.1, 0.8, 0.2], vec![0.7, 0.3, 0.6, 0.4]];
        let fake = vec![vec![0.2, 0.8, 0.1, 0.9], vec![0.4, 0.6, 0.3, 0.7]];

        let before = discriminator_loss(&disc, &real, &fake).unwrap();
        let per_sample: Vec<Vec<Vec<f64>>> = real
            .iter()
            .zip(&fake)
            .map(|(r, f)| disc_sample_grads(&disc, r, f).unwrap().1)
            .collect();
        let grads = mean_grads(&per_sample);
        let mut opt = Adam::new(AdamConfig::default(), disc.store()).unwrap();
        opt.step(disc.store_mut(), &grads, 1e-6).unwrap();
        let after = discriminator_loss(&disc, &real, &fake).unwrap();
        assert!(
            after <= before + 1e-9,
            "a tiny step along the gradient should not increase the loss: {before} -> {after}"
        );
    }

    #[test]
    fn non_finite_generator_loss_aborts_with_a_numerical_error() {
        let samples = toy_samples(2, 2);
        let stats = superdir_core::dataset::fit_norm_stats(&samples).unwrap();
        // a finite but astronomically large reconstruction weight overflows
        // the generator loss on the very first step
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 2,
            seed: 3,
            lambda_recon: f64::MAX,
            ..Default::default()
        };
        let dir = scratch_dir("abort");
        let err = train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &cfg, &dir).unwrap_err();
        match err {
            Error::Numerical(msg) => {
                assert!(msg.contains("non-finite"), "diagnostic names the failure: {msg}");
                assert!(msg.contains("epoch 0"), "diagnostic names the epoch: {msg}");
            }
            other => panic!("expected a numerical abort, got {other:?}"),
        }
        assert!(
            !dir.join("checkpoint.json").exists(),
            "nothing was saved before the first epoch completed"
        );
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn oversized_batches_are_rejected() {
        let samples = toy_samples(2, 2);
        let stats = superdir_core::dataset::fit_norm_stats(&samples).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: 5, seed: 0, ..Default::default() };
        let dir = scratch_dir("oversized");
        let err = train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &cfg, &dir).unwrap_err();
        assert!(
            matches!(err, Error::InvalidInput(_)),
            "a batch larger than the dataset is a usage error, got {err:?}"
        );
    }

    #[test]
    fn reconstruction_weight_changes_the_run() {
        let samples = toy_samples(2, 2);
        let stats = superdir_core::dataset::fit_norm_stats(&samples).unwrap();
        let base = TrainConfig { epochs: 1, batch_size: 2, seed: 9, ..Default::default() };
        let half = TrainConfig { lambda_recon: 0.5, ..base.clone() };
        let dir_a = scratch_dir("lambda-a");
        let dir_b = scratch_dir("lambda-b");
        let full = train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &base, &dir_a).unwrap();
        let damped = train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &half, &dir_b).unwrap();
        assert!(
            full.traces[0].g_loss != damped.traces[0].g_loss,
            "the reconstruction weight must reach the generator objective"
        );
        assert_eq!(
            full.traces[0].d_loss, damped.traces[0].d_loss,
            "the discriminator phase happens before the weight enters"
        );
        std::fs::remove_dir_all(&dir_a).unwrap();
        std::fs::remove_dir_all(&dir_b).unwrap();
    }

    #[test]
    fn traces_file_has_the_documented_format() {
        let samples = toy_samples(2, 4);
        let stats = superdir_core::dataset::fit_norm_stats(&samples).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 2, seed: 2, ..Default::default() };
        let dir = scratch_dir("traces");
        let out = train(&samples, &stats, &tiny_gen(2), &tiny_disc(2), &cfg, &dir).unwrap();
        let text = std::fs::read_to_string(&out.traces_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("epoch,step,d_loss,g_loss,g_recon,lr"),
            "header row is part of the format"
        );
        assert_eq!(
            lines.count(),
            out.traces.len(),
            "one row per step: 2 epochs x 2 steps of batch 2 over 4 samples"
        );
        assert_eq!(out.traces.len(), 4);
        assert!(out.checkpoint_path.exists(), "the final checkpoint is on disk");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn config_files_may_omit_defaulted_fields() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "batch_size": 8}"#).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, 8);
        assert_eq!(cfg.lambda_recon, 1.0);
        assert_eq!(cfg.d_lr, 4e-5);
        assert!(matches!(cfg.g_lr, LrSchedule::Constant { lr } if lr == 4e-4));
        let round: TrainConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(round, cfg, "the config serializes losslessly");
    }

    #[test]
    fn schedules_shorter_than_the_run_are_rejected() {
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 1,
            g_lr: LrSchedule::WarmupCosine {
                min_lr: 1e-6,
                max_lr: 1e-3,
                warmup_epochs: 5,
                total_epochs: 20,
            },
            ..Default::default()
        };
        assert!(
            cfg.validate(100).is_err(),
            "a 20-epoch schedule cannot drive a 50-epoch run"
        );
    }
}
