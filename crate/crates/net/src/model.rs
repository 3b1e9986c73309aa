//! The coefficient-prediction generator and its adversary.
//!
//! The generator is a U-shaped convolutional network with an attention
//! bottleneck. A linear lift turns the flat per-antenna feature vector
//! (angle pair plus field amplitude/phase, four numbers per element) into a
//! small image; a stack of conv + strided-conv encoders doubles channels
//! while halving resolution; at the bottom, a channel-token transformer and
//! a global spatial attention block each refine the encoded feature and the
//! three are summed; dense decoders then walk back up, each stage
//! concatenating its upsampled predecessor, the same-level encoder skip,
//! projected copies of every earlier decoder stage, and (at the last stage)
//! a 3-channel projection of the lifted input. A final convolution over the
//! full-resolution concatenation and a linear head emit one amplitude/phase
//! pair per antenna.
//!
//! The transformer treats channels as tokens: the bottleneck feature
//! `(c, h, w)` becomes `X` of shape `(h*w, c)` whose columns are attended
//! over. With more than one head, the columns are split into contiguous
//! groups and each head runs the full attention recipe on its group with
//! its own projections; outputs are re-concatenated. The feed-forward
//! stage maps each column through a hidden width of four times the token
//! feature size.
//!
//! The discriminator lifts a flat coefficient vector to a 2-channel image
//! and scores it through five stride-2 convolution blocks and a sigmoid
//! head.
//!
//! Neither network uses convolution biases; linear layers carry biases,
//! normalization scales start at one and shifts at zero.

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::{Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Epsilon inside the layer-norm variance square root.
pub const LN_EPS: f64 = 1e-5;

/// Channels of the image the discriminator lift produces.
const DISC_LIFT_CHANNELS: usize = 2;

/// How the lifted input image is laid out.
///
/// `FeatureChannels` gives the image 4 channels (one per input feature),
/// absorbing the antenna count into the lift — this keeps the first encoder
/// convolution's input width independent of M. `AntennaChannels` instead
/// gives one channel per antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputWiring {
    FeatureChannels,
    AntennaChannels,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub m_antennas: usize,
    /// Side length of the lifted square image.
    pub spatial: usize,
    /// Channels of the first encoder stage; doubled at each deeper stage.
    pub base_channels: usize,
    /// Number of encoder (and decoder) stages.
    pub depth: usize,
    /// Channel count at the attention bottleneck.
    pub transformer_dim: usize,
    pub transformer_heads: usize,
    pub transformer_layers: usize,
    /// Channel reduction factor for the spatial-attention key/query maps.
    pub gsa_reduction: usize,
    pub input_wiring: InputWiring,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            m_antennas: 4,
            spatial: 16,
            base_channels: 8,
            depth: 4,
            transformer_dim: 96,
            transformer_heads: 2,
            transformer_layers: 1,
            gsa_reduction: 8,
            input_wiring: InputWiring::FeatureChannels,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_antennas == 0 {
            return Err(Error::InvalidInput("generator needs at least one antenna".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidInput("generator depth must be at least 1".into()));
        }
        if self.spatial == 0 || self.spatial % (1 << self.depth) != 0 {
            return Err(Error::InvalidInput(format!(
                "spatial size {} must be a positive multiple of 2^depth = {}",
                self.spatial,
                1 << self.depth
            )));
        }
        if self.base_channels == 0 || self.base_channels % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "base_channels must be even and positive (decoder stages halve \
                 channels one step past the deepest encoder), got {}",
                self.base_channels
            )));
        }
        if self.transformer_dim == 0 || self.transformer_heads == 0 {
            return Err(Error::InvalidInput(
                "transformer_dim and transformer_heads must be positive".into(),
            ));
        }
        if self.transformer_dim % self.transformer_heads != 0 {
            return Err(Error::InvalidInput(format!(
                "transformer_dim {} must be divisible by transformer_heads {}",
                self.transformer_dim, self.transformer_heads
            )));
        }
        if self.gsa_reduction == 0 || self.transformer_dim % self.gsa_reduction != 0 {
            return Err(Error::InvalidInput(format!(
                "transformer_dim {} must be divisible by gsa_reduction {}",
                self.transformer_dim, self.gsa_reduction
            )));
        }
        if self.transformer_layers == 0 {
            return Err(Error::InvalidInput("transformer_layers must be at least 1".into()));
        }
        Ok(())
    }

    /// Channels of the lifted input image.
    pub fn input_channels(&self) -> usize {
        match self.input_wiring {
            InputWiring::FeatureChannels => 4,
            InputWiring::AntennaChannels => self.m_antennas,
        }
    }

    /// Channels of encoder stage `e` (1-based).
    fn enc_channels(&self, e: usize) -> usize {
        self.base_channels << (e - 1)
    }

    /// Channels at the deepest encoder stage.
    fn deepest_channels(&self) -> usize {
        self.enc_channels(self.depth)
    }

    /// Channels of decoder stage `j` (1-based): halved once per stage
    /// starting from the deepest encoder width.
    fn dec_channels(&self, j: usize) -> usize {
        self.deepest_channels() >> j
    }

    /// Side length of the bottleneck feature map.
    pub fn bottleneck_spatial(&self) -> usize {
        self.spatial >> self.depth
    }
}

#[derive(Debug)]
struct TLayerIds {
    /// (w_key, w_query, w_value) per head.
    heads: Vec<(usize, usize, usize)>,
    ln1: (usize, usize),
    /// (w1, b1, w2, b2) of the two-layer feed-forward stage.
    fcn: (usize, usize, usize, usize),
    ln2: (usize, usize),
}

#[derive(Debug)]
struct DecIds {
    up: usize,
    /// Projections of earlier decoder outputs, one per stage 1..j-1.
    from: Vec<usize>,
    /// 3-channel input-branch projection, last stage only.
    input: Option<usize>,
    merge: usize,
}

#[derive(Debug)]
struct GenLayout {
    lift_w: usize,
    lift_b: usize,
    enc: Vec<(usize, usize)>,
    bott_in: usize,
    tlayers: Vec<TLayerIds>,
    gsa_k: usize,
    gsa_q: usize,
    gsa_v: usize,
    bott_out: usize,
    dec: Vec<DecIds>,
    final_from: Vec<usize>,
    final_input: usize,
    final_conv: usize,
    head_w: usize,
    head_b: usize,
}

#[derive(Debug)]
pub struct Generator {
    config: GeneratorConfig,
    store: ParamStore,
    layout: GenLayout,
}

impl Generator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let cfg = &config;
        let (ch0, s, m) = (cfg.input_channels(), cfg.spatial, cfg.m_antennas);

        let lift_out = ch0 * s * s;
        let lift_w = store.add_weight("g.lift.w", vec![lift_out, 4 * m], 4 * m, &mut rng)?;
        let lift_b = store.add_zeros("g.lift.b", vec![lift_out])?;

        let mut enc = Vec::new();
        for e in 1..=cfg.depth {
            let cin = if e == 1 { ch0 } else { cfg.enc_channels(e - 1) };
            let cout = cfg.enc_channels(e);
            let conv = store.add_weight(
                &format!("g.enc{e}.conv.w"),
                vec![cout, cin, 3, 3],
                cin * 9,
                &mut rng,
            )?;
            let down = store.add_weight(
                &format!("g.enc{e}.down.w"),
                vec![cout, cout, 3, 3],
                cout * 9,
                &mut rng,
            )?;
            enc.push((conv, down));
        }

        let deepest = cfg.deepest_channels();
        let tdim = cfg.transformer_dim;
        let bott_in =
            store.add_weight("g.bott.in.w", vec![tdim, deepest, 1, 1], deepest, &mut rng)?;

        let mfeat = cfg.bottleneck_spatial() * cfg.bottleneck_spatial();
        let hidden = 4 * mfeat;
        let mut tlayers = Vec::new();
        for l in 1..=cfg.transformer_layers {
            let mut heads = Vec::new();
            for h in 1..=cfg.transformer_heads {
                let wk = store.add_weight(
                    &format!("g.t{l}.h{h}.wk"),
                    vec![mfeat, mfeat],
                    mfeat,
                    &mut rng,
                )?;
                let wq = store.add_weight(
                    &format!("g.t{l}.h{h}.wq"),
                    vec![mfeat, mfeat],
                    mfeat,
                    &mut rng,
                )?;
                let wv = store.add_weight(
                    &format!("g.t{l}.h{h}.wv"),
                    vec![mfeat, mfeat],
                    mfeat,
                    &mut rng,
                )?;
                heads.push((wk, wq, wv));
            }
            let ln1 = (
                store.add_ones(&format!("g.t{l}.ln1.g"), vec![mfeat])?,
                store.add_zeros(&format!("g.t{l}.ln1.b"), vec![mfeat])?,
            );
            let fcn = (
                store.add_weight(&format!("g.t{l}.fcn.w1"), vec![hidden, mfeat], mfeat, &mut rng)?,
                store.add_zeros(&format!("g.t{l}.fcn.b1"), vec![hidden])?,
                store.add_weight(&format!("g.t{l}.fcn.w2"), vec![mfeat, hidden], hidden, &mut rng)?,
                store.add_zeros(&format!("g.t{l}.fcn.b2"), vec![mfeat])?,
            );
            let ln2 = (
                store.add_ones(&format!("g.t{l}.ln2.g"), vec![mfeat])?,
                store.add_zeros(&format!("g.t{l}.ln2.b"), vec![mfeat])?,
            );
            tlayers.push(TLayerIds { heads, ln1, fcn, ln2 });
        }

        let cprime = tdim / cfg.gsa_reduction;
        let gsa_k = store.add_weight("g.gsa.k.w", vec![cprime, tdim, 1, 1], tdim, &mut rng)?;
        let gsa_q = store.add_weight("g.gsa.q.w", vec![cprime, tdim, 1, 1], tdim, &mut rng)?;
        let gsa_v = store.add_weight("g.gsa.v.w", vec![tdim, tdim, 1, 1], tdim, &mut rng)?;

        let bott_out =
            store.add_weight("g.bott.out.w", vec![deepest, tdim, 1, 1], tdim, &mut rng)?;

        let mut dec = Vec::new();
        for j in 1..=cfg.depth {
            let dj = cfg.dec_channels(j);
            let prev = if j == 1 { deepest } else { cfg.dec_channels(j - 1) };
            let up =
                store.add_weight(&format!("g.dec{j}.up.w"), vec![dj, prev, 1, 1], prev, &mut rng)?;
            let mut from = Vec::new();
            for i in 1..j {
                let di = cfg.dec_channels(i);
                from.push(store.add_weight(
                    &format!("g.dec{j}.from{i}.w"),
                    vec![dj, di, 1, 1],
                    di,
                    &mut rng,
                )?);
            }
            let input = if j == cfg.depth {
                Some(store.add_weight(
                    &format!("g.dec{j}.input.w"),
                    vec![3, ch0, 1, 1],
                    ch0,
                    &mut rng,
                )?)
            } else {
                None
            };
            // upsampled feature + same-level skip (early stages) + one
            // projection per earlier stage + the 3-channel input branch
            // (last stage)
            let skip_ch = if j < cfg.depth { dj } else { 0 };
            let input_ch = if j == cfg.depth { 3 } else { 0 };
            let concat_ch = dj + skip_ch + (j - 1) * dj + input_ch;
            let merge = store.add_weight(
                &format!("g.dec{j}.merge.w"),
                vec![dj, concat_ch, 1, 1],
                concat_ch,
                &mut rng,
            )?;
            dec.push(DecIds { up, from, input, merge });
        }

        let dd = cfg.dec_channels(cfg.depth);
        let mut final_from = Vec::new();
        for i in 1..cfg.depth {
            let di = cfg.dec_channels(i);
            final_from.push(store.add_weight(
                &format!("g.final.from{i}.w"),
                vec![dd, di, 1, 1],
                di,
                &mut rng,
            )?);
        }
        let final_input =
            store.add_weight("g.final.input.w", vec![dd, ch0, 1, 1], ch0, &mut rng)?;
        let final_in_ch = (cfg.depth + 1) * dd;
        let final_conv = store.add_weight(
            "g.final.conv.w",
            vec![m, final_in_ch, 3, 3],
            final_in_ch * 9,
            &mut rng,
        )?;

        let head_w = store.add_weight("g.head.w", vec![2 * m, m * s * s], m * s * s, &mut rng)?;
        let head_b = store.add_zeros("g.head.b", vec![2 * m])?;

        let layout = GenLayout {
            lift_w,
            lift_b,
            enc,
            bott_in,
            tlayers,
            gsa_k,
            gsa_q,
            gsa_v,
            bott_out,
            dec,
            final_from,
            final_input,
            final_conv,
            head_w,
            head_b,
        };
        Ok(Generator { config, store, layout })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn count_params(&self) -> usize {
        self.store.total_params()
    }

    fn check_params(&self, params: &[Var]) -> Result<()> {
        if params.len() != self.store.len() {
            return Err(Error::InvalidInput(format!(
                "generator forward got {} bound parameters, expected {}",
                params.len(),
                self.store.len()
            )));
        }
        Ok(())
    }

    /// Full forward pass for one sample. `params` must come from
    /// `store().bind_all` on the same tape; `input` holds the 4·M normalized
    /// per-antenna features. Output shape is `[M, 2, 1]`.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], input: Var) -> Result<Var> {
        self.check_params(params)?;
        let cfg = &self.config;
        let l = &self.layout;
        let (m, s) = (cfg.m_antennas, cfg.spatial);
        if tape.value(input).len() != 4 * m {
            return Err(Error::InvalidInput(format!(
                "generator input wants {} values (4 per antenna), got {}",
                4 * m,
                tape.value(input).len()
            )));
        }

        let x_col = tape.reshape(input, &[4 * m, 1])?;
        let lifted = tape.linear(params[l.lift_w], params[l.lift_b], x_col)?;
        let x0 = tape.reshape(lifted, &[cfg.input_channels(), s, s])?;

        let mut skips = Vec::with_capacity(cfg.depth);
        let mut cur = x0;
        for &(conv, down) in &l.enc {
            let c = tape.conv2d(cur, params[conv], 1, 1)?;
            let c = tape.relu(c)?;
            let d = tape.conv2d(c, params[down], 2, 1)?;
            cur = tape.relu(d)?;
            skips.push(cur);
        }

        let x_en = tape.conv2d(cur, params[l.bott_in], 1, 0)?;
        let f_t = self.transformer_branch(tape, params, x_en)?;
        let f_g = self.gsa_branch(tape, params, x_en)?;
        let fused = fuse_attention(tape, x_en, f_t, f_g)?;
        let mut cur = tape.conv2d(fused, params[l.bott_out], 1, 0)?;

        let mut stage_outputs: Vec<Var> = Vec::with_capacity(cfg.depth);
        for (idx, ids) in l.dec.iter().enumerate() {
            let j = idx + 1;
            let up = tape.upsample2x(cur)?;
            let up = tape.conv2d(up, params[ids.up], 1, 0)?;
            let mut pieces = vec![up];
            if j < cfg.depth {
                pieces.push(skips[cfg.depth - j - 1]);
            }
            for (i, &fw) in ids.from.iter().enumerate() {
                let mut p = tape.conv2d(stage_outputs[i], params[fw], 1, 0)?;
                for _ in 0..j - (i + 1) {
                    p = tape.upsample2x(p)?;
                }
                pieces.push(p);
            }
            if let Some(iw) = ids.input {
                pieces.push(tape.conv2d(x0, params[iw], 1, 0)?);
            }
            let cat = tape.concat_channels(&pieces)?;
            let merged = tape.conv2d(cat, params[ids.merge], 1, 0)?;
            cur = tape.relu(merged)?;
            stage_outputs.push(cur);
        }

        // full-resolution fusion: every decoder stage plus the input branch
        let mut pieces = Vec::with_capacity(cfg.depth + 1);
        for (i, &fw) in l.final_from.iter().enumerate() {
            let mut p = tape.conv2d(stage_outputs[i], params[fw], 1, 0)?;
            for _ in 0..cfg.depth - (i + 1) {
                p = tape.upsample2x(p)?;
            }
            pieces.push(p);
        }
        pieces.push(cur);
        pieces.push(tape.conv2d(x0, params[l.final_input], 1, 0)?);
        let cat = tape.concat_channels(&pieces)?;
        let features = tape.conv2d(cat, params[l.final_conv], 1, 1)?;

        let flat = tape.reshape(features, &[m * s * s, 1])?;
        let out = tape.linear(params[l.head_w], params[l.head_b], flat)?;
        tape.reshape(out, &[m, 2, 1])
    }

    /// The channel-token transformer applied to a bottleneck feature of
    /// shape `[transformer_dim, h, w]`. Shape-preserving.
    pub fn transformer_branch(&self, tape: &mut Tape, params: &[Var], x_en: Var) -> Result<Var> {
        self.check_params(params)?;
        let cfg = &self.config;
        let shape = tape.shape(x_en).to_vec();
        if shape.len() != 3 || shape[0] != cfg.transformer_dim {
            return Err(Error::InvalidInput(format!(
                "transformer input wants [{}, h, w], got {shape:?}",
                cfg.transformer_dim
            )));
        }
        let n = shape[0];
        let mfeat = shape[1] * shape[2];
        let flat = tape.reshape(x_en, &[n, mfeat])?;
        // tokens are channels: columns of X carry one channel each
        let mut x_t = tape.transpose(flat)?;
        let inv_sqrt_d = 1.0 / (mfeat as f64).sqrt();
        let group = n / cfg.transformer_heads;
        for lids in &self.layout.tlayers {
            let mut head_outs = Vec::with_capacity(lids.heads.len());
            for (h, &(wk, wq, wv)) in lids.heads.iter().enumerate() {
                let xh = tape.slice_cols(x_t, h * group, (h + 1) * group)?;
                let k = tape.matmul(params[wk], xh)?;
                let q = tape.matmul(params[wq], xh)?;
                let kt = tape.transpose(k)?;
                let logits = tape.matmul(kt, q)?;
                let logits = tape.scale(logits, inv_sqrt_d)?;
                let y = tape.softmax_axis0(logits)?;
                let v = tape.matmul(params[wv], xh)?;
                head_outs.push(tape.matmul(v, y)?);
            }
            let vy = tape.concat_cols(&head_outs)?;
            let z_in = tape.add(x_t, vy)?;
            let z = tape.layer_norm_axis0(z_in, params[lids.ln1.0], params[lids.ln1.1], LN_EPS)?;
            let h1 = tape.linear(params[lids.fcn.0], params[lids.fcn.1], z)?;
            let h1 = tape.relu(h1)?;
            let f = tape.linear(params[lids.fcn.2], params[lids.fcn.3], h1)?;
            let o_in = tape.add(z, f)?;
            x_t = tape.layer_norm_axis0(o_in, params[lids.ln2.0], params[lids.ln2.1], LN_EPS)?;
        }
        let back = tape.transpose(x_t)?;
        tape.reshape(back, &shape)
    }

    /// Global spatial attention over the bottleneck positions. Keys and
    /// queries come from channel-reducing 1x1 convolutions, the attention
    /// matrix spans the h·w positions, and values keep the full channel
    /// width. Shape-preserving.
    pub fn gsa_branch(&self, tape: &mut Tape, params: &[Var], x_en: Var) -> Result<Var> {
        self.check_params(params)?;
        let cfg = &self.config;
        let shape = tape.shape(x_en).to_vec();
        if shape.len() != 3 || shape[0] != cfg.transformer_dim {
            return Err(Error::InvalidInput(format!(
                "spatial attention input wants [{}, h, w], got {shape:?}",
                cfg.transformer_dim
            )));
        }
        let l = &self.layout;
        let c = shape[0];
        let mfeat = shape[1] * shape[2];
        let kg = tape.conv2d(x_en, params[l.gsa_k], 1, 0)?;
        let qg = tape.conv2d(x_en, params[l.gsa_q], 1, 0)?;
        let vg = tape.conv2d(x_en, params[l.gsa_v], 1, 0)?;
        let cprime = tape.shape(kg)[0];
        let kf = tape.reshape(kg, &[cprime, mfeat])?;
        let qf = tape.reshape(qg, &[cprime, mfeat])?;
        let vf = tape.reshape(vg, &[c, mfeat])?;
        let kt = tape.transpose(kf)?;
        let logits = tape.matmul(kt, qf)?;
        let logits = tape.scale(logits, 1.0 / (mfeat as f64).sqrt())?;
        let z = tape.softmax_axis0(logits)?;
        let o = tape.matmul(vf, z)?;
        tape.reshape(o, &shape)
    }
}

/// Elementwise fusion of the encoded feature with both attention outputs.
pub fn fuse_attention(tape: &mut Tape, x_en: Var, f_t: Var, f_g: Var) -> Result<Var> {
    let partial = tape.add(x_en, f_t)?;
    tape.add(partial, f_g)
}

/// One generator inference on a throwaway tape.
pub fn generator_predict(gen: &Generator, input: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let params = gen.store().bind_all(&mut tape, false)?;
    let x = tape.constant(&[input.len()], input.to_vec())?;
    let out = gen.forward(&mut tape, &params, x)?;
    Ok(tape.value(out).to_vec())
}

// ── discriminator ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub m_antennas: usize,
    /// Side length of the lifted square image.
    pub spatial: usize,
    /// Output channels of the five stride-2 blocks.
    pub channels: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { m_antennas: 4, spatial: 16, channels: vec![16, 32, 64, 128, 256] }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_antennas == 0 || self.spatial == 0 {
            return Err(Error::InvalidInput(
                "discriminator needs positive antenna count and spatial size".into(),
            ));
        }
        if self.channels.len() != 5 {
            return Err(Error::InvalidInput(format!(
                "discriminator uses exactly five downsampling blocks, got {} channel entries",
                self.channels.len()
            )));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::InvalidInput("discriminator channels must be positive".into()));
        }
        Ok(())
    }

    /// Spatial side length after all stride-2 blocks.
    fn final_spatial(&self) -> usize {
        let mut s = self.spatial;
        for _ in 0..self.channels.len() {
            s = (s - 1) / 2 + 1;
        }
        s
    }
}

#[derive(Debug)]
struct DiscLayout {
    lift_w: usize,
    lift_b: usize,
    convs: Vec<usize>,
    head_w: usize,
    head_b: usize,
}

#[derive(Debug)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    store: ParamStore,
    layout: DiscLayout,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (m, s) = (config.m_antennas, config.spatial);

        let lift_out = DISC_LIFT_CHANNELS * s * s;
        let lift_w = store.add_weight("d.lift.w", vec![lift_out, 2 * m], 2 * m, &mut rng)?;
        let lift_b = store.add_zeros("d.lift.b", vec![lift_out])?;

        let mut convs = Vec::new();
        let mut cin = DISC_LIFT_CHANNELS;
        for (k, &cout) in config.channels.iter().enumerate() {
            convs.push(store.add_weight(
                &format!("d.conv{}.w", k + 1),
                vec![cout, cin, 3, 3],
                cin * 9,
                &mut rng,
            )?);
            cin = cout;
        }

        let flat = cin * config.final_spatial() * config.final_spatial();
        let head_w = store.add_weight("d.head.w", vec![1, flat], flat, &mut rng)?;
        let head_b = store.add_zeros("d.head.b", vec![1])?;

        let layout = DiscLayout { lift_w, lift_b, convs, head_w, head_b };
        Ok(Discriminator { config, store, layout })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn count_params(&self) -> usize {
        self.store.total_params()
    }

    /// Score one normalized coefficient vector (2·M values, or an `[M,2,1]`
    /// tensor). Output is a probability in (0, 1), shape `[1]`.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], coeffs: Var) -> Result<Var> {
        if params.len() != self.store.len() {
            return Err(Error::InvalidInput(format!(
                "discriminator forward got {} bound parameters, expected {}",
                params.len(),
                self.store.len()
            )));
        }
        let (m, s) = (self.config.m_antennas, self.config.spatial);
        let l = &self.layout;
        if tape.value(coeffs).len() != 2 * m {
            return Err(Error::InvalidInput(format!(
                "discriminator input wants {} values (2 per antenna), got {}",
                2 * m,
                tape.value(coeffs).len()
            )));
        }
        let x_col = tape.reshape(coeffs, &[2 * m, 1])?;
        let lifted = tape.linear(params[l.lift_w], params[l.lift_b], x_col)?;
        let mut cur = tape.reshape(lifted, &[DISC_LIFT_CHANNELS, s, s])?;
        for &w in &l.convs {
            let c = tape.conv2d(cur, params[w], 2, 1)?;
            cur = tape.relu(c)?;
        }
        let n = tape.value(cur).len();
        let flat = tape.reshape(cur, &[n, 1])?;
        let score = tape.linear(params[l.head_w], params[l.head_b], flat)?;
        let p = tape.sigmoid(score)?;
        tape.reshape(p, &[1])
    }
}

/// One discriminator inference on a throwaway tape.
pub fn discriminator_predict(disc: &Discriminator, coeffs: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let params = disc.store().bind_all(&mut tape, false)?;
    let x = tape.constant(&[coeffs.len()], coeffs.to_vec())?;
    let out = disc.forward(&mut tape, &params, x)?;
    Ok(tape.value(out)[0])
}
