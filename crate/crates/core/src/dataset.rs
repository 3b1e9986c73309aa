//! Training-pair generation and persistence.
//!
//! A sample couples the steering field of an array toward one grid direction
//! with the optimal excitation the solver found for that direction. Sweeping
//! a range of element spacings and every grid direction yields a dataset that
//! covers the superdirective regime; solver failures (singular systems,
//! condition blow-ups) are dropped and counted, and generation aborts if more
//! than a tenth of the attempts fail.
//!
//! Files are JSON lines, one object per sample, with raw (unnormalized)
//! physical values:
//!
//! ```text
//! {"theta_deg":…, "phi_deg":…, "spacing_wl":…, "m":…,
//!  "field":[[amp,phase],…], "coeff":[[amp,phase],…]}
//! ```
//!
//! A sibling `manifest.json` records the generation config, the sampled
//! spacings, counts, and the min-max normalization statistics fitted over the
//! full dataset before the train/test split, so consumers can normalize,
//! denormalize, and rebuild the exact field matrices later. Serialization
//! uses shortest-round-trip float formatting, which makes generation
//! byte-identical for identical seeds and configs.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::beamforming::{
    solve_max_directivity, solve_max_gain, wrap_phase, DirectivityOptions, Solution,
};
use crate::coupling::{make_coupling, CouplingMatrix};
use crate::error::{Error, Result};
use crate::field::{synth_field_matrix, FieldMatrix};
use crate::geometry::{ArrayGeometry, Axis, ElementPattern};
use crate::grid::{make_grid, AngularGrid, Weighting};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Solver condition estimates above this mark a sample as anomalous.
pub const COND_ANOMALY_LIMIT: f64 = 1e12;

// ── sample and polar encoding ────────────────────────────────────────────

/// One training pair: the steering field toward (theta, phi) and the optimal
/// excitation for it, both as per-element (amplitude, phase) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub spacing_wl: f64,
    pub m: usize,
    pub field: Vec<[f64; 2]>,
    pub coeff: Vec<[f64; 2]>,
}

impl Sample {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.field.len() != self.m || self.coeff.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "sample claims {} elements but has {} field and {} coeff rows",
                self.m,
                self.field.len(),
                self.coeff.len()
            )));
        }
        Ok(())
    }
}

/// Complex vector to (amplitude, phase) rows, phases wrapped to [-pi, pi).
pub fn encode_polar(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.norm(), wrap_phase(z.arg())]).collect()
}

/// Inverse of `encode_polar`.
pub fn decode_polar(rows: &[[f64; 2]]) -> Vec<Complex64> {
    rows.iter().map(|r| Complex64::from_polar(r[0], r[1])).collect()
}

// ── normalization ────────────────────────────────────────────────────────

/// Inclusive min-max span of one data component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    fn empty() -> Self {
        Span { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn absorb(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Map into [0, 1]; a degenerate span maps everything to 0.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    /// Inverse map; a degenerate span returns its single value.
    pub fn denormalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            self.min + x * (self.max - self.min)
        } else {
            self.min
        }
    }
}

/// Global per-component spans fitted over a whole dataset, used to map both
/// network inputs and targets into the unit interval and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub field_amp: Span,
    pub field_phase: Span,
    pub theta_deg: Span,
    pub phi_deg: Span,
    pub coeff_amp: Span,
    pub coeff_phase: Span,
}

pub fn fit_norm_stats(samples: &[Sample]) -> Result<NormStats> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot fit normalization on an empty dataset".into()));
    }
    let mut stats = NormStats {
        field_amp: Span::empty(),
        field_phase: Span::empty(),
        theta_deg: Span::empty(),
        phi_deg: Span::empty(),
        coeff_amp: Span::empty(),
        coeff_phase: Span::empty(),
    };
    for s in samples {
        s.validate()?;
        stats.theta_deg.absorb(s.theta_deg);
        stats.phi_deg.absorb(s.phi_deg);
        for row in &s.field {
            stats.field_amp.absorb(row[0]);
            stats.field_phase.absorb(row[1]);
        }
        for row in &s.coeff {
            stats.coeff_amp.absorb(row[0]);
            stats.coeff_phase.absorb(row[1]);
        }
    }
    Ok(stats)
}

impl NormStats {
    /// Network input: per element a normalized (theta, phi, amplitude,
    /// phase) quadruple, flattened element-major to length 4m.
    pub fn normalized_input(&self, s: &Sample) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * s.m);
        for row in &s.field {
            out.push(self.theta_deg.normalize(s.theta_deg));
            out.push(self.phi_deg.normalize(s.phi_deg));
            out.push(self.field_amp.normalize(row[0]));
            out.push(self.field_phase.normalize(row[1]));
        }
        out
    }

    /// Network target: normalized (amplitude, phase) pairs, flattened
    /// element-major to length 2m.
    pub fn normalized_target(&self, s: &Sample) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * s.m);
        for row in &s.coeff {
            out.push(self.coeff_amp.normalize(row[0]));
            out.push(self.coeff_phase.normalize(row[1]));
        }
        out
    }

    /// Rebuild a complex excitation from a flattened normalized prediction
    /// of length 2m (amplitude, phase per element).
    pub fn denormalize_coeff(&self, rows: &[f64]) -> Result<Vec<Complex64>> {
        if rows.is_empty() || rows.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "coefficient rows must come in (amplitude, phase) pairs, got length {}",
                rows.len()
            )));
        }
        Ok(rows
            .chunks_exact(2)
            .map(|p| {
                Complex64::from_polar(
                    self.coeff_amp.denormalize(p[0]),
                    self.coeff_phase.denormalize(p[1]),
                )
            })
            .collect())
    }
}

// ── generation config ────────────────────────────────────────────────────

/// Array family whose spacing is the swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryTemplate {
    Ula { m: usize, axis: Axis, pattern: ElementPattern },
    Upa { rows: usize, cols: usize, pattern: ElementPattern },
}

impl GeometryTemplate {
    pub fn realize(&self, spacing_wl: f64) -> Result<ArrayGeometry> {
        match *self {
            GeometryTemplate::Ula { m, axis, pattern } => {
                ArrayGeometry::ula(m, spacing_wl, axis, pattern)
            }
            GeometryTemplate::Upa { rows, cols, pattern } => {
                ArrayGeometry::upa(rows, cols, spacing_wl, pattern)
            }
        }
    }

    pub fn num_elements(&self) -> usize {
        match *self {
            GeometryTemplate::Ula { m, .. } => m,
            GeometryTemplate::Upa { rows, cols, .. } => rows * cols,
        }
    }

    /// Parse the same key=value dialect as [`ArrayGeometry::parse_config`],
    /// except that `spacing_wl` is optional and ignored: the sweep realizes
    /// one geometry per sampled spacing, so the file only pins the family.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("geometry config line {}: expected key = value", lineno + 1))
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| -> Result<&String> {
            kv.get(key)
                .ok_or_else(|| Error::InvalidInput(format!("geometry config missing '{key}'")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::InvalidInput(format!("geometry config: bad integer for '{key}'")))
        };

        let pattern = match kv.get("pattern").map(String::as_str).unwrap_or("isotropic") {
            "isotropic" => ElementPattern::Isotropic,
            "dipole" => ElementPattern::IdealDipole {
                axis: Axis::parse(kv.get("dipole_axis").map(String::as_str).unwrap_or("z"))?,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown pattern '{other}', expected 'isotropic' or 'dipole'"
                )))
            }
        };

        let template = match get("kind")?.as_str() {
            "ula" => GeometryTemplate::Ula {
                m: parse_usize("m")?,
                axis: Axis::parse(kv.get("axis").map(String::as_str).unwrap_or("y"))?,
                pattern,
            },
            "upa" => GeometryTemplate::Upa {
                rows: parse_usize("rows")?,
                cols: parse_usize("cols")?,
                pattern,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown geometry kind '{other}', expected 'ula' or 'upa'"
                )))
            }
        };
        if template.num_elements() == 0 {
            return Err(Error::InvalidInput("geometry template needs at least one element".into()));
        }
        Ok(template)
    }
}

/// Mutual-coupling model applied during field synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub strength: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub template: GeometryTemplate,
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
    pub weighting: Weighting,
    pub spacing_count: usize,
    pub spacing_range: (f64, f64),
    /// Radiation efficiency; `Some` switches targets from max-directivity to
    /// max-gain excitations.
    #[serde(default)]
    pub efficiency: Option<f64>,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    /// Ridge override passed to the solver; `None` keeps its default.
    #[serde(default)]
    pub tikhonov_eps: Option<f64>,
    pub seed: u64,
    pub train_fraction: f64,
}

impl DatasetConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.spacing_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidInput(format!(
                "spacing range must satisfy 0 < lo <= hi < 1 wavelengths, got ({lo}, {hi})"
            )));
        }
        if self.spacing_count == 0 {
            return Err(Error::InvalidInput("spacing count must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if let Some(eta) = self.efficiency {
            crate::beamforming::loss_resistance(eta)?;
        }
        Ok(())
    }

    pub fn make_grid(&self) -> Result<AngularGrid> {
        make_grid(self.theta_step_deg, self.phi_step_deg, self.weighting)
    }

    pub fn make_coupling(&self) -> Result<Option<CouplingMatrix>> {
        match self.coupling {
            None => Ok(None),
            Some(spec) => {
                make_coupling(self.template.num_elements(), spec.strength, spec.seed).map(Some)
            }
        }
    }

    /// Field matrix for one spacing under this config's geometry, grid, and
    /// coupling. Also the reconstruction path used at evaluation time.
    pub fn field_matrix(&self, spacing_wl: f64) -> Result<FieldMatrix> {
        let geometry = self.template.realize(spacing_wl)?;
        let grid = self.make_grid()?;
        let coupling = self.make_coupling()?;
        synth_field_matrix(&geometry, &grid, coupling.as_ref())
    }

    /// The solve that produced the stored targets: max-directivity, or
    /// max-gain when an efficiency is configured.
    pub fn solve(&self, fm: &FieldMatrix, dir: &crate::grid::Direction) -> Result<Solution> {
        let opts = DirectivityOptions { tikhonov_eps: self.tikhonov_eps, ..Default::default() };
        match self.efficiency {
            None => solve_max_directivity(fm, dir, &opts),
            Some(eta) => solve_max_gain(fm, dir, eta, &opts),
        }
    }
}

// ── generation ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub spacings_wl: Vec<f64>,
    pub num_samples: usize,
    pub num_train: usize,
    pub num_test: usize,
    pub anomalies: usize,
    pub norm_stats: NormStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub manifest: DatasetManifest,
}

/// Sweep spacings and grid directions, solve each, and package the result.
///
/// Anomalous solves (errors, non-finite outputs, condition estimates above
/// `COND_ANOMALY_LIMIT`) are skipped and counted; generation fails if they
/// exceed 10% of attempts. Normalization statistics are fitted on the full
/// sample list before the seeded train/test split.
pub fn generate_dataset(config: &DatasetConfig) -> Result<GeneratedDataset> {
    config.validate()?;
    let grid = config.make_grid()?;
    let (lo, hi) = config.spacing_range;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let spacings_wl: Vec<f64> =
        (0..config.spacing_count).map(|_| lo + rng.gen::<f64>() * (hi - lo)).collect();

    let mut samples = Vec::with_capacity(config.spacing_count * grid.len());
    let mut anomalies = 0usize;
    for &spacing in &spacings_wl {
        let fm = config.field_matrix(spacing)?;
        for (k, dir) in grid.directions().iter().enumerate() {
            match config.solve(&fm, dir) {
                Ok(sol)
                    if sol.achieved.is_finite()
                        && sol.cond_estimate <= COND_ANOMALY_LIMIT
                        && sol.excitation.iter().all(|v| v.re.is_finite() && v.im.is_finite()) =>
                {
                    let field_row: Vec<Complex64> = fm.values().row(k).to_vec();
                    samples.push(Sample {
                        theta_deg: dir.theta_deg(),
                        phi_deg: dir.phi_deg(),
                        spacing_wl: spacing,
                        m: sol.excitation.len(),
                        field: encode_polar(&field_row),
                        coeff: encode_polar(&sol.excitation),
                    });
                }
                Ok(_) | Err(Error::Numerical(_)) => anomalies += 1,
                Err(other) => return Err(other),
            }
        }
    }

    let attempted = config.spacing_count * grid.len();
    if anomalies * 10 > attempted {
        return Err(Error::Numerical(format!(
            "{anomalies} of {attempted} solves were anomalous (>10%); \
             the configuration is numerically unusable as a dataset"
        )));
    }
    let norm_stats = fit_norm_stats(&samples)?;
    let (train, test) = split_samples(samples, config.train_fraction, config.seed)?;

    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        config: config.clone(),
        spacings_wl,
        num_samples: train.len() + test.len(),
        num_train: train.len(),
        num_test: test.len(),
        anomalies,
        norm_stats,
    };
    Ok(GeneratedDataset { train, test, manifest })
}

/// Seeded shuffle followed by a prefix split; train gets round(n * fraction).
pub fn split_samples(
    mut samples: Vec<Sample>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    // decorrelate from the spacing-sampler stream that shares the user seed
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    samples.shuffle(&mut rng);
    let n_train = (samples.len() as f64 * train_fraction).round() as usize;
    let n_train = n_train.min(samples.len());
    let test = samples.split_off(n_train);
    Ok((samples, test))
}

// ── persistence ──────────────────────────────────────────────────────────

pub fn write_samples_jsonl<W: Write>(samples: &[Sample], out: &mut W) -> Result<()> {
    for s in samples {
        let line = serde_json::to_string(s)
            .map_err(|e| Error::InvalidInput(format!("cannot serialize sample: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_samples_jsonl<R: BufRead>(input: R) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("bad sample on line {}: {e}", i + 1))
        })?;
        s.validate()?;
        samples.push(s);
    }
    Ok(samples)
}

/// Write `train.jsonl`, `test.jsonl`, and `manifest.json` into `dir`.
pub fn write_dataset(ds: &GeneratedDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut train = std::io::BufWriter::new(std::fs::File::create(dir.join("train.jsonl"))?);
    write_samples_jsonl(&ds.train, &mut train)?;
    train.flush()?;
    let mut test = std::io::BufWriter::new(std::fs::File::create(dir.join("test.jsonl"))?);
    write_samples_jsonl(&ds.test, &mut test)?;
    test.flush()?;
    let manifest = serde_json::to_string_pretty(&ds.manifest)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize manifest: {e}")))?;
    std::fs::write(dir.join("manifest.json"), manifest + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("bad manifest: {e}")))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::InvalidInput(format!(
            "dataset format version {} is not supported (expected {})",
            manifest.format_version, DATASET_FORMAT_VERSION
        )));
    }
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<GeneratedDataset> {
    let manifest = read_manifest(dir)?;
    let train = read_samples_jsonl(std::io::BufReader::new(std::fs::File::open(
        dir.join("train.jsonl"),
    )?))?;
    let test = read_samples_jsonl(std::io::BufReader::new(std::fs::File::open(
        dir.join("test.jsonl"),
    )?))?;
    if train.len() != manifest.num_train || test.len() != manifest.num_test {
        return Err(Error::InvalidInput(format!(
            "manifest promises {}/{} train/test samples but files hold {}/{}",
            manifest.num_train,
            manifest.num_test,
            train.len(),
            test.len()
        )));
    }
    Ok(GeneratedDataset { train, test, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{directivity, CNorm};
    use crate::grid::Direction;

    fn tiny_config() -> DatasetConfig {
        DatasetConfig {
            template: GeometryTemplate::Ula {
                m: 2,
                axis: Axis::Y,
                pattern: ElementPattern::Isotropic,
            },
            theta_step_deg: 45.0,
            phi_step_deg: 45.0,
            weighting: Weighting::SinTheta,
            spacing_count: 2,
            spacing_range: (0.2, 0.4),
            efficiency: None,
            coupling: None,
            tikhonov_eps: None,
            seed: 11,
            train_fraction: 0.7,
        }
    }

    #[test]
    fn template_config_parses_the_geometry_dialect() {
        let t = GeometryTemplate::parse_config(
            "# swept family\nkind = ula\nm = 4\npattern = dipole\ndipole_axis = x\n",
        )
        .unwrap();
        assert_eq!(
            t,
            GeometryTemplate::Ula {
                m: 4,
                axis: Axis::Y,
                pattern: ElementPattern::IdealDipole { axis: Axis::X },
            },
            "defaults: axis y; dipole axis taken from the file"
        );

        // spacing_wl may be present (solve-style file) and is ignored here
        let t = GeometryTemplate::parse_config("kind = upa\nrows = 2\ncols = 3\nspacing_wl = 0.5\n").unwrap();
        assert_eq!(t.num_elements(), 6, "upa template counts rows*cols");

        assert!(GeometryTemplate::parse_config("kind = ring\nm = 4\n").is_err());
        assert!(GeometryTemplate::parse_config("kind = ula\n").is_err(), "ula needs m");
        assert!(GeometryTemplate::parse_config("kind = ula\nm = 0\n").is_err(), "empty array rejected");
    }

    #[test]
    fn polar_encoding_round_trips() {
        let v = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.3, -0.4),
            Complex64::new(0.0, 2.0),
        ];
        let rows = encode_polar(&v);
        assert_eq!(rows[1][0], 1.0, "amplitude of -1 is 1");
        assert_eq!(rows[1][1], -std::f64::consts::PI, "phase of -1 wraps to -pi");
        let back = decode_polar(&rows);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12, "round trip should be lossless: {a} vs {b}");
        }
        for row in &rows {
            assert!(row[0] >= 0.0, "amplitudes are nonnegative");
            assert!(
                (-std::f64::consts::PI..std::f64::consts::PI).contains(&row[1]),
                "phases live in [-pi, pi), got {}",
                row[1]
            );
        }
    }

    #[test]
    fn span_normalization_matches_the_formula() {
        let span = Span { min: 0.0, max: 10.0 };
        assert_eq!(span.normalize(0.0), 0.0);
        assert_eq!(span.normalize(5.0), 0.5);
        assert_eq!(span.normalize(10.0), 1.0);
        assert!((span.denormalize(span.normalize(7.3)) - 7.3).abs() < 1e-12);

        let flat = Span { min: 4.0, max: 4.0 };
        assert_eq!(flat.normalize(4.0), 0.0, "degenerate spans map to zero");
        assert_eq!(flat.denormalize(0.7), 4.0, "and denormalize to their single value");
    }

    #[test]
    fn stats_are_global_extrema() {
        let mk = |amp: f64, theta: f64| Sample {
            theta_deg: theta,
            phi_deg: 0.0,
            spacing_wl: 0.25,
            m: 1,
            field: vec![[1.0, 0.0]],
            coeff: vec![[amp, 0.5]],
        };
        let samples = vec![mk(0.0, 10.0), mk(5.0, 50.0), mk(10.0, 30.0)];
        let stats = fit_norm_stats(&samples).unwrap();
        assert_eq!(stats.coeff_amp.min, 0.0);
        assert_eq!(stats.coeff_amp.max, 10.0);
        assert_eq!(stats.theta_deg.min, 10.0);
        assert_eq!(stats.theta_deg.max, 50.0);

        let mut reordered = samples.clone();
        reordered.reverse();
        assert_eq!(
            stats,
            fit_norm_stats(&reordered).unwrap(),
            "statistics must not depend on sample order"
        );
        assert!(fit_norm_stats(&[]).is_err(), "empty datasets are rejected");
    }

    #[test]
    fn split_counts_and_determinism() {
        let mk = |i: usize| Sample {
            theta_deg: i as f64,
            phi_deg: 0.0,
            spacing_wl: 0.25,
            m: 1,
            field: vec![[1.0, 0.0]],
            coeff: vec![[1.0, 0.0]],
        };
        let samples: Vec<Sample> = (0..1000).map(mk).collect();
        let (train, test) = split_samples(samples.clone(), 0.7, 3).unwrap();
        assert_eq!(train.len(), 700);
        assert_eq!(test.len(), 300);

        let mut seen: Vec<f64> =
            train.iter().chain(&test).map(|s| s.theta_deg).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            seen.iter().enumerate().all(|(i, &t)| t == i as f64),
            "split must be disjoint and exhaustive"
        );

        let (train2, test2) = split_samples(samples.clone(), 0.7, 3).unwrap();
        assert_eq!(train, train2, "same seed gives the same partition");
        assert_eq!(test, test2);

        let (train3, _) = split_samples(samples.clone(), 0.7, 4).unwrap();
        assert_ne!(train, train3, "a different seed reshuffles");

        let two: Vec<Sample> = (0..2).map(mk).collect();
        let (t, e) = split_samples(two, 0.5, 0).unwrap();
        assert_eq!((t.len(), e.len()), (1, 1));

        assert!(split_samples(vec![mk(0)], 0.0, 0).is_err());
        assert!(split_samples(vec![mk(0)], 1.0, 0).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_counts_add_up() {
        let config = tiny_config();
        let ds = generate_dataset(&config).unwrap();
        let grid = config.make_grid().unwrap();
        assert_eq!(
            ds.manifest.num_samples + ds.manifest.anomalies,
            config.spacing_count * grid.len(),
            "every attempted solve is either a sample or a counted anomaly"
        );
        assert_eq!(ds.manifest.anomalies, 0, "this benign config should have no anomalies");
        assert_eq!(ds.manifest.num_train, ds.train.len());
        assert_eq!(ds.manifest.num_test, ds.test.len());
        assert_eq!(ds.manifest.spacings_wl.len(), 2);
        for &s in &ds.manifest.spacings_wl {
            assert!((0.2..0.4).contains(&s), "spacings stay inside the requested range");
        }

        let ds2 = generate_dataset(&config).unwrap();
        assert_eq!(ds, ds2, "identical config and seed reproduce the dataset exactly");

        let mut other = config.clone();
        other.seed = 12;
        let ds3 = generate_dataset(&other).unwrap();
        assert_ne!(
            ds.manifest.spacings_wl, ds3.manifest.spacings_wl,
            "a different seed draws different spacings"
        );
    }

    #[test]
    fn normalized_values_live_in_the_unit_interval() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        let stats = &ds.manifest.norm_stats;
        for s in ds.train.iter().chain(&ds.test) {
            for x in stats.normalized_input(s).into_iter().chain(stats.normalized_target(s)) {
                assert!(
                    (-1e-12..=1.0 + 1e-12).contains(&x),
                    "normalized component {x} escaped [0, 1]"
                );
            }
        }
    }

    #[test]
    fn stored_coefficients_reproduce_the_solver_optimum() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        let config = &ds.manifest.config;
        for s in ds.train.iter().take(5) {
            let fm = config.field_matrix(s.spacing_wl).unwrap();
            let dir = Direction::new(s.theta_deg, s.phi_deg).unwrap();
            let sol = config.solve(&fm, &dir).unwrap();
            let decoded = decode_polar(&s.coeff);
            let d = directivity(&fm, &decoded, &dir, CNorm::Auto).unwrap();
            assert!(
                d >= 0.999 * sol.achieved,
                "decoded excitation achieves {d} but the solver got {}",
                sol.achieved
            );
        }
    }

    #[test]
    fn denormalized_predictions_rebuild_the_excitation() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        let stats = &ds.manifest.norm_stats;
        let s = &ds.test[0];
        let target = stats.normalized_target(s);
        let rebuilt = stats.denormalize_coeff(&target).unwrap();
        let original = decode_polar(&s.coeff);
        for (a, b) in original.iter().zip(&rebuilt) {
            assert!(
                (a - b).norm() < 1e-9,
                "denormalizing the normalized target should return the stored excitation"
            );
        }
        assert!(stats.denormalize_coeff(&[0.5; 3]).is_err(), "odd-length rows are rejected");
    }

    #[test]
    fn pathological_configs_abort_with_counts() {
        let mut config = tiny_config();
        // colocate the elements in all but name and forbid the ridge: every
        // solve hits a singular or absurdly conditioned system
        config.spacing_range = (1e-9, 2e-9);
        config.tikhonov_eps = Some(0.0);
        let err = generate_dataset(&config).unwrap_err();
        match err {
            Error::Numerical(msg) => assert!(
                msg.contains("anomalous"),
                "the abort should report the anomaly count: {msg}"
            ),
            other => panic!("expected a numerical abort, got {other:?}"),
        }
    }

    #[test]
    fn files_round_trip_byte_for_byte() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        let dir = std::env::temp_dir().join(format!("superdir-dataset-{}", std::process::id()));
        write_dataset(&ds, &dir).unwrap();
        let back = read_dataset(&dir).unwrap();
        assert_eq!(ds, back, "write then read reproduces the dataset exactly");

        // byte-identical on re-write: shortest-round-trip floats are stable
        let mut buf1 = Vec::new();
        write_samples_jsonl(&ds.train, &mut buf1).unwrap();
        let mut buf2 = Vec::new();
        write_samples_jsonl(&back.train, &mut buf2).unwrap();
        assert_eq!(buf1, buf2);

        let line = String::from_utf8(buf1).unwrap();
        let first = line.lines().next().unwrap();
        let keys: Vec<&str> = first
            .split('"')
            .skip(1)
            .step_by(2)
            .collect();
        assert_eq!(
            keys,
            ["theta_deg", "phi_deg", "spacing_wl", "m", "field", "coeff"],
            "the documented key order is part of the format"
        );
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn gain_targets_are_supported() {
        let mut config = tiny_config();
        config.efficiency = Some(0.9);
        config.spacing_count = 1;
        let ds = generate_dataset(&config).unwrap();
        assert!(ds.manifest.num_samples > 0);
        // the manifest remembers the loss model, so evaluation can rebuild
        // the same objective later
        assert_eq!(ds.manifest.config.efficiency, Some(0.9));
    }
}
