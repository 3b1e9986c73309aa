//! Test-set evaluation of a trained generator against the physics solver.
//!
//! Three scores are reported, all over the held-out samples:
//!
//! - **NMSE (dB)**: `10 log10(mean_i ||B_i - Bhat_i||^2 / ||B_i||^2)` on the
//!   normalized coefficient representation the network works in, floored at
//!   a -120 dB reporting limit (a perfect prediction would be -inf).
//! - **Accuracy (%)**: mean over every coefficient component of
//!   `1 - |b - bhat| / max(|b|, 1e-8)`, times 100. Never exceeds 100.
//! - **Achieved ratio**: the median over samples of `D(ahat) / D(a*)` — the
//!   directivity (gain, when the dataset models lossy elements) that the
//!   denormalized predicted excitation actually attains, against the solver
//!   optimum recomputed for the same direction and spacing. An excitation
//!   too degenerate to evaluate scores 0.
//!
//! Field matrices are rebuilt from the dataset manifest, one per stored
//! spacing; a test sample whose spacing is missing from the manifest is
//! skipped and counted in the report rather than failing the run.

use crate::error::{Error, Result};
use crate::model::{generator_predict, Generator};
use crate::parallel::par_map;
use serde::{Deserialize, Serialize};
use superdir_core::beamforming::{directivity, gain, CNorm};
use superdir_core::dataset::{DatasetManifest, Sample};
use superdir_core::field::FieldMatrix;
use superdir_core::grid::Direction;

/// Reporting floor for the NMSE; a perfect prediction saturates here.
pub const NMSE_FLOOR_DB: f64 = -120.0;

/// Division guard for the per-element accuracy denominator.
pub const ACC_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub nmse_db: f64,
    pub acc_percent: f64,
    /// Median over samples of achieved directivity (or gain) relative to
    /// the solver optimum.
    pub achieved_ratio: f64,
    /// Samples actually scored.
    pub num_samples: usize,
    /// Samples dropped because their spacing has no manifest field matrix.
    pub skipped_missing_spacing: usize,
}

/// Per-sample contribution before the final reduction.
struct SampleScore {
    nmse_ratio: f64,
    acc_sum: f64,
    acc_terms: usize,
    achieved_ratio: f64,
}

/// Score one prediction against its sample. `Ok(None)` means the sample
/// was skipped for lack of a field matrix.
fn score_one(
    pred: &[f64],
    sample: &Sample,
    manifest: &DatasetManifest,
    matrices: &[(u64, FieldMatrix)],
) -> Result<Option<SampleScore>> {
    let target = manifest.norm_stats.normalized_target(sample);
    if pred.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "prediction has {} values but the sample wants {} (2 per antenna)",
            pred.len(),
            target.len()
        )));
    }
    let Some((_, fm)) = matrices.iter().find(|(k, _)| *k == sample.spacing_wl.to_bits()) else {
        return Ok(None);
    };

    let mut err_sq = 0.0;
    let mut ref_sq = 0.0;
    let mut acc_sum = 0.0;
    for (&b, &bh) in target.iter().zip(pred) {
        err_sq += (b - bh) * (b - bh);
        ref_sq += b * b;
        acc_sum += 1.0 - (b - bh).abs() / b.abs().max(ACC_EPS);
    }
    let nmse_ratio = err_sq / ref_sq.max(f64::MIN_POSITIVE);

    let coeff = manifest.norm_stats.denormalize_coeff(pred)?;
    let dir = Direction::new(sample.theta_deg, sample.phi_deg)?;
    let optimum = manifest.config.solve(fm, &dir)?;
    let achieved = match manifest.config.efficiency {
        None => directivity(fm, &coeff, &dir, CNorm::Auto),
        Some(eta) => gain(fm, &coeff, &dir, eta, CNorm::Auto),
    };
    // an excitation the pattern integrals cannot score radiates nothing
    // useful toward the target; it earns a zero ratio, not a failed run
    let achieved_ratio = match achieved {
        Ok(d) if d.is_finite() && optimum.achieved > 0.0 => d / optimum.achieved,
        _ => 0.0,
    };

    Ok(Some(SampleScore { nmse_ratio, acc_sum, acc_terms: target.len(), achieved_ratio }))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Build one field matrix per distinct manifest spacing.
fn manifest_matrices(manifest: &DatasetManifest) -> Result<Vec<(u64, FieldMatrix)>> {
    let mut matrices: Vec<(u64, FieldMatrix)> = Vec::with_capacity(manifest.spacings_wl.len());
    for &sp in &manifest.spacings_wl {
        if !matrices.iter().any(|(k, _)| *k == sp.to_bits()) {
            matrices.push((sp.to_bits(), manifest.config.field_matrix(sp)?));
        }
    }
    Ok(matrices)
}

/// Score externally supplied normalized predictions, one per test sample.
pub fn report_for_predictions(
    preds: &[Vec<f64>],
    test: &[Sample],
    manifest: &DatasetManifest,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty test set".into()));
    }
    if preds.len() != test.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} test samples",
            preds.len(),
            test.len()
        )));
    }
    let matrices = manifest_matrices(manifest)?;

    let scores: Result<Vec<Option<SampleScore>>> =
        par_map((0..test.len()).collect(), |i| {
            score_one(&preds[i], &test[i], manifest, &matrices)
        })
        .into_iter()
        .collect();
    let scores = scores?;

    let mut nmse_sum = 0.0;
    let mut acc_sum = 0.0;
    let mut acc_terms = 0usize;
    let mut ratios = Vec::new();
    let mut skipped = 0usize;
    for score in scores {
        match score {
            Some(s) => {
                nmse_sum += s.nmse_ratio;
                acc_sum += s.acc_sum;
                acc_terms += s.acc_terms;
                ratios.push(s.achieved_ratio);
            }
            None => skipped += 1,
        }
    }
    if ratios.is_empty() {
        return Err(Error::InvalidInput(format!(
            "all {skipped} test samples were skipped: no spacing matches the manifest"
        )));
    }

    let num_samples = ratios.len();
    Ok(EvalReport {
        nmse_db: (10.0 * (nmse_sum / num_samples as f64).log10()).max(NMSE_FLOOR_DB),
        acc_percent: 100.0 * acc_sum / acc_terms as f64,
        achieved_ratio: median(ratios),
        num_samples,
        skipped_missing_spacing: skipped,
    })
}

/// Run the generator over the test set and score its predictions.
pub fn evaluate(
    gen: &Generator,
    test: &[Sample],
    manifest: &DatasetManifest,
) -> Result<EvalReport> {
    let m = gen.config().m_antennas;
    for s in test {
        if s.m != m {
            return Err(Error::InvalidInput(format!(
                "the generator covers {m} antennas but a test sample has {}",
                s.m
            )));
        }
    }
    let preds: Result<Vec<Vec<f64>>> = par_map(test.to_vec(), |s| {
        generator_predict(gen, &manifest.norm_stats.normalized_input(&s))
    })
    .into_iter()
    .collect();
    report_for_predictions(&preds?, test, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorConfig, InputWiring};
    use superdir_core::dataset::{generate_dataset, DatasetConfig, GeneratedDataset, GeometryTemplate};
    use superdir_core::geometry::{Axis, ElementPattern};
    use superdir_core::grid::Weighting;

    fn tiny_dataset() -> GeneratedDataset {
        let config = DatasetConfig {
            template: GeometryTemplate::Ula {
                m: 2,
                axis: Axis::Y,
                pattern: ElementPattern::Isotropic,
            },
            theta_step_deg: 45.0,
            phi_step_deg: 90.0,
            weighting: Weighting::SinTheta,
            spacing_count: 2,
            spacing_range: (0.15, 0.45),
            efficiency: None,
            coupling: None,
            tikhonov_eps: None,
            seed: 42,
            train_fraction: 0.7,
        };
        generate_dataset(&config).unwrap()
    }

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

    #[test]
    fn perfect_predictions_score_perfectly() {
        let ds = tiny_dataset();
        let preds: Vec<Vec<f64>> =
            ds.test.iter().map(|s| ds.manifest.norm_stats.normalized_target(s)).collect();
        let report = report_for_predictions(&preds, &ds.test, &ds.manifest).unwrap();
        assert!(
            (report.acc_percent - 100.0).abs() <= 1e-12,
            "exact predictions mean 100% accuracy, got {}",
            report.acc_percent
        );
        assert_eq!(
            report.nmse_db, NMSE_FLOOR_DB,
            "zero error saturates the reporting floor"
        );
        assert!(
            (report.achieved_ratio - 1.0).abs() <= 1e-6,
            "the solver's own targets must reproduce its directivity, ratio {}",
            report.achieved_ratio
        );
        assert_eq!(report.num_samples, ds.test.len());
        assert_eq!(report.skipped_missing_spacing, 0);
    }

    #[test]
    fn zero_predictions_score_zero_db() {
        let ds = tiny_dataset();
        let preds: Vec<Vec<f64>> = ds.test.iter().map(|s| vec![0.0; 2 * s.m]).collect();
        let report = report_for_predictions(&preds, &ds.test, &ds.manifest).unwrap();
        assert!(
            report.nmse_db.abs() <= 1e-12,
            "a zero prediction has error power equal to signal power: {} dB",
            report.nmse_db
        );
    }

    #[test]
    fn samples_with_unknown_spacings_are_skipped_and_counted() {
        let ds = tiny_dataset();
        let mut test = ds.test.clone();
        test[0].spacing_wl = 0.499; // not one of the manifest spacings
        let preds: Vec<Vec<f64>> =
            test.iter().map(|s| ds.manifest.norm_stats.normalized_target(s)).collect();
        let report = report_for_predictions(&preds, &test, &ds.manifest).unwrap();
        assert_eq!(report.skipped_missing_spacing, 1);
        assert_eq!(report.num_samples, test.len() - 1);

        // a test set with nothing evaluable is an error, not a report
        for s in &mut test {
            s.spacing_wl = 0.499;
        }
        let preds: Vec<Vec<f64>> =
            test.iter().map(|s| ds.manifest.norm_stats.normalized_target(s)).collect();
        assert!(report_for_predictions(&preds, &test, &ds.manifest).is_err());
    }

    #[test]
    fn a_fresh_generator_produces_a_sane_report() {
        let ds = tiny_dataset();
        let gen = Generator::new(tiny_gen(2), 17).unwrap();
        let report = evaluate(&gen, &ds.test, &ds.manifest).unwrap();
        assert!(report.nmse_db.is_finite());
        assert!(
            report.acc_percent <= 100.0 + 1e-12,
            "accuracy can never exceed 100%, got {}",
            report.acc_percent
        );
        assert!(
            report.achieved_ratio >= 0.0 && report.achieved_ratio <= 1.0 + 1e-6,
            "an untrained excitation cannot beat the optimum, ratio {}",
            report.achieved_ratio
        );
        assert_eq!(report.num_samples, ds.test.len());
    }

    #[test]
    fn empty_and_mismatched_inputs_are_rejected() {
        let ds = tiny_dataset();
        assert!(report_for_predictions(&[], &[], &ds.manifest).is_err());
        let preds = vec![vec![0.0; 4]];
        assert!(
            report_for_predictions(&preds, &ds.test, &ds.manifest).is_err(),
            "one prediction cannot cover {} samples",
            ds.test.len()
        );
    }

    #[test]
    fn report_serializes_losslessly() {
        let report = EvalReport {
            nmse_db: -12.345678901234567,
            acc_percent: 93.7,
            achieved_ratio: 0.8125,
            num_samples: 11,
            skipped_missing_spacing: 1,
        };
        let text = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report, "the report round-trips through JSON exactly");
    }
}
