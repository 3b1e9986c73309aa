//! Learning-rate schedules over epoch indices.
//!
//! The warmup-cosine schedule climbs linearly from `min_lr` to `max_lr`
//! across the warmup epochs, then follows a half cosine back down:
//!
//! ```text
//! t <  W:  min + (max - min) * t / W
//! t >= W:  min + (max - min) * (1 + cos(pi * (t - W) / (T - W))) / 2
//! ```
//!
//! Both branches agree at `t = W` (value `max`), and the cosine lands back
//! on `min` at `t = T`. Indices beyond `T` are an error rather than a clamp:
//! a training loop asking for them has mis-sized its run.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    Constant { lr: f64 },
    WarmupCosine { min_lr: f64, max_lr: f64, warmup_epochs: usize, total_epochs: usize },
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::Constant { lr } => {
                if !(lr > 0.0) || !lr.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "constant schedule needs a positive learning rate, got {lr}"
                    )));
                }
            }
            LrSchedule::WarmupCosine { min_lr, max_lr, warmup_epochs, total_epochs } => {
                if !(min_lr > 0.0) || !(max_lr >= min_lr) || !max_lr.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "warmup-cosine schedule needs 0 < min_lr <= max_lr, got {min_lr}..{max_lr}"
                    )));
                }
                if total_epochs == 0 || warmup_epochs > total_epochs {
                    return Err(Error::InvalidInput(format!(
                        "warmup-cosine schedule needs warmup ({warmup_epochs}) within total ({total_epochs})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Learning rate at epoch `t`. For the cosine schedule, `t` must lie in
    /// `0..=total_epochs`.
    pub fn lr_at(&self, t: usize) -> Result<f64> {
        match *self {
            LrSchedule::Constant { lr } => Ok(lr),
            LrSchedule::WarmupCosine { min_lr, max_lr, warmup_epochs, total_epochs } => {
                if t > total_epochs {
                    return Err(Error::InvalidInput(format!(
                        "epoch {t} is outside the schedule (total {total_epochs})"
                    )));
                }
                let span = max_lr - min_lr;
                if t < warmup_epochs {
                    Ok(min_lr + span * t as f64 / warmup_epochs as f64)
                } else if total_epochs == warmup_epochs {
                    Ok(max_lr)
                } else {
                    let phase = (t - warmup_epochs) as f64 / (total_epochs - warmup_epochs) as f64;
                    Ok(min_lr + span * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos()))
                }
            }
        }
    }
}
