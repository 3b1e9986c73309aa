//! Antenna array geometry and per-element radiation patterns.
//!
//! Positions are stored in wavelengths, so the phase of element i toward a
//! far-field direction u is simply 2 pi (r_i . u). Uniform linear arrays are
//! centered on the origin along a chosen axis; uniform planar arrays live in
//! the x-y plane. Elements are either isotropic or ideal dipoles whose
//! amplitude pattern is sin of the angle between the dipole axis and the
//! observation direction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Coordinate axis used for linear array placement and dipole orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    #[inline]
    pub fn unit(&self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidInput(format!(
                "unknown axis '{other}', expected x, y or z"
            ))),
        }
    }
}

/// Element radiation pattern (amplitude, not power).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementPattern {
    Isotropic,
    /// Ideal dipole along `axis`: amplitude sin(angle between axis and u),
    /// zero along the axis itself.
    IdealDipole { axis: Axis },
}

impl ElementPattern {
    /// Amplitude gain toward the unit direction `u`.
    pub fn amplitude(&self, u: [f64; 3]) -> f64 {
        match self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::IdealDipole { axis } => {
                let a = axis.unit();
                let dot = a[0] * u[0] + a[1] * u[1] + a[2] * u[2];
                (1.0 - dot * dot).max(0.0).sqrt()
            }
        }
    }
}

/// Element positions (wavelengths) plus the shared element pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions_wl: Vec<[f64; 3]>,
    pattern: ElementPattern,
}

impl ArrayGeometry {
    /// Uniform linear array of `m` elements spaced `spacing_wl` along `axis`,
    /// centered on the origin.
    pub fn ula(m: usize, spacing_wl: f64, axis: Axis, pattern: ElementPattern) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("element count must be at least 1".into()));
        }
        if !(spacing_wl.is_finite() && spacing_wl > 0.0) {
            return Err(Error::InvalidInput(format!(
                "spacing must be positive, got {spacing_wl}"
            )));
        }
        let ax = axis.unit();
        let half = (m as f64 - 1.0) / 2.0;
        let positions = (0..m)
            .map(|i| {
                let s = (i as f64 - half) * spacing_wl;
                [ax[0] * s, ax[1] * s, ax[2] * s]
            })
            .collect();
        Ok(Self { positions_wl: positions, pattern })
    }

    /// Uniform planar array, `rows` along x and `cols` along y, spaced
    /// `spacing_wl` in both directions, centered on the origin in the
    /// x-y plane.
    pub fn upa(rows: usize, cols: usize, spacing_wl: f64, pattern: ElementPattern) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("rows and cols must be at least 1".into()));
        }
        if !(spacing_wl.is_finite() && spacing_wl > 0.0) {
            return Err(Error::InvalidInput(format!(
                "spacing must be positive, got {spacing_wl}"
            )));
        }
        let rh = (rows as f64 - 1.0) / 2.0;
        let ch = (cols as f64 - 1.0) / 2.0;
        let mut positions = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                positions.push([
                    (r as f64 - rh) * spacing_wl,
                    (c as f64 - ch) * spacing_wl,
                    0.0,
                ]);
            }
        }
        Ok(Self { positions_wl: positions, pattern })
    }

    /// Arbitrary element positions in wavelengths.
    pub fn from_positions(positions_wl: Vec<[f64; 3]>, pattern: ElementPattern) -> Result<Self> {
        if positions_wl.is_empty() {
            return Err(Error::InvalidInput("at least one element required".into()));
        }
        if positions_wl.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("element positions must be finite".into()));
        }
        Ok(Self { positions_wl, pattern })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions_wl.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions_wl.is_empty()
    }

    #[inline]
    pub fn positions_wl(&self) -> &[[f64; 3]] {
        &self.positions_wl
    }

    #[inline]
    pub fn pattern(&self) -> ElementPattern {
        self.pattern
    }

    /// Same array shifted by a common offset. Shifting only re-phases the
    /// far field, so any directivity figure is unchanged.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let positions = self
            .positions_wl
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self { positions_wl: positions, pattern: self.pattern }
    }

    /// Parse a key=value geometry description.
    ///
    /// ```text
    /// kind = ula          # or upa
    /// m = 4               # ula; upa takes rows = / cols =
    /// spacing_wl = 0.25
    /// axis = y            # ula placement axis, default y
    /// pattern = dipole    # or isotropic (default)
    /// dipole_axis = z     # default z
    /// ```
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
        let spacing: f64 = get("spacing_wl")?
            .parse()
            .map_err(|_| Error::InvalidInput("geometry config: bad number for 'spacing_wl'".into()))?;

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

        match get("kind")?.as_str() {
            "ula" => {
                let axis = Axis::parse(kv.get("axis").map(String::as_str).unwrap_or("y"))?;
                Self::ula(parse_usize("m")?, spacing, axis, pattern)
            }
            "upa" => Self::upa(parse_usize("rows")?, parse_usize("cols")?, spacing, pattern),
            other => Err(Error::InvalidInput(format!(
                "unknown geometry kind '{other}', expected 'ula' or 'upa'"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ula_positions_are_centered() {
        let g = ArrayGeometry::ula(4, 0.25, Axis::X, ElementPattern::Isotropic).unwrap();
        let xs: Vec<f64> = g.positions_wl().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-0.375, -0.125, 0.125, 0.375]);
        assert!(g.positions_wl().iter().all(|p| p[1] == 0.0 && p[2] == 0.0));
    }

    #[test]
    fn upa_extents_match_lattice() {
        let g = ArrayGeometry::upa(2, 3, 0.2, ElementPattern::Isotropic).unwrap();
        assert_eq!(g.len(), 6);
        let xs: Vec<f64> = g.positions_wl().iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = g.positions_wl().iter().map(|p| p[1]).collect();
        let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span(&xs) - 0.2).abs() < 1e-15);
        assert!((span(&ys) - 0.4).abs() < 1e-15);
        assert!(g.positions_wl().iter().all(|p| p[2] == 0.0));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ArrayGeometry::ula(0, 0.25, Axis::X, ElementPattern::Isotropic).is_err());
        assert!(ArrayGeometry::ula(4, 0.0, Axis::X, ElementPattern::Isotropic).is_err());
        assert!(ArrayGeometry::ula(4, -0.1, Axis::X, ElementPattern::Isotropic).is_err());
        assert!(ArrayGeometry::upa(0, 3, 0.2, ElementPattern::Isotropic).is_err());
        assert!(ArrayGeometry::from_positions(vec![], ElementPattern::Isotropic).is_err());
    }

    #[test]
    fn dipole_amplitude_is_sine_of_axis_angle() {
        let p = ElementPattern::IdealDipole { axis: Axis::Z };
        assert_eq!(p.amplitude([0.0, 0.0, 1.0]), 0.0);
        assert!((p.amplitude([1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        let u = [0.0, (0.5f64).sqrt(), (0.5f64).sqrt()];
        assert!((p.amplitude(u) - (0.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip_ula_and_upa() {
        let g = ArrayGeometry::parse_config(
            "kind = ula\nm = 4\nspacing_wl = 0.25\naxis = y\npattern = dipole\ndipole_axis = z\n",
        )
        .unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.pattern(), ElementPattern::IdealDipole { axis: Axis::Z });
        assert_eq!(g.positions_wl()[0][1], -0.375);

        let g2 = ArrayGeometry::parse_config("kind = upa\nrows = 2\ncols = 2\nspacing_wl = 0.5\n").unwrap();
        assert_eq!(g2.len(), 4);
        assert_eq!(g2.pattern(), ElementPattern::Isotropic);

        assert!(ArrayGeometry::parse_config("kind = ring\nm = 4\nspacing_wl = 0.5\n").is_err());
        assert!(ArrayGeometry::parse_config("kind = ula\nspacing_wl = 0.5\n").is_err());
        assert!(ArrayGeometry::parse_config("kind ula\n").is_err());
    }

    #[test]
    fn translation_preserves_pattern_and_count() {
        let g = ArrayGeometry::ula(3, 0.2, Axis::Y, ElementPattern::Isotropic).unwrap();
        let t = g.translated([0.3, -1.7, 0.05]);
        assert_eq!(t.len(), 3);
        assert!((t.positions_wl()[0][1] - (-0.2 + -1.7)).abs() < 1e-15);
    }
}
