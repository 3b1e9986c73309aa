//! Spherical sampling grid for far-field evaluation.
//!
//! Directions are sampled theta-major: theta runs over [0, 180] degrees
//! inclusive at both poles, phi over [0, 360) degrees half-open. A 5 degree
//! step therefore yields 37 x 72 = 2664 directions. Pole rows are kept as-is
//! (one duplicate direction per phi sample); the quadrature weighting decides
//! how much they count.
//!
//! Two weightings are supported. `Uniform` gives every sample weight 1, which
//! treats the raw direction list as the integration measure. `SinTheta`
//! weights each sample by sin(theta) dtheta dphi normalized so the weights
//! total 4 pi, the standard solid-angle quadrature.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A far-field direction in degrees. Phi is wrapped into [0, 360) on
/// construction, theta must lie in [0, 180].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    theta_deg: f64,
    phi_deg: f64,
}

impl Direction {
    pub fn new(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        if !theta_deg.is_finite() || !phi_deg.is_finite() {
            return Err(Error::InvalidInput("direction angles must be finite".into()));
        }
        if !(0.0..=180.0).contains(&theta_deg) {
            return Err(Error::InvalidInput(format!(
                "theta {theta_deg} deg outside [0, 180]"
            )));
        }
        Ok(Self {
            theta_deg,
            phi_deg: phi_deg.rem_euclid(360.0),
        })
    }

    #[inline]
    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    #[inline]
    pub fn phi_deg(&self) -> f64 {
        self.phi_deg
    }

    /// Cartesian unit vector (x, y, z) for this direction.
    pub fn unit_vector(&self) -> [f64; 3] {
        let th = self.theta_deg.to_radians();
        let ph = self.phi_deg.to_radians();
        [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    }
}

/// Quadrature weighting applied over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every direction counts with weight 1.
    Uniform,
    /// sin(theta) solid-angle weights, normalized to total 4 pi.
    SinTheta,
}

impl Weighting {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "sin-theta" => Ok(Weighting::SinTheta),
            other => Err(Error::InvalidInput(format!(
                "unknown weighting '{other}', expected 'uniform' or 'sin-theta'"
            ))),
        }
    }
}

/// Theta-major direction grid with per-direction quadrature weights.
#[derive(Debug, Clone)]
pub struct AngularGrid {
    theta_step_deg: f64,
    phi_step_deg: f64,
    weighting: Weighting,
    directions: Vec<Direction>,
    weights: Vec<f64>,
    n_theta: usize,
    n_phi: usize,
}

const DIVISOR_HINT: &str = "1, 2, 3, 4, 5, 6, 9, 10, 12, 15, 18, 20, 30, 36, 45, 60, 90, 180";

fn exact_divisions(span: f64, step: f64) -> Option<usize> {
    if !(step.is_finite() && step > 0.0) {
        return None;
    }
    let n = span / step;
    let rounded = n.round();
    if (n - rounded).abs() < 1e-9 && rounded >= 1.0 {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Build the grid for the given angular steps (degrees) and weighting.
///
/// Steps must divide their spans exactly: theta_step into 180, phi_step into
/// 360. Anything else is rejected so downstream index arithmetic stays exact.
pub fn make_grid(theta_step_deg: f64, phi_step_deg: f64, weighting: Weighting) -> Result<AngularGrid> {
    let nt = exact_divisions(180.0, theta_step_deg).ok_or_else(|| {
        Error::InvalidInput(format!(
            "theta step {theta_step_deg} does not divide 180; integer choices: {DIVISOR_HINT}"
        ))
    })?;
    let np = exact_divisions(360.0, phi_step_deg).ok_or_else(|| {
        Error::InvalidInput(format!(
            "phi step {phi_step_deg} does not divide 360; integer choices: {DIVISOR_HINT}"
        ))
    })?;

    let n_theta = nt + 1; // both poles included
    let n_phi = np;
    let mut directions = Vec::with_capacity(n_theta * n_phi);
    for ti in 0..n_theta {
        let theta = (ti as f64) * theta_step_deg;
        for pi in 0..n_phi {
            let phi = (pi as f64) * phi_step_deg;
            directions.push(Direction { theta_deg: theta, phi_deg: phi });
        }
    }

    let weights = match weighting {
        Weighting::Uniform => vec![1.0; directions.len()],
        Weighting::SinTheta => {
            let cell = theta_step_deg.to_radians() * phi_step_deg.to_radians();
            let raw: Vec<f64> = directions
                .iter()
                // sin(pi) in radians is ~1e-16, not 0; pin the poles exactly
                .map(|d| {
                    if d.theta_deg == 0.0 || d.theta_deg == 180.0 {
                        0.0
                    } else {
                        d.theta_deg.to_radians().sin() * cell
                    }
                })
                .collect();
            let total: f64 = raw.iter().sum();
            let scale = 4.0 * std::f64::consts::PI / total;
            raw.into_iter().map(|w| w * scale).collect()
        }
    };

    Ok(AngularGrid {
        theta_step_deg,
        phi_step_deg,
        weighting,
        directions,
        weights,
        n_theta,
        n_phi,
    })
}

impl AngularGrid {
    #[inline]
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    #[inline]
    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    #[inline]
    pub fn theta_step_deg(&self) -> f64 {
        self.theta_step_deg
    }

    #[inline]
    pub fn phi_step_deg(&self) -> f64 {
        self.phi_step_deg
    }

    /// Sum of all quadrature weights. Doubles as the automatic directivity
    /// normalization constant: with it, a single isotropic element scores
    /// directivity 1 under either weighting.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the grid direction closest to `dir` (ties resolve downward).
    pub fn nearest_index(&self, dir: &Direction) -> usize {
        let ti = (dir.theta_deg() / self.theta_step_deg)
            .round()
            .clamp(0.0, (self.n_theta - 1) as f64) as usize;
        let pi = (dir.phi_deg() / self.phi_step_deg).round() as usize % self.n_phi;
        ti * self.n_phi + pi
    }

    /// Exact lookup of an on-grid direction. Off-grid requests are errors
    /// and the message names the nearest available grid point.
    pub fn index_of(&self, dir: &Direction) -> Result<usize> {
        let ti = dir.theta_deg() / self.theta_step_deg;
        let pi = dir.phi_deg() / self.phi_step_deg;
        let on_grid = (ti - ti.round()).abs() < 1e-6 && (pi - pi.round()).abs() < 1e-6;
        if on_grid {
            let ti = ti.round() as usize;
            let pi = pi.round() as usize % self.n_phi;
            return Ok(ti * self.n_phi + pi);
        }
        let near = &self.directions[self.nearest_index(dir)];
        Err(Error::InvalidInput(format!(
            "direction ({}, {}) is not on the {} x {} deg grid; nearest grid point is ({}, {})",
            dir.theta_deg(),
            dir.phi_deg(),
            self.theta_step_deg,
            self.phi_step_deg,
            near.theta_deg(),
            near.phi_deg()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_degree_grid_has_2664_directions() {
        let g = make_grid(5.0, 5.0, Weighting::Uniform).unwrap();
        assert_eq!(g.len(), 37 * 72);
        assert_eq!(g.weight_sum(), 2664.0);
    }

    #[test]
    fn fifteen_degree_grid_has_312_directions() {
        let g = make_grid(15.0, 15.0, Weighting::SinTheta).unwrap();
        assert_eq!(g.len(), 13 * 24);
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!(
            (g.weight_sum() - four_pi).abs() < 1e-6,
            "sin-theta weights should total 4 pi, got {}",
            g.weight_sum()
        );
    }

    #[test]
    fn grid_counts_match_formula_for_divisor_steps() {
        for &(ts, ps) in &[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0), (9.0, 6.0), (30.0, 45.0), (2.5, 7.5)] {
            let g = make_grid(ts, ps, Weighting::Uniform).unwrap();
            let expect = ((180.0 / ts) as usize + 1) * ((360.0 / ps) as usize);
            assert_eq!(g.len(), expect, "steps ({ts}, {ps})");
        }
    }

    #[test]
    fn non_divisor_steps_rejected_with_hint() {
        let err = make_grid(7.0, 5.0, Weighting::Uniform).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("does not divide 180"), "{msg}");
        assert!(msg.contains("45"), "divisor list should be present: {msg}");
        assert!(make_grid(5.0, 7.0, Weighting::Uniform).is_err());
        assert!(make_grid(0.0, 5.0, Weighting::Uniform).is_err());
        assert!(make_grid(-5.0, 5.0, Weighting::Uniform).is_err());
    }

    #[test]
    fn theta_major_ordering_and_pole_duplicates() {
        let g = make_grid(90.0, 90.0, Weighting::Uniform).unwrap();
        // 3 theta rows x 4 phi columns, theta-major
        let got: Vec<(f64, f64)> = g.directions().iter().map(|d| (d.theta_deg(), d.phi_deg())).collect();
        assert_eq!(
            got,
            vec![
                (0.0, 0.0), (0.0, 90.0), (0.0, 180.0), (0.0, 270.0),
                (90.0, 0.0), (90.0, 90.0), (90.0, 180.0), (90.0, 270.0),
                (180.0, 0.0), (180.0, 90.0), (180.0, 180.0), (180.0, 270.0),
            ]
        );
    }

    #[test]
    fn sin_theta_pole_rows_carry_zero_weight() {
        let g = make_grid(45.0, 90.0, Weighting::SinTheta).unwrap();
        assert_eq!(g.weights()[0], 0.0);
        assert_eq!(g.weights()[g.len() - 1], 0.0);
        assert!(g.weights()[g.len() / 2] > 0.0);
    }

    #[test]
    fn direction_wraps_phi_and_validates_theta() {
        let d = Direction::new(90.0, 390.0).unwrap();
        assert_eq!(d.phi_deg(), 30.0);
        let d2 = Direction::new(90.0, -30.0).unwrap();
        assert_eq!(d2.phi_deg(), 330.0);
        assert_eq!(Direction::new(90.0, 30.0).unwrap(), d);
        assert!(Direction::new(190.0, 0.0).is_err());
        assert!(Direction::new(-1.0, 0.0).is_err());
        assert!(Direction::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn index_of_finds_on_grid_and_names_nearest_otherwise() {
        let g = make_grid(5.0, 5.0, Weighting::Uniform).unwrap();
        let dir = Direction::new(90.0, 90.0).unwrap();
        let k = g.index_of(&dir).unwrap();
        assert_eq!(g.directions()[k], dir);

        let off = Direction::new(91.0, 92.0).unwrap();
        let err = g.index_of(&off).unwrap_err().to_string();
        assert!(err.contains("nearest grid point is (90, 90)"), "{err}");
    }

    #[test]
    fn unit_vectors_hit_cardinal_axes() {
        let e = 1e-15;
        let x = Direction::new(90.0, 0.0).unwrap().unit_vector();
        assert!((x[0] - 1.0).abs() < e && x[1].abs() < e && x[2].abs() < e);
        let y = Direction::new(90.0, 90.0).unwrap().unit_vector();
        assert!(y[0].abs() < e && (y[1] - 1.0).abs() < e && y[2].abs() < e);
        let z = Direction::new(0.0, 0.0).unwrap().unit_vector();
        assert!(z[0].abs() < e && z[1].abs() < e && (z[2] - 1.0).abs() < e);
    }
}
