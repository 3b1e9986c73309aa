//! Far-field matrix synthesis.
//!
//! The field matrix E collects, per grid direction k and element i, the
//! complex element response
//!
//! ```text
//! E[k][i] = g_i(theta_k, phi_k) * exp(j 2 pi (r_i . u_k))
//! ```
//!
//! with g_i the element amplitude pattern, r_i the element position in
//! wavelengths and u_k the unit direction vector. Rows follow the grid's
//! theta-major order. An optional coupling matrix right-multiplies E so each
//! stored column becomes the effective field of one excited port including
//! leakage from its neighbors.

use std::io::{BufRead, Write};

use ndarray::Array2;
use num_complex::Complex64;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::grid::{make_grid, AngularGrid, Direction, Weighting};

/// Complex element responses over a full angular grid, together with the
/// grid and geometry they were synthesized from.
#[derive(Debug, Clone)]
pub struct FieldMatrix {
    grid: AngularGrid,
    geometry: ArrayGeometry,
    values: Array2<Complex64>,
}

/// Synthesize the field matrix for `geometry` over `grid`, optionally mixed
/// through a mutual-coupling matrix.
pub fn synth_field_matrix(
    geometry: &ArrayGeometry,
    grid: &AngularGrid,
    coupling: Option<&CouplingMatrix>,
) -> Result<FieldMatrix> {
    let m = geometry.len();
    if let Some(c) = coupling {
        if c.m() != m {
            return Err(Error::InvalidInput(format!(
                "coupling matrix is {}x{} but the array has {} elements",
                c.m(),
                c.m(),
                m
            )));
        }
    }

    let two_pi = 2.0 * std::f64::consts::PI;
    let mut values = Array2::from_elem((grid.len(), m), Complex64::new(0.0, 0.0));
    for (k, dir) in grid.directions().iter().enumerate() {
        let u = dir.unit_vector();
        let g = geometry.pattern().amplitude(u);
        for (i, r) in geometry.positions_wl().iter().enumerate() {
            let phase = two_pi * (r[0] * u[0] + r[1] * u[1] + r[2] * u[2]);
            values[[k, i]] = Complex64::from_polar(g, phase);
        }
    }

    if let Some(c) = coupling {
        let cm = c.values();
        let mut mixed = Array2::from_elem((grid.len(), m), Complex64::new(0.0, 0.0));
        for k in 0..grid.len() {
            for j in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    acc += values[[k, i]] * cm[[i, j]];
                }
                mixed[[k, j]] = acc;
            }
        }
        values = mixed;
    }

    Ok(FieldMatrix { grid: grid.clone(), geometry: geometry.clone(), values })
}

impl FieldMatrix {
    /// Assemble from parts, validating the dimensions. Useful for imported
    /// matrices and synthetic test fixtures.
    pub fn from_parts(
        grid: AngularGrid,
        geometry: ArrayGeometry,
        values: Array2<Complex64>,
    ) -> Result<Self> {
        if values.nrows() != grid.len() || values.ncols() != geometry.len() {
            return Err(Error::InvalidInput(format!(
                "field values are {}x{} but grid has {} directions and array {} elements",
                values.nrows(),
                values.ncols(),
                grid.len(),
                geometry.len()
            )));
        }
        Ok(Self { grid, geometry, values })
    }

    #[inline]
    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    #[inline]
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    #[inline]
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    #[inline]
    pub fn num_directions(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.values.ncols()
    }

    /// Element responses toward one on-grid direction (the steering row).
    pub fn steering_field(&self, dir: &Direction) -> Result<Vec<Complex64>> {
        let k = self.grid.index_of(dir)?;
        Ok(self.values.row(k).to_vec())
    }

    /// Write `theta_deg,phi_deg,elem_index,re,im` rows in grid-major order.
    /// Values round-trip exactly through the shortest-representation float
    /// formatting.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "theta_deg,phi_deg,elem_index,re,im")?;
        for (k, dir) in self.grid.directions().iter().enumerate() {
            for i in 0..self.num_elements() {
                let v = self.values[[k, i]];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    dir.theta_deg(),
                    dir.phi_deg(),
                    i,
                    v.re,
                    v.im
                )?;
            }
        }
        Ok(())
    }
}

/// Read a field matrix CSV back into values on a reconstructed grid.
///
/// The file stores directions and complex entries but neither the weighting
/// nor the geometry, so both are supplied by the caller. The geometry only
/// needs the right element count.
pub fn read_field_csv<R: BufRead>(
    input: R,
    weighting: Weighting,
    geometry: ArrayGeometry,
) -> Result<FieldMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("field csv is empty".into()))?
        .map_err(Error::Io)?;
    if header.trim() != "theta_deg,phi_deg,elem_index,re,im" {
        return Err(Error::InvalidInput(format!("unexpected field csv header '{header}'")));
    }

    let mut rows: Vec<(f64, f64, usize, Complex64)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::InvalidInput(format!("field csv line {}: expected 5 columns", n + 2)));
        }
        let field = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("field csv line {}: bad number '{s}'", n + 2)))
        };
        let elem: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("field csv line {}: bad element index", n + 2)))?;
        rows.push((
            field(parts[0])?,
            field(parts[1])?,
            elem,
            Complex64::new(field(parts[3])?, field(parts[4])?),
        ));
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("field csv has no data rows".into()));
    }

    let m = geometry.len();
    let mut thetas: Vec<f64> = rows.iter().map(|r| r.0).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thetas.dedup();
    let mut phis: Vec<f64> = rows.iter().map(|r| r.1).collect();
    phis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    phis.dedup();
    if thetas.len() < 2 || phis.len() < 2 {
        return Err(Error::InvalidInput("field csv covers too few directions to infer the grid".into()));
    }
    let theta_step = thetas[1] - thetas[0];
    let phi_step = phis[1] - phis[0];
    let grid = make_grid(theta_step, phi_step, weighting)?;
    if grid.len() * m != rows.len() {
        return Err(Error::InvalidInput(format!(
            "field csv has {} rows but grid x elements expects {}",
            rows.len(),
            grid.len() * m
        )));
    }

    let mut values = Array2::from_elem((grid.len(), m), Complex64::new(0.0, 0.0));
    for (theta, phi, elem, v) in rows {
        if elem >= m {
            return Err(Error::InvalidInput(format!(
                "field csv element index {elem} out of range for {m} elements"
            )));
        }
        let k = grid.index_of(&Direction::new(theta, phi)?)?;
        values[[k, elem]] = v;
    }
    FieldMatrix::from_parts(grid, geometry, values)
}
