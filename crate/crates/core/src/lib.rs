//! Superdirective antenna-array synthesis.
//!
//! The crate models a small antenna array by its far-field matrix over a
//! spherical sampling grid, solves for the excitation vector that maximizes
//! directivity (or gain under ohmic loss) toward a chosen direction, and
//! packages (steering field, optimal excitation) pairs into reproducible
//! datasets for learned beamforming experiments.
//!
//! The pipeline, in module order:
//!
//! * [`grid`] — spherical sampling grids and quadrature weights
//! * [`geometry`] — element positions and per-element patterns
//! * [`coupling`] — synthetic mutual-coupling mixing matrices
//! * [`field`] — far-field matrix synthesis and CSV import/export
//! * [`beamforming`] — directivity/gain evaluation and the optimal solvers
//! * [`dataset`] — training-pair generation, normalization, persistence
//!
//! Everything is deterministic: random quantities are drawn from seeded
//! streams, and serialized floats use shortest-round-trip formatting, so
//! identical configs reproduce identical artifacts byte for byte.

pub mod beamforming;
pub mod coupling;
pub mod dataset;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
mod linalg;

pub use beamforming::{
    directivity, gain, loss_resistance, pattern, random_search_oracle, solve_max_directivity,
    solve_max_gain, wrap_phase, CNorm, DirectivityOptions, Solution, SolveMethod,
};
pub use coupling::{make_coupling, CouplingMatrix};
pub use dataset::{
    generate_dataset, read_dataset, write_dataset, DatasetConfig, DatasetManifest,
    GeneratedDataset, NormStats, Sample,
};
pub use error::{Error, Result};
pub use field::{read_field_csv, synth_field_matrix, FieldMatrix};
pub use geometry::{ArrayGeometry, Axis, ElementPattern};
pub use grid::{make_grid, AngularGrid, Direction, Weighting};
