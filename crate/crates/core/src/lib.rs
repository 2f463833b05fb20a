//! Geometry calibration of acoustic sensor networks from node-to-source
//! distance estimates.
//!
//! Given estimated distances between `N` sensor nodes and `K` acoustic
//! sources, all at unknown positions, [`engine::run`] recovers both position
//! sets up to a rigid motion:
//!
//! 1. inter-node distances are bracketed by triangle-inequality bounds and
//!    embedded with classical MDS ([`mds`]);
//! 2. sources and nodes are placed alternately by weighted least squares
//!    ([`wls`]), keeping only the sources that fit best when placing nodes;
//! 3. Gaussian perturbations of decreasing scale around the best geometry
//!    restart the alternation.
//!
//! [`crlb`] gives Cramér–Rao bounds for the position estimates and
//! [`sim`] / [`montecarlo`] provide a synthetic test bench.

pub mod align;
pub mod crlb;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mds;
pub mod montecarlo;
pub mod sim;
pub mod wls;

pub use align::{align, calibration_error, RigidTransform};
pub use crlb::{crlb_report, node_rmse_bound, source_rmse_bound, CrlbReport, Gammas};
pub use engine::{fit_select, iterate, opt_select, run, CalibrationResult, GardeConfig};
pub use error::{GardeError, Result};
pub use geometry::{cost_j, distance, residuals, Geometry, ObservationSet, Point2};
pub use mds::{classical_mds, complete_distances, CompletedDistanceMatrix};
pub use montecarlo::{run_montecarlo, ExperimentTable, MonteCarloConfig, Variant};
pub use sim::{generate_scenario, synthesize_observations, NoiseKind, NoiseModel, Scenario};
pub use wls::{localize_all_nodes, localize_all_sources, select_reference, wls_solve, WlsProblem};
