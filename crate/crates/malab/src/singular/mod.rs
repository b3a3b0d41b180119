//! The singular example: a Cantor-type set, a convex spike function built on it, a
//! degenerate subsolution and the assembled three-dimensional Dirichlet problem.

pub mod cantor;
pub mod example;
pub mod spike;
pub mod subsolution;

pub use cantor::{build_cantor, covering_sum, lengths_exact, lengths_f64, natural_cover_sum, CantorLengths, CantorLevel, CantorStructure};
pub use spike::{f_eval, separation_minimum, tail_bound, SeparationMinimum, Side, SpikeFunction};
pub use subsolution::{calibrated_subsolution, halton, halton_points, verify_subsolution, SampleRegion, SubsolutionReport, SubsolutionW};
pub use example::{assemble_example, boundary_phi, control_run, hbar_field, snapped_survivors, BoundaryConstant, ExampleChecks, ExampleConfig, ExampleRun};
