//! Mixed quantum–classical nonadiabatic dynamics for two-state, one-dimensional
//! models: Born–Oppenheimer, fewest-switches surface hopping with momentum
//! rescaling, and quantum trajectory surface hopping with a continuous quantum
//! force, plus an exact split-operator wavepacket reference.
//!
//! Atomic units with ħ = 1 are used everywhere.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod qgrid;
pub mod report;

pub use dynamics::{
    attempt_hop, derivatives, energy_canonical, hop_probability, impulsive_jump, rk4_step,
    trajectory_energy, EngineKind, HopDirection, HopKind, HopOutcome, Stepper, TrajectoryState,
};
pub use ensemble::{
    consistency_report, propagate_member, run_ensemble, run_ensemble_with, sample_initial,
    ConsistencyReport, EnsembleFrame, EnsembleOutput, Execution, InitialCondition, RunConfig,
    Surface,
};
pub use error::{ConfigError, DynamicsError, ModelError, RunError};
pub use model::{
    density_to_adiabatic, density_to_diabatic, AdiabaticPoint, DensityMatrix2, DiabaticPoint,
    FlippedCoupling, ModelPotential, TwoStateModel, UncoupledHarmonic,
};
pub use qgrid::{
    init_wavepacket, run_exact, ExactConfig, ExactRun, Grid, SplitOperator, Wavefunction,
};
pub use report::{
    compare, jump_table, summarize, Comparison, ComparisonRow, Deviation, JumpRow, RunSummary,
    Tolerances, Verdict,
};
