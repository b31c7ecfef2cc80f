//! Consistency experiments: sweeps against fine-grid oracles, rate fitting,
//! and the randomized invariant suite.

pub mod invariants;
pub mod rates;
pub mod sweeps;

pub use invariants::{
    invariant_suite, invariant_suite_with, InvariantEntry, InvariantReport, SuiteHooks,
};
pub use rates::{fit_rate, RateReport, ERROR_FLOOR};
pub use sweeps::{
    consistency_error, contraction_test, discretize, probe_times, sweep_n, sweep_tau,
    ContractionOutcome, Discretization, InitialDatum, OracleConfig,
};
