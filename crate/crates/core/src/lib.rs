//! Adaptive estimation of bandlimited graph signals with LMS and RLS
//! filters, transient mean-square deviation theory, and a Monte Carlo
//! harness to check one against the other.

pub mod error;
pub mod estimators;
pub mod graph;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod sampling;
pub mod theory;

pub use error::{Error, Result};
pub use estimators::{lms_step, msd, msd_db, rls_init, rls_step, LmsState, RlsState, SignalModel};
pub use graph::{build_knn_graph, gft_basis, laplacian, BandBasis, GftBasis, Graph, StationTable};
pub use harness::{
    compare, run_experiment, run_monte_carlo, CaseParams, CaseSetup, ExperimentConfig, RunResult,
    SamplingStrategy,
};
pub use noise::{build_cw, NoiseModel, Scenario};
pub use sampling::{greedy_max_lambda_min, random_sampling, SamplingSet};
pub use theory::{Algorithm, TheoryCurve, TheoryMode};
