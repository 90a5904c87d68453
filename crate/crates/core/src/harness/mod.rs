//! Experiment configs, runners and result emission.

pub mod config;
pub mod emit;
pub mod experiment;

pub use config::{ExperimentConfig, Resolved};
pub use emit::{Format, RECORD_HEADER};
pub use experiment::{
    aggregate, excess_certificate, fit_decay_rate, run_error_curve, run_phase_transition, Aggregate,
    CertificateReport, DecayFit, ExperimentResult, PhaseTransition, Record,
};
