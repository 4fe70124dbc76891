//! Quantum correlations of GHZ states measured in multi-outcome bases,
//! their overlap with local-realistic predictions, and the resulting
//! quantum-to-classical ratios.

pub mod cli;
pub mod discrete;
pub mod error;
pub mod estimator;
pub mod lrmodel;
pub mod optim;
pub mod qcorr;
pub mod record;
pub mod scaling;
pub mod wwwzb;

pub use error::{Error, Result};
pub use estimator::{closed_form_l, mc_overlap, MCEstimate};
pub use qcorr::{FrameKind, OutcomeFrame, PhaseSum, Scenario, SettingVector};
pub use scaling::{fit_scaling, qcr, FitModel, ScalingFit, TableRow};
