//! Simulation, estimation and design evaluation for switchback experiments
//! in Markovian environments.
//!
//! Days are i.i.d.; within a day, treatment alternates between two policies
//! according to a [`DesignSpec`], states follow a (possibly controlled)
//! Markov transition, and reward errors may be correlated over time
//! according to an [`ErrorCovSpec`].

pub mod covariance;
pub mod design;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod model;
pub mod panel;
pub mod rng;
pub mod simulate;
pub mod theory;

pub use covariance::ErrorCovSpec;
pub use design::{generate_actions, generate_actions_seeded, DesignKind, DesignSpec, FirstAction};
pub use error::{Error, Result};
pub use mdp::DiscreteMdp;
pub use model::{CoefficientLaw, Dgp, LinearDgpParams, LinearModel, NonlinearDgpParams};
pub use panel::Panel;
