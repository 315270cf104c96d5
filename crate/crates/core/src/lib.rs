//! Opinion dynamics with separate private and expressed opinions.
//!
//! Every agent holds a private opinion, updated from the opinions its
//! neighbours express and anchored to its own initial view, and an
//! expressed opinion that blends the private one with the perceived public
//! opinion. The crate simulates the coupled system, computes its exact
//! steady state and analyses the disagreement it leaves behind.
//!
//! ```
//! use conformity::prelude::*;
//!
//! let inst = random_instance(18, 7, &BetaPresets::default()).unwrap();
//! let sys = steady_state(&inst.net, &inst.params, PublicOpinion::Global).unwrap();
//! let report = discrepancy_report(&inst.y0, &sys).unwrap();
//! assert!(report.v_yhat_star < report.v_y_star);
//! ```

pub mod analysis;
pub mod asch;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod graph;
pub mod sampling;
pub mod steady_state;

pub use error::{AssumptionViolation, Error, Result};

pub use nalgebra::{DMatrix, DVector};

pub mod prelude {
    pub use crate::analysis::{
        check_steady_inequalities, disagreement, discrepancy_report, ergodicity_coefficient, kappa,
        private_gap_lower_bound, resilience_sensitivity, DisagreementReport, InequalityChecks,
    };
    pub use crate::asch::{
        build_scenario, classify_individual, closed_form_expressed, closed_form_private, run_scenario,
        stubbornness_curve, threshold_prediction, AschModel, AschScenario, Classification, ThresholdPrediction,
        Variant,
    };
    pub use crate::dynamics::{
        initial_state, simulate, step, step_threshold, AgentParameters, Model, OpinionState, Outcome, PublicOpinion,
        SimulationResult, StopCriteria,
    };
    pub use crate::error::{AssumptionViolation, Error, Result};
    pub use crate::graph::{
        build_network, generate_k_regular, is_primitive, is_strongly_connected, ConformityMode, InfluenceNetwork,
        NetworkFile,
    };
    pub use crate::sampling::{random_instance, BetaPresets, Instance};
    pub use crate::steady_state::{
        build_p, compute_rs, compute_rs_with, consensus_value, limits, spectral_radius, steady_state, SystemBlocks,
        SystemMatrices, Validation,
    };
    pub use nalgebra::{DMatrix, DVector};
}
