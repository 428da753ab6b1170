//! Stability certification and simulation for an anti-stable wave equation
//! under boundary control by a second, dynamically coupled wave equation.
//!
//! The plant is a unit string with a velocity-proportional free end that
//! pumps energy into the domain and a Dirichlet-actuated base. The
//! controller is another string, driven by the measured base strain and
//! damped at its far end; its base trace is the actuation. Closing the loop
//! turns the pair into a single hyperbolic system whose boundary scattering
//! decides everything.
//!
//! The crate certifies exponential decay of that interconnection by solving
//! a small linear-matrix-inequality feasibility problem in the weights of an
//! exponentially tilted energy functional ([`lmi`]), maximizes the certified
//! rate by bisection, extends certificates to parameter boxes with a common
//! witness ([`robust`]), cross-checks against the transcendental spectrum
//! ([`spectrum`]) and closed-form rates ([`analytic`]), and validates the
//! whole story in the time domain with an exact characteristic integrator
//! ([`sim`]).

// Parameter validation writes `!(x > 0.0)` so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod error;
pub mod lmi;
pub mod model;
pub mod robust;
pub mod sim;
pub mod spectrum;

pub use analytic::{
    alpha_backstepping, alpha_dyn, equilibrium_set, match_k, positive_gain_witness,
    stability_chart, EquilibriumSet, StabilityChart,
};
pub use config::Config;
pub use error::{Error, Result};
pub use lmi::{
    build_psi, estimate_overshoot, feasibility, max_decay_rate, CertificationResult, Mode,
    MultiplierVector, PsiMatrix,
};
pub use model::{delta, ControllerParams, ExtReal, GBound, PlantParams, UncertaintyBox};
pub use robust::{certify_robust, delta_max, implication_check, search_box, RobustReport};
pub use sim::{run, SimConfig, SimTrace};
pub use spectrum::{
    backstepping_poles, closed_form_poles, find_system_roots, find_target_roots, Rect,
};

pub use num_complex::Complex64;
