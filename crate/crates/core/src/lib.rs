//! Explicit metastability bounds for Cesàro means of nonexpansive linear
//! operators on uniformly convex spaces, with empirical checks on ℓ_p^d.

pub mod bounds;
pub mod ergodic;
pub mod error;
pub mod moduli;
pub mod rational;
pub mod spaces;
pub mod verify;

pub use bounds::{
    agt_phi, bound_parameters, compute_breakdown, glb_ii_bound, hilbert_phi, iterate_fn,
    phi_log_estimate, theta_glb, BoundBreakdown, BoundVariant, CounterFunction, Log10Interval, Phi,
    DEFAULT_DIGIT_BUDGET,
};
pub use ergodic::{CesaroStream, Lemma33, Trajectory};
pub use error::{Error, Result};
pub use moduli::{check_uc_inequality, estimate_clarkson, Modulus, ModulusKind};
pub use spaces::{gen_nonexpansive, Certificate, LpSpace, NamedOp, Operator, OperatorRecipe};
pub use verify::{
    find_min_witness, glb_property_check, proof_trace, verify_theorem, window_diameter,
    MetastabilityReport, Outcome, ProofTrace, VerifyOptions, WitnessSearch,
};
