//! Finite-mixture maximum likelihood over behavioral types.

pub mod fit;
pub mod likelihood;
pub mod optim;
pub mod report;
pub mod se;
pub mod transform;

pub use fit::{fit_mixture, information_criteria, Diagnostics, EstimateResult, EstimationSpec};
pub use likelihood::{
    classify_subjects, log_likelihood, log_likelihood_tallies, modal_type, posteriors,
    subject_likelihood, tally, SubjectTally,
};
pub use optim::{central_gradient, central_hessian, maximize_bfgs, BfgsOptions};
pub use report::render_estimates;
pub use se::hessian_standard_errors;
pub use transform::Parameterization;
