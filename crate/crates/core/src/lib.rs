//! Gradient estimators for expectations of black-box functions over discrete
//! random variables.
//!
//! The crate covers three families of estimators for `d/dl E_{q_l}[f(z)]`:
//!
//! * finite-difference estimators ([`estimators::ram`], sampled RAM, ARGMAX, ARM),
//! * continuous-relaxation estimators (Gumbel-Softmax and piecewise-linear
//!   relaxations in plain and improved form, see [`relax`]),
//! * score-function estimators (REINFORCE, REBAR, RELAX+).
//!
//! Every estimator returns gradients with respect to logits. The [`oracle`]
//! module enumerates small systems exactly and measures empirical bias and
//! variance; [`optim`] drives Adam over logits with any estimator, and
//! [`graph`] supplies the DIMACS max-clique workload.

pub mod control;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod objective;
pub mod optim;
pub mod oracle;
pub mod relax;
pub mod rng;

pub use dist::{BinaryLogits, CategoricalLogits, DiscreteSample, Distribution, HierarchicalBernoulli};
pub use error::{Error, Result};
pub use estimators::{Estimator, GradientEstimate, Mode};
pub use objective::Objective;
pub use relax::RelaxationKind;
pub use rng::RngStream;
