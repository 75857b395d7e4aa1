//! Bayesian neural steering controllers and the machinery to verify them.
//!
//! The crate is split along the pipeline:
//!
//! * [`nn`]: dense/convolutional forward pass, exact backpropagation, dropout, ADAM.
//! * [`bayes`]: MC dropout, mean-field variational inference and HMC over the
//!   fully-connected head, plus a single weight-sampling interface.
//! * [`uncertainty`]: predictive distributions, the deployed decision, decision
//!   confidence, mutual information and the warning tiers.
//! * [`sim`]: a deterministic 2D driving world with a forward camera.
//! * [`statcheck`]: Chernoff sample-size planning and the Bernoulli estimators.

pub mod bayes;
pub mod nn;
pub mod sim;
pub mod statcheck;
pub mod uncertainty;

pub mod rng;
