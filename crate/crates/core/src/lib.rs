//! Question-bias probes for a miniature visual question answering model.
//!
//! The crate generates a synthetic benchmark whose answer priors per
//! question type shift between training and out-of-distribution test
//! splits, trains a small attention model on full questions, their
//! question-type prefix, their content postfix or reordered variants, and
//! measures how much each model leans on the prefix.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the pipeline uses.

pub mod cli;
pub mod config;
pub mod debias;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod question;
pub mod report;
pub mod scalar;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Model = model::Model<f64>;
pub type Params = model::Params<f64>;
pub type Encodings = model::Encodings<f64>;
pub type TrainOutcome = trainer::TrainOutcome<f64>;
