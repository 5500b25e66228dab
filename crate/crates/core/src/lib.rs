//! Surrogate modelling of non-stationary and discontinuous black-box
//! functions by a three-stage scheme: the joint input–output data is
//! clustered with a Dirichlet process Gaussian mixture, the input space is
//! partitioned with calibrated one-vs-one support vector classifiers, and a
//! local (or categorical) Kriging model is fitted per identified regime.
//! Predictions recombine the local models in hard, soft or categorical mode.
//!
//! The [`pipeline`] module assembles the three stages; [`bench`] carries two
//! analytical validation problems (a piecewise 2-D function and the
//! snap-through response of a shallow two-bar truss) together with an
//! experiment runner that compares the recombination modes against a single
//! direct Kriging model.

pub mod bench;
pub mod data;
pub mod dist;
pub mod dpmm;
pub mod error;
pub mod gp;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod sobol;
pub mod svc;

pub use data::{ExperimentalDesign, Standardizer};
pub use error::{Error, Result};
pub use pipeline::{FittedPipeline, PipelineConfig, Prediction, Recombination};
