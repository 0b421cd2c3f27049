// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point detection for piecewise-linear Gaussian regressions scored
//! by the MDL marginal likelihood, with Bayesian break-location sampling and
//! ensemble forecasting.

pub mod bayes;
pub mod cli;
pub mod detect;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mdl;
pub mod segstats;
pub mod select;
pub mod simlab;

pub use detect::{detect, DetectorConfig, Method, MethodResult};
pub use error::{Error, Result};
pub use mdl::{mdl_criterion, mdl_marginal_loglik, MdlScore};
pub use segstats::{SegmentStats, Segmentation, TimeSeriesDataset};
