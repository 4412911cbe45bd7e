//! Exact Cantor-type set machinery: homogeneous perfect set construction,
//! closed-form Hausdorff dimension evaluation, a catalog of one-dimensional
//! quasisymmetric maps with distortion checking, and mass-distribution
//! certificates that bound the dimension of map images from below.

pub mod config;
pub mod construction;
pub mod dimension;
pub mod error;
pub mod experiment;
pub mod measure;
pub mod precision;
pub mod qsmap;
pub mod rational;
pub mod report;

pub use construction::{build_level, normalize_params, ParamSpec};
pub use error::{Error, Result};
pub use precision::FloatCtx;
pub use qsmap::QsMap;
