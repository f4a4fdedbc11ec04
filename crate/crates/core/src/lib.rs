//! Maximum-likelihood estimation for the multivariate Student-t distribution.
//!
//! Four fixed-point schemes (EM, aEM, MMF, GMMF) plus ECME, SQUAREM and
//! DAAREM acceleration, and a Student-t noise estimator for grayscale images.

pub mod accel;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod special;

pub use accel::{accelerated_fit, AccelConfig, DaaremConfig, Scheme, SquaremConfig};
pub use error::{Error, Result};
pub use estimators::{fit, AlgorithmKind, FitConfig, FitResult, FitStatus};
pub use linalg::{Matrix, SpdMatrix};
pub use model::{StudentTParams, WeightedSample};
pub use noise::{estimate_noise, GrayImage, HomogeneityTestConfig, RegionReport};
