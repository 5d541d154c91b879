//! Numerical core for studying single-filter front ends of convolutional
//! networks: analytic and learned kernels, iterative kernel inversion and
//! Retinex reconstruction, rotational-symmetry and Gaussian/Gabor analysis of
//! filters, and a from-scratch trainable single-filter classifier.

pub mod conv;
pub mod error;
pub mod gabor;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod parallel;
pub mod retinex;
pub mod symmetry;
pub mod toy;
pub mod transform;

pub use conv::{convolve_same, convolve_valid, kernel_convolve, PaddingMode};
pub use error::{Error, Result};
pub use grid::{Image, Kernel};
pub use kernels::{delta_kernel, discrete_laplacian, gaussian_kernel, log_kernel, GaussianParams};
pub use metrics::{corr2, entropy, normalize_zero_mean_unit_l2};
pub use transform::{resize, rotate, Interpolation};
