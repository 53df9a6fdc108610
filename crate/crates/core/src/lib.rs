//! Off-the-grid recovery of point sources from noisy bandlimited Fourier
//! measurements. The measurement operator never leaves a low-frequency
//! ball of radius R, yet sources separated well below 1/R are recovered:
//! random Gaussian frequencies make the measurement tensor a product of
//! well-conditioned Vandermonde-like factors, and a whitened matrix
//! pencil splits it.
//!
//! The pieces, bottom to top:
//!
//! - [`model`]: source configurations and the noisy, memoizing
//!   measurement oracle;
//! - [`sampling`]: cutoff and sample-count selection, the frequency plan,
//!   and measurement tensor assembly;
//! - [`tensor`] and [`kernels`]: the dense third-order tensor with its
//!   contraction primitive, and thin wrappers over LAPACK;
//! - [`jennrich`]: whitening plus simultaneous diagonalization of two
//!   tensor slices;
//! - [`recovery`]: the composed pipeline, plus the matching metrics used
//!   to score estimates;
//! - [`pencil1d`]: the classical Hankel pencil on the integer grid, as a
//!   one-dimensional baseline;
//! - [`gmm`]: learning spherical Gaussian mixtures by deconvolving the
//!   empirical characteristic function into this measurement model.

pub mod error;
pub mod gmm;
pub mod jennrich;
pub mod kernels;
pub mod model;
pub mod pencil1d;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod tensor;

pub use error::{Error, Result};
pub use gmm::{
    deconvolved_oracle, empirical_cf, learn_gmm, read_samples, sample_gmm, write_samples,
    DeconvolvedOracle, GmmLearned, GmmModel, SigmaDiagnostic,
};
pub use jennrich::{
    sep_lower_bound, tensor_decomp, tensor_decomp_with, DecompOptions,
    DecompositionDiagnostics, JennrichResult,
};
pub use model::{
    random_instance, FrequencyOracle, MeasurementOracle, NoiseModel, SourceSet, WeightLaw,
};
pub use pencil1d::{
    build_hankel, pencil_recover, recover_1d, vandermonde_cond, HankelPair, Pencil1dResult,
};
pub use recovery::{
    matched_assignment, matched_error, recover, recover_with_plan, sum_matched_assignment,
    sum_matched_error, RecoverOptions, RecoveryDiagnostics, RecoveryResult,
};
pub use sampling::{
    augmented_factor, build_tensor, choose_cutoff, choose_sample_count, draw_plan,
    expected_gram_matrix, gaussian_factor, gershgorin_radii, unit_sphere, CutoffReport,
    SamplePlan, TensorBuild,
};
pub use tensor::{factor_product, Tensor3};
