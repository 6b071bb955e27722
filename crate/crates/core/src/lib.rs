//! Lattice fermions with bond-dependent non-reciprocal hopping `t ± U X_i`
//! coupled to classical Ising bond variables `X_i = ±1`.
//!
//! The fermionic trace over a fixed bond field is a product over the
//! complex single-particle spectrum of the hopping matrix. Eigenvalues come
//! in conjugate pairs, so the weight is positive and the bond field can be
//! sampled without a sign problem.
//!
//! Modules, bottom up:
//!
//! - [`model`]: parameters, bond configurations, hopping matrices, Ising energy.
//! - [`spectral`]: eigenvalues, log-weight, energies, correlation matrix, velocity.
//! - [`exact`]: class sums at `t' = 0` (PBC) and brute-force enumeration.
//! - [`mc`]: Metropolis sampling, measurement, binning and jackknife.
//! - [`meanfield`]: self-consistent mean field and its phase boundary.
//! - [`analysis`]: specific heat, winding plateaus, correlations, domain walls,
//!   finite-size scaling, velocity histograms.
//! - [`oracle`]: independent references (many-body Fock space, Ising transfer matrix).
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32`, `f64`);
//! the aliases below fix `f64`, with `F32`-suffixed variants for `f32`.

pub mod analysis;
pub mod error;
pub mod exact;
pub mod mc;
pub mod meanfield;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Boundary, SpinConfig};
pub use scalar::Real;

pub type Params = model::ModelParams<f64>;
pub type Hopping = model::HoppingMatrix<f64>;
pub type Spectrum = spectral::SpectralData<f64>;
pub type HnSpectrum = exact::HnReducedSpectrum<f64>;
pub type ExactObservables = exact::Observables<f64>;
pub type Manifest = mc::RunManifest<f64>;
pub type Record = mc::SampleRecord<f64>;
pub type Chain = mc::ChainState<f64>;
pub type MeanFieldState = meanfield::MFState<f64>;

pub type ParamsF32 = model::ModelParams<f32>;
pub type HoppingF32 = model::HoppingMatrix<f32>;
pub type SpectrumF32 = spectral::SpectralData<f32>;
pub type ManifestF32 = mc::RunManifest<f32>;
pub type RecordF32 = mc::SampleRecord<f32>;
pub type MeanFieldStateF32 = meanfield::MFState<f32>;
