//! Blurring and total-variation deblurring of one-dimensional bar codes.
//!
//! A bar code is a binary signal on `[0, 1]`, stored as its sorted list of
//! interfaces. The crate blurs codes with compactly supported kernels, scores
//! candidate reconstructions under three TV functionals, checks the sufficient
//! conditions under which the original code is provably the unique minimizer,
//! searches for minimizers exhaustively on a grid, and runs a phase-field
//! gradient flow that deblurs noisy samples.

pub mod appendix;
pub mod barcode;
pub mod certify;
pub mod convolve;
pub mod energy;
pub mod error;
pub mod io;
pub mod kernel;
pub mod oracle;
pub mod poly;
pub mod quadrature;
pub mod solver;

pub use barcode::{BarCode, EndpointConstraint, GeneratorConfig};
pub use certify::{Certificate, CertificateKind, Condition};
pub use convolve::{GridSamples, GridSpec, Provenance, Signal, SignalData};
pub use energy::{EnergyParams, EnergyReport, Functional};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelAdmissibility};
pub use oracle::{OracleConfig, OracleResult, SearchSpace};
pub use poly::{PiecewisePoly, Poly};
pub use solver::{DeblurOutcome, NoiseConfig, SolverConfig};
