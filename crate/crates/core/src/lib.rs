//! Forward Search robust regression with its asymptotic distribution theory.
//!
//! The crate is organized around four pieces:
//!
//! * [`refdist`]: the reference error law (standard normal or unit-variance
//!   scaled t) and the functions of the trimming proportion `psi` built from it;
//! * [`forward_search`]: the Forward Search iteration on a [`Dataset`],
//!   producing a [`ForwardPath`] of forward and deletion residuals;
//! * [`asymptotics`]: asymptotic variances and pointwise [`BandCurve`]s for the
//!   forward plots;
//! * [`montecarlo`]: data-generating processes, direct simulation of the
//!   empirical processes and replicated experiments that compare the finite
//!   sample behaviour of the search with the asymptotic bands.

pub mod asymptotics;
pub mod error;
pub mod forward_search;
pub mod linalg;
pub mod montecarlo;
pub mod quadrature;
pub mod refdist;
pub mod special;

pub use asymptotics::{BandCurve, BandStatistic};
pub use error::{FsError, Result};
pub use forward_search::{
    Dataset, ForwardConfig, ForwardPath, ForwardStep, InitialMethod, LeastSquaresFit,
};
pub use linalg::Matrix;
pub use montecarlo::{DgpSpec, Regime, SimulationReport};
pub use refdist::{DistributionKind, PsiFunctions, ReferenceDistribution};
