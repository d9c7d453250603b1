//! Randomized statistics for stationary lattice random fields.
//!
//! The toolkit simulates stationary (and, where the model guarantees it,
//! ergodic) random fields on `Z^m`, draws randomizing points independently of
//! the field, builds the randomized statistics those points support
//! (normalized sums, broken-line partial-sum processes, empirical
//! distribution functions), and verifies their limit laws by Monte Carlo
//! comparison against closed-form oracles.
//!
//! Module map:
//! - [`rng`] — counter-based splittable random streams, keyed by
//!   `(master seed, purpose tag, indices)`, so field noise and randomizing
//!   points are independent by construction.
//! - [`field`] — field models and reproducible realizations on lattice
//!   windows, with ground-truth marginal parameters where known.
//! - [`region`] — growing families of averaging sets, their measures,
//!   lattice enumeration, and point samplers (uniform and rescaled
//!   densities).
//! - [`stats`] — set mean/variance, the truncated-second-moment fraction,
//!   normalized randomized sums and their replicated/tuple/indicator/vector
//!   variants, point-count schedules.
//! - [`empirical`] — randomized empirical distribution functions,
//!   sup-distances, empirical processes, broken lines, and the Kolmogorov
//!   and Wiener-sup limit laws.
//! - [`limit`] — the replication engine: Monte Carlo sampling of a statistic,
//!   goodness-of-fit distances, normal-distance curves and their log-log
//!   slope fits, covariance checks.
//! - [`gauss`] — scalar and bivariate normal CDF oracles.

pub mod empirical;
pub mod error;
pub mod field;
pub mod gauss;
pub mod limit;
pub mod region;
pub mod rng;
pub mod stats;

pub use empirical::{BrokenLine, Edf, EmpiricalProcess, KolmogorovLaw};
pub use error::Error;
pub use field::{FieldRealization, LatticeWindow, MarginalDist, ModelSpec, TruthOracle};
pub use limit::{RateCurve, ReplicationSample, ReplicationSpec, StatKind};
pub use region::{Region, RegionFamily, RegionShape, SamplingDensity};
pub use rng::RngKey;
pub use stats::{EstimateBundle, KnSchedule, SetContext, SumMode, TauArray};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
