//! Simulation and analysis of bipartite multimode photon-number statistics.
//!
//! The crate covers twin-beam, split multimode thermal and coherent sources
//! observed through Bernoulli (binomial loss) detectors, and provides:
//!
//! * photon-number distributions and factorial moments ([`states`]),
//! * the binomial detection channel ([`detection`]),
//! * closed-form detected-photon correlations `g^{jk}` ([`theory`]),
//! * an exact truncated-enumeration engine for arbitrary orders ([`oracle`]),
//! * seeded, order-independent Monte Carlo shot generation ([`sampler`]),
//! * empirical estimators with bootstrap errors ([`estimators`]),
//! * the Schwarz, noise-reduction and high-order nonclassicality tests
//!   ([`criteria`]),
//! * shot-record files, sweep configs and the command-line front end
//!   ([`io`], [`config`], [`sweep`], [`cli`]).

pub mod cli;
pub mod config;
pub mod criteria;
pub mod detection;
pub mod error;
pub mod estimators;
pub mod io;
pub mod moments;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod states;
pub mod sweep;
pub mod theory;

mod sum;

pub use error::{Error, Result};
pub use detection::DetectionSpec;
pub use moments::JointMoments;
pub use sampler::{ShotRecord, ShotSeries};
pub use states::{SourceKind, SourceSpec};
