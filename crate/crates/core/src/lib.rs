//! Large-horizon values of known-distribution multi-armed bandits under
//! two-attribute utilities `u(x, y)`.
//!
//! The value is computed four ways that check each other: an HJB finite
//! difference solver ([`pde`]), Monte Carlo simulation of strategies
//! ([`simulate`]), exact backward induction on small discrete instances
//! ([`simulate::dp`]), and closed forms ([`utility`], [`obm`]).

pub mod arms;
pub mod error;
pub mod hull;
pub mod obm;
pub mod pde;
pub mod quadrature;
pub mod regime;
pub mod simulate;
pub mod utility;

pub use arms::{Arm, ArmSet, Thresholds};
pub use error::{Error, Result};
pub use utility::{Phi, UtilityIndex};
