//! Independent oracles and application-level checks.

pub mod cdf;
pub mod inequalities;
pub mod monge;
pub mod report;
pub mod suite;
pub mod transfer;

pub use cdf::{monge_quantile_map, MeasureCdf};
pub use inequalities::{lambda_check, semigroup_inequality_suite};
pub use monge::{compare_transport_to_monge, monge_on_grid, pushforward_ks};
pub use report::{Fingerprint, Status, VerificationReport, Witness};
pub use suite::test_functions;
pub use transfer::{growth_check, herbst_moment_check, poincare_transfer_check, transfer_constant};
