//! Exact representation counts of integers by integral quadratic forms in a
//! growing box, together with the analytic prediction (singular integral
//! times singular series) and the exponential-sum machinery behind it.

pub mod arith;
pub mod counting;
pub mod error;
pub mod expsum;
pub mod harness;
pub mod oscillatory;
pub mod quadform;
pub mod singseries;
