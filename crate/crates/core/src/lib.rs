//! Switching-controller synthesis for discrete-time stochastic systems against
//! LTLf specifications, using control barrier certificates.

pub mod automaton;
pub mod bounds;
pub mod cegis;
pub mod config;
pub mod controller;
pub mod decomposition;
pub mod expr;
pub mod formula;
pub mod lp;
pub mod pipeline;
pub mod poly;
pub mod scalar;
pub mod system;

pub use scalar::Scalar;

/// Double-precision polynomial.
pub type Poly = poly::Polynomial<f64>;
/// Double-precision interval.
pub type Interval = poly::Interval<f64>;
/// Double-precision stochastic system.
pub type System = system::StochasticSystem<f64>;
/// Double-precision semi-algebraic region.
pub type Region = system::Region<f64>;
/// Double-precision barrier certificate.
pub type Certificate = cegis::BarrierCertificate<f64>;
