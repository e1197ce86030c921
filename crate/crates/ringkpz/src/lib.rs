//! Numerical laboratory for height fluctuations of the stationary TASEP on a
//! ring: exact finite-size distributions from the Bethe-ansatz contour
//! formula, the relaxation-scale crossover limits, and stochastic
//! cross-checks (Monte Carlo and a small-system CTMC oracle).

pub mod bethe;
pub mod dd;
pub mod error;
pub mod exactdist;
pub mod limitdist;
pub mod linalg;
pub mod scalar;
pub mod specfun;
pub mod table;
