//! Frequency-fitted two-stage Gauss Runge-Kutta methods for oscillatory
//! initial value problems, with tools to analyse and benchmark them.

mod ext;

pub mod analysis;
pub mod bench;
pub mod fitting;
pub mod integrator;
pub mod problems;
pub mod tableau;
