//! Reference computations that share no code with `peel-core`: generic ODE
//! integration, dense Kronecker algebra, per-sample loss sums, finite
//! differences, a Taylor matrix exponential and a projected-gradient search.

pub mod dense;
pub mod fd;
pub mod ode;
pub mod pgd;
