//! Numerics laboratory for Gaussian random Fourier fields on the torus and
//! the derivative nonlinear Schrodinger hierarchy built on top of them:
//! conserved functionals, Wiener-chaos tail statistics, mass-marginal
//! densities, measures conditioned on fixed mass, and the truncated flow.

pub mod acceptance;
pub mod chaos_stats;
pub mod dnls_flow;
pub mod fixed_mass;
pub mod functionals;
pub mod mass_distributions;
pub mod rng;
pub mod stats;
pub mod torus_field;
