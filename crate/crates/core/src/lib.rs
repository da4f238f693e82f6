//! Quantum microcanonical density of states for finite spectra.
//!
//! Pure states of an `(n+1)`-level system are distributed uniformly with
//! respect to the Fubini–Study volume. The pushforward of that volume under
//! the energy expectation `E = Σ p_k E_k` is a piecewise polynomial in `E`
//! (a B-spline with knots at the eigenvalues), from which entropy,
//! temperature, specific heat and the canonical partition function follow.
//!
//! Module map:
//!
//! * [`spectrum`]: validated spectra, Ising-chain enumeration, file loading.
//! * [`dos`]: exact piecewise-polynomial density of states.
//! * [`montecarlo`]: sampling oracle for the density and the grand density.
//! * [`thermo`]: temperature, specific heat, critical points, equilibration.
//! * [`canonical`]: partition function and thermal energy.
//! * [`grand`]: constant simplex density over projector expectations.

pub mod canonical;
pub mod dos;
mod error;
pub mod grand;
pub mod montecarlo;
mod poly;
mod roots;
pub mod spectrum;
pub mod thermo;

pub use canonical::{
    beta_temperature_consistency, partition_closed, partition_closed_literal, partition_stable,
    thermal_energy, BetaConsistency, CanonicalEval, CanonicalMethod,
};
pub use dos::{build_dos, eval_truncated_power_direct, Piece, PiecewiseDos};
pub use error::{Error, Result};
pub use grand::{grand_dos, grand_dos_general, marginalize_to_energy, GrandDos};
pub use montecarlo::{estimate_dos, estimate_grand, GrandEstimate, McConfig, McEstimate, Sampler};
pub use spectrum::{
    ising_spectrum, load_spectrum, make_spectrum, parse_spectrum, IsingChainSpec, Spectrum,
};
pub use thermo::{
    critical_points, energy_of_temperature, equilibrate, specific_heat_at_e, temperature,
    thermo_curve, thermo_curve_at, Branch, CriticalPoint, EquilibrationResult, GridSpec, Side,
    ThermoCurve,
};

/// Total Fubini–Study volume `π^n / n!` of the pure-state manifold of a
/// `dim = n + 1` level system.
pub fn state_space_volume(dim: usize) -> f64 {
    let n = dim.saturating_sub(1);
    (1..=n).fold(1.0, |acc, k| acc * std::f64::consts::PI / k as f64)
}
