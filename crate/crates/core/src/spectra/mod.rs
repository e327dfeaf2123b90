//! Cocycles over the control flow and their Lyapunov, Floquet and Morse spectra.

mod cocycle;
pub mod cycle_ratio;
mod floquet;
mod morse;
mod splitting;

pub use cocycle::{
    compound, edge_weights, gamma_cocycle, gamma_cocycle_all, gamma_cocycle_detailed,
    kappa_cocycle, CocycleOptions, EdgeWeights, GammaValue,
};
pub use floquet::{
    equilibrium_orbit, floquet_exponent, floquet_exponent_detailed, floquet_multipliers,
    monodromy, shoot_periodic_orbit, FloquetCocycle, FloquetValue, PeriodicOrbit, KAPPA_DOUBLINGS,
};
pub use morse::{morse_spectrum_bounds, SpectrumEstimate, SpectrumMethod, WitnessCycle};
pub use splitting::{
    component_orbits, component_splitting, estimate_splitting, HyperbolicSplittingEstimate,
    SplittingOptions, SplittingSample,
};
