//! Numerical machinery around the Lifshitz formula for two parallel plates.
//!
//! * [`dispersion`]: plasma and Drude permittivities over the complex plane.
//! * [`response`]: the toy Green function g/(ω²ε(ω)), its poles and line spectra.
//! * [`fdt`]: exact fluctuation-dissipation and linear-response checks on
//!   finite Hamiltonian systems.
//! * [`cavity`]: reflection amplitudes, the dispersion function D_σ, mode
//!   spectra and winding numbers.
//! * [`casimir`]: Casimir energies, free energies and pressures by several
//!   independent routes, plus the Drude anomaly term.
//! * [`quad`]: quadrature, root finding and differentiation kernels.
//!
//! Units: ħ = c = k_B = 1 throughout.

pub mod casimir;
pub mod cavity;
pub mod dispersion;
pub mod fdt;
pub mod quad;
pub mod response;
pub mod spectrum;

pub use dispersion::{DispersionModel, ModelKind};
pub use spectrum::{LineSpectrum, SpectralLine};
pub use num_complex::Complex64;
