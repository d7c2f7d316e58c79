//! Exact fluctuation-dissipation bookkeeping for finite Hamiltonian systems.
//!
//! Every spectral object of a finite system is a finite sum of delta lines at
//! the Bohr frequencies E_μ − E_ν, so correlators and Green functions are
//! built from [`LineSpectrum`]s with no discretization error.
//!
//! Conventions (ħ = 1): J_ij(ω) is the Fourier transform of ⟨A_i(t) A_j(0)⟩,
//!
//! J_ij(ω) = 2π Σ_{νμ} p_ν (A_i)_{νμ} (A_j)_{μν} δ(ω − E_μ + E_ν),
//!
//! and G^r_ij(t) = −iθ(t)⟨[A_i(t), A_j(0)]⟩. The detailed-balance partner of
//! J_ij is the reversed-order correlator ⟨A_j(0) A_i(t)⟩, which equals
//! `correlator_line_spectrum(j, i)` mirrored in ω.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::quad::{dopri5, OdeOptions, QuadError};
use crate::spectrum::{LineSpectrum, SpectralLine};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FdtError {
    #[error("{name} is not Hermitian (deviation {deviation:e})")]
    NonHermitian { name: String, deviation: f64 },
    #[error("eigen-decomposition residual {residual:e} above 1e-10")]
    EigenResidual { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no observable with index {0}")]
    UnknownObservable(usize),
    #[error("a positive spectrum needs a self-paired observable, got ({i}, {j})")]
    NonHermitianObservable { i: usize, j: usize },
    #[error("omega = {omega} coincides with a spectral line")]
    OnPole { omega: f64 },
    #[error("static (omega = 0) weight {static_weight:e} in the correlator: lhs {lhs}, rhs {rhs}")]
    ZeroFrequencyLine { static_weight: f64, lhs: f64, rhs: f64 },
    #[error("error ratio {ratio} under halving of the drive is below 3.5")]
    NonlinearRegime { ratio: f64 },
    #[error(transparent)]
    Numerics(#[from] QuadError),
}

/// A finite quantum system in a Gibbs state.
#[derive(Debug, Clone)]
pub struct QuantumSystem {
    hamiltonian: CMatrix,
    observables: Vec<(String, CMatrix)>,
    beta: f64,
    energies: Vec<f64>,
    basis: CMatrix,
    populations: Vec<f64>,
    log_partition: f64,
    eigen_observables: Vec<CMatrix>,
    merge_tol: f64,
}

fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

impl QuantumSystem {
    pub fn new(hamiltonian: CMatrix, observables: Vec<(String, CMatrix)>, beta: f64) -> Result<Self, FdtError> {
        let dim = hamiltonian.nrows();
        if dim < 2 || hamiltonian.ncols() != dim {
            return Err(FdtError::InvalidParameter(format!("hamiltonian must be square with dim >= 2, got {}x{}", dim, hamiltonian.ncols())));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(FdtError::InvalidParameter(format!("beta must be finite and non-negative, got {beta}")));
        }
        let dev = hermiticity_deviation(&hamiltonian);
        if dev > 1e-12 {
            return Err(FdtError::NonHermitian { name: "hamiltonian".into(), deviation: dev });
        }
        for (name, a) in &observables {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(FdtError::InvalidParameter(format!("observable {name} has the wrong shape")));
            }
            let dev = hermiticity_deviation(a);
            if dev > 1e-12 {
                return Err(FdtError::NonHermitian { name: name.clone(), deviation: dev });
            }
        }
        let h = hermitize(&hamiltonian);
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let basis = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        let hscale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut residual = 0.0f64;
        for (c, &e) in energies.iter().enumerate() {
            let v = basis.column(c);
            let r = &h * v - v.scale(e);
            residual = residual.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max) / hscale);
        }
        if residual > 1e-10 {
            return Err(FdtError::EigenResidual { residual });
        }
        let e_min = energies[0];
        let boltzmann: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
        let z: f64 = boltzmann.iter().sum();
        let populations = boltzmann.iter().map(|b| b / z).collect();
        let log_partition = z.ln() - beta * e_min;
        let eigen_observables = observables.iter().map(|(_, a)| hermitize(&(basis.adjoint() * a * &basis))).collect();
        let merge_tol = 1e-12 * energies.iter().fold(1.0, |m: f64, e| m.max(e.abs()));
        Ok(Self { hamiltonian: h, observables, beta, energies, basis, populations, log_partition, eigen_observables, merge_tol })
    }

    /// H = ½ω₀σ_z with the single observable σ_x.
    pub fn two_level(omega0: f64, beta: f64) -> Result<Self, FdtError> {
        let c = |re: f64| Complex64::new(re, 0.0);
        let h = CMatrix::from_row_slice(2, 2, &[c(0.5 * omega0), c(0.0), c(0.0), c(-0.5 * omega0)]);
        let sx = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        Self::new(h, vec![("sigma_x".into(), sx)], beta)
    }

    /// Harmonic oscillator truncated to the lowest `dim` levels, with the
    /// position operator x = (a + a†)/√(2mω₀) and momentum p.
    pub fn oscillator(dim: usize, omega0: f64, mass: f64, beta: f64) -> Result<Self, FdtError> {
        if !(omega0 > 0.0 && mass > 0.0) {
            return Err(FdtError::InvalidParameter("oscillator needs omega0 > 0 and mass > 0".into()));
        }
        let h = CMatrix::from_fn(dim, dim, |r, c| if r == c { Complex64::new(omega0 * (r as f64 + 0.5), 0.0) } else { Complex64::default() });
        let lower = |r: usize, c: usize| if c == r + 1 { (c as f64).sqrt() } else { 0.0 };
        let sx = 1.0 / (2.0 * mass * omega0).sqrt();
        let sp = (mass * omega0 / 2.0).sqrt();
        let x = CMatrix::from_fn(dim, dim, |r, c| Complex64::new(sx * (lower(r, c) + lower(c, r)), 0.0));
        let p = CMatrix::from_fn(dim, dim, |r, c| Complex64::new(0.0, sp * (lower(c, r) - lower(r, c))));
        Self::new(h, vec![("x".into(), x), ("p".into(), p)], beta)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// ln Q with Q = Σ e^{−βE_μ}.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn observable_names(&self) -> Vec<&str> {
        self.observables.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn observable(&self, i: usize) -> Result<&CMatrix, FdtError> {
        self.observables.get(i).map(|(_, a)| a).ok_or(FdtError::UnknownObservable(i))
    }

    pub fn observable_index(&self, name: &str) -> Option<usize> {
        self.observables.iter().position(|(n, _)| n == name)
    }

    /// Gibbs density matrix in the original basis.
    pub fn density_matrix(&self) -> CMatrix {
        let d = CMatrix::from_fn(self.dim(), self.dim(), |r, c| if r == c { Complex64::new(self.populations[r], 0.0) } else { Complex64::default() });
        &self.basis * d * self.basis.adjoint()
    }

    /// Removes the blocks of `a` that connect degenerate levels, i.e. the
    /// part of `a` commuting with H.
    pub fn without_static_part(&self, a: &CMatrix) -> CMatrix {
        let mut e = self.basis.adjoint() * a * &self.basis;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                if (self.energies[r] - self.energies[c]).abs() <= self.merge_tol {
                    e[(r, c)] = Complex64::default();
                }
            }
        }
        hermitize(&(&self.basis * e * self.basis.adjoint()))
    }

    fn check(&self, i: usize) -> Result<&CMatrix, FdtError> {
        self.eigen_observables.get(i).ok_or(FdtError::UnknownObservable(i))
    }

    /// Lines at E_μ − E_ν with weight 2π w(p_ν, p_μ) (A_i)_{νμ}(A_j)_{μν}.
    fn pair_spectrum<W: Fn(f64, f64) -> f64>(&self, i: usize, j: usize, w: W) -> Result<LineSpectrum, FdtError> {
        let ai = self.check(i)?;
        let aj = self.check(j)?;
        let n = self.dim();
        let mut lines = Vec::with_capacity(n * n);
        for nu in 0..n {
            for mu in 0..n {
                let m = ai[(nu, mu)] * aj[(mu, nu)];
                if m == Complex64::default() {
                    continue;
                }
                let weight = m * (2.0 * PI * w(self.populations[nu], self.populations[mu]));
                lines.push(SpectralLine { frequency: self.energies[mu] - self.energies[nu], weight });
            }
        }
        Ok(LineSpectrum::from_lines(lines, self.merge_tol))
    }

    pub fn correlator_line_spectrum(&self, i: usize, j: usize) -> Result<LineSpectrum, FdtError> {
        self.pair_spectrum(i, j, |p_nu, _| p_nu)
    }

    /// J_AA for a single Hermitian observable, flagged positive.
    pub fn positive_correlator_spectrum(&self, i: usize, j: usize) -> Result<LineSpectrum, FdtError> {
        if i != j {
            return Err(FdtError::NonHermitianObservable { i, j });
        }
        self.correlator_line_spectrum(i, i)?
            .into_positive()
            .map_err(|e| FdtError::InvalidParameter(e.to_string()))
    }

    /// Spectrum of ⟨A_j(0) A_i(t)⟩, the detailed-balance partner of J_ij,
    /// computed from its own populations.
    pub fn reversed_correlator_spectrum(&self, i: usize, j: usize) -> Result<LineSpectrum, FdtError> {
        Ok(mirror(&self.correlator_line_spectrum(j, i)?))
    }

    /// ½J_ij(1 + e^{−βω}), computed directly from the populations.
    pub fn symmetrized_spectrum(&self, i: usize, j: usize) -> Result<LineSpectrum, FdtError> {
        self.pair_spectrum(i, j, |p_nu, p_mu| 0.5 * (p_nu + p_mu))
    }

    /// J_ij(1 − e^{−βω}), the spectral density of ⟨[A_i(t), A_j]⟩.
    pub fn commutator_spectrum(&self, i: usize, j: usize) -> Result<LineSpectrum, FdtError> {
        self.pair_spectrum(i, j, |p_nu, p_mu| p_nu - p_mu)
    }

    /// Absorptive part of G^r_ij: the coefficient s_l in
    /// G^r(ω + i0) = P.V. + i Σ s_l δ(ω − ω_l), with s_l = ½J_ij(ω_l)(e^{−βω_l} − 1).
    /// For i = j this is Im G^r.
    pub fn im_retarded_green_lines(&self, i: usize, j: usize) -> Result<LineSpectrum, FdtError> {
        self.pair_spectrum(i, j, |p_nu, p_mu| 0.5 * (p_mu - p_nu))
    }

    /// Residues c_l of G^r_ij(ω) = Σ c_l/(ω_l − ω), c_l = J_ij(ω_l)(e^{−βω_l} − 1)/2π.
    fn green_residues(&self, i: usize, j: usize) -> Result<Vec<(f64, Complex64)>, FdtError> {
        let s = self.pair_spectrum(i, j, |p_nu, p_mu| (p_mu - p_nu) / (2.0 * PI))?;
        Ok(s.lines().iter().map(|l| (l.frequency, l.weight)).collect())
    }

    fn green_sum(&self, i: usize, j: usize, omega: Complex64) -> Result<Complex64, FdtError> {
        let mut g = Complex64::default();
        for (w, c) in self.green_residues(i, j)? {
            let d = Complex64::new(w, 0.0) - omega;
            if omega.im == 0.0 && d.re.abs() <= self.merge_tol {
                return Err(FdtError::OnPole { omega: omega.re });
            }
            g += c / d;
        }
        Ok(g)
    }

    /// G^r_ij(ω) for Im ω ≥ 0. On the real axis away from the lines this is
    /// the principal-value sum.
    pub fn retarded_green(&self, i: usize, j: usize, omega: Complex64) -> Result<Complex64, FdtError> {
        if omega.im < 0.0 {
            return Err(FdtError::InvalidParameter("retarded Green function needs Im omega >= 0".into()));
        }
        self.green_sum(i, j, omega)
    }

    /// G^a_ij(ω) for Im ω ≤ 0.
    pub fn advanced_green(&self, i: usize, j: usize, omega: Complex64) -> Result<Complex64, FdtError> {
        if omega.im > 0.0 {
            return Err(FdtError::InvalidParameter("advanced Green function needs Im omega <= 0".into()));
        }
        self.green_sum(i, j, omega)
    }

    /// G^r_ij(t) = iθ(t) Σ c_l e^{−iω_l t}; real for Hermitian observables.
    pub fn retarded_green_time(&self, i: usize, j: usize, t: f64) -> Result<Complex64, FdtError> {
        if t < 0.0 {
            return Ok(Complex64::default());
        }
        let i_unit = Complex64::new(0.0, 1.0);
        Ok(self.green_residues(i, j)?.iter().map(|&(w, c)| i_unit * c * Complex64::new(0.0, -w * t).exp()).sum())
    }

    /// G^a_ij(t) = −iθ(−t) Σ c_l e^{−iω_l t}.
    pub fn advanced_green_time(&self, i: usize, j: usize, t: f64) -> Result<Complex64, FdtError> {
        if t > 0.0 {
            return Ok(Complex64::default());
        }
        let i_unit = Complex64::new(0.0, 1.0);
        Ok(self.green_residues(i, j)?.iter().map(|&(w, c)| -i_unit * c * Complex64::new(0.0, -w * t).exp()).sum())
    }

    pub fn kms_check(&self, i: usize, j: usize) -> Result<KmsReport, FdtError> {
        let forward = self.correlator_line_spectrum(i, j)?;
        let reversed = self.reversed_correlator_spectrum(i, j)?;
        let scale = forward.scale().max(reversed.scale()).max(f64::MIN_POSITIVE);
        let tol = 4.0 * self.merge_tol;
        let mut worst = 0.0f64;
        let mut shared = 0;
        for l in forward.lines() {
            let expected = l.weight * (-self.beta * l.frequency).exp();
            let got = reversed.weight_at(l.frequency, tol);
            if got != Complex64::default() {
                shared += 1;
            }
            worst = worst.max((got - expected).norm() / scale);
        }
        for l in reversed.lines() {
            if forward.weight_at(l.frequency, tol) == Complex64::default() {
                worst = worst.max(l.weight.norm() / scale);
            }
        }
        Ok(KmsReport { max_ratio_error: worst, shared_lines: shared })
    }

    /// Checks ⟨A²⟩ = −(1/2π) Σ_l coth(βω_l/2) Im G^r_AA(ω_l).
    pub fn fdt_verify(&self, a: usize) -> Result<FdtReport, FdtError> {
        if !(self.beta > 0.0) {
            return Err(FdtError::InvalidParameter("fdt check needs beta > 0".into()));
        }
        let op = self.observable(a)?;
        let rho = self.density_matrix();
        let lhs = (rho * op * op).trace().re;
        let im = self.im_retarded_green_lines(a, a)?;
        let mut terms: Vec<f64> = im
            .lines()
            .iter()
            .filter(|l| l.frequency != 0.0)
            .map(|l| -l.weight.re / (2.0 * PI * (0.5 * self.beta * l.frequency).tanh()))
            .collect();
        let rhs = crate::quad::sum_ascending(&mut terms);
        let j = self.correlator_line_spectrum(a, a)?;
        let static_weight = j.weight_at(0.0, 0.0).re / (2.0 * PI);
        if static_weight.abs() > 1e-12 * j.scale().max(1.0) {
            return Err(FdtError::ZeroFrequencyLine { static_weight, lhs, rhs });
        }
        Ok(FdtReport { lhs, rhs, abs_error: (lhs - rhs).abs() })
    }

    /// Integrates the driven von Neumann equation and compares ⟨A_i⟩ − ⟨A_i⟩₀
    /// with the retarded-Green convolution of the drive.
    pub fn linear_response_sim(&self, observed: usize, drive: &DrivingProtocol, horizon: f64, samples: usize) -> Result<ResponseReport, FdtError> {
        self.check(observed)?;
        for c in &drive.couplings {
            self.check(c.observable)?;
        }
        if !(drive.switch_rate > 0.0) || !(horizon > 0.0) || samples < 1 {
            return Err(FdtError::InvalidParameter("need switch_rate > 0, horizon > 0 and samples >= 1".into()));
        }
        let times: Vec<f64> = (0..samples).map(|k| horizon * k as f64 / (samples.max(2) - 1) as f64).collect();
        let convolution = times.iter().map(|&t| self.convolution_response(observed, drive, t)).collect::<Result<Vec<_>, _>>()?;
        let (direct, diag) = self.direct_response(observed, drive, &times)?;
        let max_error = direct.iter().zip(&convolution).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let signal = convolution.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(ResponseReport {
            times,
            delta_a_direct: direct,
            delta_a_convolution: convolution,
            max_error,
            signal_scale: signal,
            trace_drift: diag.trace_drift,
            hermiticity_drift: diag.hermiticity_drift,
            steps: diag.steps,
        })
    }

    /// Runs the simulation at F₀, F₀/2 and F₀/4 and requires the mismatch
    /// to shrink by at least 3.5 per halving.
    pub fn response_scaling_check(&self, observed: usize, drive: &DrivingProtocol, horizon: f64, samples: usize) -> Result<ScalingReport, FdtError> {
        let mut errors = Vec::new();
        let mut amplitudes = Vec::new();
        for k in 0..3 {
            let mut d = drive.clone();
            d.amplitude = drive.amplitude / f64::powi(2.0, k);
            let r = self.linear_response_sim(observed, &d, horizon, samples)?;
            amplitudes.push(d.amplitude);
            errors.push(r.max_error);
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        let worst = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(worst >= 3.5) {
            return Err(FdtError::NonlinearRegime { ratio: worst });
        }
        Ok(ScalingReport { amplitudes, max_errors: errors, ratios })
    }

    /// χ_AA(Ω + iε) read off from two driven runs (cosine and sine drive)
    /// sampled at time `t`.
    pub fn susceptibility_from_simulation(&self, a: usize, omega: f64, switch_rate: f64, amplitude: f64, t: f64) -> Result<Complex64, FdtError> {
        let mut resp = [0.0; 2];
        for (k, phase) in [0.0, 0.5 * PI].into_iter().enumerate() {
            let drive = DrivingProtocol {
                amplitude,
                switch_rate,
                frequency: omega,
                couplings: vec![Coupling { observable: a, phase }],
            };
            let (direct, _) = self.direct_response(a, &drive, &[t])?;
            resp[k] = direct[0];
        }
        let envelope = amplitude * (switch_rate * t).exp();
        Ok(Complex64::new(resp[0], -resp[1]) * Complex64::new(0.0, omega * t).exp() / envelope)
    }

    fn convolution_response(&self, observed: usize, drive: &DrivingProtocol, t: f64) -> Result<f64, FdtError> {
        let i_unit = Complex64::new(0.0, 1.0);
        let mut total = Complex64::default();
        for c in &drive.couplings {
            for (w, res) in self.green_residues(observed, c.observable)? {
                for sigma in [-1.0, 1.0] {
                    let s = Complex64::new(drive.switch_rate, sigma * drive.frequency);
                    let phase = Complex64::new(0.0, -sigma * c.phase).exp();
                    total += i_unit * res * phase * (s * t).exp() / (s + i_unit * w) * 0.5;
                }
            }
        }
        Ok(-(total * drive.amplitude).re)
    }

    fn direct_response(&self, observed: usize, drive: &DrivingProtocol, times: &[f64]) -> Result<(Vec<f64>, DirectDiagnostics), FdtError> {
        let n = self.dim();
        let e = self.energies.clone();
        let a_obs = self.check(observed)?.clone();
        let drives: Vec<(CMatrix, f64)> = drive
            .couplings
            .iter()
            .map(|c| self.check(c.observable).map(|m| (m.clone(), c.phase)))
            .collect::<Result<_, _>>()?;
        let rho0 = CMatrix::from_fn(n, n, |r, c| if r == c { Complex64::new(self.populations[r], 0.0) } else { Complex64::default() });
        let start = -37.0 / drive.switch_rate;
        let rotate = |m: &CMatrix, t: f64| {
            let u: Vec<Complex64> = e.iter().map(|&en| Complex64::new(0.0, en * t).exp()).collect();
            CMatrix::from_fn(n, n, |r, c| u[r] * m[(r, c)] * u[c].conj())
        };
        let amp = drive.amplitude;
        let (eps, om) = (drive.switch_rate, drive.frequency);
        let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            let delta = CMatrix::from_column_slice(n, n, y);
            let state = &rho0 + &delta;
            let mut acc = CMatrix::zeros(n, n);
            for (a, phase) in &drives {
                let f = amp * (eps * t).exp() * (om * t - phase).cos();
                if f == 0.0 {
                    continue;
                }
                let at = rotate(a, t);
                acc += (&at * &state - &state * &at).scale(f);
            }
            let out = acc * Complex64::new(0.0, 1.0);
            dy.copy_from_slice(out.as_slice());
        };
        let y0 = vec![Complex64::default(); n * n];
        let opts = OdeOptions { rtol: 1e-11, atol: (1e-14 * amp.abs()).max(1e-300), initial_step: 1e-2, max_steps: 5_000_000 };
        let sol = dopri5(rhs, start, &y0, times, opts)?;
        let mut out = Vec::with_capacity(times.len());
        let mut trace_drift = 0.0f64;
        let mut herm = 0.0f64;
        for (t, y) in times.iter().zip(&sol.states) {
            let delta = CMatrix::from_column_slice(n, n, y);
            trace_drift = trace_drift.max(delta.trace().norm());
            herm = herm.max((&delta - delta.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));
            out.push((delta * rotate(&a_obs, *t)).trace().re);
        }
        Ok((out, DirectDiagnostics { trace_drift, hermiticity_drift: herm, steps: sol.steps }))
    }
}

struct DirectDiagnostics {
    trace_drift: f64,
    hermiticity_drift: f64,
    steps: usize,
}

/// ω → −ω on every line.
pub fn mirror(s: &LineSpectrum) -> LineSpectrum {
    let lines = s.lines().iter().map(|l| SpectralLine { frequency: -l.frequency, weight: l.weight }).collect();
    LineSpectrum::from_lines(lines, 0.0)
}

/// Complex conjugate of every weight.
pub fn conjugate(s: &LineSpectrum) -> LineSpectrum {
    let lines = s.lines().iter().map(|l| SpectralLine { frequency: l.frequency, weight: l.weight.conj() }).collect();
    LineSpectrum::from_lines(lines, 0.0)
}

/// Largest weight mismatch between two spectra, matching lines within `tol`.
pub fn max_line_difference(a: &LineSpectrum, b: &LineSpectrum, tol: f64) -> f64 {
    let mut worst = 0.0f64;
    for l in a.lines() {
        worst = worst.max((l.weight - b.weight_at(l.frequency, tol)).norm());
    }
    for l in b.lines() {
        worst = worst.max((l.weight - a.weight_at(l.frequency, tol)).norm());
    }
    worst
}

/// Reads a dense square complex matrix: one row per line, entries as
/// whitespace-separated `re im` pairs. Blank lines and `#` comments are skipped.
pub fn parse_complex_matrix(text: &str) -> Result<CMatrix, FdtError> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FdtError::InvalidParameter(format!("line {}: {e}", n + 1)))?;
        if nums.len() % 2 != 0 {
            return Err(FdtError::InvalidParameter(format!("line {}: odd number of values", n + 1)));
        }
        rows.push(nums.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(FdtError::InvalidParameter(format!("expected a square matrix, got {dim} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>())));
    }
    Ok(CMatrix::from_row_iterator(dim, dim, rows.into_iter().flatten()))
}

/// Upper bound on |⟨x²⟩_truncated − ⟨x²⟩_exact| for the oscillator preset:
/// population beyond the cut plus the mass lost to renormalization.
pub fn oscillator_truncation_bound(dim: usize, omega0: f64, mass: f64, beta: f64) -> f64 {
    let q = (-beta * omega0).exp();
    let n0 = (dim - 1) as f64;
    // Σ_{n ≥ N−1} (1−q) q^n (2n+1) in closed form
    let tail = q.powf(n0) * ((2.0 * n0 + 1.0) + 2.0 * q / (1.0 - q));
    let exact = 1.0 / (2.0 * mass * omega0 * (0.5 * beta * omega0).tanh());
    let renorm = q.powi(dim as i32) / (1.0 - q.powi(dim as i32)) * exact;
    2.0 * tail / (2.0 * mass * omega0) + renorm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmsReport {
    pub max_ratio_error: f64,
    pub shared_lines: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdtReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coupling {
    pub observable: usize,
    pub phase: f64,
}

/// F_j(t) = F₀ e^{εt} cos(Ωt − φ_j) for each coupled observable, entering
/// the Hamiltonian as H − Σ_j A_j F_j(t).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrivingProtocol {
    pub amplitude: f64,
    pub switch_rate: f64,
    pub frequency: f64,
    pub couplings: Vec<Coupling>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseReport {
    pub times: Vec<f64>,
    pub delta_a_direct: Vec<f64>,
    pub delta_a_convolution: Vec<f64>,
    pub max_error: f64,
    pub signal_scale: f64,
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub amplitudes: Vec<f64>,
    pub max_errors: Vec<f64>,
    pub ratios: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_lines() {
        let (w0, beta) = (1.3, 0.7);
        let s = QuantumSystem::two_level(w0, beta).unwrap();
        let j = s.positive_correlator_spectrum(0, 0).unwrap();
        assert_eq!(j.len(), 2);
        let q = 2.0 * (0.5 * beta * w0).cosh();
        let up = j.weight_at(w0, 1e-12).re;
        let down = j.weight_at(-w0, 1e-12).re;
        assert!((up - 2.0 * PI * (0.5 * beta * w0).exp() / q).abs() < 1e-13);
        assert!((down - 2.0 * PI * (-0.5 * beta * w0).exp() / q).abs() < 1e-13);
        assert!((s.log_partition() - q.ln()).abs() < 1e-14);
    }

    #[test]
    fn identity_observable() {
        let s = QuantumSystem::two_level(1.0, 2.0).unwrap();
        let id = CMatrix::identity(2, 2);
        let s = QuantumSystem::new(s.hamiltonian().clone(), vec![("id".into(), id)], 2.0).unwrap();
        let j = s.correlator_line_spectrum(0, 0).unwrap();
        assert_eq!(j.len(), 1);
        assert_eq!(j.lines()[0].frequency, 0.0);
        assert!((j.lines()[0].weight.re - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn two_level_fdt_and_kms() {
        let s = QuantumSystem::two_level(1.0, 1.0).unwrap();
        let r = s.fdt_verify(0).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!((r.rhs - 1.0).abs() < 1e-12);
        let k = s.kms_check(0, 0).unwrap();
        assert!(k.max_ratio_error < 1e-12 && k.shared_lines == 2);
        let im = s.im_retarded_green_lines(0, 0).unwrap();
        assert!(im.weight_at(1.0, 1e-12).re < 0.0 && im.weight_at(-1.0, 1e-12).re > 0.0);
    }

    #[test]
    fn zero_frequency_line_reported() {
        let s = QuantumSystem::two_level(1.0, 1.0).unwrap();
        let sz = CMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::default(), Complex64::default(), Complex64::new(-1.0, 0.0)]);
        let s = QuantumSystem::new(s.hamiltonian().clone(), vec![("sz".into(), sz)], 1.0).unwrap();
        match s.fdt_verify(0) {
            Err(FdtError::ZeroFrequencyLine { lhs, rhs, .. }) => {
                assert!((lhs - 1.0).abs() < 1e-15);
                assert_eq!(rhs, 0.0);
            }
            other => panic!("{other:?}"),
        }
        let stripped = s.without_static_part(s.observable(0).unwrap());
        assert!(stripped.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        let h = CMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)]);
        assert!(matches!(QuantumSystem::new(h, vec![], 1.0), Err(FdtError::NonHermitian { .. })));
        let s = QuantumSystem::two_level(1.0, 1.0).unwrap();
        assert!(matches!(s.correlator_line_spectrum(0, 3), Err(FdtError::UnknownObservable(3))));
        assert!(matches!(s.retarded_green(0, 0, Complex64::new(1.0, 0.0)), Err(FdtError::OnPole { .. })));
    }

    #[test]
    fn oscillator_variance() {
        for &bw in &[1.0, 5.0] {
            let s = QuantumSystem::oscillator(40, 1.0, 1.0, bw).unwrap();
            let r = s.fdt_verify(0).unwrap();
            let exact = 0.5 / (0.5 * bw).tanh();
            assert!(r.abs_error < 1e-10);
            assert!((r.lhs - exact).abs() < 1e-8 * exact, "beta {bw}: {} vs {exact}", r.lhs);
            assert!((r.lhs - exact).abs() <= oscillator_truncation_bound(40, 1.0, 1.0, bw));
        }
    }

    #[test]
    fn zero_drive_gives_zero_response() {
        let s = QuantumSystem::two_level(1.0, 1.0).unwrap();
        let d = DrivingProtocol { amplitude: 0.0, switch_rate: 0.1, frequency: 0.5, couplings: vec![Coupling { observable: 0, phase: 0.0 }] };
        let r = s.linear_response_sim(0, &d, 5.0, 6).unwrap();
        assert!(r.delta_a_direct.iter().chain(&r.delta_a_convolution).all(|v| *v == 0.0));
    }

    #[test]
    fn two_level_response_agrees() {
        let s = QuantumSystem::two_level(1.0, 1.0).unwrap();
        let d = DrivingProtocol { amplitude: 1e-3, switch_rate: 0.1, frequency: 0.6, couplings: vec![Coupling { observable: 0, phase: 0.0 }] };
        let r = s.linear_response_sim(0, &d, 10.0, 11).unwrap();
        assert!(r.signal_scale > 1e-4);
        assert!(r.max_error < 1e-4 * r.signal_scale, "{} vs {}", r.max_error, r.signal_scale);
        assert!(r.trace_drift < 1e-12);
        // σ_x is odd under the parity σ_z, so the first correction is cubic
        let scaling = s.response_scaling_check(0, &d, 10.0, 11).unwrap();
        assert!(scaling.ratios.iter().all(|&q| q > 7.0), "{:?}", scaling.ratios);
    }
}
