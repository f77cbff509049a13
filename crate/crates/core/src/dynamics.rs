//! Time-dependent Schrödinger evolution through a flux ramp.
//!
//! Each step applies the midpoint exponential
//! `U_k = exp(−i 2π H(t_k + dt/2) dt)` (H in GHz, dt in ns). The action of
//! the exponential on the state is evaluated by a Taylor series summed to
//! machine precision, splitting the step whenever `2π ‖H‖₁ dt > 1`; on
//! intervals where the flux is constant the exact spectral propagator is
//! cached and reused.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Error, Result};
use crate::hamiltonian::{CircuitParams, ExternalFlux, FluxAllocation, Frame, Spectrum};
use crate::operators::{translation_operator, BasisSpec, OperatorSet};
use crate::scalar::{cis, modulus, re, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseShape {
    /// Constant rate across the edge.
    Linear,
    /// `3u² − 2u³`, continuous rate with zero slope at both ends.
    Smoothstep,
}

impl std::str::FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "smoothstep" => Ok(Self::Smoothstep),
            other => Err(invalid(format!("unknown pulse shape {other:?}"))),
        }
    }
}

/// Step in external flux from `flux_start` to `flux_end` (units of `Φ0`)
/// with an edge of `rise_ns` starting at `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPulse<T> {
    pub flux_start: T,
    pub flux_end: T,
    pub rise_ns: T,
    pub shape: PulseShape,
    pub t0: T,
}

impl<T: Real> FluxPulse<T> {
    pub fn new(flux_start: T, flux_end: T, rise_ns: T, shape: PulseShape, t0: T) -> Result<Self> {
        let p = Self { flux_start, flux_end, rise_ns, shape, t0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.flux_start.is_finite() || !self.flux_end.is_finite() {
            return Err(invalid("pulse flux endpoints must be finite"));
        }
        if !(self.rise_ns > T::zero()) || !self.rise_ns.is_finite() {
            return Err(invalid("rise time must be positive"));
        }
        if !(self.t0 >= T::zero()) || !self.t0.is_finite() {
            return Err(invalid("ramp start t0 must be non-negative"));
        }
        Ok(())
    }

    pub fn ramp_end(&self) -> T {
        self.t0 + self.rise_ns
    }
}

/// `(Φ(t)/Φ0, dφ_ext/dt)` with the rate in rad/ns.
pub fn flux_profile<T: Real>(pulse: &FluxPulse<T>, t: T) -> (T, T) {
    if t <= pulse.t0 {
        return (pulse.flux_start, T::zero());
    }
    if t >= pulse.ramp_end() {
        return (pulse.flux_end, T::zero());
    }
    let span = pulse.flux_end - pulse.flux_start;
    let u = (t - pulse.t0) / pulse.rise_ns;
    let (s, ds) = match pulse.shape {
        PulseShape::Linear => (u, T::one()),
        PulseShape::Smoothstep => {
            let three = T::lit(3.0);
            (u * u * (three - T::lit(2.0) * u), T::lit(6.0) * u * (T::one() - u))
        }
    };
    (pulse.flux_start + span * s, T::two_pi() * span * ds / pulse.rise_ns)
}

/// Normalized state in the oscillator basis, tagged with its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    pub coeffs: DVector<C<T>>,
    pub frame: Frame,
}

impl<T: Real> StateVector<T> {
    pub fn new(coeffs: DVector<C<T>>, frame: Frame) -> Result<Self> {
        let norm = coeffs.norm();
        if (norm - T::one()).abs() > T::lit(1e-9).max(T::default_epsilon() * T::lit(1e3)) {
            return Err(invalid(format!("state norm is {}, expected 1", norm.as_f64())));
        }
        Ok(Self { coeffs, frame })
    }

    /// Eigenstate `index` of the static Hamiltonian at `flux`.
    pub fn eigenstate(
        params: &CircuitParams<T>,
        flux: T,
        allocation: FluxAllocation,
        basis: &BasisSpec<T>,
        index: usize,
    ) -> Result<Self> {
        let s = Spectrum::compute(params, ExternalFlux::new(flux)?, allocation, basis, index + 1)?;
        Ok(Self { coeffs: s.states.column(index).into_owned(), frame: allocation.frame() })
    }

    pub fn norm(&self) -> T {
        self.coeffs.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig<T> {
    /// Step size in ns.
    pub dt: T,
    /// Evolution runs over `[0, t_end]` ns.
    pub t_end: T,
    /// Re-run with halved steps and require the result to settle.
    pub verify: bool,
}

impl<T: Real> PropagatorConfig<T> {
    pub const DEFAULT_DT: f64 = 5e-4;

    /// Default step and an end time 0.5 ns after the edge.
    pub fn for_pulse(pulse: &FluxPulse<T>) -> Self {
        Self { dt: T::lit(Self::DEFAULT_DT), t_end: pulse.ramp_end() + T::lit(0.5), verify: true }
    }

    pub fn validate(&self, pulse: &FluxPulse<T>) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt must be positive"));
        }
        if !(self.t_end > pulse.ramp_end()) {
            return Err(invalid("t_end must lie after the end of the ramp"));
        }
        Ok(())
    }
}

/// Largest coefficient change tolerated between successive step halvings.
pub const STEP_TOLERANCE: f64 = 1e-6;

/// Evolution operator for one allocation and pulse.
pub struct Propagator<T: Real> {
    ops: OperatorSet<T>,
    params: CircuitParams<T>,
    allocation: FluxAllocation,
    pulse: FluxPulse<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(
        params: &CircuitParams<T>,
        allocation: FluxAllocation,
        pulse: &FluxPulse<T>,
        basis: &BasisSpec<T>,
    ) -> Result<Self> {
        params.validate()?;
        pulse.validate()?;
        Ok(Self { ops: OperatorSet::new(basis), params: *params, allocation, pulse: *pulse })
    }

    pub fn hamiltonian_at(&self, t: T) -> DMatrix<C<T>> {
        let (flux, rate) = flux_profile(&self.pulse, t);
        self.ops.hamiltonian(&self.params, flux, rate, self.allocation)
    }

    /// One midpoint step of length `dt` whose midpoint is `t_mid`. A negative
    /// `dt` applies the inverse step.
    pub fn step(&self, psi: &mut DVector<C<T>>, t_mid: T, dt: T) {
        let h = self.hamiltonian_at(t_mid);
        apply_exponential(&h, T::two_pi() * dt, psi);
    }

    /// Exact `exp(−i 2π H τ)` for the constant Hamiltonian at flux `flux`.
    fn constant_propagator(&self, flux: T, tau: T) -> DMatrix<C<T>> {
        let h = self.ops.hamiltonian(&self.params, flux, T::zero(), self.allocation);
        let eig = SymmetricEigen::new(h);
        let v = &eig.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, &e) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
            col *= cis(-T::two_pi() * e * tau);
        }
        scaled * v.adjoint()
    }

    /// Evolves `psi` over `[0, t_end]`, calling `observer(t, state)` after
    /// every step. Step grids are aligned with the ramp edges.
    pub fn evolve(
        &self,
        psi: &StateVector<T>,
        dt: T,
        t_end: T,
        mut observer: impl FnMut(T, &DVector<C<T>>),
    ) -> Result<StateVector<T>> {
        if psi.frame != self.allocation.frame() {
            return Err(contract(format!(
                "state is in the {:?} frame but the {} allocation evolves the {:?} frame",
                psi.frame,
                self.allocation,
                self.allocation.frame()
            )));
        }
        if psi.coeffs.len() != self.ops.basis().dim() {
            return Err(invalid("state dimension does not match the basis"));
        }
        let (t0, t1) = (self.pulse.t0, self.pulse.ramp_end().min(t_end));
        let mut state = psi.coeffs.clone();
        let mut scratch = DVector::zeros(state.len());
        observer(T::zero(), &state);

        let segments = [
            (T::zero(), t0.min(t_end), Some(self.pulse.flux_start)),
            (t0.min(t_end), t1, None),
            (t1, t_end, Some(self.pulse.flux_end)),
        ];
        for (start, stop, constant_flux) in segments {
            let len = stop - start;
            if !(len > T::zero()) {
                continue;
            }
            let n = (len / dt).ceil().to_usize().unwrap_or(1).max(1);
            let h = len / T::from_index(n);
            let cached = constant_flux.map(|f| self.constant_propagator(f, h));
            for k in 0..n {
                match &cached {
                    Some(u) => {
                        scratch.gemv(C::new(T::one(), T::zero()), u, &state, C::new(T::zero(), T::zero()));
                        std::mem::swap(&mut state, &mut scratch);
                    }
                    None => {
                        let mid = start + h * (T::from_index(k) + T::lit(0.5));
                        self.step(&mut state, mid, h);
                    }
                }
                observer(start + h * T::from_index(k + 1), &state);
            }
        }
        Ok(StateVector { coeffs: state, frame: psi.frame })
    }
}

/// `psi ← exp(−i tau H) psi` by a Taylor series summed to machine precision.
///
/// The series runs on `H − μ I` with `μ` the mean diagonal entry, which
/// shrinks the norm of a spectrum bounded below near zero; the phase
/// `exp(−i tau μ)` is restored at the end. `H = A + iB` is applied through
/// real products with `A` and, only when present, `B`.
fn apply_exponential<T: Real>(h: &DMatrix<C<T>>, tau: T, psi: &mut DVector<C<T>>) {
    let n = h.nrows();
    let mu = h.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re) / T::from_index(n);
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { h[(i, j)].re - mu } else { h[(i, j)].re });
    let b = h.iter().any(|z| z.im != T::zero()).then(|| h.map(|z| z.im));
    let norm1 = h
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            c.iter().enumerate().fold(T::zero(), |acc, (i, z)| {
                acc + if i == j { modulus(*z - re(mu)) } else { modulus(*z) }
            })
        })
        .fold(T::zero(), |acc, x| acc.max(x));
    // Pieces of norm up to 2 keep the largest Taylor term below 2.
    let theta = (tau * norm1).abs();
    let pieces = (theta * T::lit(0.5)).ceil().to_usize().unwrap_or(1).max(1);
    let sub = tau / T::from_index(pieces);
    let eps = T::default_epsilon();

    let mut xr = psi.map(|z| z.re);
    let mut xi = psi.map(|z| z.im);
    let (mut tr, mut ti) = (xr.clone(), xi.clone());
    let (mut ur, mut ui) = (xr.clone(), xi.clone());
    for _ in 0..pieces {
        tr.copy_from(&xr);
        ti.copy_from(&xi);
        for k in 1..=80 {
            // u = (H − μ) t
            ur.gemv(T::one(), &a, &tr, T::zero());
            ui.gemv(T::one(), &a, &ti, T::zero());
            if let Some(b) = &b {
                ur.gemv(-T::one(), b, &ti, T::one());
                ui.gemv(T::one(), b, &tr, T::one());
            }
            // t ← (−i sub / k) u
            let f = sub / T::from_index(k);
            tr.zip_apply(&ui, |t, u| *t = f * u);
            ti.zip_apply(&ur, |t, u| *t = -f * u);
            xr += &tr;
            xi += &ti;
            let size = tr.norm_squared() + ti.norm_squared();
            if size <= eps * eps * (xr.norm_squared() + xi.norm_squared()) {
                break;
            }
        }
    }
    let phase = cis(-tau * mu);
    for (z, (r, i)) in psi.iter_mut().zip(xr.iter().zip(xi.iter())) {
        *z = C::new(*r, *i) * phase;
    }
}

/// Result of a verified propagation.
#[derive(Debug, Clone)]
pub struct PropagationReport<T: Real> {
    pub state: StateVector<T>,
    /// Step size of the returned state.
    pub dt: T,
    /// Largest coefficient change observed in the last halving (zero when
    /// verification is off).
    pub refinement_change: T,
}

fn max_coefficient_change<T: Real>(a: &DVector<C<T>>, b: &DVector<C<T>>) -> T {
    a.iter().zip(b.iter()).map(|(x, y)| modulus(x - y)).fold(T::zero(), |m, d| m.max(d))
}

/// Evolves `psi0` through `pulse`. With `cfg.verify`, the step is halved up
/// to twice until successive results agree within [`STEP_TOLERANCE`].
pub fn propagate_detailed<T: Real>(
    params: &CircuitParams<T>,
    allocation: FluxAllocation,
    pulse: &FluxPulse<T>,
    psi0: &StateVector<T>,
    cfg: &PropagatorConfig<T>,
    basis: &BasisSpec<T>,
) -> Result<PropagationReport<T>> {
    cfg.validate(pulse)?;
    if psi0.frame != allocation.frame() {
        return Err(contract(format!(
            "initial state frame {:?} does not match allocation {allocation}",
            psi0.frame
        )));
    }
    StateVector::new(psi0.coeffs.clone(), psi0.frame)?;
    let prop = Propagator::new(params, allocation, pulse, basis)?;
    let run = |dt: T| prop.evolve(psi0, dt, cfg.t_end, |_, _| {});

    let mut dt = cfg.dt;
    let mut current = run(dt)?;
    if !cfg.verify {
        return Ok(PropagationReport { state: current, dt, refinement_change: T::zero() });
    }
    let tol = T::lit(STEP_TOLERANCE);
    let mut change = T::zero();
    for _ in 0..2 {
        dt *= T::lit(0.5);
        let refined = run(dt)?;
        change = max_coefficient_change(&current.coeffs, &refined.coeffs);
        current = refined;
        if change <= tol {
            return Ok(PropagationReport { state: current, dt, refinement_change: change });
        }
    }
    Err(Error::Accuracy { max_change: change.as_f64(), final_dt: dt.as_f64(), tolerance: STEP_TOLERANCE })
}

pub fn propagate<T: Real>(
    params: &CircuitParams<T>,
    allocation: FluxAllocation,
    pulse: &FluxPulse<T>,
    psi0: &StateVector<T>,
    cfg: &PropagatorConfig<T>,
    basis: &BasisSpec<T>,
) -> Result<StateVector<T>> {
    propagate_detailed(params, allocation, pulse, psi0, cfg, basis).map(|r| r.state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeDirection {
    ToJunction,
    ToInductor,
}

/// Maps a state between frames at external flux `flux` (units of `Φ0`):
/// `ψ_J(φ) = ψ_I(φ + φ_ext)`, i.e. `ψ_J = exp(i φ_ext n) ψ_I`.
pub fn gauge_transform<T: Real>(
    psi: &StateVector<T>,
    flux: T,
    direction: GaugeDirection,
    basis: &BasisSpec<T>,
) -> Result<StateVector<T>> {
    let phi_ext = ExternalFlux::new(flux)?.reduced();
    let (from, to, shift) = match direction {
        GaugeDirection::ToJunction => (Frame::Inductor, Frame::Junction, phi_ext),
        GaugeDirection::ToInductor => (Frame::Junction, Frame::Inductor, -phi_ext),
    };
    if psi.frame != from {
        return Err(contract(format!("expected a state in the {from:?} frame, got {:?}", psi.frame)));
    }
    if psi.coeffs.len() != basis.dim() {
        return Err(invalid("state dimension does not match the basis"));
    }
    Ok(StateVector { coeffs: translation_operator(basis, shift) * &psi.coeffs, frame: to })
}

/// `|⟨m|ψ⟩|²` against the lowest `levels` static eigenstates at `flux_b`,
/// built in the frame of `allocation`.
pub fn final_populations<T: Real>(
    psi: &StateVector<T>,
    params: &CircuitParams<T>,
    flux_b: T,
    allocation: FluxAllocation,
    basis: &BasisSpec<T>,
    levels: usize,
) -> Result<Vec<T>> {
    if psi.frame != allocation.frame() {
        return Err(contract(format!(
            "state is in the {:?} frame, allocation {allocation} expects {:?}",
            psi.frame,
            allocation.frame()
        )));
    }
    let s = Spectrum::compute(params, ExternalFlux::new(flux_b)?, allocation, basis, levels)?;
    Ok(populations_in(&s.states, &psi.coeffs))
}

pub(crate) fn populations_in<T: Real>(states: &DMatrix<C<T>>, psi: &DVector<C<T>>) -> Vec<T> {
    states.column_iter().map(|m| m.dotc(psi).norm_sqr()).collect()
}
