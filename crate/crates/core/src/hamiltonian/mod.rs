//! Fluxonium Hamiltonians under the different flux allocations.
//!
//! Units throughout: `h = 1`, energies in GHz, time in ns, flux as `Φ/Φ0`,
//! phases in radians. The reduced flux is `φ_ext = 2π Φ/Φ0`.
//!
//! Static forms:
//!
//! ```text
//! inductor:  H = 4 E_C n² − E_J cos(φ)          + ½ E_L (φ − φ_ext)²
//! junction:  H = 4 E_C n² − E_J cos(φ + φ_ext)  + ½ E_L φ²
//! ```
//!
//! With a time-dependent flux the junction form picks up `−2e n dΦ/dt`.
//! Since `2e Φ0 / 2π = ħ`, in these units that term reads
//! `−(1/2π) (dφ_ext/dt) n` GHz with the rate in rad/ns.

mod potential;

pub use potential::{
    find_minima, global_minimum_location, perturbative_shift, potential_curve,
    potential_derivatives, shift_ratio_at, Minimum,
    PotentialAnalysis,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Result};
use crate::operators::{hermitian_deviation, BasisSpec, OperatorMatrix, OperatorSet};
use crate::scalar::{modulus, re, Real, C};

/// Charging, Josephson and inductive energies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams<T> {
    pub e_c: T,
    pub e_j: T,
    pub e_l: T,
}

impl<T: Real> CircuitParams<T> {
    pub fn new(e_c: T, e_j: T, e_l: T) -> Result<Self> {
        let p = Self { e_c, e_j, e_l };
        p.validate()?;
        Ok(p)
    }

    /// Values fitted to the two-tone spectroscopy of the measured device.
    pub fn measured_device() -> Self {
        Self { e_c: T::lit(0.755), e_j: T::lit(6.49), e_l: T::lit(0.445) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e_c", self.e_c), ("e_j", self.e_j), ("e_l", self.e_l)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {}",
                    v.as_f64()
                )));
            }
        }
        Ok(())
    }
}

/// External flux in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExternalFlux<T>(pub T);

impl<T: Real> ExternalFlux<T> {
    pub fn new(value: T) -> Result<Self> {
        if !value.is_finite() {
            return Err(invalid("external flux must be finite"));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> T {
        self.0
    }

    /// `φ_ext = 2π Φ/Φ0`
    pub fn reduced(self) -> T {
        T::two_pi() * self.0
    }
}

/// Which inductive term carries the external flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxAllocation {
    /// Flux in the inductor term; no `dΦ/dt` term is generated.
    Inductor,
    /// Flux in the junction term together with the `−2e n dΦ/dt` term.
    JunctionComplete,
    /// Flux in the junction term with the `dΦ/dt` term dropped.
    JunctionIncomplete,
}

impl FluxAllocation {
    pub const ALL: [FluxAllocation; 3] =
        [Self::Inductor, Self::JunctionComplete, Self::JunctionIncomplete];

    /// Coordinate frame the allocation's wavefunctions are expressed in.
    pub fn frame(self) -> Frame {
        match self {
            Self::Inductor => Frame::Inductor,
            Self::JunctionComplete | Self::JunctionIncomplete => Frame::Junction,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Inductor => "inductor",
            Self::JunctionComplete => "junction-complete",
            Self::JunctionIncomplete => "junction-incomplete",
        }
    }
}

impl std::str::FromStr for FluxAllocation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inductor" => Ok(Self::Inductor),
            "junction-complete" => Ok(Self::JunctionComplete),
            "junction-incomplete" => Ok(Self::JunctionIncomplete),
            other => Err(invalid(format!(
                "unknown allocation {other:?} (expected inductor, junction-complete or junction-incomplete)"
            ))),
        }
    }
}

impl std::fmt::Display for FluxAllocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Phase variable the state vector is written in. The two frames differ by
/// the translation `φ_junction = φ_inductor − φ_ext`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Inductor,
    Junction,
}

impl<T: Real> OperatorSet<T> {
    /// Hamiltonian at `flux` (units of `Φ0`) with reduced-flux rate `rate`
    /// (rad/ns). The rate only enters for [`FluxAllocation::JunctionComplete`].
    pub fn hamiltonian(
        &self,
        params: &CircuitParams<T>,
        flux: T,
        rate: T,
        allocation: FluxAllocation,
    ) -> DMatrix<C<T>> {
        let mut out = DMatrix::zeros(self.basis().dim(), self.basis().dim());
        self.hamiltonian_into(params, flux, rate, allocation, &mut out);
        out
    }

    pub(crate) fn hamiltonian_into(
        &self,
        params: &CircuitParams<T>,
        flux: T,
        rate: T,
        allocation: FluxAllocation,
        out: &mut DMatrix<C<T>>,
    ) {
        let phi_ext = T::two_pi() * flux;
        let kinetic = T::lit(4.0) * params.e_c;
        let half_el = T::lit(0.5) * params.e_l;
        let dim = self.basis().dim();
        match allocation {
            FluxAllocation::Inductor => {
                let lin = T::lit(-2.0) * phi_ext;
                let shift = phi_ext * phi_ext;
                for j in 0..dim {
                    for i in 0..dim {
                        let mut quad = self.phi_sq[(i, j)] + self.phi[(i, j)].scale(lin);
                        if i == j {
                            quad += re(shift);
                        }
                        out[(i, j)] = self.charge_sq[(i, j)].scale(kinetic)
                            - self.cos_phi[(i, j)].scale(params.e_j)
                            + quad.scale(half_el);
                    }
                }
            }
            FluxAllocation::JunctionComplete | FluxAllocation::JunctionIncomplete => {
                let (co, so) = (phi_ext.cos(), phi_ext.sin());
                let drift = match allocation {
                    FluxAllocation::JunctionComplete => -rate / T::two_pi(),
                    _ => T::zero(),
                };
                for j in 0..dim {
                    for i in 0..dim {
                        let cos_term =
                            self.cos_phi[(i, j)].scale(co) - self.sin_phi[(i, j)].scale(so);
                        out[(i, j)] = self.charge_sq[(i, j)].scale(kinetic)
                            - cos_term.scale(params.e_j)
                            + self.phi_sq[(i, j)].scale(half_el);
                        if drift != T::zero() {
                            out[(i, j)] += self.charge[(i, j)].scale(drift);
                        }
                    }
                }
            }
        }
    }
}

/// Static Hamiltonian (flux rate zero) for the given allocation.
pub fn build_static<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    basis: &BasisSpec<T>,
) -> Result<OperatorMatrix<T>> {
    params.validate()?;
    let ops = OperatorSet::new(basis);
    Ok(OperatorMatrix::from_hermitian_unchecked(ops.hamiltonian(
        params,
        flux.value(),
        T::zero(),
        allocation,
    )))
}

/// Hamiltonian with a time-dependent flux currently at `flux_value` and
/// changing at `flux_rate` rad/ns.
pub fn build_timedep<T: Real>(
    params: &CircuitParams<T>,
    flux_value: T,
    flux_rate: T,
    allocation: FluxAllocation,
    basis: &BasisSpec<T>,
) -> Result<OperatorMatrix<T>> {
    params.validate()?;
    if !flux_value.is_finite() {
        return Err(invalid("flux value must be finite"));
    }
    if !flux_rate.is_finite() {
        return Err(invalid("flux rate must be finite"));
    }
    let ops = OperatorSet::new(basis);
    Ok(OperatorMatrix::from_hermitian_unchecked(ops.hamiltonian(
        params, flux_value, flux_rate, allocation,
    )))
}

/// Lowest eigenpairs of a Hermitian matrix, ascending, with the phase of each
/// eigenvector fixed so that its largest-magnitude coefficient is real and
/// positive.
#[derive(Debug, Clone)]
pub struct Eigensystem<T: Real> {
    pub energies: Vec<T>,
    /// Eigenvectors as columns.
    pub states: DMatrix<C<T>>,
}

fn is_real<T: Real>(m: &DMatrix<C<T>>) -> bool {
    m.iter().all(|z| z.im == T::zero())
}

pub fn diagonalize<T: Real>(h: &OperatorMatrix<T>, k: usize) -> Result<Eigensystem<T>> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(invalid(format!("requested {k} eigenpairs from a {dim}-dimensional matrix")));
    }
    let dev = hermitian_deviation(h.matrix());
    if !(dev < T::hermitian_tolerance()) {
        return Err(contract(format!(
            "diagonalize requires a Hermitian matrix (deviation {:.3e})",
            dev.as_f64()
        )));
    }
    let (values, vectors): (Vec<T>, DMatrix<C<T>>) = if is_real(h.matrix()) {
        let eig = SymmetricEigen::new(h.matrix().map(|z| z.re));
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(re))
    } else {
        let eig = SymmetricEigen::new(h.matrix().clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
    order.truncate(k);

    let mut states = DMatrix::zeros(dim, k);
    for (col, &idx) in order.iter().enumerate() {
        let v = vectors.column(idx);
        let mut pivot = 0;
        let mut best = T::zero();
        for (i, z) in v.iter().enumerate() {
            let m = z.norm_sqr();
            if m > best {
                best = m;
                pivot = i;
            }
        }
        let phase = v[pivot].conj().unscale(modulus(v[pivot]));
        for i in 0..dim {
            states[(i, col)] = v[i] * phase;
        }
        states[(pivot, col)] = re(modulus(states[(pivot, col)]));
    }
    Ok(Eigensystem { energies: order.iter().map(|&i| values[i]).collect(), states })
}

/// All eigenvalues of a Hermitian matrix, ascending. Skips eigenvectors.
pub fn eigenvalues<T: Real>(h: &DMatrix<C<T>>) -> Vec<T> {
    let mut values: Vec<T> = if is_real(h) {
        h.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect()
    };
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    values
}

/// Eigenbasis of a static Hamiltonian, tagged with where it came from.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub energies: Vec<T>,
    pub states: DMatrix<C<T>>,
    pub flux: ExternalFlux<T>,
    pub allocation: FluxAllocation,
    pub params: CircuitParams<T>,
    pub basis: BasisSpec<T>,
}

impl<T: Real> Spectrum<T> {
    /// Diagonalizes the static Hamiltonian and keeps the lowest `levels` states.
    pub fn compute(
        params: &CircuitParams<T>,
        flux: ExternalFlux<T>,
        allocation: FluxAllocation,
        basis: &BasisSpec<T>,
        levels: usize,
    ) -> Result<Self> {
        params.validate()?;
        Self::with_operators(&OperatorSet::new(basis), params, flux, allocation, levels)
    }

    pub fn with_operators(
        ops: &OperatorSet<T>,
        params: &CircuitParams<T>,
        flux: ExternalFlux<T>,
        allocation: FluxAllocation,
        levels: usize,
    ) -> Result<Self> {
        let h = OperatorMatrix::from_hermitian_unchecked(ops.hamiltonian(
            params,
            flux.value(),
            T::zero(),
            allocation,
        ));
        let eig = diagonalize(&h, levels)?;
        Ok(Self {
            energies: eig.energies,
            states: eig.states,
            flux,
            allocation,
            params: *params,
            basis: *ops.basis(),
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// `E_j − E_i`
    pub fn transition(&self, i: usize, j: usize) -> T {
        self.energies[j] - self.energies[i]
    }

    /// `|⟨m|ψ⟩|²` for every kept state `m`.
    pub fn populations(&self, psi: &DVector<C<T>>) -> Vec<T> {
        self.states.column_iter().map(|m| m.dotc(psi).norm_sqr()).collect()
    }

    pub fn state(&self, index: usize) -> Vec<C<T>> {
        self.states.column(index).iter().copied().collect()
    }
}

/// One row of a flux sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow<T> {
    pub flux: T,
    pub energies: Vec<T>,
}

/// Lowest `levels` energies at each flux value, in input order. With
/// `relative_to_ground` the ground energy is subtracted from every level.
pub fn spectrum_vs_flux<T: Real>(
    params: &CircuitParams<T>,
    flux_list: &[T],
    levels: usize,
    basis: &BasisSpec<T>,
    relative_to_ground: bool,
) -> Result<Vec<SpectrumRow<T>>> {
    params.validate()?;
    if flux_list.is_empty() {
        return Err(invalid("flux list is empty"));
    }
    if levels == 0 || levels > basis.dim() {
        return Err(invalid(format!("levels must be in 1..={}", basis.dim())));
    }
    let ops = OperatorSet::new(basis);
    flux_list
        .par_iter()
        .map(|&flux| {
            ExternalFlux::new(flux)?;
            let h = ops.hamiltonian(params, flux, T::zero(), FluxAllocation::Inductor);
            let mut energies = eigenvalues(&h);
            energies.truncate(levels);
            if relative_to_ground {
                let e0 = energies[0];
                energies.iter_mut().for_each(|e| *e -= e0);
            }
            Ok(SpectrumRow { flux, energies })
        })
        .collect()
}
