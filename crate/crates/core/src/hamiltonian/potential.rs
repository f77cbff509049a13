//! Classical potential of the fluxonium and the location of its minima.

use super::{CircuitParams, ExternalFlux, FluxAllocation};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// `(V, V′, V″)` at `phi`, in GHz, GHz/rad and GHz/rad².
pub fn potential_derivatives<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    phi: T,
) -> (T, T, T) {
    let phi_ext = flux.reduced();
    let (junction_arg, inductor_arg) = match allocation {
        FluxAllocation::Inductor => (phi, phi - phi_ext),
        FluxAllocation::JunctionComplete | FluxAllocation::JunctionIncomplete => {
            (phi + phi_ext, phi)
        }
    };
    let (s, c) = junction_arg.sin_cos();
    (
        -params.e_j * c + T::lit(0.5) * params.e_l * inductor_arg * inductor_arg,
        params.e_j * s + params.e_l * inductor_arg,
        params.e_j * c + params.e_l,
    )
}

pub fn potential_curve<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    grid: &[T],
) -> Vec<T> {
    grid.iter()
        .map(|&phi| potential_derivatives(params, flux, allocation, phi).0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    /// radians
    pub location: T,
    /// GHz
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialAnalysis<T> {
    /// Local minima sorted by ascending value.
    pub minima: Vec<Minimum<T>>,
    pub allocation: FluxAllocation,
    pub flux: ExternalFlux<T>,
}

impl<T: Real> PotentialAnalysis<T> {
    /// Lowest minimum. Ties (degenerate wells) resolve to the smaller location.
    pub fn global(&self) -> Option<Minimum<T>> {
        let best = self.minima.first()?.value;
        let tie = T::lit(1e-10) * best.abs().max(T::one());
        self.minima
            .iter()
            .filter(|m| m.value - best <= tie)
            .min_by(|a, b| a.location.partial_cmp(&b.location).expect("finite"))
            .copied()
    }
}

fn stationarity_tolerance<T: Real>(params: &CircuitParams<T>, phi: T) -> T {
    let scale = params.e_j + params.e_l * (phi.abs() + T::one());
    T::lit(1e-9).max(T::default_epsilon() * T::lit(64.0) * scale)
}

/// Safeguarded Newton iteration for `V′ = 0` inside `[lo, hi]`.
fn refine<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    mut lo: T,
    mut hi: T,
    start: T,
) -> T {
    let deriv = |x: T| potential_derivatives(params, flux, allocation, x);
    let bracketed = deriv(lo).1 < T::zero() && deriv(hi).1 > T::zero();
    let mut x = start;
    for _ in 0..200 {
        let (_, d1, d2) = deriv(x);
        if d1 == T::zero() {
            break;
        }
        if bracketed {
            if d1 < T::zero() {
                lo = x;
            } else {
                hi = x;
            }
        }
        let mut next = if d2 > T::zero() { x - d1 / d2 } else { x - d1.signum() * T::lit(1e-3) };
        if bracketed && !(next > lo && next < hi) {
            next = (lo + hi) * T::lit(0.5);
        }
        let step = (next - x).abs();
        x = next;
        if step <= T::default_epsilon() * T::lit(4.0) * x.abs().max(T::one()) {
            break;
        }
    }
    x
}

/// All local minima of the potential inside `window` (radians).
///
/// The window is sampled with a step of at most 0.01 rad and every sampled
/// local minimum is polished by Newton's method. Minima touching the window
/// edge are not reported.
pub fn find_minima<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    window: (T, T),
) -> Result<PotentialAnalysis<T>> {
    params.validate()?;
    let (start, end) = window;
    if !start.is_finite() || !end.is_finite() || end - start < T::two_pi() {
        return Err(invalid(format!(
            "search window must span at least 2π, got [{}, {}]",
            start.as_f64(),
            end.as_f64()
        )));
    }
    let width = end - start;
    let steps = (width / T::lit(0.01)).ceil().to_usize().unwrap_or(0).max(1);
    let h = width / T::from_index(steps);
    let samples: Vec<T> = (0..=steps)
        .map(|i| potential_derivatives(params, flux, allocation, start + h * T::from_index(i)).0)
        .collect();

    let mut minima: Vec<Minimum<T>> = Vec::new();
    for i in 1..steps {
        if !(samples[i] < samples[i - 1] && samples[i] <= samples[i + 1]) {
            continue;
        }
        let x0 = start + h * T::from_index(i);
        let x = refine(params, flux, allocation, x0 - h, x0 + h, x0);
        let (value, d1, d2) = potential_derivatives(params, flux, allocation, x);
        if d1.abs() >= stationarity_tolerance(params, x) || d2 <= T::zero() {
            continue;
        }
        if x <= start || x >= end {
            continue;
        }
        if minima.iter().any(|m| (m.location - x).abs() < T::lit(1e-6)) {
            continue;
        }
        minima.push(Minimum { location: x, value });
    }
    minima.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .expect("finite")
            .then(a.location.partial_cmp(&b.location).expect("finite"))
    });
    Ok(PotentialAnalysis { minima, allocation, flux })
}

/// Window used to locate the global minimum: ±2π around the center of the
/// quadratic inductive term.
fn global_window<T: Real>(flux: ExternalFlux<T>, allocation: FluxAllocation) -> (T, T) {
    let center = match allocation {
        FluxAllocation::Inductor => flux.reduced(),
        _ => T::zero(),
    };
    (center - T::two_pi(), center + T::two_pi())
}

/// First-order displacement of the global potential minimum when the
/// reduced flux changes by `delta_phi`.
///
/// Inductor allocation: `δφ̄ = E_L / (E_L + E_J cos φ̄) · δφ`, which is
/// `≈ (E_L/E_J) δφ` in the `E_J ≫ E_L` regime.
///
/// Junction allocation, potential `−E_J cos(φ + φ_ext) + ½ E_L φ²`:
/// `δφ̄ = −E_J cos(φ̄ + φ_ext) / (E_L + E_J cos(φ̄ + φ_ext)) · δφ`, of
/// magnitude `≈ δφ` for `E_J ≫ E_L`. The sign reflects that the junction
/// term is written with `φ + φ_ext`.
///
/// When the global minimum is degenerate the lower-φ well is used.
pub fn perturbative_shift<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    delta_phi: T,
) -> Result<T> {
    let analysis = find_minima(params, flux, allocation, global_window(flux, allocation))?;
    let bar = analysis
        .global()
        .ok_or_else(|| invalid("potential has no minimum in the search window"))?
        .location;
    Ok(shift_ratio_at(params, flux, allocation, bar)? * delta_phi)
}

/// `δφ̄/δφ` evaluated at a given minimum location `bar`.
pub fn shift_ratio_at<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
    bar: T,
) -> Result<T> {
    let (numerator, curvature) = match allocation {
        FluxAllocation::Inductor => (params.e_l, params.e_l + params.e_j * bar.cos()),
        _ => {
            let c = params.e_j * (bar + flux.reduced()).cos();
            (-c, params.e_l + c)
        }
    };
    if curvature.abs() < T::lit(1e-9) {
        return Err(Error::SingularConfiguration(format!(
            "vanishing curvature {:.3e} GHz at the minimum",
            curvature.as_f64()
        )));
    }
    Ok(numerator / curvature)
}

/// Global minimum location found by re-minimizing the potential.
pub fn global_minimum_location<T: Real>(
    params: &CircuitParams<T>,
    flux: ExternalFlux<T>,
    allocation: FluxAllocation,
) -> Result<T> {
    find_minima(params, flux, allocation, global_window(flux, allocation))?
        .global()
        .map(|m| m.location)
        .ok_or_else(|| invalid("potential has no minimum in the search window"))
}
