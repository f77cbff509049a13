//! Independent reference computations shared by the integration tests.
//!
//! Nothing here touches the oscillator basis: eigenproblems are solved on a
//! uniform phase grid with a three-point Laplacian, and potential minima by
//! golden-section search. Agreement with the library therefore checks the
//! basis construction, the operator algebra and the eigensolver at once.

#![allow(dead_code)]

use std::f64::consts::PI;

pub const EC: f64 = 0.755;
pub const EJ: f64 = 6.49;
pub const EL: f64 = 0.445;

/// Half-flux `E1 − E0` in GHz for (0.755, 6.49, 0.445), from
/// [`grid_splitting`] with Richardson extrapolation over 8192/16384 cells.
pub const GOLDEN_HALF_FLUX_SPLITTING: f64 = 0.020_512_409_726_5;

/// `(p0, p1)` after a sudden step 0.5 → 0.812 from the pure ground state
/// (inductor frame), from [`grid_sudden`] with the same extrapolation.
pub const GOLDEN_SUDDEN_HALF_FLUX: (f64, f64) = (0.494_229_405_97, 0.497_792_941_52);

/// `V(φ)` with the flux on the inductor.
pub fn inductor_potential(e_j: f64, e_l: f64, flux: f64) -> impl Fn(f64) -> f64 {
    let phi_ext = 2.0 * PI * flux;
    move |phi| -e_j * phi.cos() + 0.5 * e_l * (phi - phi_ext).powi(2)
}

/// `4E_C n² + V(φ)` discretized on the `cells − 1` interior points of
/// `[−10π, 10π]` (Dirichlet walls far outside the wells).
pub struct GridHamiltonian {
    pub step: f64,
    pub points: Vec<f64>,
    pub diag: Vec<f64>,
    pub off: f64,
}

impl GridHamiltonian {
    pub fn new(e_c: f64, cells: usize, v: impl Fn(f64) -> f64) -> Self {
        let half = 10.0 * PI;
        let step = 2.0 * half / cells as f64;
        let points: Vec<f64> = (1..cells).map(|k| -half + k as f64 * step).collect();
        let kinetic = 4.0 * e_c / (step * step);
        let diag = points.iter().map(|&x| v(x) + 2.0 * kinetic).collect();
        Self { step, points, diag, off: -kinetic }
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm sequence).
    fn count_below(&self, lambda: f64) -> usize {
        let off2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - lambda } else { d - lambda - off2 / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let lo_bound = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * self.off.abs();
        let (mut lo, mut hi) = (lo_bound, lo_bound + 1.0);
        while self.count_below(hi) <= k {
            hi = lo_bound + 2.0 * (hi - lo_bound);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for eigenvalue `lambda` by inverse iteration, normalized
    /// so that `Σ ψ² · step = 1` and with a positive sum.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = lambda + 1e-12 * lambda.abs().max(1.0);
        let mut x = vec![1.0; n];
        for _ in 0..4 {
            // Thomas algorithm on (T − shift) y = x.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            let mut denom = self.diag[0] - shift;
            c[0] = self.off / denom;
            d[0] = x[0] / denom;
            for i in 1..n {
                denom = self.diag[i] - shift - self.off * c[i - 1];
                c[i] = self.off / denom;
                d[i] = (x[i] - self.off * d[i - 1]) / denom;
            }
            let mut y = vec![0.0; n];
            y[n - 1] = d[n - 1];
            for i in (0..n - 1).rev() {
                y[i] = d[i] - c[i] * y[i + 1];
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.into_iter().map(|v| v / norm).collect();
        }
        let scale = 1.0 / self.step.sqrt();
        let sign = if x.iter().sum::<f64>() < 0.0 { -scale } else { scale };
        x.into_iter().map(|v| v * sign).collect()
    }
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Half-flux splitting on a grid of `cells` cells.
pub fn grid_splitting_at(cells: usize) -> f64 {
    let h = GridHamiltonian::new(EC, cells, inductor_potential(EJ, EL, 0.5));
    h.eigenvalue(1) - h.eigenvalue(0)
}

/// Extrapolated half-flux splitting.
pub fn grid_splitting() -> f64 {
    richardson(grid_splitting_at(8192), grid_splitting_at(16384))
}

/// `(p0, p1)` for a sudden step `flux_a → flux_b` from the ground state on
/// a grid of `cells` cells.
pub fn grid_sudden_at(flux_a: f64, flux_b: f64, cells: usize) -> (f64, f64) {
    let ha = GridHamiltonian::new(EC, cells, inductor_potential(EJ, EL, flux_a));
    let hb = GridHamiltonian::new(EC, cells, inductor_potential(EJ, EL, flux_b));
    let psi = ha.eigenvector(ha.eigenvalue(0));
    let overlap = |m: usize| {
        let chi = hb.eigenvector(hb.eigenvalue(m));
        let s: f64 = psi.iter().zip(&chi).map(|(a, b)| a * b).sum::<f64>() * ha.step;
        s * s
    };
    (overlap(0), overlap(1))
}

pub fn grid_sudden(flux_a: f64, flux_b: f64) -> (f64, f64) {
    let c = grid_sudden_at(flux_a, flux_b, 8192);
    let f = grid_sudden_at(flux_a, flux_b, 16384);
    (richardson(c.0, f.0), richardson(c.1, f.1))
}

/// Local minimum of `f` in `[a, b]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub mod sim {
    use fluxquant_core::{
        final_populations, make_basis, propagate_detailed, BasisSpec64, CircuitParams64,
        FluxAllocation, FluxPulse, PropagatorConfig, PulseShape, StateVector,
    };

    pub fn paper() -> CircuitParams64 {
        CircuitParams64::measured_device()
    }

    pub fn basis(dim: usize) -> BasisSpec64 {
        make_basis(&paper(), dim).unwrap()
    }

    pub fn pulse(flux_a: f64, flux_b: f64, rise: f64) -> FluxPulse<f64> {
        FluxPulse::new(flux_a, flux_b, rise, PulseShape::Linear, 0.0).unwrap()
    }

    /// Final populations of the lowest `levels` states at the pulse end,
    /// starting from the ground state at the pulse start.
    pub fn ramp_populations(
        allocation: FluxAllocation,
        pulse: &FluxPulse<f64>,
        dt: f64,
        verify: bool,
        levels: usize,
    ) -> Vec<f64> {
        let b = basis(120);
        let p = paper();
        let psi0 = StateVector::eigenstate(&p, pulse.flux_start, allocation, &b, 0).unwrap();
        let cfg = PropagatorConfig { dt, t_end: pulse.ramp_end() + 0.5, verify };
        let report = propagate_detailed(&p, allocation, pulse, &psi0, &cfg, &b).unwrap();
        final_populations(&report.state, &p, pulse.flux_end, allocation, &b, levels).unwrap()
    }

    pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }
}
