//! Static spectrum, potential and sudden-overlap checks against the
//! independent grid and golden-section references.

mod common;

use common::sim::{basis, paper};
use common::*;
use fluxquant_core::hamiltonian::{
    find_minima, global_minimum_location, perturbative_shift, potential_derivatives,
};
use fluxquant_core::operators::eigenfunction_on_grid;
use fluxquant_core::{
    overlap_probabilities, ExternalFlux, FluxAllocation, OperatorSet, Spectrum,
};
use std::f64::consts::PI;

fn spectrum(flux: f64, alloc: FluxAllocation, levels: usize) -> Spectrum<f64> {
    Spectrum::compute(&paper(), ExternalFlux(flux), alloc, &basis(120), levels).unwrap()
}

#[test]
fn half_flux_splitting_matches_grid_reference() {
    let s = spectrum(0.5, FluxAllocation::Inductor, 2).transition(0, 1);
    let rel = (s - GOLDEN_HALF_FLUX_SPLITTING).abs() / GOLDEN_HALF_FLUX_SPLITTING;
    assert!(rel < 1e-6, "{s} vs {GOLDEN_HALF_FLUX_SPLITTING}");
}

#[test]
fn low_levels_match_grid_away_from_half_flux() {
    for flux in [0.0, 0.3, 0.812] {
        let s = spectrum(flux, FluxAllocation::Inductor, 3);
        let energies = |cells| {
            let h = GridHamiltonian::new(EC, cells, inductor_potential(EJ, EL, flux));
            [h.eigenvalue(0), h.eigenvalue(1), h.eigenvalue(2)]
        };
        let (c, f) = (energies(8192), energies(16384));
        for k in 0..3 {
            let reference = (4.0 * f[k] - c[k]) / 3.0;
            assert!((s.energies[k] - reference).abs() < 1e-7, "flux {flux} level {k}");
        }
    }
}

#[test]
fn sudden_overlaps_match_grid_reference() {
    let b = basis(120);
    let ops = OperatorSet::new(&b);
    let p = paper();
    let a = Spectrum::with_operators(&ops, &p, ExternalFlux(0.5), FluxAllocation::Inductor, 1).unwrap();
    let z = Spectrum::with_operators(&ops, &p, ExternalFlux(0.812), FluxAllocation::Inductor, 2).unwrap();
    let probs = overlap_probabilities(&a, &z, 0).unwrap();
    assert!((probs[0] - GOLDEN_SUDDEN_HALF_FLUX.0).abs() < 1e-7, "{}", probs[0]);
    assert!((probs[1] - GOLDEN_SUDDEN_HALF_FLUX.1).abs() < 1e-7, "{}", probs[1]);

    // Away from the degenerate point the reference is recomputed directly.
    let a = Spectrum::with_operators(&ops, &p, ExternalFlux(0.503), FluxAllocation::Inductor, 1).unwrap();
    let probs = overlap_probabilities(&a, &z, 0).unwrap();
    let (r0, r1) = grid_sudden(0.503, 0.812);
    assert!((probs[0] - r0).abs() < 1e-7 && (probs[1] - r1).abs() < 1e-7);
}

#[test]
fn wavefunctions_related_by_shift() {
    let flux = 0.812;
    let phi_ext = 2.0 * PI * flux;
    let b = basis(120);
    let ind = spectrum(flux, FluxAllocation::Inductor, 3);
    let jun = spectrum(flux, FluxAllocation::JunctionIncomplete, 3);
    let grid: Vec<f64> = (0..=1600).map(|k| -8.0 + 0.01 * k as f64).collect();
    let shifted: Vec<f64> = grid.iter().map(|x| x + phi_ext).collect();
    for level in 0..3 {
        let psi_j = eigenfunction_on_grid(&b, &jun.state(level), &grid).unwrap();
        let psi_i = eigenfunction_on_grid(&b, &ind.state(level), &shifted).unwrap();
        // Fix the relative global phase from the overlap on the grid.
        let dot: num_complex::Complex<f64> =
            psi_i.iter().zip(&psi_j).map(|(a, c)| a.conj() * c).sum();
        let phase = dot / dot.norm();
        let worst = psi_i
            .iter()
            .zip(&psi_j)
            .map(|(a, c)| (a * phase - c).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "level {level}: {worst}");
    }
}

#[test]
fn minima_match_golden_section() {
    let p = paper();
    for flux in [0.1, 0.3, 0.45, 0.7, 0.812] {
        let fx = ExternalFlux(flux);
        let found = find_minima(&p, fx, FluxAllocation::Inductor, (-4.0 * PI, 6.0 * PI)).unwrap();
        assert!(!found.minima.is_empty());
        for m in &found.minima {
            let v = |x| potential_derivatives(&p, fx, FluxAllocation::Inductor, x).0;
            let reference = golden_section(v, m.location - 0.5, m.location + 0.5);
            assert!((m.location - reference).abs() < 1e-6, "flux {flux}: {} vs {reference}", m.location);
        }
    }
}

#[test]
fn perturbative_shift_is_first_order_accurate() {
    let p = paper();
    for alloc in [FluxAllocation::Inductor, FluxAllocation::JunctionIncomplete] {
        let flux = 0.3;
        let bar = global_minimum_location(&p, ExternalFlux(flux), alloc).unwrap();
        let mut errors = Vec::new();
        for delta in [1e-2, 1e-3, 1e-4] {
            let predicted = perturbative_shift(&p, ExternalFlux(flux), alloc, delta).unwrap();
            let moved = global_minimum_location(&p, ExternalFlux(flux + delta / (2.0 * PI)), alloc).unwrap();
            let actual = moved - bar;
            errors.push((predicted - actual).abs() / actual.abs());
        }
        assert!(errors[1] < 5e-3, "{alloc}: {errors:?}");
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 5.0 && ratio < 20.0, "{alloc}: {errors:?}");
        }
    }
}
