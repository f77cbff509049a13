//! One function per subcommand. Each returns the files it wrote.

use std::f64::consts::PI;
use std::path::PathBuf;

use fluxquant_core::dynamics::Propagator;
use fluxquant_core::fit::read_observations;
use fluxquant_core::hamiltonian::potential_curve;
use fluxquant_core::operators::eigenfunction_on_grid;
use fluxquant_core::sudden::flux_range;
use fluxquant_core::{
    fit_params, flux_profile, make_basis, propagate_detailed, simulate_experiment,
    spectrum_vs_flux, BasisSpec64, ExternalFlux, FitOptions, FluxPulse, Frame,
    PreparationModel, PropagatorConfig, Spectrum, StateVector, SuddenExperimentConfig,
};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{metadata_path, num, output_path, write_csv, write_json};

/// Readout note attached to every sudden-experiment table.
const LEAKAGE_NOTE: &str = "the 2x2 confusion matrix acts on (p0, p1) only; \
     population in levels >= 2 is not reassigned, so corrected values need not sum to 1";

fn basis(cfg: &RunConfig) -> Result<BasisSpec64, CliError> {
    Ok(make_basis(&cfg.params, cfg.basis_dim)?)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn common_meta(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "params_ghz": cfg.params,
        "basis_dim": cfg.basis_dim,
        "allocation": cfg.allocation,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

pub fn spectrum(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.spectrum;
    let b = basis(cfg)?;
    let fluxes = linspace(s.flux_min, s.flux_max, s.points);
    let rows = spectrum_vs_flux(&cfg.params, &fluxes, s.levels, &b, s.relative_to_ground)?;

    let mut header = vec!["flux".to_string()];
    header.extend((0..s.levels).map(|k| format!("e{k}_ghz")));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| std::iter::once(num(r.flux)).chain(r.energies.iter().map(|&e| num(e))).collect())
        .collect();
    let path = output_path(cfg.out.as_deref(), "spectrum.csv");
    write_csv(&path, &header, &body)?;
    let mut meta = common_meta(cfg);
    meta["spectrum"] = json!(s);
    let meta_path = metadata_path(&path);
    write_json(&meta_path, &meta)?;
    Ok(vec![path, meta_path])
}

pub fn wavefunction(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let w = &cfg.wavefunction;
    let b = basis(cfg)?;
    let flux = ExternalFlux::new(w.flux)?;
    let top = *w.levels.iter().max().expect("validated non-empty");
    let spec = Spectrum::compute(&cfg.params, flux, cfg.allocation, &b, top + 1)?;

    // Centre on the inductive minimum: φ_ext in the inductor frame, 0 in the
    // junction frame. At half flux this is the barrier between the wells.
    let center = match cfg.allocation.frame() {
        Frame::Inductor => flux.reduced(),
        Frame::Junction => 0.0,
    };
    let lo = w.phi_min.unwrap_or(center - 3.0 * PI);
    let hi = w.phi_max.unwrap_or(center + 3.0 * PI);
    if hi <= lo {
        return Err(CliError::Invalid("config key `wavefunction.phi_max`: must exceed phi_min".into()));
    }
    let grid = linspace(lo, hi, w.points);
    let potential = potential_curve(&cfg.params, flux, cfg.allocation, &grid);
    let columns = w
        .levels
        .iter()
        .map(|&l| eigenfunction_on_grid(&b, &spec.state(l), &grid))
        .collect::<Result<Vec<_>, _>>()?;

    let mut header = vec!["phi".to_string(), "potential_ghz".to_string()];
    for l in &w.levels {
        header.push(format!("re_psi{l}"));
        header.push(format!("im_psi{l}"));
    }
    let body: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, &phi)| {
            let mut row = vec![num(phi), num(potential[i])];
            for c in &columns {
                row.push(num(c[i].re));
                row.push(num(c[i].im));
            }
            row
        })
        .collect();
    let path = output_path(cfg.out.as_deref(), "wavefunction.csv");
    write_csv(&path, &header, &body)?;
    let mut meta = common_meta(cfg);
    meta["wavefunction"] = json!({
        "flux": w.flux,
        "levels": w.levels,
        "energies_ghz": w.levels.iter().map(|&l| spec.energies[l]).collect::<Vec<_>>(),
        "phi_min": lo,
        "phi_max": hi,
        "points": w.points,
        "normalization": "integral of |psi|^2 dphi = 1",
    });
    let meta_path = metadata_path(&path);
    write_json(&meta_path, &meta)?;
    Ok(vec![path, meta_path])
}

/// Corrected-population band edges emitted next to the main columns.
const BAND_ALPHAS: [f64; 3] = [0.0, 0.05, 0.1];

pub fn sudden(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let q = &cfg.sudden;
    let b = basis(cfg)?;
    let flux_a_list = match &q.flux_a {
        Some(list) => list.clone(),
        None => flux_range(q.flux_a_min, q.flux_a_max, q.flux_a_step),
    };
    let experiment = |alpha: f64| -> Result<_, CliError> {
        let config = SuddenExperimentConfig {
            flux_a_list: flux_a_list.clone(),
            flux_b: q.flux_b,
            levels_b: q.levels_b,
            allocation: cfg.allocation,
            prep: PreparationModel::new(alpha)?,
            confusion: cfg.confusion(),
        };
        Ok(simulate_experiment(&cfg.params, &config, &b)?)
    };
    let main = experiment(q.alpha)?;
    let bands = if q.band {
        BAND_ALPHAS.iter().map(|&a| experiment(a)).collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    let mut header: Vec<String> =
        ["flux_a", "p0", "p1", "subspace", "p0_corr", "p1_corr"].map(String::from).to_vec();
    for a in BAND_ALPHAS.iter().take(bands.len()) {
        header.push(format!("p0_corr_alpha_{a}"));
        header.push(format!("p1_corr_alpha_{a}"));
    }
    let body: Vec<Vec<String>> = main
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![
                num(r.flux_a),
                num(r.raw[0]),
                num(r.raw[1]),
                num(r.subspace),
                num(r.p0_corrected),
                num(r.p1_corrected),
            ];
            for t in &bands {
                row.push(num(t.rows[i].p0_corrected));
                row.push(num(t.rows[i].p1_corrected));
            }
            row
        })
        .collect();
    let path = output_path(cfg.out.as_deref(), "sudden.csv");
    write_csv(&path, &header, &body)?;
    let mut meta = common_meta(cfg);
    meta["sudden"] = json!({
        "flux_b": q.flux_b,
        "levels_b": q.levels_b,
        "alpha": q.alpha,
        "band_alphas": if q.band { BAND_ALPHAS.to_vec() } else { Vec::new() },
        "confusion": q.confusion,
        "readout": LEAKAGE_NOTE,
    });
    let meta_path = metadata_path(&path);
    write_json(&meta_path, &meta)?;
    Ok(vec![path, meta_path])
}

pub fn dynamics(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let d = &cfg.dynamics;
    let b = basis(cfg)?;
    let pulse = FluxPulse::new(d.flux_start, d.flux_end, d.rise_ns, d.shape, d.t0)?;
    let t_end = d.t_end.unwrap_or(pulse.ramp_end() + 0.5);
    let prop_cfg = PropagatorConfig { dt: d.dt_ns, t_end, verify: d.verify };
    let psi0 = StateVector::eigenstate(&cfg.params, d.flux_start, cfg.allocation, &b, 0)?;

    // Settle the step size first, then record the trajectory at that step.
    let report = propagate_detailed(&cfg.params, cfg.allocation, &pulse, &psi0, &prop_cfg, &b)?;
    let readout = Spectrum::compute(&cfg.params, ExternalFlux::new(d.flux_end)?, cfg.allocation, &b, d.levels)?;

    let stride = ((d.sample_ns / report.dt).round() as usize).max(1);
    let total_steps_hint = (t_end / report.dt).ceil() as usize;
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(total_steps_hint / stride + 2);
    let mut step = 0usize;
    let mut last_t = 0.0;
    let row = |t: f64, psi: &_| {
        let p = readout.populations(psi);
        let (flux, _) = flux_profile(&pulse, t);
        vec![num(t), num(flux), num(p[0]), num(p[1]), num(p[0] + p[1])]
    };
    let propagator = Propagator::new(&cfg.params, cfg.allocation, &pulse, &b)?;
    let final_state = propagator.evolve(&psi0, report.dt, t_end, |t, psi| {
        if step.is_multiple_of(stride) {
            rows.push(row(t, psi));
            last_t = t;
        }
        step += 1;
    })?;
    if last_t < t_end {
        rows.push(row(t_end, &final_state.coeffs));
    }
    let p = readout.populations(&report.state.coeffs);
    rows.push(vec!["final".into(), num(d.flux_end), num(p[0]), num(p[1]), num(p[0] + p[1])]);

    let header = ["t_ns", "flux", "p0", "p1", "subspace"].map(String::from).to_vec();
    let path = output_path(cfg.out.as_deref(), "dynamics.csv");
    write_csv(&path, &header, &rows)?;
    let mut meta = common_meta(cfg);
    meta["dynamics"] = json!({
        "pulse": d,
        "t_end": t_end,
        "dt_used_ns": report.dt,
        "refinement_change": report.refinement_change,
        "final_populations": p,
        "readout_basis": "eigenstates at flux_end in the propagation frame",
    });
    let meta_path = metadata_path(&path);
    write_json(&meta_path, &meta)?;
    Ok(vec![path, meta_path])
}

pub fn fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let f = &cfg.fit;
    let data = f
        .data
        .as_deref()
        .ok_or_else(|| CliError::Invalid("fit needs an observation file (--data or fit.data)".into()))?;
    let observations = read_observations::<f64>(data)?;
    let options = FitOptions {
        dim: f.dim,
        verify_dim: f.verify_dim,
        max_iterations: f.max_iterations,
        ..FitOptions::default()
    };
    let result = fit_params(&observations, &f.initial_guess, &options)?;
    println!(
        "E_C = {:.6} GHz, E_J = {:.6} GHz, E_L = {:.6} GHz",
        result.params.e_c, result.params.e_j, result.params.e_l
    );
    println!(
        "residual_rms = {:.3e} GHz, iterations = {}, converged = {}",
        result.residual_rms, result.iterations, result.converged
    );
    let path = output_path(cfg.out.as_deref(), "fit.json");
    write_json(
        &path,
        &json!({
            "params": result.params,
            "residual_rms_ghz": result.residual_rms,
            "iterations": result.iterations,
            "converged": result.converged,
            "observations": observations.len(),
            "data": data,
        }),
    )?;
    Ok(vec![path])
}
