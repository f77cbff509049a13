//! Circuit-parameter recovery from spectroscopy data.
//!
//! Minimizes `Σ w (f_model − f_observed)²` with a Nelder–Mead simplex over
//! `(ln E_C, ln E_J, ln E_L)`, which keeps every trial point physical.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{eigenvalues, CircuitParams, FluxAllocation};
use crate::operators::{make_basis, BasisSpec, OperatorSet};
use crate::scalar::Real;

/// Highest level index a spectroscopy point may reference.
pub const MAX_LEVEL: usize = 6;

/// Header of the observation file; the trailing `weight` column is optional.
pub const OBSERVATION_HEADER: &str = "flux,level_i,level_j,freq_ghz,weight";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectroscopyPoint<T> {
    pub flux: T,
    pub level_pair: (usize, usize),
    /// GHz
    pub frequency: T,
    pub weight: T,
}

impl<T: Real> SpectroscopyPoint<T> {
    pub fn new(flux: T, level_pair: (usize, usize), frequency: T, weight: T) -> Result<Self> {
        let p = Self { flux, level_pair, frequency, weight };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, j) = self.level_pair;
        if i >= j || j > MAX_LEVEL {
            return Err(invalid(format!(
                "level pair ({i}, {j}) must satisfy i < j <= {MAX_LEVEL}"
            )));
        }
        if !(self.frequency > T::zero()) || !self.frequency.is_finite() {
            return Err(invalid("transition frequency must be positive"));
        }
        if !(self.weight > T::zero()) || !self.weight.is_finite() {
            return Err(invalid("weight must be positive"));
        }
        if !self.flux.is_finite() {
            return Err(invalid("flux must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult<T> {
    pub params: CircuitParams<T>,
    /// Weighted RMS residual in GHz.
    pub residual_rms: T,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    #[serde(skip)]
    pub history: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Basis dimension used while optimizing.
    pub dim: usize,
    /// Dimension of the final residual evaluation, if different.
    pub verify_dim: Option<usize>,
    pub max_iterations: usize,
    /// Simplex diameter (log space) at which the search stops.
    pub tolerance: f64,
    /// Initial simplex edge in log space.
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { dim: 80, verify_dim: Some(120), max_iterations: 500, tolerance: 1e-6, initial_step: 0.1 }
    }
}

/// `E_j − E_i` of the static spectrum at the point's flux.
pub fn model_frequency<T: Real>(
    params: &CircuitParams<T>,
    point: &SpectroscopyPoint<T>,
    basis: &BasisSpec<T>,
) -> Result<T> {
    params.validate()?;
    point.validate()?;
    let ops = OperatorSet::new(basis);
    let (i, j) = point.level_pair;
    if j >= basis.dim() {
        return Err(invalid("level index exceeds basis dimension"));
    }
    let e = eigenvalues(&ops.hamiltonian(params, point.flux, T::zero(), FluxAllocation::Inductor));
    Ok(e[j] - e[i])
}

/// Observations grouped by flux so each flux value is diagonalized once.
struct Grouped<T> {
    fluxes: Vec<T>,
    /// Per flux: `(i, j, frequency, weight)`.
    entries: Vec<Vec<Entry<T>>>,
    weight_sum: T,
}

type Entry<T> = (usize, usize, T, T);

fn group<T: Real>(observations: &[SpectroscopyPoint<T>]) -> Grouped<T> {
    let mut map: BTreeMap<u64, (T, Vec<Entry<T>>)> = BTreeMap::new();
    for p in observations {
        let key = p.flux.as_f64().to_bits();
        map.entry(key)
            .or_insert_with(|| (p.flux, Vec::new()))
            .1
            .push((p.level_pair.0, p.level_pair.1, p.frequency, p.weight));
    }
    let weight_sum = observations.iter().fold(T::zero(), |a, p| a + p.weight);
    let (fluxes, entries) = map.into_values().unzip();
    Grouped { fluxes, entries, weight_sum }
}

/// Weighted sum of squared residuals in a basis of dimension `dim`.
fn objective<T: Real>(params: &CircuitParams<T>, data: &Grouped<T>, dim: usize) -> Result<T> {
    let basis = make_basis(params, dim)?;
    let ops = OperatorSet::new(&basis);
    let parts = data
        .fluxes
        .par_iter()
        .zip(data.entries.par_iter())
        .map(|(&flux, entries)| {
            let e = eigenvalues(&ops.hamiltonian(params, flux, T::zero(), FluxAllocation::Inductor));
            entries.iter().fold(T::zero(), |acc, &(i, j, f, w)| {
                let r = e[j] - e[i] - f;
                acc + w * r * r
            })
        })
        .collect::<Vec<T>>();
    Ok(parts.into_iter().fold(T::zero(), |a, b| a + b))
}

fn params_from_log<T: Real>(x: &[T; 3]) -> CircuitParams<T> {
    CircuitParams { e_c: x[0].exp(), e_j: x[1].exp(), e_l: x[2].exp() }
}

/// Fits `(E_C, E_J, E_L)` to `observations` starting from `initial_guess`.
pub fn fit_params<T: Real>(
    observations: &[SpectroscopyPoint<T>],
    initial_guess: &CircuitParams<T>,
    options: &FitOptions,
) -> Result<FitResult<T>> {
    initial_guess.validate()?;
    if observations.len() < 3 {
        return Err(invalid(format!(
            "need at least 3 observations, got {}",
            observations.len()
        )));
    }
    for p in observations {
        p.validate()?;
        if p.level_pair.1 >= options.dim {
            return Err(invalid("level index exceeds basis dimension"));
        }
    }
    let data = group(observations);
    if data.fluxes.len() < 2 {
        return Err(invalid("observations must span at least two distinct flux values"));
    }
    if options.dim < 2 {
        return Err(invalid("basis dimension must be at least 2"));
    }

    let f = |x: &[T; 3]| objective(&params_from_log(x), &data, options.dim);
    let start = [initial_guess.e_c.ln(), initial_guess.e_j.ln(), initial_guess.e_l.ln()];
    let outcome = nelder_mead(f, start, options)?;
    let params = params_from_log(&outcome.best);

    let final_dim = options.verify_dim.unwrap_or(options.dim);
    let sse = objective(&params, &data, final_dim)?;
    Ok(FitResult {
        params,
        residual_rms: (sse / data.weight_sum).sqrt(),
        iterations: outcome.iterations,
        converged: outcome.converged,
        history: outcome.history,
    })
}

struct SimplexOutcome<T> {
    best: [T; 3],
    iterations: usize,
    converged: bool,
    history: Vec<T>,
}

/// Nelder–Mead with the standard coefficients (reflection 1, expansion 2,
/// contraction ½, shrink ½).
fn nelder_mead<T: Real>(
    f: impl Fn(&[T; 3]) -> Result<T>,
    start: [T; 3],
    options: &FitOptions,
) -> Result<SimplexOutcome<T>> {
    const N: usize = 3;
    let tol = T::lit(options.tolerance);
    let half = T::lit(0.5);

    let f0 = f(&start)?;
    // Already at an exact optimum (RMS below 1e-12 GHz): nothing to do.
    if f0 <= T::lit(1e-24) {
        return Ok(SimplexOutcome { best: start, iterations: 0, converged: true, history: vec![f0] });
    }

    let mut simplex: Vec<([T; 3], T)> = vec![(start, f0)];
    for k in 0..N {
        let mut x = start;
        x[k] += T::lit(options.initial_step);
        let fx = f(&x)?;
        simplex.push((x, fx));
    }

    let combine = |a: &[T; 3], b: &[T; 3], t: T| -> [T; 3] {
        // a + t (b − a)
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
    };
    let diameter = |s: &[([T; 3], T)]| -> T {
        let best = s[0].0;
        s[1..]
            .iter()
            .map(|(x, _)| {
                x.iter().zip(&best).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
            })
            .fold(T::zero(), |a, b| a.max(b))
    };

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objective"));
        if diameter(&simplex) < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [T::zero(); N];
        for (x, _) in &simplex[..N] {
            for k in 0..N {
                centroid[k] += x[k] / T::from_index(N);
            }
        }
        let worst = simplex[N];
        let reflected = combine(&centroid, &worst.0, -T::one());
        let fr = f(&reflected)?;

        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, T::lit(-2.0));
            let fe = f(&expanded)?;
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 { (reflected, fr) } else { worst };
            let contracted = combine(&centroid, &target, half);
            let fc = f(&contracted)?;
            if fc < ft {
                simplex[N] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &v.0, half);
                    *v = (x, f(&x)?);
                }
            }
        }
        let best = simplex.iter().map(|v| v.1).fold(simplex[0].1, |a, b| a.min(b));
        history.push(best);
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objective"));
    if !converged && diameter(&simplex) < tol {
        converged = true;
    }
    Ok(SimplexOutcome { best: simplex[0].0, iterations, converged, history })
}

/// Reads observations in the `flux,level_i,level_j,freq_ghz[,weight]` format.
pub fn parse_observations<T: Real, R: Read>(reader: R) -> Result<Vec<SpectroscopyPoint<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let header_error = || Error::Parse {
        line: 1,
        message: format!("expected header `{OBSERVATION_HEADER}` (weight column optional)"),
    };
    let headers = rdr.headers().map_err(|_| header_error())?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let expected: Vec<&str> = OBSERVATION_HEADER.split(',').collect();
    let has_weight = match names.len() {
        4 if names[..] == expected[..4] => false,
        5 if names[..] == expected[..] => true,
        _ => return Err(header_error()),
    };

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| Error::Parse { line, message };
        let num = |idx: usize| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .map_err(|_| err(format!("column `{}`: cannot parse {:?}", expected[idx], &record[idx])))
        };
        let level = |idx: usize| -> Result<usize> {
            record[idx]
                .parse::<usize>()
                .map_err(|_| err(format!("column `{}`: cannot parse {:?}", expected[idx], &record[idx])))
        };
        let weight = if has_weight && !record[4].is_empty() { num(4)? } else { 1.0 };
        let point = SpectroscopyPoint::new(
            T::lit(num(0)?),
            (level(1)?, level(2)?),
            T::lit(num(3)?),
            T::lit(weight),
        )
        .map_err(|e| err(e.to_string()))?;
        out.push(point);
    }
    Ok(out)
}

pub fn read_observations<T: Real>(path: &Path) -> Result<Vec<SpectroscopyPoint<T>>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    parse_observations(file)
}

/// Noiseless observations of the listed transitions at each flux.
pub fn synthesize_observations<T: Real>(
    params: &CircuitParams<T>,
    fluxes: &[T],
    pairs: &[(usize, usize)],
    dim: usize,
) -> Result<Vec<SpectroscopyPoint<T>>> {
    let basis = make_basis(params, dim)?;
    let ops = OperatorSet::new(&basis);
    let mut out = Vec::new();
    for &flux in fluxes {
        let e = eigenvalues(&ops.hamiltonian(params, flux, T::zero(), FluxAllocation::Inductor));
        for &(i, j) in pairs {
            out.push(SpectroscopyPoint::new(flux, (i, j), e[j] - e[i], T::one())?);
        }
    }
    Ok(out)
}
