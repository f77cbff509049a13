//! Sudden-approximation predictions for a fast flux step `Φ_a → Φ_b`.
//!
//! The state is frozen through the ramp, so the population of the final
//! eigenstate `|m_b⟩` is the squared overlap `|⟨m_b|ψ_initial⟩|²`. Which
//! eigenvectors enter the overlap depends on the allocation:
//!
//! * `Inductor`: inductor-frame eigenstates at both flux points.
//! * `JunctionIncomplete`: junction-frame eigenstates at both points, i.e. the
//!   state is (wrongly) held fixed in the junction variable.
//! * `JunctionComplete`: junction-frame eigenstates, with the impulse of the
//!   `dΦ/dt` term applied. For an instantaneous step that term integrates to
//!   the translation `exp(i (φ_b − φ_a) n)`, which reproduces the inductor
//!   prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Result};
use crate::hamiltonian::{CircuitParams, ExternalFlux, FluxAllocation, Spectrum};
use crate::operators::{translation_operator, BasisSpec, OperatorSet};
use crate::scalar::Real;

/// Probability `alpha` that ground-state preparation left the system in the
/// first excited state instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationModel<T> {
    alpha: T,
}

impl<T: Real> PreparationModel<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {}", alpha.as_f64())));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
}

/// Column-stochastic map from true `(p0, p1)` to reported `(p0′, p1′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
#[serde(bound = "T: Real")]
pub struct ConfusionMatrix<T: Real> {
    m: [[T; 2]; 2],
}

impl<T: Real> ConfusionMatrix<T> {
    pub fn new(m: [[T; 2]; 2]) -> Result<Self> {
        let tol = T::lit(1e-9);
        for row in &m {
            for &x in row {
                if !(x >= T::zero() && x <= T::one()) {
                    return Err(invalid("confusion matrix entries must lie in [0, 1]"));
                }
            }
        }
        for (col, sum) in (0..2).map(|c| (c, m[0][c] + m[1][c])) {
            if (sum - T::one()).abs() > tol {
                return Err(invalid(format!(
                    "confusion matrix column {col} sums to {}, expected 1",
                    sum.as_f64()
                )));
            }
        }
        Ok(Self { m })
    }

    /// Readout calibration of the measured device: 5% of ground-state shots
    /// read as excited, 4% of excited-state shots read as ground.
    pub fn measured_readout() -> Self {
        Self { m: [[T::lit(0.95), T::lit(0.04)], [T::lit(0.05), T::lit(0.96)]] }
    }

    pub fn identity() -> Self {
        Self { m: [[T::one(), T::zero()], [T::zero(), T::one()]] }
    }

    pub fn entries(&self) -> [[T; 2]; 2] {
        self.m
    }
}

impl<T: Real> TryFrom<[[f64; 2]; 2]> for ConfusionMatrix<T> {
    type Error = crate::Error;

    fn try_from(m: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(m.map(|row| row.map(T::lit)))
    }
}

impl<T: Real> From<ConfusionMatrix<T>> for [[f64; 2]; 2] {
    fn from(c: ConfusionMatrix<T>) -> Self {
        c.m.map(|row| row.map(T::as_f64))
    }
}

fn check_pair<T: Real>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<()> {
    if a.allocation != b.allocation {
        return Err(contract(format!(
            "spectra use different allocations ({} vs {})",
            a.allocation, b.allocation
        )));
    }
    if a.basis != b.basis {
        return Err(contract("spectra use different bases"));
    }
    Ok(())
}

/// `|⟨m_b | initial_a⟩|²` for every state `m` kept in `spec_b`.
pub fn overlap_probabilities<T: Real>(
    spec_a: &Spectrum<T>,
    spec_b: &Spectrum<T>,
    initial_index: usize,
) -> Result<Vec<T>> {
    check_pair(spec_a, spec_b)?;
    if initial_index >= spec_a.len() {
        return Err(invalid(format!(
            "initial index {initial_index} out of range for {} states",
            spec_a.len()
        )));
    }
    let mut initial = spec_a.states.column(initial_index).into_owned();
    if spec_a.allocation == FluxAllocation::JunctionComplete {
        let jump = spec_b.flux.reduced() - spec_a.flux.reduced();
        initial = translation_operator(&spec_a.basis, jump) * initial;
    }
    Ok(spec_b
        .states
        .column_iter()
        .map(|final_state| final_state.dotc(&initial).norm_sqr())
        .collect())
}

/// Populations after the step when preparation yields
/// `ρ = (1−α)|0_a⟩⟨0_a| + α|1_a⟩⟨1_a|`.
pub fn mixed_probabilities<T: Real>(
    spec_a: &Spectrum<T>,
    spec_b: &Spectrum<T>,
    prep: PreparationModel<T>,
) -> Result<Vec<T>> {
    if spec_a.len() < 2 {
        return Err(invalid("initial spectrum must keep at least two states"));
    }
    let ground = overlap_probabilities(spec_a, spec_b, 0)?;
    let excited = overlap_probabilities(spec_a, spec_b, 1)?;
    let alpha = prep.alpha();
    Ok(ground
        .iter()
        .zip(&excited)
        .map(|(&g, &e)| (T::one() - alpha) * g + alpha * e)
        .collect())
}

/// `(p0′, p1′) = M (p0, p1)`. Leaked population is not redistributed, so the
/// corrected pair sums to less than one whenever the input does.
pub fn apply_confusion<T: Real>(p0: T, p1: T, m: &ConfusionMatrix<T>) -> Result<(T, T)> {
    for (name, p) in [("p0", p0), ("p1", p1)] {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(invalid(format!("{name} must lie in [0, 1], got {}", p.as_f64())));
        }
    }
    let e = m.entries();
    Ok((e[0][0] * p0 + e[0][1] * p1, e[1][0] * p0 + e[1][1] * p1))
}

#[derive(Debug, Clone)]
pub struct SuddenExperimentConfig<T: Real> {
    pub flux_a_list: Vec<T>,
    pub flux_b: T,
    /// Number of final-basis states tracked.
    pub levels_b: usize,
    pub allocation: FluxAllocation,
    pub prep: PreparationModel<T>,
    pub confusion: ConfusionMatrix<T>,
}

impl<T: Real> SuddenExperimentConfig<T> {
    /// Start points `0.498 ..= 0.503` in steps of `0.0005`, final flux
    /// `0.812`, 12 tracked levels, `α = 0.05` and the measured readout matrix.
    pub fn measured_sweep(allocation: FluxAllocation) -> Self {
        Self {
            flux_a_list: flux_range(T::lit(0.498), T::lit(0.503), T::lit(0.0005)),
            flux_b: T::lit(0.812),
            levels_b: 12,
            allocation,
            prep: PreparationModel { alpha: T::lit(0.05) },
            confusion: ConfusionMatrix::measured_readout(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.flux_a_list.is_empty() {
            return Err(invalid("flux_a_list is empty"));
        }
        if self.levels_b < 2 {
            return Err(invalid("levels_b must be at least 2"));
        }
        for &f in self.flux_a_list.iter().chain(std::iter::once(&self.flux_b)) {
            ExternalFlux::new(f)?;
        }
        Ok(())
    }
}

/// Inclusive range `start, start + step, …` up to `stop` (within step/1000).
pub fn flux_range<T: Real>(start: T, stop: T, step: T) -> Vec<T> {
    if !(step > T::zero()) || stop < start {
        return vec![start];
    }
    let count = ((stop - start) / step + T::lit(1e-3)).floor().to_usize().unwrap_or(0);
    (0..=count).map(|i| start + step * T::from_index(i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationRow<T> {
    pub flux_a: T,
    /// `p_m` for `m = 0 … levels_b − 1`, before readout correction.
    pub raw: Vec<T>,
    /// `p0 + p1`
    pub subspace: T,
    pub p0_corrected: T,
    pub p1_corrected: T,
}

#[derive(Debug, Clone)]
pub struct OccupationTable<T> {
    pub allocation: FluxAllocation,
    pub alpha: T,
    pub flux_b: T,
    pub rows: Vec<OccupationRow<T>>,
}

/// Runs the step experiment for every start point in `config`, rows in
/// input order.
pub fn simulate_experiment<T: Real>(
    params: &CircuitParams<T>,
    config: &SuddenExperimentConfig<T>,
    basis: &BasisSpec<T>,
) -> Result<OccupationTable<T>> {
    params.validate()?;
    config.validate()?;
    if config.levels_b > basis.dim() {
        return Err(invalid(format!(
            "levels_b = {} exceeds the basis dimension {}",
            config.levels_b,
            basis.dim()
        )));
    }
    let ops = OperatorSet::new(basis);
    let spec_b = Spectrum::with_operators(
        &ops,
        params,
        ExternalFlux(config.flux_b),
        config.allocation,
        config.levels_b,
    )?;
    let rows = config
        .flux_a_list
        .par_iter()
        .map(|&flux_a| {
            let spec_a =
                Spectrum::with_operators(&ops, params, ExternalFlux(flux_a), config.allocation, 2)?;
            let raw = mixed_probabilities(&spec_a, &spec_b, config.prep)?;
            let (p0, p1) = (clamp_unit(raw[0]), clamp_unit(raw[1]));
            let (p0_corrected, p1_corrected) = apply_confusion(p0, p1, &config.confusion)?;
            Ok(OccupationRow { flux_a, subspace: raw[0] + raw[1], raw, p0_corrected, p1_corrected })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OccupationTable {
        allocation: config.allocation,
        alpha: config.prep.alpha(),
        flux_b: config.flux_b,
        rows,
    })
}

/// Squared overlaps can exceed one by a rounding ulp.
fn clamp_unit<T: Real>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::make_basis;

    fn setup() -> (CircuitParams<f64>, BasisSpec<f64>, OperatorSet<f64>) {
        let p = CircuitParams::measured_device();
        let b = make_basis(&p, 120).unwrap();
        let ops = OperatorSet::new(&b);
        (p, b, ops)
    }

    fn spec(
        ops: &OperatorSet<f64>,
        p: &CircuitParams<f64>,
        flux: f64,
        alloc: FluxAllocation,
        k: usize,
    ) -> Spectrum<f64> {
        Spectrum::with_operators(ops, p, ExternalFlux(flux), alloc, k).unwrap()
    }

    #[test]
    fn identical_spectra_give_indicator() {
        let (p, _, ops) = setup();
        let s = spec(&ops, &p, 0.43, FluxAllocation::Inductor, 5);
        for k in 0..5 {
            let probs = overlap_probabilities(&s, &s, k).unwrap();
            for (m, pm) in probs.iter().enumerate() {
                let expect = if m == k { 1.0 } else { 0.0 };
                assert!((pm - expect).abs() < 1e-12);
            }
        }
        assert!(overlap_probabilities(&s, &s, 5).is_err());
    }

    #[test]
    fn allocation_mismatch_rejected() {
        let (p, _, ops) = setup();
        let a = spec(&ops, &p, 0.5, FluxAllocation::Inductor, 2);
        let b = spec(&ops, &p, 0.812, FluxAllocation::JunctionIncomplete, 4);
        assert!(matches!(
            overlap_probabilities(&a, &b, 0),
            Err(crate::Error::ContractViolation(_))
        ));
    }

    #[test]
    fn half_flux_step_retention_contrast() {
        let (p, _, ops) = setup();
        let ind_a = spec(&ops, &p, 0.5, FluxAllocation::Inductor, 2);
        let ind_b = spec(&ops, &p, 0.812, FluxAllocation::Inductor, 12);
        let pi = overlap_probabilities(&ind_a, &ind_b, 0).unwrap();
        assert!(pi[0] + pi[1] > 0.98);

        let jn_a = spec(&ops, &p, 0.5, FluxAllocation::JunctionIncomplete, 2);
        let jn_b = spec(&ops, &p, 0.812, FluxAllocation::JunctionIncomplete, 12);
        let pj = overlap_probabilities(&jn_a, &jn_b, 0).unwrap();
        assert!(pj[0] + pj[1] < 0.5);

        let jc_a = spec(&ops, &p, 0.5, FluxAllocation::JunctionComplete, 2);
        let jc_b = spec(&ops, &p, 0.812, FluxAllocation::JunctionComplete, 12);
        let pc = overlap_probabilities(&jc_a, &jc_b, 0).unwrap();
        for (x, y) in pi.iter().zip(&pc) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn completeness_over_full_basis() {
        let (p, b, ops) = setup();
        for alloc in [FluxAllocation::Inductor, FluxAllocation::JunctionIncomplete] {
            let a = spec(&ops, &p, 0.501, alloc, 2);
            let full = spec(&ops, &p, 0.812, alloc, b.dim());
            let total: f64 = overlap_probabilities(&a, &full, 0).unwrap().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{alloc}: {total}");
            // The displaced junction-frame state reaches further up the ladder.
            let levels = if alloc == FluxAllocation::Inductor { 10 } else { 30 };
            let low = spec(&ops, &p, 0.812, alloc, levels);
            let captured: f64 = overlap_probabilities(&a, &low, 0).unwrap().iter().sum();
            assert!(captured > 0.999, "{alloc}: {captured}");
        }
    }

    #[test]
    fn mixed_state_endpoints_and_affinity() {
        let (p, _, ops) = setup();
        let a = spec(&ops, &p, 0.499, FluxAllocation::Inductor, 2);
        let b = spec(&ops, &p, 0.812, FluxAllocation::Inductor, 6);
        let p0 = overlap_probabilities(&a, &b, 0).unwrap();
        let p1 = overlap_probabilities(&a, &b, 1).unwrap();
        let m0 = mixed_probabilities(&a, &b, PreparationModel::new(0.0).unwrap()).unwrap();
        let m1 = mixed_probabilities(&a, &b, PreparationModel::new(1.0).unwrap()).unwrap();
        assert_eq!(m0, p0);
        assert_eq!(m1, p1);
        for alpha in [0.05, 0.1, 0.37] {
            let m = mixed_probabilities(&a, &b, PreparationModel::new(alpha).unwrap()).unwrap();
            for k in 0..6 {
                let affine = (1.0 - alpha) * m0[k] + alpha * m1[k];
                assert!((m[k] - affine).abs() < 1e-15);
            }
        }
        assert!(PreparationModel::new(1.2).is_err());
        assert!(PreparationModel::new(-0.1).is_err());
        let one = spec(&ops, &p, 0.499, FluxAllocation::Inductor, 1);
        assert!(mixed_probabilities(&one, &b, PreparationModel::new(0.0).unwrap()).is_err());
    }

    #[test]
    fn confusion_matrix_application() {
        let m = ConfusionMatrix::<f64>::measured_readout();
        let (a, b) = apply_confusion(1.0, 0.0, &m).unwrap();
        assert!((a - 0.95).abs() < 1e-15 && (b - 0.05).abs() < 1e-15);
        let (a, b) = apply_confusion(0.0, 1.0, &m).unwrap();
        assert!((a - 0.04).abs() < 1e-15 && (b - 0.96).abs() < 1e-15);
        let id = ConfusionMatrix::<f64>::identity();
        assert_eq!(apply_confusion(0.3, 0.6, &id).unwrap(), (0.3, 0.6));
        assert!(ConfusionMatrix::new([[0.9, 0.1], [0.2, 0.9]]).is_err());
        assert!(ConfusionMatrix::new([[1.1, 0.0], [-0.1, 1.0]]).is_err());
        assert!(apply_confusion(1.2, 0.0, &m).is_err());
    }

    #[test]
    fn confusion_preserves_clear_ordering() {
        let m = ConfusionMatrix::<f64>::measured_readout();
        for i in 0..=100 {
            for j in 0..=(100 - i) {
                let (p0, p1) = (i as f64 / 100.0, j as f64 / 100.0);
                if (p0 - p1).abs() <= 0.02 {
                    continue;
                }
                let (q0, q1) = apply_confusion(p0, p1, &m).unwrap();
                assert_eq!(p0 > p1, q0 > q1, "({p0}, {p1})");
            }
        }
    }

    #[test]
    fn no_step_is_trivial() {
        let (p, b, _) = setup();
        let config = SuddenExperimentConfig {
            flux_a_list: vec![0.812],
            flux_b: 0.812,
            levels_b: 4,
            allocation: FluxAllocation::Inductor,
            prep: PreparationModel::new(0.0).unwrap(),
            confusion: ConfusionMatrix::identity(),
        };
        let t = simulate_experiment(&p, &config, &b).unwrap();
        assert!((t.rows[0].raw[0] - 1.0).abs() < 1e-12);
        assert!((t.rows[0].p0_corrected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_range_has_eleven_points() {
        let r = flux_range::<f64>(0.498, 0.503, 0.0005);
        assert_eq!(r.len(), 11);
        assert!((r[10] - 0.503).abs() < 1e-12);
        let c = SuddenExperimentConfig::<f64>::measured_sweep(FluxAllocation::Inductor);
        assert_eq!(c.flux_a_list, r);
        let mut bad = c.clone();
        bad.flux_a_list.clear();
        assert!(bad.validate().is_err());
        bad = c;
        bad.levels_b = 1;
        assert!(bad.validate().is_err());
    }
}
