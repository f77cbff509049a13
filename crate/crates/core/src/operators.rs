//! Truncated harmonic-oscillator basis and the phase/charge operators built on it.
//!
//! The basis diagonalizes the quadratic part `4 E_C n² + ½ E_L φ²`, so in
//! terms of the ladder operator `a`:
//!
//! ```text
//! φ = (ℓ/√2)(a + a†)        n = i/(√2 ℓ) (a† − a)        ℓ = (8 E_C / E_L)^¼
//! ```
//!
//! which satisfy `[φ, n] = i` away from the truncation edge.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::CircuitParams;
use crate::scalar::{im, modulus, re, Real, C};

/// Truncation dimension and oscillator length of the number basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec<T> {
    dim: usize,
    osc_length: T,
}

impl<T: Real> BasisSpec<T> {
    pub fn new(dim: usize, osc_length: T) -> Result<Self> {
        if dim < 2 {
            return Err(invalid(format!("basis dimension must be at least 2, got {dim}")));
        }
        if !(osc_length > T::zero()) || !osc_length.is_finite() {
            return Err(invalid(format!(
                "oscillator length must be positive and finite, got {}",
                osc_length.as_f64()
            )));
        }
        Ok(Self { dim, osc_length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn osc_length(&self) -> T {
        self.osc_length
    }
}

/// Basis adapted to the circuit: `ℓ = (8 E_C / E_L)^¼`.
pub fn make_basis<T: Real>(params: &CircuitParams<T>, dim: usize) -> Result<BasisSpec<T>> {
    params.validate()?;
    let ratio = T::lit(8.0) * params.e_c / params.e_l;
    BasisSpec::new(dim, ratio.sqrt().sqrt())
}

/// Dense complex square matrix in the oscillator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    matrix: DMatrix<C<T>>,
    hermitian: bool,
}

impl<T: Real> OperatorMatrix<T> {
    /// Wraps a matrix that must be Hermitian within [`Real::hermitian_tolerance`].
    pub fn hermitian(matrix: DMatrix<C<T>>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = hermitian_deviation(&matrix);
        if !(dev < T::hermitian_tolerance()) {
            return Err(Error::ContractViolation(format!(
                "matrix flagged Hermitian deviates by {:.3e}",
                dev.as_f64()
            )));
        }
        Ok(Self { matrix, hermitian: true })
    }

    /// Wraps an arbitrary square matrix without the Hermitian flag.
    pub fn general(matrix: DMatrix<C<T>>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("operator must be square"));
        }
        Ok(Self { matrix, hermitian: false })
    }

    pub(crate) fn from_hermitian_unchecked(matrix: DMatrix<C<T>>) -> Self {
        Self { matrix, hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    /// `max |M − M†|` over all entries.
    pub fn hermitian_deviation(&self) -> T {
        hermitian_deviation(&self.matrix)
    }
}

pub(crate) fn hermitian_deviation<T: Real>(m: &DMatrix<C<T>>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for j in 0..n {
        for i in 0..=j {
            let d = modulus(m[(i, j)] - m[(j, i)].conj());
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Replaces `m` by `(m + m†)/2`, removing rounding asymmetry.
pub(crate) fn symmetrize<T: Real>(m: &mut DMatrix<C<T>>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()).scale(half);
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = re(m[(j, j)].re);
    }
}

fn ladder_element<T: Real>(k: usize) -> T {
    T::from_index(k + 1).sqrt()
}

fn phase_matrix<T: Real>(basis: &BasisSpec<T>) -> DMatrix<T> {
    let n = basis.dim();
    let scale = basis.osc_length() / T::SQRT_2();
    DMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            scale * ladder_element::<T>(i)
        } else if i == j + 1 {
            scale * ladder_element::<T>(j)
        } else {
            T::zero()
        }
    })
}

/// `φ = (ℓ/√2)(a + a†)`: real, symmetric, tridiagonal with zero diagonal.
pub fn phase_operator<T: Real>(basis: &BasisSpec<T>) -> OperatorMatrix<T> {
    OperatorMatrix::from_hermitian_unchecked(phase_matrix(basis).map(re))
}

/// `n = i/(√2 ℓ)(a† − a)`: purely imaginary and antisymmetric.
pub fn charge_operator<T: Real>(basis: &BasisSpec<T>) -> OperatorMatrix<T> {
    let n = basis.dim();
    let scale = T::one() / (T::SQRT_2() * basis.osc_length());
    // <i| a† |i-1> = √i lands below the diagonal, <i| a |i+1> = √(i+1) above.
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j + 1 {
            im(scale * ladder_element::<T>(j))
        } else if j == i + 1 {
            im(-scale * ladder_element::<T>(i))
        } else {
            C::new(T::zero(), T::zero())
        }
    });
    OperatorMatrix::from_hermitian_unchecked(m)
}

/// `cos φ` and `sin φ` as spectral functions of the truncated phase matrix.
fn cos_sin_unshifted<T: Real>(basis: &BasisSpec<T>) -> (DMatrix<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(phase_matrix(basis));
    let v = &eig.eigenvectors;
    let apply = |f: fn(T) -> T| {
        let mut scaled = v.clone();
        for (mut col, &lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
            col *= f(lambda);
        }
        let mut out = &scaled * v.transpose();
        let n = out.nrows();
        for j in 0..n {
            for i in 0..j {
                let avg = (out[(i, j)] + out[(j, i)]) * T::lit(0.5);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    };
    (apply(|x| x.cos()), apply(|x| x.sin()))
}

/// `(cos(φ + offset), sin(φ + offset))`, each Hermitian.
pub fn cos_sin_phase<T: Real>(
    basis: &BasisSpec<T>,
    offset: T,
) -> Result<(OperatorMatrix<T>, OperatorMatrix<T>)> {
    if !offset.is_finite() {
        return Err(invalid("phase offset must be finite"));
    }
    let (cos, sin) = cos_sin_unshifted(basis);
    let (co, so) = (offset.cos(), offset.sin());
    let shifted_cos = cos.zip_map(&sin, |c, s| re(co * c - so * s));
    let shifted_sin = sin.zip_map(&cos, |s, c| re(co * s + so * c));
    Ok((
        OperatorMatrix::from_hermitian_unchecked(shifted_cos),
        OperatorMatrix::from_hermitian_unchecked(shifted_sin),
    ))
}

/// Every basis-level operator a fluxonium Hamiltonian is assembled from,
/// computed once per basis.
#[derive(Debug, Clone)]
pub struct OperatorSet<T: Real> {
    basis: BasisSpec<T>,
    pub(crate) phi: DMatrix<C<T>>,
    pub(crate) phi_sq: DMatrix<C<T>>,
    pub(crate) charge: DMatrix<C<T>>,
    pub(crate) charge_sq: DMatrix<C<T>>,
    pub(crate) cos_phi: DMatrix<C<T>>,
    pub(crate) sin_phi: DMatrix<C<T>>,
}

impl<T: Real> OperatorSet<T> {
    pub fn new(basis: &BasisSpec<T>) -> Self {
        let phi_real = phase_matrix(basis);
        let phi_sq = (&phi_real * &phi_real).map(re);
        let charge = charge_operator(basis).into_matrix();
        let mut charge_sq = &charge * &charge;
        symmetrize(&mut charge_sq);
        let (cos, sin) = cos_sin_unshifted(basis);
        Self {
            basis: *basis,
            phi: phi_real.map(re),
            phi_sq,
            charge,
            charge_sq,
            cos_phi: cos.map(re),
            sin_phi: sin.map(re),
        }
    }

    pub fn basis(&self) -> &BasisSpec<T> {
        &self.basis
    }

    pub fn phase(&self) -> &DMatrix<C<T>> {
        &self.phi
    }

    pub fn charge(&self) -> &DMatrix<C<T>> {
        &self.charge
    }
}

/// `exp(i·shift·n)`, which maps `ψ(φ)` to `ψ(φ + shift)` in the truncated basis.
pub fn translation_operator<T: Real>(basis: &BasisSpec<T>, shift: T) -> DMatrix<C<T>> {
    if shift == T::zero() {
        return DMatrix::identity(basis.dim(), basis.dim());
    }
    let eig = SymmetricEigen::new(charge_operator(basis).into_matrix());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= crate::scalar::cis(shift * lambda);
    }
    scaled * v.adjoint()
}

/// Evaluates `ψ(φ) = Σ_k c_k χ_k(φ)` on `grid`, where `χ_k` are the
/// normalized oscillator eigenfunctions of length `ℓ`.
///
/// The Hermite-function recurrence is carried with a running log-scale so
/// that neither the Gaussian envelope nor high-order terms under/overflow.
pub fn eigenfunction_on_grid<T: Real>(
    basis: &BasisSpec<T>,
    coeffs: &[C<T>],
    grid: &[T],
) -> Result<Vec<C<T>>> {
    if coeffs.len() != basis.dim() {
        return Err(invalid(format!(
            "expected {} coefficients, got {}",
            basis.dim(),
            coeffs.len()
        )));
    }
    let ell = basis.osc_length();
    let big = T::lit(1e30);
    let norm0 = -T::lit(0.25) * T::pi().ln() - T::lit(0.5) * ell.ln();
    Ok(grid
        .iter()
        .map(|&phi| {
            let x = phi / ell;
            // χ_k(x) = exp(log_scale) · h_k, with h_0 = 1.
            let mut log_scale = norm0 - x * x * T::lit(0.5);
            let mut prev = T::zero();
            let mut cur = T::one();
            let mut acc = coeffs[0].scale(cur);
            for (k, c) in coeffs.iter().enumerate().skip(1) {
                let kf = T::from_index(k);
                let next = (T::lit(2.0) / kf).sqrt() * x * cur
                    - ((kf - T::one()) / kf).sqrt() * prev;
                prev = cur;
                cur = next;
                if cur.abs() > big {
                    let inv = T::one() / cur.abs();
                    prev *= inv;
                    acc = acc.scale(inv);
                    log_scale += cur.abs().ln();
                    cur *= inv;
                }
                acc += c.scale(cur);
            }
            acc.scale(log_scale.exp())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(dim: usize, ell: f64) -> BasisSpec<f64> {
        BasisSpec::new(dim, ell).unwrap()
    }

    fn paper() -> CircuitParams<f64> {
        CircuitParams::new(0.755, 6.49, 0.445).unwrap()
    }

    #[test]
    fn oscillator_length_from_paper_energies() {
        let b = make_basis(&paper(), 120).unwrap();
        assert!((b.osc_length() - (8.0 * 0.755f64 / 0.445).powf(0.25)).abs() < 1e-15);
        assert!((b.osc_length() - 1.9194).abs() < 1e-4);
    }

    #[test]
    fn unit_length_when_ec_is_an_eighth_of_el() {
        let p = CircuitParams::<f64>::new(0.1, 5.0, 0.8).unwrap();
        let b = make_basis(&p, 2).unwrap();
        assert!((b.osc_length() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_basis_inputs() {
        assert!(CircuitParams::new(0.755, 6.49, -1.0).is_err());
        assert!(BasisSpec::new(1, 1.0).is_err());
        assert!(BasisSpec::new(4, 0.0).is_err());
        assert!(BasisSpec::new(4, f64::NAN).is_err());
    }

    #[test]
    fn phase_matrix_small_cases() {
        let s2 = 2f64.sqrt();
        let phi = phase_operator(&basis(2, s2));
        let m = phi.matrix();
        assert!((m[(0, 1)].re - 1.0).abs() < 1e-15 && (m[(1, 0)].re - 1.0).abs() < 1e-15);
        assert_eq!(m[(0, 0)].norm(), 0.0);
        let phi3 = phase_operator(&basis(3, s2));
        assert!((phi3.matrix()[(1, 2)].re - s2).abs() < 1e-15);
        assert!(phi3.is_hermitian());
        assert_eq!(phi3.hermitian_deviation(), 0.0);
    }

    #[test]
    fn charge_matrix_two_level() {
        let n = charge_operator(&basis(2, 2f64.sqrt()));
        let m = n.matrix();
        assert!((m[(0, 1)] - C::new(0.0, -0.5)).norm() < 1e-15);
        assert!((m[(1, 0)] - C::new(0.0, 0.5)).norm() < 1e-15);
        assert_eq!(n.hermitian_deviation(), 0.0);
    }

    #[test]
    fn canonical_commutator_on_interior_block() {
        for dim in [16, 40, 120] {
            let b = make_basis(&paper(), dim).unwrap();
            let phi = phase_operator(&b).into_matrix();
            let n = charge_operator(&b).into_matrix();
            let comm = &phi * &n - &n * &phi;
            for i in 0..dim - 2 {
                for j in 0..dim - 2 {
                    let expect = if i == j { C::new(0.0, 1.0) } else { C::new(0.0, 0.0) };
                    assert!((comm[(i, j)] - expect).norm() < 1e-10, "dim {dim} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn vacuum_charge_variance_matches_closed_form() {
        // Minimum-uncertainty vacuum: <φ²> = ℓ²/2, <n²> = 1/(2ℓ²).
        let b = make_basis(&paper(), 120).unwrap();
        let ell = b.osc_length();
        let n = charge_operator(&b).into_matrix();
        let n2 = &n * &n;
        let closed = 1.0 / (2.0 * ell * ell);
        assert!((n2[(0, 0)].re - closed).abs() < 1e-13);
        assert!((closed - 0.1357).abs() < 1e-4);
    }

    #[test]
    fn vacuum_cosine_matches_gaussian() {
        let b = make_basis(&paper(), 120).unwrap();
        let (cos, _) = cos_sin_phase(&b, 0.0).unwrap();
        let ell = b.osc_length();
        let closed = (-ell * ell / 4.0).exp();
        assert!((cos.matrix()[(0, 0)].re - closed).abs() < 1e-12);
        assert!((closed - 0.3981).abs() < 1e-4);
    }

    #[test]
    fn cos_sin_identities() {
        let b = make_basis(&paper(), 120).unwrap();
        for offset in [0.0, 0.7, -2.3] {
            let (c, s) = cos_sin_phase(&b, offset).unwrap();
            let sum = c.matrix() * c.matrix() + s.matrix() * s.matrix();
            for i in 0..b.dim() - 8 {
                for j in 0..b.dim() - 8 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((sum[(i, j)].re - expect).abs() < 1e-8);
                }
            }
            assert!(c.hermitian_deviation() < 1e-12 && s.hermitian_deviation() < 1e-12);
        }
        let (c0, _) = cos_sin_phase(&b, 0.0).unwrap();
        let (cpi, _) = cos_sin_phase(&b, std::f64::consts::PI).unwrap();
        let diff = (c0.matrix() + cpi.matrix()).camax();
        assert!(diff < 1e-12, "{diff}");
        assert!(cos_sin_phase(&b, f64::INFINITY).is_err());
    }

    #[test]
    fn eigenfunction_values() {
        let b = make_basis(&paper(), 120).unwrap();
        let ell = b.osc_length();
        let mut c = vec![C::new(0.0, 0.0); 120];
        c[0] = C::new(1.0, 0.0);
        let v = eigenfunction_on_grid(&b, &c, &[0.0]).unwrap();
        let peak = (1.0 / (std::f64::consts::PI * ell * ell)).powf(0.25);
        assert!((v[0].re - peak).abs() < 1e-14);
        c[0] = C::new(0.0, 0.0);
        c[1] = C::new(1.0, 0.0);
        let v = eigenfunction_on_grid(&b, &c, &[0.0]).unwrap();
        assert!(v[0].norm() < 1e-15);
        assert!(eigenfunction_on_grid(&b, &c[..10], &[0.0]).is_err());
    }

    #[test]
    fn eigenfunctions_are_normalized_on_grid() {
        let grid: Vec<f64> = (0..=2400).map(|i| -12.0 + 0.01 * i as f64).collect();
        // Unit length, dim 60: every state below k = 30 lives well inside ±12.
        let b = basis(60, 1.0);
        for k in [0, 5, 17, 29] {
            let mut c = vec![C::new(0.0, 0.0); 60];
            c[k] = C::new(1.0, 0.0);
            let psi = eigenfunction_on_grid(&b, &c, &grid).unwrap();
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * 0.01;
            assert!((norm - 1.0).abs() < 1e-4, "k={k} norm={norm}");
        }
        // A superposition with a complex phase.
        let mut c = vec![C::new(0.0, 0.0); 60];
        c[2] = C::new(0.6, 0.0);
        c[11] = C::new(0.0, 0.8);
        let psi = eigenfunction_on_grid(&b, &c, &grid).unwrap();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * 0.01;
        assert!((norm - 1.0).abs() < 1e-4);
    }

    #[test]
    fn high_order_recurrence_stays_finite() {
        let b = basis(400, 1.0);
        let mut c = vec![C::new(0.0, 0.0); 400];
        c[399] = C::new(1.0, 0.0);
        let v = eigenfunction_on_grid(&b, &c, &[0.0, 3.0, 25.0, 60.0]).unwrap();
        assert!(v.iter().all(|z| z.re.is_finite()));
        // Far outside the turning point √(2k+1) ≈ 28 the function is tiny.
        assert!(v[3].norm() < 1e-100);
    }

    #[test]
    fn works_in_single_precision() {
        let p = CircuitParams::<f32>::new(0.755, 6.49, 0.445).unwrap();
        let b = make_basis(&p, 24).unwrap();
        let (c, s) = cos_sin_phase(&b, 0.3f32).unwrap();
        assert!(c.hermitian_deviation() < 1e-4 && s.hermitian_deviation() < 1e-4);
    }
}
