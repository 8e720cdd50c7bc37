//! Dense complex operators and the spectral machinery built on top of them.
//!
//! Every observable, superoperator output and matrix function in the crate is
//! an [`Operator`]: a square `DMatrix<Complex64>` carrying an advisory
//! Hermiticity flag. Matrix functions of Hermitian operators always go through
//! a [`SpectralDecomposition`].

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{shape, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance used when a Hermiticity hint is validated.
pub const HERM_TOL: f64 = 1e-12;

/// Relative asymmetry accepted by [`spectral_decompose`].
pub const SPECTRAL_HERM_TOL: f64 = 1e-10;

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest element magnitude of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// A dense square operator on a finite Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: CMatrix,
    hermitian_hint: bool,
}

impl Operator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "operator construction",
                left: shape(entries.nrows(), entries.ncols()),
                right: "non-empty square".into(),
            });
        }
        Ok(Self {
            entries,
            hermitian_hint: false,
        })
    }

    /// Wraps `entries` and validates Hermiticity to [`HERM_TOL`].
    pub fn hermitian(entries: CMatrix) -> Result<Self> {
        let op = Self::new(entries)?.with_hint(true);
        op.validate_hermitian()?;
        Ok(op)
    }

    pub(crate) fn from_parts(entries: CMatrix, hermitian_hint: bool) -> Self {
        debug_assert!(entries.is_square());
        Self {
            entries,
            hermitian_hint,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(CMatrix::identity(dim, dim), true)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(CMatrix::zeros(dim, dim), true)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_parts(CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i]) } else { c(0.0) }), true)
    }

    pub fn from_real_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self::from_parts(CMatrix::from_fn(dim, dim, |i, j| c(f(i, j))), false)
    }

    pub fn with_hint(mut self, hermitian: bool) -> Self {
        self.hermitian_hint = hermitian;
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// `max|A - A†|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..=j {
                let d = self.entries[(i, j)] - self.entries[(j, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn validate_hermitian(&self) -> Result<()> {
        self.check_hermitian(HERM_TOL)
    }

    pub(crate) fn check_hermitian(&self, rel_tol: f64) -> Result<()> {
        let asym = self.asymmetry();
        let allowed = rel_tol * self.max_abs();
        if asym > allowed {
            return Err(Error::NotHermitian {
                asymmetry: asym,
                allowed,
            });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Operator {
        Self::from_parts(self.entries.adjoint(), self.hermitian_hint)
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Operator {
        Self::from_parts((&self.entries + self.entries.adjoint()) * c(0.5), true)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn scale(&self, factor: Complex64) -> Operator {
        Self::from_parts(&self.entries * factor, self.hermitian_hint && factor.im == 0.0)
    }

    pub fn scale_real(&self, factor: f64) -> Operator {
        self.scale(c(factor))
    }

    /// `Tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Result<Complex64> {
        check_dims("trace product", self, other)?;
        Ok(trace_of_product(&self.entries, &other.entries))
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        check_dims("operator product", self, other)?;
        Ok(self * other)
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        check_dims("operator sum", self, other)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Operator> {
        check_dims("operator difference", self, other)?;
        Ok(self - other)
    }
}

pub(crate) fn check_dims(context: &'static str, a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context,
            left: shape(a.dim(), a.dim()),
            right: shape(b.dim(), b.dim()),
        });
    }
    Ok(())
}

/// `Tr(A B) = sum_ab A_ab B_ba`.
pub(crate) fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Tr(A B)` together with the magnitude of the components entering the
/// trace: the larger of `sum_ab |A_ab B_ba|` and `max|A| max|B|`.
pub(crate) fn trace_of_product_with_scale(a: &CMatrix, b: &CMatrix) -> (Complex64, f64) {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = a[(i, j)] * b[(j, i)];
            acc += t;
            mag += t.norm();
        }
    }
    (acc, mag.max(max_abs(a) * max_abs(b)))
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_parts(
            &self.entries + &rhs.entries,
            self.hermitian_hint && rhs.hermitian_hint,
        )
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_parts(
            &self.entries - &rhs.entries,
            self.hermitian_hint && rhs.hermitian_hint,
        )
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::from_parts(&self.entries * &rhs.entries, false)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::from_parts(-&self.entries, self.hermitian_hint)
    }
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint()
}

/// `AB - BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_dims("commutator", a, b)?;
    Ok(Operator::from_parts(
        &a.entries * &b.entries - &b.entries * &a.entries,
        false,
    ))
}

/// Eigendecomposition `H = U diag(E) U†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    unitary: CMatrix,
}

pub fn spectral_decompose(h: &Operator) -> Result<SpectralDecomposition> {
    h.check_hermitian(SPECTRAL_HERM_TOL)?;
    let n = h.dim();
    let sym = (&h.entries + h.entries.adjoint()) * c(0.5);
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or(Error::EigenFailure { dim: n })?;
    if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::EigenFailure { dim: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let unitary = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        unitary,
    })
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    /// `U diag(f(E)) U†`.
    pub fn function(&self, f: impl Fn(f64) -> Complex64) -> Operator {
        let vals: Vec<Complex64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        let hermitian = vals.iter().all(|v| v.im == 0.0);
        Operator::from_parts(self.from_eigenbasis_diagonal(&vals), hermitian)
    }

    pub fn real_function(&self, f: impl Fn(f64) -> f64) -> Operator {
        self.function(|e| c(f(e)))
    }

    pub(crate) fn from_eigenbasis_diagonal(&self, vals: &[Complex64]) -> CMatrix {
        let mut scaled = self.unitary.clone();
        for (j, v) in vals.iter().enumerate() {
            for z in scaled.column_mut(j).iter_mut() {
                *z *= v;
            }
        }
        scaled * self.unitary.adjoint()
    }

    pub fn reconstruct(&self) -> Operator {
        self.real_function(|e| e)
    }

    /// `U† A U`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.unitary.adjoint() * a * &self.unitary
    }

    /// `U A U†`.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.unitary * a * self.unitary.adjoint()
    }

    /// `max|U†U - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.unitary.adjoint() * &self.unitary - CMatrix::identity(n, n)))
    }

    /// Columns of `U` spanning the `k` lowest eigenstates.
    pub fn lowest_states(&self, k: usize) -> CMatrix {
        self.unitary.columns(0, k.min(self.dim())).into_owned()
    }
}

/// Element-wise Chebyshev distance between two values of the same shape.
pub trait MaxAbsResidual {
    fn max_abs_residual(&self, other: &Self) -> Result<f64>;
}

impl MaxAbsResidual for CMatrix {
    fn max_abs_residual(&self, other: &Self) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                context: "residual norm",
                left: shape(self.nrows(), self.ncols()),
                right: shape(other.nrows(), other.ncols()),
            });
        }
        Ok(self
            .iter()
            .zip(other.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm())))
    }
}

impl MaxAbsResidual for Operator {
    fn max_abs_residual(&self, other: &Self) -> Result<f64> {
        self.entries.max_abs_residual(&other.entries)
    }
}

pub fn residual_norm<T: MaxAbsResidual + ?Sized>(a: &T, b: &T) -> Result<f64> {
    a.max_abs_residual(b)
}

/// Complex Gaussian matrix with independent standard-normal real and
/// imaginary parts, reproducible from `seed`.
pub fn random_matrix(dim: usize, seed: u64) -> Operator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    Operator::from_parts(entries, false)
}

/// Gaussian random matrix, Hermitized as `(G + G†)/2`.
pub fn random_hermitian(dim: usize, seed: u64) -> Operator {
    random_matrix(dim, seed).hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli() -> (Operator, Operator, Operator) {
        let z = c(0.0);
        let one = c(1.0);
        let sx = CMatrix::from_row_slice(2, 2, &[z, one, one, z]);
        let sy = CMatrix::from_row_slice(2, 2, &[z, -I, I, z]);
        let sz = CMatrix::from_row_slice(2, 2, &[one, z, z, -one]);
        (
            Operator::hermitian(sx).unwrap(),
            Operator::hermitian(sy).unwrap(),
            Operator::hermitian(sz).unwrap(),
        )
    }

    #[test]
    fn adjoint_of_identity_and_imaginary_identity() {
        let id = Operator::identity(3);
        assert_eq!(adjoint(&id), id);
        let iid = id.scale(I);
        assert_eq!(adjoint(&iid).entries(), &(-iid.entries()));
    }

    #[test]
    fn adjoint_is_an_involution() {
        let r = random_matrix(6, 11);
        let back = adjoint(&adjoint(&r));
        assert_eq!(residual_norm(&back, &r).unwrap(), 0.0);
        // elementwise oracle
        let a = adjoint(&r);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a.entries()[(i, j)], r.entries()[(j, i)].conj());
            }
        }
    }

    #[test]
    fn commutator_pauli_and_identity() {
        let (sx, sy, sz) = pauli();
        let cxy = commutator(&sx, &sy).unwrap();
        assert!(residual_norm(&cxy, &sz.scale(c(2.0) * I)).unwrap() < 1e-15);
        let zero = commutator(&Operator::identity(2), &sy).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn commutator_matches_naive_products() {
        let a = random_matrix(4, 1);
        let b = random_matrix(4, 2);
        let got = commutator(&a, &b).unwrap();
        let mut naive = CMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let mut s = c(0.0);
                for k in 0..4 {
                    s += a.entries()[(i, k)] * b.entries()[(k, j)]
                        - b.entries()[(i, k)] * a.entries()[(k, j)];
                }
                naive[(i, j)] = s;
            }
        }
        let scale = a.max_abs() * b.max_abs();
        assert!(got.entries().max_abs_residual(&naive).unwrap() <= 1e-13 * scale);
    }

    #[test]
    fn commutator_rejects_mismatched_shapes() {
        let err = commutator(&Operator::identity(2), &Operator::identity(3)).unwrap_err();
        assert!(err.to_string().contains("2x2"));
    }

    #[test]
    fn spectral_decompose_sorts_diagonal() {
        let d = spectral_decompose(&Operator::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(d.eigenvalues(), &[1.0, 2.0, 3.0]);
        for j in 0..3 {
            let nonzero = (0..3).filter(|&i| d.unitary()[(i, j)].norm() > 0.5).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn spectral_decompose_reconstructs_random_hermitian() {
        let h = random_hermitian(8, 5);
        let d = spectral_decompose(&h).unwrap();
        assert!(d.unitarity_defect() <= 1e-10);
        assert!(residual_norm(&d.reconstruct(), &h).unwrap() <= 1e-10);
        assert!(d.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spectral_decompose_rejects_non_hermitian() {
        let a = random_matrix(4, 3);
        match spectral_decompose(&a) {
            Err(Error::NotHermitian { asymmetry, .. }) => assert!(asymmetry > 0.1),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn residual_norm_examples() {
        let a = random_matrix(3, 9);
        assert_eq!(residual_norm(&a, &a).unwrap(), 0.0);
        assert_eq!(residual_norm(&Operator::zeros(4), &Operator::identity(4)).unwrap(), 1.0);
        let mut e = a.entries().clone();
        e[(0, 0)] += c(1e-7);
        let b = Operator::new(e).unwrap();
        assert!((residual_norm(&a, &b).unwrap() - 1e-7).abs() < 1e-15);
        assert!(residual_norm(&a, &Operator::identity(2)).is_err());
    }

    #[test]
    fn commutator_algebra_identities() {
        let a = random_matrix(7, 21);
        let b = random_matrix(7, 22);
        let ab = commutator(&a, &b).unwrap();
        let ba = commutator(&b, &a).unwrap();
        let scale = a.max_abs() * b.max_abs();
        assert!(residual_norm(&ab, &(-&ba)).unwrap() <= 1e-14 * scale);
        let lhs = adjoint(&ab);
        let rhs = commutator(&adjoint(&b), &adjoint(&a)).unwrap();
        assert!(residual_norm(&lhs, &rhs).unwrap() <= 1e-13 * scale);
    }
}
