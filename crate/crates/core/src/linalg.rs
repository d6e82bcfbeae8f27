//! Dense symmetric linear algebra shared by the rest of the crate.
//!
//! Everything here works on small `nalgebra` matrices (p up to a few
//! hundred). Eigendecompositions come back sorted in descending order with a
//! fixed sign convention so repeated calls on the same input agree bitwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used when checking that an input is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Default relative floor on the smallest eigenvalue for [`inv_sqrt`].
pub const SINGULARITY_FLOOR: f64 = 1e-12;

/// A symmetric positive definite matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_symmetric(&m, 1e-12)?;
        let m = symmetrize(&m);
        let smallest = m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(smallest > 0.0) {
            return Err(Error::NotPositiveDefinite(smallest));
        }
        Ok(SpdMatrix(m))
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix(Matrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Inverse through the eigendecomposition.
    pub fn inverse(&self) -> Matrix {
        let pairs = sym_eigen(&self.0).expect("SpdMatrix is symmetric");
        spectral_map(&pairs, |l| 1.0 / l)
    }

    /// Lower Cholesky factor.
    pub fn cholesky(&self) -> Matrix {
        self.0
            .clone()
            .cholesky()
            .expect("SpdMatrix is positive definite")
            .unpack()
    }
}

impl AsRef<Matrix> for SpdMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vector,
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check_symmetric(m: &Matrix, rel_tol: f64) -> Result<()> {
    let asymmetry = max_abs(&(m - m.transpose()));
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    if asymmetry > rel_tol * scale || !asymmetry.is_finite() {
        return Err(Error::SymmetryViolation { asymmetry });
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Flip `v` so that its first entry of largest magnitude is nonnegative.
pub fn canonical_sign(v: &mut Vector) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
pub fn sym_eigen(m: &Matrix) -> Result<Vec<EigenPair>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_symmetric(m, SYMMETRY_TOL)?;
    let eig = symmetrize(m).symmetric_eigen();
    let mut pairs: Vec<EigenPair> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&value, col)| {
            let mut vector = col.into_owned();
            let norm = vector.norm();
            vector /= norm;
            canonical_sign(&mut vector);
            EigenPair { value, vector }
        })
        .collect();
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(pairs)
}

/// Rebuild `Σ f(λᵢ) vᵢvᵢᵀ` from eigenpairs.
pub fn spectral_map(pairs: &[EigenPair], f: impl Fn(f64) -> f64) -> Matrix {
    let p = pairs.first().map_or(0, |e| e.vector.len());
    let mut out = Matrix::zeros(p, p);
    for pair in pairs {
        out += &pair.vector * pair.vector.transpose() * f(pair.value);
    }
    symmetrize(&out)
}

/// Symmetric inverse square root with the default singularity floor.
pub fn inv_sqrt(m: &SpdMatrix) -> Result<SpdMatrix> {
    inv_sqrt_with_floor(m, SINGULARITY_FLOOR)
}

/// Symmetric inverse square root. Fails if the smallest eigenvalue is below
/// `rel_floor` times the largest.
pub fn inv_sqrt_with_floor(m: &SpdMatrix, rel_floor: f64) -> Result<SpdMatrix> {
    let pairs = sym_eigen(m.as_matrix())?;
    let largest = pairs.first().map_or(0.0, |e| e.value);
    let smallest = pairs.last().map_or(0.0, |e| e.value);
    let floor = rel_floor * largest;
    if !(smallest > floor) {
        return Err(Error::NearSingularCovariance { smallest, floor });
    }
    Ok(SpdMatrix(spectral_map(&pairs, |l| 1.0 / l.sqrt())))
}

/// Symmetric square root of an SPD matrix.
pub fn sqrt_spd(m: &SpdMatrix) -> SpdMatrix {
    let pairs = sym_eigen(m.as_matrix()).expect("SpdMatrix is symmetric");
    SpdMatrix(spectral_map(&pairs, f64::sqrt))
}

/// Solve `m x = b` for a symmetric, possibly indefinite `m`.
///
/// Rejects `m` when its smallest absolute eigenvalue falls below
/// `SINGULARITY_FLOOR` times its largest.
pub fn sym_solve(m: &Matrix, b: &Vector) -> Result<Vector> {
    let pairs = sym_eigen(m)?;
    let largest = pairs.iter().fold(0.0_f64, |a, e| a.max(e.value.abs()));
    let smallest = pairs
        .iter()
        .fold(f64::INFINITY, |a, e| a.min(e.value.abs()));
    if !(smallest > SINGULARITY_FLOOR * largest) {
        return Err(Error::SingularMatrix(format!(
            "smallest |eigenvalue| {smallest:.3e} vs largest {largest:.3e}"
        )));
    }
    let mut x = Vector::zeros(b.len());
    for pair in &pairs {
        x += &pair.vector * (pair.vector.dot(b) / pair.value);
    }
    Ok(x)
}

/// Orthogonal projectors onto span(v) and its complement.
pub fn projector_pair(v: &Vector) -> Result<(Matrix, Matrix)> {
    let norm2 = v.norm_squared();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::Domain(
            "projector requires a nonzero finite vector".into(),
        ));
    }
    let p_v = v * v.transpose() / norm2;
    let q_v = Matrix::identity(v.len(), v.len()) - &p_v;
    Ok((p_v, q_v))
}

/// Column-major vectorization.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// The (p, p) commutation matrix `K` with `K vec(A) = vec(Aᵀ)`.
pub fn commutation_matrix(p: usize) -> Matrix {
    let mut k = Matrix::zeros(p * p, p * p);
    for i in 0..p {
        for j in 0..p {
            k[(i + j * p, j + i * p)] = 1.0;
        }
    }
    k
}

/// Closed-form inverse of `I ⊗ (I + αuuᵀ) + (I + αuuᵀ) ⊗ I` for unit `u`.
pub fn kron_sum_inverse(alpha: f64, u: &Vector) -> Result<Matrix> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if (u.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "u must have unit norm, got {}",
            u.norm()
        )));
    }
    let p = u.len();
    let eye = Matrix::identity(p, p);
    let shrink = &eye - u * u.transpose() * (alpha / (alpha + 1.0));
    let out = Matrix::identity(p * p, p * p) + shrink.kronecker(&shrink) * (alpha + 1.0);
    Ok(out / (2.0 * (alpha + 2.0)))
}

/// The Kronecker sum `I ⊗ (I + αuuᵀ) + (I + αuuᵀ) ⊗ I` itself.
pub fn kron_sum(alpha: f64, u: &Vector) -> Matrix {
    let p = u.len();
    let eye = Matrix::identity(p, p);
    let b = &eye + u * u.transpose() * alpha;
    eye.kronecker(&b) + b.kronecker(&eye)
}
