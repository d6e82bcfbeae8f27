//! Sample moment statistics: mean, second moment, third-moment vector and
//! the frontal slices of the third-moment tensor of whitened data.

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix, Vector};
use crate::model::DataSet;

/// Sample mean and centered second/third moments (divisor n).
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub mean: Vector,
    pub c2_hat: Matrix,
    pub c3_hat: Vector,
    pub n: usize,
}

pub fn sample_moments(data: &DataSet) -> Result<MomentSet> {
    let x = data.observations();
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    let mean = x.row_mean().transpose();
    let mut c2 = Matrix::zeros(p, p);
    let mut c3 = Vector::zeros(p);
    let mut d = Vector::zeros(p);
    for row in x.row_iter() {
        for j in 0..p {
            d[j] = row[j] - mean[j];
        }
        let sq = d.norm_squared();
        c2.ger(1.0, &d, &d, 1.0);
        c3.axpy(sq, &d, 1.0);
    }
    let inv_n = 1.0 / n as f64;
    Ok(MomentSet {
        mean,
        c2_hat: symmetrize(&(c2 * inv_n)),
        c3_hat: c3 * inv_n,
        n,
    })
}

/// The slices `T_k = E(z zᵀ z_k)`, k = 1..p, of a third-moment tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TkSet {
    pub slices: Vec<Matrix>,
}

impl TkSet {
    pub fn zeros(p: usize) -> Self {
        TkSet {
            slices: vec![Matrix::zeros(p, p); p],
        }
    }

    /// Slices of the rank-one tensor `scale · v⊗v⊗v`.
    pub fn rank_one(scale: f64, v: &Vector) -> Self {
        let outer = v * v.transpose();
        TkSet {
            slices: v.iter().map(|&vk| &outer * (scale * vk)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.slices.len()
    }

    /// `Σ_k T_k e_k`, the third-moment vector `E(z zᵀz)`.
    pub fn skewness_vector(&self) -> Vector {
        let p = self.dim();
        Vector::from_iterator(
            p,
            (0..p).map(|i| (0..p).map(|k| self.slices[k][(i, k)]).sum()),
        )
    }

    /// `Σ_k (uᵀT_k u)²`
    pub fn jade_objective(&self, u: &Vector) -> f64 {
        self.slices
            .iter()
            .map(|t| {
                let q = u.dot(&(t * u));
                q * q
            })
            .sum()
    }

    /// `Σ_k (uᵀT_k u) T_k u`
    pub fn jade_update(&self, u: &Vector) -> Vector {
        let mut out = Vector::zeros(u.len());
        for t in &self.slices {
            let tu = t * u;
            out.axpy(u.dot(&tu), &tu, 1.0);
        }
        out
    }

    /// `Σ_k u_k T_k u = E[(uᵀz)² z]`
    pub fn skewness_gradient(&self, u: &Vector) -> Vector {
        let mut out = Vector::zeros(u.len());
        for (k, t) in self.slices.iter().enumerate() {
            out.gemv(u[k], t, u, 1.0);
        }
        out
    }

    /// `E[(uᵀz)³]`
    pub fn projection_skewness(&self, u: &Vector) -> f64 {
        u.dot(&self.skewness_gradient(u))
    }

    /// Frobenius norm of the whole tensor.
    pub fn norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|t| t.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Third-moment slices of already centered and whitened rows.
pub fn tk_slices(whitened: &Matrix) -> TkSet {
    let (n, p) = whitened.shape();
    // upper triangle (i <= j) of each slice, packed as acc[k][i * p + j]
    let mut acc = vec![0.0; p * p * p];
    let mut z = vec![0.0; p];
    for row in whitened.row_iter() {
        for j in 0..p {
            z[j] = row[j];
        }
        for k in 0..p {
            let zk = z[k];
            let base = k * p * p;
            for i in 0..p {
                let zik = z[i] * zk;
                for j in i..p {
                    acc[base + i * p + j] += zik * z[j];
                }
            }
        }
    }
    let inv_n = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    let slices = (0..p)
        .map(|k| {
            let base = k * p * p;
            Matrix::from_fn(p, p, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                acc[base + a * p + b] * inv_n
            })
        })
        .collect();
    TkSet { slices }
}

/// `T = Σ_k T_k²`
pub fn tobi_matrix(tk: &TkSet) -> Matrix {
    let p = tk.dim();
    let mut out = Matrix::zeros(p, p);
    for t in &tk.slices {
        out += t * t;
    }
    symmetrize(&out)
}
