//! The two-component Gaussian location mixture
//! `x ~ α₁ N(μ₁, Σ) + α₂ N(μ₂, Σ)` and everything derived from it.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{commutation_matrix, inv_sqrt, sym_solve, Matrix, SpdMatrix, Vector};

/// Generative parameters of the mixture.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    alpha1: f64,
    mu1: Vector,
    mu2: Vector,
    sigma: SpdMatrix,
}

impl MixtureParams {
    pub fn new(alpha1: f64, mu1: Vector, mu2: Vector, sigma: SpdMatrix) -> Result<Self> {
        if !(alpha1 > 0.5 && alpha1 < 1.0) {
            return Err(Error::InvalidWeight(alpha1));
        }
        let p = sigma.dim();
        if mu1.len() != p || mu2.len() != p {
            return Err(Error::Dimension(format!(
                "means have lengths {} and {}, covariance is {p}x{p}",
                mu1.len(),
                mu2.len()
            )));
        }
        if mu1 == mu2 {
            return Err(Error::Domain("component means must differ".into()));
        }
        Ok(MixtureParams {
            alpha1,
            mu1,
            mu2,
            sigma,
        })
    }

    /// Mixture with zero overall mean: `μ₁ = -α₂h`, `μ₂ = α₁h`.
    pub fn centered(alpha1: f64, h: Vector, sigma: SpdMatrix) -> Result<Self> {
        let alpha2 = 1.0 - alpha1;
        let mu1 = &h * -alpha2;
        let mu2 = &h * alpha1;
        Self::new(alpha1, mu1, mu2, sigma)
    }

    /// Centered mixture whose mean difference points along `direction` and is
    /// scaled so that `hᵀΣ⁻¹h = tau`.
    pub fn with_tau(alpha1: f64, direction: &Vector, sigma: SpdMatrix, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("tau must be positive, got {tau}")));
        }
        let mahal = direction.dot(&sym_solve(sigma.as_matrix(), direction)?);
        if !(mahal > 0.0) {
            return Err(Error::Domain("direction must be nonzero".into()));
        }
        let h = direction * (tau / mahal).sqrt();
        Self::centered(alpha1, h, sigma)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        1.0 - self.alpha1
    }

    pub fn mu1(&self) -> &Vector {
        &self.mu1
    }

    pub fn mu2(&self) -> &Vector {
        &self.mu2
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// `h = μ₂ - μ₁`.
    pub fn h(&self) -> Vector {
        &self.mu2 - &self.mu1
    }

    /// Overall mean `α₁μ₁ + α₂μ₂`.
    pub fn mean(&self) -> Vector {
        &self.mu1 * self.alpha1 + &self.mu2 * self.alpha2()
    }

    /// `θ = Σ⁻¹h`, the Bayes-optimal discriminant direction up to scale.
    pub fn theta(&self) -> Vector {
        self.sigma.inverse() * self.h()
    }

    pub fn derived(&self) -> DerivedParams {
        derive(self)
    }
}

/// Every population symbol that the estimators and constants depend on.
#[derive(Debug, Clone)]
pub struct DerivedParams {
    pub h: Vector,
    pub theta: Vector,
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `(1 + βτ)^(-1/2)`
    pub delta: f64,
    /// `Σ^(-1/2)h / ‖Σ^(-1/2)h‖`
    pub w: Vector,
    /// `Σ^(-1/2)h`
    pub m: Vector,
}

pub fn derive(params: &MixtureParams) -> DerivedParams {
    let h = params.h();
    let sigma_inv = params.sigma.inverse();
    let theta = &sigma_inv * &h;
    let tau = h.dot(&theta);
    let beta = params.alpha1 * params.alpha2();
    let gamma = params.alpha1 - params.alpha2();
    let root = inv_sqrt(&params.sigma).expect("mixture covariance is well conditioned");
    let m = root.as_matrix() * &h;
    let w = m.normalize();
    DerivedParams {
        h,
        theta,
        tau,
        beta,
        gamma,
        delta: (1.0 + beta * tau).powf(-0.5),
        w,
        m,
    }
}

/// Observations (rows) with optional group labels in {-1, +1}.
#[derive(Debug, Clone)]
pub struct DataSet {
    observations: Matrix,
    labels: Option<Vec<i8>>,
}

impl DataSet {
    pub fn new(observations: Matrix) -> Self {
        DataSet {
            observations,
            labels: None,
        }
    }

    pub fn with_labels(observations: Matrix, labels: Vec<i8>) -> Result<Self> {
        if labels.len() != observations.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} observations",
                labels.len(),
                observations.nrows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != -1 && l != 1) {
            return Err(Error::Domain(format!("label {bad} is not -1 or +1")));
        }
        Ok(DataSet {
            observations,
            labels: Some(labels),
        })
    }

    pub fn observations(&self) -> &Matrix {
        &self.observations
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.observations.nrows()
    }

    pub fn p(&self) -> usize {
        self.observations.ncols()
    }

    /// Copy of the data with every row mapped to `a x + b`.
    pub fn affine(&self, a: &Matrix, b: &Vector) -> DataSet {
        let mut obs = &self.observations * a.transpose();
        for mut row in obs.row_iter_mut() {
            row += b.transpose();
        }
        DataSet {
            observations: obs,
            labels: self.labels.clone(),
        }
    }
}

/// Draw `n` labelled observations. Component 1 gets label -1, component 2 gets +1.
pub fn sample<R: Rng + ?Sized>(params: &MixtureParams, n: usize, rng: &mut R) -> DataSet {
    let p = params.dim();
    let chol = params.sigma.cholesky();
    let mut obs = Matrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    let mut z = Vector::zeros(p);
    for i in 0..n {
        let first = rng.random::<f64>() < params.alpha1;
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mu = if first { &params.mu1 } else { &params.mu2 };
        let x = mu + &chol * &z;
        obs.row_mut(i).copy_from(&x.transpose());
        labels.push(if first { -1 } else { 1 });
    }
    DataSet {
        observations: obs,
        labels: Some(labels),
    }
}

/// Closed-form population moments of the centered mixture.
#[derive(Debug, Clone)]
pub struct PopulationMoments {
    /// `Cov(x) = Σ + βhhᵀ`
    pub c2: SpdMatrix,
    /// `E(xxᵀx) = βγ‖h‖²h`
    pub c3: Vector,
    /// `Cov(x, x⊗x)`, p×p²
    pub cov_x_xkronx: Matrix,
    /// `Cov(x⊗x)`, p²×p²
    pub cov_xkronx: Matrix,
    /// `Cov(x, xxᵀx)`, p×p
    pub cov_x_xxtx: Matrix,
    /// `Cov(x⊗x, xxᵀx)`, p²×p
    pub cov_xkronx_xxtx: Matrix,
    /// `Cov(xxᵀx)`, p×p
    pub cov_xxtx: Matrix,
}

/// Evaluate the closed-form moment blocks. Moments are of `x - E(x)`, so the
/// location of the input mixture is irrelevant.
pub fn population_moments(params: &MixtureParams) -> PopulationMoments {
    let p = params.dim();
    let s = params.sigma.as_matrix();
    let h = params.h();
    let DerivedParams {
        beta: b, gamma: g, ..
    } = derive(params);
    let eye = Matrix::identity(p, p);
    let eye2 = Matrix::identity(p * p, p * p);
    let hh = &h * h.transpose();
    let nh2 = h.norm_squared();
    let tr_s = s.trace();
    let s2 = s * s;
    let hsh = h.dot(&(s * &h));
    let h_col = Matrix::from_column_slice(p, 1, h.as_slice());
    let hkh = h_col.kronecker(&h_col);
    let hkh_ht = &hkh * h.transpose();

    let c2 = SpdMatrix::new(s + &hh * b).expect("Σ + βhhᵀ is positive definite");
    let c3 = &h * (b * g * nh2);

    let cov_x_xkronx = &h * hkh.transpose() * (b * g);

    let cov_x_xxtx = s * tr_s
        + &s2 * 2.0
        + &hh * s * (2.0 * b)
        + s * &hh * (2.0 * b)
        + s * (b * nh2)
        + &hh * (b * tr_s)
        + &hh * (b * (1.0 - 3.0 * b) * nh2);

    let k = commutation_matrix(p);
    let cov_xkronx = (&eye2 + &k) * (s.kronecker(s) + hh.kronecker(s) * b + s.kronecker(&hh) * b)
        + hh.kronecker(&hh) * (b * (1.0 - 4.0 * b));

    let cov_xkronx_xxtx = &hkh_ht * (b * g * (tr_s + (1.0 - 3.0 * b) * nh2))
        + (eye.kronecker(s) + s.kronecker(&eye)) * &hkh_ht * (2.0 * b * g)
        + &hkh_ht * s * (2.0 * b * g)
        + h_col.kronecker(s) * (b * g * nh2)
        + s.kronecker(&h_col) * (b * g * nh2);

    let inner = s * tr_s
        + &s2 * 2.0
        + &hh * s * (2.0 * b)
        + &hh * (b * tr_s)
        + s * &hh * (2.0 * b)
        + &hh * (b * g * nh2)
        + s * (b * nh2);
    let tail = s + &hh * (1.0 - 3.0 * b);
    let cov_xxtx = s * &hh * (4.0 * b * tr_s)
        + &s2 * &hh * (8.0 * b)
        + s * &hh * (4.0 * b * g * nh2)
        + (s + &hh * b) * (2.0 * s2.trace() + tr_s * tr_s)
        + inner * s * 4.0
        + &tail * (b * (2.0 * tr_s * nh2 + 4.0 * hsh))
        + &tail * (b * (1.0 - 3.0 * b) * nh2 * nh2);

    PopulationMoments {
        c2,
        c3,
        cov_x_xkronx,
        cov_xkronx,
        cov_x_xxtx,
        cov_xkronx_xxtx,
        cov_xxtx,
    }
}

/// Law of the whitened variable `z` (up to an orthogonal rotation).
#[derive(Debug, Clone)]
pub struct WhitenedLaw {
    pub alpha1: f64,
    pub alpha2: f64,
    pub mean1: Vector,
    pub mean2: Vector,
    /// Shared component covariance `I - (βτ/(1+βτ)) wwᵀ`.
    pub within: Matrix,
    pub w: Vector,
}

impl WhitenedLaw {
    pub fn total_covariance(&self) -> Matrix {
        let d = &self.mean2 - &self.mean1;
        &self.within + &d * d.transpose() * (self.alpha1 * self.alpha2)
    }

    pub fn mean(&self) -> Vector {
        &self.mean1 * self.alpha1 + &self.mean2 * self.alpha2
    }

    /// `‖μ₂ - μ₁‖`
    pub fn separation(&self) -> f64 {
        (&self.mean2 - &self.mean1).norm()
    }

    /// Variance of a single component along `w`.
    pub fn within_variance_along_w(&self) -> f64 {
        self.w.dot(&(&self.within * &self.w))
    }
}

pub fn whitened_population(params: &MixtureParams) -> WhitenedLaw {
    let d = derive(params);
    let bt = d.beta * d.tau;
    let sep = (d.tau / (1.0 + bt)).sqrt();
    let p = params.dim();
    let within = Matrix::identity(p, p) - &d.w * d.w.transpose() * (bt / (1.0 + bt));
    WhitenedLaw {
        alpha1: params.alpha1,
        alpha2: params.alpha2(),
        mean1: &d.w * (-params.alpha2() * sep),
        mean2: &d.w * (params.alpha1 * sep),
        within,
        w: d.w,
    }
}
