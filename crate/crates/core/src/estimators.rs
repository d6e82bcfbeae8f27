//! Direction estimators for the linear discriminant `θ/‖θ‖`.
//!
//! All unsupervised estimators except the method of moments work on whitened
//! data `z = Ĉ₂^(-1/2)(x - x̄)` and map the result back through the whitener,
//! which makes them affine equivariant. They are implemented once against
//! [`StandardizedMoments`], which can be built either from a sample or from
//! exact population moments.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt, sym_eigen, sym_solve, Matrix, SpdMatrix, Vector};
use crate::model::{derive, population_moments, DataSet, MixtureParams};
use crate::moments::{sample_moments, tk_slices, tobi_matrix, TkSet};

/// Relative floor below which a skewness statistic counts as zero.
pub const SKEWNESS_FLOOR: f64 = 1e-10;

/// Update norms below this trigger a random restart.
pub const UNDERFLOW: f64 = 1e-300;

pub const MAX_RESTARTS: usize = 5;

/// Relative eigenvalue gap under which the leading eigenvector is ambiguous.
pub const EIGEN_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Mom,
    Skewvec,
    Tobi,
    Jade3,
    Lda,
    Pp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Mom,
        Method::Skewvec,
        Method::Tobi,
        Method::Jade3,
        Method::Lda,
        Method::Pp,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Mom => "MOM",
            Method::Skewvec => "SKEWVEC",
            Method::Tobi => "TOBI",
            Method::Jade3 => "JADE3",
            Method::Lda => "LDA",
            Method::Pp => "PP",
        }
    }

    pub fn is_affine_equivariant(self) -> bool {
        !matches!(self, Method::Mom)
    }

    pub fn is_supervised(self) -> bool {
        matches!(self, Method::Lda)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown method `{s}` (expected one of mom, skewvec, tobi, jade3, lda, pp)"
                ))
            })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.tag().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimateWarning {
    /// The two largest eigenvalues of the TOBI matrix coincide.
    AmbiguousLeadingEigenvalue { gap: f64 },
    /// The fixed-point iteration stalled and was restarted.
    Restarted { count: usize },
    /// The monitored objective went down between iterates.
    ObjectiveDecreased { by: f64 },
}

#[derive(Debug, Clone)]
pub struct DirectionEstimate {
    pub raw: Vector,
    pub unit: Vector,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub sign_reference_applied: bool,
    pub warnings: Vec<EstimateWarning>,
    /// Objective values of accepted iterates (iterative methods only).
    pub objective_trace: Vec<f64>,
}

impl DirectionEstimate {
    fn closed_form(raw: Vector, method: Method) -> Result<Self> {
        let norm = raw.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SingularMatrix(format!(
                "{method} produced a zero or non-finite direction"
            )));
        }
        Ok(DirectionEstimate {
            unit: &raw / norm,
            raw,
            method,
            converged: true,
            iterations: 0,
            sign_reference_applied: false,
            warnings: Vec::new(),
            objective_trace: Vec::new(),
        })
    }

    pub fn raw_norm(&self) -> f64 {
        self.raw.norm()
    }
}

/// Flip the estimate so that `unitᵀreference >= 0`.
pub fn align_sign(mut est: DirectionEstimate, reference: &Vector) -> Result<DirectionEstimate> {
    if !(reference.norm() > 0.0) {
        return Err(Error::Domain("sign reference must be nonzero".into()));
    }
    if est.unit.dot(reference) < 0.0 {
        est.unit.neg_mut();
        est.raw.neg_mut();
    }
    est.sign_reference_applied = true;
    Ok(est)
}

/// Centered, whitened copy of a data set.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// `Ĉ₂^(-1/2)`
    pub whitener: SpdMatrix,
    pub mean: Vector,
    pub whitened: Matrix,
}

fn near_singular(err: Error) -> Error {
    match err {
        Error::NotPositiveDefinite(smallest) => Error::NearSingularCovariance {
            smallest,
            floor: 0.0,
        },
        other => other,
    }
}

pub fn whiten(data: &DataSet) -> Result<Whitening> {
    let moments = sample_moments(data)?;
    let c2 = SpdMatrix::new(moments.c2_hat).map_err(near_singular)?;
    let whitener = inv_sqrt(&c2)?;
    let x = data.observations();
    let mut whitened = x.clone();
    for mut row in whitened.row_iter_mut() {
        row -= moments.mean.transpose();
    }
    let whitened = whitened * whitener.as_matrix();
    Ok(Whitening {
        whitener,
        mean: moments.mean,
        whitened,
    })
}

/// Options for the fixed-point estimators (3-JADE and projection pursuit).
#[derive(Debug, Clone)]
pub struct IterOptions {
    /// Starting point in whitened coordinates; defaults to the TOBI direction.
    pub init: Option<Vector>,
    /// Stop once `1 - |u_newᵀu_old| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterOptions {
    fn default() -> Self {
        IterOptions {
            init: None,
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Second moment, third-moment vector, whitener and whitened third-moment
/// slices: everything the unsupervised estimators consume.
#[derive(Debug, Clone)]
pub struct StandardizedMoments {
    pub mean: Vector,
    pub c2: Matrix,
    pub c3: Vector,
    pub whitener: SpdMatrix,
    pub slices: TkSet,
}

impl StandardizedMoments {
    pub fn from_data(data: &DataSet) -> Result<Self> {
        let moments = sample_moments(data)?;
        let w = whiten(data)?;
        Ok(StandardizedMoments {
            mean: moments.mean,
            c2: moments.c2_hat,
            c3: moments.c3_hat,
            slices: tk_slices(&w.whitened),
            whitener: w.whitener,
        })
    }

    /// Exact population counterparts. The third-moment tensor of the centered
    /// mixture is `βγ h⊗h⊗h`, so its whitened slices are rank one.
    pub fn from_population(params: &MixtureParams) -> Result<Self> {
        let pm = population_moments(params);
        let d = derive(params);
        let whitener = inv_sqrt(&pm.c2)?;
        let wh = whitener.as_matrix() * &d.h;
        Ok(StandardizedMoments {
            mean: params.mean(),
            c2: pm.c2.into_inner(),
            c3: pm.c3,
            slices: TkSet::rank_one(d.beta * d.gamma, &wh),
            whitener,
        })
    }

    pub fn dim(&self) -> usize {
        self.c2.nrows()
    }

    /// Method of moments with known weight `alpha1`:
    /// `(C₂ - β^(1/3)γ^(-2/3)‖c₃‖^(-4/3) c₃c₃ᵀ)⁻¹ β^(-1/3)γ^(-1/3)‖c₃‖^(-2/3) c₃`.
    pub fn mom(&self, alpha1: f64) -> Result<DirectionEstimate> {
        if !(alpha1 > 0.5 && alpha1 < 1.0) {
            return Err(Error::InvalidWeight(alpha1));
        }
        let beta = alpha1 * (1.0 - alpha1);
        let gamma = 2.0 * alpha1 - 1.0;
        let norm = self.c3.norm();
        let floor = SKEWNESS_FLOOR * self.c2.trace().powf(1.5);
        if !(norm >= floor) {
            return Err(Error::DegenerateSkewness { norm, floor });
        }
        let correction = beta.cbrt() * gamma.powf(-2.0 / 3.0) * norm.powf(-4.0 / 3.0);
        let inner = &self.c2 - &self.c3 * self.c3.transpose() * correction;
        let rhs = &self.c3 * (beta.cbrt().recip() * gamma.cbrt().recip() * norm.powf(-2.0 / 3.0));
        let raw = sym_solve(&inner, &rhs)?;
        DirectionEstimate::closed_form(raw, Method::Mom)
    }

    /// Skewness vector: whitener times the third-moment vector of whitened data.
    pub fn skewvec(&self) -> Result<DirectionEstimate> {
        let c3w = self.slices.skewness_vector();
        self.check_skewness(c3w.norm())?;
        DirectionEstimate::closed_form(self.whitener.as_matrix() * c3w, Method::Skewvec)
    }

    /// TOBI: whitener times the leading eigenvector of `Σ_k T_k²`.
    pub fn tobi(&self) -> Result<DirectionEstimate> {
        let (u, gap) = self.tobi_direction()?;
        let mut est = DirectionEstimate::closed_form(self.whitener.as_matrix() * u, Method::Tobi)?;
        if let Some(gap) = gap {
            est.warnings
                .push(EstimateWarning::AmbiguousLeadingEigenvalue { gap });
        }
        Ok(est)
    }

    fn tobi_direction(&self) -> Result<(Vector, Option<f64>)> {
        let pairs = sym_eigen(&tobi_matrix(&self.slices))?;
        let lead = &pairs[0];
        let ambiguous = pairs.get(1).and_then(|next| {
            let gap = lead.value - next.value;
            (gap <= EIGEN_GAP_TOL * lead.value.abs().max(f64::MIN_POSITIVE)).then_some(gap)
        });
        Ok((lead.vector.clone(), ambiguous))
    }

    /// 3-JADE: maximize `Σ_k (uᵀT_k u)²` over the unit sphere by the
    /// fixed-point iteration `u ← Σ_k (uᵀT_k u) T_k u`, then map back.
    pub fn jade3<R: Rng + ?Sized>(
        &self,
        opts: &IterOptions,
        rng: &mut R,
    ) -> Result<DirectionEstimate> {
        let init = self.initial_direction(opts)?;
        let slices = &self.slices;
        let run = fixed_point(
            init,
            opts,
            rng,
            |u| slices.jade_update(u),
            |u| slices.jade_objective(u),
        );
        self.finish_iterative(run, Method::Jade3)
    }

    /// Skewness projection pursuit: stationary point of `E[(uᵀz)³]²` via
    /// `u ← E[(uᵀz)² z]`. Experimental.
    pub fn pp<R: Rng + ?Sized>(
        &self,
        opts: &IterOptions,
        rng: &mut R,
    ) -> Result<DirectionEstimate> {
        self.check_skewness(self.slices.norm())?;
        let init = self.initial_direction(opts)?;
        let slices = &self.slices;
        let run = fixed_point(
            init,
            opts,
            rng,
            |u| slices.skewness_gradient(u),
            |u| slices.projection_skewness(u).powi(2),
        );
        self.finish_iterative(run, Method::Pp)
    }

    fn check_skewness(&self, norm: f64) -> Result<()> {
        // whitened coordinates: tr(C₂) = p
        let floor = SKEWNESS_FLOOR * (self.dim() as f64).powf(1.5);
        if !(norm >= floor) {
            return Err(Error::DegenerateSkewness { norm, floor });
        }
        Ok(())
    }

    fn initial_direction(&self, opts: &IterOptions) -> Result<Vector> {
        match &opts.init {
            Some(init) => {
                if init.len() != self.dim() {
                    return Err(Error::Dimension(format!(
                        "initial vector has length {}, data has {} columns",
                        init.len(),
                        self.dim()
                    )));
                }
                if !(init.norm() > 0.0) {
                    return Err(Error::Domain("initial vector must be nonzero".into()));
                }
                Ok(init.normalize())
            }
            None => Ok(self.tobi_direction()?.0),
        }
    }

    fn finish_iterative(&self, run: FixedPointRun, method: Method) -> Result<DirectionEstimate> {
        let mut est = DirectionEstimate::closed_form(self.whitener.as_matrix() * &run.u, method)?;
        est.converged = run.converged;
        est.iterations = run.iterations;
        if run.restarts > 0 {
            est.warnings.push(EstimateWarning::Restarted {
                count: run.restarts,
            });
        }
        let worst_drop = run
            .trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0_f64, f64::max);
        if worst_drop > 1e-12 {
            est.warnings
                .push(EstimateWarning::ObjectiveDecreased { by: worst_drop });
        }
        est.objective_trace = run.trace;
        Ok(est)
    }
}

struct FixedPointRun {
    u: Vector,
    converged: bool,
    iterations: usize,
    restarts: usize,
    trace: Vec<f64>,
}

fn random_unit<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

fn fixed_point<R, U, O>(
    init: Vector,
    opts: &IterOptions,
    rng: &mut R,
    update: U,
    objective: O,
) -> FixedPointRun
where
    R: Rng + ?Sized,
    U: Fn(&Vector) -> Vector,
    O: Fn(&Vector) -> f64,
{
    let mut u = init;
    let mut trace = vec![objective(&u)];
    let mut restarts = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = update(&u);
        let norm = next.norm();
        if !(norm >= UNDERFLOW) || !norm.is_finite() {
            if restarts == MAX_RESTARTS {
                break;
            }
            restarts += 1;
            u = random_unit(u.len(), rng);
            trace.clear();
            trace.push(objective(&u));
            continue;
        }
        let next = next / norm;
        let done = 1.0 - next.dot(&u).abs() < opts.tol;
        u = next;
        trace.push(objective(&u));
        if done {
            return FixedPointRun {
                u,
                converged: true,
                iterations,
                restarts,
                trace,
            };
        }
    }
    FixedPointRun {
        u,
        converged: false,
        iterations,
        restarts,
        trace,
    }
}

pub fn est_mom(data: &DataSet, alpha1: f64) -> Result<DirectionEstimate> {
    if !(alpha1 > 0.5 && alpha1 < 1.0) {
        return Err(Error::InvalidWeight(alpha1));
    }
    let m = sample_moments(data)?;
    let c2 = SpdMatrix::new(m.c2_hat.clone()).map_err(near_singular)?;
    // the whitener is unused by MOM but the covariance must still be usable
    let whitener = inv_sqrt(&c2)?;
    StandardizedMoments {
        mean: m.mean,
        c2: m.c2_hat,
        c3: m.c3_hat,
        whitener,
        slices: TkSet::zeros(0),
    }
    .mom(alpha1)
}

pub fn est_skewvec(data: &DataSet) -> Result<DirectionEstimate> {
    StandardizedMoments::from_data(data)?.skewvec()
}

pub fn est_tobi(data: &DataSet) -> Result<DirectionEstimate> {
    StandardizedMoments::from_data(data)?.tobi()
}

pub fn est_jade3<R: Rng + ?Sized>(
    data: &DataSet,
    opts: &IterOptions,
    rng: &mut R,
) -> Result<DirectionEstimate> {
    StandardizedMoments::from_data(data)?.jade3(opts, rng)
}

pub fn est_pp<R: Rng + ?Sized>(
    data: &DataSet,
    opts: &IterOptions,
    rng: &mut R,
) -> Result<DirectionEstimate> {
    StandardizedMoments::from_data(data)?.pp(opts, rng)
}

/// Supervised LDA: `Ŝ_w⁻¹(x̄₊ - x̄₋)` with the pooled within-class
/// covariance (divisor n).
pub fn est_lda(data: &DataSet) -> Result<DirectionEstimate> {
    let labels = data.labels().ok_or_else(|| {
        Error::SupervisionRequired("LDA needs a label column with values -1/+1".into())
    })?;
    let x = data.observations();
    let (n, p) = x.shape();
    let mut sums = [Vector::zeros(p), Vector::zeros(p)];
    let mut counts = [0usize; 2];
    for (row, &label) in x.row_iter().zip(labels) {
        let g = usize::from(label > 0);
        sums[g] += row.transpose();
        counts[g] += 1;
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::InsufficientData(format!(
            "LDA needs at least 2 rows per class, got {} (-1) and {} (+1)",
            counts[0], counts[1]
        )));
    }
    let means = [&sums[0] / counts[0] as f64, &sums[1] / counts[1] as f64];
    let mut pooled = Matrix::zeros(p, p);
    for (row, &label) in x.row_iter().zip(labels) {
        let d = row.transpose() - &means[usize::from(label > 0)];
        pooled.ger(1.0, &d, &d, 1.0);
    }
    pooled /= n as f64;
    lda_from_parts(&means[0], &means[1], &pooled)
}

/// LDA direction from class means and a pooled covariance.
pub fn lda_from_parts(
    mean_neg: &Vector,
    mean_pos: &Vector,
    pooled: &Matrix,
) -> Result<DirectionEstimate> {
    let pooled = SpdMatrix::new(crate::linalg::symmetrize(pooled)).map_err(near_singular)?;
    // reuse the whitening floor to reject ill-conditioned pooled covariances
    inv_sqrt(&pooled)?;
    let raw = sym_solve(pooled.as_matrix(), &(mean_pos - mean_neg))?;
    DirectionEstimate::closed_form(raw, Method::Lda)
}

/// Run any estimator on a data set. `alpha1` is required for MOM only.
pub fn estimate<R: Rng + ?Sized>(
    method: Method,
    data: &DataSet,
    alpha1: Option<f64>,
    opts: &IterOptions,
    rng: &mut R,
) -> Result<DirectionEstimate> {
    match method {
        Method::Mom => {
            let alpha1 = alpha1
                .ok_or_else(|| Error::Usage("MOM requires the mixture weight alpha1".into()))?;
            est_mom(data, alpha1)
        }
        Method::Skewvec => est_skewvec(data),
        Method::Tobi => est_tobi(data),
        Method::Jade3 => est_jade3(data, opts, rng),
        Method::Lda => est_lda(data),
        Method::Pp => est_pp(data, opts, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn reference() -> MixtureParams {
        MixtureParams::centered(0.7, v(&[2.0, 0.0, 0.0]), SpdMatrix::identity(3)).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(99)
    }

    #[test]
    fn method_parsing() {
        assert_eq!("jade3".parse::<Method>().unwrap(), Method::Jade3);
        assert_eq!("SKEWVEC".parse::<Method>().unwrap(), Method::Skewvec);
        assert!("fobi".parse::<Method>().is_err());
        let json: Vec<Method> = serde_json::from_str(r#"["tobi", "LDA"]"#).unwrap();
        assert_eq!(json, vec![Method::Tobi, Method::Lda]);
    }

    #[test]
    fn whiten_constructed_dataset() {
        // columns with mean zero, variance 4 and 1, uncorrelated
        let x = Matrix::from_row_slice(4, 2, &[2.0, 1.0, -2.0, 1.0, 2.0, -1.0, -2.0, -1.0]);
        let w = whiten(&DataSet::new(x)).unwrap();
        let expected = Matrix::from_diagonal(&v(&[0.5, 1.0]));
        assert!((w.whitener.as_matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn whiten_invariant_and_idempotent() {
        let data = sample(&reference(), 500, &mut rng());
        let w = whiten(&data).unwrap();
        let cov = w.whitened.transpose() * &w.whitened / 500.0;
        assert!((cov - Matrix::identity(3, 3)).amax() < 1e-8);
        let again = whiten(&DataSet::new(w.whitened.clone())).unwrap();
        assert!((again.whitener.as_matrix() - Matrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn whiten_white_noise() {
        let mut r = rng();
        let n = 20_000;
        let x = Matrix::from_fn(n, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let w = whiten(&DataSet::new(x)).unwrap();
        assert!(
            (w.whitener.as_matrix() - Matrix::identity(3, 3)).amax()
                < 5.0 / (n as f64).sqrt() * 3.0
        );
    }

    #[test]
    fn whiten_singular() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            whiten(&DataSet::new(x)).unwrap_err(),
            Error::NearSingularCovariance { .. }
        ));
    }

    #[test]
    fn population_fisher_consistency_reference() {
        let sm = StandardizedMoments::from_population(&reference()).unwrap();
        let mom = sm.mom(0.7).unwrap();
        assert!((&mom.raw - v(&[2.0, 0.0, 0.0])).amax() < 1e-12);

        let r = sm.skewvec().unwrap();
        assert!((&r.raw - v(&[0.198488, 0.0, 0.0])).amax() < 1e-6);

        let l = sm.tobi().unwrap();
        assert!((l.raw[0].abs() - 0.737210).abs() < 1e-6);
        assert!((l.unit[0].abs() - 1.0).abs() < 1e-14);

        let j = sm.jade3(&IterOptions::default(), &mut rng()).unwrap();
        assert!(j.converged);
        assert!((j.raw[0].abs() - 0.737210).abs() < 1e-6);

        let pp = sm.pp(&IterOptions::default(), &mut rng()).unwrap();
        assert!((pp.unit[0].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jade3_from_arbitrary_init_at_population() {
        let sm = StandardizedMoments::from_population(&reference()).unwrap();
        let opts = IterOptions {
            init: Some(v(&[0.3, 0.9, -0.4])),
            ..Default::default()
        };
        let j = sm.jade3(&opts, &mut rng()).unwrap();
        assert!(j.converged);
        assert!(j.iterations <= 2);
        assert!((j.unit[0].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jade3_restarts_from_orthogonal_init() {
        let sm = StandardizedMoments::from_population(&reference()).unwrap();
        let opts = IterOptions {
            init: Some(v(&[0.0, 1.0, 0.0])),
            ..Default::default()
        };
        let j = sm.jade3(&opts, &mut rng()).unwrap();
        assert!(j
            .warnings
            .iter()
            .any(|w| matches!(w, EstimateWarning::Restarted { .. })));
        assert!(j.converged);
        assert!((j.unit[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jade3_gives_up_after_restarts() {
        // all slices zero: every update vanishes
        let sm = StandardizedMoments {
            mean: Vector::zeros(2),
            c2: Matrix::identity(2, 2),
            c3: Vector::zeros(2),
            whitener: SpdMatrix::identity(2),
            slices: TkSet::zeros(2),
        };
        let j = sm.jade3(&IterOptions::default(), &mut rng()).unwrap();
        assert!(!j.converged);
        assert!(j.warnings.contains(&EstimateWarning::Restarted {
            count: MAX_RESTARTS
        }));
    }

    #[test]
    fn jade3_on_sample_converges() {
        let params =
            MixtureParams::with_tau(0.7, &v(&[1.0, 0.5, -0.3]), SpdMatrix::identity(3), 8.0)
                .unwrap();
        let data = sample(&params, 2000, &mut rng());
        let j = est_jade3(&data, &IterOptions::default(), &mut rng()).unwrap();
        assert!(j.converged);
        assert!(j.iterations <= 200);
        assert!((j.unit.norm() - 1.0).abs() < 1e-12);
        assert!(!j
            .warnings
            .iter()
            .any(|w| matches!(w, EstimateWarning::ObjectiveDecreased { .. })));
    }

    #[test]
    fn symmetric_sample_is_degenerate() {
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let data = DataSet::new(x);
        assert!(matches!(
            est_mom(&data, 0.7).unwrap_err(),
            Error::DegenerateSkewness { .. }
        ));
        assert!(matches!(
            est_skewvec(&data).unwrap_err(),
            Error::DegenerateSkewness { .. }
        ));
        assert!(matches!(
            est_pp(&data, &IterOptions::default(), &mut rng()).unwrap_err(),
            Error::DegenerateSkewness { .. }
        ));
    }

    #[test]
    fn mom_rejects_bad_weight() {
        let data = sample(&reference(), 100, &mut rng());
        assert!(matches!(
            est_mom(&data, 0.5).unwrap_err(),
            Error::InvalidWeight(_)
        ));
    }

    #[test]
    fn unit_is_normalized() {
        let data = sample(&reference(), 300, &mut rng());
        for method in Method::ALL {
            let est = estimate(
                method,
                &data,
                Some(0.7),
                &IterOptions::default(),
                &mut rng(),
            )
            .unwrap();
            assert!((est.unit.norm() - 1.0).abs() < 1e-12, "{method}");
            assert!((&est.unit * est.raw.norm() - &est.raw).amax() < 1e-12);
        }
    }

    #[test]
    fn tobi_flags_tied_eigenvalues() {
        // slices built so that Σ T_k² = 2 I
        let sm = StandardizedMoments {
            mean: Vector::zeros(2),
            c2: Matrix::identity(2, 2),
            c3: Vector::zeros(2),
            whitener: SpdMatrix::identity(2),
            slices: TkSet {
                slices: vec![
                    Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
                    Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
                ],
            },
        };
        let est = sm.tobi().unwrap();
        assert!(matches!(
            est.warnings[0],
            EstimateWarning::AmbiguousLeadingEigenvalue { .. }
        ));
    }

    #[test]
    fn lda_examples() {
        // class means (0,0) and (2,0), pooled covariance I
        let x = Matrix::from_row_slice(
            8,
            2,
            &[
                1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0, //
                3.0, 1.0, 1.0, -1.0, 3.0, -1.0, 1.0, 1.0,
            ],
        );
        let labels = vec![-1, -1, -1, -1, 1, 1, 1, 1];
        let data = DataSet::with_labels(x.clone(), labels.clone()).unwrap();
        let est = est_lda(&data).unwrap();
        assert!((&est.unit - v(&[1.0, 0.0])).amax() < 1e-14);

        let swapped: Vec<i8> = labels.iter().map(|l| -l).collect();
        let flipped = est_lda(&DataSet::with_labels(x.clone(), swapped).unwrap()).unwrap();
        assert!((&flipped.raw + &est.raw).amax() < 1e-14);

        assert!(matches!(
            est_lda(&DataSet::new(x)).unwrap_err(),
            Error::SupervisionRequired(_)
        ));
    }

    #[test]
    fn lda_population_injection() {
        let s = SpdMatrix::new(Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0])).unwrap();
        let params = MixtureParams::centered(0.6, v(&[1.0, -1.0]), s.clone()).unwrap();
        let est = lda_from_parts(params.mu1(), params.mu2(), s.as_matrix()).unwrap();
        let theta = params.theta();
        assert!((&est.unit - theta.normalize()).amax() < 1e-14);
    }

    #[test]
    fn align_sign_cases() {
        let base = DirectionEstimate::closed_form(v(&[-1.0, 0.0]), Method::Tobi).unwrap();
        let a = align_sign(base.clone(), &v(&[1.0, 0.0])).unwrap();
        assert_eq!(a.unit, v(&[1.0, 0.0]));
        assert!(a.sign_reference_applied);

        let b = align_sign(a.clone(), &v(&[1.0, 0.0])).unwrap();
        assert_eq!(b.unit, v(&[1.0, 0.0]));

        let c = DirectionEstimate::closed_form(v(&[0.0, 1.0]), Method::Tobi).unwrap();
        let c = align_sign(c, &v(&[1.0, 0.0])).unwrap();
        assert_eq!(c.unit, v(&[0.0, 1.0]));
        assert!(c.sign_reference_applied);

        assert!(align_sign(base, &Vector::zeros(2)).is_err());
    }
}
