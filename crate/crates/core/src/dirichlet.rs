//! Normal-theory box test: Dirichlet sampling, the centered log transform of
//! a Dirichlet vector, and Monte Carlo calibration of the box half-width.

use crate::descriptive::log_contrasts;
use crate::error::{Error, Result};
use crate::rng::{sample_ln_gamma, RngStream};

/// Shape parameters `nu_i = (n_i - 1) / 2` of the Dirichlet law of the
/// normalized weighted sample variances under normality.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    nu: Vec<f64>,
}

impl DirichletParams {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        if nu.len() < 2 {
            return Err(Error::InvalidInput(
                "a Dirichlet needs at least 2 components".into(),
            ));
        }
        if let Some(v) = nu.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "Dirichlet shapes must be positive, got {v}"
            )));
        }
        Ok(Self { nu })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if let Some(n) = sizes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidInput(format!(
                "sample sizes must be >= 2, got {n}"
            )));
        }
        Self::new(sizes.iter().map(|&n| (n as f64 - 1.0) / 2.0).collect())
    }

    pub fn shapes(&self) -> &[f64] {
        &self.nu
    }

    pub fn total(&self) -> f64 {
        self.nu.iter().sum()
    }

    /// `nu'_i = ln(nu_i / geometric mean of nu)`, the offset between the
    /// observed log contrasts and `y_i`.
    pub fn offsets(&self) -> Vec<f64> {
        log_contrasts(&self.nu).expect("shapes are positive")
    }
}

/// Normalized independent Gamma(nu_i, 1) draws. Computed in log space so
/// that tiny shapes do not underflow before normalization.
pub fn sample_dirichlet(params: &DirichletParams, rng: &mut RngStream) -> Vec<f64> {
    let logs: Vec<f64> = params.nu.iter().map(|&v| sample_ln_gamma(v, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// `w_i = ln x_i - mean_j ln x_j`.
pub fn w_transform(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!(
            "w transform needs positive components, got {v}"
        )));
    }
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(logs.iter().map(|l| l - mean).collect())
}

/// Calibrated normal-theory acceptance box `theta_i +- c lambda_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalTheoryBox {
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub c: f64,
    /// Empirical coverage of the box at `c` over the calibration draws.
    pub coverage: f64,
    /// Order-statistic standard error of `c`.
    pub c_se: f64,
    pub nu_offsets: Vec<f64>,
    pub draws: usize,
}

impl NormalTheoryBox {
    /// `y_i = eta_hat_i + nu'_i` for observed sample variances.
    pub fn y_statistics(&self, variances: &[f64]) -> Result<Vec<f64>> {
        let eta = log_contrasts(variances)?;
        Ok(eta
            .iter()
            .zip(&self.nu_offsets)
            .map(|(e, o)| e + o)
            .collect())
    }

    /// Whether `y` lies in the acceptance box.
    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.theta.iter().zip(&self.lambda))
            .all(|(y, (t, l))| (y - t).abs() <= self.c * l)
    }
}

pub const MIN_CALIBRATION_DRAWS: usize = 1000;

pub fn calibrate_c(
    params: &DirichletParams,
    alpha: f64,
    draws: usize,
    rng: &mut RngStream,
) -> Result<NormalTheoryBox> {
    if draws < MIN_CALIBRATION_DRAWS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_CALIBRATION_DRAWS} calibration draws are required, got {draws}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let k1 = params.nu.len();
    let mut samples = Vec::with_capacity(draws);
    while samples.len() < draws {
        let x = sample_dirichlet(params, rng);
        // A component can underflow to zero for very small shapes; skip that draw.
        if let Ok(w) = w_transform(&x) {
            samples.push(w);
        }
    }
    let nd = draws as f64;
    let mut theta = vec![0.0; k1];
    for w in &samples {
        for (t, v) in theta.iter_mut().zip(w) {
            *t += v;
        }
    }
    theta.iter_mut().for_each(|t| *t /= nd);
    let mut lambda = vec![0.0; k1];
    for w in &samples {
        for ((l, v), t) in lambda.iter_mut().zip(w).zip(&theta) {
            *l += (v - t).powi(2);
        }
    }
    for l in lambda.iter_mut() {
        *l = (*l / (nd - 1.0)).sqrt();
        if !(*l > 0.0) {
            return Err(Error::Numeric(
                "Monte Carlo standard deviation of w is zero".into(),
            ));
        }
    }
    let mut radii: Vec<f64> = samples
        .iter()
        .map(|w| {
            w.iter()
                .zip(theta.iter().zip(&lambda))
                .fold(0.0f64, |m, (v, (t, l))| m.max((v - t).abs() / l))
        })
        .collect();
    radii.sort_by(f64::total_cmp);
    let need = crate::bootstrap::required_rows(draws, alpha).max(1);
    let c = radii[need - 1];
    let inside = radii.partition_point(|&r| r <= c);
    // Half the spread between the order statistics one binomial sd either side.
    let p = 1.0 - alpha;
    let m = (nd * p * (1.0 - p)).sqrt().ceil() as usize;
    let hi = radii[(need - 1 + m).min(draws - 1)];
    let lo = radii[(need - 1).saturating_sub(m)];
    Ok(NormalTheoryBox {
        theta,
        lambda,
        c,
        coverage: inside as f64 / nd,
        c_se: 0.5 * (hi - lo),
        nu_offsets: params.offsets(),
        draws,
    })
}
