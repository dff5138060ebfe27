//! The four tests of `H0: sigma_1^2 = ... = sigma_{K+1}^2`.
//!
//! * [`levene`]: one-way ANOVA on absolute deviations from group medians.
//! * [`shoemaker`]: kurtosis-adjusted chi-square test on centered log variances.
//! * [`bootstrap_levene`]: Levene's statistic with a pooled-residual bootstrap p-value.
//! * [`box_test_t`]: box-type acceptance region for the standardized log
//!   contrasts, calibrated by a within-group bootstrap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    center, resample_pooled, resample_within_groups, search_critical, smooth, CenterMode,
    ReplicateMatrix,
};
use crate::descriptive::{
    estimate_moments, eta_lambda, log_contrasts, median, summarize, EtaStatistics, GroupedSample,
    SizeMode,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{chi2_quantile, f_quantile};

/// Redraw cap for bootstrap rounds whose statistic is undefined.
pub const MAX_REDRAWS: usize = 100;

/// Groups smaller than this receive smoothed residuals in the bootstrap Levene test.
pub const SMOOTHING_THRESHOLD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Levene,
    Shoemaker,
    BootstrapLevene,
    BoxT,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::BoxT,
        Method::Levene,
        Method::BootstrapLevene,
        Method::Shoemaker,
    ];

    /// Short code used in tables: `T`, `L`, `BL`, `S`.
    pub fn code(self) -> &'static str {
        match self {
            Method::Levene => "L",
            Method::Shoemaker => "S",
            Method::BootstrapLevene => "BL",
            Method::BoxT => "T",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l" | "levene" => Ok(Method::Levene),
            "s" | "shoemaker" => Ok(Method::Shoemaker),
            "bl" | "bootstrap_levene" | "bootstraplevene" => Ok(Method::BootstrapLevene),
            "t" | "box_t" | "boxt" => Ok(Method::BoxT),
            other => Err(Error::InvalidInput(format!("unknown test `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Statistic {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: Statistic,
    pub critical_value: Option<f64>,
    pub p_value: Option<f64>,
    pub reject: bool,
    pub alpha: f64,
    pub df: Option<Vec<f64>>,
}

impl TestResult {
    /// Whether `reject` agrees with the method's decision rule.
    pub fn decision_consistent(&self) -> bool {
        let expected = match (self.method, &self.statistic) {
            (Method::Levene | Method::Shoemaker, Statistic::Scalar(s)) => {
                self.critical_value.is_some_and(|c| *s > c)
            }
            (Method::BootstrapLevene, Statistic::Scalar(_)) => {
                self.p_value.is_some_and(|p| p < self.alpha)
            }
            (Method::BoxT, Statistic::Vector(t)) => {
                let max = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                self.critical_value.is_some_and(|c| max > c)
            }
            _ => return false,
        };
        expected == self.reject
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub stream: RngStream,
    /// Use `(eta* - eta) / lambda*` replicates instead of centering `t*` at
    /// its bootstrap mean.
    pub pivot_variant: bool,
}

impl BootstrapConfig {
    pub const DEFAULT_REPLICATES: usize = 500;

    pub fn new(replicates: usize, stream: RngStream) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidInput(
                "bootstrap replicate count must be >= 1".into(),
            ));
        }
        Ok(Self {
            replicates,
            stream,
            pivot_variant: false,
        })
    }

    pub fn with_pivot_variant(mut self, on: bool) -> Self {
        self.pivot_variant = on;
        self
    }

    fn with_stream(&self, stream: RngStream) -> Self {
        Self {
            stream,
            ..self.clone()
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )))
    }
}

/// Levene's F ratio on `e_ij = |d_ij - median_i|`, with `n - (K + 1)`
/// denominator degrees of freedom.
///
/// Returns 0 when every group has the same mean absolute deviation; errors
/// when the numerator is positive but the deviations have no within-group spread.
pub fn levene_statistic(groups: &[Vec<f64>]) -> Result<f64> {
    let k = groups.len() as f64 - 1.0;
    let n = groups.iter().map(Vec::len).sum::<usize>() as f64;
    let scale: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = median(g);
            g.iter().map(|x| (x - m).abs()).collect()
        })
        .collect();
    let group_means: Vec<f64> = scale
        .iter()
        .map(|e| e.iter().sum::<f64>() / e.len() as f64)
        .collect();
    let grand = scale.iter().flatten().sum::<f64>() / n;
    let between: f64 = scale
        .iter()
        .zip(&group_means)
        .map(|(e, m)| e.len() as f64 * (m - grand).powi(2))
        .sum();
    let within: f64 = scale
        .iter()
        .zip(&group_means)
        .map(|(e, m)| e.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    // Equal group means up to rounding in the grand mean.
    if between <= 1e-28 * grand * grand * n {
        return Ok(0.0);
    }
    if !(within > 0.0) {
        return Err(Error::Degenerate(
            "absolute deviations from the median have no within-group variation".into(),
        ));
    }
    Ok((between / k) / (within / (n - k - 1.0)))
}

fn levene_df(data: &GroupedSample) -> Result<(f64, f64)> {
    let k = data.num_groups() as f64 - 1.0;
    let df2 = data.total() as f64 - k - 1.0;
    if df2 <= 0.0 {
        return Err(Error::InvalidInput("Levene's test needs n > K + 1".into()));
    }
    Ok((k, df2))
}

pub fn levene(data: &GroupedSample, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let (df1, df2) = levene_df(data)?;
    let stat = levene_statistic(data.groups())?;
    let crit = f_quantile(1.0 - alpha, df1, df2)?;
    Ok(TestResult {
        method: Method::Levene,
        statistic: Statistic::Scalar(stat),
        critical_value: Some(crit),
        p_value: None,
        reject: stat > crit,
        alpha,
        df: Some(vec![df1, df2]),
    })
}

/// Shoemaker's statistic `sum_i (ln s_i^2 - mean ln s^2)^2 / var(ln s_i^2)`
/// with the harmonic-mean sample size in every denominator.
pub fn shoemaker_statistic(data: &GroupedSample) -> Result<f64> {
    let summary = summarize(data);
    let centered = log_contrasts(&summary.variances)?;
    let est = estimate_moments(data, SizeMode::Harmonic)?;
    let mut stat = 0.0;
    for (c, v) in centered.iter().zip(&est.var_ln_s2) {
        if !(*v > 0.0) {
            return Err(Error::Numeric(format!(
                "estimated var(ln s^2) = {v} is not positive (kurtosis {:.4}, harmonic n {:.4})",
                est.kurtosis(),
                est.harmonic_n
            )));
        }
        stat += c * c / v;
    }
    Ok(stat)
}

pub fn shoemaker(data: &GroupedSample, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let df = data.num_groups() as f64 - 1.0;
    let stat = shoemaker_statistic(data)?;
    let crit = chi2_quantile(1.0 - alpha, df)?;
    Ok(TestResult {
        method: Method::Shoemaker,
        statistic: Statistic::Scalar(stat),
        critical_value: Some(crit),
        p_value: None,
        reject: stat > crit,
        alpha,
        df: Some(vec![df]),
    })
}

/// Bootstrap Levene p-value and observed statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapLeveneResult {
    pub statistic: f64,
    pub exceed_count: usize,
    pub replicates: usize,
    pub p_value: f64,
}

pub fn bootstrap_levene_detailed(
    data: &GroupedSample,
    cfg: &BootstrapConfig,
) -> Result<BootstrapLeveneResult> {
    levene_df(data)?;
    let observed = levene_statistic(data.groups())?;
    let summary = summarize(data);
    let pool: Vec<f64> = data
        .groups()
        .iter()
        .zip(&summary.medians)
        .flat_map(|(g, m)| g.iter().map(move |x| x - m))
        .collect();
    if pool.iter().all(|&e| e == 0.0) {
        return Err(Error::Degenerate(
            "pooled median residuals are all zero".into(),
        ));
    }
    let q = (summary.pooled_ss / data.total() as f64).sqrt();
    let sizes = data.sizes();
    let mut rng = cfg.stream.clone();
    let mut exceed = 0;
    for _ in 0..cfg.replicates {
        let mut attempt = 0;
        let stat = loop {
            let draw = resample_pooled(&pool, &sizes, &mut rng)?;
            let groups: Vec<Vec<f64>> = draw
                .into_groups()
                .into_iter()
                .map(|g| {
                    if g.len() < SMOOTHING_THRESHOLD {
                        smooth(&g, q, &mut rng)
                    } else {
                        g
                    }
                })
                .collect();
            match levene_statistic(&groups) {
                Ok(s) => break s,
                Err(Error::Degenerate(_)) if attempt < MAX_REDRAWS => attempt += 1,
                Err(e) => return Err(e),
            }
        };
        if stat > observed {
            exceed += 1;
        }
    }
    Ok(BootstrapLeveneResult {
        statistic: observed,
        exceed_count: exceed,
        replicates: cfg.replicates,
        p_value: exceed as f64 / cfg.replicates as f64,
    })
}

pub fn bootstrap_levene(
    data: &GroupedSample,
    alpha: f64,
    cfg: &BootstrapConfig,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let r = bootstrap_levene_detailed(data, cfg)?;
    Ok(TestResult {
        method: Method::BootstrapLevene,
        statistic: Statistic::Scalar(r.statistic),
        critical_value: None,
        p_value: Some(r.p_value),
        reject: r.p_value < alpha,
        alpha,
        df: None,
    })
}

/// Everything the box-type test computes on one dataset.
#[derive(Debug, Clone)]
pub struct BootstrapBoxResult {
    pub observed: EtaStatistics,
    /// Centered (or pivoted) bootstrap replicates of `t`.
    pub centered: ReplicateMatrix,
    pub c_star: f64,
    pub coverage: f64,
    /// Bootstrap rounds redrawn because a resampled group had zero variance.
    pub redraws: usize,
}

impl BootstrapBoxResult {
    pub fn reject(&self) -> bool {
        self.observed.max_abs_t() > self.c_star
    }
}

pub fn box_test_t_detailed(
    data: &GroupedSample,
    alpha: f64,
    cfg: &BootstrapConfig,
) -> Result<BootstrapBoxResult> {
    check_alpha(alpha)?;
    let observed = eta_lambda(data)?;
    let mut rng = cfg.stream.clone();
    let mut rows = Vec::with_capacity(cfg.replicates);
    let mut redraws = 0;
    for _ in 0..cfg.replicates {
        let mut attempt = 0;
        let boot = loop {
            let draw = resample_within_groups(data, &mut rng);
            match eta_lambda(&draw) {
                Ok(s) => break s,
                Err(Error::Degenerate(_)) if attempt < MAX_REDRAWS => {
                    attempt += 1;
                    redraws += 1;
                }
                Err(Error::Degenerate(msg)) => {
                    return Err(Error::Degenerate(format!(
                        "bootstrap replicate still degenerate after {MAX_REDRAWS} redraws: {msg}"
                    )))
                }
                Err(e) => return Err(e),
            }
        };
        let row = if cfg.pivot_variant {
            boot.eta
                .iter()
                .zip(&observed.eta)
                .zip(&boot.lambda)
                .map(|((e_star, e), l_star)| (e_star - e) / l_star)
                .collect()
        } else {
            boot.t
        };
        rows.push(row);
    }
    let replicates = ReplicateMatrix::new(rows)?;
    let centered = if cfg.pivot_variant {
        replicates
    } else {
        center(&replicates, CenterMode::BootstrapMean)?
    };
    let (c_star, coverage) = if alpha >= 1.0 {
        (0.0, centered.coverage(0.0))
    } else {
        let s = search_critical(&centered, alpha)?;
        (s.c_star, s.coverage)
    };
    Ok(BootstrapBoxResult {
        observed,
        centered,
        c_star,
        coverage,
        redraws,
    })
}

pub fn box_test_t(data: &GroupedSample, alpha: f64, cfg: &BootstrapConfig) -> Result<TestResult> {
    let r = box_test_t_detailed(data, alpha, cfg)?;
    Ok(TestResult {
        method: Method::BoxT,
        reject: r.reject(),
        statistic: Statistic::Vector(r.observed.t),
        critical_value: Some(r.c_star),
        p_value: None,
        alpha,
        df: None,
    })
}

/// Child stream index used by each bootstrap test in [`run_all`] and the harness.
pub fn stream_slot(method: Method) -> u64 {
    match method {
        Method::Levene => 0,
        Method::Shoemaker => 0,
        Method::BootstrapLevene => 1,
        Method::BoxT => 2,
    }
}

/// Runs one test; the bootstrap tests draw from `cfg.stream` as given.
pub fn run_method(
    method: Method,
    data: &GroupedSample,
    alpha: f64,
    cfg: &BootstrapConfig,
) -> Result<TestResult> {
    match method {
        Method::Levene => levene(data, alpha),
        Method::Shoemaker => shoemaker(data, alpha),
        Method::BootstrapLevene => bootstrap_levene(data, alpha, cfg),
        Method::BoxT => box_test_t(data, alpha, cfg),
    }
}

/// All four tests on the same data. The two bootstrap tests use disjoint
/// child streams of `cfg.stream`; one test failing does not stop the others.
pub fn run_all(
    data: &GroupedSample,
    alpha: f64,
    cfg: &BootstrapConfig,
) -> Vec<(Method, Result<TestResult>)> {
    Method::ALL
        .iter()
        .map(|&m| {
            let sub = cfg.with_stream(cfg.stream.derive(stream_slot(m)));
            (m, run_method(m, data, alpha, &sub))
        })
        .collect()
}
