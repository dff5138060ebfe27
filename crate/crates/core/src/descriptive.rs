//! Grouped samples, per-group summaries, and the moment-based estimators
//! shared by the Shoemaker and box-type tests.

use crate::error::{Error, Result};

/// `K + 1 >= 2` groups of finite observations, each with at least two values.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: Vec<Vec<f64>>,
}

impl GroupedSample {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "at least 2 groups are required, got {}",
                groups.len()
            )));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "group {} has {} observation(s); at least 2 are required",
                    i + 1,
                    g.len()
                )));
            }
            if let Some(x) = g.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "group {} contains non-finite value {x}",
                    i + 1
                )));
            }
        }
        Ok(Self { groups })
    }

    /// Skips validation; callers guarantee the invariants (used for resamples
    /// that inherit sizes from a validated sample).
    pub(crate) fn from_validated(groups: Vec<Vec<f64>>) -> Self {
        debug_assert!(groups.len() >= 2 && groups.iter().all(|g| g.len() >= 2));
        Self { groups }
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn into_groups(self) -> Vec<Vec<f64>> {
        self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Applies `f` to every observation.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().map(|&x| f(x)).collect())
                .collect(),
        }
    }

    /// Applies `f(group_index, value)` to every observation.
    pub fn map_indexed(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .enumerate()
                .map(|(i, g)| g.iter().map(|&x| f(i, x)).collect())
                .collect(),
        }
    }
}

/// Streaming central moments of one group (count, mean, and the sums of
/// squared and fourth-power deviations), updated one value at a time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupMoments {
    pub n: usize,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl GroupMoments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    /// Sum of squared deviations from the group mean.
    pub fn sum_sq(&self) -> f64 {
        self.m2
    }

    /// Sum of fourth-power deviations from the group mean.
    pub fn sum_fourth(&self) -> f64 {
        self.m4
    }

    /// Sample variance with divisor `n - 1`.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n as f64 - 1.0)).max(0.0)
    }
}

/// Median with the midpoint convention for even counts.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub means: Vec<f64>,
    pub medians: Vec<f64>,
    pub variances: Vec<f64>,
    /// `sum_j (n_j - 1) s_j^2`.
    pub pooled_ss: f64,
}

pub fn summarize(data: &GroupedSample) -> GroupSummary {
    let moments: Vec<GroupMoments> = data
        .groups()
        .iter()
        .map(|g| GroupMoments::from_slice(g))
        .collect();
    GroupSummary {
        means: moments.iter().map(|m| m.mean).collect(),
        medians: data.groups().iter().map(|g| median(g)).collect(),
        variances: moments.iter().map(GroupMoments::variance).collect(),
        pooled_ss: moments.iter().map(GroupMoments::sum_sq).sum(),
    }
}

/// Which effective sample size enters the `var(ln s_i^2)` estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeMode {
    /// Harmonic mean of all group sizes, the same for every group.
    Harmonic,
    /// Each group's own size `n_i`.
    PerGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    /// Pooled fourth central moment, `sum_ij (d_ij - mean_i)^4 / n`.
    pub mu4: f64,
    /// Pooled variance, `sum_i (n_i - 1) s_i^2 / n`.
    pub sigma2: f64,
    pub var_ln_s2: Vec<f64>,
    /// Harmonic mean of the group sizes.
    pub harmonic_n: f64,
}

impl MomentEstimates {
    pub fn kurtosis(&self) -> f64 {
        self.mu4 / (self.sigma2 * self.sigma2)
    }
}

/// Harmonic mean of the group sizes.
pub fn harmonic_mean(sizes: &[usize]) -> f64 {
    sizes.len() as f64 / sizes.iter().map(|&n| 1.0 / n as f64).sum::<f64>()
}

/// `[kurtosis - (m - 3) / m] / (m - 1)`, the large-sample variance of `ln s^2`.
pub fn var_ln_s2(kurtosis: f64, m: f64) -> f64 {
    (kurtosis - (m - 3.0) / m) / (m - 1.0)
}

pub(crate) fn moment_estimates_from(
    moments: &[GroupMoments],
    mode: SizeMode,
) -> Result<MomentEstimates> {
    let n = moments.iter().map(|m| m.n).sum::<usize>() as f64;
    let sigma2 = moments.iter().map(GroupMoments::sum_sq).sum::<f64>() / n;
    let mu4 = moments.iter().map(GroupMoments::sum_fourth).sum::<f64>() / n;
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate("pooled variance is zero".into()));
    }
    let sizes: Vec<usize> = moments.iter().map(|m| m.n).collect();
    let harmonic_n = harmonic_mean(&sizes);
    let kurtosis = mu4 / (sigma2 * sigma2);
    let var_ln_s2 = sizes
        .iter()
        .map(|&ni| {
            let m = match mode {
                SizeMode::Harmonic => harmonic_n,
                SizeMode::PerGroup => ni as f64,
            };
            var_ln_s2(kurtosis, m)
        })
        .collect();
    Ok(MomentEstimates {
        mu4,
        sigma2,
        var_ln_s2,
        harmonic_n,
    })
}

/// Pooled fourth moment, pooled variance, and per-group `var(ln s_i^2)`.
pub fn estimate_moments(data: &GroupedSample, mode: SizeMode) -> Result<MomentEstimates> {
    let moments: Vec<GroupMoments> = data
        .groups()
        .iter()
        .map(|g| GroupMoments::from_slice(g))
        .collect();
    moment_estimates_from(&moments, mode)
}

/// Log contrasts of the group variances, their standard errors, and the
/// standardized statistics `t_i = eta_i / lambda_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaStatistics {
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t: Vec<f64>,
}

impl EtaStatistics {
    pub fn max_abs_t(&self) -> f64 {
        self.t.iter().fold(0.0, |acc, t| acc.max(t.abs()))
    }
}

/// `ln s_i^2 - mean_j ln s_j^2`.
pub fn log_contrasts(variances: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = variances.iter().position(|&s2| !(s2 > 0.0)) {
        return Err(Error::Degenerate(format!(
            "group {} has zero sample variance",
            i + 1
        )));
    }
    let logs: Vec<f64> = variances.iter().map(|s2| s2.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(logs.iter().map(|l| l - mean).collect())
}

pub(crate) fn eta_lambda_from(moments: &[GroupMoments]) -> Result<EtaStatistics> {
    let variances: Vec<f64> = moments.iter().map(GroupMoments::variance).collect();
    let eta = log_contrasts(&variances)?;
    let est = moment_estimates_from(moments, SizeMode::PerGroup)?;
    let groups = moments.len() as f64;
    let total_var: f64 = est.var_ln_s2.iter().sum();
    let mut lambda = Vec::with_capacity(moments.len());
    for v in &est.var_ln_s2 {
        let l2 = (1.0 - 2.0 / groups) * v + total_var / (groups * groups);
        if !(l2 > 0.0) {
            return Err(Error::Numeric(format!(
                "non-positive variance {l2} for a log contrast (kurtosis {:.4})",
                est.kurtosis()
            )));
        }
        lambda.push(l2.sqrt());
    }
    let t = eta.iter().zip(&lambda).map(|(e, l)| e / l).collect();
    Ok(EtaStatistics { eta, lambda, t })
}

pub fn eta_lambda(data: &GroupedSample) -> Result<EtaStatistics> {
    let moments: Vec<GroupMoments> = data
        .groups()
        .iter()
        .map(|g| GroupMoments::from_slice(g))
        .collect();
    eta_lambda_from(&moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(groups: &[&[f64]]) -> GroupedSample {
        GroupedSample::new(groups.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GroupedSample::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(GroupedSample::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(GroupedSample::new(vec![vec![1.0, f64::NAN], vec![1.0, 2.0]]).is_err());
        let g = sample(&[&[1.0, 2.0], &[3.0, 4.0, 5.0]]);
        assert_eq!(g.sizes(), vec![2, 3]);
        assert_eq!(g.total(), 5);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&sample(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]));
        assert_abs_diff_eq!(s.variances[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.variances[1], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.pooled_ss, 2.0 + 8.0, epsilon = 1e-14);
        assert_eq!(s.means, vec![2.0, 4.0]);

        let s = summarize(&sample(&[&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0]]));
        assert_eq!(s.medians[0], 2.5);

        let s = summarize(&sample(&[&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]]));
        assert_eq!(s.variances, vec![0.0, 1.0]);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn streaming_moments_survive_large_offset() {
        let xs = [1e8 + 0.1, 1e8 - 0.3, 1e8 + 0.5, 1e8 + 1.2, 1e8 - 0.9];
        let m = GroupMoments::from_slice(&xs);
        let ys = [0.1, -0.3, 0.5, 1.2, -0.9];
        let mean = ys.iter().sum::<f64>() / 5.0;
        let m2: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        let m4: f64 = ys.iter().map(|y| (y - mean).powi(4)).sum();
        assert!((m.sum_sq() - m2).abs() < 1e-6 * m2);
        assert!((m.sum_fourth() - m4).abs() < 1e-6 * m4);
    }

    #[test]
    fn var_ln_s2_substitution() {
        assert_abs_diff_eq!(var_ln_s2(3.0, 10.0), 23.0 / 90.0, epsilon = 1e-15);
        assert_abs_diff_eq!(harmonic_mean(&[5, 10]), 20.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_pooled_variance_is_degenerate() {
        let g = sample(&[&[1.0, 1.0], &[2.0, 2.0]]);
        assert!(matches!(
            estimate_moments(&g, SizeMode::PerGroup),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(
            log_contrasts(&[1.0, 1.0, 1.0]).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
        let e = log_contrasts(&[4.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e[0], 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(e[1], -(2f64.ln()), epsilon = 1e-15);
        assert!(matches!(
            log_contrasts(&[0.0, 1.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn eta_lambda_rejects_constant_group() {
        let g = sample(&[&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]]);
        assert!(matches!(eta_lambda(&g), Err(Error::Degenerate(_))));
    }
}
