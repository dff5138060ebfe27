//! Monte Carlo estimation of test size and power.
//!
//! Each replication draws one dataset (group `i` is `sigma_i` times a
//! unit-variance sample of size `n_i`) and applies every selected test to it.
//! All randomness comes from streams keyed by
//! `(master_seed, cell_index, replication, slot)`, so results do not depend on
//! the number of threads or on scheduling.

use rayon::prelude::*;

use crate::descriptive::GroupedSample;
use crate::error::{Error, Result};
use crate::homogeneity::{run_method, stream_slot, BootstrapConfig, Method};
use crate::rng::{mix_seed, sample_standardized, DistributionKind, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub distribution: DistributionKind,
    pub sizes: Vec<usize>,
    pub variances: Vec<f64>,
    pub alpha: f64,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub master_seed: u64,
    pub tests: Vec<Method>,
    pub pivot_variant: bool,
}

impl ExperimentConfig {
    pub const DEFAULT_ALPHA: f64 = 0.05;
    pub const DEFAULT_REPLICATIONS: usize = 1000;
    pub const DEFAULT_B: usize = 500;

    /// A cell with the default level, replication count, bootstrap size and
    /// all four tests.
    pub fn new(
        distribution: DistributionKind,
        sizes: Vec<usize>,
        variances: Vec<f64>,
        master_seed: u64,
    ) -> Self {
        Self {
            distribution,
            sizes,
            variances,
            alpha: Self::DEFAULT_ALPHA,
            replications: Self::DEFAULT_REPLICATIONS,
            bootstrap_b: Self::DEFAULT_B,
            master_seed,
            tests: Method::ALL.to_vec(),
            pivot_variant: false,
        }
    }

    pub fn with_tests(mut self, tests: &[Method]) -> Self {
        self.tests = tests.to_vec();
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.sizes.len() < 2 {
            return bad(format!(
                "at least 2 groups are required, got {}",
                self.sizes.len()
            ));
        }
        if self.sizes.len() != self.variances.len() {
            return bad(format!(
                "sizes has {} entries but variances has {}",
                self.sizes.len(),
                self.variances.len()
            ));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
            return bad(format!("group sizes must be >= 2, got {n}"));
        }
        if let Some(v) = self
            .variances
            .iter()
            .find(|v| !(**v > 0.0 && v.is_finite()))
        {
            return bad(format!("variances must be positive and finite, got {v}"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.bootstrap_b == 0 {
            return bad("bootstrap_b must be >= 1".into());
        }
        if self.tests.is_empty() {
            return bad("no tests selected".into());
        }
        Ok(())
    }

    /// True when every group variance is equal (a size experiment).
    pub fn is_null(&self) -> bool {
        self.variances.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestEstimate {
    pub method: Method,
    pub rejections: usize,
    /// Replications in which the test produced a decision.
    pub valid: usize,
    pub errors: usize,
    pub rate: f64,
    pub se: f64,
}

impl TestEstimate {
    fn from_counts(method: Method, rejections: usize, valid: usize, errors: usize) -> Self {
        let rate = if valid == 0 {
            f64::NAN
        } else {
            rejections as f64 / valid as f64
        };
        Self {
            method,
            rejections,
            valid,
            errors,
            rate,
            se: standard_error(rate, valid),
        }
    }
}

/// `sqrt(p (1 - p) / r)`.
pub fn standard_error(rate: f64, replications: usize) -> f64 {
    (rate * (1.0 - rate) / replications as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellEstimate {
    pub config: ExperimentConfig,
    pub estimates: Vec<TestEstimate>,
}

impl CellEstimate {
    pub fn get(&self, method: Method) -> Option<&TestEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }

    pub fn rate(&self, method: Method) -> Option<f64> {
        self.get(method).map(|e| e.rate)
    }
}

fn replication_key(master_seed: u64, cell_index: u64, replication: u64) -> u64 {
    mix_seed(mix_seed(master_seed, cell_index), replication)
}

/// Dataset of replication `replication` of cell `cell_index`.
pub fn simulate_dataset(
    cfg: &ExperimentConfig,
    cell_index: u64,
    replication: u64,
) -> GroupedSample {
    let key = replication_key(cfg.master_seed, cell_index, replication);
    let mut rng = RngStream::new(key, 0);
    let groups = cfg
        .sizes
        .iter()
        .zip(&cfg.variances)
        .map(|(&n, &v)| {
            let sd = v.sqrt();
            sample_standardized(cfg.distribution, n, &mut rng)
                .expect("validated sizes are positive")
                .into_iter()
                .map(|x| sd * x)
                .collect()
        })
        .collect();
    GroupedSample::new(groups).expect("validated configuration")
}

fn run_replication(cfg: &ExperimentConfig, cell_index: u64, replication: u64) -> Vec<Option<bool>> {
    let data = simulate_dataset(cfg, cell_index, replication);
    let key = replication_key(cfg.master_seed, cell_index, replication);
    cfg.tests
        .iter()
        .map(|&m| {
            let stream = RngStream::new(key, stream_slot(m) + 1);
            let boot = BootstrapConfig {
                replicates: cfg.bootstrap_b,
                stream,
                pivot_variant: cfg.pivot_variant,
            };
            run_method(m, &data, cfg.alpha, &boot)
                .ok()
                .map(|r| r.reject)
        })
        .collect()
}

fn run_cell_indexed(cfg: &ExperimentConfig, cell_index: u64) -> Result<CellEstimate> {
    cfg.validate()?;
    let outcomes: Vec<Vec<Option<bool>>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(cfg, cell_index, r))
        .collect();
    let estimates = cfg
        .tests
        .iter()
        .enumerate()
        .map(|(slot, &m)| {
            let mut rejections = 0;
            let mut valid = 0;
            let mut errors = 0;
            for rep in &outcomes {
                match rep[slot] {
                    Some(true) => {
                        rejections += 1;
                        valid += 1;
                    }
                    Some(false) => valid += 1,
                    None => errors += 1,
                }
            }
            TestEstimate::from_counts(m, rejections, valid, errors)
        })
        .collect();
    Ok(CellEstimate {
        config: cfg.clone(),
        estimates,
    })
}

/// Rejection rates for one cell. Equivalent to the first entry of a
/// single-cell [`run_grid`].
pub fn run_cell(cfg: &ExperimentConfig) -> Result<CellEstimate> {
    run_cell_indexed(cfg, 0)
}

/// Runs every cell on the current rayon pool; output order matches input order.
pub fn run_grid(cells: &[ExperimentConfig]) -> Result<Vec<Result<CellEstimate>>> {
    if cells.is_empty() {
        return Err(Error::InvalidInput("empty experiment grid".into()));
    }
    Ok(cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| run_cell_indexed(c, i as u64))
        .collect())
}

/// [`run_grid`] on a dedicated pool of `threads` workers.
pub fn run_grid_with_threads(
    cells: &[ExperimentConfig],
    threads: usize,
) -> Result<Vec<Result<CellEstimate>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("could not start thread pool: {e}")))?;
    pool.install(|| run_grid(cells))
}

/// Mean of the rejection rates of two cells whose variance vectors are
/// reverses of each other.
pub fn averaged_power(a: &CellEstimate, b: &CellEstimate) -> Result<CellEstimate> {
    let (ca, cb) = (&a.config, &b.config);
    let reversed: Vec<f64> = cb.variances.iter().rev().copied().collect();
    let same_design = ca.distribution == cb.distribution
        && ca.sizes == cb.sizes
        && ca.alpha == cb.alpha
        && ca.tests == cb.tests
        && ca.variances == reversed;
    if !same_design {
        return Err(Error::Usage(
            "averaged power needs two cells that differ only by reversed variances".into(),
        ));
    }
    let estimates = a
        .estimates
        .iter()
        .zip(&b.estimates)
        .map(|(x, y)| TestEstimate {
            method: x.method,
            rejections: x.rejections + y.rejections,
            valid: x.valid + y.valid,
            errors: x.errors + y.errors,
            rate: 0.5 * (x.rate + y.rate),
            se: 0.5 * (x.se * x.se + y.se * y.se).sqrt(),
        })
        .collect();
    Ok(CellEstimate {
        config: ca.clone(),
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRobustness {
    pub method: Method,
    pub max_size: f64,
    /// Index of the cell attaining the maximum.
    pub worst_cell: usize,
    pub robust: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub alpha: f64,
    pub tests: Vec<TestRobustness>,
}

impl RobustnessReport {
    pub fn get(&self, method: Method) -> Option<&TestRobustness> {
        self.tests.iter().find(|t| t.method == method)
    }
}

/// Maximum estimated size per test over null cells; a test is robust when the
/// maximum stays below `2 alpha`.
pub fn robustness(cells: &[CellEstimate], alpha: f64) -> Result<RobustnessReport> {
    if cells.is_empty() {
        return Err(Error::Usage("no cells to assess".into()));
    }
    if let Some(c) = cells.iter().find(|c| !c.config.is_null()) {
        return Err(Error::Usage(format!(
            "robustness needs null cells, found variances {:?}",
            c.config.variances
        )));
    }
    let mut methods: Vec<Method> = Vec::new();
    for c in cells {
        for e in &c.estimates {
            if !methods.contains(&e.method) {
                methods.push(e.method);
            }
        }
    }
    let tests = methods
        .into_iter()
        .map(|m| {
            let (worst_cell, max_size) = cells
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.rate(m).filter(|r| !r.is_nan()).map(|r| (i, r)))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
            TestRobustness {
                method: m,
                max_size,
                worst_cell,
                robust: max_size < 2.0 * alpha,
            }
        })
        .collect();
    Ok(RobustnessReport { alpha, tests })
}

/// The two-group null grid: six sample-size combinations by six distributions.
pub const K1_SIZES: [&[usize]; 6] = [&[5, 5], &[10, 10], &[15, 15], &[5, 10], &[7, 15], &[10, 15]];

/// Cells for every `(sizes, distribution)` pair, sizes outermost.
pub fn grid(
    sizes: &[&[usize]],
    variances: &[f64],
    master_seed: u64,
    template: &ExperimentConfig,
) -> Vec<ExperimentConfig> {
    let mut cells = Vec::new();
    for s in sizes {
        for d in DistributionKind::ALL {
            cells.push(ExperimentConfig {
                distribution: d,
                sizes: s.to_vec(),
                variances: if variances.is_empty() {
                    vec![1.0; s.len()]
                } else {
                    variances.to_vec()
                },
                master_seed,
                ..template.clone()
            });
        }
    }
    cells
}

/// The 36-cell two-group null grid with default level and replication counts.
pub fn k1_null_grid(master_seed: u64) -> Vec<ExperimentConfig> {
    let template = ExperimentConfig::new(DistributionKind::Normal, vec![], vec![], master_seed);
    grid(&K1_SIZES, &[], master_seed, &template)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            replications: 40,
            bootstrap_b: 30,
            ..ExperimentConfig::new(DistributionKind::Normal, vec![6, 8], vec![1.0, 1.0], seed)
        }
    }

    #[test]
    fn validation() {
        let mut c = small(1);
        c.variances = vec![1.0];
        assert!(run_cell(&c).is_err());
        let mut c = small(1);
        c.variances = vec![1.0, 0.0];
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.sizes = vec![1, 5];
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.tests.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let c = small(11);
        assert_eq!(run_cell(&c).unwrap(), run_cell(&c).unwrap());
        let a = run_grid_with_threads(std::slice::from_ref(&c), 1).unwrap();
        let b = run_grid_with_threads(std::slice::from_ref(&c), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].as_ref().unwrap(), &run_cell(&c).unwrap());
    }

    #[test]
    fn standard_error_formula() {
        let e = run_cell(&small(3)).unwrap();
        for t in &e.estimates {
            assert_eq!(t.se, (t.rate * (1.0 - t.rate) / t.valid as f64).sqrt());
            assert_eq!(t.valid + t.errors, 40);
        }
    }

    #[test]
    fn alpha_one_always_rejects() {
        let mut c = small(5);
        c.alpha = 1.0;
        let e = run_cell(&c).unwrap();
        for t in &e.estimates {
            assert_eq!(t.rate, 1.0, "{}", t.method);
        }
    }

    #[test]
    fn dataset_scaling() {
        let mut c = small(5);
        c.variances = vec![1.0, 4.0];
        let d = simulate_dataset(&c, 0, 3);
        let mut u = small(5);
        u.variances = vec![1.0, 1.0];
        let e = simulate_dataset(&u, 0, 3);
        for (x, y) in d.groups()[1].iter().zip(&e.groups()[1]) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
        assert_eq!(d.groups()[0], e.groups()[0]);
    }

    fn fake(variances: Vec<f64>, rates: &[(Method, f64)]) -> CellEstimate {
        let mut config = small(1);
        config.variances = variances;
        config.tests = rates.iter().map(|r| r.0).collect();
        CellEstimate {
            config,
            estimates: rates
                .iter()
                .map(|&(m, r)| TestEstimate {
                    method: m,
                    rejections: 0,
                    valid: 1000,
                    errors: 0,
                    rate: r,
                    se: standard_error(r, 1000),
                })
                .collect(),
        }
    }

    #[test]
    fn averaging() {
        let a = fake(vec![1.0, 16.0], &[(Method::BoxT, 0.6)]);
        let b = fake(vec![16.0, 1.0], &[(Method::BoxT, 0.8)]);
        let ab = averaged_power(&a, &b).unwrap();
        let ba = averaged_power(&b, &a).unwrap();
        assert!((ab.rate(Method::BoxT).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(ab.rate(Method::BoxT), ba.rate(Method::BoxT));
        let c = fake(vec![1.0, 10.0], &[(Method::BoxT, 0.8)]);
        assert!(averaged_power(&a, &c).is_err());
    }

    #[test]
    fn robustness_flag() {
        let cells = vec![
            fake(
                vec![1.0, 1.0],
                &[(Method::Shoemaker, 0.13), (Method::BoxT, 0.08)],
            ),
            fake(
                vec![1.0, 1.0],
                &[(Method::Shoemaker, 0.05), (Method::BoxT, 0.04)],
            ),
        ];
        let r = robustness(&cells, 0.05).unwrap();
        let s = r.get(Method::Shoemaker).unwrap();
        assert_eq!(s.max_size, 0.13);
        assert_eq!(s.worst_cell, 0);
        assert!(!s.robust);
        assert!(r.get(Method::BoxT).unwrap().robust);
        assert!(robustness(&[], 0.05).is_err());
        let alt = vec![fake(vec![1.0, 10.0], &[(Method::BoxT, 0.5)])];
        assert!(robustness(&alt, 0.05).is_err());
    }

    #[test]
    fn null_grid_layout() {
        let g = k1_null_grid(7);
        assert_eq!(g.len(), 36);
        assert!(g.iter().all(ExperimentConfig::is_null));
        assert_eq!(g[0].sizes, vec![5, 5]);
        assert_eq!(g[0].distribution, DistributionKind::Uniform);
        assert_eq!(g[35].sizes, vec![10, 15]);
        assert_eq!(g[35].distribution, DistributionKind::Exponential);
    }
}
