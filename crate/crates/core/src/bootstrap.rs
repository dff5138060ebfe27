//! Resampling primitives and the box-region critical value search.

use crate::descriptive::GroupedSample;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Draws `n_i` values with replacement from each group independently.
pub fn resample_within_groups(data: &GroupedSample, rng: &mut RngStream) -> GroupedSample {
    let groups = data
        .groups()
        .iter()
        .map(|g| (0..g.len()).map(|_| g[rng.index(g.len())]).collect())
        .collect();
    GroupedSample::from_validated(groups)
}

/// Draws `sum(sizes)` values with replacement from `pool` and splits them into
/// contiguous blocks, the first `sizes[0]` to group 1 and so on.
pub fn resample_pooled(
    pool: &[f64],
    sizes: &[usize],
    rng: &mut RngStream,
) -> Result<GroupedSample> {
    if pool.is_empty() {
        return Err(Error::Usage("residual pool is empty".into()));
    }
    if sizes.len() < 2 || sizes.iter().any(|&n| n < 2) {
        return Err(Error::Usage(format!(
            "pooled resampling needs at least 2 groups of size >= 2, got {sizes:?}"
        )));
    }
    let groups = sizes
        .iter()
        .map(|&n| (0..n).map(|_| pool[rng.index(pool.len())]).collect())
        .collect();
    Ok(GroupedSample::from_validated(groups))
}

/// Smoothed-bootstrap jitter: `sqrt(12/13) * (x + q U)` with `U ~ Uniform(-1/2, 1/2)`.
pub fn smooth(values: &[f64], q: f64, rng: &mut RngStream) -> Vec<f64> {
    debug_assert!(q >= 0.0);
    let shrink = (12.0f64 / 13.0).sqrt();
    values
        .iter()
        .map(|&x| shrink * (x + q * (rng.uniform_open() - 0.5)))
        .collect()
}

/// `B` bootstrap replicate vectors of common width `K + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMatrix {
    rows: Vec<Vec<f64>>,
    width: usize,
}

impl ReplicateMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Usage("replicate rows have unequal lengths".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite bootstrap replicate".into()));
        }
        Ok(Self { rows, width })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.width == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn col_means(&self) -> Vec<f64> {
        let b = self.rows.len() as f64;
        let mut means = vec![0.0; self.width];
        for row in &self.rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= b);
        means
    }

    /// Fraction of rows whose every coordinate lies in `[-c, c]`.
    pub fn coverage(&self, c: f64) -> f64 {
        let inside = self.rows.iter().filter(|r| row_max_abs(r) <= c).count();
        inside as f64 / self.rows.len() as f64
    }
}

fn row_max_abs(row: &[f64]) -> f64 {
    row.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Reference point subtracted from every replicate row.
#[derive(Debug, Clone, Copy)]
pub enum CenterMode<'a> {
    /// Per-coordinate bootstrap means.
    BootstrapMean,
    /// A fixed vector, typically the observed statistic.
    Observed(&'a [f64]),
}

pub fn center(matrix: &ReplicateMatrix, mode: CenterMode<'_>) -> Result<ReplicateMatrix> {
    if matrix.is_empty() {
        return Err(Error::Usage(
            "cannot center an empty replicate matrix".into(),
        ));
    }
    let offset = match mode {
        CenterMode::BootstrapMean => matrix.col_means(),
        CenterMode::Observed(obs) => {
            if obs.len() != matrix.width {
                return Err(Error::Usage(format!(
                    "observed vector has length {}, replicates have width {}",
                    obs.len(),
                    matrix.width
                )));
            }
            obs.to_vec()
        }
    };
    let rows = matrix
        .rows
        .iter()
        .map(|r| r.iter().zip(&offset).map(|(x, o)| x - o).collect())
        .collect();
    Ok(ReplicateMatrix {
        rows,
        width: matrix.width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSearchResult {
    pub c_star: f64,
    pub coverage: f64,
    /// Zero-based position of `c_star` in the descending list of all
    /// `B (K + 1)` absolute entries (last occurrence when tied).
    pub index: usize,
}

/// Number of rows a box must contain to reach coverage `1 - alpha`.
pub(crate) fn required_rows(rows: usize, alpha: f64) -> usize {
    // Guard against 0.95 * 500 evaluating to 475.00000000000006.
    (((1.0 - alpha) * rows as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Smallest absolute centered entry `c` whose symmetric box `[-c, c]^(K+1)`
/// covers at least a `1 - alpha` fraction of the replicate rows.
pub fn search_critical(centered: &ReplicateMatrix, alpha: f64) -> Result<CriticalSearchResult> {
    if centered.is_empty() {
        return Err(Error::Usage(
            "cannot search an empty replicate matrix".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Usage(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let b = centered.len();
    let need = required_rows(b, alpha).max(1);
    // Coverage only changes at row maxima, so the answer is the need-th smallest one.
    let mut maxima: Vec<f64> = centered.rows.iter().map(|r| row_max_abs(r)).collect();
    maxima.sort_by(f64::total_cmp);
    let c_star = maxima[need - 1];
    let inside = maxima.partition_point(|&m| m <= c_star);
    let at_or_above = centered
        .rows
        .iter()
        .flatten()
        .filter(|x| x.abs() >= c_star)
        .count();
    Ok(CriticalSearchResult {
        c_star,
        coverage: inside as f64 / b as f64,
        index: at_or_above - 1,
    })
}
