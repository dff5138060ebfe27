#![allow(dead_code)]

use varhom::bootstrap::ReplicateMatrix;

/// Smallest candidate `c` (zero or some `|x|`) whose box covers at least
/// `1 - alpha` of the rows, by exhaustive scan.
pub fn brute_force_critical(rows: &[Vec<f64>], alpha: f64) -> (f64, f64) {
    let mut candidates: Vec<f64> = std::iter::once(0.0)
        .chain(rows.iter().flatten().map(|x| x.abs()))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let b = rows.len() as f64;
    for c in candidates {
        let inside = rows
            .iter()
            .filter(|r| r.iter().all(|x| x.abs() <= c))
            .count() as f64;
        if inside / b >= 1.0 - alpha - 1e-12 {
            return (c, inside / b);
        }
    }
    unreachable!("the largest |x| always covers every row")
}

pub fn naive_coverage(rows: &[Vec<f64>], c: f64) -> f64 {
    rows.iter()
        .filter(|r| r.iter().all(|x| x.abs() <= c))
        .count() as f64
        / rows.len() as f64
}

pub fn matrix(rows: &[Vec<f64>]) -> ReplicateMatrix {
    ReplicateMatrix::new(rows.to_vec()).unwrap()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn naive_median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// One-way ANOVA F on absolute deviations from group medians.
pub fn naive_levene(groups: &[Vec<f64>]) -> f64 {
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = naive_median(g);
            g.iter().map(|x| (x - m).abs()).collect()
        })
        .collect();
    let n: usize = z.iter().map(Vec::len).sum();
    let k = z.len();
    let grand = z.iter().flatten().sum::<f64>() / n as f64;
    let between: f64 = z
        .iter()
        .map(|g| g.len() as f64 * (mean(g) - grand).powi(2))
        .sum();
    let within: f64 = z
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    (between / (k - 1) as f64) / (within / (n - k) as f64)
}

pub struct NaiveMoments {
    pub mu4: f64,
    pub sigma2: f64,
    pub var_ln: Vec<f64>,
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t: Vec<f64>,
    pub shoemaker: f64,
}

pub fn naive_moments(groups: &[Vec<f64>]) -> NaiveMoments {
    let n: f64 = groups.iter().map(|g| g.len() as f64).sum();
    let k1 = groups.len() as f64;
    let mu4 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(4)).sum::<f64>()
        })
        .sum::<f64>()
        / n;
    let sigma2 = groups
        .iter()
        .map(|g| (g.len() as f64 - 1.0) * sample_var(g))
        .sum::<f64>()
        / n;
    let kappa = mu4 / (sigma2 * sigma2);
    let v = |m: f64| (kappa - (m - 3.0) / m) / (m - 1.0);
    let var_ln: Vec<f64> = groups.iter().map(|g| v(g.len() as f64)).collect();
    let logs: Vec<f64> = groups.iter().map(|g| sample_var(g).ln()).collect();
    let lbar = mean(&logs);
    let eta: Vec<f64> = logs.iter().map(|l| l - lbar).collect();
    let total: f64 = var_ln.iter().sum();
    let lambda: Vec<f64> = var_ln
        .iter()
        .map(|vi| ((1.0 - 2.0 / k1) * vi + total / (k1 * k1)).sqrt())
        .collect();
    let t = eta.iter().zip(&lambda).map(|(e, l)| e / l).collect();
    let h = k1 / groups.iter().map(|g| 1.0 / g.len() as f64).sum::<f64>();
    let shoemaker = eta.iter().map(|e| e * e).sum::<f64>() / v(h);
    NaiveMoments {
        mu4,
        sigma2,
        var_ln,
        eta,
        lambda,
        t,
        shoemaker,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Closed-form marginal density of `w_1` for a two-component Dirichlet.
pub fn w1_density(w: f64, nu1: f64, nu2: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_beta = ln_gamma(nu1) + ln_gamma(nu2) - ln_gamma(nu1 + nu2);
    let nu = nu1 + nu2;
    // log(1 + e^{2w}) computed without overflow
    let softplus = if 2.0 * w > 0.0 {
        2.0 * w + (-2.0 * w).exp().ln_1p()
    } else {
        (2.0 * w).exp().ln_1p()
    };
    (2.0f64.ln() - ln_beta + 2.0 * nu1 * w - nu * softplus).exp()
}

/// Trapezoid cumulative integral of `f` on a uniform grid over `[lo, hi]`.
pub struct GridCdf {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl GridCdf {
    pub fn new(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Self {
        let step = (hi - lo) / (points - 1) as f64;
        let mut values = vec![0.0; points];
        let mut prev = f(lo);
        for i in 1..points {
            let cur = f(lo + i as f64 * step);
            values[i] = values[i - 1] + 0.5 * step * (prev + cur);
            prev = cur;
        }
        Self { lo, step, values }
    }

    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.total();
        }
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Two-sided Kolmogorov distance between a sample and a CDF.
pub fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
