//! File formats and report rendering behind the `varhom` command-line tool.
//!
//! * Data CSV: header `group,value`, one observation per row. Groups are
//!   ordered by first appearance.
//! * Config JSON: one object (or an array of objects) with keys
//!   `distribution, sizes, variances, alpha, replications, bootstrap_b, seed, tests`.
//!   Unknown keys are rejected.
//! * Simulation CSV: `distribution,sizes,variances,test,rate,se,errors,seed`,
//!   one row per test per cell, list fields joined with `;`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::descriptive::GroupedSample;
use crate::dirichlet::NormalTheoryBox;
use crate::error::{Error, Result};
use crate::homogeneity::{Method, Statistic, TestResult};
use crate::rng::DistributionKind;
use crate::simulation::{CellEstimate, ExperimentConfig};

/// Observations grouped by label, in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub labels: Vec<String>,
    pub sample: GroupedSample,
}

pub fn read_data_csv<R: Read>(reader: R) -> Result<DataFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidInput(format!("cannot read header: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "group" || &headers[1] != "value" {
        return Err(Error::InvalidInput(format!(
            "expected header `group,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let row = line + 2;
        let record = record.map_err(|e| Error::InvalidInput(format!("row {row}: {e}")))?;
        if record.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "row {row}: expected 2 fields, got {}",
                record.len()
            )));
        }
        let label = &record[0];
        let value: f64 = record[1].parse().map_err(|_| {
            Error::InvalidInput(format!("row {row}: `{}` is not a number", &record[1]))
        })?;
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "row {row}: value must be finite"
            )));
        }
        match labels.iter().position(|l| l == label) {
            Some(i) => groups[i].push(value),
            None => {
                labels.push(label.to_string());
                groups.push(vec![value]);
            }
        }
    }
    if labels.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "at least 2 groups are required, found {}",
            labels.len()
        )));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::InvalidInput(format!(
            "group `{}` has {} observation(s); at least 2 are required",
            labels[i],
            groups[i].len()
        )));
    }
    Ok(DataFile {
        labels,
        sample: GroupedSample::new(groups)?,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigEntry {
    distribution: String,
    sizes: Vec<usize>,
    #[serde(default)]
    variances: Option<Vec<f64>>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    replications: Option<usize>,
    #[serde(default)]
    bootstrap_b: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    tests: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ConfigDocument {
    One(ConfigEntry),
    Many(Vec<ConfigEntry>),
}

/// Fallbacks for keys a config entry leaves out.
#[derive(Debug, Clone)]
pub struct ConfigDefaults {
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub pivot_variant: bool,
}

impl Default for ConfigDefaults {
    fn default() -> Self {
        Self {
            alpha: ExperimentConfig::DEFAULT_ALPHA,
            bootstrap_b: ExperimentConfig::DEFAULT_B,
            seed: 1,
            pivot_variant: false,
        }
    }
}

pub fn parse_config(text: &str, defaults: &ConfigDefaults) -> Result<Vec<ExperimentConfig>> {
    let doc: ConfigDocument = serde_json::from_str(text).map_err(|e| {
        // The untagged wrapper hides field-level messages; retry each shape for a useful one.
        let detail = serde_json::from_str::<ConfigEntry>(text)
            .err()
            .or_else(|| serde_json::from_str::<Vec<ConfigEntry>>(text).err())
            .map_or_else(|| e.to_string(), |d| d.to_string());
        Error::InvalidInput(format!("invalid config: {detail}"))
    })?;
    let entries = match doc {
        ConfigDocument::One(e) => vec![e],
        ConfigDocument::Many(v) => v,
    };
    if entries.is_empty() {
        return Err(Error::InvalidInput("config contains no experiments".into()));
    }
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let cfg = entry_to_config(e, defaults).map_err(|err| {
                Error::InvalidInput(format!("experiment {}: {}", i + 1, strip(&err)))
            })?;
            cfg.validate().map_err(|err| {
                Error::InvalidInput(format!("experiment {}: {}", i + 1, strip(&err)))
            })?;
            Ok(cfg)
        })
        .collect()
}

fn strip(err: &Error) -> String {
    match err {
        Error::InvalidInput(m) => m.clone(),
        other => other.to_string(),
    }
}

fn entry_to_config(e: ConfigEntry, d: &ConfigDefaults) -> Result<ExperimentConfig> {
    let distribution: DistributionKind = e.distribution.parse().map_err(|_| {
        Error::InvalidInput(format!(
            "distribution: unknown distribution `{}`",
            e.distribution
        ))
    })?;
    let tests = match e.tests {
        None => Method::ALL.to_vec(),
        Some(t) => t
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::InvalidInput(format!("tests: unknown test `{s}`")))
            })
            .collect::<Result<Vec<Method>>>()?,
    };
    Ok(ExperimentConfig {
        distribution,
        variances: e.variances.unwrap_or_else(|| vec![1.0; e.sizes.len()]),
        sizes: e.sizes,
        alpha: e.alpha.unwrap_or(d.alpha),
        replications: e
            .replications
            .unwrap_or(ExperimentConfig::DEFAULT_REPLICATIONS),
        bootstrap_b: e.bootstrap_b.unwrap_or(d.bootstrap_b),
        master_seed: e.seed.unwrap_or(d.seed),
        tests,
        pivot_variant: d.pivot_variant,
    })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

pub const SIMULATION_HEADER: [&str; 8] = [
    "distribution",
    "sizes",
    "variances",
    "test",
    "rate",
    "se",
    "errors",
    "seed",
];

pub fn write_cells_csv<W: Write>(cells: &[CellEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Usage(format!("cannot write output: {e}"));
    w.write_record(SIMULATION_HEADER).map_err(io)?;
    for c in cells {
        for e in &c.estimates {
            w.write_record([
                c.config.distribution.name().to_string(),
                join(&c.config.sizes),
                join(&c.config.variances),
                e.method.code().to_string(),
                e.rate.to_string(),
                e.se.to_string(),
                e.errors.to_string(),
                c.config.master_seed.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Usage(format!("cannot write output: {e}")))
}

/// Markdown size/power tables: one
/// table per variance configuration, one block per sample-size combination,
/// tests as rows and distributions as columns, with a row average.
pub fn render_pivot(cells: &[CellEstimate]) -> String {
    let mut out = String::new();
    let mut variance_sets: Vec<Vec<f64>> = Vec::new();
    for c in cells {
        if !variance_sets.contains(&c.config.variances) {
            variance_sets.push(c.config.variances.clone());
        }
    }
    for vs in &variance_sets {
        let subset: Vec<&CellEstimate> =
            cells.iter().filter(|c| &c.config.variances == vs).collect();
        let mut dists: Vec<DistributionKind> = Vec::new();
        let mut size_sets: Vec<Vec<usize>> = Vec::new();
        let mut methods: Vec<Method> = Vec::new();
        for c in &subset {
            if !dists.contains(&c.config.distribution) {
                dists.push(c.config.distribution);
            }
            if !size_sets.contains(&c.config.sizes) {
                size_sets.push(c.config.sizes.clone());
            }
            for e in &c.estimates {
                if !methods.contains(&e.method) {
                    methods.push(e.method);
                }
            }
        }
        dists.sort_by_key(|d| DistributionKind::ALL.iter().position(|x| x == d));
        out.push_str(&format!(
            "variances = ({})\n\n",
            join(vs).replace(';', ", ")
        ));
        out.push_str("| sizes | test |");
        for d in &dists {
            out.push_str(&format!(" {} |", d.label()));
        }
        out.push_str(" Average |\n|---|---|");
        for _ in 0..=dists.len() {
            out.push_str("---|");
        }
        out.push('\n');
        for sizes in &size_sets {
            for m in &methods {
                out.push_str(&format!(
                    "| ({}) | {} |",
                    join(sizes).replace(';', ", "),
                    m.code()
                ));
                let mut sum = 0.0;
                let mut count = 0;
                for d in &dists {
                    let rate = subset
                        .iter()
                        .find(|c| &c.config.sizes == sizes && c.config.distribution == *d)
                        .and_then(|c| c.rate(*m));
                    match rate {
                        Some(r) if !r.is_nan() => {
                            sum += r;
                            count += 1;
                            out.push_str(&format!(" {r:.2} |"));
                        }
                        _ => out.push_str(" - |"),
                    }
                }
                if count > 0 {
                    out.push_str(&format!(" {:.2} |\n", sum / count as f64));
                } else {
                    out.push_str(" - |\n");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Output of `varhom test --format json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub groups: Vec<String>,
    pub sizes: Vec<usize>,
    pub results: Vec<TestResult>,
    pub errors: Vec<TestFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFailure {
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidInput(format!("unknown format `{other}`"))),
        }
    }
}

fn statistic_text(s: &Statistic) -> String {
    match s {
        Statistic::Scalar(x) => format!("{x:.6}"),
        Statistic::Vector(v) => v
            .iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub fn render_report(report: &TestReport, format: Format) -> Result<String> {
    match format {
        Format::Json => serde_json::to_string_pretty(report)
            .map(|s| s + "\n")
            .map_err(|e| Error::Usage(format!("cannot serialize report: {e}"))),
        Format::Csv => {
            let mut s = String::from("test,statistic,critical_value,p_value,reject,alpha\n");
            for r in &report.results {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.method.code(),
                    statistic_text(&r.statistic),
                    opt(r.critical_value),
                    opt(r.p_value),
                    r.reject,
                    r.alpha
                ));
            }
            Ok(s)
        }
        Format::Text => {
            let mut s = format!(
                "groups: {} (sizes {})\n",
                report.groups.join(", "),
                report
                    .sizes
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            s.push_str(&format!(
                "{:<4} {:>28} {:>12} {:>10}  decision\n",
                "test", "statistic", "critical", "p-value"
            ));
            for r in &report.results {
                s.push_str(&format!(
                    "{:<4} {:>28} {:>12} {:>10}  {}\n",
                    r.method.code(),
                    statistic_text(&r.statistic),
                    opt(r.critical_value),
                    opt(r.p_value),
                    if r.reject { "reject" } else { "accept" }
                ));
            }
            Ok(s)
        }
    }
}

pub fn render_critical(
    sizes: &[usize],
    alpha: f64,
    b: &NormalTheoryBox,
    format: Format,
) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        sizes: &'a [usize],
        alpha: f64,
        draws: usize,
        theta: &'a [f64],
        lambda: &'a [f64],
        nu_offsets: &'a [f64],
        c: f64,
        c_se: f64,
        coverage: f64,
    }
    let doc = Doc {
        sizes,
        alpha,
        draws: b.draws,
        theta: &b.theta,
        lambda: &b.lambda,
        nu_offsets: &b.nu_offsets,
        c: b.c,
        c_se: b.c_se,
        coverage: b.coverage,
    };
    match format {
        Format::Json => serde_json::to_string_pretty(&doc)
            .map(|s| s + "\n")
            .map_err(|e| Error::Usage(format!("cannot serialize report: {e}"))),
        Format::Csv => {
            let mut s = String::from("group,size,theta,lambda,nu_offset\n");
            for (i, n) in sizes.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    i + 1,
                    n,
                    b.theta[i],
                    b.lambda[i],
                    b.nu_offsets[i]
                ));
            }
            s.push_str(&format!(
                "# c={},c_se={},coverage={},draws={}\n",
                b.c, b.c_se, b.coverage, b.draws
            ));
            Ok(s)
        }
        Format::Text => {
            let mut s = format!("sizes: {sizes:?}  alpha: {alpha}  draws: {}\n", b.draws);
            s.push_str("group        theta       lambda\n");
            for i in 0..sizes.len() {
                s.push_str(&format!(
                    "{:<5} {:>12.6} {:>12.6}\n",
                    i + 1,
                    b.theta[i],
                    b.lambda[i]
                ));
            }
            s.push_str(&format!(
                "c = {:.6} (se {:.6}, 3se {:.6})\ncoverage = {:.6}\n",
                b.c,
                b.c_se,
                3.0 * b.c_se,
                b.coverage
            ));
            Ok(s)
        }
    }
}
