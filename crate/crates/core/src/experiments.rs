//! Monte-Carlo sweeps comparing empirical and asymptotic Frobenius losses over a grid
//! of dimensions `p` and concentrations `c`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frobenius::{asymptotic_summary, FrobeniusReport};
use crate::matrixlab::{mix_seed, reflexive_factor, sample_noise, write_atomic, GramFactor, Noise, Scenario};
use crate::spectrum::SpectrumSpec;

pub const ROW_HEADER: &str = "c_target,c_eff,p,n,replicate,seed,fro_plus_emp,fro_minus_emp,nfl_emp,nfl_asym,trace_minus_emp,precision_estimate";
pub const SUMMARY_HEADER: &str = "c_target,p,mean_nfl,sd_nfl,nfl_asym,n_ok,n_failed";

pub const DEFAULT_REPLICATIONS: usize = 100;

/// Salt mixed into a seed when a replication is retried after a singular Gram matrix.
const RETRY_SALT: u64 = 0x5eed_5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub c_list: Vec<f64>,
    pub p_grid: Vec<usize>,
    pub replications: usize,
    pub spectrum: SpectrumSpec,
    pub noise: Noise,
    pub master_seed: u64,
    pub output_path: PathBuf,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_list.is_empty() || self.p_grid.is_empty() {
            return Err(Error::Validation("c_list and p_grid must be non-empty".into()));
        }
        if let Some(c) = self.c_list.iter().find(|c| !(c.is_finite() && **c > 1.0)) {
            return Err(Error::Validation(format!(
                "concentration c must satisfy c > 1 (got {c})"
            )));
        }
        if self.p_grid.contains(&0) {
            return Err(Error::Validation("p_grid entries must be positive".into()));
        }
        if !self.p_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation("p_grid must be strictly ascending".into()));
        }
        if self.replications == 0 {
            return Err(Error::Validation("replications must be >= 1".into()));
        }
        Ok(())
    }
}

/// Preset design: 20% of eigenvalues at 1, 40% at 3, 40% at 10.
pub fn figure1_preset() -> SweepConfig {
    SweepConfig {
        c_list: vec![1.07, 2.0, 10.0],
        p_grid: (1..=10).map(|k| 50 * k).collect(),
        replications: DEFAULT_REPLICATIONS,
        spectrum: SpectrumSpec::canonicalize(&[(0.2, 1.0), (0.4, 3.0), (0.4, 10.0)])
            .expect("preset spectrum is valid")
            .with_label("figure1"),
        noise: Noise::Gaussian,
        master_seed: 42,
        output_path: PathBuf::from("figure1.csv"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub c_target: f64,
    pub c_eff: f64,
    pub p: usize,
    pub n: usize,
    pub replicate: usize,
    /// Seed actually used (the retry seed if the first draw was singular).
    pub seed: u64,
    pub fro_plus_emp: f64,
    pub fro_minus_emp: f64,
    pub nfl_emp: f64,
    pub nfl_asym: f64,
    pub trace_minus_emp: f64,
    pub precision_estimate: f64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_real(self.c_target),
            fmt_real(self.c_eff),
            self.p,
            self.n,
            self.replicate,
            self.seed,
            fmt_real(self.fro_plus_emp),
            fmt_real(self.fro_minus_emp),
            fmt_real(self.nfl_emp),
            fmt_real(self.nfl_asym),
            fmt_real(self.trace_minus_emp),
            fmt_real(self.precision_estimate),
        )
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn draw(scenario: &Scenario, seed: u64, replicate: usize) -> Result<ResultRow> {
    let model = scenario.covariance();
    let x = sample_noise(scenario.p, scenario.n, scenario.noise, seed)?;
    let y = model.apply_sqrt(&x)?;
    let plus = GramFactor::new(&y)?;
    let minus = reflexive_factor(&model, &x)?;
    let r = FrobeniusReport::from_factors(&model, &plus, &minus)?;
    Ok(ResultRow {
        c_target: scenario.c,
        c_eff: scenario.c_eff,
        p: scenario.p,
        n: scenario.n,
        replicate,
        seed,
        fro_plus_emp: r.fro_plus_emp,
        fro_minus_emp: r.fro_minus_emp,
        nfl_emp: r.nfl_emp,
        nfl_asym: r.nfl_asym,
        trace_minus_emp: r.trace_minus_emp,
        precision_estimate: r.precision_norm_estimate,
    })
}

/// One replication with `Σ = diag(realized spectrum)`. A singular Gram matrix is
/// retried once with a seed derived from the original; a second failure is returned.
pub fn run_replication(scenario: &Scenario, replicate: usize) -> Result<ResultRow> {
    match draw(scenario, scenario.seed, replicate) {
        Err(Error::SingularGram { .. }) => draw(scenario, mix_seed(&[scenario.seed, RETRY_SALT]), replicate),
        other => other,
    }
}

/// Seed of one replication; independent of execution order.
pub fn replication_seed(master_seed: u64, c_index: usize, p: usize, replicate: usize) -> u64 {
    mix_seed(&[master_seed, c_index as u64, p as u64, replicate as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedReplication {
    pub c_target: f64,
    pub p: usize,
    pub replicate: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub c_target: f64,
    pub p: usize,
    /// NaN when no replication succeeded.
    pub mean_nfl: f64,
    /// Sample standard deviation; NaN with fewer than two successes.
    pub sd_nfl: f64,
    pub nfl_asym: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            fmt_real(self.c_target),
            self.p,
            fmt_real(self.mean_nfl),
            fmt_real(self.sd_nfl),
            fmt_real(self.nfl_asym),
            self.n_ok,
            self.n_failed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by `(c, p, replicate)`.
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailedReplication>,
    pub summary: Vec<SummaryRow>,
    /// Cells whose realized `p/n` is far from the target `c`.
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn rows_csv(&self) -> String {
        let mut out = String::with_capacity(256 * (self.rows.len() + 1));
        out.push_str(ROW_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.to_csv());
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for row in &self.summary {
            let _ = writeln!(out, "{}", row.to_csv());
        }
        out
    }

    /// Writes the rows to `path` and the summary to [`summary_path`]`(path)`.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.rows_csv().as_bytes())?;
        write_atomic(&summary_path(path), self.summary_csv().as_bytes())
    }
}

/// `dir/name.csv` becomes `dir/name_summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_summary.{}", ext.to_string_lossy()),
        None => format!("{stem}_summary"),
    };
    path.with_file_name(name)
}

/// Runs every `(c, p, replicate)` cell on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for (ci, &c) in config.c_list.iter().enumerate() {
        for &p in &config.p_grid {
            let scenario = Scenario::new(p, c, config.spectrum.clone(), config.noise, 0)?;
            warnings.extend(scenario.warning());
            let nfl_asym = asymptotic_summary(scenario.c_eff, &scenario.covariance().spectrum())?.nfl;
            cells.push((ci, scenario, nfl_asym));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|cell| (0..config.replications).map(move |r| (cell, r)))
        .collect();
    let outcomes: Vec<Result<ResultRow>> = jobs
        .par_iter()
        .map(|&(cell, r)| {
            let (ci, scenario, _) = &cells[cell];
            let seed = replication_seed(config.master_seed, *ci, scenario.p, r);
            run_replication(&scenario.with_seed(seed), r)
        })
        .collect();

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let mut summary = Vec::with_capacity(cells.len());
    let mut outcomes = outcomes.into_iter();
    for (ci, scenario, nfl_asym) in &cells {
        let mut nfls = Vec::with_capacity(config.replications);
        for r in 0..config.replications {
            match outcomes.next().expect("one outcome per job") {
                Ok(row) => {
                    nfls.push(row.nfl_emp);
                    rows.push(row);
                }
                Err(e @ (Error::SingularGram { .. } | Error::Conditioning { .. })) => {
                    failures.push(FailedReplication {
                        c_target: scenario.c,
                        p: scenario.p,
                        replicate: r,
                        seed: replication_seed(config.master_seed, *ci, scenario.p, r),
                        reason: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        let (mean_nfl, sd_nfl) = mean_sd(&nfls);
        summary.push(SummaryRow {
            c_target: scenario.c,
            p: scenario.p,
            mean_nfl,
            sd_nfl,
            nfl_asym: *nfl_asym,
            n_ok: nfls.len(),
            n_failed: config.replications - nfls.len(),
        });
    }
    Ok(SweepResult {
        rows,
        failures,
        summary,
        warnings,
    })
}

/// [`run_sweep`] on a dedicated pool of `threads` workers; results do not depend on it.
pub fn run_sweep_with_threads(config: &SweepConfig, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_sweep(config))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
