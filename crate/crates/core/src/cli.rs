//! Command-line front end. [`run`] parses arguments, dispatches, and maps errors to
//! exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, ErrorKind, Result};
use crate::experiments::{figure1_preset, fmt_real, run_sweep, run_sweep_with_threads, summary_path, SweepConfig, SweepResult};
use crate::frobenius::{asymptotic_summary, corollary_equivalents, nfl_from_norms, precision_fro_from_moments};
use crate::matrixlab::{read_matrix, reflexive_factor, write_atomic, CovarianceModel, GramFactor, Noise};
use crate::spectrum::SpectrumSpec;
use crate::stieltjes::{density_grid, grid_mass, solve, SolverOptions, Transform, DEFAULT_EPSILON, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "geninv", version, about = "Generalized inverses of singular sample covariance matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo sweep over concentrations and dimensions.
    Sweep(SweepArgs),
    /// Limiting Frobenius norms and NFL for a population spectrum.
    Asymptotic(AsymptoticArgs),
    /// Solve one limiting Stieltjes transform at a complex point.
    Stieltjes(StieltjesArgs),
    /// Limiting spectral density on a grid.
    Density(DensityArgs),
    /// Data-only functionals of a p x n observation matrix.
    Estimate(EstimateArgs),
    /// Preset sweep over a three-level spectrum (c = 1.07, 2, 10; p = 50..500).
    Figure1(Figure1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML file with any of: c_list, p_grid, replications, spectrum, noise, seed, out, threads.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated concentrations, e.g. `1.07,2,10`.
    #[arg(long)]
    c_list: Option<String>,
    /// Comma-separated dimensions or `start:stop:step`.
    #[arg(long)]
    p_grid: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    c_list: Option<Vec<f64>>,
    p_grid: Option<Vec<usize>>,
    replications: Option<usize>,
    spectrum: Option<String>,
    noise: Option<Noise>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct AsymptoticArgs {
    #[arg(long)]
    c: f64,
    /// Population spectrum as `w:t,w:t,...`.
    #[arg(long, default_value = "1:1")]
    spectrum: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct StieltjesArgs {
    /// plus, minus, mp or underline.
    #[arg(long, default_value = "plus")]
    which: String,
    #[arg(long)]
    z_re: f64,
    #[arg(long)]
    z_im: f64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value = "1:1")]
    spectrum: String,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[arg(long, default_value = "plus")]
    which: String,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value = "1:1")]
    spectrum: String,
    /// `xmin:xmax:npts`; evaluates at `xmin + k (xmax − xmin)/npts` for `k = 1..=npts`.
    #[arg(long, default_value = "0:6:2000")]
    grid: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// CSV destination; the grid goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Whitespace-separated p x n matrix of observations (one row per variable).
    #[arg(long)]
    file: PathBuf,
    /// Sample size used to normalize `S = Y Y'/n`; defaults to the column count.
    #[arg(long)]
    n: Option<usize>,
    /// Population spectrum for the plug-in equivalents.
    #[arg(long)]
    spectrum: Option<String>,
    /// p x p population covariance; enables the reflexive-inverse functionals.
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct Figure1Args {
    #[arg(long, default_value_t = crate::experiments::DEFAULT_REPLICATIONS)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "figure1.csv")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

/// Runs the CLI with `args` (including the program name) on the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(err, "error kind=validation exit=1: {}", first.trim_start_matches("error: "));
            return 1;
        }
    };
    let mut text = String::new();
    let mut warnings = Vec::new();
    match dispatch(cli.command, &mut text, &mut warnings) {
        Ok(()) => {
            for w in &warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let (kind, code) = exit_code(&e);
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error kind={kind} exit={code}: {message}");
            code
        }
    }
}

fn exit_code(e: &Error) -> (&'static str, i32) {
    match e.kind() {
        ErrorKind::Validation => ("validation", 1),
        ErrorKind::Numerical => ("numerical", 2),
        ErrorKind::Io => ("io", 3),
    }
}

fn dispatch(command: Command, out: &mut String, warnings: &mut Vec<String>) -> Result<()> {
    match command {
        Command::Sweep(a) => sweep(a, out, warnings),
        Command::Asymptotic(a) => asymptotic(a, out),
        Command::Stieltjes(a) => stieltjes(a, out),
        Command::Density(a) => density(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Figure1(a) => {
            let config = SweepConfig {
                replications: a.reps,
                master_seed: a.seed,
                output_path: a.out,
                ..figure1_preset()
            };
            execute_sweep(&config, a.threads, out, warnings)
        }
    }
}

/// Up to 6 significant digits, like C's `%g`.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, v)
    } else {
        format!("{v:.5e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => s.split_at(i),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}{exp}")
}

fn parse_spectrum(s: &str) -> Result<SpectrumSpec> {
    s.parse()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Validation(format!("invalid {what} entry `{t}`")))
        })
        .collect()
}

/// `50,100,200` or `start:stop:step` (inclusive).
fn parse_p_grid(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(s, "p_grid"),
        [start, stop, step] => {
            let num = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Validation(format!("invalid p_grid range `{s}`")))
            };
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step == 0 || start > stop {
                return Err(Error::Validation(format!("invalid p_grid range `{s}`")));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        _ => Err(Error::Validation(format!("invalid p_grid `{s}`"))),
    }
}

fn sweep(a: SweepArgs, out: &mut String, warnings: &mut Vec<String>) -> Result<()> {
    let file = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<SweepFile>(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
                message: e.message().to_string(),
            })?
        }
        None => SweepFile::default(),
    };
    let base = figure1_preset();
    let spectrum = match a.spectrum.as_deref().or(file.spectrum.as_deref()) {
        Some(s) => parse_spectrum(s)?,
        None => base.spectrum.clone(),
    };
    let config = SweepConfig {
        c_list: match a.c_list {
            Some(s) => parse_list(&s, "c_list")?,
            None => file.c_list.unwrap_or(base.c_list),
        },
        p_grid: match a.p_grid {
            Some(s) => parse_p_grid(&s)?,
            None => file.p_grid.unwrap_or(base.p_grid),
        },
        replications: a.reps.or(file.replications).unwrap_or(base.replications),
        spectrum,
        noise: match a.noise {
            Some(s) => s.parse()?,
            None => file.noise.unwrap_or(base.noise),
        },
        master_seed: a.seed.or(file.seed).unwrap_or(base.master_seed),
        output_path: a.out.or(file.out).unwrap_or_else(|| PathBuf::from("sweep.csv")),
    };
    execute_sweep(&config, a.threads.or(file.threads), out, warnings)
}

fn execute_sweep(config: &SweepConfig, threads: Option<usize>, out: &mut String, warnings: &mut Vec<String>) -> Result<()> {
    config.validate()?;
    if threads == Some(0) {
        return Err(Error::Validation("--threads must be >= 1".into()));
    }
    let result: SweepResult = match threads {
        Some(t) => run_sweep_with_threads(config, t)?,
        None => run_sweep(config)?,
    };
    result.write(&config.output_path)?;
    warnings.extend(result.warnings.iter().cloned());
    for f in &result.failures {
        warnings.push(format!(
            "replication failed: c={} p={} replicate={} seed={}: {}",
            f.c_target, f.p, f.replicate, f.seed, f.reason
        ));
    }
    let _ = writeln!(out, "{:>8} {:>6} {:>12} {:>12} {:>12} {:>6} {:>8}", "c", "p", "mean_nfl", "sd_nfl", "nfl_asym", "n_ok", "n_failed");
    for s in &result.summary {
        let _ = writeln!(
            out,
            "{:>8} {:>6} {:>12} {:>12} {:>12} {:>6} {:>8}",
            fmt_g6(s.c_target),
            s.p,
            fmt_g6(s.mean_nfl),
            fmt_g6(s.sd_nfl),
            fmt_g6(s.nfl_asym),
            s.n_ok,
            s.n_failed
        );
    }
    let _ = writeln!(
        out,
        "wrote {} rows to {} and summary to {}",
        result.rows.len(),
        config.output_path.display(),
        summary_path(&config.output_path).display()
    );
    Ok(())
}

fn asymptotic(a: AsymptoticArgs, out: &mut String) -> Result<()> {
    let h = parse_spectrum(&a.spectrum)?;
    let s = asymptotic_summary(a.c, &h)?;
    match a.format {
        Format::Text => {
            let _ = writeln!(out, "c           {}", fmt_g6(s.c));
            let _ = writeln!(out, "spectrum    {h}");
            let _ = writeln!(out, "fro_plus    {}", fmt_g6(s.fro_plus));
            let _ = writeln!(out, "fro_minus   {}", fmt_g6(s.fro_minus));
            let _ = writeln!(out, "nfl         {}", fmt_g6(s.nfl));
            let _ = writeln!(out, "m0          {}", fmt_g6(s.m0));
            let _ = writeln!(out, "trace_minus {}", fmt_g6(s.trace_minus));
        }
        Format::Csv => {
            let _ = writeln!(out, "c,fro_plus,fro_minus,nfl,m0,trace_minus");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_real(s.c),
                fmt_real(s.fro_plus),
                fmt_real(s.fro_minus),
                fmt_real(s.nfl),
                fmt_real(s.m0),
                fmt_real(s.trace_minus)
            );
        }
    }
    Ok(())
}

fn solver_options(tol: f64, max_iter: usize) -> Result<SolverOptions> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Validation(format!("--tol must be positive (got {tol})")));
    }
    if max_iter == 0 {
        return Err(Error::Validation("--max-iter must be >= 1".into()));
    }
    Ok(SolverOptions { tol, max_iter })
}

fn stieltjes(a: StieltjesArgs, out: &mut String) -> Result<()> {
    let which: Transform = a.which.parse()?;
    let h = parse_spectrum(&a.spectrum)?;
    let opts = solver_options(a.tol, a.max_iter)?;
    let sol = solve(which, Complex64::new(a.z_re, a.z_im), a.c, &h, opts)?;
    match a.format {
        Format::Text => {
            let _ = writeln!(out, "which       {which}");
            let _ = writeln!(out, "z           {} + {}i", fmt_g6(sol.z.re), fmt_g6(sol.z.im));
            let _ = writeln!(out, "m           {} + {}i", fmt_g6(sol.m.re), fmt_g6(sol.m.im));
            let _ = writeln!(out, "residual    {}", fmt_g6(sol.residual));
            let _ = writeln!(out, "iterations  {}", sol.iterations);
            let _ = writeln!(out, "damping     {}", fmt_g6(sol.damping_used));
        }
        Format::Csv => {
            let _ = writeln!(out, "which,z_re,z_im,m_re,m_im,residual,iterations,damping");
            let _ = writeln!(
                out,
                "{which},{},{},{},{},{},{},{}",
                fmt_real(sol.z.re),
                fmt_real(sol.z.im),
                fmt_real(sol.m.re),
                fmt_real(sol.m.im),
                fmt_real(sol.residual),
                sol.iterations,
                fmt_real(sol.damping_used)
            );
        }
    }
    Ok(())
}

/// `xmin:xmax:npts`, left-open: `xmin + k (xmax − xmin)/npts` for `k = 1..=npts`.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Validation(format!("invalid grid `{s}` (expected xmin:xmax:npts)"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo && n >= 1) {
        return Err(bad());
    }
    let step = (hi - lo) / n as f64;
    Ok((1..=n).map(|k| lo + k as f64 * step).collect())
}

fn density(a: DensityArgs, out: &mut String) -> Result<()> {
    let which: Transform = a.which.parse()?;
    let h = parse_spectrum(&a.spectrum)?;
    let grid = parse_grid(&a.grid)?;
    let opts = solver_options(a.tol, a.max_iter)?;
    let points = density_grid(which, a.c, &h, &grid, a.epsilon, opts)?;
    let mut csv = String::from("x,density\n");
    for p in &points {
        let d = p.density.map(fmt_real).unwrap_or_default();
        let _ = writeln!(csv, "{},{d}", fmt_real(p.x));
    }
    let failed = points.iter().filter(|p| p.density.is_none()).count();
    match &a.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            let _ = writeln!(out, "points      {}", points.len());
            let _ = writeln!(out, "failed      {failed}");
            let _ = writeln!(out, "mass        {}", fmt_g6(grid_mass(&points)));
            let _ = writeln!(out, "wrote       {}", path.display());
        }
        None => out.push_str(&csv),
    }
    Ok(())
}

/// Functionals of `S⁺` (and of `S⁻` when `Σ` is known) from an observation file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEstimate {
    pub p: usize,
    pub n: usize,
    pub c_eff: f64,
    /// `(1/p) tr(S⁺)`
    pub trace_plus: f64,
    /// `(1/p) ‖S⁺‖²_F`
    pub fro_plus: f64,
    /// Plug-in `(fro_plus, fro_minus, m0)` for the supplied spectrum or `Σ`.
    pub equivalents: Option<(f64, f64, f64)>,
    /// `((1/p)‖S⁻‖²_F, (1/p)tr(S⁻), nfl, precision estimate)` when `Σ` is supplied.
    pub reflexive: Option<(f64, f64, f64, f64)>,
}

/// Reads `Y` (p x n) and computes the data-only functionals of `S = Y Y'/n`.
/// `n_override` replaces the column count as the normalizing sample size.
pub fn estimate_from_file(
    path: &Path,
    n_override: Option<usize>,
    spectrum: Option<&SpectrumSpec>,
    sigma: Option<&CovarianceModel>,
) -> Result<FileEstimate> {
    let y = read_matrix(path)?;
    let (p, cols) = y.shape();
    let n = n_override.unwrap_or(cols);
    if n == 0 {
        return Err(Error::Validation("--n must be >= 1".into()));
    }
    if p <= cols || p <= n {
        return Err(Error::Validation(format!(
            "need more variables than observations for the singular case (p = {p}, n = {n}, columns = {cols})"
        )));
    }
    let pf = p as f64;
    // S = Y Y'/n equals (cols/n) times the column-normalized matrix, so S⁺ scales by n/cols.
    let scale = n as f64 / cols as f64;
    let plus = GramFactor::new(&y)?;
    let trace_plus = scale * plus.trace() / pf;
    let fro_plus = scale * scale * plus.frobenius_sq() / pf;
    let c_eff = pf / n as f64;

    if let Some(model) = sigma {
        if model.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p} x {p} covariance"),
                found: format!("{0} x {0}", model.dim()),
            });
        }
    }
    let equivalents = match (sigma, spectrum) {
        (Some(model), _) => Some(corollary_equivalents(model, c_eff)?),
        (None, Some(h)) => Some(corollary_equivalents(&CovarianceModel::from_spectrum(h, p), c_eff)?),
        (None, None) => None,
    }
    .map(|e| (e.fro_plus, e.fro_minus, e.m0));

    let reflexive = match sigma {
        Some(model) => {
            let x = model.apply_inv_sqrt(&y)?;
            let minus = reflexive_factor(model, &x)?;
            let fro_raw = scale * scale * minus.frobenius_sq();
            let trace_raw = scale * minus.trace();
            let fro_minus = fro_raw / pf;
            Some((
                fro_minus,
                trace_raw / pf,
                nfl_from_norms(fro_plus, fro_minus)?,
                precision_fro_from_moments(fro_raw, trace_raw, c_eff, p)?,
            ))
        }
        None => None,
    };
    Ok(FileEstimate {
        p,
        n,
        c_eff,
        trace_plus,
        fro_plus,
        equivalents,
        reflexive,
    })
}

fn estimate(a: EstimateArgs, out: &mut String) -> Result<()> {
    let spectrum = a.spectrum.as_deref().map(parse_spectrum).transpose()?;
    let sigma = match &a.sigma {
        Some(path) => Some(CovarianceModel::from_dense(read_matrix(path)?)?),
        None => None,
    };
    let e = estimate_from_file(&a.file, a.n, spectrum.as_ref(), sigma.as_ref())?;
    let mut fields: Vec<(&str, String, String)> = vec![
        ("p", e.p.to_string(), e.p.to_string()),
        ("n", e.n.to_string(), e.n.to_string()),
        ("c_eff", fmt_g6(e.c_eff), fmt_real(e.c_eff)),
        ("trace_plus", fmt_g6(e.trace_plus), fmt_real(e.trace_plus)),
        ("fro_plus", fmt_g6(e.fro_plus), fmt_real(e.fro_plus)),
    ];
    if let Some((fp, fm, m0)) = e.equivalents {
        fields.push(("fro_plus_equiv", fmt_g6(fp), fmt_real(fp)));
        fields.push(("fro_minus_equiv", fmt_g6(fm), fmt_real(fm)));
        fields.push(("m0", fmt_g6(m0), fmt_real(m0)));
    }
    if let Some((fm, tm, nfl, prec)) = e.reflexive {
        fields.push(("fro_minus", fmt_g6(fm), fmt_real(fm)));
        fields.push(("trace_minus", fmt_g6(tm), fmt_real(tm)));
        fields.push(("nfl", fmt_g6(nfl), fmt_real(nfl)));
        fields.push(("precision_estimate", fmt_g6(prec), fmt_real(prec)));
    }
    match a.format {
        Format::Text => {
            for (name, text, _) in &fields {
                let _ = writeln!(out, "{name:<19} {text}");
            }
        }
        Format::Csv => {
            let names: Vec<&str> = fields.iter().map(|f| f.0).collect();
            let values: Vec<&str> = fields.iter().map(|f| f.2.as_str()).collect();
            let _ = writeln!(out, "{}", names.join(","));
            let _ = writeln!(out, "{}", values.join(","));
        }
    }
    Ok(())
}
