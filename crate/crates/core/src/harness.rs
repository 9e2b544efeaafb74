//! Study driver: runs the convergence and conditioning experiments over a
//! ladder of element-count targets and records the results as CSV.
//!
//! The CSV is the single source of truth; the gnuplot-ready `.dat` files
//! produced by [`emit_plot_data`] are derived artifacts. Failed rows are kept
//! in the CSV with a trailing `error` column so a partially broken study is
//! still diffable.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Instant;

use crate::adapt::{self, AdaptMode, AdaptParams, LoopOptions};
use crate::error::{Error, Result};
use crate::estimator;
use crate::fem;
use crate::problem::PoissonProblem;
use crate::solver;

/// One study row: a fully adapted mesh at a (mode, target) pair.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub mode: AdaptMode,
    /// Final element count.
    pub n: usize,
    /// Interior (non-Dirichlet) vertex count.
    pub n_int: usize,
    pub energy_error: f64,
    pub hb_estimate: f64,
    pub max_aspect: f64,
    pub kappa_unscaled: f64,
    pub kappa_scaled: f64,
    /// Total pipeline wall time in seconds.
    pub wall_time: f64,
    pub seed: u64,
    /// Set when the pipeline failed for this row; numeric fields are NaN.
    pub error: Option<String>,
}

impl RunRecord {
    fn failed(mode: AdaptMode, seed: u64, wall_time: f64, err: &Error) -> RunRecord {
        RunRecord {
            mode,
            n: 0,
            n_int: 0,
            energy_error: f64::NAN,
            hb_estimate: f64::NAN,
            max_aspect: f64::NAN,
            kappa_unscaled: f64::NAN,
            kappa_scaled: f64::NAN,
            wall_time,
            seed,
            error: Some(err.to_string().replace(',', ";")),
        }
    }
}

/// Knobs shared by both studies.
#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub loop_opts: LoopOptions,
    pub adapt_params: AdaptParams,
    pub seed: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            loop_opts: LoopOptions::default(),
            adapt_params: AdaptParams::default(),
            seed: 42,
        }
    }
}

/// Targets used when the caller does not pass `--targets`.
pub const DEFAULT_TARGETS: [usize; 7] = [500, 1000, 2000, 4000, 8000, 16000, 32000];

fn run_row<P: PoissonProblem>(
    p: &P,
    mode: AdaptMode,
    target: usize,
    opts: &StudyOptions,
    with_kappa: bool,
) -> RunRecord {
    let start = Instant::now();
    let attempt = || -> Result<RunRecord> {
        let seq = adapt::adaptation_loop(p, mode, target, &opts.adapt_params, &opts.loop_opts)?;
        let last = adapt::final_iteration(&seq);
        let m = &last.mesh;
        let energy_error = fem::energy_error(m, &last.solution, p, opts.loop_opts.quad_degree)?;
        // The uniform mode never forms the estimate during the loop; compute
        // it here so every row reports estimator effectivity.
        let hb_estimate = if last.estimate.is_finite() {
            last.estimate
        } else {
            let sys =
                estimator::assemble_hb_system(m, &last.solution, p, opts.loop_opts.quad_degree)?;
            match estimator::gauss_seidel_estimate(
                &sys,
                opts.loop_opts.gs_tol,
                opts.loop_opts.gs_max_sweeps,
            ) {
                Ok(est) => estimator::estimate_energy_norm(&est, m),
                Err(Error::ZeroEstimate) => 0.0,
                Err(e) => return Err(e),
            }
        };
        let (kappa_unscaled, kappa_scaled) = if with_kappa {
            let a = fem::assemble_stiffness(m)?;
            let unscaled = solver::condition_number(&a, 1e-6, opts.seed)?;
            let scaled =
                solver::condition_number(&solver::diagonal_scale(&a)?, 1e-6, opts.seed)?;
            (unscaled.kappa, scaled.kappa)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(RunRecord {
            mode,
            n: m.triangles.len(),
            n_int: m.n_int(),
            energy_error,
            hb_estimate,
            max_aspect: m.max_aspect_ratio()?,
            kappa_unscaled,
            kappa_scaled,
            wall_time: start.elapsed().as_secs_f64(),
            seed: opts.seed,
            error: None,
        })
    };
    match attempt() {
        Ok(r) => r,
        Err(e) => RunRecord::failed(mode, opts.seed, start.elapsed().as_secs_f64(), &e),
    }
}

fn run_study<P: PoissonProblem>(
    p: &P,
    modes: &[AdaptMode],
    targets: &[usize],
    opts: &StudyOptions,
    with_kappa: bool,
) -> Vec<RunRecord> {
    assert!(targets.windows(2).all(|w| w[0] < w[1]), "targets must be ascending");
    assert!(targets.iter().all(|&t| t >= 200), "targets must be >= 200");
    let mut out = Vec::with_capacity(modes.len() * targets.len());
    for &mode in modes {
        for &t in targets {
            out.push(run_row(p, mode, t, opts, with_kappa));
        }
    }
    out
}

/// Convergence study: energy error and estimate vs element count per mode.
/// Condition numbers are skipped (reported as NaN).
pub fn run_convergence_study<P: PoissonProblem>(
    p: &P,
    modes: &[AdaptMode],
    targets: &[usize],
    opts: &StudyOptions,
) -> Vec<RunRecord> {
    run_study(p, modes, targets, opts, false)
}

/// Conditioning study: same pipeline plus the 2-norm condition number of the
/// interior stiffness matrix before and after symmetric diagonal scaling.
pub fn run_conditioning_study<P: PoissonProblem>(
    p: &P,
    modes: &[AdaptMode],
    targets: &[usize],
    opts: &StudyOptions,
) -> Vec<RunRecord> {
    run_study(p, modes, targets, opts, true)
}

pub const CSV_HEADER: &str = "mode,N,n_int,energy_error,hb_estimate,max_aspect,\
kappa_unscaled,kappa_scaled,wall_time,seed,error";

/// Serialize records as CSV. Floats use the shortest exact representation so
/// the file round-trips bit-for-bit.
pub fn write_csv<W: Write>(records: &[RunRecord], w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.mode.name(),
            r.n,
            r.n_int,
            r.energy_error,
            r.hb_estimate,
            r.max_aspect,
            r.kappa_unscaled,
            r.kappa_scaled,
            r.wall_time,
            r.seed,
            r.error.as_deref().unwrap_or("")
        )?;
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::MalformedCsv {
        line,
        message: format!("bad {what}: {s:?}"),
    })
}

/// Parse a CSV produced by [`write_csv`].
pub fn read_csv<R: BufRead>(r: &mut R) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(Error::MalformedCsv {
                    line: lineno,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::MalformedCsv {
                line: lineno,
                message: format!("expected 11 fields, got {}", f.len()),
            });
        }
        let mode = AdaptMode::parse(f[0]).ok_or_else(|| Error::MalformedCsv {
            line: lineno,
            message: format!("unknown mode {:?}", f[0]),
        })?;
        records.push(RunRecord {
            mode,
            n: parse_field(f[1], lineno, "N")?,
            n_int: parse_field(f[2], lineno, "n_int")?,
            energy_error: parse_field(f[3], lineno, "energy_error")?,
            hb_estimate: parse_field(f[4], lineno, "hb_estimate")?,
            max_aspect: parse_field(f[5], lineno, "max_aspect")?,
            kappa_unscaled: parse_field(f[6], lineno, "kappa_unscaled")?,
            kappa_scaled: parse_field(f[7], lineno, "kappa_scaled")?,
            wall_time: parse_field(f[8], lineno, "wall_time")?,
            seed: parse_field(f[9], lineno, "seed")?,
            error: if f[10].is_empty() { None } else { Some(f[10].to_string()) },
        });
    }
    Ok(records)
}

/// Least-squares slope of `ln y` against `ln x`. Pairs with non-finite or
/// non-positive entries are skipped.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

fn mode_blocks(records: &[RunRecord]) -> Vec<(AdaptMode, Vec<&RunRecord>)> {
    let mut blocks: Vec<(AdaptMode, Vec<&RunRecord>)> = Vec::new();
    for r in records {
        if r.error.is_some() {
            continue;
        }
        match blocks.iter_mut().find(|(m, _)| *m == r.mode) {
            Some((_, v)) => v.push(r),
            None => blocks.push((r.mode, vec![r])),
        }
    }
    blocks
}

/// Gnuplot-ready data for the convergence figure: per-mode blocks of
/// `N energy_error hb_estimate ref_invsqrt`, the reference column being a
/// slope −1/2 line anchored at the mode's first record.
pub fn convergence_plot_data(records: &[RunRecord]) -> String {
    let mut out = String::from("# convergence: energy error vs element count\n");
    out.push_str("# mode N energy_error hb_estimate ref_invsqrt\n");
    for (mode, rows) in mode_blocks(records) {
        let (n0, e0) = (rows[0].n as f64, rows[0].energy_error);
        for r in &rows {
            let reference = e0 * (r.n as f64 / n0).powf(-0.5);
            let _ = writeln!(
                out,
                "{} {} {:.12e} {:.12e} {:.12e}",
                mode.name(),
                r.n,
                r.energy_error,
                r.hb_estimate,
                reference
            );
        }
        out.push('\n');
    }
    out
}

/// Gnuplot-ready data for the conditioning figure: per-mode blocks of
/// `N kappa_unscaled kappa_scaled ref_n ref_nlogn` with linear and N·log N
/// reference lines anchored at the mode's first record.
pub fn conditioning_plot_data(records: &[RunRecord]) -> String {
    let mut out = String::from("# conditioning: stiffness condition number vs element count\n");
    out.push_str("# mode N kappa_unscaled kappa_scaled ref_n ref_nlogn\n");
    for (mode, rows) in mode_blocks(records) {
        let n0 = rows[0].n as f64;
        let k0 = rows[0].kappa_unscaled;
        for r in &rows {
            let n = r.n as f64;
            let ref_n = k0 * n / n0;
            let ref_nlogn = k0 * (n * n.ln()) / (n0 * n0.ln());
            let _ = writeln!(
                out,
                "{} {} {:.12e} {:.12e} {:.12e} {:.12e}",
                mode.name(),
                r.n,
                r.kappa_unscaled,
                r.kappa_scaled,
                ref_n,
                ref_nlogn
            );
        }
        out.push('\n');
    }
    out
}

/// Read a study CSV and write `convergence.dat` and `conditioning.dat` next
/// to it in `out`.
pub fn emit_plot_data(csv: &std::path::Path, out: &std::path::Path) -> Result<()> {
    let file = std::fs::File::open(csv)?;
    let records = read_csv(&mut std::io::BufReader::new(file))?;
    std::fs::write(out.join("convergence.dat"), convergence_plot_data(&records))?;
    std::fs::write(out.join("conditioning.dat"), conditioning_plot_data(&records))?;
    Ok(())
}
