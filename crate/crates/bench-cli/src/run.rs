//! Executes a configuration and writes the trace and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use vmfbf::fbf::FEJER_TOL;
use vmfbf::primal_dual::EQUIVALENCE_ITERATE_TOL;
use vmfbf::{
    assemble_product, equivalence_check, fbf_solve, fejer_certificate, kkt_residual, pd_solve,
    summability_certificate, vi_solve, IterateTrace, RunStatus,
};

use crate::config::{BuiltRun, ConfigError, RunConfig};

pub const TRACE_HEADER: &str = "n,gamma,primal_residual,dual_residual,metric_distance,cum_sq";
pub const EQUIVALENCE_STEPS: usize = 200;
pub const KKT_TOL: f64 = 1e-7;
pub const TAIL_FRACTION_LIMIT: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid arguments: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Certify {
    Fejer,
    Summability,
    Kkt,
    Equivalence,
    All,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub certify: Vec<Certify>,
}

impl RunOptions {
    fn wants(&self, c: Certify) -> bool {
        self.certify.iter().any(|x| *x == c || *x == Certify::All)
    }

    fn out_dir(&self, config: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Result of solving one configuration, before anything is written.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// `Err` holds the solver error message.
    pub result: Result<IterateTrace, String>,
    pub report: String,
}

impl SolveOutcome {
    pub fn exit_code(&self) -> i32 {
        match &self.result {
            Ok(t) if t.status == RunStatus::Converged => 0,
            Ok(_) => 2,
            Err(_) => 1,
        }
    }

    pub fn trace_csv(&self) -> String {
        match &self.result {
            Ok(t) => trace_csv(t),
            Err(_) => format!("{TRACE_HEADER}\n"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    pub solve: SolveOutcome,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV with 17 significant digits per value; optional columns are empty
/// when absent.
pub fn trace_csv(trace: &IterateTrace) -> String {
    let mut s = String::with_capacity(64 * (trace.rows.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            num(r.gamma),
            num(r.primal_residual),
            opt(r.dual_residual),
            opt(r.metric_distance),
            num(r.cumulative_sq)
        );
    }
    s
}

fn apply_overrides(config: &RunConfig, options: &RunOptions) -> Result<RunConfig, CliError> {
    let mut c = config.clone();
    if let Some(m) = options.max_iter {
        c.solver.max_iter = Some(m);
    }
    if let Some(t) = options.tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Argument(format!("--tol must be finite and >= 0, got {t}")));
        }
        c.solver.stop_tol = Some(t);
    }
    Ok(c)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Solves the configuration in memory and builds the report text.
pub fn solve(config: &RunConfig, options: &RunOptions) -> Result<SolveOutcome, CliError> {
    let config = apply_overrides(config, options)?;
    let built = config.build()?;
    let mut report = String::new();
    let _ = writeln!(report, "problem: {}", config.problem.type_name());
    let mut certs = String::new();

    let result = match &built {
        BuiltRun::Fbf { problem, config: cfg } => fbf_solve(problem, cfg).inspect(|trace| {
            if options.wants(Certify::Fejer) {
                match fejer_certificate(trace, problem, cfg) {
                    Ok(f) => fejer_line(&mut certs, &f),
                    Err(e) => {
                        let _ = writeln!(certs, "fejer: skipped ({e})");
                    }
                }
            }
            not_applicable(&mut certs, options, "fbf");
        }),
        BuiltRun::Vi { f, b, config: cfg } => vi_solve(f, b.clone(), cfg).map(|out| {
            let _ = writeln!(
                certs,
                "vi_check: {} (probes {}, max violation {:.6e}, slack {:.1e})",
                pass(out.check.passed()),
                out.check.probes,
                out.check.max_violation,
                out.check.slack
            );
            if options.wants(Certify::Fejer) {
                let _ = writeln!(certs, "fejer: skipped (no known zero for vi problems)");
            }
            not_applicable(&mut certs, options, "vi");
            out.trace
        }),
        BuiltRun::Pd { problem, config: cfg } => pd_solve(problem, cfg).map(|out| {
            if options.wants(Certify::Fejer) {
                let line = assemble_product(problem, cfg)
                    .and_then(|(fp, fc)| fejer_certificate(&out.trace, &fp, &fc));
                match line {
                    Ok(f) => fejer_line(&mut certs, &f),
                    Err(e) => {
                        let _ = writeln!(certs, "fejer: skipped ({e})");
                    }
                }
            }
            if options.wants(Certify::Kkt) {
                match kkt_residual(problem, &out.state) {
                    Ok(r) => {
                        let _ = writeln!(certs, "kkt: {} (residual {:.6e}, limit {:.0e})", pass(r <= KKT_TOL), r, KKT_TOL);
                    }
                    Err(e) => {
                        let _ = writeln!(certs, "kkt: error ({e})");
                    }
                }
            }
            if options.wants(Certify::Equivalence) {
                let steps = EQUIVALENCE_STEPS.min(cfg.max_iter.max(1));
                match equivalence_check(problem, cfg, steps) {
                    Ok(r) => {
                        let _ = writeln!(
                            certs,
                            "equivalence: {} ({} steps, max iterate gap {:.3e}, max residual gap {:.3e}, limit {:.0e})",
                            pass(r.passed()),
                            r.steps,
                            r.max_iterate_gap,
                            r.max_residual_gap,
                            EQUIVALENCE_ITERATE_TOL
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(certs, "equivalence: error ({e})");
                    }
                }
            }
            out.trace
        }),
    }
    .map_err(|e| e.to_string());

    match &result {
        Ok(trace) => {
            if options.wants(Certify::Summability) {
                let s = summability_certificate(trace);
                let verdict = if !s.claim_made {
                    "NO CLAIM"
                } else {
                    pass(s.tail_fraction < TAIL_FRACTION_LIMIT)
                };
                let _ = writeln!(
                    certs,
                    "summability: {verdict} (rows {}, total {:.6e}, tail fraction {:.3e}, errors summable: {}, suspected divergence: {})",
                    s.rows, s.total, s.tail_fraction, s.declared_summable, s.suspected_divergence
                );
            }
            write_summary(&mut report, trace);
        }
        Err(msg) => {
            let _ = writeln!(report, "status: error");
            let _ = writeln!(report, "message: {msg}");
        }
    }
    if !certs.is_empty() {
        report.push_str("certificates:\n");
        for line in certs.lines() {
            let _ = writeln!(report, "  {line}");
        }
    }
    Ok(SolveOutcome { result, report })
}

fn fejer_line(out: &mut String, f: &vmfbf::FejerCertificate) {
    let excess = if f.checked == 0 {
        "-".to_string()
    } else {
        format!("{:.3e}", f.max_excess)
    };
    let _ = writeln!(
        out,
        "fejer: {} (steps {}, violations {}, max excess {}, sum eps {:.3e}, sum eta {:.3e}, tol {:.0e})",
        pass(f.passed()),
        f.checked,
        f.violations.len(),
        excess,
        f.total_error_bound,
        f.total_eta,
        FEJER_TOL
    );
}

fn not_applicable(out: &mut String, options: &RunOptions, kind: &str) {
    for (c, name) in [(Certify::Kkt, "kkt"), (Certify::Equivalence, "equivalence")] {
        if options.wants(c) {
            let _ = writeln!(out, "{name}: not applicable to {kind} problems");
        }
    }
}

fn write_summary(report: &mut String, trace: &IterateTrace) {
    let _ = writeln!(report, "status: {}", trace.status);
    let _ = writeln!(report, "iterations: {}", trace.iterations);
    if let Some(last) = trace.final_residual() {
        let _ = writeln!(report, "final primal residual: {:.6e}", last.primal_residual);
        if let Some(d) = last.dual_residual {
            let _ = writeln!(report, "final dual residual: {d:.6e}");
        }
        let _ = writeln!(report, "final shadow residual: {:.6e}", last.shadow_residual);
    }
    let _ = writeln!(report, "beta: {:.16e}", trace.beta);
    let _ = writeln!(report, "mu: {:.16e}", trace.mu);
    let _ = writeln!(
        report,
        "gamma interval: [{:.16e}, {:.16e}]",
        trace.gamma_interval.lo, trace.gamma_interval.hi
    );
    let coords: Vec<String> = trace.final_x.iter().map(|x| num(*x)).collect();
    let _ = writeln!(report, "final iterate: [{}]", coords.join(", "));
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Solves and writes `trace.csv` and `report.txt` into the output directory.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome, CliError> {
    let solve = solve(config, options)?;
    let dir = options.out_dir(config);
    prepare_dir(&dir)?;
    let trace_path = dir.join("trace.csv");
    let report_path = dir.join("report.txt");
    write_file(&trace_path, &solve.trace_csv())?;
    write_file(&report_path, &solve.report)?;
    Ok(RunOutcome {
        exit_code: solve.exit_code(),
        trace_path,
        report_path,
        solve,
    })
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub exit_code: i32,
    pub report: String,
    pub a: SolveOutcome,
    pub b: SolveOutcome,
}

fn combined(r: &vmfbf::IterationRecord) -> f64 {
    r.primal_residual.hypot(r.dual_residual.unwrap_or(0.0))
}

/// Runs two configurations of the same problem and writes `trace_a.csv`,
/// `trace_b.csv` and `compare.txt`.
pub fn compare(a: &RunConfig, b: &RunConfig, options: &RunOptions) -> Result<CompareOutcome, CliError> {
    if a.problem != b.problem {
        return Err(CliError::Argument(
            "compared configurations must describe the same problem".into(),
        ));
    }
    let (sa, sb) = std::thread::scope(|s| {
        let ha = s.spawn(|| solve(a, options));
        let hb = s.spawn(|| solve(b, options));
        (
            ha.join().expect("solver thread panicked"),
            hb.join().expect("solver thread panicked"),
        )
    });
    let (sa, sb) = (sa?, sb?);

    let mut report = String::new();
    for (label, s) in [("a", &sa), ("b", &sb)] {
        match &s.result {
            Ok(t) => {
                let _ = writeln!(report, "run {label}: {} after {} iterations", t.status, t.iterations);
            }
            Err(e) => {
                let _ = writeln!(report, "run {label}: error: {e}");
            }
        }
    }
    if let (Ok(ta), Ok(tb)) = (&sa.result, &sb.result) {
        let _ = writeln!(report, "final iterate distance: {:.6e}", ta.final_x.distance(&tb.final_x));
        let _ = writeln!(report, "residual ratio table:");
        let _ = writeln!(report, "n,residual_a,residual_b,ratio_a_over_b");
        for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
            let (x, y) = (combined(ra), combined(rb));
            let ratio = if y > 0.0 { num(x / y) } else { String::new() };
            let _ = writeln!(report, "{},{},{},{}", ra.n, num(x), num(y), ratio);
        }
    }

    let dir = options.out_dir(a);
    prepare_dir(&dir)?;
    write_file(&dir.join("trace_a.csv"), &sa.trace_csv())?;
    write_file(&dir.join("trace_b.csv"), &sb.trace_csv())?;
    write_file(&dir.join("compare.txt"), &report)?;
    let exit_code = sa.exit_code().max(sb.exit_code()).min(2);
    let exit_code = if sa.exit_code() == 1 || sb.exit_code() == 1 { 1 } else { exit_code };
    Ok(CompareOutcome {
        exit_code,
        report,
        a: sa,
        b: sb,
    })
}
