//! Command bodies. Each returns its files and console text without touching
//! the file system, so nothing is written unless the whole command succeeds.

use lmshoot::{
    eigenvalue, estimate_threshold_radius, find_solutions, run_checks, scan,
    shooter::lower_scan_end, CheckReport, Problem, Real, ScanResult, ShotRecord, Side,
    SolutionSet, SuiteInputs,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

/// Result of a command: files to write into the output directory, text for
/// standard output, and whether every check passed.
#[derive(Clone, Debug, Default)]
pub struct Execution {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: String,
    pub success: bool,
}

impl Execution {
    fn new() -> Self {
        Self {
            success: true,
            ..Self::default()
        }
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Numerical(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.stdout.push_str(s.as_ref());
        self.stdout.push('\n');
    }
}

/// Shortest round-trip form is not fixed-width, so CSV floats use 17
/// significant digits in scientific notation.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Numerical(format!("writing csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Numerical(format!("writing csv: {e}")))
}

fn scan_csv<T: Real>(records: &[ShotRecord<T>]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["d", "half_turns", "v_R", "zeros"],
        records.iter().map(|r| {
            vec![
                num(r.d.as_f64()),
                num(r.half_turns.as_f64()),
                num(r.v_r.as_f64()),
                r.zeros.to_string(),
            ]
        }),
    )
}

#[derive(Serialize)]
struct BranchRow {
    label: String,
    side: Side,
    j: usize,
    d_star: f64,
    zeros: usize,
    half_turns: f64,
    residual: f64,
    max_abs_v: f64,
    min_u: f64,
    max_speed: f64,
    aux_distance: f64,
    atol: f64,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    command: &'static str,
    config: Value,
    k: usize,
    radius: f64,
    d_lo: f64,
    guard_ok: bool,
    pattern_holds: bool,
    zeros_below: Vec<usize>,
    zeros_above: Vec<usize>,
    branches: Vec<BranchRow>,
    failures: &'a [lmshoot::shooter::BracketFailure],
}

fn branch_rows<T: Real>(set: &SolutionSet<T>) -> Vec<BranchRow> {
    set.branches
        .iter()
        .map(|b| BranchRow {
            label: b.label.tag(),
            side: b.label.side,
            j: b.label.j,
            d_star: b.d_star.as_f64(),
            zeros: b.zeros,
            half_turns: b.half_turns.as_f64(),
            residual: b.residual.as_f64(),
            max_abs_v: b.max_abs_v.as_f64(),
            min_u: b.min_u.as_f64(),
            max_speed: b.max_speed.as_f64(),
            aux_distance: b.aux_distance.as_f64(),
            atol: b.atol.as_f64(),
        })
        .collect()
}

fn problem<T: Real>(cfg: &RunConfig) -> Result<Problem<T>, CliError> {
    Ok(Problem::new(cfg.spec::<T>()?, cfg.problem_config::<T>()?)?)
}

pub fn solve<T: Real>(cfg: &RunConfig) -> Result<Execution, CliError> {
    let problem = problem::<T>(cfg)?;
    let settings = cfg.settings::<T>();
    let opts = cfg.scan_options::<T>();
    let set = find_solutions(&problem, &settings, cfg.k, &opts)?;
    let mut ex = Execution::new();

    let report = SolveReport {
        command: "solve",
        config: cfg.echo(),
        k: cfg.k,
        radius: cfg.problem.radius,
        d_lo: set.d_lo.as_f64(),
        guard_ok: set.guard_ok,
        pattern_holds: set.pattern_holds(cfg.k),
        zeros_below: set.zeros_on(Side::BelowOne),
        zeros_above: set.zeros_on(Side::AboveOne),
        branches: branch_rows(&set),
        failures: &set.failures,
    };
    ex.json("branches.json", &report)?;

    let records: Vec<ShotRecord<T>> = set.scans.iter().flat_map(|s| s.records.iter().copied()).collect();
    ex.files.push(("scan.csv".into(), scan_csv(&records)?));
    for b in &set.branches {
        let tr = &b.trajectory;
        let rows = (0..tr.len()).map(|i| {
            vec![num(tr.r[i].as_f64()), num(tr.u[i].as_f64()), num(tr.v[i].as_f64())]
        });
        ex.files
            .push((format!("branch_{}.csv", b.label.tag()), csv_bytes(&["r", "u", "v"], rows)?));
    }

    ex.line(format!(
        "N = {}, R = {}, f = {}, k = {}: {} branches",
        cfg.problem.dimension,
        cfg.problem.radius,
        problem.spec.name(),
        cfg.k,
        set.branches.len()
    ));
    if set.branches.is_empty() {
        ex.line("no non-constant solution found; R is probably below the first threshold radius");
    } else {
        ex.line(format!("{:>6} {:>26} {:>5} {:>10}", "branch", "d", "zeros", "|v(R)|"));
        for b in &set.branches {
            ex.line(format!(
                "{:>6} {:>26.17e} {:>5} {:>10.2e}",
                b.label.tag(),
                b.d_star.as_f64(),
                b.zeros,
                b.residual.as_f64()
            ));
        }
    }
    ex.line(format!(
        "zero-count pattern for k = {}: {}",
        cfg.k,
        if report.pattern_holds { "holds" } else { "not found" }
    ));
    for f in &set.failures {
        ex.line(format!("unresolved bracket [{}, {}]: {}", f.lo, f.hi, f.reason));
    }
    Ok(ex)
}

pub fn scan_cmd<T: Real>(cfg: &RunConfig) -> Result<Execution, CliError> {
    let problem = problem::<T>(cfg)?;
    let settings = cfg.settings::<T>();
    let opts = cfg.scan_options::<T>();
    let results: Vec<ScanResult<T>> = match cfg.d_range {
        Some([lo, hi]) => vec![scan(&problem, &settings, T::lit(lo), T::lit(hi), &opts)?],
        None => {
            let lo = lower_scan_end(&problem, &settings, &opts)?;
            vec![
                scan(&problem, &settings, lo, T::one() - opts.guard, &opts)?,
                scan(
                    &problem,
                    &settings,
                    T::one() + opts.guard,
                    T::one() + problem.radius(),
                    &opts,
                )?,
            ]
        }
    };
    let mut ex = Execution::new();
    let records: Vec<ShotRecord<T>> = results.iter().flat_map(|s| s.records.iter().copied()).collect();
    ex.files.push(("scan.csv".into(), scan_csv(&records)?));
    for s in &results {
        ex.line(format!(
            "[{:.6e}, {:.6e}]: {} shots, {} sign changes of v(R), {} failed shots",
            s.d_lo.as_f64(),
            s.d_hi.as_f64(),
            s.records.len(),
            s.brackets.len(),
            s.failures.len()
        ));
        if let Some(p) = s.max_half_turns() {
            ex.line(format!(
                "  most half-turns: {:.6} at d = {:.17e}",
                p.half_turns.as_f64(),
                p.d.as_f64()
            ));
        }
    }
    Ok(ex)
}

#[derive(Serialize)]
struct EigenRow {
    k: usize,
    lambda: f64,
    residual: f64,
}

#[derive(Serialize)]
struct EigenReport {
    command: &'static str,
    config: Value,
    eigenvalues: Vec<EigenRow>,
}

pub fn eigen<T: Real>(cfg: &RunConfig) -> Result<Execution, CliError> {
    let config = cfg.problem_config::<T>()?;
    let settings = cfg.settings::<T>();
    let mut rows = Vec::new();
    for k in 1..=cfg.eigen_count {
        let e = eigenvalue(k, &config, &settings)?;
        rows.push(EigenRow {
            k,
            lambda: e.lambda.as_f64(),
            residual: e.angle_residual.as_f64(),
        });
    }
    let mut ex = Execution::new();
    for r in &rows {
        ex.line(format!("lambda_{} = {:.12}", r.k, r.lambda));
    }
    ex.json(
        "eigen.json",
        &EigenReport {
            command: "eigen",
            config: cfg.echo(),
            eigenvalues: rows,
        },
    )?;
    Ok(ex)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    command: &'static str,
    config: Value,
    passed: bool,
    checks: &'a [CheckReport],
}

pub fn verify<T: Real>(cfg: &RunConfig) -> Result<Execution, CliError> {
    let inputs = SuiteInputs {
        spec: cfg.spec::<T>()?,
        config: cfg.problem_config::<T>()?,
        settings: cfg.settings::<T>(),
        scan: cfg.scan_options::<T>(),
        k: cfg.k,
        sample_count: cfg.sample_count,
        seed: cfg.seed,
    };
    let names = cfg.checks.resolve()?;
    let reports = run_checks(&names, &inputs)?;
    let passed = reports.iter().all(|r| r.passed);
    let mut ex = Execution::new();
    for r in &reports {
        ex.line(format!("{:<16} {}", r.name, if r.passed { "pass" } else { "FAIL" }));
        for f in &r.failures {
            ex.line(format!("  {f}"));
        }
    }
    ex.json(
        "verify.json",
        &VerifyReport {
            command: "verify",
            config: cfg.echo(),
            passed,
            checks: &reports,
        },
    )?;
    ex.success = passed;
    Ok(ex)
}

#[derive(Serialize)]
struct Evaluation {
    radius: f64,
    holds: bool,
}

#[derive(Serialize)]
struct ThresholdReport {
    command: &'static str,
    config: Value,
    k: usize,
    /// Empirical: the smallest radius seen where the pattern holds.
    r_star: f64,
    r_below: f64,
    evaluations: Vec<Evaluation>,
    monotone_checks: Vec<Evaluation>,
    monotone: bool,
}

pub fn threshold<T: Real>(cfg: &RunConfig) -> Result<Execution, CliError> {
    let spec = cfg.spec::<T>()?;
    let est = estimate_threshold_radius(
        &spec,
        cfg.problem.dimension,
        cfg.k,
        T::lit(cfg.r_max),
        &cfg.settings::<T>(),
        &cfg.scan_options::<T>(),
    )?;
    let eval = |v: &[(T, bool)]| -> Vec<Evaluation> {
        v.iter()
            .map(|(r, h)| Evaluation {
                radius: r.as_f64(),
                holds: *h,
            })
            .collect()
    };
    let report = ThresholdReport {
        command: "threshold",
        config: cfg.echo(),
        k: cfg.k,
        r_star: est.r_star.as_f64(),
        r_below: est.r_below.as_f64(),
        evaluations: eval(&est.evaluations),
        monotone_checks: eval(&est.monotone_checks),
        monotone: est.monotone_checks.iter().all(|(_, h)| *h),
    };
    let mut ex = Execution::new();
    ex.line(format!(
        "empirical threshold R_{}^* in ({}, {}] for N = {}, f = {}",
        cfg.k,
        report.r_below,
        report.r_star,
        cfg.problem.dimension,
        spec.name()
    ));
    for c in &report.monotone_checks {
        ex.line(format!(
            "  pattern at R = {}: {}",
            c.radius,
            if c.holds { "holds" } else { "fails" }
        ));
    }
    ex.json("threshold.json", &report)?;
    Ok(ex)
}
