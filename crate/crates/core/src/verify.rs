//! Pass/fail checks of the qualitative statements the solver relies on:
//! slow shots next to the equilibrium and for large data, the `4k` branch
//! structure, and trajectory-level invariants.
//!
//! Every report records the parameters needed to reproduce it and is
//! serialized with sorted keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::integrator::{integrate_shoot, IntegratorSettings, System, Trajectory};
use crate::model::{eval_phi_inv, NonlinearitySpec, Problem, ProblemConfig};
use crate::scalar::Real;
use crate::shooter::{find_solutions, ScanOptions, Side};
use crate::spectrum::eigenvalue;

/// Shared tolerances of all checks.
pub mod tol {
    /// Bound on `|v(R)|` at a branch.
    pub const RESIDUAL: f64 = 1e-9;
    /// Relative drift of the `N = 1` first integral.
    pub const DRIFT: f64 = 1e-8;
    /// Auxiliary/original sup-norm agreement, as a multiple of `rtol`.
    pub const AGREEMENT_FACTOR: f64 = 10.0;
    /// Slack on the velocity bound `|u'| <= gamma`.
    pub const SPEED_SLACK: f64 = 1e-9;
    /// First and smallest offset tried next to `d = 1`.
    pub const DELTA_START: f64 = 1e-2;
    pub const DELTA_MIN: f64 = 1e-8;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub passed: bool,
    pub measured: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, Value>,
    /// Human-readable reasons for failure, empty when passed.
    pub failures: Vec<String>,
}

impl CheckReport {
    fn new(name: CheckName, parameters: BTreeMap<String, Value>) -> Self {
        Self {
            name: name.to_string(),
            parameters,
            passed: true,
            measured: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn measure(&mut self, key: &str, value: impl Serialize) {
        self.measured
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    fn tolerance(&mut self, key: &str, value: f64) {
        self.tolerances.insert(key.to_string(), json!(value));
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.passed = false;
            self.failures.push(what());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    SlowNearOne,
    SlowLargeD,
    TheoremMain,
    InvariantSuite,
}

impl CheckName {
    pub const ALL: [CheckName; 4] = [
        CheckName::InvariantSuite,
        CheckName::SlowLargeD,
        CheckName::SlowNearOne,
        CheckName::TheoremMain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::SlowNearOne => "slow_near_one",
            CheckName::SlowLargeD => "slow_large_d",
            CheckName::TheoremMain => "theorem_main",
            CheckName::InvariantSuite => "invariant_suite",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown check '{s}'; expected one of slow_near_one, slow_large_d, \
                     theorem_main, invariant_suite, all"
                ))
            })
    }
}

fn base_parameters<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> BTreeMap<String, Value> {
    let mut p = BTreeMap::new();
    p.insert("nonlinearity".into(), json!(spec.name()));
    p.insert("N".into(), json!(config.dimension));
    p.insert("R".into(), json!(config.radius.as_f64()));
    p.insert("rtol".into(), json!(settings.rtol.as_f64()));
    p.insert("atol".into(), json!(settings.atol.as_f64()));
    p
}

/// Whether `f'(1)` is below the second radial Neumann eigenvalue, plus both values.
pub fn below_second_eigenvalue<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<(bool, T, T)> {
    let slope = spec.deriv(T::one());
    let lambda2 = eigenvalue(2, config, settings)?.lambda;
    Ok((slope < lambda2, slope, lambda2))
}

/// Halves `delta` from `1e-2` down to `1e-8` and reports the largest `delta`
/// such that it and every smaller tried offset make less than one half-turn
/// from `d = 1 +- delta`. When `f'(1)` exceeds the second radial eigenvalue
/// the expected behaviour flips, and the check instead requires at least one
/// half-turn for every tried offset.
pub fn check_slow_near_one<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<CheckReport> {
    let problem = Problem::new(spec.clone(), *config)?;
    let mut report = CheckReport::new(CheckName::SlowNearOne, base_parameters(spec, config, settings));
    report.tolerance("delta_start", tol::DELTA_START);
    report.tolerance("delta_min", tol::DELTA_MIN);

    let (slow_regime, slope, lambda2) = below_second_eigenvalue(spec, config, settings)?;
    report.measure("f_prime_at_one", slope.as_f64());
    report.measure("lambda2_rad", lambda2.as_f64());
    report.measure("regime", if slow_regime { "f1" } else { "f1_prime" });

    let mut deltas = Vec::new();
    let mut delta = T::lit(tol::DELTA_START);
    while delta >= T::lit(tol::DELTA_MIN) {
        deltas.push(delta);
        delta = delta * T::half();
    }
    let traces: Vec<Result<(T, T)>> = deltas
        .par_iter()
        .map(|&delta| {
            let below = integrate_shoot(&problem, settings, T::one() - delta, System::Original)?;
            let above = integrate_shoot(&problem, settings, T::one() + delta, System::Original)?;
            Ok((below.half_turns()?, above.half_turns()?))
        })
        .collect();
    let traces: Vec<(T, T)> = traces.into_iter().collect::<Result<_>>()?;

    let trace_json: Vec<Value> = deltas
        .iter()
        .zip(&traces)
        .map(|(d, (b, a))| json!({"delta": d.as_f64(), "below": b.as_f64(), "above": a.as_f64()}))
        .collect();
    report.measure("trace", trace_json);
    let monotone = traces
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 && w[1].1 <= w[0].1);
    report.measure("trace_monotone", monotone);

    if slow_regime {
        // scan from the smallest offset upwards while both shots stay slow
        let mut found: Option<T> = None;
        for (d, (b, a)) in deltas.iter().zip(&traces).rev() {
            if *b < T::one() && *a < T::one() {
                found = Some(*d);
            } else {
                break;
            }
        }
        report.measure("delta", found.map(|d| d.as_f64()));
        report.require(found.is_some(), || {
            "no offset down to 1e-8 gives less than one half-turn on both sides".into()
        });
    } else {
        let all_fast = traces.iter().all(|(b, a)| *b >= T::one() && *a >= T::one());
        report.measure("delta", Value::Null);
        report.require(all_fast, || {
            "f'(1) exceeds lambda_2 but some shot next to 1 makes less than one half-turn".into()
        });
    }
    Ok(report)
}

/// Shots from `d in {1 + R, 1 + 1.5 R, 1 + 2 R}` make less than one
/// half-turn, stay above `max(1, d - r)` and keep `v < 0` on `(0, R]`.
pub fn check_slow_large_d<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<CheckReport> {
    let problem = Problem::new(spec.clone(), *config)?;
    let mut report = CheckReport::new(CheckName::SlowLargeD, base_parameters(spec, config, settings));
    let slack = T::lit(10.0) * settings.rtol;
    report.tolerance("lower_bound_slack_relative", slack.as_f64());
    let radius = config.radius;
    let data: Vec<T> = [1.0, 1.5, 2.0]
        .iter()
        .map(|&c| T::one() + T::lit(c) * radius)
        .collect();
    let mut rows = Vec::new();
    for d in data {
        let tr = integrate_shoot(&problem, settings, d, System::Original)?;
        let ht = tr.half_turns()?;
        let min_u = tr.min_u();
        let cone_gap = tr
            .r
            .iter()
            .zip(&tr.u)
            .map(|(&r, &u)| u - (d - r))
            .fold(T::infinity(), T::min);
        let v_nonzero = tr.r.iter().zip(&tr.v).skip(1).all(|(_, &v)| v < T::zero());
        rows.push(json!({
            "d": d.as_f64(),
            "half_turns": ht.as_f64(),
            "min_u": min_u.as_f64(),
            "min_u_minus_cone": cone_gap.as_f64(),
            "v_negative": v_nonzero,
        }));
        report.require(ht < T::one(), || format!("d = {d}: {ht} half-turns"));
        report.require(min_u >= T::one(), || format!("d = {d}: min u = {min_u} < 1"));
        report.require(cone_gap >= -slack * d, || {
            format!("d = {d}: u(r) falls below d - r by {}", -cone_gap)
        });
        report.require(v_nonzero, || format!("d = {d}: v vanishes in (0, R]"));
    }
    report.measure("shots", rows);
    Ok(report)
}

/// Runs the branch search and checks the conclusions of the multiplicity
/// theorem: at least `4k` branches, zero counts `1..k, k..1` on each side in
/// increasing `d`, side labels matching `d` against 1, positivity,
/// non-constancy, both Neumann conditions, and agreement with the auxiliary
/// system.
pub fn check_theorem_main<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    k: usize,
    settings: &IntegratorSettings<T>,
    opts: &ScanOptions<T>,
) -> Result<CheckReport> {
    let problem = Problem::new(spec.clone(), *config)?;
    let mut params = base_parameters(spec, config, settings);
    params.insert("k".into(), json!(k));
    params.insert("guard".into(), json!(opts.guard.as_f64()));
    params.insert("initial_points".into(), json!(opts.initial_points));
    params.insert("resolution".into(), json!(opts.resolution.as_f64()));
    let mut report = CheckReport::new(CheckName::TheoremMain, params);
    let agreement = T::lit(tol::AGREEMENT_FACTOR) * settings.rtol;
    report.tolerance("residual", tol::RESIDUAL);
    report.tolerance("agreement", agreement.as_f64());

    let set = find_solutions(&problem, settings, k, opts)?;
    let radius = config.radius;
    let w_end = config.weight(radius);
    let rows: Vec<Value> = set
        .branches
        .iter()
        .map(|b| {
            json!({
                "label": b.label.tag(),
                "d": b.d_star.as_f64(),
                "zeros": b.zeros,
                "residual": b.residual.as_f64(),
                "min_u": b.min_u.as_f64(),
                "aux_distance": b.aux_distance.as_f64(),
            })
        })
        .collect();
    report.measure("branches", rows);
    report.measure("branch_count", set.branches.len());
    report.measure("guard_ok", set.guard_ok);
    report.measure("bracket_failures", &set.failures);
    let below = set.zeros_on(Side::BelowOne);
    let above = set.zeros_on(Side::AboveOne);
    report.measure("zeros_below", &below);
    report.measure("zeros_above", &above);

    report.require(set.guard_ok, || "half-turn count reaches 1 at the guard band edge".into());
    report.require(set.pattern_holds(k), || {
        format!(
            "{} branches, zero counts below {:?} above {:?}; expected 1..{k},{k}..1 on each side",
            set.branches.len(),
            below,
            above
        )
    });
    report.require(set.branches.windows(2).all(|w| w[0].d_star < w[1].d_star), || {
        "branch data not strictly increasing".into()
    });
    for b in &set.branches {
        let tag = b.label.tag();
        let d = b.d_star;
        match b.label.side {
            Side::BelowOne => report.require(d < T::one(), || format!("{tag}: u(0) = {d} >= 1")),
            Side::AboveOne => {
                report.require(d > T::one(), || format!("{tag}: u(0) = {d} <= 1"));
                report.require(d < T::one() + radius, || format!("{tag}: u(0) = {d} >= 1 + R"));
            }
        }
        report.require((d - T::one()).abs() > opts.guard, || format!("{tag}: inside guard band"));
        report.require(b.min_u > T::zero(), || format!("{tag}: min u = {}", b.min_u));
        report.require(b.zeros >= 1, || format!("{tag}: constant-like profile"));
        let tr = &b.trajectory;
        report.require(tr.v[0] == T::zero(), || format!("{tag}: u'(0) != 0"));
        let slope_end = eval_phi_inv(tr.v_end() / w_end).abs();
        report.require(b.residual < T::lit(tol::RESIDUAL), || {
            format!("{tag}: |v(R)| = {:e}", b.residual)
        });
        report.require(slope_end < T::lit(tol::RESIDUAL), || {
            format!("{tag}: |u'(R)| = {:e}", slope_end)
        });
        report.require(b.aux_distance <= agreement, || {
            format!("{tag}: auxiliary distance {:e}", b.aux_distance)
        });
    }
    Ok(report)
}

/// Per-shot measurements used by the invariant suite.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShotInvariants {
    pub d: f64,
    pub max_speed: f64,
    pub min_speed_margin: f64,
    pub theta_increasing: bool,
    pub zeros_consistent: bool,
    pub zeros: Option<usize>,
    pub aux_max_speed: f64,
    pub aux_distance: f64,
    pub drift: Option<f64>,
}

/// Relative drift of the first integral `sqrt(1 + v^2) + F(u)`.
pub fn first_integral_drift<T: Real>(spec: &NonlinearitySpec<T>, tr: &Trajectory<T>) -> T {
    let e = tr.first_integral(spec);
    let e0 = e[0];
    e.iter()
        .map(|x| (*x - e0).abs())
        .fold(T::zero(), T::max)
        / e0.abs().max(T::min_positive_value())
}

/// Seeded random data in `(0, 1 + R)`: a third uniform, a third
/// log-uniformly close to 0 and to 1 from below, a third log-uniformly close
/// to 1 from above. `d = 1` itself is never drawn.
pub fn sample_data<T: Real>(radius: T, count: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let d = match i % 3 {
            0 => rng.gen_range(1e-6..1.0 + radius.as_f64()),
            1 => {
                let e = 10f64.powf(rng.gen_range(-6.0..0.0));
                if rng.gen::<bool>() {
                    e * 0.5
                } else {
                    1.0 - e * 0.5
                }
            }
            _ => 1.0 + 10f64.powf(rng.gen_range(-6.0..0.0)) * radius.as_f64().min(1.0),
        };
        let d = if (d - 1.0).abs() < 1e-9 { 1.0 + 1e-6 } else { d };
        out.push(T::lit(d));
    }
    out
}

fn shot_invariants<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    d: T,
) -> Result<ShotInvariants> {
    let orig = integrate_shoot(problem, settings, d, System::Original)?;
    let aux = integrate_shoot(problem, settings, d, System::Auxiliary)?;
    let zeros = orig.count_zeros().ok();
    let drift = (problem.config.dimension == 1)
        .then(|| first_integral_drift(&problem.spec, &orig).as_f64());
    Ok(ShotInvariants {
        d: d.as_f64(),
        max_speed: orig.max_speed.as_f64(),
        min_speed_margin: orig.min_speed_margin.as_f64(),
        theta_increasing: orig.theta.windows(2).all(|w| w[1] > w[0]),
        zeros_consistent: zeros.is_some(),
        zeros,
        aux_max_speed: aux.max_speed.as_f64(),
        aux_distance: aux.sup_distance(&orig).as_f64(),
        drift,
    })
}

/// Trajectory invariants over `sample_count` seeded random data: `|u'| < 1`,
/// strictly increasing angle, angle/sign-change zero count agreement,
/// first-integral drift when `N = 1`, and on oscillatory shots the auxiliary
/// velocity bound `|u'| <= gamma` and agreement with the original system.
pub fn check_invariant_suite<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
    sample_count: usize,
    seed: u64,
) -> Result<CheckReport> {
    let problem = Problem::new(spec.clone(), *config)?;
    let mut params = base_parameters(spec, config, settings);
    params.insert("sample_count".into(), json!(sample_count));
    params.insert("seed".into(), json!(seed));
    let mut report = CheckReport::new(CheckName::InvariantSuite, params);
    let gamma = problem.trunc.gamma.as_f64();
    let agreement = tol::AGREEMENT_FACTOR * settings.rtol.as_f64();
    report.tolerance("speed_slack", tol::SPEED_SLACK);
    report.tolerance("drift", tol::DRIFT);
    report.tolerance("agreement", agreement);

    let data = sample_data(config.radius, sample_count, seed);
    let shots: Vec<ShotInvariants> = data
        .par_iter()
        .map(|&d| shot_invariants(&problem, settings, d))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let mut max_speed = 0.0f64;
    let mut max_aux_speed_osc = 0.0f64;
    let mut max_distance_osc = 0.0f64;
    let mut max_drift = 0.0f64;
    let mut oscillatory = 0usize;
    for s in &shots {
        max_speed = max_speed.max(s.max_speed);
        report.require(s.min_speed_margin > 0.0 && s.max_speed < 1.0, || {
            format!("d = {}: |u'| reached {}", s.d, s.max_speed)
        });
        report.require(s.theta_increasing, || format!("d = {}: angle not increasing", s.d));
        report.require(s.zeros_consistent, || {
            format!("d = {}: angle and sign-change zero counts differ", s.d)
        });
        if let Some(drift) = s.drift {
            max_drift = max_drift.max(drift);
            report.require(drift < tol::DRIFT, || {
                format!("d = {}: first-integral drift {:e}", s.d, drift)
            });
        }
        if s.zeros.unwrap_or(0) >= 1 {
            oscillatory += 1;
            max_aux_speed_osc = max_aux_speed_osc.max(s.aux_max_speed);
            max_distance_osc = max_distance_osc.max(s.aux_distance);
            report.require(s.aux_max_speed <= gamma + tol::SPEED_SLACK, || {
                format!("d = {}: auxiliary |u'| = {} > gamma = {gamma}", s.d, s.aux_max_speed)
            });
            report.require(s.aux_distance <= agreement, || {
                format!("d = {}: auxiliary distance {:e}", s.d, s.aux_distance)
            });
        }
    }
    report.measure("gamma", gamma);
    report.measure("max_speed", max_speed);
    report.measure("oscillatory_shots", oscillatory);
    report.measure("max_aux_speed_oscillatory", max_aux_speed_osc);
    report.measure("max_aux_distance_oscillatory", max_distance_osc);
    if config.dimension == 1 {
        report.measure("max_drift", max_drift);
    }
    Ok(report)
}

/// Inputs shared by a batch of checks.
#[derive(Clone, Debug)]
pub struct SuiteInputs<T: Real> {
    pub spec: NonlinearitySpec<T>,
    pub config: ProblemConfig<T>,
    pub settings: IntegratorSettings<T>,
    pub scan: ScanOptions<T>,
    pub k: usize,
    pub sample_count: usize,
    pub seed: u64,
}

pub fn run_check<T: Real>(name: CheckName, inputs: &SuiteInputs<T>) -> Result<CheckReport> {
    let SuiteInputs {
        spec,
        config,
        settings,
        ..
    } = inputs;
    match name {
        CheckName::SlowNearOne => check_slow_near_one(spec, config, settings),
        CheckName::SlowLargeD => check_slow_large_d(spec, config, settings),
        CheckName::TheoremMain => {
            check_theorem_main(spec, config, inputs.k, settings, &inputs.scan)
        }
        CheckName::InvariantSuite => {
            check_invariant_suite(spec, config, settings, inputs.sample_count, inputs.seed)
        }
    }
}

/// Runs the named checks concurrently; reports come back sorted by name.
pub fn run_checks<T: Real>(names: &[CheckName], inputs: &SuiteInputs<T>) -> Result<Vec<CheckReport>> {
    let mut names = names.to_vec();
    names.sort();
    names.dedup();
    let mut reports: Vec<CheckReport> = names
        .par_iter()
        .map(|&n| run_check(n, inputs))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> IntegratorSettings<f64> {
        IntegratorSettings::default()
    }

    #[test]
    fn check_names_round_trip() {
        for c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>().unwrap(), c);
        }
        assert!("nope".parse::<CheckName>().is_err());
    }

    #[test]
    fn samples_are_seeded_and_avoid_one() {
        let a: Vec<f64> = sample_data(5.0, 50, 7);
        let b: Vec<f64> = sample_data(5.0, 50, 7);
        let c: Vec<f64> = sample_data(5.0, 50, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&d| d > 0.0 && d < 6.0 && d != 1.0));
    }

    #[test]
    fn large_data_are_slow() {
        let spec = NonlinearitySpec::cubic_pinned();
        for n in 1..=3 {
            let cfg = ProblemConfig::new(n, 5.0).unwrap();
            let r = check_slow_large_d(&spec, &cfg, &settings()).unwrap();
            assert!(r.passed, "{:?}", r.failures);
        }
    }

    #[test]
    fn near_one_is_slow_for_pinned_nonlinearity() {
        let spec = NonlinearitySpec::cubic_pinned();
        let cfg = ProblemConfig::new(2, 10.0).unwrap();
        let r = check_slow_near_one(&spec, &cfg, &settings()).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        assert_eq!(r.measured["regime"], json!("f1"));
        assert!(r.measured["delta"].as_f64().unwrap() >= 1e-8);
    }

    #[test]
    fn near_one_is_fast_above_the_second_eigenvalue() {
        // f'(1) = 2 for q = 4, while lambda_2 = 14.68 / R^2 for N = 2
        let spec = NonlinearitySpec::power(4.0).unwrap();
        let cfg = ProblemConfig::new(2, 6.0).unwrap();
        let r = check_slow_near_one(&spec, &cfg, &settings()).unwrap();
        assert_eq!(r.measured["regime"], json!("f1_prime"));
        assert!(r.passed, "{:?}", r.failures);
    }

    #[test]
    fn invariant_suite_small_run() {
        let spec = NonlinearitySpec::cubic_pinned();
        for n in 1..=3 {
            let cfg = ProblemConfig::new(n, 5.0).unwrap();
            let r = check_invariant_suite(&spec, &cfg, &settings(), 30, 11).unwrap();
            assert!(r.passed, "N = {n}: {:?}", r.failures);
        }
    }

    #[test]
    fn theorem_fails_in_a_small_ball() {
        let spec = NonlinearitySpec::cubic_pinned();
        let cfg = ProblemConfig::new(2, 2.0).unwrap();
        let opts = ScanOptions {
            initial_points: 60,
            ..ScanOptions::default()
        };
        let r = check_theorem_main(&spec, &cfg, 1, &settings(), &opts).unwrap();
        assert!(!r.passed);
        assert_eq!(r.measured["branch_count"], json!(0));
    }

    #[test]
    fn reports_are_deterministic() {
        let spec = NonlinearitySpec::cubic_pinned();
        let cfg = ProblemConfig::new(1, 3.0).unwrap();
        let a = check_invariant_suite(&spec, &cfg, &settings(), 20, 3).unwrap();
        let b = check_invariant_suite(&spec, &cfg, &settings(), 20, 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
