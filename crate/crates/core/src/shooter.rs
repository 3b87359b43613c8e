//! Branch location by shooting.
//!
//! A shot from `d` returns `v_d(R)`; Neumann solutions are the zeros of
//! `d -> v_d(R)`. Since `v(R) = -rho(R) sin(theta(R))` and `theta(0)` is a
//! multiple of `pi`, these zeros are exactly the data where the half-turn
//! count `(theta(R) - theta(0)) / pi` crosses an integer `j`, and the
//! solution found there has `j` zeros of `u - 1`.
//!
//! Scans work in a stretched coordinate per side of the equilibrium:
//! `xi = ln(d / (1 - d))` below 1 and `xi = ln(d - 1)` above 1. The
//! half-turn profile below 1 peaks at data that shrink like `exp(-R)`, so a
//! uniform grid in `d` would miss it for large balls.

use num_traits::{Float, One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_shoot, IntegratorSettings, System, Trajectory};
use crate::model::{golden_max, NonlinearitySpec, Problem, ProblemConfig};
use crate::scalar::{Octuple, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    BelowOne,
    AboveOne,
}

impl Side {
    pub fn of<T: Real>(d: T) -> Self {
        if d < T::one() {
            Side::BelowOne
        } else {
            Side::AboveOne
        }
    }

    pub fn sign_char(self) -> char {
        match self {
            Side::BelowOne => '-',
            Side::AboveOne => '+',
        }
    }

    fn to_xi<T: Real>(self, d: T) -> T {
        match self {
            Side::BelowOne => d.ln() - (T::one() - d).ln(),
            Side::AboveOne => (d - T::one()).ln(),
        }
    }

    fn to_d<T: Real>(self, xi: T) -> T {
        match self {
            Side::BelowOne => {
                if xi < T::zero() {
                    let e = xi.exp();
                    e / (T::one() + e)
                } else {
                    T::one() / (T::one() + (-xi).exp())
                }
            }
            Side::AboveOne => T::one() + xi.exp(),
        }
    }
}

/// Summary of one shot.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShotRecord<T> {
    pub d: T,
    pub half_turns: T,
    pub v_r: T,
    pub u_r: T,
    pub zeros: usize,
    pub system: System,
    pub max_speed: T,
    /// Whether the sampled angle increased strictly from node to node.
    pub theta_increasing: bool,
}

impl<T: Real> ShotRecord<T> {
    pub fn from_trajectory(tr: &Trajectory<T>) -> Result<Self> {
        let half_turns = tr.half_turns()?;
        let zeros = tr.count_zeros()?;
        Ok(Self {
            d: tr.d,
            half_turns,
            v_r: tr.v_end(),
            u_r: tr.u_end(),
            zeros,
            system: tr.system,
            max_speed: tr.max_speed,
            theta_increasing: tr.theta.windows(2).all(|w| w[1] > w[0]),
        })
    }

    fn turns_floor(&self) -> T {
        self.half_turns.floor()
    }
}

/// Shoots once and summarizes; on a zero-count mismatch retries once with an
/// eight times finer dense grid.
pub fn shoot_record<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    d: T,
    system: System,
) -> Result<ShotRecord<T>> {
    let tr = integrate_shoot(problem, settings, d, system)?;
    match ShotRecord::from_trajectory(&tr) {
        Err(Error::ZeroCountMismatch { .. }) => {
            let finer = IntegratorSettings {
                dense_stride: Some(settings.dense_stride(problem.radius()) / T::lit(8.0)),
                ..*settings
            };
            let tr = integrate_shoot(problem, &finer, d, system)?;
            ShotRecord::from_trajectory(&tr)
        }
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real"))]
pub struct ScanOptions<T> {
    /// Points of the initial grid, uniform in the stretched coordinate; half
    /// as many again are added uniformly in `d`.
    pub initial_points: usize,
    /// Half-width of the excluded band around `d = 1`.
    pub guard: T,
    /// Bisection stops once neighbours are closer than this fraction of the
    /// scanned range, measured in the stretched coordinate.
    pub resolution: T,
    pub system: System,
    /// Golden-section refinement of interior extrema of the half-turn profile.
    pub refine_extrema: bool,
    /// Upper bound on refined extrema per scan (largest first).
    pub max_extrema: usize,
}

impl<T: Real> Default for ScanOptions<T> {
    fn default() -> Self {
        Self {
            initial_points: 200,
            guard: T::lit(1e-6),
            resolution: T::lit(1e-4),
            system: System::Auxiliary,
            refine_extrema: true,
            max_extrema: 16,
        }
    }
}

impl<T: Real> ScanOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.initial_points < 2 {
            return Err(Error::InvalidConfig("scan needs at least 2 initial points".into()));
        }
        if !(self.guard > T::zero() && self.guard < T::half()) {
            return Err(Error::InvalidConfig(format!(
                "guard must lie in (0, 0.5), got {}",
                self.guard
            )));
        }
        if !(self.resolution > T::zero() && self.resolution < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "resolution must lie in (0, 1), got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

/// Adjacent scan records across which `v(R)` changes sign.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
    pub v_lo: T,
    pub v_hi: T,
    pub turns_lo: T,
    pub turns_hi: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak<T> {
    pub d: T,
    pub half_turns: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShotFailure {
    pub d: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult<T> {
    pub d_lo: T,
    pub d_hi: T,
    /// Sorted by strictly increasing `d`.
    pub records: Vec<ShotRecord<T>>,
    pub brackets: Vec<Bracket<T>>,
    /// Interior local maxima of the half-turn profile.
    pub peaks: Vec<Peak<T>>,
    pub peak_below: Option<Peak<T>>,
    pub peak_above: Option<Peak<T>>,
    pub failures: Vec<ShotFailure>,
}

impl<T: Real> ScanResult<T> {
    pub fn max_half_turns(&self) -> Option<Peak<T>> {
        self.records
            .iter()
            .map(|r| Peak {
                d: r.d,
                half_turns: r.half_turns,
            })
            .fold(None, |best: Option<Peak<T>>, p| match best {
                Some(b) if b.half_turns >= p.half_turns => Some(b),
                _ => Some(p),
            })
    }
}

struct Sample<T> {
    xi: T,
    rec: ShotRecord<T>,
}

fn shoot_batch<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    system: System,
    side: Side,
    points: &[(T, T)],
) -> (Vec<Sample<T>>, Vec<ShotFailure>) {
    let results: Vec<(T, Result<ShotRecord<T>>)> = points
        .par_iter()
        .map(|&(xi, d)| (xi, shoot_record(problem, settings, d, system)))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (xi, res) in results {
        match res {
            Ok(rec) => ok.push(Sample { xi, rec }),
            Err(e) => failed.push(ShotFailure {
                d: side.to_d(xi).as_f64(),
                reason: e.to_string(),
            }),
        }
    }
    (ok, failed)
}

fn merge<T: Real>(samples: &mut Vec<Sample<T>>, new: Vec<Sample<T>>) {
    samples.extend(new);
    samples.sort_by(|a, b| a.xi.partial_cmp(&b.xi).expect("finite xi"));
    samples.dedup_by(|a, b| a.rec.d == b.rec.d);
}

fn needs_split<T: Real>(a: &ShotRecord<T>, b: &ShotRecord<T>) -> bool {
    a.turns_floor() != b.turns_floor() || (a.v_r > T::zero()) != (b.v_r > T::zero())
}

/// Shoots over `[d_lo, d_hi]`, which must lie on one side of 1 outside the
/// guard band, and records every sign change of `v(R)`.
pub fn scan<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    d_lo: T,
    d_hi: T,
    opts: &ScanOptions<T>,
) -> Result<ScanResult<T>> {
    opts.validate()?;
    settings.validate(problem.radius())?;
    if !(d_lo >= T::zero() && d_lo < d_hi) {
        return Err(Error::InvalidConfig(format!(
            "scan interval must satisfy 0 <= d_lo < d_hi, got [{d_lo}, {d_hi}]"
        )));
    }
    let (side, lo, hi) = if d_hi <= T::one() - opts.guard {
        // d = 0 is the constant solution; the stretched grid starts just above it
        let lo = if d_lo == T::zero() {
            opts.guard.min(d_hi * T::half())
        } else {
            d_lo
        };
        (Side::BelowOne, lo, d_hi)
    } else if d_lo >= T::one() + opts.guard {
        (Side::AboveOne, d_lo, d_hi)
    } else {
        return Err(Error::InvalidConfig(format!(
            "scan interval [{d_lo}, {d_hi}] meets the guard band around d = 1"
        )));
    };

    let (xa, xb) = (side.to_xi(lo), side.to_xi(hi));
    let span = xb - xa;
    let res = opts.resolution * span;
    let n = opts.initial_points;
    let mut points: Vec<(T, T)> = (1..n - 1)
        .map(|i| {
            let xi = xa + span * T::from_count(i) / T::from_count(n - 1);
            (xi, side.to_d(xi))
        })
        .collect();
    let m = n / 2;
    for i in 1..m {
        let d = lo + (hi - lo) * T::from_count(i) / T::from_count(m);
        points.push((side.to_xi(d), d));
    }
    // exact endpoints, so the records start and end where requested
    points.push((xa, lo));
    points.push((xb, hi));

    let system = opts.system;
    let (mut samples, mut failures) = shoot_batch(problem, settings, system, side, &points);
    if d_lo == T::zero() {
        match shoot_record(problem, settings, T::zero(), system) {
            Ok(rec) => samples.push(Sample {
                xi: T::neg_infinity(),
                rec,
            }),
            Err(e) => failures.push(ShotFailure {
                d: 0.0,
                reason: e.to_string(),
            }),
        }
    }
    merge(&mut samples, Vec::new());

    let mut refined_extrema: Vec<T> = Vec::new();
    loop {
        let mut todo: Vec<(T, T)> = Vec::new();
        for w in samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if !a.xi.is_finite() {
                continue;
            }
            let gap = (a.rec.turns_floor() - b.rec.turns_floor()).abs();
            let width = b.xi - a.xi;
            // two or more integer crossings in one cell share a sign of
            // v(R); keep splitting such cells down to rounding level
            let floor_width = T::lit(64.0) * T::unit_roundoff() * a.xi.abs().max(b.xi.abs()).max(T::one());
            let split = (needs_split(&a.rec, &b.rec) && width > res)
                || (gap >= T::two() && width > floor_width);
            if split {
                let xi = T::half() * (a.xi + b.xi);
                let d = side.to_d(xi);
                if d > a.rec.d && d < b.rec.d {
                    todo.push((xi, d));
                }
            }
        }
        if todo.is_empty() && opts.refine_extrema {
            let extrema = interior_extrema(&samples, &refined_extrema, opts.max_extrema);
            if !extrema.is_empty() {
                let found: Vec<(Vec<Sample<T>>, Vec<ShotFailure>)> = extrema
                    .par_iter()
                    .map(|&(a, _, b, maximize)| {
                        refine_extremum(problem, settings, system, side, a, b, maximize, res)
                    })
                    .collect();
                for (_, c, _, _) in &extrema {
                    refined_extrema.push(*c);
                }
                for (s, f) in found {
                    merge(&mut samples, s);
                    failures.extend(f);
                }
                continue;
            }
        }
        if todo.is_empty() {
            break;
        }
        let (new, failed) = shoot_batch(problem, settings, system, side, &todo);
        failures.extend(failed);
        merge(&mut samples, new);
    }

    let mut brackets = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (&w[0].rec, &w[1].rec);
        if (a.v_r > T::zero()) != (b.v_r > T::zero()) || a.v_r == T::zero() {
            brackets.push(Bracket {
                lo: a.d,
                hi: b.d,
                v_lo: a.v_r,
                v_hi: b.v_r,
                turns_lo: a.half_turns,
                turns_hi: b.half_turns,
            });
        }
    }

    let mut peaks = Vec::new();
    for w in samples.windows(3) {
        let (a, c, b) = (&w[0].rec, &w[1].rec, &w[2].rec);
        if c.half_turns > a.half_turns && c.half_turns >= b.half_turns {
            peaks.push(Peak {
                d: c.d,
                half_turns: c.half_turns,
            });
        }
    }
    let records: Vec<ShotRecord<T>> = samples.into_iter().map(|s| s.rec).collect();
    let mut out = ScanResult {
        d_lo,
        d_hi,
        records,
        brackets,
        peaks,
        peak_below: None,
        peak_above: None,
        failures,
    };
    let top = out.max_half_turns();
    match side {
        Side::BelowOne => out.peak_below = top,
        Side::AboveOne => out.peak_above = top,
    }
    Ok(out)
}

/// Strict interior extrema `(xi_left, xi_centre, xi_right, is_max)` not yet
/// refined, largest half-turn excursions first.
fn interior_extrema<T: Real>(
    samples: &[Sample<T>],
    done: &[T],
    cap: usize,
) -> Vec<(T, T, T, bool)> {
    let eps = T::lit(1e-9);
    let mut found: Vec<(T, (T, T, T, bool))> = Vec::new();
    for w in samples.windows(3) {
        let (a, c, b) = (&w[0], &w[1], &w[2]);
        if !a.xi.is_finite() {
            continue;
        }
        let (ha, hc, hb) = (a.rec.half_turns, c.rec.half_turns, b.rec.half_turns);
        let is_max = hc > ha + eps && hc > hb + eps;
        let is_min = hc < ha - eps && hc < hb - eps;
        if !(is_max || is_min) {
            continue;
        }
        if done.iter().any(|x| *x >= a.xi && *x <= b.xi) {
            continue;
        }
        let size = (hc - ha).abs().min((hc - hb).abs());
        found.push((size, (a.xi, c.xi, b.xi, is_max)));
    }
    found.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite"));
    found.into_iter().take(cap).map(|(_, e)| e).collect()
}

#[allow(clippy::too_many_arguments)]
fn refine_extremum<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    system: System,
    side: Side,
    a: T,
    b: T,
    maximize: bool,
    res: T,
) -> (Vec<Sample<T>>, Vec<ShotFailure>) {
    use std::cell::RefCell;
    let seen: RefCell<Vec<Sample<T>>> = RefCell::new(Vec::new());
    let failed: RefCell<Vec<ShotFailure>> = RefCell::new(Vec::new());
    let sign = if maximize { T::one() } else { -T::one() };
    let objective = |xi: T| -> T {
        match shoot_record(problem, settings, side.to_d(xi), system) {
            Ok(rec) => {
                let val = sign * rec.half_turns;
                seen.borrow_mut().push(Sample { xi, rec });
                val
            }
            Err(e) => {
                failed.borrow_mut().push(ShotFailure {
                    d: side.to_d(xi).as_f64(),
                    reason: e.to_string(),
                });
                T::neg_infinity()
            }
        }
    };
    golden_max(objective, a, b, res * T::lit(1e-3));
    (seen.into_inner(), failed.into_inner())
}

/// Label of a converged branch: `sign` is `+` above 1 and `-` below, `j` is
/// the 1-based position among the branches of that side in increasing `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BranchLabel {
    pub side: Side,
    pub j: usize,
}

impl BranchLabel {
    pub fn tag(&self) -> String {
        format!("{}{}", self.side.sign_char(), self.j)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchResult<T> {
    pub label: BranchLabel,
    pub d_star: T,
    pub zeros: usize,
    pub half_turns: T,
    /// `|v(R)|` of the original system at `d_star`.
    pub residual: T,
    pub max_abs_v: T,
    pub min_u: T,
    pub max_speed: T,
    /// Sup-norm distance between the auxiliary and original trajectories.
    pub aux_distance: T,
    /// Absolute tolerance the branch was resolved with.
    pub atol: T,
    /// Solution profile from the original system.
    #[serde(skip)]
    pub trajectory: Trajectory<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketFailure {
    pub lo: f64,
    pub hi: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionSet<T> {
    pub k: usize,
    pub radius: T,
    /// Lower end of the scan below 1, where fewer than one half-turn is made.
    pub d_lo: T,
    /// Half-turn counts at `1 - guard` and `1 + guard` are both below 1.
    pub guard_ok: bool,
    pub branches: Vec<BranchResult<T>>,
    pub failures: Vec<BracketFailure>,
    #[serde(skip)]
    pub scans: Vec<ScanResult<T>>,
}

impl<T: Real> SolutionSet<T> {
    pub fn zeros_on(&self, side: Side) -> Vec<usize> {
        self.branches
            .iter()
            .filter(|b| b.label.side == side)
            .map(|b| b.zeros)
            .collect()
    }

    /// At least `4k` branches, and on each side the zero counts contain
    /// `1, 2, ..., k, k, ..., 2, 1` in order of increasing `d`.
    pub fn pattern_holds(&self, k: usize) -> bool {
        self.branches.len() >= 4 * k
            && zero_pattern_holds(&self.zeros_on(Side::BelowOne), k)
            && zero_pattern_holds(&self.zeros_on(Side::AboveOne), k)
    }
}

/// Whether `1, ..., k, k, ..., 1` is a subsequence of `zeros`.
pub fn zero_pattern_holds(zeros: &[usize], k: usize) -> bool {
    let target: Vec<usize> = (1..=k).chain((1..=k).rev()).collect();
    let mut it = target.iter().peekable();
    for z in zeros {
        if it.peek() == Some(&z) {
            it.next();
        }
    }
    it.peek().is_none()
}

/// Residual bound on `|v(R)|` relative to `min(1, max |v|)`.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Profiles whose minimum is within this many `atol` of zero are not
/// resolved by the integration.
const ATOL_MARGIN: f64 = 1e3;
const ROOT_MAX_ITER: usize = 200;

/// Derivative-free root solve of `d -> v_d(R)` on a sign-change bracket:
/// Illinois regula falsi, falling back to bisection in the stretched
/// coordinate when the bracket stops shrinking.
pub fn solve_bracket<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    system: System,
    bracket: &Bracket<T>,
) -> Result<T> {
    let side = Side::of(bracket.lo);
    let g = |d: T| -> Result<T> { Ok(integrate_shoot(problem, settings, d, system)?.v_end()) };
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut ga, mut gb) = (bracket.v_lo, bracket.v_hi);
    if ga == T::zero() {
        return Ok(a);
    }
    if gb == T::zero() {
        return Ok(b);
    }
    if (ga > T::zero()) == (gb > T::zero()) {
        return Err(Error::NotBracketed {
            lo: a.as_f64(),
            hi: b.as_f64(),
        });
    }
    let stop = |a: T, b: T| b - a <= T::lit(4.0) * T::unit_roundoff() * a.abs().max(b.abs());
    let mut side_kept = 0i8;
    let mut width = b - a;
    for it in 0..ROOT_MAX_ITER {
        if stop(a, b) {
            break;
        }
        let mut c = b - gb * (b - a) / (gb - ga);
        let bisect = it % 3 == 2 && (b - a) > T::half() * width;
        if bisect || !(c > a && c < b) {
            c = side.to_d(T::half() * (side.to_xi(a) + side.to_xi(b)));
            if !(c > a && c < b) {
                c = T::half() * (a + b);
            }
        }
        if it % 3 == 2 {
            width = b - a;
        }
        let gc = g(c)?;
        if gc == T::zero() {
            return Ok(c);
        }
        if (gc > T::zero()) == (ga > T::zero()) {
            a = c;
            ga = gc;
            if side_kept == 1 {
                gb = gb * T::half();
            }
            side_kept = 1;
        } else {
            b = c;
            gb = gc;
            if side_kept == -1 {
                ga = ga * T::half();
            }
            side_kept = -1;
        }
    }
    // the endpoint values may have been halved by the Illinois step; re-shoot
    let (va, vb) = (g(a)?.abs(), g(b)?.abs());
    Ok(if va <= vb { a } else { b })
}

/// Why a bracket produced no branch.
enum Rejection {
    Final(String),
    /// The working precision cannot resolve the root.
    Precision(String),
}

impl Rejection {
    fn reason(self) -> String {
        match self {
            Rejection::Final(r) | Rejection::Precision(r) => r,
        }
    }
}

fn classify<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    opts: &ScanOptions<T>,
    bracket: &Bracket<T>,
) -> std::result::Result<BranchResult<T>, String> {
    let d = solve_bracket(problem, settings, opts.system, bracket).map_err(|e| e.to_string())?;
    match assess(problem, settings, opts.guard, opts.system, d) {
        Ok(b) => Ok(b),
        Err(Rejection::Precision(reason)) if T::unit_roundoff().widen() > Octuple::epsilon() => {
            classify_wide(problem, settings, opts, bracket)
                .map_err(|wide| format!("{reason}; octuple re-solve: {wide}"))
        }
        Err(r) => Err(r.reason()),
    }
}

/// Checks that the root `d` of `v(R)` is an admissible, resolved branch.
fn assess<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    guard: T,
    system: System,
    d: T,
) -> std::result::Result<BranchResult<T>, Rejection> {
    let radius = problem.radius();
    let fail = |e: Error| Rejection::Final(e.to_string());
    if (d - T::one()).abs() <= guard {
        return Err(Rejection::Final(format!("root {d} inside the guard band around 1")));
    }
    if d >= T::one() + radius {
        return Err(Rejection::Final(format!("root {d} beyond 1 + R")));
    }
    let original = integrate_shoot(problem, settings, d, System::Original).map_err(fail)?;
    let aux_distance = if system == System::Original {
        T::zero()
    } else {
        let aux = integrate_shoot(problem, settings, d, system).map_err(fail)?;
        aux.sup_distance(&original)
    };
    let zeros = match original.count_zeros() {
        Ok(z) => z,
        Err(_) => {
            let finer = IntegratorSettings {
                dense_stride: Some(settings.dense_stride(radius) / T::lit(8.0)),
                ..*settings
            };
            let tr = integrate_shoot(problem, &finer, d, System::Original).map_err(fail)?;
            tr.count_zeros().map_err(fail)?
        }
    };
    let half_turns = original.half_turns().map_err(fail)?;
    let residual = original.v_end().abs();
    let max_abs_v = original.max_abs_v();
    let min_u = original.min_u();
    let bound = T::lit(RESIDUAL_TOL) * max_abs_v.min(T::one());
    if !(residual <= bound) {
        return Err(Rejection::Precision(format!(
            "root solve stalled at d = {d}: |v(R)| = {residual:e} > {bound:e}"
        )));
    }
    let atol = settings.shot_atol(d);
    if min_u.abs() <= T::lit(ATOL_MARGIN) * atol {
        return Err(Rejection::Precision(format!(
            "profile minimum {min_u:e} at d = {d} is not resolved by atol = {atol:e}"
        )));
    }
    if !(min_u > T::zero()) {
        let reason = format!("non-positive profile at d = {d} (min u = {min_u})");
        // d moves by about min_u^2 across the separatrix of the saddle at 0
        return Err(if min_u.abs() <= T::lit(ATOL_MARGIN) * T::unit_roundoff().sqrt() {
            Rejection::Precision(reason)
        } else {
            Rejection::Final(reason)
        });
    }
    if zeros == 0 {
        return Err(Rejection::Final(format!("constant-like profile at d = {d}")));
    }
    Ok(BranchResult {
        label: BranchLabel {
            side: Side::of(d),
            j: 0,
        },
        d_star: d,
        zeros,
        half_turns,
        residual,
        max_abs_v,
        min_u,
        max_speed: original.max_speed,
        aux_distance,
        atol,
        trajectory: original,
    })
}

/// Target of the octuple bisection, relative to [`RESIDUAL_TOL`].
const WIDE_RESIDUAL_FACTOR: f64 = 1e-3;
const WIDE_MAX_ITER: usize = 260;

/// Re-solves a bracket in [`Octuple`] precision by bisection, which tolerates
/// the near-discontinuous `v(R)` next to the separatrix of the saddle at 0.
fn classify_wide<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    opts: &ScanOptions<T>,
    bracket: &Bracket<T>,
) -> std::result::Result<BranchResult<T>, String> {
    type O = Octuple;
    let tag = problem
        .spec
        .tag()
        .ok_or("custom nonlinearities cannot be re-instantiated")?;
    let spec = NonlinearitySpec::<O>::from_tag(&tag).map_err(|e| e.to_string())?;
    let config = ProblemConfig::new(problem.config.dimension, problem.radius().widen())
        .map_err(|e| e.to_string())?;
    let wide = Problem::new(spec, config).map_err(|e| e.to_string())?;
    let ws = IntegratorSettings {
        rtol: settings.rtol.widen(),
        atol: O::default_atol(),
        r_start: settings.r_start.map(Real::widen),
        max_steps: settings.max_steps,
        dense_stride: settings.dense_stride.map(Real::widen),
    };
    let side = Side::of(bracket.lo);
    let shoot = |d: O| integrate_shoot(&wide, &ws, d, opts.system).map_err(|e| e.to_string());
    let done = |tr: &Trajectory<O>| {
        let tol: O = O::lit(WIDE_RESIDUAL_FACTOR * RESIDUAL_TOL) * tr.max_abs_v().min(O::one());
        tr.v_end().abs() <= tol && tr.min_u() > O::lit(ATOL_MARGIN) * ws.shot_atol(tr.d)
    };
    let (mut a, mut b) = (bracket.lo.widen(), bracket.hi.widen());
    let va = shoot(a)?.v_end();
    let vb = shoot(b)?.v_end();
    if (va > O::zero()) == (vb > O::zero()) {
        return Err(format!("no sign change at octuple precision on [{a}, {b}]"));
    }
    let mut d = a;
    for _ in 0..WIDE_MAX_ITER {
        let mut c = side.to_d(O::half() * (side.to_xi(a) + side.to_xi(b)));
        if !(c > a && c < b) {
            c = O::half() * (a + b);
            if !(c > a && c < b) {
                break;
            }
        }
        let tr = shoot(c)?;
        d = c;
        if done(&tr) {
            break;
        }
        if (tr.v_end() > O::zero()) == (va > O::zero()) {
            a = c;
        } else {
            b = c;
        }
    }
    let found = assess(&wide, &ws, opts.guard.widen(), opts.system, d).map_err(Rejection::reason)?;
    Ok(BranchResult {
        label: found.label,
        d_star: T::narrow(found.d_star),
        zeros: found.zeros,
        half_turns: T::narrow(found.half_turns),
        residual: T::narrow(found.residual),
        max_abs_v: T::narrow(found.max_abs_v),
        min_u: T::narrow(found.min_u),
        max_speed: T::narrow(found.max_speed),
        aux_distance: T::narrow(found.aux_distance),
        atol: T::narrow(found.atol),
        trajectory: found.trajectory.map(T::narrow),
    })
}

/// Largest `d = guard * 10^{-4m}` whose shot makes fewer than one half-turn.
pub fn lower_scan_end<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    opts: &ScanOptions<T>,
) -> Result<T> {
    let floor = T::min_positive_value() * T::lit(1e20);
    let mut d = opts.guard;
    loop {
        let tr = integrate_shoot(problem, settings, d, opts.system)?;
        if tr.half_turns()? < T::one() {
            return Ok(d);
        }
        let next = d * T::lit(1e-4);
        if next < floor {
            return Err(Error::LowerEndpoint { d: d.as_f64() });
        }
        d = next;
    }
}

/// Locates every branch detectable at the scan resolution on both sides of 1.
pub fn find_solutions<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    k: usize,
    opts: &ScanOptions<T>,
) -> Result<SolutionSet<T>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    opts.validate()?;
    let radius = problem.radius();
    let d_lo = lower_scan_end(problem, settings, opts)?;
    let below = scan(problem, settings, d_lo, T::one() - opts.guard, opts)?;
    let above = scan(problem, settings, T::one() + opts.guard, T::one() + radius, opts)?;

    let edge_turns = |s: &ScanResult<T>, d: T| {
        s.records
            .iter()
            .find(|r| r.d == d)
            .map(|r| r.half_turns < T::one())
            .unwrap_or(false)
    };
    let guard_ok = edge_turns(&below, T::one() - opts.guard) && edge_turns(&above, T::one() + opts.guard);

    let brackets: Vec<Bracket<T>> = below
        .brackets
        .iter()
        .chain(&above.brackets)
        .copied()
        .collect();
    let solved: Vec<std::result::Result<BranchResult<T>, BracketFailure>> = brackets
        .par_iter()
        .map(|b| {
            classify(problem, settings, opts, b).map_err(|reason| BracketFailure {
                lo: b.lo.as_f64(),
                hi: b.hi.as_f64(),
                reason,
            })
        })
        .collect();

    let mut branches = Vec::new();
    let mut failures = Vec::new();
    for s in solved {
        match s {
            Ok(b) => branches.push(b),
            Err(f) => failures.push(f),
        }
    }
    branches.sort_by(|a, b| a.d_star.partial_cmp(&b.d_star).expect("finite"));
    let dedup_tol = T::lit(40.0) * T::unit_roundoff();
    branches.dedup_by(|b, a| (b.d_star - a.d_star).abs() <= dedup_tol * a.d_star.abs());
    for side in [Side::BelowOne, Side::AboveOne] {
        for (j, b) in branches
            .iter_mut()
            .filter(|b| b.label.side == side)
            .enumerate()
        {
            b.label.j = j + 1;
        }
    }

    Ok(SolutionSet {
        k,
        radius,
        d_lo,
        guard_ok,
        branches,
        failures,
        scans: vec![below, above],
    })
}

/// Empirical fast datum on one side: the maximizer of the half-turn count.
pub fn find_peak<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    side: Side,
    opts: &ScanOptions<T>,
) -> Result<(T, T)> {
    let result = match side {
        Side::BelowOne => {
            let lo = lower_scan_end(problem, settings, opts)?;
            scan(problem, settings, lo, T::one() - opts.guard, opts)?
        }
        Side::AboveOne => scan(
            problem,
            settings,
            T::one() + opts.guard,
            T::one() + problem.radius(),
            opts,
        )?,
    };
    let peak = result.max_half_turns().ok_or(Error::FlatProfile { max: 0.0 })?;
    if peak.half_turns < T::one() {
        return Err(Error::FlatProfile {
            max: peak.half_turns.as_f64(),
        });
    }
    Ok((peak.d, peak.half_turns))
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdEstimate<T> {
    pub k: usize,
    pub dimension: usize,
    /// Smallest radius seen where the branch pattern for `k` holds.
    pub r_star: T,
    /// Largest radius seen where it fails.
    pub r_below: T,
    /// Every predicate evaluation, in order: `(R, holds)`.
    pub evaluations: Vec<(T, bool)>,
    /// Predicate re-evaluated above `r_star`; all true if monotone there.
    pub monotone_checks: Vec<(T, bool)>,
    /// Branch searches behind `monotone_checks`, in the same order.
    #[serde(skip)]
    pub monotone_sets: Vec<SolutionSet<T>>,
}

const THRESHOLD_RTOL: f64 = 1e-3;
/// Multiples of the returned threshold where the predicate is re-checked.
pub const MONOTONE_FACTORS: [f64; 3] = [1.25, 1.5, 2.0];

/// Bisection in `R` on "`find_solutions` returns the `4k` branch pattern".
pub fn estimate_threshold_radius<T: Real>(
    spec: &NonlinearitySpec<T>,
    dimension: usize,
    k: usize,
    r_max: T,
    settings: &IntegratorSettings<T>,
    opts: &ScanOptions<T>,
) -> Result<ThresholdEstimate<T>> {
    ProblemConfig::new(dimension, r_max)?;
    let mut evaluations = Vec::new();
    let search = |r: T, log: &mut Vec<(T, bool)>| -> Result<SolutionSet<T>> {
        let problem = Problem::new(spec.clone(), ProblemConfig::new(dimension, r)?)?;
        let set = find_solutions(&problem, settings, k, opts)?;
        log.push((r, set.pattern_holds(k)));
        Ok(set)
    };
    let pred = |r: T, log: &mut Vec<(T, bool)>| -> Result<bool> {
        Ok(search(r, log)?.pattern_holds(k))
    };
    if !pred(r_max, &mut evaluations)? {
        return Err(Error::SearchWindowExhausted {
            r_max: r_max.as_f64(),
        });
    }
    let mut hi = r_max;
    let mut lo = r_max * T::half();
    let min_r = r_max * T::lit(2f64.powi(-30));
    while pred(lo, &mut evaluations)? {
        hi = lo;
        lo = lo * T::half();
        if lo < min_r {
            lo = T::zero();
            break;
        }
    }
    while hi - lo > T::lit(THRESHOLD_RTOL) * hi {
        let mid = T::half() * (lo + hi);
        if pred(mid, &mut evaluations)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut monotone_checks = Vec::new();
    let mut monotone_sets = Vec::new();
    for f in MONOTONE_FACTORS {
        let r = hi * T::lit(f);
        let set = search(r, &mut evaluations)?;
        monotone_checks.push((r, set.pattern_holds(k)));
        monotone_sets.push(set);
    }
    Ok(ThresholdEstimate {
        k,
        dimension,
        r_star: hi,
        r_below: lo,
        evaluations,
        monotone_checks,
        monotone_sets,
    })
}
