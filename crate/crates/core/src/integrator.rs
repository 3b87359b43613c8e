//! Shooting from the centre of the ball: integrates
//!
//! ```text
//! u' = phi^{-1}(v / r^{N-1}),   v' = -r^{N-1} f_hat(u),   u(0) = d, v(0) = 0
//! ```
//!
//! (or its auxiliary variant with `phi_tilde` and `f_tilde`) from `r = 0` to
//! `r = R`, and tracks the clockwise winding of `(u, v)` around `(1, 0)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_phi_inv, speed_margin, NonlinearitySpec, Problem, ProblemConfig};
use crate::ode::{self, StepControl};
use crate::scalar::Real;

/// Which right-hand side a shot uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Original,
    Auxiliary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings<T> {
    pub rtol: T,
    pub atol: T,
    /// Radius where the Taylor start hands over to the stepper; `None` means `1e-6 R`.
    #[serde(default)]
    pub r_start: Option<T>,
    pub max_steps: usize,
    /// Spacing of the dense output grid; `None` means `R / 2000`.
    #[serde(default)]
    pub dense_stride: Option<T>,
}

impl<T: Real> Default for IntegratorSettings<T> {
    fn default() -> Self {
        // rtol 1e-10, loosened to what f32 can carry
        let floor = T::unit_roundoff() * T::lit(100.0);
        Self {
            rtol: T::lit(1e-10).max(floor),
            atol: T::default_atol(),
            r_start: None,
            max_steps: 10_000_000,
            dense_stride: None,
        }
    }
}

impl<T: Real> IntegratorSettings<T> {
    pub fn r_start(&self, radius: T) -> T {
        self.r_start.unwrap_or(T::lit(1e-6) * radius)
    }

    pub fn dense_stride(&self, radius: T) -> T {
        self.dense_stride.unwrap_or(radius / T::lit(2000.0))
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            ..*self
        }
    }

    /// Absolute tolerance applied to a shot from `d`: `atol` scaled by the
    /// distance from `d` to the nearer of the equilibria 0 and 1, capped at 1.
    pub fn shot_atol(&self, d: T) -> T {
        self.atol * (d - shot_base(d)).abs().min(T::one())
    }

    pub fn validate(&self, radius: T) -> Result<()> {
        if !(self.rtol > T::zero() && self.atol > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        let rs = self.r_start(radius);
        if !(rs > T::zero() && rs < radius) {
            return Err(Error::InvalidConfig(format!(
                "r_start must lie in (0, R), got {rs}"
            )));
        }
        let stride = self.dense_stride(radius);
        if !(stride > T::zero()) || !stride.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dense_stride must be positive, got {stride}"
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Dense output abscissae `0, h, 2h, ..., R` (last interval may be shorter).
    pub fn nodes(&self, radius: T) -> Vec<T> {
        let stride = self.dense_stride(radius);
        let n = (radius / stride).ceil().to_usize().unwrap_or(1).max(1);
        let mut out: Vec<T> = (0..n).map(|i| stride * T::from_count(i)).collect();
        out.push(radius);
        out
    }
}

/// Right-hand side of the original system at `r > 0`.
pub fn rhs_original<T: Real>(problem: &Problem<T>, r: T, u: T, v: T) -> Result<(T, T)> {
    if !(r > T::zero()) {
        return Err(Error::SingularPoint);
    }
    Ok(rhs_unchecked(problem, System::Original, r, u, v))
}

/// Right-hand side of the auxiliary system at `r > 0`.
pub fn rhs_auxiliary<T: Real>(problem: &Problem<T>, r: T, u: T, v: T) -> Result<(T, T)> {
    if !(r > T::zero()) {
        return Err(Error::SingularPoint);
    }
    Ok(rhs_unchecked(problem, System::Auxiliary, r, u, v))
}

#[inline]
fn rhs_unchecked<T: Real>(problem: &Problem<T>, system: System, r: T, u: T, v: T) -> (T, T) {
    let w = problem.config.weight(r);
    match system {
        System::Original => (eval_phi_inv(v / w), -w * problem.spec.eval_hat(u)),
        System::Auxiliary => (
            problem.trunc.phi_tilde_inv(v / w),
            -w * problem.trunc.f_tilde(&problem.spec, u),
        ),
    }
}

/// `1 - |u'|` at the given state, evaluated without cancellation.
fn speed_margin_at<T: Real>(problem: &Problem<T>, system: System, r: T, v: T) -> T {
    let t = v / problem.config.weight(r);
    match system {
        System::Original => speed_margin(t),
        System::Auxiliary => {
            let tr = &problem.trunc;
            let mr = tr.phi_at_gamma();
            if t.abs() <= mr {
                speed_margin(t)
            } else {
                speed_margin(mr) - (t.abs() - mr) / tr.phi_slope
            }
        }
    }
}

/// Right-hand side of the angle equation at `r > 0`: the rate at which
/// `(u, v)` turns clockwise around `(1, 0)`.
pub fn theta_rate<T: Real>(problem: &Problem<T>, system: System, r: T, u: T, v: T) -> T {
    let (du, dv) = rhs_unchecked(problem, system, r, u, v);
    let x = u - T::one();
    // theta = atan2(-v, u - 1)
    (du * v - x * dv) / (x * x + v * v)
}

/// Series start at small `r` for the original system:
/// `v = -f_hat(d) r^N / N` and `u = d + int_0^r phi^{-1}(v(s) / s^{N-1}) ds`,
/// which reduces to `u = d - f_hat(d) r^2 / (2N)` while `f_hat(d) r` is small.
pub fn taylor_start<T: Real>(
    spec: &NonlinearitySpec<T>,
    config: &ProblemConfig<T>,
    d: T,
    r: T,
) -> (T, T) {
    let (du, v) = taylor_offsets(spec.eval_hat(d), config, r);
    (d + du, v)
}

fn forcing_at<T: Real>(problem: &Problem<T>, system: System, u: T) -> T {
    match system {
        System::Original => problem.spec.eval_hat(u),
        System::Auxiliary => problem.trunc.f_tilde(&problem.spec, u),
    }
}

fn taylor_offsets<T: Real>(fd: T, config: &ProblemConfig<T>, r: T) -> (T, T) {
    let a = fd / config.n();
    let ar = a * r;
    // int_0^r phi^{-1}(-a s) ds = -(sqrt(1 + a^2 r^2) - 1) / a
    let du = -ar * r / (T::one().hypot(ar) + T::one());
    (du, -a * config.weight(r) * r)
}

/// Dense record of one shot.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory<T> {
    pub d: T,
    pub system: System,
    pub r: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// `u - 1`, carried separately so it keeps full precision near the equilibrium.
    pub deviation: Vec<T>,
    /// Polar angle of `(u - 1, -v)` at `r = 0`: `pi` below 1, `0` above.
    pub theta0: T,
    /// Clockwise angle swept around `(1, 0)` since `r = 0`, so
    /// `theta0 + theta` is the polar angle. Empty for `d = 1`.
    pub theta: Vec<T>,
    pub rho: Vec<T>,
    /// Largest `|u'|` seen at accepted steps.
    pub max_speed: T,
    /// Smallest `1 - |u'|` seen at accepted steps.
    pub min_speed_margin: T,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Real> Trajectory<T> {
    fn constant(d: T, system: System, r: Vec<T>) -> Self {
        let n = r.len();
        Self {
            d,
            system,
            r,
            u: vec![d; n],
            v: vec![T::zero(); n],
            deviation: vec![d - T::one(); n],
            theta0: initial_angle(d),
            theta: Vec::new(),
            rho: vec![(d - T::one()).abs(); n],
            max_speed: T::zero(),
            min_speed_margin: T::one(),
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    /// The same trajectory with every scalar converted by `f`.
    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Trajectory<U> {
        let conv = |xs: &[T]| xs.iter().map(|&x| f(x)).collect::<Vec<U>>();
        Trajectory {
            d: f(self.d),
            system: self.system,
            r: conv(&self.r),
            u: conv(&self.u),
            v: conv(&self.v),
            deviation: conv(&self.deviation),
            theta0: f(self.theta0),
            theta: conv(&self.theta),
            rho: conv(&self.rho),
            max_speed: f(self.max_speed),
            min_speed_margin: f(self.min_speed_margin),
            accepted_steps: self.accepted_steps,
            rejected_steps: self.rejected_steps,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn has_polar(&self) -> bool {
        !self.theta.is_empty()
    }

    pub fn u_end(&self) -> T {
        *self.u.last().expect("non-empty trajectory")
    }

    pub fn v_end(&self) -> T {
        *self.v.last().expect("non-empty trajectory")
    }

    pub fn min_u(&self) -> T {
        self.u.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs_v(&self) -> T {
        self.v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// `(theta(R) - theta(0)) / pi`.
    pub fn half_turns(&self) -> Result<T> {
        match self.theta.last() {
            Some(b) => Ok(*b / T::PI()),
            None => Err(Error::NoPolarData),
        }
    }

    /// Zeros of `u - 1` in `(0, R)`, counted from the angle and checked
    /// against the sign changes of the dense samples.
    pub fn count_zeros(&self) -> Result<usize> {
        let angle = angle_zero_count(self.half_turns()?);
        let direct = self.sign_changes();
        if angle != direct {
            return Err(Error::ZeroCountMismatch {
                angle,
                sign_changes: direct,
            });
        }
        Ok(angle)
    }

    /// Sign changes of `u - 1` along the dense samples, ignoring exact zeros.
    pub fn sign_changes(&self) -> usize {
        let mut count = 0;
        let mut prev: Option<bool> = None;
        for &x in &self.deviation {
            if x == T::zero() {
                continue;
            }
            let pos = x > T::zero();
            if let Some(p) = prev {
                if p != pos {
                    count += 1;
                }
            }
            prev = Some(pos);
        }
        count
    }

    /// `sqrt(1 + v^2) + F(u)`, conserved when `N = 1`.
    pub fn first_integral(&self, spec: &NonlinearitySpec<T>) -> Vec<T> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&u, &v)| T::one().hypot(v) + spec.primitive(u))
            .collect()
    }

    /// Largest `|Delta u|` or `|Delta v|` between two trajectories on the same grid.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| (*a - *b).abs())
            .chain(self.v.iter().zip(&other.v).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max)
    }

    /// CSV with header `r,u,v,theta,rho`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,u,v,theta,rho")?;
        for i in 0..self.len() {
            let theta = self
                .theta
                .get(i)
                .map_or(f64::NAN, |t| (self.theta0 + *t).as_f64());
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(self.r[i].as_f64()),
                fmt17(self.u[i].as_f64()),
                fmt17(self.v[i].as_f64()),
                fmt17(theta),
                fmt17(self.rho[i].as_f64()),
            )?;
        }
        Ok(())
    }
}

/// `(theta(R) - theta(0)) / pi` for a shot.
pub fn half_turns<T: Real>(tr: &Trajectory<T>) -> Result<T> {
    tr.half_turns()
}

/// Zero count of `u - 1` in `(0, R)`; fails if the angle and the dense
/// samples disagree.
pub fn count_zeros<T: Real>(tr: &Trajectory<T>) -> Result<usize> {
    tr.count_zeros()
}

/// Fixed 17-significant-digit float formatting for CSV output.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Crossings of `pi/2 + k pi` strictly inside `(theta(0), theta(R))` for a
/// trajectory starting on the `u` axis.
pub fn angle_zero_count<T: Real>(half_turns: T) -> usize {
    (half_turns - T::half()).ceil().max(T::zero()).to_usize().unwrap_or(0)
}

fn shot_base<T: Real>(d: T) -> T {
    if d < T::half() {
        T::zero()
    } else {
        T::one()
    }
}

/// Integrates one shot from `u(0) = d` over `[0, R]`.
pub fn integrate_shoot<T: Real>(
    problem: &Problem<T>,
    settings: &IntegratorSettings<T>,
    d: T,
    system: System,
) -> Result<Trajectory<T>> {
    let radius = problem.radius();
    settings.validate(radius)?;
    if !(d >= T::zero()) || !d.is_finite() {
        return Err(Error::InvalidConfig(format!("initial datum must be >= 0, got {d}")));
    }
    let nodes = settings.nodes(radius);
    if d == T::one() {
        return Ok(Trajectory::constant(d, system, nodes));
    }
    if d == T::zero() {
        let mut tr = Trajectory::constant(d, system, nodes);
        polar_unwrap(&mut tr)?;
        return Ok(tr);
    }

    // Integrate the offset from whichever equilibrium (0 or 1) is closer to d,
    // so shots starting next to either one keep relative accuracy.
    let base = shot_base(d);
    let offset0 = d - base;
    let r_start = settings.r_start(radius);
    let fd = forcing_at(problem, system, d);
    let (du, v_start) = taylor_offsets(fd, &problem.config, r_start);
    let ctl = StepControl {
        rtol: settings.rtol,
        atol: settings.shot_atol(d),
        max_steps: settings.max_steps,
        h_max: None,
    };

    let first = nodes.partition_point(|&r| r < r_start);
    let x0 = d - T::one();
    let swept_start = turn_between(x0, T::zero(), offset0 + du + (base - T::one()), -v_start);
    let mut max_speed = T::zero();
    let mut min_margin = T::one();
    // kinks of the right-hand side: f_hat at u = 0, and for the auxiliary
    // system the taper ends |u| = 1 + R, 2 + R and the corner |t| = M R of phi~
    let trunc = &problem.trunc;
    let at_zero = |_: T, y: &[T; 3]| base + y[0];
    let at_inner = |_: T, y: &[T; 3]| (base + y[0]).abs() - trunc.inner_cutoff;
    let at_outer = |_: T, y: &[T; 3]| (base + y[0]).abs() - trunc.outer_cutoff;
    let at_corner =
        |r: T, y: &[T; 3]| (y[1] / problem.config.weight(r)).abs() - trunc.phi_at_gamma();
    let switches: Vec<ode::Switch<'_, T, 3>> = match system {
        System::Original => vec![&at_zero],
        System::Auxiliary => vec![&at_zero, &at_inner, &at_outer, &at_corner],
    };
    // relative accuracy is measured against the distance to the nearest
    // equilibrium, which keeps passages close to the saddle at u = 0 resolved
    let magnitude = |y: &[T; 3]| {
        let u = base + y[0];
        let m = u.hypot(y[1]).min((u - T::one()).hypot(y[1]));
        [m, m, y[2].abs()]
    };
    let sol = ode::integrate_switched(
        |r, y: &[T; 3]| {
            let u = base + y[0];
            let (a, b) = rhs_unchecked(problem, system, r, u, y[1]);
            let x = if base == T::one() { y[0] } else { y[0] - T::one() };
            let rate = (a * y[1] - x * b) / (x * x + y[1] * y[1]);
            [a, b, rate]
        },
        r_start,
        [offset0 + du, v_start, swept_start],
        radius,
        &ctl,
        &nodes[first..],
        |r, y, dy| {
            max_speed = max_speed.max(dy[0].abs());
            min_margin = min_margin.min(speed_margin_at(problem, system, r, y[1]));
        },
        &switches,
        Some(&magnitude),
    )?;

    let n = nodes.len();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut deviation = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for &r in &nodes[..first] {
        let (du, dv) = taylor_offsets(fd, &problem.config, r);
        let x = offset0 + du + (base - T::one());
        u.push(d + du);
        v.push(dv);
        deviation.push(x);
        theta.push(turn_between(x0, T::zero(), x, -dv));
    }
    for y in &sol.dense {
        u.push(base + y[0]);
        v.push(y[1]);
        deviation.push(if base == T::one() {
            y[0]
        } else {
            y[0] - T::one()
        });
        theta.push(y[2]);
    }
    // The integrated angle fixes the branch; the sampled state fixes the
    // value, so the angle and the sign of u - 1 agree at every node.
    let two_pi = T::two() * T::PI();
    for i in 0..n {
        let t = turn_between(x0, T::zero(), deviation[i], -v[i]);
        theta[i] = t + two_pi * ((theta[i] - t) / two_pi).round();
    }
    let mut rho = Vec::with_capacity(n);
    for i in 0..n {
        let p = deviation[i].hypot(v[i]);
        if p < T::lit(RHO_FLOOR) {
            return Err(Error::NearEquilibrium {
                rho: p.as_f64(),
                r: nodes[i].as_f64(),
            });
        }
        rho.push(p);
    }

    Ok(Trajectory {
        d,
        system,
        r: nodes,
        u,
        v,
        deviation,
        theta0: initial_angle(d),
        theta,
        rho,
        max_speed,
        min_speed_margin: min_margin,
        accepted_steps: sol.accepted,
        rejected_steps: sol.rejected,
    })
}

const RHO_FLOOR: f64 = 1e-14;

fn initial_angle<T: Real>(d: T) -> T {
    if d < T::one() {
        T::PI()
    } else {
        T::zero()
    }
}

/// Signed angle from `(x0, y0)` to `(x1, y1)` in `(-pi, pi]`, accurate for
/// small turns.
fn turn_between<T: Real>(x0: T, y0: T, x1: T, y1: T) -> T {
    (x0 * y1 - y0 * x1).atan2(x0 * x1 + y0 * y1)
}

/// Rebuilds `rho` and the swept angle from the dense samples alone, taking
/// the turn between consecutive samples in `(-pi, pi]`. Faithful only when
/// the samples are fine enough that no turn between them exceeds `pi`;
/// `integrate_shoot` integrates the angle instead.
pub fn polar_unwrap<T: Real>(tr: &mut Trajectory<T>) -> Result<()> {
    if tr.d == T::one() {
        return Err(Error::NoPolarData);
    }
    let mut rho = Vec::with_capacity(tr.len());
    let mut theta = Vec::with_capacity(tr.len());
    for i in 0..tr.len() {
        let x = tr.deviation[i];
        let y = -tr.v[i];
        let p = x.hypot(y);
        if p < T::lit(RHO_FLOOR) {
            return Err(Error::NearEquilibrium {
                rho: p.as_f64(),
                r: tr.r[i].as_f64(),
            });
        }
        rho.push(p);
        if i == 0 {
            theta.push(T::zero());
        } else {
            let step = turn_between(tr.deviation[i - 1], -tr.v[i - 1], x, y);
            theta.push(theta[i - 1] + step);
        }
    }
    tr.theta0 = initial_angle(tr.d);
    tr.rho = rho;
    tr.theta = theta;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NonlinearitySpec;
    use approx::assert_relative_eq;

    fn problem(n: usize, r: f64) -> Problem<f64> {
        Problem::new(
            NonlinearitySpec::cubic_pinned(),
            ProblemConfig::new(n, r).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = problem(2, 1.0);
        assert_eq!(rhs_original(&p, 1.0, 1.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(rhs_original(&p, 1.0, 2.0, 0.0).unwrap(), (0.0, -2.0));
        let (a, b) = rhs_original(&p, 2.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(a, 0.447_213_595_499_958, max_relative = 1e-14);
        assert_relative_eq!(b, 0.125, max_relative = 1e-15);
        assert!(matches!(rhs_original(&p, 0.0, 1.0, 0.0), Err(Error::SingularPoint)));
        assert!(matches!(rhs_auxiliary(&p, 0.0, 1.0, 0.0), Err(Error::SingularPoint)));
    }

    #[test]
    fn auxiliary_rhs_examples() {
        let p = problem(2, 1.0);
        assert_eq!(rhs_auxiliary(&p, 1.0, 1.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(rhs_auxiliary(&p, 1.0, 3.0, 0.0).unwrap(), (0.0, 0.0));
        // agreement region: |v / r^{N-1}| <= M R and |u| <= 1 + R
        for v in [-24.0, -3.0, -0.1, 0.0, 0.1, 5.0, 24.0] {
            for r in [0.5, 1.0] {
                let orig = rhs_original(&p, r, 2.0, v * r).unwrap();
                let aux = rhs_auxiliary(&p, r, 2.0, v * r).unwrap();
                assert_eq!(orig, aux, "v = {v}, r = {r}");
            }
        }
        // outside: the linear continuation of phi takes over
        let orig = rhs_original(&p, 1.0, 2.0, 100.0).unwrap();
        let aux = rhs_auxiliary(&p, 1.0, 2.0, 100.0).unwrap();
        assert!(aux.0 > p.trunc.gamma && aux.0 != orig.0);
        assert_relative_eq!(aux.0, p.trunc.gamma + 76.0 / p.trunc.phi_slope, max_relative = 1e-12);
    }

    #[test]
    fn taylor_start_examples() {
        let p = problem(2, 1.0);
        assert_eq!(taylor_start(&p.spec, &p.config, 1.0, 1e-3), (1.0, 0.0));
        assert_eq!(taylor_start(&p.spec, &p.config, 0.0, 1e-3), (0.0, 0.0));
        let (u, v) = taylor_start(&p.spec, &p.config, 2.0, 1e-3);
        // f(2) = 2, so u' = phi^{-1}(-r) and u(r) = 2 - (sqrt(1 + r^2) - 1)
        assert_relative_eq!(u, 2.0 - ((1.0f64 + 1e-6).sqrt() - 1.0), max_relative = 1e-15);
        assert_relative_eq!(v, -1e-6, max_relative = 1e-15);
    }

    /// Reference for the start-up error: integrate from a much smaller radius
    /// with tight tolerances, then compare the series value at r0.
    #[test]
    fn taylor_start_error_order() {
        let p = problem(2, 1.0);
        let d = 2.0;
        let reference = |r0: f64| {
            let r_tiny = 1e-7;
            let (u0, v0) = taylor_start(&p.spec, &p.config, d, r_tiny);
            let ctl = StepControl {
                rtol: 1e-14,
                atol: 1e-20,
                max_steps: 1_000_000,
                h_max: None,
            };
            let sol = ode::integrate(
                |r, y: &[f64; 2]| {
                    let (a, b) = rhs_original(&p, r, y[0], y[1]).unwrap();
                    [a, b]
                },
                r_tiny,
                [u0, v0],
                r0,
                &ctl,
                &[],
                |_, _, _| {},
            )
            .unwrap();
            sol.end
        };
        let err = |r0: f64| {
            let exact = reference(r0);
            let (u, v) = taylor_start(&p.spec, &p.config, d, r0);
            ((u - exact[0]).abs(), (v - exact[1]).abs())
        };
        let (eu1, ev1) = err(0.02);
        let (eu2, ev2) = err(0.01);
        // u error O(r^4), v error O(r^{N+2}) = O(r^4) for N = 2
        let ou = (eu1 / eu2).log2();
        let ov = (ev1 / ev2).log2();
        assert!((ou - 4.0).abs() < 0.3, "u order {ou}");
        assert!((ov - 4.0).abs() < 0.3, "v order {ov}");
    }

    #[test]
    fn equilibria_are_constant() {
        let p = problem(2, 3.0);
        let s = IntegratorSettings::default();
        let one = integrate_shoot(&p, &s, 1.0, System::Original).unwrap();
        assert!(one.u.iter().all(|&u| u == 1.0));
        assert!(one.v.iter().all(|&v| v == 0.0));
        assert!(!one.has_polar());
        assert!(matches!(one.half_turns(), Err(Error::NoPolarData)));

        let zero = integrate_shoot(&p, &s, 0.0, System::Auxiliary).unwrap();
        assert!(zero.u.iter().all(|&u| u == 0.0));
        assert_eq!(zero.half_turns().unwrap(), 0.0);
        assert_eq!(zero.count_zeros().unwrap(), 0);
    }

    #[test]
    fn initial_angles() {
        let p = problem(2, 3.0);
        let s = IntegratorSettings::default();
        let below = integrate_shoot(&p, &s, 0.5, System::Original).unwrap();
        assert_eq!(below.theta0, std::f64::consts::PI);
        assert_eq!(below.theta[0], 0.0);
        assert_eq!(below.u[0], 0.5);
        assert_eq!(below.v[0], 0.0);
        let above = integrate_shoot(&p, &s, 2.0, System::Original).unwrap();
        assert_eq!(above.theta0, 0.0);
        assert_eq!(above.theta[0], 0.0);
        assert_relative_eq!(above.rho[0], 1.0);
    }

    #[test]
    fn large_datum_stays_above_one() {
        let p = problem(2, 1.0);
        let s = IntegratorSettings::default();
        let tr = integrate_shoot(&p, &s, 2.0, System::Original).unwrap();
        assert!(tr.u.iter().all(|&u| u >= 1.0));
        assert!(tr.v_end() != 0.0);
        assert!(tr.half_turns().unwrap() < 1.0);
        for (r, u) in tr.r.iter().zip(&tr.u) {
            assert!(*u >= 2.0 - r - 1e-12);
        }
    }

    #[test]
    fn near_one_is_slow() {
        let p = problem(2, 5.0);
        let s = IntegratorSettings::default();
        for d in [1.0 - 1e-6, 1.0 + 1e-6] {
            let tr = integrate_shoot(&p, &s, d, System::Auxiliary).unwrap();
            let ht = tr.half_turns().unwrap();
            assert!(ht < 1.0 && ht > 0.0, "d = {d}, ht = {ht}");
            assert!(tr.theta.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn trajectory_invariants() {
        let p = problem(2, 12.0);
        let s = IntegratorSettings::default();
        for d in [0.05, 0.4, 0.9, 1.3, 2.2, 5.0] {
            let tr = integrate_shoot(&p, &s, d, System::Auxiliary).unwrap();
            assert!(tr.max_speed < 1.0 && tr.min_speed_margin > 0.0);
            for i in 0..tr.len() {
                let lhs = tr.deviation[i].powi(2) + tr.v[i].powi(2);
                assert_relative_eq!(lhs, tr.rho[i].powi(2), max_relative = 1e-10);
            }
            for i in 1..tr.len() {
                assert!(tr.theta[i] > tr.theta[i - 1]);
                assert!((tr.u[i] - tr.u[i - 1]).abs() < tr.r[i] - tr.r[i - 1]);
            }
            tr.count_zeros().unwrap();
        }
    }

    #[test]
    fn angle_equation_cross_check() {
        let p = problem(2, 12.0);
        let mut s = IntegratorSettings::default();
        s.dense_stride = Some(1e-3);
        let tr = integrate_shoot(&p, &s, 2.2, System::Original).unwrap();
        let mut worst = 0.0f64;
        for i in 1..tr.len() - 1 {
            if tr.rho[i] <= 1e-3 {
                continue;
            }
            let fd = (tr.theta[i + 1] - tr.theta[i - 1]) / (tr.r[i + 1] - tr.r[i - 1]);
            let rate = theta_rate(&p, System::Original, tr.r[i], tr.u[i], tr.v[i]);
            worst = worst.max((fd - rate).abs());
        }
        assert!(worst < 1e-4, "worst residual {worst}");
    }

    #[test]
    fn integrated_angle_matches_fine_samples() {
        let p = problem(2, 20.0);
        let mut s = IntegratorSettings::default();
        s.dense_stride = Some(2e-4);
        for d in [0.02, 0.6, 1.35, 2.2, 2.35, 4.0] {
            let tr = integrate_shoot(&p, &s, d, System::Original).unwrap();
            let mut sampled = tr.clone();
            polar_unwrap(&mut sampled).unwrap();
            let worst = tr
                .theta
                .iter()
                .zip(&sampled.theta)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(worst < 1e-6, "d = {d}: {worst}");
        }
    }

    #[test]
    fn continuous_dependence_on_datum() {
        let p = problem(2, 8.0);
        let s = IntegratorSettings::default();
        let base = integrate_shoot(&p, &s, 2.0, System::Original).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..6 {
            let eps = 1e-2 / 2f64.powi(k);
            let tr = integrate_shoot(&p, &s, 2.0 + eps, System::Original).unwrap();
            let dist = tr
                .u
                .iter()
                .zip(&base.u)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dist < prev, "no decay at eps = {eps}");
            prev = dist;
        }
    }

    #[test]
    fn first_integral_conserved_in_one_dimension() {
        let p = problem(1, 5.0);
        let s = IntegratorSettings::default();
        for d in [0.2, 0.7, 1.5, 3.0, 6.0] {
            let tr = integrate_shoot(&p, &s, d, System::Original).unwrap();
            let e = tr.first_integral(&p.spec);
            let drift = e.iter().fold(0.0f64, |m, x| m.max((x - e[0]).abs())) / e[0];
            assert!(drift < 1e-8, "d = {d}: drift {drift}");
        }
    }

    #[test]
    fn self_convergence_of_angle() {
        let p = problem(2, 10.0);
        let s = IntegratorSettings::default();
        let fine = s.scaled(0.5);
        for d in [0.3, 2.3] {
            let a = integrate_shoot(&p, &s, d, System::Auxiliary).unwrap();
            let b = integrate_shoot(&p, &fine, d, System::Auxiliary).unwrap();
            let ta = *a.theta.last().unwrap();
            let tb = *b.theta.last().unwrap();
            assert!((ta - tb).abs() < 10.0 * s.rtol * ta.abs(), "{ta} vs {tb}");
        }
    }

    #[test]
    fn csv_export_format() {
        let p = problem(2, 1.0);
        let s = IntegratorSettings {
            dense_stride: Some(0.5),
            ..IntegratorSettings::default()
        };
        let tr = integrate_shoot(&p, &s, 1.5, System::Original).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,u,v,theta,rho"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(first[1], "1.5000000000000000e0");
        assert_eq!(text.lines().count(), 1 + tr.len());
    }

    #[test]
    fn rejects_bad_input() {
        let p = problem(2, 1.0);
        let s = IntegratorSettings::default();
        assert!(integrate_shoot(&p, &s, -0.5, System::Original).is_err());
        let bad = IntegratorSettings {
            r_start: Some(2.0),
            ..s
        };
        assert!(integrate_shoot(&p, &bad, 0.5, System::Original).is_err());
    }

    #[test]
    fn single_precision_shot() {
        let p = Problem::new(
            NonlinearitySpec::<f32>::cubic_pinned(),
            ProblemConfig::new(2, 12.0f32).unwrap(),
        )
        .unwrap();
        let tr = integrate_shoot(&p, &IntegratorSettings::default(), 2.2f32, System::Original).unwrap();
        let p64 = problem(2, 12.0);
        let tr64 =
            integrate_shoot(&p64, &IntegratorSettings::default(), 2.2, System::Original).unwrap();
        let ht = tr.half_turns().unwrap() as f64;
        assert!((ht - tr64.half_turns().unwrap()).abs() < 1e-3);
    }
}
