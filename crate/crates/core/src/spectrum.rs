//! Radial Neumann eigenvalues of the Laplacian on `B_R`,
//! `-(r^{N-1} u')' = lambda r^{N-1} u`, `u'(0) = u'(R) = 0`,
//! computed by shooting the Pruefer angle
//!
//! ```text
//! theta' = sin^2(theta) / r^{N-1} + lambda r^{N-1} cos^2(theta),   theta(0) = 0.
//! ```
//!
//! `theta(R)` is strictly increasing in `lambda` and equals `(k - 1) pi` at the
//! `k`-th eigenvalue.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::IntegratorSettings;
use crate::model::ProblemConfig;
use crate::ode::{self, StepControl};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenResult<T> {
    pub k: usize,
    pub lambda: T,
    /// `|theta_lambda(R) - (k - 1) pi|`.
    #[serde(rename = "residual")]
    pub angle_residual: T,
}

const MAX_DOUBLINGS: usize = 60;
const LAMBDA_RTOL: f64 = 1e-10;

fn control<T: Real>(settings: &IntegratorSettings<T>) -> StepControl<T> {
    StepControl {
        rtol: settings.rtol,
        atol: settings.atol,
        max_steps: settings.max_steps,
        h_max: None,
    }
}

fn integrate_angle<T: Real>(
    lambda: T,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
    outputs: &[T],
) -> Result<(T, Vec<T>)> {
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    config.validate()?;
    settings.validate(config.radius)?;
    let r0 = settings.r_start(config.radius);
    // leading order: theta ~ lambda r^N / N
    let theta0 = lambda * config.weight(r0) * r0 / config.n();
    let sol = ode::integrate(
        |r, y: &[T; 1]| {
            let w = config.weight(r);
            let (s, c) = y[0].sin_cos();
            [s * s / w + lambda * w * c * c]
        },
        r0,
        [theta0],
        config.radius,
        &control(settings),
        outputs,
        |_, _, _| {},
    )?;
    Ok((sol.end[0], sol.dense.into_iter().map(|y| y[0]).collect()))
}

/// `theta_lambda(R)`.
pub fn pruefer_angle_at_r<T: Real>(
    lambda: T,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<T> {
    integrate_angle(lambda, config, settings, &[]).map(|(end, _)| end)
}

/// Pruefer angle sampled on the settings' dense grid (`r`, `theta`).
pub fn pruefer_profile<T: Real>(
    lambda: T,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let nodes = settings.nodes(config.radius);
    let r0 = settings.r_start(config.radius);
    let first = nodes.partition_point(|&r| r < r0);
    let (_, tail) = integrate_angle(lambda, config, settings, &nodes[first..])?;
    let mut theta: Vec<T> = nodes[..first]
        .iter()
        .map(|&r| lambda * config.weight(r) * r / config.n())
        .collect();
    theta.extend(tail);
    Ok((nodes, theta))
}

/// Crossings of `pi/2 + j pi` by the Pruefer angle in `(0, R)`, i.e. the
/// number of zeros of the associated solution of the linear problem.
pub fn eigenfunction_zero_count<T: Real>(
    lambda: T,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<usize> {
    let (_, theta) = pruefer_profile(lambda, config, settings)?;
    let level = |t: T| ((t - T::FRAC_PI_2()) / T::PI()).floor();
    let mut count = 0;
    for w in theta.windows(2) {
        let jump = level(w[1]) - level(w[0]);
        if jump > T::zero() {
            count += jump.to_usize().unwrap_or(0);
        }
    }
    Ok(count)
}

/// `k`-th radial Neumann eigenvalue (`k >= 1`; `lambda_1 = 0`).
pub fn eigenvalue<T: Real>(
    k: usize,
    config: &ProblemConfig<T>,
    settings: &IntegratorSettings<T>,
) -> Result<EigenResult<T>> {
    if k == 0 {
        return Err(Error::InvalidConfig("eigenvalue index k starts at 1".into()));
    }
    config.validate()?;
    if k == 1 {
        return Ok(EigenResult {
            k,
            lambda: T::zero(),
            angle_residual: T::zero(),
        });
    }
    let target = T::from_count(k - 1) * T::PI();
    let angle = |lambda: T| pruefer_angle_at_r(lambda, config, settings);

    let n = config.n();
    let mut lo = T::zero();
    let mut hi = (T::PI() / config.radius).powi(2) * n * n;
    let mut doublings = 0;
    while angle(hi)? < target {
        lo = hi;
        hi = hi * T::two();
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::EigenBracket { k, doublings });
        }
    }
    let tol = T::lit(LAMBDA_RTOL).max(T::unit_roundoff() * T::lit(16.0));
    while hi - lo > tol * hi {
        let mid = T::half() * (lo + hi);
        if angle(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a_lo, a_hi) = (angle(lo)?, angle(hi)?);
    let lambda = if a_hi > a_lo {
        lo + (hi - lo) * (target - a_lo) / (a_hi - a_lo)
    } else {
        T::half() * (lo + hi)
    };
    let residual = (angle(lambda)? - target).abs();
    Ok(EigenResult {
        k,
        lambda,
        angle_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn settings() -> IntegratorSettings<f64> {
        IntegratorSettings::default()
    }

    /// `J_1` by its power series; adequate for `x < 10`.
    fn bessel_j1(x: f64) -> f64 {
        let mut term = x / 2.0;
        let mut sum = term;
        let q = -(x * x) / 4.0;
        for m in 1..60 {
            term *= q / (m as f64 * (m as f64 + 1.0));
            sum += term;
        }
        sum
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Closed-form Pruefer angle for `N = 1`: `tan theta = sqrt(lambda) tan(sqrt(lambda) r)`.
    fn interval_angle(lambda: f64, r: f64) -> f64 {
        let w = lambda.sqrt() * r;
        let m = (w / PI + 0.5).floor();
        m * PI + (lambda.sqrt() * (w - m * PI).tan()).atan()
    }

    #[test]
    fn oracle_values() {
        let j11 = bisect(bessel_j1, 3.0, 4.5);
        assert_relative_eq!(j11, 3.831_705_970_207_512, max_relative = 1e-12);
        let tanx = bisect(|x| x.tan() - x, 4.0, 4.6);
        assert_relative_eq!(tanx, 4.493_409_457_909_064, max_relative = 1e-12);
    }

    #[test]
    fn angle_zero_for_zero_lambda() {
        for n in 1..4 {
            let cfg = ProblemConfig::new(n, 2.0).unwrap();
            assert_eq!(pruefer_angle_at_r(0.0, &cfg, &settings()).unwrap(), 0.0);
        }
    }

    #[test]
    fn interval_angle_matches_closed_form() {
        let cfg = ProblemConfig::new(1, PI).unwrap();
        assert_relative_eq!(
            pruefer_angle_at_r(1.0, &cfg, &settings()).unwrap(),
            PI,
            max_relative = 1e-9
        );
        for lambda in [0.3, 2.0, 7.5, 30.0] {
            let got = pruefer_angle_at_r(lambda, &cfg, &settings()).unwrap();
            assert_relative_eq!(got, interval_angle(lambda, PI), max_relative = 1e-8);
        }
    }

    #[test]
    fn angle_monotone_in_lambda() {
        for n in 1..4 {
            let cfg = ProblemConfig::new(n, 1.5).unwrap();
            let mut prev = -1.0;
            for i in 0..40 {
                let a = pruefer_angle_at_r(i as f64 * 1.7, &cfg, &settings()).unwrap();
                assert!(a > prev);
                prev = a;
            }
        }
    }

    #[test]
    fn interval_spectrum() {
        let cfg = ProblemConfig::new(1, PI).unwrap();
        assert_eq!(eigenvalue(1, &cfg, &settings()).unwrap().lambda, 0.0);
        for k in 2..=10 {
            let e = eigenvalue(k, &cfg, &settings()).unwrap();
            let exact = ((k - 1) as f64).powi(2);
            assert_relative_eq!(e.lambda, exact, max_relative = 1e-8);
            assert!(e.angle_residual < 1e-8);
        }
        let cfg = ProblemConfig::new(1, 2.0).unwrap();
        let e = eigenvalue(3, &cfg, &settings()).unwrap();
        assert_relative_eq!(e.lambda, (PI).powi(2), max_relative = 1e-8);
    }

    #[test]
    fn disc_and_ball_second_eigenvalue() {
        let j11 = bisect(bessel_j1, 3.0, 4.5);
        let cfg = ProblemConfig::new(2, 1.0).unwrap();
        let e = eigenvalue(2, &cfg, &settings()).unwrap();
        assert!((e.lambda - j11 * j11).abs() < 1e-5, "{}", e.lambda);
        assert!((e.lambda - 14.681_970_6).abs() < 1e-5);

        let x = bisect(|x| x.tan() - x, 4.0, 4.6);
        let cfg = ProblemConfig::new(3, 1.0).unwrap();
        let e = eigenvalue(2, &cfg, &settings()).unwrap();
        assert!((e.lambda - x * x).abs() < 1e-5, "{}", e.lambda);
        assert!((e.lambda - 20.190_728_6).abs() < 1e-5);
    }

    #[test]
    fn eigenvalues_increase_and_scale() {
        for n in 1..4 {
            let cfg = ProblemConfig::new(n, 1.0).unwrap();
            let mut prev = -1.0;
            for k in 1..=10 {
                let e = eigenvalue(k, &cfg, &settings()).unwrap();
                assert!(e.lambda > prev);
                prev = e.lambda;
            }
            // lambda_k(R) = lambda_k(1) / R^2
            let big = ProblemConfig::new(n, 3.0).unwrap();
            let a = eigenvalue(3, &cfg, &settings()).unwrap().lambda;
            let b = eigenvalue(3, &big, &settings()).unwrap().lambda;
            assert_relative_eq!(b, a / 9.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn eigenfunction_has_k_minus_one_zeros() {
        for n in 1..4 {
            let cfg = ProblemConfig::new(n, 2.0).unwrap();
            for k in 1..=6 {
                let e = eigenvalue(k, &cfg, &settings()).unwrap();
                let zeros = eigenfunction_zero_count(e.lambda, &cfg, &settings()).unwrap();
                assert_eq!(zeros, k - 1, "N = {n}, k = {k}");
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        let cfg = ProblemConfig::new(2, 1.0).unwrap();
        assert!(eigenvalue(0, &cfg, &settings()).is_err());
        assert!(pruefer_angle_at_r(-1.0, &cfg, &settings()).is_err());
    }

    #[test]
    fn single_precision_interval() {
        let cfg = ProblemConfig::new(1, std::f32::consts::PI).unwrap();
        let e = eigenvalue(2, &cfg, &IntegratorSettings::<f32>::default()).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-3);
    }
}
