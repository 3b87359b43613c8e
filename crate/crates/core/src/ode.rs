//! Dormand-Prince 5(4) integrator with PI step control and the classical
//! 4th order continuous extension, for small fixed-size systems.

use crate::error::{Error, Result};
use crate::scalar::Real;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Hairer's defaults for DOPRI5
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Clone, Copy, Debug)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    pub h_max: Option<T>,
}

#[derive(Clone, Debug)]
pub struct OdeSolution<T, const D: usize> {
    /// State at each requested output abscissa.
    pub dense: Vec<[T; D]>,
    pub end: [T; D],
    pub accepted: usize,
    pub rejected: usize,
}

#[inline]
fn axpy<T: Real, const D: usize>(y: &[T; D], terms: &[(f64, &[T; D])], h: T) -> [T; D] {
    let mut out = *y;
    for (c, k) in terms {
        let c = T::lit(*c) * h;
        for i in 0..D {
            out[i] = out[i] + c * k[i];
        }
    }
    out
}

fn err_norm<T: Real, const D: usize>(
    ctl: &StepControl<T>,
    magnitude: Option<Magnitude<'_, T, D>>,
    y0: &[T; D],
    y1: &[T; D],
    delta: &[T; D],
) -> T {
    let (m0, m1) = match magnitude {
        Some(m) => (m(y0), m(y1)),
        None => (y0.map(|x| x.abs()), y1.map(|x| x.abs())),
    };
    let mut acc = T::zero();
    for i in 0..D {
        let sk = ctl.atol + ctl.rtol * m0[i].max(m1[i]);
        let q = delta[i] / sk;
        acc = acc + q * q;
    }
    (acc / T::from_count(D)).sqrt()
}

/// Integrates `y' = rhs(r, y)` from `r0` to `r1 > r0`.
///
/// `outputs` must be sorted and lie in `[r0, r1]`; the solution is sampled
/// there through the continuous extension. `on_step` sees every accepted
/// step as `(r, y, y')` at its right end point.
pub fn integrate<T, const D: usize, F, O>(
    rhs: F,
    r0: T,
    y0: [T; D],
    r1: T,
    ctl: &StepControl<T>,
    outputs: &[T],
    on_step: O,
) -> Result<OdeSolution<T, D>>
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
    O: FnMut(T, &[T; D], &[T; D]),
{
    integrate_switched(rhs, r0, y0, r1, ctl, outputs, on_step, &[], None)
}

/// Switching function `g(r, y)`: the right-hand side is smooth on each side
/// of `g = 0` but not across it.
pub type Switch<'a, T, const D: usize> = &'a (dyn Fn(T, &[T; D]) -> T + Sync);

/// Per-component size of a state that the relative tolerance applies to;
/// the default is `|y_i|`.
pub type Magnitude<'a, T, const D: usize> = &'a (dyn Fn(&[T; D]) -> [T; D] + Sync);

const SWITCH_BISECTIONS: usize = 60;
/// Crossings closer than this fraction of the step to its start are stepped over.
const SWITCH_MIN_FRACTION: f64 = 1e-6;

/// Like [`integrate`], but steps never jump across a zero of a switching
/// function: an accepted step that would is shortened to end just past the
/// first crossing, located on the continuous extension. This keeps the
/// full order of the method for right-hand sides with kinks on known
/// surfaces. `magnitude` replaces `|y_i|` in the error weights.
#[allow(clippy::too_many_arguments)]
pub fn integrate_switched<T, const D: usize, F, O>(
    mut rhs: F,
    r0: T,
    y0: [T; D],
    r1: T,
    ctl: &StepControl<T>,
    outputs: &[T],
    mut on_step: O,
    switches: &[Switch<'_, T, D>],
    magnitude: Option<Magnitude<'_, T, D>>,
) -> Result<OdeSolution<T, D>>
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
    O: FnMut(T, &[T; D], &[T; D]),
{
    let span = r1 - r0;
    let h_max = ctl.h_max.unwrap_or(span).min(span);
    let mut dense = Vec::with_capacity(outputs.len());
    let mut out_idx = 0;
    while out_idx < outputs.len() && outputs[out_idx] <= r0 {
        dense.push(y0);
        out_idx += 1;
    }

    let mut r = r0;
    let mut y = y0;
    let mut k1 = rhs(r, &y);
    on_step(r, &y, &k1);

    let mut h = initial_step(&mut rhs, ctl, magnitude, r, &y, &k1, h_max);
    let expo1 = T::lit(0.2 - BETA * 0.75);
    let beta = T::lit(BETA);
    let safe = T::lit(SAFE);
    let facc1 = T::lit(1.0 / FAC_MIN);
    let facc2 = T::lit(1.0 / FAC_MAX);
    let mut facold = T::lit(1e-4);
    let mut last_rejected = false;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    // step size to resume with after a step shortened at a switching surface
    let mut resume_h: Option<T> = None;

    loop {
        if accepted + rejected >= ctl.max_steps {
            return Err(Error::StepBudget {
                steps: accepted + rejected,
                r: r.as_f64(),
            });
        }
        let remaining = r1 - r;
        let last = if resume_h.is_some() {
            h >= remaining
        } else {
            T::lit(1.1) * h >= remaining
        };
        if last {
            h = remaining;
        }
        if h <= T::lit(16.0) * T::unit_roundoff() * r.abs().max(T::one()) && !last {
            return Err(Error::StepUnderflow { r: r.as_f64() });
        }

        let y2 = axpy(&y, &[(A21, &k1)], h);
        let k2 = rhs(r + T::lit(C2) * h, &y2);
        let y3 = axpy(&y, &[(A31, &k1), (A32, &k2)], h);
        let k3 = rhs(r + T::lit(C3) * h, &y3);
        let y4 = axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h);
        let k4 = rhs(r + T::lit(C4) * h, &y4);
        let y5 = axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h);
        let k5 = rhs(r + T::lit(C5) * h, &y5);
        let y6 = axpy(
            &y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        );
        let r_new = if last { r1 } else { r + h };
        let k6 = rhs(r_new, &y6);
        let y_new = axpy(
            &y,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            h,
        );
        let k7 = rhs(r_new, &y_new);

        let delta = axpy(
            &[T::zero(); D],
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
            h,
        );
        let err = err_norm(ctl, magnitude, &y, &y_new, &delta);
        if !err.is_finite() {
            // blow-up inside the trial step; shrink hard and retry
            rejected += 1;
            last_rejected = true;
            h = h * T::lit(FAC_MIN);
            continue;
        }
        let fac11 = err.powf(expo1);
        let fac = (fac11 / facold.powf(beta) / safe).min(facc1).max(facc2);
        let mut h_new = h / fac;

        if err <= T::one() {
            let cont = dense_coefficients(&y, &y_new, &k1, &k3, &k4, &k5, &k6, &k7, h);
            if resume_h.is_none() {
                if let Some(frac) = first_crossing(switches, r, &y, r_new, &y_new, h, &cont) {
                    resume_h = Some(h);
                    h = frac * h;
                    continue;
                }
            }
            facold = err.max(T::lit(1e-4));
            accepted += 1;

            while out_idx < outputs.len() && outputs[out_idx] <= r_new {
                let x = outputs[out_idx];
                if x == r_new {
                    dense.push(y_new);
                } else {
                    dense.push(interpolate(&cont, (x - r) / h));
                }
                out_idx += 1;
            }

            r = r_new;
            y = y_new;
            k1 = k7;
            on_step(r, &y, &k1);
            if last {
                break;
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            if let Some(prev) = resume_h.take() {
                h_new = h_new.max(prev);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            h = h / facc1.min(fac11 / safe);
            rejected += 1;
            last_rejected = true;
        }
    }

    while out_idx < outputs.len() {
        dense.push(y);
        out_idx += 1;
    }
    Ok(OdeSolution {
        dense,
        end: y,
        accepted,
        rejected,
    })
}

#[allow(clippy::too_many_arguments)]
fn dense_coefficients<T: Real, const D: usize>(
    y: &[T; D],
    y_new: &[T; D],
    k1: &[T; D],
    k3: &[T; D],
    k4: &[T; D],
    k5: &[T; D],
    k6: &[T; D],
    k7: &[T; D],
    h: T,
) -> [[T; D]; 5] {
    let mut cont = [[T::zero(); D]; 5];
    for i in 0..D {
        let ydiff = y_new[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k7[i] - bspl;
        let dsum = T::lit(D1) * k1[i]
            + T::lit(D3) * k3[i]
            + T::lit(D4) * k4[i]
            + T::lit(D5) * k5[i]
            + T::lit(D6) * k6[i]
            + T::lit(D7) * k7[i];
        cont[4][i] = h * dsum;
    }
    cont
}

#[inline]
fn interpolate<T: Real, const D: usize>(cont: &[[T; D]; 5], s: T) -> [T; D] {
    let s1 = T::one() - s;
    let mut val = [T::zero(); D];
    for i in 0..D {
        val[i] = cont[0][i] + s * (cont[1][i] + s1 * (cont[2][i] + s * (cont[3][i] + s1 * cont[4][i])));
    }
    val
}

/// Fraction of the step at which the first switching function changes
/// sign, rounded up so the shortened step ends past the surface; `None` if
/// no crossing lies beyond the minimum fraction.
fn first_crossing<T: Real, const D: usize>(
    switches: &[Switch<'_, T, D>],
    r: T,
    y: &[T; D],
    r_new: T,
    y_new: &[T; D],
    h: T,
    cont: &[[T; D]; 5],
) -> Option<T> {
    let mut best: Option<T> = None;
    for g in switches {
        let g0 = g(r, y);
        let g1 = g(r_new, y_new);
        if g0 == T::zero() || g1 == T::zero() || (g0 > T::zero()) == (g1 > T::zero()) {
            continue;
        }
        let (mut a, mut b) = (T::zero(), T::one());
        for _ in 0..SWITCH_BISECTIONS {
            let m = T::half() * (a + b);
            let gm = g(r + m * h, &interpolate(cont, m));
            if gm != T::zero() && (gm > T::zero()) == (g0 > T::zero()) {
                a = m;
            } else {
                b = m;
            }
        }
        if b > T::lit(SWITCH_MIN_FRACTION) && b < T::one() {
            best = Some(best.map_or(b, |x: T| x.min(b)));
        }
    }
    best
}


/// Starting step size, following Hairer-Norsett-Wanner.
fn initial_step<T, const D: usize, F>(
    rhs: &mut F,
    ctl: &StepControl<T>,
    magnitude: Option<Magnitude<'_, T, D>>,
    r: T,
    y: &[T; D],
    f0: &[T; D],
    h_max: T,
) -> T
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
{
    let zero = [T::zero(); D];
    let dnf = err_norm(ctl, magnitude, y, y, f0);
    let dny = err_norm(ctl, magnitude, y, y, y);
    let mut h = if dnf <= T::lit(1e-10) || dny <= T::lit(1e-10) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * dny / dnf
    };
    h = h.min(h_max);
    let y1 = axpy(y, &[(1.0, f0)], h);
    let f1 = rhs(r + h, &y1);
    let mut diff = zero;
    for i in 0..D {
        diff[i] = f1[i] - f0[i];
    }
    let der2 = err_norm(ctl, magnitude, y, y, &diff) / h;
    let der12 = dnf.max(der2);
    let h1 = if der12 <= T::lit(1e-15) {
        T::lit(1e-6).max(h * T::lit(1e-3))
    } else {
        (T::lit(0.01) / der12).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h).min(h1).min(h_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl(rtol: f64) -> StepControl<f64> {
        StepControl {
            rtol,
            atol: rtol * 1e-2,
            max_steps: 1_000_000,
            h_max: None,
        }
    }

    #[test]
    fn harmonic_oscillator_end_and_dense() {
        let outs: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let sol = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &ctl(1e-10),
            &outs,
            |_, _, _| {},
        )
        .unwrap();
        assert!((sol.end[0] - 10f64.cos()).abs() < 1e-8);
        for (x, y) in outs.iter().zip(&sol.dense) {
            assert!((y[0] - x.cos()).abs() < 1e-8, "x = {x}");
            assert!((y[1] + x.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn error_decreases_with_tolerance() {
        let run = |tol| {
            let sol = integrate(
                |r, y: &[f64; 1]| [y[0] * r.cos()],
                0.0,
                [1.0],
                5.0,
                &ctl(tol),
                &[],
                |_, _, _| {},
            )
            .unwrap();
            (sol.end[0] - 5f64.sin().exp()).abs()
        };
        let e1 = run(1e-6);
        let e2 = run(1e-10);
        assert!(e2 < e1 / 100.0, "{e1} {e2}");
    }

    #[test]
    fn step_budget_is_reported() {
        let mut c = ctl(1e-12);
        c.max_steps = 5;
        let res = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            100.0,
            &c,
            &[],
            |_, _, _| {},
        );
        assert!(matches!(res, Err(Error::StepBudget { .. })));
    }
}
