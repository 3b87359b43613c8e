//! Reaction term, curvature operator and the globally Lipschitz truncations
//! used by the auxiliary shooting system.
//!
//! The reaction term `f` must vanish at 0 and 1, be negative on `(0, 1)` and
//! positive on `(1, inf)`. It is extended by zero to negative arguments
//! (`f_hat`). The curvature operator in radial form is
//! `phi(s) = s / sqrt(1 - s^2)`, whose inverse `t / sqrt(1 + t^2)` maps the
//! real line into `(-1, 1)`; this is what forces `|u'| < 1` along every shot.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Serializable tag for the built-in nonlinearities.
///
/// JSON form: `{"kind": "cubic_pinned"}` or `{"kind": "power", "q": 4.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityTag {
    /// `f(s) = s (s - 1)^3`, with `f'(1) = 0`.
    CubicPinned {},
    /// `f(s) = s^(q-1) - s`, with `f'(1) = q - 2`. Requires `q > 2`.
    Power { q: f64 },
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
enum Kind<T> {
    CubicPinned,
    Power {
        q: T,
    },
    Custom {
        name: String,
        f: ScalarFn<T>,
        df: ScalarFn<T>,
        primitive: Option<ScalarFn<T>>,
    },
}

/// The reaction term `f` on `[0, inf)` together with its derivative.
#[derive(Clone)]
pub struct NonlinearitySpec<T> {
    kind: Kind<T>,
}

impl<T: Real> fmt::Debug for NonlinearitySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::CubicPinned => f.write_str("NonlinearitySpec(cubic_pinned)"),
            Kind::Power { q } => write!(f, "NonlinearitySpec(power, q = {q})"),
            Kind::Custom { name, .. } => write!(f, "NonlinearitySpec(custom {name:?})"),
        }
    }
}

/// Upper end of the sampling window used to check `f > 0` on `(1, inf)`.
const SIGN_CHECK_UPPER: f64 = 100.0;

impl<T: Real> NonlinearitySpec<T> {
    pub fn cubic_pinned() -> Self {
        Self {
            kind: Kind::CubicPinned,
        }
    }

    pub fn power(q: T) -> Result<Self> {
        if !(q > T::two()) || !q.is_finite() {
            return Err(Error::InvalidNonlinearity(format!(
                "power nonlinearity needs q > 2, got {q}"
            )));
        }
        let spec = Self {
            kind: Kind::Power { q },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A user supplied reaction term. The derivative must be analytic; it is
    /// only used for diagnostics such as the value of `f'(1)`.
    pub fn custom<F, D>(name: impl Into<String>, f: F, df: D) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
        D: Fn(T) -> T + Send + Sync + 'static,
    {
        let spec = Self {
            kind: Kind::Custom {
                name: name.into(),
                f: Arc::new(f),
                df: Arc::new(df),
                primitive: None,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Attaches a closed-form primitive `F(u) = int_1^u f_hat`. Without one the
    /// primitive falls back to Gauss-Legendre quadrature.
    pub fn with_primitive<P>(mut self, p: P) -> Self
    where
        P: Fn(T) -> T + Send + Sync + 'static,
    {
        if let Kind::Custom { primitive, .. } = &mut self.kind {
            *primitive = Some(Arc::new(p));
        }
        self
    }

    pub fn from_tag(tag: &NonlinearityTag) -> Result<Self> {
        match tag {
            NonlinearityTag::CubicPinned {} => Ok(Self::cubic_pinned()),
            NonlinearityTag::Power { q } => Self::power(T::lit(*q)),
        }
    }

    /// `None` for custom nonlinearities, which are code-level only.
    pub fn tag(&self) -> Option<NonlinearityTag> {
        match &self.kind {
            Kind::CubicPinned => Some(NonlinearityTag::CubicPinned {}),
            Kind::Power { q } => Some(NonlinearityTag::Power { q: q.as_f64() }),
            Kind::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::CubicPinned => "cubic_pinned".into(),
            Kind::Power { q } => format!("power(q={q})"),
            Kind::Custom { name, .. } => name.clone(),
        }
    }

    /// `f(s)` for `s >= 0`.
    pub fn eval(&self, s: T) -> T {
        match &self.kind {
            Kind::CubicPinned => {
                let x = s - T::one();
                s * x * x * x
            }
            Kind::Power { q } => s.powf(*q - T::one()) - s,
            Kind::Custom { f, .. } => f(s),
        }
    }

    /// `f'(s)` for `s >= 0`.
    pub fn deriv(&self, s: T) -> T {
        match &self.kind {
            Kind::CubicPinned => {
                let x = s - T::one();
                x * x * (T::lit(4.0) * s - T::one())
            }
            Kind::Power { q } => (*q - T::one()) * s.powf(*q - T::two()) - T::one(),
            Kind::Custom { df, .. } => df(s),
        }
    }

    /// The extension by zero: `f(s)` for `s >= 0`, `0` for `s < 0`.
    #[inline]
    pub fn eval_hat(&self, s: T) -> T {
        if s < T::zero() {
            T::zero()
        } else {
            self.eval(s)
        }
    }

    /// `F(u) = int_1^u f_hat(s) ds`. Non-negative for every admissible `f`.
    pub fn primitive(&self, u: T) -> T {
        if u < T::zero() {
            return self.primitive(T::zero());
        }
        match &self.kind {
            Kind::CubicPinned => {
                let x = u - T::one();
                let x4 = x * x * x * x;
                x4 * x / T::lit(5.0) + x4 / T::lit(4.0)
            }
            Kind::Power { q } => {
                (u.powf(*q) - T::one()) / *q - (u * u - T::one()) / T::two()
            }
            Kind::Custom {
                primitive: Some(p), ..
            } => p(u),
            Kind::Custom { f, .. } => gauss_legendre(|s| f(s), T::one(), u, 64),
        }
    }

    /// Checks `f(0) = f(1) = 0` and the sign pattern on a dense sample.
    pub fn validate(&self) -> Result<()> {
        let zero_tol = T::lit(1e-12);
        for s in [T::zero(), T::one()] {
            let fs = self.eval(s);
            if !(fs.abs() <= zero_tol) {
                return Err(Error::InvalidNonlinearity(format!(
                    "{}: f({s}) = {fs}, expected 0",
                    self.name()
                )));
            }
        }
        for s in sign_check_samples::<T>() {
            let fs = self.eval(s);
            let ok = if s < T::one() {
                fs < T::zero()
            } else {
                fs > T::zero()
            };
            if !ok {
                return Err(Error::InvalidNonlinearity(format!(
                    "{}: f({s}) = {fs} violates f < 0 on (0,1), f > 0 on (1,inf)",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

fn sign_check_samples<T: Real>() -> Vec<T> {
    let mut out = Vec::with_capacity(2200);
    // geometric clusters next to 0 and on both sides of 1
    for e in 1..=8 {
        let eps = T::lit(10f64.powi(-e));
        out.push(eps);
        out.push(T::one() - eps);
        out.push(T::one() + eps);
    }
    let n = 1000;
    for i in 1..n {
        let t = T::from_count(i) / T::from_count(n);
        out.push(t);
        out.push(T::one() + t * T::lit(SIGN_CHECK_UPPER - 1.0));
    }
    out
}

/// Composite 5-point Gauss-Legendre rule on `[a, b]`.
pub(crate) fn gauss_legendre<T: Real>(f: impl Fn(T) -> T, a: T, b: T, panels: usize) -> T {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683,
        0.538_469_310_105_683,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
        0.236_926_885_056_189,
    ];
    let h = (b - a) / T::from_count(panels);
    let mut acc = T::zero();
    for p in 0..panels {
        let mid = a + h * (T::from_count(p) + T::half());
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            acc = acc + T::lit(w) * f(mid + T::half() * h * T::lit(*x));
        }
    }
    acc * T::half() * h
}

/// `phi(s) = s / sqrt(1 - s^2)` on `(-1, 1)`.
pub fn eval_phi<T: Real>(s: T) -> Result<T> {
    if !(s.abs() < T::one()) {
        return Err(Error::PhiDomain(s.as_f64()));
    }
    Ok(s / ((T::one() - s) * (T::one() + s)).sqrt())
}

/// `phi^{-1}(t) = t / sqrt(1 + t^2)`; always inside `(-1, 1)` in exact arithmetic.
#[inline]
pub fn eval_phi_inv<T: Real>(t: T) -> T {
    t / T::one().hypot(t)
}

/// `1 - |phi^{-1}(t)|`, evaluated without cancellation.
#[inline]
pub fn speed_margin<T: Real>(t: T) -> T {
    let h = T::one().hypot(t);
    T::one() / (h * (h + t.abs()))
}

/// `phi'(s) = (1 - s^2)^{-3/2}`.
pub fn eval_phi_prime<T: Real>(s: T) -> Result<T> {
    if !(s.abs() < T::one()) {
        return Err(Error::PhiDomain(s.as_f64()));
    }
    Ok(((T::one() - s) * (T::one() + s)).powf(T::lit(-1.5)))
}

/// Spatial dimension and ball radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig<T> {
    #[serde(rename = "N")]
    pub dimension: usize,
    #[serde(rename = "R")]
    pub radius: T,
}

impl<T: Real> ProblemConfig<T> {
    pub fn new(dimension: usize, radius: T) -> Result<Self> {
        let cfg = Self { dimension, radius };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 1 {
            return Err(Error::InvalidConfig(format!(
                "dimension N must be >= 1, got {}",
                self.dimension
            )));
        }
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "radius R must be positive and finite, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// `r^{N-1}`.
    #[inline]
    pub fn weight(&self, r: T) -> T {
        r.powi(self.dimension as i32 - 1)
    }

    pub fn n(&self) -> T {
        T::from_count(self.dimension)
    }
}

/// Constants of the auxiliary (globally Lipschitz) system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationData<T> {
    /// Upper bound of `|f_tilde|`: the maximum of `|f_hat|` over `[0, 2 + R]`.
    pub m: T,
    /// `phi^{-1}(M R)`. Rounds to 1 in floating point once `M R` exceeds
    /// roughly `1 / sqrt(eps)`.
    pub gamma: T,
    /// `phi'(gamma) = (1 + M^2 R^2)^{3/2}`.
    pub phi_slope: T,
    /// `1 + R`: `f_tilde = f_hat` for `|s|` below this.
    pub inner_cutoff: T,
    /// `2 + R`: `f_tilde = 0` for `|s|` above this.
    pub outer_cutoff: T,
}

const M_GRID: usize = 10_000;

impl<T: Real> TruncationData<T> {
    pub fn build(spec: &NonlinearitySpec<T>, config: &ProblemConfig<T>) -> Self {
        let r = config.radius;
        let inner = T::one() + r;
        let outer = T::two() + r;
        let m = max_abs_on(|s| spec.eval_hat(s), T::zero(), outer);
        let mr = m * r;
        let gamma = eval_phi_inv(mr);
        let phi_slope = T::one().hypot(mr).powi(3);
        Self {
            m,
            gamma,
            phi_slope,
            inner_cutoff: inner,
            outer_cutoff: outer,
        }
    }

    /// `phi(gamma) = M R`.
    #[inline]
    pub fn phi_at_gamma(&self) -> T {
        self.m * (self.inner_cutoff - T::one())
    }

    /// `f_hat(s)` for `|s| <= 1 + R`, `0` for `|s| >= 2 + R`, and
    /// `f_hat(s) * (2 + R - |s|)` on the bridge in between.
    pub fn f_tilde(&self, spec: &NonlinearitySpec<T>, s: T) -> T {
        let a = s.abs();
        if a <= self.inner_cutoff {
            spec.eval_hat(s)
        } else if a >= self.outer_cutoff {
            T::zero()
        } else {
            spec.eval_hat(s) * (self.outer_cutoff - a)
        }
    }

    /// `phi` on `[-gamma, gamma]`, continued linearly with slope `phi'(gamma)`.
    pub fn phi_tilde(&self, s: T) -> T {
        let a = s.abs();
        let mag = if a < self.gamma {
            // a < gamma <= 1 so phi is defined
            a / ((T::one() - a) * (T::one() + a)).sqrt()
        } else {
            self.phi_slope * (a - self.gamma) + self.phi_at_gamma()
        };
        mag.copysign(s)
    }

    pub fn phi_tilde_inv(&self, t: T) -> T {
        let a = t.abs();
        let mr = self.phi_at_gamma();
        let mag = if a <= mr {
            eval_phi_inv(a)
        } else {
            self.gamma + (a - mr) / self.phi_slope
        };
        mag.copysign(t)
    }
}

/// Maximum of `|g|` on `[a, b]`: grid scan, then golden-section refinement
/// around the best node.
fn max_abs_on<T: Real>(g: impl Fn(T) -> T, a: T, b: T) -> T {
    let h = (b - a) / T::from_count(M_GRID);
    let node = |i: usize| if i == M_GRID { b } else { a + h * T::from_count(i) };
    let mut best_i = 0;
    let mut best = g(a).abs();
    for i in 1..=M_GRID {
        let val = g(node(i)).abs();
        if val > best {
            best = val;
            best_i = i;
        }
    }
    let lo = node(best_i.saturating_sub(1));
    let hi = node((best_i + 1).min(M_GRID));
    let (_, refined) = golden_max(|s| g(s).abs(), lo, hi, T::lit(1e-12) * (b - a));
    best.max(refined).max(g(b).abs())
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub(crate) fn golden_max<T: Real>(g: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Reaction term, geometry and truncation constants for one radius.
#[derive(Clone, Debug)]
pub struct Problem<T: Real> {
    pub spec: NonlinearitySpec<T>,
    pub config: ProblemConfig<T>,
    pub trunc: TruncationData<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(spec: NonlinearitySpec<T>, config: ProblemConfig<T>) -> Result<Self> {
        config.validate()?;
        let trunc = TruncationData::build(&spec, &config);
        Ok(Self {
            spec,
            config,
            trunc,
        })
    }

    /// Same reaction term at a different radius.
    pub fn with_radius(&self, radius: T) -> Result<Self> {
        Self::new(
            self.spec.clone(),
            ProblemConfig::new(self.config.dimension, radius)?,
        )
    }

    pub fn radius(&self) -> T {
        self.config.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cubic() -> NonlinearitySpec<f64> {
        NonlinearitySpec::cubic_pinned()
    }

    #[test]
    fn f_hat_values() {
        let f = cubic();
        assert_eq!(f.eval_hat(-1.0), 0.0);
        assert_eq!(f.eval_hat(1.0), 0.0);
        assert_eq!(f.eval_hat(2.0), 2.0);
        assert_eq!(f.deriv(1.0), 0.0);
    }

    #[test]
    fn phi_values() {
        assert_eq!(eval_phi(0.0f64).unwrap(), 0.0);
        assert_relative_eq!(eval_phi(0.6f64).unwrap(), 0.75, max_relative = 1e-15);
        assert_relative_eq!(eval_phi_inv(1.0f64), std::f64::consts::FRAC_1_SQRT_2);
        assert!(matches!(eval_phi(1.0f64), Err(Error::PhiDomain(_))));
        assert!(matches!(eval_phi(-1.5f64), Err(Error::PhiDomain(_))));
        assert!(eval_phi_inv(1e300f64).abs() <= 1.0);
        assert!(speed_margin(1e150f64) > 0.0);
    }

    #[test]
    fn truncation_for_cubic_unit_ball() {
        let cfg = ProblemConfig::new(2, 1.0).unwrap();
        let tr = TruncationData::build(&cubic(), &cfg);
        // oracle: brute-force grid on [0, 3] with local refinement
        let mut best = 0.0f64;
        for i in 0..=300_000 {
            let s = 3.0 * i as f64 / 300_000.0;
            best = best.max((s * (s - 1.0).powi(3)).abs());
        }
        assert_relative_eq!(best, 24.0, max_relative = 1e-12);
        assert_relative_eq!(tr.m, best, max_relative = 1e-10);
        assert_relative_eq!(tr.gamma, 24.0 / (1.0f64 + 576.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(tr.gamma, 0.999_133, epsilon = 5e-7);
        assert_relative_eq!(tr.phi_slope, (1.0f64 + 576.0).powf(1.5), max_relative = 1e-12);
        assert_relative_eq!(
            tr.phi_slope,
            eval_phi_prime(tr.gamma).unwrap(),
            max_relative = 1e-9
        );
        assert_eq!(tr.inner_cutoff, 2.0);
        assert_eq!(tr.outer_cutoff, 3.0);
    }

    #[test]
    fn f_tilde_values_and_lipschitz_bridge() {
        let spec = cubic();
        let cfg = ProblemConfig::new(2, 1.0).unwrap();
        let tr = TruncationData::build(&spec, &cfg);
        assert_relative_eq!(tr.f_tilde(&spec, 1.5), 0.1875);
        assert_eq!(tr.f_tilde(&spec, 4.0), 0.0);
        assert_eq!(tr.f_tilde(&spec, -4.0), 0.0);
        assert_relative_eq!(tr.f_tilde(&spec, 2.5), 4.21875, max_relative = 1e-15);
        // finite-difference slopes stay bounded across both junctions
        let h = 1e-7;
        let mut max_slope = 0.0f64;
        let mut s = 1.5;
        while s < 3.5 {
            let slope = (tr.f_tilde(&spec, s + h) - tr.f_tilde(&spec, s)) / h;
            max_slope = max_slope.max(slope.abs());
            s += 1e-3;
        }
        // |d/ds (f_hat w)| <= max|f'| + max|f| on [2, 3] = 32 + 24
        assert!(max_slope < 56.0 + 1e-3, "slope {max_slope}");
    }

    #[test]
    fn phi_tilde_junction_and_linear_branch() {
        let cfg = ProblemConfig::new(2, 1.0).unwrap();
        let tr = TruncationData::build(&cubic(), &cfg);
        assert_eq!(tr.phi_tilde(0.0), 0.0);
        assert_relative_eq!(tr.phi_tilde(tr.gamma), 24.0, max_relative = 1e-9);
        let expected = 24.0 + 577.0f64.powf(1.5);
        assert_relative_eq!(tr.phi_tilde(tr.gamma + 1.0), expected, max_relative = 1e-12);
        // numerical slope on the linear branch
        let slope = (tr.phi_tilde(tr.gamma + 1.5) - tr.phi_tilde(tr.gamma + 0.5)) / 1.0;
        assert_relative_eq!(slope, tr.phi_slope, max_relative = 1e-12);
        assert_relative_eq!(tr.phi_tilde(-tr.gamma - 1.0), -expected, max_relative = 1e-12);
    }

    #[test]
    fn power_spec_validation() {
        let p = NonlinearitySpec::<f64>::power(4.0).unwrap();
        assert_relative_eq!(p.deriv(1.0), 2.0);
        assert!(NonlinearitySpec::<f64>::power(2.0).is_err());
        assert!(NonlinearitySpec::<f64>::power(1.5).is_err());
    }

    #[test]
    fn custom_spec_rejects_bad_sign() {
        let bad = NonlinearitySpec::<f64>::custom("neg", |s| -s * (s - 1.0), |s| 1.0 - 2.0 * s);
        assert!(matches!(bad, Err(Error::InvalidNonlinearity(_))));
        let off = NonlinearitySpec::<f64>::custom("shifted", |s| s * (s - 1.0) + 0.1, |s| 2.0 * s - 1.0);
        assert!(off.is_err());
        let ok = NonlinearitySpec::<f64>::custom("quad", |s| s * (s - 1.0), |s| 2.0 * s - 1.0).unwrap();
        assert!(ok.tag().is_none());
    }

    #[test]
    fn primitive_matches_quadrature() {
        let spec = cubic();
        for u in [0.0, 0.3, 0.9, 1.0, 1.7, 3.0, 6.0] {
            let quad = gauss_legendre(|s| spec.eval_hat(s), 1.0, u, 200);
            assert_relative_eq!(spec.primitive(u), quad, epsilon = 1e-12, max_relative = 1e-12);
        }
        assert_relative_eq!(spec.primitive(-2.0), 0.05, max_relative = 1e-14);
        let pw = NonlinearitySpec::<f64>::power(4.0).unwrap();
        for u in [0.2, 1.3, 2.5] {
            let quad = gauss_legendre(|s| pw.eval_hat(s), 1.0, u, 200);
            assert_relative_eq!(pw.primitive(u), quad, max_relative = 1e-12);
        }
        let custom =
            NonlinearitySpec::<f64>::custom("quad", |s| s * (s - 1.0), |s| 2.0 * s - 1.0).unwrap();
        // int_1^u s(s-1) = u^3/3 - u^2/2 + 1/6
        assert_relative_eq!(custom.primitive(2.0), 8.0 / 3.0 - 2.0 + 1.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn tag_round_trip_json() {
        let tag: NonlinearityTag = serde_json::from_str(r#"{"kind":"power","q":4.0}"#).unwrap();
        assert_eq!(tag, NonlinearityTag::Power { q: 4.0 });
        let tag: NonlinearityTag = serde_json::from_str(r#"{"kind":"cubic_pinned"}"#).unwrap();
        assert_eq!(tag, NonlinearityTag::CubicPinned {});
        assert!(serde_json::from_str::<NonlinearityTag>(r#"{"kind":"cubic_pinned","x":1}"#).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ProblemConfig::new(0, 1.0f64).is_err());
        assert!(ProblemConfig::new(2, 0.0f64).is_err());
        assert!(ProblemConfig::new(2, f64::NAN).is_err());
        assert!(ProblemConfig::new(1, 3.0f64).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let spec = NonlinearitySpec::<f32>::cubic_pinned();
        let cfg = ProblemConfig::new(2, 1.0f32).unwrap();
        let tr = TruncationData::build(&spec, &cfg);
        assert!((tr.m - 24.0).abs() < 1e-3);
        assert!((tr.f_tilde(&spec, 2.5) - 4.21875).abs() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_inv_inside_unit_interval(t in -1e12f64..1e12) {
                prop_assert!(eval_phi_inv(t).abs() < 1.0 || t.abs() > 1e7);
                prop_assert!(eval_phi_inv(t).abs() <= 1.0);
            }

            #[test]
            fn phi_tilde_inverse_round_trip(x in -10.0f64..10.0, r in 0.5f64..3.0) {
                let cfg = ProblemConfig::new(2, r).unwrap();
                let tr = TruncationData::build(&NonlinearitySpec::cubic_pinned(), &cfg);
                let s = x * tr.gamma;
                let back = tr.phi_tilde_inv(tr.phi_tilde(s));
                prop_assert!((back - s).abs() <= 1e-12 * s.abs().max(1.0), "{s} -> {back}");
            }

            #[test]
            fn phi_tilde_inverse_bounds(t in -1e6f64..1e6) {
                let cfg = ProblemConfig::new(2, 1.0).unwrap();
                let tr = TruncationData::build(&NonlinearitySpec::cubic_pinned(), &cfg);
                let prod = tr.phi_tilde_inv(t) * t;
                prop_assert!(prod <= t * t * (1.0 + 1e-14));
                prop_assert!(prod >= t * t / tr.phi_slope * (1.0 - 1e-12));
            }

            #[test]
            fn sign_condition(s in -5.0f64..50.0) {
                let f = NonlinearitySpec::<f64>::cubic_pinned();
                prop_assert!(f.eval_hat(s) * (s - 1.0) >= 0.0);
            }

            #[test]
            fn f_tilde_equals_f_hat_inside(s in -2.0f64..2.0) {
                let cfg = ProblemConfig::new(3, 1.0).unwrap();
                let spec = NonlinearitySpec::cubic_pinned();
                let tr = TruncationData::build(&spec, &cfg);
                prop_assert_eq!(tr.f_tilde(&spec, s), spec.eval_hat(s));
            }
        }
    }
}
