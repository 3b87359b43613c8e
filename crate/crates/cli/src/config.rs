//! Run configuration: a JSON file merged with command-line overrides and
//! validated as a whole before any computation starts.

use std::fs;
use std::path::{Path, PathBuf};

use lmshoot::{
    CheckName, IntegratorSettings, NonlinearitySpec, NonlinearityTag, ProblemConfig, Real,
    ScanOptions,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Arithmetic the numerics run in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[value(name = "double")]
    Double,
    #[default]
    #[value(name = "double_double")]
    DoubleDouble,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(rename = "N")]
    pub dimension: usize,
    #[serde(rename = "R")]
    pub radius: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            dimension: 2,
            radius: 20.0,
        }
    }
}

/// Integrator overrides; unset fields take the defaults of the chosen precision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub r_start: Option<f64>,
    pub max_steps: Option<usize>,
    pub dense_stride: Option<f64>,
}

/// Which checks `verify` runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSelection {
    /// A single check name or `"all"`.
    One(String),
    Many(Vec<String>),
}

impl Default for CheckSelection {
    fn default() -> Self {
        CheckSelection::One("all".into())
    }
}

impl CheckSelection {
    pub fn resolve(&self) -> Result<Vec<CheckName>, CliError> {
        let names: Vec<&str> = match self {
            CheckSelection::One(s) => vec![s.as_str()],
            CheckSelection::Many(v) => v.iter().map(String::as_str).collect(),
        };
        if names.is_empty() {
            return Err(CliError::Validation("no checks selected".into()));
        }
        let mut out = Vec::new();
        for n in names {
            if n == "all" {
                out.extend(CheckName::ALL);
            } else {
                out.push(n.parse::<CheckName>().map_err(CliError::from)?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub nonlinearity: NonlinearityTag,
    pub precision: Precision,
    pub integrator: IntegratorSection,
    pub scan: ScanOptions<f64>,
    /// Number of half-turn levels the branch search and threshold look for.
    pub k: usize,
    /// Interval for the `scan` command; both sides of 1 when unset.
    pub d_range: Option<[f64; 2]>,
    pub eigen_count: usize,
    pub checks: CheckSelection,
    pub sample_count: usize,
    /// Upper end of the threshold search in `R`.
    pub r_max: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; all available cores when unset.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSection::default(),
            nonlinearity: NonlinearityTag::CubicPinned {},
            precision: Precision::default(),
            integrator: IntegratorSection::default(),
            scan: ScanOptions::default(),
            k: 1,
            d_range: None,
            eigen_count: 6,
            checks: CheckSelection::default(),
            sample_count: 200,
            r_max: 32.0,
            out: PathBuf::from("out"),
            seed: 0,
            jobs: None,
        }
    }
}

/// Values given on the command line; each one replaces the config entry.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dimension: Option<usize>,
    pub radius: Option<f64>,
    pub nonlinearity: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub precision: Option<Precision>,
    pub k: Option<usize>,
    pub d_range: Option<[f64; 2]>,
    pub eigen_count: Option<usize>,
    pub checks: Option<Vec<String>>,
    pub r_max: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(n) = o.dimension {
            self.problem.dimension = n;
        }
        if let Some(r) = o.radius {
            self.problem.radius = r;
        }
        if let Some(f) = &o.nonlinearity {
            self.nonlinearity = parse_nonlinearity(f)?;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.rtol.is_some() {
            self.integrator.rtol = o.rtol;
        }
        if o.atol.is_some() {
            self.integrator.atol = o.atol;
        }
        if let Some(p) = o.precision {
            self.precision = p;
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        if o.d_range.is_some() {
            self.d_range = o.d_range;
        }
        if let Some(c) = o.eigen_count {
            self.eigen_count = c;
        }
        if let Some(c) = &o.checks {
            self.checks = CheckSelection::Many(c.clone());
        }
        if let Some(r) = o.r_max {
            self.r_max = r;
        }
        Ok(())
    }

    pub fn settings<T: Real>(&self) -> IntegratorSettings<T> {
        let d = IntegratorSettings::<T>::default();
        let i = &self.integrator;
        IntegratorSettings {
            rtol: i.rtol.map(T::lit).unwrap_or(d.rtol),
            atol: i.atol.map(T::lit).unwrap_or(d.atol),
            r_start: i.r_start.map(T::lit),
            max_steps: i.max_steps.unwrap_or(d.max_steps),
            dense_stride: i.dense_stride.map(T::lit),
        }
    }

    pub fn scan_options<T: Real>(&self) -> ScanOptions<T> {
        let s = &self.scan;
        ScanOptions {
            initial_points: s.initial_points,
            guard: T::lit(s.guard),
            resolution: T::lit(s.resolution),
            system: s.system,
            refine_extrema: s.refine_extrema,
            max_extrema: s.max_extrema,
        }
    }

    pub fn spec<T: Real>(&self) -> Result<NonlinearitySpec<T>, CliError> {
        Ok(NonlinearitySpec::from_tag(&self.nonlinearity)?)
    }

    pub fn problem_config<T: Real>(&self) -> Result<ProblemConfig<T>, CliError> {
        Ok(ProblemConfig::new(
            self.problem.dimension,
            T::lit(self.problem.radius),
        )?)
    }

    /// Checks every field in the working precision.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.precision {
            Precision::Double => self.validate_in::<f64>(),
            Precision::DoubleDouble => self.validate_in::<lmshoot::DoubleDouble>(),
        }
    }

    fn validate_in<T: Real>(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Validation(m));
        self.spec::<T>()?;
        let config = self.problem_config::<T>()?;
        self.settings::<T>().validate(config.radius)?;
        self.scan_options::<T>().validate()?;
        if self.k == 0 {
            return invalid("k must be >= 1".into());
        }
        if self.eigen_count == 0 {
            return invalid("eigen_count must be >= 1".into());
        }
        if self.sample_count == 0 {
            return invalid("sample_count must be >= 1".into());
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return invalid(format!("r_max must be positive and finite, got {}", self.r_max));
        }
        if self.jobs == Some(0) {
            return invalid("jobs must be >= 1".into());
        }
        if let Some([lo, hi]) = self.d_range {
            let g = self.scan.guard;
            let below = lo >= 0.0 && hi <= 1.0 - g;
            let above = lo >= 1.0 + g;
            if !(lo < hi && hi.is_finite() && (below || above)) {
                return invalid(format!(
                    "d_range [{lo}, {hi}] must be increasing and lie on one side of 1 outside \
                     the guard band of half-width {g}"
                ));
            }
        }
        self.checks.resolve()?;
        Ok(())
    }

    /// The configuration as echoed into reports: everything that affects
    /// results, without the output location and thread count.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out");
            m.remove("jobs");
        }
        v
    }
}

/// Parses `NAME[,key=value...]`, e.g. `cubic_pinned` or `power,q=4`.
pub fn parse_nonlinearity(s: &str) -> Result<NonlinearityTag, CliError> {
    let mut parts = s.split(',').map(str::trim);
    let name = parts.next().unwrap_or_default();
    let mut q: Option<f64> = None;
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("expected key=value in --f, got '{kv}'")))?;
        match k {
            "q" => {
                q = Some(v.parse().map_err(|_| {
                    CliError::Validation(format!("q must be a number, got '{v}'"))
                })?)
            }
            _ => return Err(CliError::Validation(format!("unknown nonlinearity parameter '{k}'"))),
        }
    }
    match (name, q) {
        ("cubic_pinned", None) => Ok(NonlinearityTag::CubicPinned {}),
        ("cubic_pinned", Some(_)) => Err(CliError::Validation(
            "cubic_pinned takes no parameters".into(),
        )),
        ("power", Some(q)) => Ok(NonlinearityTag::Power { q }),
        ("power", None) => Err(CliError::Validation("power needs q, e.g. power,q=4".into())),
        _ => Err(CliError::Validation(format!(
            "unknown nonlinearity '{name}'; expected cubic_pinned or power,q=..."
        ))),
    }
}
