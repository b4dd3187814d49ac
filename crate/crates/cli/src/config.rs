//! Run configuration: a sectioned `key = value` document (TOML).
//!
//! Every problem in a document is collected before failing, so one run of
//! the parser reports all missing keys, type mismatches and constraint
//! violations together.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use slipflow::carrier::{default_cutoffs, CarrierParams, CutoffParams, TransitionKind};
use slipflow::geometry::ChannelGeometry;
use slipflow::solver::SolveOptions;
use toml::{Table, Value};

/// Allowed sections and their keys; anything else is rejected.
const SCHEMA: &[(&str, &[&str])] = &[
    ("geometry", &["profile", "amplitude", "half_width", "min_width"]),
    ("flow", &["flux"]),
    ("cutoffs", &["epsilon", "dist", "transition"]),
    ("domain", &["T", "h"]),
    ("solver", &["tol", "max_iters", "damping", "delta_target", "oseen"]),
    ("run", &["seed", "output"]),
    ("verify", &["nx", "ny", "wall_samples", "stations"]),
    ("constants", &["samples", "window", "bogovskii_h"]),
    ("decay", &["t_min", "t_max", "points"]),
    ("growth", &["t_max", "points"]),
    ("probe", &["random_starts", "relative", "carrier_scale"]),
    ("mms", &["h"]),
    ("certify", &["epsilon", "dist", "samples", "window"]),
];

/// All problems found in one configuration document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError {
    pub problems: Vec<String>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

/// A cutoff given explicitly or left to the default policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Auto,
    Given,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryConfig {
    pub profile: String,
    pub amplitude: f64,
    pub half_width: f64,
    pub min_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub flux: f64,
}

/// Cutoffs after resolution; `*_source` records whether the policy chose them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffConfig {
    pub epsilon: f64,
    pub dist: f64,
    pub transition: String,
    #[serde(skip)]
    pub epsilon_source: Source,
    #[serde(skip)]
    pub dist_source: Source,
    #[serde(skip)]
    pub policy_warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainConfig {
    #[serde(rename = "T")]
    pub half_length: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: u64,
    pub damping: f64,
    pub delta_target: f64,
    pub oseen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub nx: u64,
    pub ny: u64,
    pub wall_samples: u64,
    pub stations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsConfig {
    pub samples: u64,
    pub window: [f64; 2],
    pub bogovskii_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub points: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthConfig {
    pub t_max: f64,
    pub points: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub random_starts: u64,
    pub relative: f64,
    pub carrier_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MmsConfig {
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyConfig {
    pub epsilon: Vec<f64>,
    pub dist: Vec<f64>,
    pub samples: u64,
    pub window: [f64; 2],
}

/// Fully validated configuration with every default resolved.
///
/// Serializing it gives a document that [`parse_config`] accepts and that
/// reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub flow: FlowConfig,
    pub cutoffs: CutoffConfig,
    pub domain: DomainConfig,
    pub solver: SolverConfig,
    pub run: RunSection,
    pub verify: VerifyConfig,
    pub constants: ConstantsConfig,
    pub decay: DecayConfig,
    pub growth: GrowthConfig,
    pub probe: ProbeConfig,
    pub mms: MmsConfig,
    pub certify: CertifyConfig,
}

impl RunConfig {
    pub fn channel(&self) -> ChannelGeometry {
        match self.geometry.profile.as_str() {
            "straight" => ChannelGeometry {
                min_width: self.geometry.min_width,
                ..ChannelGeometry::straight(self.geometry.half_width)
            },
            _ => ChannelGeometry::bump(self.geometry.amplitude, self.geometry.half_width, self.geometry.min_width)
                .expect("geometry validated at parse time"),
        }
    }

    pub fn transition(&self) -> TransitionKind {
        if self.cutoffs.transition == "smooth" {
            TransitionKind::Smooth
        } else {
            TransitionKind::Triangular
        }
    }

    pub fn carrier_params(&self) -> CarrierParams {
        CarrierParams {
            transition: self.transition(),
            ..CarrierParams::new(self.channel(), self.flow.flux, self.cutoffs.epsilon, self.cutoffs.dist)
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            picard_tol: self.solver.tol,
            max_iters: self.solver.max_iters as usize,
            damping: self.solver.damping,
            delta_target: self.solver.delta_target,
            oseen: self.solver.oseen,
        }
    }

    /// The resolved configuration as a TOML document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ValidationError> {
    let text = std::fs::read_to_string(path).map_err(|e| ValidationError {
        problems: vec![format!("cannot read {}: {e}", path.display())],
    })?;
    parse_config(&text)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ValidationError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ValidationError { problems: vec![format!("syntax: {}", e.message())] })?;
    let mut r = Reader { root: &root, problems: Vec::new() };
    r.check_schema();
    let config = r.read();
    match config {
        Some(c) if r.problems.is_empty() => Ok(c),
        _ => Err(ValidationError { problems: r.problems }),
    }
}

struct Reader<'a> {
    root: &'a Table,
    problems: Vec<String>,
}

/// `auto` or a number.
enum Choice {
    Auto,
    Value(f64),
}

impl<'a> Reader<'a> {
    fn check_schema(&mut self) {
        for (name, value) in self.root {
            match SCHEMA.iter().find(|(s, _)| s == name) {
                None => self.problems.push(format!("unknown section [{name}]")),
                Some((_, keys)) => match value {
                    Value::Table(t) => {
                        for key in t.keys() {
                            if !keys.contains(&key.as_str()) {
                                self.problems.push(format!("unknown key {name}.{key}"));
                            }
                        }
                    }
                    _ => self.problems.push(format!("{name} must be a [section]")),
                },
            }
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.root.get(section)?.as_table()?.get(key)
    }

    fn mismatch(&mut self, section: &str, key: &str, expected: &str, v: &Value) {
        self.problems.push(format!("{section}.{key}: expected {expected}, found {}", v.type_str()));
    }

    fn number(&mut self, section: &str, key: &str) -> Option<Option<f64>> {
        match self.raw(section, key) {
            None => Some(None),
            Some(Value::Float(x)) => Some(Some(*x)),
            Some(Value::Integer(i)) => Some(Some(*i as f64)),
            Some(v) => {
                self.mismatch(section, key, "a number", v);
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.number(section, key).flatten().unwrap_or(default)
    }

    fn required(&mut self, section: &str, key: &str) -> f64 {
        match self.number(section, key) {
            Some(Some(x)) => x,
            Some(None) => {
                self.problems.push(format!("missing required key {section}.{key}"));
                f64::NAN
            }
            None => f64::NAN,
        }
    }

    fn count(&mut self, section: &str, key: &str, default: u64) -> u64 {
        match self.raw(section, key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(Value::Integer(i)) => {
                self.problems.push(format!("{section}.{key} = {i} must be nonnegative"));
                default
            }
            Some(v) => {
                self.mismatch(section, key, "a nonnegative integer", v);
                default
            }
        }
    }

    fn boolean(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.raw(section, key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.mismatch(section, key, "true or false", v);
                default
            }
        }
    }

    fn string(&mut self, section: &str, key: &str, default: &str, allowed: &[&str]) -> String {
        match self.raw(section, key) {
            None => default.to_string(),
            Some(Value::String(s)) if allowed.is_empty() || allowed.contains(&s.as_str()) => s.clone(),
            Some(Value::String(s)) => {
                self.problems.push(format!("{section}.{key} = \"{s}\" must be one of {allowed:?}"));
                default.to_string()
            }
            Some(v) => {
                self.mismatch(section, key, "a string", v);
                default.to_string()
            }
        }
    }

    fn choice(&mut self, section: &str, key: &str) -> Choice {
        match self.raw(section, key) {
            None => Choice::Auto,
            Some(Value::String(s)) if s == "auto" => Choice::Auto,
            Some(Value::Float(x)) => Choice::Value(*x),
            Some(Value::Integer(i)) => Choice::Value(*i as f64),
            Some(v) => {
                self.mismatch(section, key, "a number or \"auto\"", v);
                Choice::Auto
            }
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        match self.raw(section, key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        v => {
                            self.mismatch(section, key, "an array of numbers", v);
                            return None;
                        }
                    }
                }
                Some(out)
            }
            v => {
                self.mismatch(section, key, "an array of numbers", v);
                None
            }
        }
    }

    fn window(&mut self, section: &str, key: &str, default: [f64; 2]) -> [f64; 2] {
        match self.list(section, key) {
            None => default,
            Some(w) if w.len() == 2 && w[0] < w[1] => [w[0], w[1]],
            Some(w) => {
                self.problems.push(format!("{section}.{key} = {w:?} must be an interval [a, b] with a < b"));
                default
            }
        }
    }

    fn require(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.problems.push(message());
        }
    }

    fn read(&mut self) -> Option<RunConfig> {
        // geometry
        let profile = self.string("geometry", "profile", "bump", &["bump", "straight"]);
        let straight = profile == "straight";
        let amplitude = if straight { 0.0 } else { self.float("geometry", "amplitude", 0.2) };
        if straight && self.raw("geometry", "amplitude").is_some() {
            self.problems.push("geometry.amplitude is not used by the straight profile".into());
        }
        let half_width = self.float("geometry", "half_width", if straight { 0.0 } else { 1.5 });
        let narrowest = 2.0 * (1.0 + amplitude.min(0.0));
        let min_width = self.float("geometry", "min_width", narrowest);
        self.require(amplitude.is_finite() && amplitude > -1.0, || {
            format!("geometry.amplitude = {amplitude} must be finite and above -1")
        });
        self.require(half_width.is_finite() && half_width >= 0.0, || {
            format!("geometry.half_width = {half_width} must be finite and nonnegative")
        });
        self.require(straight || half_width > 0.0, || "geometry.half_width must be positive for a bump".into());
        self.require(min_width > 0.0 && min_width <= narrowest, || {
            format!("geometry.min_width = {min_width} must lie in (0, {narrowest}], the narrowest width")
        });

        let flux = self.required("flow", "flux");
        self.require(flux.is_nan() || flux.is_finite(), || format!("flow.flux = {flux} must be finite"));

        let half_length = self.required("domain", "T");
        let h = self.required("domain", "h");
        if half_length.is_finite() {
            self.require(half_length >= half_width + 1.0, || {
                format!(
                    "domain.T = {half_length} is too short: T ≥ L + 1 = {} is required",
                    half_width + 1.0
                )
            });
        }
        if !h.is_nan() {
            self.require(h > 0.0 && h <= 1.0, || format!("domain.h = {h} must lie in (0, 1]"));
        }

        let transition = self.string("cutoffs", "transition", "triangular", &["triangular", "smooth"]);
        let eps_choice = self.choice("cutoffs", "epsilon");
        let dist_choice = self.choice("cutoffs", "dist");
        if let Choice::Value(e) = eps_choice {
            self.require(e > 0.0 && e < 1.0, || format!("cutoffs.epsilon = {e} violates ε ∈ (0, 1)"));
        }
        if let Choice::Value(d) = dist_choice {
            self.require(d > half_width, || format!("cutoffs.dist = {d} violates 𝔡 > L = {half_width}"));
        }

        let tol = self.float("solver", "tol", 1e-9);
        let max_iters = self.count("solver", "max_iters", 50);
        let damping = self.float("solver", "damping", 1.0);
        let delta_target = self.float("solver", "delta_target", 0.25);
        let oseen = self.boolean("solver", "oseen", false);
        let solve = SolveOptions { picard_tol: tol, max_iters: max_iters as usize, damping, delta_target, oseen };
        if let Err(e) = solve.validate() {
            self.problems.push(format!("solver: {e}"));
        }

        let seed = self.count("run", "seed", 0);
        let output = PathBuf::from(self.string("run", "output", "slipflow-out", &[]));

        let verify = VerifyConfig {
            nx: self.count("verify", "nx", 401),
            ny: self.count("verify", "ny", 201),
            wall_samples: self.count("verify", "wall_samples", 200),
            stations: self.count("verify", "stations", 20),
        };
        self.require(verify.nx >= 2 && verify.ny >= 2 && verify.wall_samples >= 1 && verify.stations >= 1, || {
            "verify: nx and ny must be at least 2, wall_samples and stations at least 1".into()
        });

        // Geometry-dependent checks need a consistent channel.
        if !self.problems.is_empty() {
            return None;
        }
        let geom = if straight {
            ChannelGeometry { min_width, ..ChannelGeometry::straight(half_width) }
        } else {
            match ChannelGeometry::bump(amplitude, half_width, min_width) {
                Ok(g) => g,
                Err(e) => {
                    self.problems.push(format!("geometry: {e}"));
                    return None;
                }
            }
        };
        let policy = default_cutoffs(&geom, h);
        let (epsilon, epsilon_source) = match eps_choice {
            Choice::Auto => (policy.cutoffs.epsilon, Source::Auto),
            Choice::Value(e) => (e, Source::Given),
        };
        let (dist, dist_source) = match dist_choice {
            Choice::Auto => (policy.cutoffs.dist, Source::Auto),
            Choice::Value(d) => (d, Source::Given),
        };
        if let Err(e) = (CutoffParams { epsilon, dist }).validate(&geom) {
            self.problems.push(format!("cutoffs: {e}"));
        }
        let policy_warning = (epsilon_source == Source::Auto).then_some(policy.warning).flatten();

        let constants = ConstantsConfig {
            samples: self.count("constants", "samples", 20),
            window: self.window("constants", "window", [-2.0, 2.0]),
            bogovskii_h: self.float("constants", "bogovskii_h", h.min(0.0625)),
        };
        self.require(constants.samples >= 1, || "constants.samples must be at least 1".into());
        self.require(constants.window[1] - constants.window[0] >= 0.5, || {
            "constants.window must have length at least 0.5".into()
        });
        self.require(constants.bogovskii_h > 0.0 && constants.bogovskii_h <= 0.5, || {
            format!("constants.bogovskii_h = {} must lie in (0, 0.5]", constants.bogovskii_h)
        });

        let decay = DecayConfig {
            t_min: self.float("decay", "t_min", 2.0 * dist + 1.0),
            t_max: self.float("decay", "t_max", half_length - 1.0),
            points: self.count("decay", "points", 9),
        };
        self.require(decay.points >= 3, || "decay.points must be at least 3".into());

        let growth = GrowthConfig {
            t_max: self.float("growth", "t_max", half_length),
            points: self.count("growth", "points", half_length.round().max(2.0) as u64),
        };
        self.require(growth.points >= 2, || "growth.points must be at least 2".into());
        self.require(growth.t_max > 0.0 && growth.t_max <= half_length, || {
            format!("growth.t_max = {} must lie in (0, T = {half_length}]", growth.t_max)
        });

        let probe = ProbeConfig {
            random_starts: self.count("probe", "random_starts", 1),
            relative: self.float("probe", "relative", 0.5),
            carrier_scale: self.float("probe", "carrier_scale", 0.5),
        };
        self.require(probe.relative > 0.0 && probe.relative.is_finite(), || {
            format!("probe.relative = {} must be positive", probe.relative)
        });
        self.require(probe.carrier_scale.is_finite(), || "probe.carrier_scale must be finite".into());

        let mms = MmsConfig { h: self.list("mms", "h").unwrap_or_else(|| vec![0.5, 0.25, 0.125]) };
        self.require(mms.h.len() >= 2 && mms.h.windows(2).all(|w| w[1] < w[0]) && mms.h.iter().all(|&x| x > 0.0), || {
            format!("mms.h = {:?} must hold at least two positive, strictly decreasing sizes", mms.h)
        });

        let certify = CertifyConfig {
            epsilon: self.list("certify", "epsilon").unwrap_or_else(|| {
                [epsilon, 0.5 * epsilon, 0.25 * epsilon].to_vec()
            }),
            dist: self.list("certify", "dist").unwrap_or_else(|| vec![dist, 2.0 * dist]),
            samples: self.count("certify", "samples", 50),
            window: self.window("certify", "window", [-2.0 * dist, 2.0 * dist]),
        };
        self.require(!certify.epsilon.is_empty() && !certify.dist.is_empty(), || {
            "certify.epsilon and certify.dist must be nonempty".into()
        });
        for &e in &certify.epsilon {
            if let Err(err) = (CutoffParams { epsilon: e, dist: certify.dist.iter().copied().fold(f64::INFINITY, f64::min) }).validate(&geom) {
                self.problems.push(format!("certify: {err}"));
            }
        }
        self.require(certify.samples >= 1, || "certify.samples must be at least 1".into());

        if !self.problems.is_empty() {
            return None;
        }
        Some(RunConfig {
            geometry: GeometryConfig { profile, amplitude, half_width, min_width },
            flow: FlowConfig { flux },
            cutoffs: CutoffConfig { epsilon, dist, transition, epsilon_source, dist_source, policy_warning },
            domain: DomainConfig { half_length, h },
            solver: SolverConfig { tol, max_iters, damping, delta_target, oseen },
            run: RunSection { seed, output },
            verify,
            constants,
            decay,
            growth,
            probe,
            mms,
            certify,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips() {
        let c = parse_config("[flow]\nflux = 0.5\n[domain]\nT = 10\nh = 0.25\n").unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(again.cutoffs.epsilon, c.cutoffs.epsilon);
        assert_eq!(again.to_toml(), c.to_toml());
    }

    #[test]
    fn problems_are_aggregated() {
        let e = parse_config("[flow]\nflux = \"x\"\n[domain]\nh = -1\n[bogus]\n").unwrap_err();
        assert!(e.problems.len() >= 4, "{e}");
    }
}
