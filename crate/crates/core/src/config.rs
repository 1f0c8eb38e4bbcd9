//! Experiment configuration files and the objects built from them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuchsian::{GroupError, SurfaceGroup, Word, DEFAULT_BALL_CAP};
use crate::lamination::{ComponentSpec, LaminationError, MeasuredMulticurve};
use crate::metric::{MetricOptions, Tolerances};
use crate::mink::{HPoint, Mat3};
use crate::singularity::{SingularityError, Spacetime};
use crate::times::{time_by_name, TimeError, TimeFunction, TIME_NAMES};

pub const BUILTIN_SURFACE: &str = "genus2-octagon";

/// RNG streams, so that adding samples of one kind never shifts another.
pub const STREAM_PAIRS: u64 = 1;
pub const STREAM_SHAPE: u64 = 2;
pub const STREAM_TREE: u64 = 3;
pub const STREAM_SIGMA: u64 = 4;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Failures while building the experiment from a valid configuration.
#[derive(Debug, Error)]
pub enum BuildError {
    #[error("surface: {0}")]
    Group(#[from] GroupError),
    #[error("lamination: {0}")]
    Lamination(#[from] LaminationError),
    #[error("singularity: {0}")]
    Singularity(#[from] SingularityError),
    #[error("times: {0}")]
    Time(#[from] TimeError),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum SurfaceSpec {
    Builtin(String),
    /// Images of `a1, b1, a2, b2` in SO⁺(1,2) and the relator they satisfy.
    Custom { generators: [[[f64; 3]; 3]; 4], relator: Word },
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec::Builtin(BUILTIN_SURFACE.into())
    }
}

/// Geometric grid `a0·factor^k`, `k = 0..count`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AGrid {
    pub a0: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for AGrid {
    fn default() -> Self {
        AGrid {
            a0: 1.0,
            factor: 0.5,
            count: 9,
        }
    }
}

impl AGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.a0 * self.factor.powi(k as i32)).collect()
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(invalid(&format!("{field}.a0"), format!("must be positive, got {}", self.a0)));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(invalid(&format!("{field}.factor"), format!("must lie in (0, 1), got {}", self.factor)));
        }
        if self.count < 3 {
            return Err(invalid(&format!("{field}.count"), "extrapolation needs at least 3 values"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Radii {
    /// Hyperbolic radius about the basepoint covered by the leaf lift.
    pub leaves: f64,
    /// Word radius of the axis-search candidates.
    pub search: usize,
    /// Largest power of each candidate in the axis search.
    pub search_power: usize,
    /// Word radius of the ball used for simplicity and cocycle checks.
    pub validation: usize,
    /// Maximum number of elements in any enumerated ball.
    pub cap: usize,
}

impl Default for Radii {
    fn default() -> Self {
        Radii {
            leaves: 5.0,
            search: 2,
            search_power: 2,
            validation: 3,
            cap: DEFAULT_BALL_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PairSpec {
    /// Number of random pairs, uniform in angle and radius.
    pub random: usize,
    /// Radius of the disk about the basepoint the random points lie in.
    pub radius: f64,
    /// Extra pairs as polar coordinates `[[r, θ], [r, θ]]`.
    pub explicit: Vec<[[f64; 2]; 2]>,
}

impl Default for PairSpec {
    fn default() -> Self {
        PairSpec {
            random: 20,
            radius: 3.0,
            explicit: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    /// Points sampled for the second fundamental form check.
    pub shape_samples: usize,
    pub directions: usize,
    /// Hyperbolic radius of the sampled points.
    pub sample_radius: f64,
    pub four_point_tuples: usize,
    pub sigma_pairs: usize,
    pub max_power: usize,
    /// Times that must fail the shape check (counterexamples).
    pub expect_fail: Vec<String>,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            shape_samples: 200,
            directions: 8,
            sample_radius: 1.5,
            four_point_tuples: 500,
            sigma_pairs: 30,
            max_power: 4,
            expect_fail: Vec::new(),
        }
    }
}

fn default_times() -> Vec<String> {
    vec!["cosmological".into(), "hull".into()]
}

fn default_gammas() -> Vec<Word> {
    ["a1", "b1", "a1b1", "b1a2"].iter().map(|w| w.parse().unwrap()).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub lamination: Vec<ComponentSpec>,
    /// Time functions; the cosmological time is always the reference.
    #[serde(default = "default_times")]
    pub times: Vec<String>,
    #[serde(default)]
    pub a_grid: AGrid,
    /// Grid for spectra; the distance grid when absent.
    #[serde(default)]
    pub spectrum_grid: Option<AGrid>,
    #[serde(default)]
    pub radii: Radii,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub pairs: PairSpec,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<Word>,
    /// Run the proof-path chain for each pair.
    #[serde(default = "default_true")]
    pub chains: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub metric: MetricOptions,
    #[serde(default)]
    pub validation: ValidationSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                path: path.to_path_buf(),
                field,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let SurfaceSpec::Builtin(name) = &self.surface {
            if name != BUILTIN_SURFACE {
                return Err(invalid("surface", format!("unknown builtin surface `{name}`")));
            }
        }
        for (i, c) in self.lamination.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(invalid(&format!("lamination[{i}].weight"), format!("must be positive, got {}", c.weight)));
            }
            if c.word.is_empty() {
                return Err(invalid(&format!("lamination[{i}].word"), "empty word"));
            }
        }
        for (i, t) in self.times.iter().enumerate() {
            if !TIME_NAMES.contains(&t.as_str()) {
                return Err(invalid(&format!("times[{i}]"), format!("unknown time `{t}`, expected one of {TIME_NAMES:?}")));
            }
        }
        for (i, t) in self.validation.expect_fail.iter().enumerate() {
            if !TIME_NAMES.contains(&t.as_str()) {
                return Err(invalid(&format!("validation.expect_fail[{i}]"), format!("unknown time `{t}`")));
            }
        }
        self.a_grid.validate("a_grid")?;
        if let Some(g) = &self.spectrum_grid {
            g.validate("spectrum_grid")?;
        }
        let r = &self.radii;
        if !(r.leaves >= 1.0 && r.leaves.is_finite()) {
            return Err(invalid("radii.leaves", format!("must be at least 1, got {}", r.leaves)));
        }
        for (name, v) in [
            ("radii.search", r.search),
            ("radii.search_power", r.search_power),
            ("radii.validation", r.validation),
            ("radii.cap", r.cap),
        ] {
            if v < 1 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        let p = &self.pairs;
        if !(p.radius >= 0.0 && p.radius < r.leaves) {
            return Err(invalid("pairs.radius", format!("must lie in [0, radii.leaves), got {}", p.radius)));
        }
        for (i, pair) in p.explicit.iter().enumerate() {
            if pair.iter().any(|q| !(q[0] >= 0.0 && q[0] < r.leaves) || !q[1].is_finite()) {
                return Err(invalid(&format!("pairs.explicit[{i}]"), "polar radius must lie in [0, radii.leaves)"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.relative", t.relative),
            ("tolerances.absolute_at_zero", t.absolute_at_zero),
            ("tolerances.monotone_slack", t.monotone_slack),
            ("tolerances.noise", t.noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be a nonnegative number, got {v}")));
            }
        }
        let m = &self.metric;
        if !(m.chart_radius > 1.0 && m.node_spacing > 0.0 && m.fd_step > 0.0) {
            return Err(invalid("metric", "chart_radius > 1, node_spacing > 0 and fd_step > 0 are required"));
        }
        let v = &self.validation;
        if v.directions == 0 || !(v.sample_radius >= 0.0 && v.sample_radius < r.leaves) {
            return Err(invalid("validation", "directions ≥ 1 and sample_radius in [0, radii.leaves) are required"));
        }
        Ok(())
    }

    pub fn group(&self) -> Result<SurfaceGroup, GroupError> {
        match &self.surface {
            SurfaceSpec::Builtin(_) => SurfaceGroup::genus2_octagon(),
            SurfaceSpec::Custom { generators, relator } => {
                SurfaceGroup::from_generators(generators.map(Mat3), relator.clone())
            }
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        self.a_grid.values()
    }

    pub fn spectrum_grid(&self) -> Vec<f64> {
        self.spectrum_grid.as_ref().unwrap_or(&self.a_grid).values()
    }

    /// RNG for one kind of sample.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Explicit pairs followed by the random ones.
    pub fn sample_pairs(&self) -> Vec<(HPoint, HPoint)> {
        let mut rng = self.rng(STREAM_PAIRS);
        let r = self.pairs.radius;
        let mut point = || HPoint::from_polar(rng.gen_range(0.0..=r), rng.gen_range(0.0..std::f64::consts::TAU));
        let mut out: Vec<(HPoint, HPoint)> = self
            .pairs
            .explicit
            .iter()
            .map(|[p, q]| (HPoint::from_polar(p[0], p[1]), HPoint::from_polar(q[0], q[1])))
            .collect();
        for _ in 0..self.pairs.random {
            let p = point();
            let q = point();
            out.push((p, q));
        }
        out
    }

    /// Group, lamination (checked for simplicity) and spacetime.
    pub fn build(&self) -> Result<Experiment, BuildError> {
        let group = self.group()?;
        let ball = crate::fuchsian::GroupBall::build(&group, self.radii.validation, self.radii.cap)?;
        let lamination = MeasuredMulticurve::realize(&group, &self.lamination, &ball)?;
        let st = Arc::new(Spacetime::with_cap(&group, lamination, self.radii.leaves, self.radii.cap)?);
        let tau = time_by_name("cosmological", st.clone())?;
        let mut times = Vec::new();
        for name in &self.times {
            if name != "cosmological" && !times.iter().any(|t: &Arc<dyn TimeFunction>| &t.name() == name) {
                times.push(time_by_name(name, st.clone())?);
            }
        }
        Ok(Experiment {
            group,
            ball,
            st,
            tau,
            times,
        })
    }
}

/// Everything a subcommand needs, built once from the configuration.
pub struct Experiment {
    pub group: SurfaceGroup,
    /// Word ball used for the simplicity and cocycle checks.
    pub ball: crate::fuchsian::GroupBall,
    pub st: Arc<Spacetime>,
    pub tau: Arc<dyn TimeFunction>,
    /// Times other than τ, in config order.
    pub times: Vec<Arc<dyn TimeFunction>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_json(text, Path::new("test.json"))
    }

    #[test]
    fn empty_config_takes_defaults() {
        let c = parse("{}").unwrap();
        assert_eq!(c.surface, SurfaceSpec::Builtin(BUILTIN_SURFACE.into()));
        assert_eq!(c.grid().len(), 9);
        assert_eq!(c.grid()[8], 1.0 / 256.0);
        assert!(c.lamination.is_empty());
    }

    #[test]
    fn parse_errors_name_field_and_line() {
        let err = parse("{\n  \"a_grid\": {\"a0\": 1, \"factor\": \"half\", \"count\": 4}\n}").unwrap_err();
        let ConfigError::Parse { field, line, .. } = err else { panic!("{err}") };
        assert_eq!(field, "a_grid.factor");
        assert_eq!(line, 2);
        let err = parse("{\"lamination\": [{\"word\": \"a3\", \"weight\": 1}]}").unwrap_err();
        assert!(err.to_string().contains("lamination[0].word"), "{err}");
        let err = parse("{\"radiii\": {}}").unwrap_err();
        assert!(err.to_string().contains("radiii"), "{err}");
    }

    #[test]
    fn invariants_are_enforced() {
        for (text, field) in [
            (r#"{"a_grid": {"a0": 0, "factor": 0.5, "count": 4}}"#, "a_grid.a0"),
            (r#"{"a_grid": {"a0": 1, "factor": 1.0, "count": 4}}"#, "a_grid.factor"),
            (r#"{"radii": {"leaves": 0.5}}"#, "radii.leaves"),
            (r#"{"radii": {"search": 0}}"#, "radii.search"),
            (r#"{"times": ["proper"]}"#, "times[0]"),
            (r#"{"surface": "torus"}"#, "surface"),
            (r#"{"lamination": [{"word": "a1", "weight": -1}]}"#, "lamination[0].weight"),
        ] {
            match parse(text) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn pairs_depend_only_on_the_seed() {
        let mut c = ExperimentConfig {
            seed: 3,
            ..Default::default()
        };
        let a = c.sample_pairs();
        let b = c.sample_pairs();
        assert_eq!(a.len(), 20);
        assert!(a.iter().zip(&b).all(|(p, q)| p.0.vec() == q.0.vec() && p.1.vec() == q.1.vec()));
        c.seed = 4;
        assert_ne!(a[0].0.vec(), c.sample_pairs()[0].0.vec());
    }
}
