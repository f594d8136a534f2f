//! Flat `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::adjoint::CostSpec;
use crate::control::{AdmissibleSet, OptimizerConfig};
use crate::grid::{build_mesh, SpatialMesh, Trajectory};
use crate::potential::PotentialSpec;
use crate::state::{InitialData, ModelParams, NewtonConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Parse { origin: Origin, message: String },
    #[error("{key} ({origin}): must satisfy {constraint}")]
    Validation {
        key: String,
        origin: Origin,
        constraint: String,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Default,
    Line(usize),
    Override(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override(n) => write!(f, "override #{n}"),
        }
    }
}

/// Spatial profile on Ω or Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// Linear in x from `a` at x = 0 to `b` at x = L_x.
    Ramp(f64, f64),
    /// `base + amp · exp(−|x − centre|² / width²)`.
    Bump {
        base: f64,
        amp: f64,
        width: f64,
    },
}

impl Profile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let t = text.trim();
        if let Ok(v) = t.parse::<f64>() {
            return Ok(Profile::Constant(v));
        }
        let (name, rest) = t.split_once('(').ok_or_else(|| format!("not a profile: '{t}'"))?;
        let inner = rest.strip_suffix(')').ok_or_else(|| format!("missing ')' in '{t}'"))?;
        let args = parse_list(inner)?;
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{} takes {n} arguments, got {}", name.trim(), args.len()))
            }
        };
        match name.trim() {
            "constant" => want(1).map(|_| Profile::Constant(args[0])),
            "ramp" => want(2).map(|_| Profile::Ramp(args[0], args[1])),
            "bump" => {
                want(3)?;
                if !(args[2] > 0.0) {
                    return Err("bump width must be > 0".into());
                }
                Ok(Profile::Bump {
                    base: args[0],
                    amp: args[1],
                    width: args[2],
                })
            }
            other => Err(format!("unknown profile '{other}' (constant | ramp | bump)")),
        }
    }

    pub fn eval(&self, mesh: &SpatialMesh, x: f64, y: f64) -> f64 {
        let ext = mesh.extents();
        match *self {
            Profile::Constant(c) => c,
            Profile::Ramp(a, b) => a + (b - a) * x / ext[0],
            Profile::Bump { base, amp, width } => {
                let mut r2 = (x - 0.5 * ext[0]).powi(2);
                if ext.len() > 1 {
                    r2 += (y - 0.5 * ext[1]).powi(2);
                }
                base + amp * (-r2 / (width * width)).exp()
            }
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: '{}'", p.trim()))
        })
        .collect()
}

/// Every recognised key with its default.
const KEYS: &[(&str, &str)] = &[
    ("mesh.dimension", "1"),
    ("mesh.extents", "1.0"),
    ("mesh.nodes", "33"),
    ("model.epsilon", "1.0"),
    ("model.delta", "1.0"),
    ("model.final_time", "0.5"),
    ("model.steps", "40"),
    ("model.delay_k", "1"),
    ("model.alpha", "constant(1.0)"),
    ("newton.tol", "1e-10"),
    ("newton.max_iter", "50"),
    ("newton.damping_min", "0.0009765625"),
    ("potential.c", "1.0"),
    ("potential.c2", "3.0"),
    ("potential.poly", ""),
    ("potential.barrier_guard", "1e-12"),
    ("initial.rho0", "ramp(0.4, 0.6)"),
    ("initial.mu0", "constant(1.0)"),
    ("control.u", "constant(1.0)"),
    ("control.u_time_amp", "0.0"),
    ("control.u_time_freq", "1.0"),
    ("control.file", ""),
    ("cost.beta1", "0.01"),
    ("cost.beta2", "0.0"),
    ("cost.rho_target", "constant(0.5)"),
    ("cost.mu_target", "constant(0.0)"),
    ("admissible.u1", "0.5"),
    ("admissible.u2", "2.0"),
    ("admissible.rate_bound", "10.0"),
    ("optimizer.initial_step", "1.0"),
    ("optimizer.armijo", "1e-4"),
    ("optimizer.shrink", "0.5"),
    ("optimizer.max_iter", "100"),
    ("optimizer.vi_tol", "1e-4"),
    ("optimizer.max_sweeps", "50"),
    ("optimizer.min_step", "1e-12"),
    ("taylor.pairs", "3"),
    ("taylor.eps0", "1e-2"),
    ("taylor.halvings", "3"),
    ("gradient.directions", "5"),
    ("gradient.fd_steps", "1e-4, 1e-5, 1e-6"),
    ("stability.magnitudes", "1e-1, 1e-2, 1e-3"),
    ("delay.k_list", "1, 2, 4"),
    ("output.dir", "out"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpec {
    pub profile: Profile,
    pub time_amp: f64,
    pub time_freq: f64,
    /// CSV control overriding the profile, relative paths resolved against
    /// the config file's directory.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub final_time: f64,
    pub steps: usize,
    pub delay_k: usize,
    pub alpha: Profile,
    pub newton: NewtonConfig,
    pub c: f64,
    pub poly: Vec<f64>,
    pub barrier_guard: f64,
    pub rho0: Profile,
    pub mu0: Profile,
    pub control: ControlSpec,
    pub beta1: f64,
    pub beta2: f64,
    pub rho_target: Profile,
    pub mu_target: Profile,
    pub u1: f64,
    pub u2: f64,
    pub rate_bound: f64,
    pub optimizer: OptimizerConfig,
    pub taylor_pairs: usize,
    pub taylor_eps0: f64,
    pub taylor_halvings: usize,
    pub gradient_directions: usize,
    pub gradient_fd_steps: Vec<f64>,
    pub stability_magnitudes: Vec<f64>,
    pub delay_k_list: Vec<usize>,
    pub output_dir: PathBuf,
    mesh: SpatialMesh,
}

struct Raw {
    values: BTreeMap<&'static str, (String, Origin)>,
}

impl Raw {
    fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        match KEYS.iter().find(|(k, _)| *k == key) {
            Some((k, _)) => {
                self.values.insert(k, (value.trim().to_string(), origin));
                Ok(())
            }
            None => Err(ConfigError::Parse {
                origin,
                message: format!("unknown key '{key}'"),
            }),
        }
    }

    fn get(&self, key: &str) -> (&str, Origin) {
        let (v, o) = &self.values[key];
        (v.as_str(), *o)
    }

    fn origin(&self, key: &str) -> Origin {
        self.get(key).1
    }

    fn typed<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        let (v, origin) = self.get(key);
        parse(v).map_err(|message| ConfigError::Parse {
            origin,
            message: format!("{key}: {message}"),
        })
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.typed(key, |v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("expected a finite number, got '{v}'"))
        })
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.typed(key, |v| {
            v.parse::<usize>()
                .map_err(|_| format!("expected a nonnegative integer, got '{v}'"))
        })
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.typed(key, |v| if v.is_empty() { Ok(vec![]) } else { parse_list(v) })
    }

    fn profile(&self, key: &str) -> Result<Profile, ConfigError> {
        self.typed(key, Profile::parse)
    }

    fn require(&self, key: &str, ok: bool, constraint: impl Into<String>) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Validation {
                key: key.to_string(),
                origin: self.origin(key),
                constraint: format!("{} (got '{}')", constraint.into(), self.get(key).0),
            })
        }
    }
}

/// Parses a config with no overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `section.key=value` overrides in order.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut raw = Raw {
        values: KEYS
            .iter()
            .map(|(k, v)| (*k, (v.to_string(), Origin::Default)))
            .collect(),
    };
    let mut seen = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let origin = Origin::Line(i + 1);
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            origin,
            message: format!("expected 'section.key = value', got '{content}'"),
        })?;
        let key = key.trim();
        if let Some(prev) = seen.insert(key.to_string(), i + 1) {
            return Err(ConfigError::Parse {
                origin,
                message: format!("duplicate key '{key}' (first set on line {prev})"),
            });
        }
        raw.set(key, value, origin)?;
    }
    for (i, ov) in overrides.iter().enumerate() {
        let origin = Origin::Override(i + 1);
        let (key, value) = ov.split_once('=').ok_or_else(|| ConfigError::Parse {
            origin,
            message: format!("expected 'section.key=value', got '{ov}'"),
        })?;
        raw.set(key.trim(), value, origin)?;
    }
    build(&raw)
}

fn build(raw: &Raw) -> Result<RunConfig, ConfigError> {
    let dimension = raw.usize("mesh.dimension")?;
    raw.require(
        "mesh.dimension",
        dimension == 1 || dimension == 2,
        "dimension in {1, 2}",
    )?;
    let extents = raw.list("mesh.extents")?;
    raw.require("mesh.extents", extents.len() == dimension, "one extent per dimension")?;
    raw.require("mesh.extents", extents.iter().all(|e| *e > 0.0), "extents > 0")?;
    let nodes: Vec<usize> = raw.typed("mesh.nodes", |v| {
        v.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("not a node count: '{}'", p.trim()))
            })
            .collect()
    })?;
    raw.require("mesh.nodes", nodes.len() == dimension, "one node count per dimension")?;
    raw.require(
        "mesh.nodes",
        nodes.iter().all(|n| *n >= 3),
        "at least 3 nodes per direction",
    )?;
    let mesh = build_mesh(dimension, &extents, &nodes).map_err(|e| ConfigError::Validation {
        key: "mesh.nodes".into(),
        origin: raw.origin("mesh.nodes"),
        constraint: e.to_string(),
    })?;

    let epsilon = raw.f64("model.epsilon")?;
    raw.require("model.epsilon", epsilon > 0.0, "epsilon > 0")?;
    let delta = raw.f64("model.delta")?;
    raw.require("model.delta", delta > 0.0, "delta > 0")?;
    let final_time = raw.f64("model.final_time")?;
    raw.require("model.final_time", final_time > 0.0, "T > 0")?;
    let steps = raw.usize("model.steps")?;
    raw.require("model.steps", steps >= 1, "N >= 1")?;
    let delay_k = raw.usize("model.delay_k")?;
    raw.require("model.delay_k", delay_k >= 1 && delay_k <= steps, "1 <= k <= N")?;
    let alpha = raw.profile("model.alpha")?;
    let alpha_min = mesh
        .sample_boundary(|x, y| alpha.eval(&mesh, x, y))
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    raw.require("model.alpha", alpha_min > 0.0, "alpha > 0 on the boundary")?;

    let newton = NewtonConfig {
        tol: raw.f64("newton.tol")?,
        max_iter: raw.usize("newton.max_iter")?,
        damping_min: raw.f64("newton.damping_min")?,
    };
    raw.require("newton.tol", newton.tol > 0.0, "tol > 0")?;
    raw.require("newton.max_iter", newton.max_iter >= 1, "max_iter >= 1")?;
    raw.require(
        "newton.damping_min",
        newton.damping_min > 0.0 && newton.damping_min <= 1.0,
        "0 < damping_min <= 1",
    )?;

    let c = raw.f64("potential.c")?;
    raw.require("potential.c", c > 0.0, "c > 0")?;
    let c2 = raw.f64("potential.c2")?;
    let mut poly = raw.list("potential.poly")?;
    if poly.is_empty() {
        poly = vec![0.0, c2, -c2];
    }
    raw.require("potential.poly", poly.len() <= 5, "polynomial degree <= 4")?;
    let barrier_guard = raw.f64("potential.barrier_guard")?;
    raw.require(
        "potential.barrier_guard",
        barrier_guard > 0.0 && barrier_guard < 0.5,
        "0 < barrier_guard < 0.5",
    )?;

    let rho0 = raw.profile("initial.rho0")?;
    let rho_vals = mesh.sample(|x, y| rho0.eval(&mesh, x, y));
    raw.require(
        "initial.rho0",
        rho_vals
            .iter()
            .all(|r| *r >= barrier_guard && *r <= 1.0 - barrier_guard),
        "0 < rho0 < 1 at every node",
    )?;
    let mu0 = raw.profile("initial.mu0")?;
    raw.require(
        "initial.mu0",
        mesh.sample(|x, y| mu0.eval(&mesh, x, y)).iter().all(|m| *m >= 0.0),
        "mu0 >= 0 at every node",
    )?;

    let control = ControlSpec {
        profile: raw.profile("control.u")?,
        time_amp: raw.f64("control.u_time_amp")?,
        time_freq: raw.f64("control.u_time_freq")?,
        file: Some(raw.get("control.file").0)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from),
    };

    let beta1 = raw.f64("cost.beta1")?;
    raw.require("cost.beta1", beta1 >= 0.0, "beta1 >= 0")?;
    let beta2 = raw.f64("cost.beta2")?;
    raw.require("cost.beta2", beta2 >= 0.0, "beta2 >= 0")?;
    let rho_target = raw.profile("cost.rho_target")?;
    let mu_target = raw.profile("cost.mu_target")?;

    let u1 = raw.f64("admissible.u1")?;
    raw.require("admissible.u1", u1 > 0.0, "U1 > 0")?;
    let u2 = raw.f64("admissible.u2")?;
    raw.require("admissible.u2", u2 >= u1, "U1 <= U2")?;
    let rate_bound = raw.f64("admissible.rate_bound")?;
    raw.require("admissible.rate_bound", rate_bound > 0.0, "R > 0")?;

    let optimizer = OptimizerConfig {
        initial_step: raw.f64("optimizer.initial_step")?,
        armijo: raw.f64("optimizer.armijo")?,
        shrink: raw.f64("optimizer.shrink")?,
        max_iter: raw.usize("optimizer.max_iter")?,
        vi_tol: raw.f64("optimizer.vi_tol")?,
        max_sweeps: raw.usize("optimizer.max_sweeps")?,
        min_step: raw.f64("optimizer.min_step")?,
    };
    raw.require(
        "optimizer.initial_step",
        optimizer.initial_step > 0.0,
        "initial_step > 0",
    )?;
    raw.require(
        "optimizer.armijo",
        optimizer.armijo > 0.0 && optimizer.armijo < 1.0,
        "0 < armijo < 1",
    )?;
    raw.require(
        "optimizer.shrink",
        optimizer.shrink > 0.0 && optimizer.shrink < 1.0,
        "0 < shrink < 1",
    )?;
    raw.require("optimizer.max_iter", optimizer.max_iter >= 1, "max_iter >= 1")?;
    raw.require("optimizer.vi_tol", optimizer.vi_tol > 0.0, "vi_tol > 0")?;
    raw.require("optimizer.max_sweeps", optimizer.max_sweeps >= 1, "max_sweeps >= 1")?;
    raw.require(
        "optimizer.min_step",
        optimizer.min_step > 0.0 && optimizer.min_step <= optimizer.initial_step,
        "0 < min_step <= initial_step",
    )?;

    let taylor_pairs = raw.usize("taylor.pairs")?;
    raw.require("taylor.pairs", taylor_pairs >= 1, "pairs >= 1")?;
    let taylor_eps0 = raw.f64("taylor.eps0")?;
    raw.require("taylor.eps0", taylor_eps0 > 0.0, "eps0 > 0")?;
    let taylor_halvings = raw.usize("taylor.halvings")?;
    raw.require("taylor.halvings", taylor_halvings >= 1, "halvings >= 1")?;
    let gradient_directions = raw.usize("gradient.directions")?;
    raw.require("gradient.directions", gradient_directions >= 1, "directions >= 1")?;
    let gradient_fd_steps = raw.list("gradient.fd_steps")?;
    raw.require(
        "gradient.fd_steps",
        !gradient_fd_steps.is_empty() && gradient_fd_steps.iter().all(|s| *s > 0.0),
        "a nonempty list of positive steps",
    )?;
    let stability_magnitudes = raw.list("stability.magnitudes")?;
    raw.require(
        "stability.magnitudes",
        !stability_magnitudes.is_empty() && stability_magnitudes.iter().all(|s| *s > 0.0),
        "a nonempty list of positive magnitudes",
    )?;
    let k_raw = raw.list("delay.k_list")?;
    raw.require(
        "delay.k_list",
        !k_raw.is_empty() && k_raw.iter().all(|k| k.fract() == 0.0 && *k >= 1.0),
        "integers with k >= 1",
    )?;
    let output_dir = PathBuf::from(raw.get("output.dir").0);

    Ok(RunConfig {
        dimension,
        extents,
        nodes,
        epsilon,
        delta,
        final_time,
        steps,
        delay_k,
        alpha,
        newton,
        c,
        poly,
        barrier_guard,
        rho0,
        mu0,
        control,
        beta1,
        beta2,
        rho_target,
        mu_target,
        u1,
        u2,
        rate_bound,
        optimizer,
        taylor_pairs,
        taylor_eps0,
        taylor_halvings,
        gradient_directions,
        gradient_fd_steps,
        stability_magnitudes,
        delay_k_list: k_raw.iter().map(|k| *k as usize).collect(),
        output_dir,
        mesh,
    })
}

impl RunConfig {
    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn params(&self) -> ModelParams {
        let mesh = self.mesh.clone();
        let alpha = mesh.sample_boundary(|x, y| self.alpha.eval(&mesh, x, y));
        let mut p = ModelParams::new(mesh, self.epsilon, self.delta, alpha, self.final_time, self.steps);
        p.delay_k = self.delay_k;
        p.newton = self.newton;
        p
    }

    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec::with_polynomial(self.c, self.poly.clone(), self.barrier_guard)
            .expect("potential validated at parse time")
    }

    pub fn initial(&self) -> InitialData {
        let m = &self.mesh;
        InitialData {
            rho0: m.sample(|x, y| self.rho0.eval(m, x, y)),
            mu0: m.sample(|x, y| self.mu0.eval(m, x, y)),
        }
    }

    /// Control from the profile: `u(x,t) = profile(x) + amp · sin(2π · freq · t)`.
    pub fn profile_control(&self) -> Trajectory {
        let m = &self.mesh;
        let base = m.sample_boundary(|x, y| self.control.profile.eval(m, x, y));
        let dt = self.final_time / self.steps as f64;
        Trajectory::new(
            (0..=self.steps)
                .map(|n| {
                    let s = self.control.time_amp
                        * (2.0 * std::f64::consts::PI * self.control.time_freq * n as f64 * dt).sin();
                    base.iter().map(|b| b + s).collect()
                })
                .collect(),
        )
    }

    pub fn cost(&self) -> CostSpec {
        let m = &self.mesh;
        let mu_t = m.sample(|x, y| self.mu_target.eval(m, x, y));
        CostSpec {
            beta1: self.beta1,
            beta2: self.beta2,
            rho_target: m.sample(|x, y| self.rho_target.eval(m, x, y)),
            mu_target: Trajectory::constant(self.steps + 1, &mu_t),
        }
    }

    pub fn admissible(&self) -> AdmissibleSet {
        AdmissibleSet::uniform(&self.params(), self.u1, self.u2, self.rate_bound)
            .expect("admissible set validated at parse time")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let cfg = parse_config("# nothing\n\n").unwrap();
        assert_eq!(cfg.nodes, vec![33]);
        assert_eq!(cfg.steps, 40);
        assert_eq!(cfg.poly, vec![0.0, 3.0, -3.0]);
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
        assert_eq!(cfg.newton, NewtonConfig::default());
        assert_eq!(cfg.delay_k_list, vec![1, 2, 4]);
        assert!(cfg.control.file.is_none());
        assert_eq!(cfg.params().alpha, vec![1.0, 1.0]);
    }

    #[test]
    fn negative_epsilon_cites_constraint() {
        let err = parse_config("model.epsilon = -1\n").unwrap_err();
        match &err {
            ConfigError::Validation {
                key,
                origin,
                constraint,
            } => {
                assert_eq!(key, "model.epsilon");
                assert_eq!(*origin, Origin::Line(1));
                assert!(constraint.contains("epsilon > 0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_config("mesh.nodes = 9\nmodel.epsilonn = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Parse {
                origin: Origin::Line(2),
                message: "unknown key 'model.epsilonn'".into()
            }
        );
    }

    #[test]
    fn overrides_and_profiles() {
        let text = "mesh.dimension = 2\nmesh.extents = 1, 2\nmesh.nodes = 5, 9 # comment\ninitial.rho0 = bump(0.5, 0.2, 0.3)\n";
        let cfg = parse_config_with_overrides(text, &["model.steps=8".into(), "control.u=ramp(1, 2)".into()]).unwrap();
        assert_eq!(cfg.steps, 8);
        assert_eq!(cfg.mesh().node_count(), 45);
        let rho = cfg.initial().rho0;
        assert!((rho.iter().copied().fold(0.0, f64::max) - 0.7).abs() < 1e-12);
        assert_eq!(cfg.control.profile, Profile::Ramp(1.0, 2.0));
        let err = parse_config_with_overrides("", &["model.delay_k=0".into()]).unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Validation {
                origin: Origin::Override(1),
                ..
            }
        ));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse_config("just words"),
            Err(ConfigError::Parse {
                origin: Origin::Line(1),
                ..
            })
        ));
        assert!(matches!(
            parse_config("model.steps = 2.5"),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            parse_config("control.u = wave(1)"),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            parse_config("model.steps = 4\nmodel.steps = 5"),
            Err(ConfigError::Parse {
                origin: Origin::Line(2),
                ..
            })
        ));
        assert!(matches!(
            parse_config("initial.rho0 = constant(1.2)"),
            Err(ConfigError::Validation { .. })
        ));
        assert!(matches!(
            parse_config("admissible.u2 = 0.1"),
            Err(ConfigError::Validation { .. })
        ));
    }
}
