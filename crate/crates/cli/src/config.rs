//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use olla_core::baselines::NewtonConfig;
use olla_core::problems::{self, Problem};
use olla_core::sampler::{SamplerConfig, Schedule};
use olla_core::OllaConfig;
use serde_json::{json, Map, Value};

/// Problem family, which selects the default hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Planar(String),
    Stress {
        d: usize,
        m: usize,
        l: usize,
        seed: u64,
    },
    Polymer {
        atoms: usize,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        Ok(match self {
            ProblemSpec::Planar(name) => Problem::by_name(name)?,
            ProblemSpec::Stress { d, m, l, seed } => problems::stress_test(*d, *m, *l, *seed)?,
            ProblemSpec::Polymer { atoms } => problems::polymer(*atoms)?,
        })
    }

    fn name(&self) -> &str {
        match self {
            ProblemSpec::Planar(n) => n,
            ProblemSpec::Stress { .. } => "stress_test",
            ProblemSpec::Polymer { .. } => "polymer",
        }
    }

    fn to_json(&self) -> Value {
        match self {
            ProblemSpec::Planar(n) => json!({ "name": n }),
            ProblemSpec::Stress { d, m, l, seed } => {
                json!({ "name": "stress_test", "d": d, "m": m, "l": l, "seed": seed })
            }
            ProblemSpec::Polymer { atoms } => json!({ "name": "polymer", "atoms": atoms }),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    /// One of `olla`, `olla-h`, `clangevin`, `chmc`, `cghmc`.
    pub sampler_name: String,
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub schedule: Schedule,
    pub base_seed: u64,
    pub reference: Option<PathBuf>,
}

const SAMPLERS: [&str; 5] = ["olla", "olla-h", "clangevin", "chmc", "cghmc"];
const TOP_KEYS: [&str; 8] = [
    "problem",
    "sampler",
    "chains",
    "steps",
    "burn_in",
    "thin",
    "base_seed",
    "reference",
];

/// Defaults per problem family: dt, α, (L, λ for CLangevin).
struct Defaults {
    dt: f64,
    alpha: f64,
    max_iters: usize,
    clangevin_tikhonov: f64,
}

fn defaults(p: &ProblemSpec) -> Defaults {
    match p {
        ProblemSpec::Planar(n) => Defaults {
            dt: 5e-4,
            alpha: 200.0,
            max_iters: 3,
            clangevin_tikhonov: if n == "mixture_gaussian" { 1.0 } else { 0.1 },
        },
        ProblemSpec::Stress { .. } => Defaults {
            dt: 1e-2,
            alpha: 200.0,
            max_iters: 5,
            clangevin_tikhonov: 0.1,
        },
        ProblemSpec::Polymer { .. } => Defaults {
            dt: 1e-5,
            alpha: 500.0,
            max_iters: 30,
            clangevin_tikhonov: 0.5,
        },
    }
}

fn as_object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| anyhow!("`{key}` must be a JSON object"))
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], context: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            bail!("unknown or inapplicable key `{k}` in {context}");
        }
    }
    Ok(())
}

fn get_usize(obj: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| anyhow!("`{key}` must be a non-negative integer, got {v}")),
    }
}

fn get_u64(obj: &Map<String, Value>, key: &str) -> Result<Option<u64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| anyhow!("`{key}` must be a non-negative integer, got {v}")),
    }
}

fn get_f64(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| anyhow!("`{key}` must be a number, got {v}")),
    }
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required key `{key}`"))
}

fn parse_problem(v: &Value) -> Result<ProblemSpec> {
    let obj = as_object(v, "problem")?;
    let name = obj
        .get("name")
        .ok_or_else(|| anyhow!("missing required key `problem.name`"))?
        .as_str()
        .ok_or_else(|| anyhow!("`problem.name` must be a string"))?;
    Ok(match name {
        "star" | "two_lobes" | "quadratic_poly" | "mixture_gaussian" => {
            reject_unknown(obj, &["name"], "problem")?;
            ProblemSpec::Planar(name.to_string())
        }
        "stress_test" => {
            reject_unknown(obj, &["name", "d", "m", "l", "seed"], "problem")?;
            ProblemSpec::Stress {
                d: get_usize(obj, "d")?.unwrap_or(100),
                m: get_usize(obj, "m")?.unwrap_or(5),
                l: get_usize(obj, "l")?.unwrap_or(5),
                seed: get_u64(obj, "seed")?.unwrap_or(0),
            }
        }
        "polymer" => {
            reject_unknown(obj, &["name", "atoms"], "problem")?;
            ProblemSpec::Polymer {
                atoms: get_usize(obj, "atoms")?.unwrap_or(5),
            }
        }
        other => bail!("`problem.name`: unknown problem '{other}'"),
    })
}

fn parse_sampler(v: &Value, problem: &ProblemSpec) -> Result<(String, SamplerConfig)> {
    let obj = as_object(v, "sampler")?;
    let name = obj
        .get("name")
        .ok_or_else(|| anyhow!("missing required key `sampler.name`"))?
        .as_str()
        .ok_or_else(|| anyhow!("`sampler.name` must be a string"))?;
    if !SAMPLERS.contains(&name) {
        bail!("`sampler.name`: unknown sampler '{name}', expected one of {SAMPLERS:?}");
    }
    let allowed: &[&str] = match name {
        "olla" => &["name", "alpha", "epsilon", "dt"],
        "olla-h" => &["name", "alpha", "epsilon", "dt", "probes"],
        "clangevin" => &["name", "dt", "max_iters", "tol", "tikhonov"],
        _ => &["name", "dt", "gamma", "max_iters", "tol", "tikhonov"],
    };
    reject_unknown(obj, allowed, &format!("sampler '{name}'"))?;
    let d = defaults(problem);
    let dt = get_f64(obj, "dt")?.unwrap_or(d.dt);
    let alpha = get_f64(obj, "alpha")?.unwrap_or(d.alpha);
    let epsilon = get_f64(obj, "epsilon")?.unwrap_or(1.0);
    let newton = |tikhonov: f64| -> Result<NewtonConfig> {
        Ok(NewtonConfig::new(
            get_usize(obj, "max_iters")?.unwrap_or(d.max_iters),
            get_f64(obj, "tol")?.unwrap_or(1e-4),
            get_f64(obj, "tikhonov")?.unwrap_or(tikhonov),
        ))
    };
    let gamma = get_f64(obj, "gamma")?.unwrap_or(1.0);
    let cfg = match name {
        "olla" => SamplerConfig::Olla(OllaConfig::full_trace(alpha, epsilon, dt)),
        "olla-h" => SamplerConfig::Olla(OllaConfig::hutchinson(
            alpha,
            epsilon,
            dt,
            get_usize(obj, "probes")?.unwrap_or(5),
        )),
        "clangevin" => SamplerConfig::CLangevin {
            dt,
            newton: newton(d.clangevin_tikhonov)?,
        },
        "chmc" => SamplerConfig::Chmc {
            dt,
            gamma,
            newton: newton(0.0)?,
        },
        _ => SamplerConfig::Cghmc {
            dt,
            gamma,
            newton: newton(0.0)?,
        },
    };
    cfg.validate()
        .with_context(|| format!("invalid hyperparameters for sampler '{name}'"))?;
    Ok((name.to_string(), cfg))
}

impl RunConfig {
    /// Parses a JSON document. Unknown keys are errors; omitted
    /// hyperparameters take the per-problem defaults.
    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = as_object(v, "config")?;
        reject_unknown(obj, &TOP_KEYS, "config")?;
        let problem = parse_problem(
            obj.get("problem")
                .ok_or_else(|| anyhow!("missing required key `problem`"))?,
        )?;
        let (sampler_name, sampler) = parse_sampler(
            obj.get("sampler")
                .ok_or_else(|| anyhow!("missing required key `sampler`"))?,
            &problem,
        )?;
        let chains = require(get_usize(obj, "chains")?, "chains")?;
        if chains == 0 {
            bail!("`chains` must be at least 1");
        }
        let steps = require(get_usize(obj, "steps")?, "steps")?;
        let burn_in = get_usize(obj, "burn_in")?.unwrap_or(0);
        let thin = get_usize(obj, "thin")?.unwrap_or(1);
        if thin == 0 {
            bail!("`thin` must be at least 1");
        }
        if burn_in >= steps {
            bail!("`burn_in` ({burn_in}) must be smaller than `steps` ({steps})");
        }
        let schedule = Schedule::new(steps, burn_in, thin)?;
        let reference = match obj.get("reference") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => bail!("`reference` must be a path string, got {other}"),
        };
        Ok(Self {
            problem,
            sampler_name,
            sampler,
            chains,
            schedule,
            base_seed: get_u64(obj, "base_seed")?.unwrap_or(0),
            reference,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).context("malformed JSON")?;
        Self::from_value(&v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.anchor_reference(path);
        Ok(cfg)
    }

    /// Resolves a relative `reference` path against the directory of the
    /// config file it came from.
    pub fn anchor_reference(&mut self, config_path: &Path) {
        if let (Some(r), Some(dir)) = (&self.reference, config_path.parent()) {
            if r.is_relative() {
                self.reference = Some(dir.join(r));
            }
        }
    }

    pub fn problem_name(&self) -> &str {
        self.problem.name()
    }

    /// The resolved configuration, defaults included.
    pub fn to_json(&self) -> Value {
        let mut s = Map::new();
        s.insert("name".into(), json!(self.sampler_name));
        s.insert("dt".into(), json!(self.sampler.dt()));
        match &self.sampler {
            SamplerConfig::Olla(c) => {
                s.insert("alpha".into(), json!(c.alpha));
                s.insert("epsilon".into(), json!(c.epsilon));
                if self.sampler_name == "olla-h" {
                    s.insert("probes".into(), json!(c.probes));
                }
            }
            SamplerConfig::CLangevin { newton, .. } => insert_newton(&mut s, newton),
            SamplerConfig::Chmc { gamma, newton, .. }
            | SamplerConfig::Cghmc { gamma, newton, .. } => {
                s.insert("gamma".into(), json!(gamma));
                insert_newton(&mut s, newton);
            }
        }
        json!({
            "problem": self.problem.to_json(),
            "sampler": Value::Object(s),
            "chains": self.chains,
            "steps": self.schedule.steps,
            "burn_in": self.schedule.burn_in,
            "thin": self.schedule.thin,
            "base_seed": self.base_seed,
            "reference": self.reference.as_ref().map(|p| p.display().to_string()),
        })
    }
}

fn insert_newton(s: &mut Map<String, Value>, n: &NewtonConfig) {
    s.insert("max_iters".into(), json!(n.max_iters));
    s.insert("tol".into(), json!(n.tol));
    s.insert("tikhonov".into(), json!(n.tikhonov));
}

/// Sets `key` (dotted path, or a bare top-level / sampler key) in a raw
/// config document. The value text is read as JSON, falling back to a
/// string.
pub fn set_key(doc: &mut Value, key: &str, value: &str) -> Result<()> {
    let parsed: Value =
        serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let path: Vec<&str> = if key.contains('.') {
        key.split('.').collect()
    } else if TOP_KEYS.contains(&key) {
        vec![key]
    } else {
        vec!["sampler", key]
    };
    let mut cur = doc;
    for (i, part) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| anyhow!("cannot set `{key}`: parent is not an object"))?;
        if i + 1 == path.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("path has at least one component")
}
