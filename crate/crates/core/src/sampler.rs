//! A uniform chain driver over OLLA and the three baselines.

use crate::baselines::{
    augmented_constraints, cghmc_step, chmc_step, clangevin_step, HmcState, NewtonConfig,
    SlackState,
};
use crate::constraints::Violation;
use crate::olla::{olla_step, ChainState, OllaConfig, StepOutcome};
use crate::problems::Problem;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Sampler choice with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerConfig {
    Olla(OllaConfig),
    CLangevin {
        dt: f64,
        newton: NewtonConfig,
    },
    Chmc {
        dt: f64,
        gamma: f64,
        newton: NewtonConfig,
    },
    Cghmc {
        dt: f64,
        gamma: f64,
        newton: NewtonConfig,
    },
}

impl SamplerConfig {
    pub fn dt(&self) -> f64 {
        match self {
            SamplerConfig::Olla(c) => c.dt,
            SamplerConfig::CLangevin { dt, .. }
            | SamplerConfig::Chmc { dt, .. }
            | SamplerConfig::Cghmc { dt, .. } => *dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerConfig::Olla(c) => c.validate(),
            SamplerConfig::CLangevin { dt, newton } => {
                positive("dt", *dt)?;
                newton.validate()
            }
            SamplerConfig::Chmc { dt, gamma, newton }
            | SamplerConfig::Cghmc { dt, gamma, newton } => {
                positive("dt", *dt)?;
                if !(*gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "gamma must be non-negative, got {gamma}"
                    )));
                }
                newton.validate()
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Step count, burn-in and thinning of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Schedule {
    pub fn new(steps: usize, burn_in: usize, thin: usize) -> Result<Self> {
        if thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if burn_in >= steps {
            return Err(Error::InvalidArgument(format!(
                "burn_in ({burn_in}) must be smaller than steps ({steps})"
            )));
        }
        Ok(Self {
            steps,
            burn_in,
            thin,
        })
    }

    /// Whether the state after update `k` (1-based) is retained.
    pub fn retains(&self, k: usize) -> bool {
        k > self.burn_in && (k - self.burn_in).is_multiple_of(self.thin)
    }

    pub fn retained_count(&self) -> usize {
        (self.steps - self.burn_in) / self.thin
    }
}

/// A retained state; `step` is the zero-based index of the update that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Retained {
    pub step: usize,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChainStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Newton projection failures.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// 1-based update index at which the chain died.
    pub step: usize,
    pub reason: String,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub retained: Vec<Retained>,
    /// Violation after every update, including burn-in; stops at divergence.
    pub violations: Vec<Violation>,
    pub diverged: Option<Divergence>,
    pub stats: ChainStats,
}

enum Driver {
    Olla(ChainState, OllaConfig),
    Slack(SlackState, f64, NewtonConfig),
    Chmc(HmcState, f64, f64, NewtonConfig),
    Cghmc(HmcState, f64, f64, NewtonConfig),
}

impl Driver {
    fn new(problem: &Problem, sampler: &SamplerConfig, mut rng: RngStream) -> Result<Self> {
        let cs = &problem.constraints;
        let x0 = &problem.feasible_point;
        Ok(match sampler {
            SamplerConfig::Olla(c) => {
                if c.is_stiff() {
                    log::warn!("alpha·dt = {} ≥ 1: landing overshoots", c.alpha * c.dt);
                }
                let x = problem.init(&mut rng);
                Driver::Olla(ChainState::new(x, rng), c.clone())
            }
            SamplerConfig::CLangevin { dt, newton } => {
                Driver::Slack(SlackState::new(cs, x0.clone(), rng)?, *dt, *newton)
            }
            SamplerConfig::Chmc { dt, gamma, newton } => {
                Driver::Chmc(HmcState::chmc(cs, x0, rng)?, *dt, *gamma, *newton)
            }
            SamplerConfig::Cghmc { dt, gamma, newton } => {
                Driver::Cghmc(HmcState::cghmc(cs, x0, rng)?, *dt, *gamma, *newton)
            }
        })
    }

    fn x(&self, d: usize) -> &[f64] {
        match self {
            Driver::Olla(s, _) => &s.x,
            Driver::Slack(s, ..) => &s.x,
            Driver::Chmc(s, ..) | Driver::Cghmc(s, ..) => &s.y[..d],
        }
    }

    /// Advances one update; `Err` carries the divergence reason.
    fn step(
        &mut self,
        problem: &Problem,
        stats: &mut ChainStats,
    ) -> std::result::Result<(), String> {
        let f = problem.potential.as_ref();
        let cs = &problem.constraints;
        let outcome = match self {
            Driver::Olla(s, c) => match olla_step(s, cs, f, c) {
                Ok(StepOutcome::Advanced) => Ok(true),
                Ok(StepOutcome::Diverged(r)) => return Err(r),
                Err(e) => Err(e),
            },
            Driver::Slack(s, dt, n) => {
                let before = s.failures;
                let r = clangevin_step(s, f, cs, *dt, n);
                stats.failures += s.failures - before;
                r
            }
            Driver::Chmc(s, dt, g, n) => {
                let before = s.failure_count;
                let r = chmc_step(s, f, cs, *dt, *g, n);
                stats.failures += s.failure_count - before;
                r
            }
            Driver::Cghmc(s, dt, g, n) => {
                let before = s.failure_count;
                let r = cghmc_step(s, f, cs, *dt, *g, n);
                stats.failures += s.failure_count - before;
                r
            }
        };
        match outcome {
            Ok(true) => stats.accepted += 1,
            Ok(false) => stats.rejected += 1,
            Err(e) => return Err(e.to_string()),
        }
        Ok(())
    }
}

/// Runs one chain of any sampler. OLLA starts from the problem's noisy
/// initializer; the baselines start on Σ at the problem's feasible point.
pub fn run_chain(
    problem: &Problem,
    sampler: &SamplerConfig,
    schedule: &Schedule,
    stream: RngStream,
) -> Result<ChainRun> {
    sampler.validate()?;
    let d = problem.dim;
    let mut driver = Driver::new(problem, sampler, stream)?;
    let mut run = ChainRun {
        retained: Vec::with_capacity(schedule.retained_count()),
        violations: Vec::with_capacity(schedule.steps),
        diverged: None,
        stats: ChainStats::default(),
    };
    for k in 1..=schedule.steps {
        if let Err(reason) = driver.step(problem, &mut run.stats) {
            run.diverged = Some(Divergence { step: k, reason });
            break;
        }
        let x = driver.x(d);
        match problem.constraints.violation(x) {
            Ok(v) => run.violations.push(v),
            Err(e) => {
                run.diverged = Some(Divergence {
                    step: k,
                    reason: e.to_string(),
                });
                break;
            }
        }
        if schedule.retains(k) {
            run.retained.push(Retained {
                step: k - 1,
                x: x.to_vec(),
            });
        }
    }
    Ok(run)
}

/// Slack-extended constraint residual of a CHMC/CLangevin state, for
/// diagnostics.
pub fn augmented_residual(problem: &Problem, y: &[f64]) -> Result<f64> {
    let (j, _) = augmented_constraints(&problem.constraints, y)?;
    Ok(crate::linalg::max_abs(&j))
}
