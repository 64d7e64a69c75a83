//! Overdamped Langevin with landing (OLLA) and its Hutchinson variant
//! (OLLA-H).
//!
//! One Euler–Maruyama step from `x` reads
//!
//! ```text
//! x' = x + q(x)·Δt + √(2Δt)·Π(x)·ξ,
//! q  = −Π∇f − α·∇Jᵀ G⁺ J + ℋ,
//! ℋ  = −∇Jᵀ G⁺ t,   t_r = tr(∇²c_r · Π)
//! ```
//!
//! where `J` stacks the equalities and the active inequalities shifted by
//! `+ε`. The landing term makes every stacked constraint decay like
//! `(1 − αΔt)ᵏ` for affine constraints; the projected noise never moves
//! along constraint normals.

use crate::constraints::{assemble_frame, ActiveFrame, ConstraintSet};
use crate::field::ScalarField;
use crate::linalg::{axpy, dot, DEFAULT_PINV_TOL};
use crate::problems::Problem;
use crate::rng::RngStream;
use crate::sampler::{self, ChainRun, SamplerConfig, Schedule};
use crate::{Error, Result};

/// How the mean-curvature traces are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMode {
    /// Exact traces from `d` HVPs per stacked constraint (OLLA).
    FullTrace,
    /// Hutchinson estimate from a shared probe batch (OLLA-H).
    Hutchinson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OllaConfig {
    /// Landing rate, 1/time.
    pub alpha: f64,
    /// Boundary repulsion offset.
    pub epsilon: f64,
    pub dt: f64,
    /// Hutchinson probe count; ignored in [`CurvatureMode::FullTrace`].
    pub probes: usize,
    pub mode: CurvatureMode,
    pub pinv_tol: f64,
}

impl OllaConfig {
    pub fn full_trace(alpha: f64, epsilon: f64, dt: f64) -> Self {
        Self {
            alpha,
            epsilon,
            dt,
            probes: 0,
            mode: CurvatureMode::FullTrace,
            pinv_tol: DEFAULT_PINV_TOL,
        }
    }

    pub fn hutchinson(alpha: f64, epsilon: f64, dt: f64, probes: usize) -> Self {
        Self {
            probes,
            mode: CurvatureMode::Hutchinson,
            ..Self::full_trace(alpha, epsilon, dt)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("alpha", self.alpha)?;
        positive("epsilon", self.epsilon)?;
        positive("dt", self.dt)?;
        if !(self.pinv_tol > 0.0 && self.pinv_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pinv_tol must lie in (0, 1), got {}",
                self.pinv_tol
            )));
        }
        Ok(())
    }

    /// `αΔt ≥ 1` overshoots the landing recursion; allowed but worth a warning.
    pub fn is_stiff(&self) -> bool {
        self.alpha * self.dt >= 1.0
    }
}

/// Position of one OLLA chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub step: usize,
    pub rng: RngStream,
    pub diverged: bool,
    /// Why the chain died, when it did.
    pub diagnostic: Option<String>,
}

impl ChainState {
    pub fn new(x: Vec<f64>, rng: RngStream) -> Self {
        Self {
            x,
            step: 0,
            rng,
            diverged: false,
            diagnostic: None,
        }
    }
}

/// Result of a single step on a live chain.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Advanced,
    /// The step produced a non-finite state or an oracle failed; the chain
    /// is now marked dead and keeps its last finite position.
    Diverged(String),
}

/// Exact traces `t_r = Σ_k (Π e_k)ᵀ (∇²c_r e_k)` for every stacked row.
pub fn trace_terms_full(cs: &ConstraintSet, frame: &ActiveFrame, x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    let mut e = vec![0.0; d];
    let mut traces = vec![0.0; frame.len()];
    for (r, t) in traces.iter_mut().enumerate() {
        let field = frame.field(cs, r);
        if field.is_affine() {
            continue;
        }
        for k in 0..d {
            e[k] = 1.0;
            let hv = field.hvp(x, &e)?;
            e[k] = 0.0;
            // Π is symmetric, so column k equals row k
            *t += dot(frame.proj.row(k), &hv);
        }
    }
    Ok(traces)
}

/// Hutchinson estimates `t_r ≈ (1/N) Σ_k (Π v_k)ᵀ (∇²c_r v_k)` with one probe
/// batch shared by all stacked rows. Draws `N·d` normals from `rng`; draws
/// nothing when `probes == 0` or the frame is empty.
pub fn trace_terms_hutch(
    cs: &ConstraintSet,
    frame: &ActiveFrame,
    x: &[f64],
    probes: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut traces = vec![0.0; frame.len()];
    if probes == 0 || frame.is_empty() {
        return Ok(traces);
    }
    let d = x.len();
    let mut v = vec![0.0; d];
    for _ in 0..probes {
        rng.fill_normal(&mut v);
        let pv = frame.proj.mul_vec(&v);
        for (r, t) in traces.iter_mut().enumerate() {
            let field = frame.field(cs, r);
            if field.is_affine() {
                continue;
            }
            *t += dot(&pv, &field.hvp(x, &v)?);
        }
    }
    let inv = 1.0 / probes as f64;
    traces.iter_mut().for_each(|t| *t *= inv);
    Ok(traces)
}

/// Mean-curvature correction `ℋ = −∇Jᵀ G⁺ t` with exact traces.
pub fn curvature_full(cs: &ConstraintSet, frame: &ActiveFrame, x: &[f64]) -> Result<Vec<f64>> {
    let t = trace_terms_full(cs, frame, x)?;
    Ok(neg(frame.normal_lift(&t)))
}

/// Mean-curvature correction with Hutchinson traces. `probes == 0` gives
/// the zero vector.
pub fn curvature_hutch(
    cs: &ConstraintSet,
    frame: &ActiveFrame,
    x: &[f64],
    probes: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let t = trace_terms_hutch(cs, frame, x, probes, rng)?;
    Ok(neg(frame.normal_lift(&t)))
}

fn neg(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|c| *c = -*c);
    v
}

/// Drift `q = −Π∇f − α∇Jᵀ G⁺ J + curv`.
pub fn drift(
    frame: &ActiveFrame,
    x: &[f64],
    potential: &dyn ScalarField,
    alpha: f64,
    curv: &[f64],
) -> Result<Vec<f64>> {
    let grad = potential.grad(x)?;
    let mut q = frame.proj.mul_vec(&grad);
    q.iter_mut().for_each(|c| *c = -*c);
    if !frame.is_empty() {
        axpy(-alpha, &frame.normal_lift(&frame.jvec), &mut q);
    }
    axpy(1.0, curv, &mut q);
    Ok(q)
}

/// Curvature according to `cfg.mode`.
pub fn curvature(
    cs: &ConstraintSet,
    frame: &ActiveFrame,
    x: &[f64],
    cfg: &OllaConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    match cfg.mode {
        CurvatureMode::FullTrace => curvature_full(cs, frame, x),
        CurvatureMode::Hutchinson => curvature_hutch(cs, frame, x, cfg.probes, rng),
    }
}

/// One Euler–Maruyama update with the Brownian increment `xi` supplied by
/// the caller. Hutchinson probes, if any, are drawn from `rng`.
pub fn olla_update(
    x: &[f64],
    cs: &ConstraintSet,
    potential: &dyn ScalarField,
    cfg: &OllaConfig,
    xi: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let frame = assemble_frame(cs, x, cfg.epsilon, cfg.pinv_tol)?;
    let curv = curvature(cs, &frame, x, cfg, rng)?;
    let q = drift(&frame, x, potential, cfg.alpha, &curv)?;
    let noise = frame.proj.mul_vec(xi);
    let scale = (2.0 * cfg.dt).sqrt();
    Ok(x.iter()
        .zip(&q)
        .zip(&noise)
        .map(|((xi, qi), ni)| xi + qi * cfg.dt + scale * ni)
        .collect())
}

/// Advances a chain by one step. Probes are drawn before the Brownian
/// increment. Stepping a diverged chain is refused with
/// [`Error::Diverged`] and leaves the state untouched.
pub fn olla_step(
    state: &mut ChainState,
    cs: &ConstraintSet,
    potential: &dyn ScalarField,
    cfg: &OllaConfig,
) -> Result<StepOutcome> {
    if state.diverged {
        return Err(Error::Diverged);
    }
    let result = {
        let frame = assemble_frame(cs, &state.x, cfg.epsilon, cfg.pinv_tol);
        frame.and_then(|frame| {
            let curv = curvature(cs, &frame, &state.x, cfg, &mut state.rng)?;
            let q = drift(&frame, &state.x, potential, cfg.alpha, &curv)?;
            let xi = state.rng.normal_vector(state.x.len());
            let noise = frame.proj.mul_vec(&xi);
            let scale = (2.0 * cfg.dt).sqrt();
            Ok(state
                .x
                .iter()
                .zip(&q)
                .zip(&noise)
                .map(|((xi, qi), ni)| xi + qi * cfg.dt + scale * ni)
                .collect::<Vec<f64>>())
        })
    };
    state.step += 1;
    let reason = match result {
        Ok(next) if next.iter().all(|v| v.is_finite()) => {
            state.x = next;
            return Ok(StepOutcome::Advanced);
        }
        Ok(_) => format!("non-finite state after step {}", state.step),
        Err(e) => format!("step {}: {e}", state.step),
    };
    state.diverged = true;
    state.diagnostic = Some(reason.clone());
    Ok(StepOutcome::Diverged(reason))
}

/// Runs one OLLA chain on `problem` from its noisy initializer.
///
/// Retains the state after update `k` (1-based) when `k > burn_in` and
/// `(k − burn_in) % thin == 0`; the retained step label is `k − 1`.
pub fn run_chain(
    problem: &Problem,
    cfg: &OllaConfig,
    steps: usize,
    burn_in: usize,
    thin: usize,
    stream: RngStream,
) -> Result<ChainRun> {
    let schedule = Schedule::new(steps, burn_in, thin)?;
    sampler::run_chain(
        problem,
        &SamplerConfig::Olla(cfg.clone()),
        &schedule,
        stream,
    )
}
