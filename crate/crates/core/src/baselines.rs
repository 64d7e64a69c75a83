//! Projection-based comparison samplers.
//!
//! * CLangevin: Euler–Maruyama on the slack-extended space `y = (x, s)`,
//!   followed by a Newton projection onto `J_aug(y) = 0`.
//! * CHMC: underdamped Langevin on the slack-extended space with midpoint
//!   Ornstein–Uhlenbeck quarter-steps around a RATTLE Verlet step.
//! * CGHMC: the same integrator on `x` with equalities only, a
//!   Metropolis–Hastings correction and a hard feasibility gate on `g`.
//!
//! Each inequality `g_j ≤ 0` becomes `g_j(x) + s_j²/2 = 0` in the slack
//! formulation. Newton corrections move along base-point normals and
//! re-linearize at the current iterate.

use crate::constraints::ConstraintSet;
use crate::field::ScalarField;
use crate::linalg::{axpy, dot, max_abs, projector, solve_dense, Matrix, DEFAULT_PINV_TOL};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Newton projection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Target on `‖J‖∞`.
    pub tol: f64,
    /// `λ` in `(Jac·base_jacᵀ + λI)`.
    pub tikhonov: f64,
}

impl NewtonConfig {
    pub fn new(max_iters: usize, tol: f64, tikhonov: f64) -> Self {
        Self {
            max_iters,
            tol,
            tikhonov,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.tikhonov >= 0.0 && self.tikhonov.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tikhonov must be non-negative, got {}",
                self.tikhonov
            )));
        }
        Ok(())
    }
}

/// A successful Newton projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub y: Vec<f64>,
    /// Accumulated multipliers: `y = y_prop + base_jacᵀ · multipliers`.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

/// Why a projection gave up. Not an error: samplers count and reject.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionFailure {
    NoConvergence { residual: f64 },
    Singular,
    Oracle(Error),
}

/// Constraint values and Jacobian at a point.
pub type ConstraintEval = (Vec<f64>, Matrix);

/// `s_j = √max(−2 g_j(x0), 0)`.
pub fn init_slack(cs: &ConstraintSet, x0: &[f64]) -> Result<Vec<f64>> {
    Ok(cs
        .eval_inequalities(x0)?
        .into_iter()
        .map(|g| (-2.0 * g).max(0.0).sqrt())
        .collect())
}

fn jacobian(fields: &[crate::field::Field], x: &[f64], cols: usize) -> Result<Matrix> {
    let mut jac = Matrix::zeros(fields.len(), cols);
    for (r, f) in fields.iter().enumerate() {
        let g = f.grad(x)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("constraint gradient row {r}")));
        }
        jac.row_mut(r)[..x.len()].copy_from_slice(&g);
    }
    Ok(jac)
}

/// `(h(x), ∇h(x))`
pub fn equality_constraints(cs: &ConstraintSet, x: &[f64]) -> Result<ConstraintEval> {
    let h = cs.eval_equalities(x)?;
    let jac = jacobian(&cs.equalities, x, x.len())?;
    Ok((h, jac))
}

/// `J_aug(y) = [h(x); g(x) + s²/2]` and its Jacobian for `y = (x, s)`.
pub fn augmented_constraints(cs: &ConstraintSet, y: &[f64]) -> Result<ConstraintEval> {
    let l = cs.num_inequalities();
    let m = cs.num_equalities();
    if y.len() < l {
        return Err(Error::Dimension {
            expected: l,
            got: y.len(),
        });
    }
    let d = y.len() - l;
    let (x, s) = y.split_at(d);
    let mut vals = cs.eval_equalities(x)?;
    vals.extend(
        cs.eval_inequalities(x)?
            .iter()
            .zip(s)
            .map(|(g, sj)| g + 0.5 * sj * sj),
    );
    let mut jac = Matrix::zeros(m + l, d + l);
    let eq = jacobian(&cs.equalities, x, d + l)?;
    let ineq = jacobian(&cs.inequalities, x, d + l)?;
    for r in 0..m {
        jac.row_mut(r).copy_from_slice(eq.row(r));
    }
    for j in 0..l {
        jac.row_mut(m + j).copy_from_slice(ineq.row(j));
        jac[(m + j, d + j)] = s[j];
    }
    Ok((vals, jac))
}

/// Newton projection of `y_prop` onto `{J = 0}` along the rows of
/// `base_jac`: `y ← y + base_jacᵀ δ` with
/// `(Jac(y)·base_jacᵀ + λI) δ = −J(y)`, until `‖J‖∞ ≤ τ`.
pub fn newton_project<F>(
    y_prop: &[f64],
    base_jac: &Matrix,
    constraints: F,
    ncfg: &NewtonConfig,
) -> Result<Projection, ProjectionFailure>
where
    F: Fn(&[f64]) -> Result<ConstraintEval>,
{
    let k = base_jac.rows();
    let mut y = y_prop.to_vec();
    let mut mult = vec![0.0; k];
    let mut iterations = 0;
    loop {
        let (j, jac) = constraints(&y).map_err(ProjectionFailure::Oracle)?;
        let residual = max_abs(&j);
        if !residual.is_finite() {
            return Err(ProjectionFailure::NoConvergence { residual });
        }
        if residual <= ncfg.tol {
            return Ok(Projection {
                y,
                multipliers: mult,
                iterations,
            });
        }
        if iterations == ncfg.max_iters {
            return Err(ProjectionFailure::NoConvergence { residual });
        }
        let mut a = jac.matmul(&base_jac.transpose());
        for i in 0..k {
            a[(i, i)] += ncfg.tikhonov;
        }
        let rhs: Vec<f64> = j.iter().map(|v| -v).collect();
        let delta = solve_dense(&a, &rhs).ok_or(ProjectionFailure::Singular)?;
        axpy(1.0, &base_jac.tr_mul_vec(&delta), &mut y);
        axpy(1.0, &delta, &mut mult);
        iterations += 1;
    }
}

/// `p − jacᵀ G⁺ jac p`
pub fn project_momentum(p: &[f64], jac: &Matrix, pinv_tol: f64) -> Result<Vec<f64>> {
    if jac.rows() == 0 {
        return Ok(p.to_vec());
    }
    Ok(projector(jac, pinv_tol)?.mul_vec(p))
}

/// CLangevin chain state.
#[derive(Debug, Clone)]
pub struct SlackState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub rng: RngStream,
    pub failures: usize,
}

impl SlackState {
    pub fn new(cs: &ConstraintSet, x0: Vec<f64>, rng: RngStream) -> Result<Self> {
        let s = init_slack(cs, &x0)?;
        Ok(Self {
            x: x0,
            s,
            rng,
            failures: 0,
        })
    }

    pub fn extended(&self) -> Vec<f64> {
        let mut y = self.x.clone();
        y.extend_from_slice(&self.s);
        y
    }

    fn set_extended(&mut self, y: &[f64]) {
        let d = self.x.len();
        self.x.copy_from_slice(&y[..d]);
        self.s.copy_from_slice(&y[d..]);
    }
}

fn extended_grad(potential: &dyn ScalarField, y: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut g = potential.grad(&y[..d])?;
    g.resize(y.len(), 0.0);
    Ok(g)
}

/// One CLangevin move with a caller-supplied Brownian increment on the
/// extended space. Returns whether the move was accepted; a failed
/// projection leaves the state unchanged and bumps `failures`.
pub fn clangevin_move(
    state: &mut SlackState,
    potential: &dyn ScalarField,
    cs: &ConstraintSet,
    dt: f64,
    ncfg: &NewtonConfig,
    xi: &[f64],
) -> Result<bool> {
    let d = state.x.len();
    let y = state.extended();
    let (_, base_jac) = augmented_constraints(cs, &y)?;
    let grad = extended_grad(potential, &y, d)?;
    let scale = (2.0 * dt).sqrt();
    let prop: Vec<f64> = y
        .iter()
        .zip(&grad)
        .zip(xi)
        .map(|((yi, gi), ni)| yi - gi * dt + scale * ni)
        .collect();
    match newton_project(&prop, &base_jac, |z| augmented_constraints(cs, z), ncfg) {
        Ok(p) if p.y.iter().all(|v| v.is_finite()) => {
            state.set_extended(&p.y);
            Ok(true)
        }
        _ => {
            state.failures += 1;
            Ok(false)
        }
    }
}

/// One CLangevin step drawing its noise from the chain stream.
pub fn clangevin_step(
    state: &mut SlackState,
    potential: &dyn ScalarField,
    cs: &ConstraintSet,
    dt: f64,
    ncfg: &NewtonConfig,
) -> Result<bool> {
    let xi = state.rng.normal_vector(state.x.len() + state.s.len());
    clangevin_move(state, potential, cs, dt, ncfg, &xi)
}

/// Position and momentum of a CHMC or CGHMC chain. For CHMC `y = (x, s)`;
/// for CGHMC `y = x`.
#[derive(Debug, Clone)]
pub struct HmcState {
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub rng: RngStream,
    pub accept_count: usize,
    pub reject_count: usize,
    pub failure_count: usize,
    /// `H(proposal) − H(current)` of the latest CGHMC proposal, when one
    /// was formed.
    pub last_delta_h: Option<f64>,
}

impl HmcState {
    /// Tangent momentum `p ~ N(0, I)` projected at `y` onto the null space
    /// of `jac`.
    pub fn new(y: Vec<f64>, jac: &Matrix, mut rng: RngStream) -> Result<Self> {
        let p = project_momentum(&rng.normal_vector(y.len()), jac, DEFAULT_PINV_TOL)?;
        Ok(Self {
            y,
            p,
            rng,
            accept_count: 0,
            reject_count: 0,
            failure_count: 0,
            last_delta_h: None,
        })
    }

    /// CHMC start: slack-extended position from a feasible `x0`.
    pub fn chmc(cs: &ConstraintSet, x0: &[f64], rng: RngStream) -> Result<Self> {
        let mut y = x0.to_vec();
        y.extend(init_slack(cs, x0)?);
        let (_, jac) = augmented_constraints(cs, &y)?;
        Self::new(y, &jac, rng)
    }

    /// CGHMC start on `x0`.
    pub fn cghmc(cs: &ConstraintSet, x0: &[f64], rng: RngStream) -> Result<Self> {
        let (_, jac) = equality_constraints(cs, x0)?;
        Self::new(x0.to_vec(), &jac, rng)
    }
}

/// Midpoint OU quarter-step `(p(1 − γΔt/4) + √(γΔt) ξ) / (1 + γΔt/4)`,
/// projected onto the tangent space of `jac`.
fn ou_quarter(p: &[f64], xi: &[f64], dt: f64, gamma: f64, jac: &Matrix) -> Result<Vec<f64>> {
    let a = gamma * dt / 4.0;
    let b = (gamma * dt).sqrt();
    let raw: Vec<f64> = p
        .iter()
        .zip(xi)
        .map(|(pi, ni)| (pi * (1.0 - a) + b * ni) / (1.0 + a))
        .collect();
    project_momentum(&raw, jac, DEFAULT_PINV_TOL)
}

struct Verlet {
    y: Vec<f64>,
    p: Vec<f64>,
    jac: Matrix,
}

/// RATTLE Verlet step from `(y, p)` with base Jacobian `jac`.
fn rattle<F>(
    y: &[f64],
    p: &[f64],
    jac: &Matrix,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    constraints: F,
    dt: f64,
    ncfg: &NewtonConfig,
) -> Result<Verlet, ProjectionFailure>
where
    F: Fn(&[f64]) -> Result<ConstraintEval>,
{
    let g0 = grad(y).map_err(ProjectionFailure::Oracle)?;
    let mut p_half = p.to_vec();
    axpy(-0.5 * dt, &g0, &mut p_half);
    let mut prop = y.to_vec();
    axpy(dt, &p_half, &mut prop);
    let proj = newton_project(&prop, jac, &constraints, ncfg)?;
    axpy(1.0 / dt, &jac.tr_mul_vec(&proj.multipliers), &mut p_half);
    let y1 = proj.y;
    let g1 = grad(&y1).map_err(ProjectionFailure::Oracle)?;
    axpy(-0.5 * dt, &g1, &mut p_half);
    let (_, jac1) = constraints(&y1).map_err(ProjectionFailure::Oracle)?;
    let p1 =
        project_momentum(&p_half, &jac1, DEFAULT_PINV_TOL).map_err(ProjectionFailure::Oracle)?;
    if y1.iter().chain(&p1).any(|v| !v.is_finite()) {
        return Err(ProjectionFailure::NoConvergence {
            residual: f64::INFINITY,
        });
    }
    Ok(Verlet {
        y: y1,
        p: p1,
        jac: jac1,
    })
}

/// One CHMC step on the slack-extended space. A projection failure rejects
/// the whole step (position and momentum unchanged) and is counted.
pub fn chmc_step(
    state: &mut HmcState,
    potential: &dyn ScalarField,
    cs: &ConstraintSet,
    dt: f64,
    gamma: f64,
    ncfg: &NewtonConfig,
) -> Result<bool> {
    let n = state.y.len();
    let d = n - cs.num_inequalities();
    let cons = |z: &[f64]| augmented_constraints(cs, z);
    let (_, jac0) = cons(&state.y)?;
    let xi1 = state.rng.normal_vector(n);
    let xi2 = state.rng.normal_vector(n);
    let p_q = ou_quarter(&state.p, &xi1, dt, gamma, &jac0)?;
    let grad = |z: &[f64]| extended_grad(potential, z, d);
    match rattle(&state.y, &p_q, &jac0, &grad, cons, dt, ncfg) {
        Ok(v) => {
            state.p = ou_quarter(&v.p, &xi2, dt, gamma, &v.jac)?;
            state.y = v.y;
            state.accept_count += 1;
            Ok(true)
        }
        Err(_) => {
            state.failure_count += 1;
            state.reject_count += 1;
            Ok(false)
        }
    }
}

/// `f(x) + ‖p‖²/2`
pub fn hamiltonian(potential: &dyn ScalarField, x: &[f64], p: &[f64]) -> Result<f64> {
    Ok(potential.eval(x)? + 0.5 * dot(p, p))
}

/// One CGHMC step: OU quarter-step, one RATTLE proposal accepted with
/// probability `min(1, e^{−ΔH})` provided `g(x̃) ≤ 0`, momentum flip on
/// rejection, closing OU quarter-step.
pub fn cghmc_step(
    state: &mut HmcState,
    potential: &dyn ScalarField,
    cs: &ConstraintSet,
    dt: f64,
    gamma: f64,
    ncfg: &NewtonConfig,
) -> Result<bool> {
    let n = state.y.len();
    let cons = |z: &[f64]| equality_constraints(cs, z);
    let (_, jac0) = cons(&state.y)?;
    let xi1 = state.rng.normal_vector(n);
    let xi2 = state.rng.normal_vector(n);
    let u = state.rng.uniform();
    let p_q = ou_quarter(&state.p, &xi1, dt, gamma, &jac0)?;
    let grad = |z: &[f64]| potential.grad(z);
    let h0 = hamiltonian(potential, &state.y, &p_q)?;

    let mut accepted = false;
    state.last_delta_h = None;
    match rattle(&state.y, &p_q, &jac0, &grad, cons, dt, ncfg) {
        Ok(v) => {
            let feasible = cs.eval_inequalities(&v.y)?.iter().all(|&g| g <= 0.0);
            let dh = hamiltonian(potential, &v.y, &v.p)? - h0;
            state.last_delta_h = Some(dh);
            if feasible && u < (-dh).exp().min(1.0) {
                state.p = ou_quarter(&v.p, &xi2, dt, gamma, &v.jac)?;
                state.y = v.y;
                accepted = true;
            }
        }
        Err(_) => state.failure_count += 1,
    }
    if accepted {
        state.accept_count += 1;
    } else {
        state.reject_count += 1;
        let flipped: Vec<f64> = p_q.iter().map(|v| -v).collect();
        state.p = ou_quarter(&flipped, &xi2, dt, gamma, &jac0)?;
    }
    Ok(accepted)
}
