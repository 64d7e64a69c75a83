//! Constraint sets `Σ = {x | h(x) = 0, g(x) ≤ 0}` and the local frame
//! (stacked active constraints, Jacobian, Gram matrix, tangent projector)
//! assembled at a point.

use std::sync::Arc;

use crate::field::{Field, ScalarField};
use crate::linalg::{gram, projector_with, Matrix, SymPinv};
use crate::{Error, Result};

#[derive(Clone)]
pub struct ConstraintSet {
    pub equalities: Vec<Field>,
    pub inequalities: Vec<Field>,
    /// Boundary repulsion: active inequalities land at `g = −ε`.
    pub epsilon: f64,
}

impl std::fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSet")
            .field("equalities", &self.equalities.len())
            .field("inequalities", &self.inequalities.len())
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl ConstraintSet {
    pub fn new(equalities: Vec<Field>, inequalities: Vec<Field>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "boundary repulsion must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            equalities,
            inequalities,
            epsilon,
        })
    }

    /// Unconstrained set.
    pub fn empty() -> Self {
        Self {
            equalities: Vec::new(),
            inequalities: Vec::new(),
            epsilon: 1.0,
        }
    }

    pub fn with_equality(mut self, f: impl ScalarField + 'static) -> Self {
        self.equalities.push(Arc::new(f));
        self
    }

    pub fn with_inequality(mut self, f: impl ScalarField + 'static) -> Self {
        self.inequalities.push(Arc::new(f));
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "boundary repulsion must be positive, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn eval_equalities(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.equalities, x, "equality")
    }

    pub fn eval_inequalities(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.inequalities, x, "inequality")
    }

    /// Indices `i` with `g_i(x) ≥ 0`; the boundary counts as active.
    pub fn active_set(&self, x: &[f64]) -> Result<Vec<usize>> {
        Ok(active_from_values(&self.eval_inequalities(x)?))
    }

    /// Frame at `x` using this set's `epsilon`.
    pub fn frame(&self, x: &[f64], rel_tol: f64) -> Result<ActiveFrame> {
        assemble_frame(self, x, self.epsilon, rel_tol)
    }

    /// Per-point violation `(mean_i |h_i(x)|, max_j g_j(x)⁺)`.
    pub fn violation(&self, x: &[f64]) -> Result<Violation> {
        let h = self.eval_equalities(x)?;
        let g = self.eval_inequalities(x)?;
        Ok(Violation::from_values(&h, &g))
    }
}

fn eval_all(fields: &[Field], x: &[f64], kind: &str) -> Result<Vec<f64>> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "coordinate {i} of the evaluation point"
        )));
    }
    fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let v = f.eval(x)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!(
                    "{kind} constraint {i} evaluated to {v}"
                )))
            }
        })
        .collect()
}

fn active_from_values(g: &[f64]) -> Vec<usize> {
    g.iter()
        .enumerate()
        .filter(|(_, &v)| v >= 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Constraint violation at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violation {
    pub mean_abs_h: f64,
    pub max_g_plus: f64,
}

impl Violation {
    pub fn from_values(h: &[f64], g: &[f64]) -> Self {
        let mean_abs_h = if h.is_empty() {
            0.0
        } else {
            h.iter().map(|v| v.abs()).sum::<f64>() / h.len() as f64
        };
        let max_g_plus = g.iter().fold(0.0_f64, |m, &v| m.max(v));
        Self {
            mean_abs_h,
            max_g_plus,
        }
    }
}

/// Mean over samples of the per-point violation.
pub fn violation_summary(cs: &ConstraintSet, xs: &[Vec<f64>]) -> Result<Violation> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument(
            "violation summary of no samples".into(),
        ));
    }
    let mut acc = Violation::default();
    for x in xs {
        let v = cs.violation(x)?;
        acc.mean_abs_h += v.mean_abs_h;
        acc.max_g_plus += v.max_g_plus;
    }
    let n = xs.len() as f64;
    Ok(Violation {
        mean_abs_h: acc.mean_abs_h / n,
        max_g_plus: acc.max_g_plus / n,
    })
}

/// Constraint geometry at one point.
///
/// Rows are ordered equalities first, then active inequalities by ascending
/// index; active inequalities enter `jvec` shifted by `+ε`.
#[derive(Debug, Clone)]
pub struct ActiveFrame {
    pub active: Vec<usize>,
    pub jvec: Vec<f64>,
    pub jac: Matrix,
    pub gram: Matrix,
    pub pinv: SymPinv,
    pub proj: Matrix,
}

impl ActiveFrame {
    /// Number of stacked constraints.
    pub fn len(&self) -> usize {
        self.jvec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jvec.is_empty()
    }

    /// The field behind stacked row `r`.
    pub fn field<'a>(&self, cs: &'a ConstraintSet, r: usize) -> &'a Field {
        let m = cs.equalities.len();
        if r < m {
            &cs.equalities[r]
        } else {
            &cs.inequalities[self.active[r - m]]
        }
    }

    /// `∇Jᵀ G⁺ b`: maps a constraint-space vector to a normal direction.
    pub fn normal_lift(&self, b: &[f64]) -> Vec<f64> {
        if self.is_empty() {
            return vec![0.0; self.jac.cols()];
        }
        self.jac.tr_mul_vec(&self.pinv.apply(b))
    }
}

/// Assembles the frame at `x` with repulsion offset `epsilon`.
pub fn assemble_frame(
    cs: &ConstraintSet,
    x: &[f64],
    epsilon: f64,
    rel_tol: f64,
) -> Result<ActiveFrame> {
    let d = x.len();
    let h = cs.eval_equalities(x)?;
    let g = cs.eval_inequalities(x)?;
    let active = active_from_values(&g);
    let mut jvec = h;
    jvec.extend(active.iter().map(|&i| g[i] + epsilon));

    let mut rows = Vec::with_capacity(jvec.len());
    let stacked = cs
        .equalities
        .iter()
        .enumerate()
        .map(|(i, f)| (f, "equality", i))
        .chain(
            active
                .iter()
                .map(|&i| (&cs.inequalities[i], "inequality", i)),
        );
    for (f, kind, i) in stacked {
        let grad = f.grad(x)?;
        if grad.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: grad.len(),
            });
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of {kind} constraint {i}"
            )));
        }
        rows.push(grad);
    }
    let jac = Matrix::from_rows(d, &rows);
    let gram = gram(&jac);
    let pinv = SymPinv::new(&gram, rel_tol)?;
    let proj = projector_with(&jac, &pinv);
    Ok(ActiveFrame {
        active,
        jvec,
        jac,
        gram,
        pinv,
        proj,
    })
}
