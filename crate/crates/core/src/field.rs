//! Scalar-field oracles: value, gradient and Hessian-vector product.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{axpy, dot, norm};
use crate::{Error, Result};

/// A smooth function `ℝᵈ → ℝ` with analytic first and second order
/// information. Implementations must return an error rather than a
/// non-finite value when evaluated outside their domain.
pub trait ScalarField: Send + Sync {
    fn eval(&self, x: &[f64]) -> Result<f64>;

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `∇²φ(x) · v`
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// `true` when the Hessian is identically zero, which lets curvature
    /// estimators skip HVP calls.
    fn is_affine(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        "field".to_string()
    }
}

/// Shared handle to a field.
pub type Field = Arc<dyn ScalarField>;

impl fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.name())
    }
}

pub(crate) fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}

/// `φ ≡ 0`
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ScalarField for Zero {
    fn eval(&self, _x: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; x.len()])
    }
    fn hvp(&self, x: &[f64], _v: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; x.len()])
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// `φ(x) = aᵀx − b`
#[derive(Debug, Clone)]
pub struct Affine {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Affine {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    /// `φ(x) = scale · x_i − b` in `d` dimensions.
    pub fn coordinate(d: usize, i: usize, scale: f64, b: f64) -> Self {
        let mut a = vec![0.0; d];
        a[i] = scale;
        Self { a, b }
    }
}

impl ScalarField for Affine {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.a.len())?;
        Ok(dot(&self.a, x) - self.b)
    }
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.a.len())?;
        Ok(self.a.clone())
    }
    fn hvp(&self, x: &[f64], _v: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; x.len()])
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "affine".into()
    }
}

/// `φ(x) = sign · (‖x − c‖² − r²)`: a sphere equality with `sign = 1`, a
/// spherical obstacle `r² − ‖x − c‖² ≤ 0` with `sign = −1`.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub center: Vec<f64>,
    pub radius: f64,
    pub sign: f64,
}

impl SquaredDistance {
    pub fn sphere(center: Vec<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            sign: 1.0,
        }
    }

    pub fn obstacle(center: Vec<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            sign: -1.0,
        }
    }
}

impl ScalarField for SquaredDistance {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.center.len())?;
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c).powi(2))
            .sum();
        Ok(self.sign * (r2 - self.radius * self.radius))
    }
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.center.len())?;
        Ok(x.iter()
            .zip(&self.center)
            .map(|(a, c)| 2.0 * self.sign * (a - c))
            .collect())
    }
    fn hvp(&self, _x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.iter().map(|vi| 2.0 * self.sign * vi).collect())
    }
    fn name(&self) -> String {
        if self.sign > 0.0 {
            "sphere"
        } else {
            "obstacle"
        }
        .into()
    }
}

/// `φ(x) = ‖x‖²/2`, the standard Gaussian potential.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfSquaredNorm;

impl ScalarField for HalfSquaredNorm {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * dot(x, x))
    }
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
    fn hvp(&self, _x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }
    fn name(&self) -> String {
        "half_squared_norm".into()
    }
}

/// Central-difference gradient with per-coordinate step
/// `δᵢ = step · (1 + |xᵢ|)`.
pub fn fd_gradient(field: &dyn ScalarField, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let delta = step * (1.0 + x[i].abs());
        xp[i] = x[i] + delta;
        let fp = field.eval(&xp)?;
        xp[i] = x[i] - delta;
        let fm = field.eval(&xp)?;
        xp[i] = x[i];
        out.push((fp - fm) / (2.0 * delta));
    }
    Ok(out)
}

/// Central difference of the gradient along `v` with `δ = step / (1 + ‖v‖)`.
pub fn fd_hvp(field: &dyn ScalarField, x: &[f64], v: &[f64], step: f64) -> Result<Vec<f64>> {
    let delta = step / (1.0 + norm(v));
    let mut xp = x.to_vec();
    axpy(delta, v, &mut xp);
    let gp = field.grad(&xp)?;
    let mut xm = x.to_vec();
    axpy(-delta, v, &mut xm);
    let gm = field.grad(&xm)?;
    Ok(gp
        .iter()
        .zip(&gm)
        .map(|(a, b)| (a - b) / (2.0 * delta))
        .collect())
}
