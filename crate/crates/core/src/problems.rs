//! Benchmark problems: four 2D manifolds, a high-dimensional stress test
//! and a bead-chain polymer.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::baselines::{equality_constraints, newton_project, NewtonConfig};
use crate::constraints::ConstraintSet;
use crate::dual::{seed, Real};
use crate::field::{check_dim, Affine, Field, ScalarField, SquaredDistance, Zero};
use crate::linalg::{dot, gram, norm, solve_dense, Matrix};
use crate::rng::RngStream;
use crate::{Error, Result};

pub type ObservableFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named scalar test function.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    pub f: ObservableFn,
}

impl Observable {
    pub fn new(name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.name)
    }
}

/// Target density `∝ e^{−f}` restricted to a constraint set.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub potential: Field,
    pub constraints: ConstraintSet,
    /// A point of Σ used by the projection-based samplers.
    pub feasible_point: Vec<f64>,
    /// Standard deviation of the Gaussian perturbation applied by
    /// [`Problem::init`].
    pub init_noise: f64,
    pub observables: Vec<Observable>,
}

impl Problem {
    /// `feasible_point + init_noise · N(0, I)`; draws `dim` normals only
    /// when the noise is non-zero.
    pub fn init(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut x = self.feasible_point.clone();
        if self.init_noise > 0.0 {
            for (xi, n) in x.iter_mut().zip(rng.normal_vector(self.dim)) {
                *xi += self.init_noise * n;
            }
        }
        x
    }

    /// Sample means of every observable. Empty input gives NaN means.
    pub fn observe(&self, samples: &[Vec<f64>]) -> Vec<(String, f64)> {
        self.observables
            .iter()
            .map(|o| {
                let s: f64 = samples.iter().map(|x| (o.f)(x)).sum();
                (o.name.clone(), s / samples.len() as f64)
            })
            .collect()
    }

    /// Every field in the problem, labelled, for validation.
    pub fn fields(&self) -> Vec<(String, Field)> {
        let mut out = vec![("potential".to_string(), self.potential.clone())];
        for (i, f) in self.constraints.equalities.iter().enumerate() {
            out.push((format!("h[{i}] {}", f.name()), f.clone()));
        }
        for (i, f) in self.constraints.inequalities.iter().enumerate() {
            out.push((format!("g[{i}] {}", f.name()), f.clone()));
        }
        out
    }

    /// Looks a problem up by its CLI name with default parameters.
    pub fn by_name(name: &str) -> Result<Problem> {
        match name {
            "star" => star(),
            "two_lobes" => two_lobes(),
            "quadratic_poly" => quadratic_poly(),
            "mixture_gaussian" => mixture_gaussian(),
            _ => Err(Error::InvalidArgument(format!("unknown problem '{name}'"))),
        }
    }
}

/// Value, gradient and Hessian of a planar field.
type Local2 = (f64, [f64; 2], [[f64; 2]; 2]);

/// A field on ℝ² given by a closure returning all derivatives at once.
#[derive(Clone)]
struct Planar {
    name: &'static str,
    f: Arc<dyn Fn(f64, f64) -> Result<Local2> + Send + Sync>,
}

impl Planar {
    fn new(
        name: &'static str,
        f: impl Fn(f64, f64) -> Result<Local2> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name,
            f: Arc::new(f),
        }
    }

    fn local(&self, x: &[f64]) -> Result<Local2> {
        check_dim(x, 2)?;
        (self.f)(x[0], x[1])
    }
}

impl ScalarField for Planar {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.local(x)?.0)
    }
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.local(x)?.1.to_vec())
    }
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(v, 2)?;
        let h = self.local(x)?.2;
        Ok(vec![
            h[0][0] * v[0] + h[0][1] * v[1],
            h[1][0] * v[0] + h[1][1] * v[1],
        ])
    }
    fn name(&self) -> String {
        self.name.into()
    }
}

/// `r − (base + amp·cos(k θ))`, `θ = atan2(x₂, x₁)`.
fn polar_rose(name: &'static str, base: f64, amp: f64, k: f64) -> Planar {
    Planar::new(name, move |x1, x2| {
        let r2 = x1 * x1 + x2 * x2;
        let r = r2.sqrt();
        if r < 1e-12 {
            return Err(Error::Domain(format!(
                "{name}: polar angle undefined at the origin"
            )));
        }
        let th = x2.atan2(x1);
        let (s, c) = (k * th).sin_cos();
        let val = r - (base + amp * c);
        let dr = [x1 / r, x2 / r];
        let dth = [-x2 / r2, x1 / r2];
        let r4 = r2 * r2;
        let hr = [
            [x2 * x2 / (r2 * r), -x1 * x2 / (r2 * r)],
            [-x1 * x2 / (r2 * r), x1 * x1 / (r2 * r)],
        ];
        let hth = [
            [2.0 * x1 * x2 / r4, (x2 * x2 - x1 * x1) / r4],
            [(x2 * x2 - x1 * x1) / r4, -2.0 * x1 * x2 / r4],
        ];
        let a = amp * k * s;
        let b = amp * k * k * c;
        let grad = [dr[0] + a * dth[0], dr[1] + a * dth[1]];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = hr[i][j] + b * dth[i] * dth[j] + a * hth[i][j];
            }
        }
        Ok((val, grad, hess))
    })
}

/// Lands `seed_point` on the equalities by Newton projection along the
/// normals at the seed, then checks the inequalities.
fn land(cs: &ConstraintSet, seed_point: &[f64]) -> Result<Vec<f64>> {
    let (_, base) = equality_constraints(cs, seed_point)?;
    let ncfg = NewtonConfig::new(100, 1e-13, 0.0);
    let p = newton_project(seed_point, &base, |z| equality_constraints(cs, z), &ncfg)
        .map_err(|e| Error::Infeasible(format!("Newton landing failed: {e:?}")))?;
    if cs.eval_inequalities(&p.y)?.iter().any(|&g| g > 0.0) {
        return Err(Error::Infeasible(
            "landed point violates an inequality".into(),
        ));
    }
    Ok(p.y)
}

fn coordinates_observables(d: usize) -> Vec<Observable> {
    (0..d)
        .map(|i| Observable::new(&format!("mean_x{i}"), move |x: &[f64]| x[i]))
        .collect()
}

fn planar_problem(
    name: &str,
    potential: Field,
    constraints: ConstraintSet,
    seed_point: &[f64],
) -> Result<Problem> {
    let feasible_point = land(&constraints, seed_point)?;
    Ok(Problem {
        name: name.into(),
        dim: 2,
        potential,
        constraints,
        feasible_point,
        init_noise: 1.0,
        observables: coordinates_observables(2),
    })
}

/// Uniform density on the five-pointed curve `r = 1.5 + 0.3 cos 5θ`.
pub fn star() -> Result<Problem> {
    let cs = ConstraintSet::empty().with_equality(polar_rose("star", 1.5, 0.3, 5.0));
    planar_problem("star", Arc::new(Zero), cs, &[2.0, 0.0])
}

/// Uniform density on `{−ln q ≤ 2}` with
/// `q = (e^{−2(x₁−3)²} + e^{−2(x₁+3)²}) / e^{2(‖x‖−3)²}`.
pub fn two_lobes() -> Result<Problem> {
    let g = Planar::new("two_lobes", |x1, x2| {
        let r2 = x1 * x1 + x2 * x2;
        let r = r2.sqrt();
        if r < 1e-12 {
            return Err(Error::Domain(
                "two_lobes: radius derivative undefined at the origin".into(),
            ));
        }
        // 2(r − 3)²
        let ring = 2.0 * (r - 3.0).powi(2);
        let ring_g = [4.0 * (r - 3.0) * x1 / r, 4.0 * (r - 3.0) * x2 / r];
        let c = 4.0 * (r - 3.0) / r;
        let ring_h = [
            [
                4.0 * x1 * x1 / r2 + c * x2 * x2 / r2,
                4.0 * x1 * x2 / r2 - c * x1 * x2 / r2,
            ],
            [
                4.0 * x1 * x2 / r2 - c * x1 * x2 / r2,
                4.0 * x2 * x2 / r2 + c * x1 * x1 / r2,
            ],
        ];
        // logsumexp of u₁ = −2(x₁−3)², u₂ = −2(x₁+3)²; both depend on x₁ only
        let u = [-2.0 * (x1 - 3.0).powi(2), -2.0 * (x1 + 3.0).powi(2)];
        let du = [-4.0 * (x1 - 3.0), -4.0 * (x1 + 3.0)];
        let mx = u[0].max(u[1]);
        let e = [(u[0] - mx).exp(), (u[1] - mx).exp()];
        let z = e[0] + e[1];
        let w = [e[0] / z, e[1] / z];
        let lse = mx + z.ln();
        let m1 = w[0] * du[0] + w[1] * du[1];
        let m2 = w[0] * du[0] * du[0] + w[1] * du[1] * du[1];
        let lse_xx = -4.0 + m2 - m1 * m1;
        let val = ring - lse - 2.0;
        let grad = [ring_g[0] - m1, ring_g[1]];
        let hess = [
            [ring_h[0][0] - lse_xx, ring_h[0][1]],
            [ring_h[1][0], ring_h[1][1]],
        ];
        Ok((val, grad, hess))
    });
    let cs = ConstraintSet::empty().with_inequality(g);
    planar_problem("two_lobes", Arc::new(Zero), cs, &[3.0, 0.0])
}

/// Standard Gaussian on `x₁⁴x₂² + x₁² + x₂ = 1` cut by `x₁³ − x₂³ ≤ 1`.
pub fn quadratic_poly() -> Result<Problem> {
    let h = Planar::new("quadratic_poly_h", |x1, x2| {
        let val = x1.powi(4) * x2 * x2 + x1 * x1 + x2 - 1.0;
        let grad = [
            4.0 * x1.powi(3) * x2 * x2 + 2.0 * x1,
            2.0 * x1.powi(4) * x2 + 1.0,
        ];
        let off = 8.0 * x1.powi(3) * x2;
        let hess = [
            [12.0 * x1 * x1 * x2 * x2 + 2.0, off],
            [off, 2.0 * x1.powi(4)],
        ];
        Ok((val, grad, hess))
    });
    let g = Planar::new("quadratic_poly_g", |x1, x2| {
        let val = x1.powi(3) - x2.powi(3) - 1.0;
        let grad = [3.0 * x1 * x1, -3.0 * x2 * x2];
        let hess = [[6.0 * x1, 0.0], [0.0, -6.0 * x2]];
        Ok((val, grad, hess))
    });
    let cs = ConstraintSet::empty().with_equality(h).with_inequality(g);
    planar_problem(
        "quadratic_poly",
        Arc::new(crate::field::HalfSquaredNorm),
        cs,
        &[0.0, 1.2],
    )
}

/// Nine equal-weight Gaussians on `{−2, 0, 2}²` restricted to the
/// seven-lobed curve `r = 3 + cos 7θ` and `g ≤ 0`.
pub fn mixture_gaussian() -> Result<Problem> {
    let f = Planar::new("mixture_potential", |x1, x2| {
        let mut u = [0.0; 9];
        let mut a = [[0.0; 2]; 9];
        for (i, (ui, ai)) in u.iter_mut().zip(a.iter_mut()).enumerate() {
            let c = [2.0 * (i / 3) as f64 - 2.0, 2.0 * (i % 3) as f64 - 2.0];
            let d = [x1 - c[0], x2 - c[1]];
            *ui = -5.0 * (d[0] * d[0] + d[1] * d[1]);
            *ai = [10.0 * d[0], 10.0 * d[1]];
        }
        let mx = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = u.iter().map(|v| (v - mx).exp()).collect();
        let z: f64 = e.iter().sum();
        let val = -(mx + z.ln());
        let mut mean = [0.0; 2];
        let mut second = [[0.0; 2]; 2];
        for (ei, ai) in e.iter().zip(&a) {
            let w = ei / z;
            for r in 0..2 {
                mean[r] += w * ai[r];
                for c in 0..2 {
                    second[r][c] += w * ai[r] * ai[c];
                }
            }
        }
        let mut hess = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { 10.0 } else { 0.0 };
                hess[r][c] = id - second[r][c] + mean[r] * mean[c];
            }
        }
        Ok((val, mean, hess))
    });
    let g = Planar::new("mixture_g", |x1, x2| {
        let val = (x1 - 2.0).powi(2) - 5.0 * x1 * x2.powi(3) + 0.5 * x2.powi(5) - 40.0;
        let grad = [
            2.0 * (x1 - 2.0) - 5.0 * x2.powi(3),
            -15.0 * x1 * x2 * x2 + 2.5 * x2.powi(4),
        ];
        let off = -15.0 * x2 * x2;
        let hess = [[2.0, off], [off, -30.0 * x1 * x2 + 10.0 * x2.powi(3)]];
        Ok((val, grad, hess))
    });
    let cs = ConstraintSet::empty()
        .with_equality(polar_rose("seven_lobes", 3.0, 1.0, 7.0))
        .with_inequality(g);
    planar_problem("mixture_gaussian", Arc::new(f), cs, &[-2.2, 0.0])
}

/// Bounding-sphere radius of the stress test.
pub const STRESS_RADIUS: f64 = 5.0;

/// `m − 1` random hyperplanes through a sphere of radius 5 and `l` unit
/// spherical obstacles, uniform density. All draws come from `seed`.
pub fn stress_test(d: usize, m: usize, l: usize, seed: u64) -> Result<Problem> {
    if m == 0 || d < m {
        return Err(Error::InvalidArgument(format!(
            "stress test needs 1 ≤ m ≤ d, got d = {d}, m = {m}"
        )));
    }
    let mut rng = RngStream::new(seed, 0);
    let r = STRESS_RADIUS;
    let mut rows = Vec::with_capacity(m - 1);
    let mut offsets = Vec::with_capacity(m - 1);
    let mut cs = ConstraintSet::empty();
    for _ in 0..m - 1 {
        let a = rng.normal_vector(d);
        let b = 0.1 * rng.normal();
        rows.push(a.clone());
        offsets.push(b);
        cs = cs.with_equality(Affine::new(a, b));
    }
    cs = cs.with_equality(SquaredDistance::sphere(vec![0.0; d], r));
    // covariance √(R/2)·I
    let sd = (r / 2.0).sqrt().sqrt();
    let centers: Vec<Vec<f64>> = (0..l)
        .map(|_| rng.normal_vector(d).into_iter().map(|v| sd * v).collect())
        .collect();
    for c in &centers {
        cs = cs.with_inequality(SquaredDistance::obstacle(c.clone(), 1.0));
    }

    let feasible_point = stress_feasible_point(&cs, &rows, &offsets, d, seed)?;
    let mut observables = vec![
        Observable::new(
            "p_x1_positive",
            |x: &[f64]| if x[0] > 0.0 { 1.0 } else { 0.0 },
        ),
        Observable::new("k_test", stress_k),
    ];
    observables.extend(coordinates_observables(d.min(2)));
    Ok(Problem {
        name: "stress_test".into(),
        dim: d,
        potential: Arc::new(Zero),
        constraints: cs,
        feasible_point,
        init_noise: 1.0,
        observables,
    })
}

/// `sin(x₁)e^{x₂} + log(|x₃| + 1)·tanh(x₄) + Π_{i=5..9} cos(xᵢ)` (1-based),
/// with missing coordinates dropped in low dimension.
pub fn stress_k(x: &[f64]) -> f64 {
    let at = |i: usize| x.get(i).copied().unwrap_or(0.0);
    let mut k = at(0).sin() * at(1).exp() + (at(2).abs() + 1.0).ln() * at(3).tanh();
    if x.len() > 4 {
        k += x[4..x.len().min(9)]
            .iter()
            .map(|v| v.cos())
            .product::<f64>();
    }
    k
}

/// Minimum-norm point of the hyperplanes, pushed along a random null-space
/// direction out to the sphere; retried until no obstacle is hit.
fn stress_feasible_point(
    cs: &ConstraintSet,
    rows: &[Vec<f64>],
    offsets: &[f64],
    d: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let a = Matrix::from_rows(d, rows);
    let x0 = if rows.is_empty() {
        vec![0.0; d]
    } else {
        let y = solve_dense(&gram(&a), offsets)
            .ok_or_else(|| Error::Infeasible("random hyperplanes are degenerate".into()))?;
        a.tr_mul_vec(&y)
    };
    let slack = STRESS_RADIUS * STRESS_RADIUS - dot(&x0, &x0);
    if slack <= 0.0 {
        return Err(Error::Infeasible(
            "hyperplanes miss the bounding sphere".into(),
        ));
    }
    let proj = crate::linalg::projector(&a, crate::linalg::DEFAULT_PINV_TOL)?;
    let mut rng = RngStream::new(seed, 1);
    for _ in 0..1000 {
        let u = proj.mul_vec(&rng.normal_vector(d));
        let n = norm(&u);
        if n < 1e-12 {
            continue;
        }
        let t = slack.sqrt() / n;
        let x: Vec<f64> = x0.iter().zip(&u).map(|(a, b)| a + t * b).collect();
        if cs.eval_inequalities(&x)?.iter().all(|&g| g <= 0.0) {
            return Ok(x);
        }
    }
    Err(Error::Infeasible(
        "no obstacle-free point found on the stress-test manifold".into(),
    ))
}

/// Polymer model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerParams {
    pub bond_length: f64,
    /// Bond angle, radians.
    pub bond_angle: f64,
    pub r_min: f64,
    pub beta: f64,
    /// `(multiplicity, force constant, phase)` torsion modes.
    pub torsion: Vec<(f64, f64, f64)>,
    pub eps_wca: f64,
}

impl Default for PolymerParams {
    fn default() -> Self {
        Self {
            bond_length: 1.0,
            bond_angle: 109.5_f64.to_radians(),
            r_min: 1.0,
            beta: 1.0,
            torsion: vec![(1.0, 0.5, 0.0), (3.0, 0.2, 0.0)],
            eps_wca: 1.0,
        }
    }
}

type V3<T> = [T; 3];

fn atom<T: Real>(x: &[T], k: usize) -> V3<T> {
    [x[3 * k], x[3 * k + 1], x[3 * k + 2]]
}

fn sub3<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3<T: Real>(a: V3<T>, b: V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale3<T: Real>(s: T, a: V3<T>) -> V3<T> {
    [s * a[0], s * a[1], s * a[2]]
}

fn add_atom<T: Real>(g: &mut [T], k: usize, s: T, v: V3<T>) {
    for c in 0..3 {
        g[3 * k + c] = g[3 * k + c] + s * v[c];
    }
}

/// Fields whose gradient is written once, generically; the HVP is the
/// forward-mode derivative of that gradient.
trait GenericField {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient<T: Real>(&self, x: &[T]) -> Result<Vec<T>>;
}

macro_rules! generic_scalar_field {
    ($t:ty) => {
        impl ScalarField for $t {
            fn eval(&self, x: &[f64]) -> Result<f64> {
                check_dim(x, self.dim())?;
                self.value(x)
            }
            fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
                check_dim(x, self.dim())?;
                self.gradient(x)
            }
            fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
                check_dim(x, self.dim())?;
                check_dim(v, self.dim())?;
                Ok(self.gradient(&seed(x, v))?.iter().map(|d| d.eps).collect())
            }
            fn name(&self) -> String {
                self.label()
            }
        }
    };
}

/// `‖P_k − P_{k+1}‖² − l_b²`
#[derive(Debug, Clone)]
struct Bond {
    n: usize,
    k: usize,
    length: f64,
}

impl GenericField for Bond {
    fn dim(&self) -> usize {
        3 * self.n
    }
    fn label(&self) -> String {
        format!("bond_{}", self.k)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let d = sub3(atom(x, self.k), atom(x, self.k + 1));
        Ok(dot3(d, d) - self.length * self.length)
    }
    fn gradient<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::cst(0.0); x.len()];
        let d = sub3(atom(x, self.k), atom(x, self.k + 1));
        add_atom(&mut g, self.k, T::cst(2.0), d);
        add_atom(&mut g, self.k + 1, T::cst(-2.0), d);
        Ok(g)
    }
}

/// `v₁·v₂ / (‖v₁‖‖v₂‖) − cos θ_a` with `v₁ = P_{k−1} − P_k`,
/// `v₂ = P_{k+1} − P_k`.
#[derive(Debug, Clone)]
struct BondAngle {
    n: usize,
    k: usize,
    cos_angle: f64,
}

impl BondAngle {
    fn arms<T: Real>(&self, x: &[T]) -> Result<(V3<T>, V3<T>, T, T)> {
        let c = atom(x, self.k);
        let v1 = sub3(atom(x, self.k - 1), c);
        let v2 = sub3(atom(x, self.k + 1), c);
        let n1 = dot3(v1, v1).sqrt();
        let n2 = dot3(v2, v2).sqrt();
        if n1.re() < 1e-12 || n2.re() < 1e-12 {
            return Err(Error::Domain(format!(
                "bond angle {}: coincident atoms",
                self.k
            )));
        }
        Ok((v1, v2, n1, n2))
    }
}

impl GenericField for BondAngle {
    fn dim(&self) -> usize {
        3 * self.n
    }
    fn label(&self) -> String {
        format!("angle_{}", self.k)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let (v1, v2, n1, n2) = self.arms(x)?;
        Ok(dot3(v1, v2) / (n1 * n2) - self.cos_angle)
    }
    fn gradient<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let (v1, v2, n1, n2) = self.arms(x)?;
        let inv = T::cst(1.0) / (n1 * n2);
        let c = dot3(v1, v2) * inv;
        let g1 = sub3(scale3(inv, v2), scale3(c / (n1 * n1), v1));
        let g2 = sub3(scale3(inv, v1), scale3(c / (n2 * n2), v2));
        let mut g = vec![T::cst(0.0); x.len()];
        add_atom(&mut g, self.k - 1, T::cst(1.0), g1);
        add_atom(&mut g, self.k + 1, T::cst(1.0), g2);
        add_atom(&mut g, self.k, T::cst(-1.0), g1);
        add_atom(&mut g, self.k, T::cst(-1.0), g2);
        Ok(g)
    }
}

/// `r_min² − ‖P_i − P_j‖²`
#[derive(Debug, Clone)]
struct Steric {
    n: usize,
    i: usize,
    j: usize,
    r_min: f64,
}

impl GenericField for Steric {
    fn dim(&self) -> usize {
        3 * self.n
    }
    fn label(&self) -> String {
        format!("steric_{}_{}", self.i, self.j)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let d = sub3(atom(x, self.i), atom(x, self.j));
        Ok(self.r_min * self.r_min - dot3(d, d))
    }
    fn gradient<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::cst(0.0); x.len()];
        let d = sub3(atom(x, self.i), atom(x, self.j));
        add_atom(&mut g, self.i, T::cst(-2.0), d);
        add_atom(&mut g, self.j, T::cst(2.0), d);
        Ok(g)
    }
}

/// `β (U_tor + U_nb)`: cosine torsion series over consecutive dihedrals and
/// WCA repulsion between atoms three or more bonds apart.
#[derive(Debug, Clone)]
struct PolymerPotential {
    n: usize,
    params: PolymerParams,
}

impl PolymerPotential {
    fn sigma(&self) -> f64 {
        self.params.r_min / 2f64.powf(1.0 / 6.0)
    }

    fn cutoff2(&self) -> f64 {
        (2f64.powf(1.0 / 6.0) * self.sigma()).powi(2)
    }

    /// Bond vectors, normals and the atan2 arguments of dihedral `k`
    /// (atoms `k−1 … k+2`).
    #[allow(clippy::type_complexity)]
    fn dihedral<T: Real>(&self, x: &[T], k: usize) -> Result<([V3<T>; 3], [V3<T>; 2], T, T, T)> {
        let b1 = sub3(atom(x, k), atom(x, k - 1));
        let b2 = sub3(atom(x, k + 1), atom(x, k));
        let b3 = sub3(atom(x, k + 2), atom(x, k + 1));
        let n1 = cross3(b1, b2);
        let n2 = cross3(b2, b3);
        let nb2 = dot3(b2, b2).sqrt();
        let c = dot3(n1, n2);
        let s = nb2 * dot3(b1, n2);
        if (c.re() * c.re() + s.re() * s.re()) < 1e-24 {
            return Err(Error::Domain(format!("dihedral {k}: collinear atoms")));
        }
        Ok(([b1, b2, b3], [n1, n2], nb2, c, s))
    }

    fn torsion_slope(&self, phi: f64) -> (f64, f64) {
        let mut u = 0.0;
        let mut du = 0.0;
        for &(m, k, delta) in &self.params.torsion {
            u += k * (1.0 + (m * phi - delta).cos());
            du -= k * m * (m * phi - delta).sin();
        }
        (u, du)
    }

    fn wca_pair(&self, r2: f64) -> f64 {
        let s6 = (self.sigma().powi(2) / r2).powi(3);
        4.0 * self.params.eps_wca * (s6 * s6 - s6) + self.params.eps_wca
    }
}

impl GenericField for PolymerPotential {
    fn dim(&self) -> usize {
        3 * self.n
    }
    fn label(&self) -> String {
        "polymer_potential".into()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut u = 0.0;
        for k in 1..self.n.saturating_sub(2) {
            let (_, _, _, c, s) = self.dihedral(x, k)?;
            u += self.torsion_slope(s.atan2(c)).0;
        }
        let rc2 = self.cutoff2();
        for i in 0..self.n {
            for j in i + 3..self.n {
                let d = sub3(atom(x, i), atom(x, j));
                let r2 = dot3(d, d);
                if r2 == 0.0 {
                    return Err(Error::Domain(format!("WCA: atoms {i} and {j} coincide")));
                }
                if r2 < rc2 {
                    u += self.wca_pair(r2);
                }
            }
        }
        Ok(self.params.beta * u)
    }

    fn gradient<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::cst(0.0); x.len()];
        let one = T::cst(1.0);
        for k in 1..self.n.saturating_sub(2) {
            let ([b1, b2, b3], [n1, n2], nb2, c, s) = self.dihedral(x, k)?;
            let phi = s.atan2(c);
            // dU/dφ as a function of φ, carried through T for the HVP
            let mut du = T::cst(0.0);
            for &(m, km, delta) in &self.params.torsion {
                du = du - T::cst(km * m) * (T::cst(m) * phi - T::cst(delta)).sin();
            }
            let rho2 = c * c + s * s;
            let gc = -(du * s / rho2);
            let gs = du * c / rho2;
            let w1 = scale3(gc, n2);
            let w2 = [
                gc * n1[0] + gs * nb2 * b1[0],
                gc * n1[1] + gs * nb2 * b1[1],
                gc * n1[2] + gs * nb2 * b1[2],
            ];
            let gb1 = [
                gs * nb2 * n2[0] + cross3(b2, w1)[0],
                gs * nb2 * n2[1] + cross3(b2, w1)[1],
                gs * nb2 * n2[2] + cross3(b2, w1)[2],
            ];
            let t = gs * dot3(b1, n2) / nb2;
            let a = cross3(w1, b1);
            let b = cross3(b3, w2);
            let gb2 = [
                t * b2[0] + a[0] + b[0],
                t * b2[1] + a[1] + b[1],
                t * b2[2] + a[2] + b[2],
            ];
            let gb3 = cross3(w2, b2);
            add_atom(&mut g, k - 1, -one, gb1);
            add_atom(&mut g, k, one, gb1);
            add_atom(&mut g, k, -one, gb2);
            add_atom(&mut g, k + 1, one, gb2);
            add_atom(&mut g, k + 1, -one, gb3);
            add_atom(&mut g, k + 2, one, gb3);
        }
        let rc2 = self.cutoff2();
        let s2 = self.sigma().powi(2);
        let eps = self.params.eps_wca;
        for i in 0..self.n {
            for j in i + 3..self.n {
                let d = sub3(atom(x, i), atom(x, j));
                let r2 = dot3(d, d);
                if r2.re() == 0.0 {
                    return Err(Error::Domain(format!("WCA: atoms {i} and {j} coincide")));
                }
                if r2.re() < rc2 {
                    let q = T::cst(s2) / r2;
                    let q3 = q.powi(3);
                    // dU/d(R²) = 4ε(−6 σ¹²/R¹⁴ + 3 σ⁶/R⁸)
                    let du = T::cst(4.0 * eps) * (T::cst(-6.0) * q3 * q3 + T::cst(3.0) * q3) / r2;
                    add_atom(&mut g, i, T::cst(2.0) * du, d);
                    add_atom(&mut g, j, T::cst(-2.0) * du, d);
                }
            }
        }
        let beta = T::cst(self.params.beta);
        Ok(g.into_iter().map(|v| beta * v).collect())
    }
}

generic_scalar_field!(Bond);
generic_scalar_field!(BondAngle);
generic_scalar_field!(Steric);
generic_scalar_field!(PolymerPotential);

/// `R_g² = (1/N) Σ ‖P_k − P_cm‖²`
pub fn radius_of_gyration2(x: &[f64]) -> f64 {
    let n = x.len() / 3;
    let mut cm = [0.0; 3];
    for k in 0..n {
        for c in 0..3 {
            cm[c] += x[3 * k + c] / n as f64;
        }
    }
    (0..n)
        .map(|k| (0..3).map(|c| (x[3 * k + c] - cm[c]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n as f64
}

/// Planar all-trans zigzag with the given bond length and angle.
pub fn zigzag(n: usize, bond_length: f64, bond_angle: f64) -> Vec<f64> {
    let a = bond_length * (bond_angle / 2.0).sin();
    let b = bond_length * (bond_angle / 2.0).cos();
    (0..n)
        .flat_map(|k| [k as f64 * a, if k % 2 == 1 { b } else { 0.0 }, 0.0])
        .collect()
}

/// Bead chain of `n_atoms ≥ 3` with default parameters.
pub fn polymer(n_atoms: usize) -> Result<Problem> {
    polymer_with(n_atoms, PolymerParams::default())
}

pub fn polymer_with(n_atoms: usize, params: PolymerParams) -> Result<Problem> {
    let n = n_atoms;
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "polymer needs at least 3 atoms, got {n}"
        )));
    }
    if !(params.bond_angle > 0.0 && params.bond_angle < PI) {
        return Err(Error::InvalidArgument(
            "bond angle must lie in (0, π)".into(),
        ));
    }
    let mut cs = ConstraintSet::empty();
    for k in 0..n - 1 {
        cs = cs.with_equality(Bond {
            n,
            k,
            length: params.bond_length,
        });
    }
    for k in 1..n - 1 {
        cs = cs.with_equality(BondAngle {
            n,
            k,
            cos_angle: params.bond_angle.cos(),
        });
    }
    for i in 0..n {
        for j in i + 2..n {
            cs = cs.with_inequality(Steric {
                n,
                i,
                j,
                r_min: params.r_min,
            });
        }
    }
    let feasible_point = zigzag(n, params.bond_length, params.bond_angle);
    if cs
        .eval_inequalities(&feasible_point)?
        .iter()
        .any(|&g| g > 0.0)
    {
        return Err(Error::Infeasible(
            "zigzag start violates a steric constraint".into(),
        ));
    }
    Ok(Problem {
        name: format!("polymer_{n}"),
        dim: 3 * n,
        potential: Arc::new(PolymerPotential { n, params }),
        constraints: cs,
        feasible_point,
        init_noise: 0.0,
        observables: vec![Observable::new("rg2", radius_of_gyration2)],
    })
}
