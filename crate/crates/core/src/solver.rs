//! Desk-scale semismooth Newton demonstration: solves the dual equation of
//! a nuclear-norm-regularized, linearly constrained projection problem
//!
//! ```text
//! min_X  ½‖X − C‖²_F + τ‖X‖_*   s.t.  A(X) = b
//! ```
//!
//! through its Lipschitzian dual residual `F(y) = A(SVT_τ(C + A*(y))) − b`,
//! where `SVT_τ` is the singular-value soft threshold (the proximal map of
//! `τ‖·‖_*`). Newton systems use sampled generalized-derivative elements of
//! the threshold operator, a fixed diagonal regularization, and a damped
//! line search on the residual norm.

use crate::catalog;
use crate::decomposition::Tolerances;
use crate::error::{Error, Result};
use crate::jacobian;
use crate::mapping::SymmetricMapping;
use crate::operator;
use crate::space::SpaceSignature;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Diagonal regularization added to every Newton system.
const NEWTON_REGULARIZATION: f64 = 1e-10;

/// Maximum number of step halvings the line search may take.
const MAX_HALVINGS: usize = 40;

/// A linear measurement operator `X ↦ (⟨A_i, X⟩)_i` together with its exact
/// adjoint `y ↦ Σ y_i A_i`.
#[derive(Debug, Clone)]
pub struct MeasurementMap {
    mats: Vec<DMatrix<f64>>,
}

impl MeasurementMap {
    /// Wraps a nonempty list of equally shaped measurement matrices.
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::BadParam("a measurement map needs at least one matrix".into()))?
            .shape();
        if mats.iter().any(|m| m.shape() != first) {
            return Err(Error::Shape(
                "all measurement matrices must share one shape".into(),
            ));
        }
        Ok(Self { mats })
    }

    /// `p` seeded standard Gaussian measurement matrices of shape `m`×`n`.
    pub fn random(p: usize, m: usize, n: usize, seed: u64) -> Result<Self> {
        if p == 0 || m == 0 || n == 0 {
            return Err(Error::BadParam(
                "random measurement maps need positive dimensions".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats = (0..p)
            .map(|_| DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal)))
            .collect();
        Self::new(mats)
    }

    /// Number of measurements.
    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Shape of the matrices being measured.
    pub fn shape(&self) -> (usize, usize) {
        self.mats[0].shape()
    }

    /// The measurement matrices.
    pub fn mats(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    /// `(⟨A_i, X⟩)_i` under the Frobenius inner product.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "argument is {}x{}, measurements are {}x{}",
                x.nrows(),
                x.ncols(),
                self.shape().0,
                self.shape().1
            )));
        }
        Ok(DVector::from_iterator(
            self.len(),
            self.mats.iter().map(|a| a.dot(x)),
        ))
    }

    /// `Σ y_i A_i`, the exact transpose of `forward`.
    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        if y.len() != self.len() {
            return Err(Error::Shape(format!(
                "coefficient vector has length {}, expected {}",
                y.len(),
                self.len()
            )));
        }
        let (m, n) = self.shape();
        let mut out = DMatrix::zeros(m, n);
        for (mat, &yi) in self.mats.iter().zip(y.iter()) {
            out += mat * yi;
        }
        Ok(out)
    }

    /// Largest deviation of `⟨A(X), y⟩` from `⟨X, A*(y)⟩` over random unit
    /// probes; definitionally at rounding level.
    pub fn adjoint_consistency(&self, trials: usize, seed: u64) -> f64 {
        let (m, n) = self.shape();
        let p = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for _ in 0..trials {
            let x: DMatrix<f64> = DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
            let y: DVector<f64> = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
            let x = &x / x.norm();
            let y = &y / y.norm();
            let lhs = self.forward(&x).expect("shapes fixed").dot(&y);
            let rhs = x.dot(&self.adjoint(&y).expect("shapes fixed"));
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }
}

/// Residual norms and accepted step norms of a Newton run.
#[derive(Debug, Clone)]
pub struct NewtonTrace {
    /// `‖F(y_k)‖` for every visited iterate, starting point included.
    pub residual_norms: Vec<f64>,
    /// Norms of the accepted (possibly damped) steps.
    pub step_norms: Vec<f64>,
    /// Whether the final residual met the tolerance.
    pub converged: bool,
}

impl NewtonTrace {
    /// Deterministic key-value rendering for reports and logs.
    pub fn render(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "converged = {}\nsteps = {}\nresidual_norms = [{}]\nstep_norms = [{}]\n",
            self.converged,
            self.step_norms.len(),
            list(&self.residual_norms),
            list(&self.step_norms),
        )
    }
}

fn svt_mapping(tau: f64, m: usize, n: usize) -> Result<SymmetricMapping> {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    catalog::soft_threshold(tau, SpaceSignature::rect(lo, hi)?)
}

fn check_problem_shapes(
    a: &MeasurementMap,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    tau: f64,
    y: &DVector<f64>,
) -> Result<()> {
    if c.shape() != a.shape() {
        return Err(Error::Shape(format!(
            "offset matrix is {}x{}, measurements are {}x{}",
            c.nrows(),
            c.ncols(),
            a.shape().0,
            a.shape().1
        )));
    }
    if b.len() != a.len() || y.len() != a.len() {
        return Err(Error::Shape(format!(
            "vector lengths ({}, {}) must match the {} measurements",
            b.len(),
            y.len(),
            a.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::BadParam("the threshold must be positive".into()));
    }
    Ok(())
}

/// The dual residual `F(y) = A(SVT_τ(C + A*(y))) − b`.
pub fn residual_map(
    a: &MeasurementMap,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    tau: f64,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_problem_shapes(a, b, c, tau, y)?;
    let (m, n) = a.shape();
    let g = svt_mapping(tau, m, n)?;
    let tols = Tolerances::default();
    let w = c + a.adjoint(y)?;
    let x = operator::apply(&g, &w, &tols)?;
    Ok(a.forward(&x)? - b)
}

/// Solves `F(y) = 0` by a damped semismooth Newton method. Each iteration
/// draws a fresh generalized-derivative element of the threshold operator
/// (seeded by `seed` plus the iteration index), assembles the dense `p×p`
/// system `V = A ∘ element ∘ A*` with a small diagonal regularization, and
/// halves the step until the residual norm strictly decreases.
///
/// Returns the dual solution, the primal point `X* = SVT_τ(C + A*(y*))`,
/// and the iteration trace.
#[allow(clippy::too_many_arguments)]
pub fn newton_solve(
    a: &MeasurementMap,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    tau: f64,
    y0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(DVector<f64>, DMatrix<f64>, NewtonTrace)> {
    check_problem_shapes(a, b, c, tau, y0)?;
    if !(tol > 0.0) {
        return Err(Error::BadParam("the tolerance must be positive".into()));
    }
    let (m, n) = a.shape();
    let p = a.len();
    if p > m * n {
        return Err(Error::BadParam(format!(
            "{p} measurements exceed the {m}x{n} ambient dimension"
        )));
    }
    let g = svt_mapping(tau, m, n)?;
    let tols = Tolerances::default();
    let mut y = y0.clone();
    let mut trace = NewtonTrace {
        residual_norms: Vec::new(),
        step_norms: Vec::new(),
        converged: false,
    };
    for k in 0..=max_iter {
        let f = residual_map(a, b, c, tau, &y)?;
        let f_norm = f.norm();
        trace.residual_norms.push(f_norm);
        if f_norm <= tol {
            trace.converged = true;
            let x = operator::apply(&g, &(c + a.adjoint(&y)?), &tols)?;
            return Ok((y, x, trace));
        }
        if k == max_iter {
            return Err(Error::MaxIterExceeded(format!(
                "residual {f_norm:.3e} above tolerance {tol:.3e} after {max_iter} iterations"
            )));
        }
        let w = c + a.adjoint(&y)?;
        let element = jacobian::clarke_element(&g, &w, seed + k as u64, None, &tols)?;
        let mut v = DMatrix::zeros(p, p);
        for j in 0..p {
            let image = element.apply(&a.mats[j])?;
            for i in 0..p {
                v[(i, j)] = a.mats[i].dot(&image);
            }
        }
        for i in 0..p {
            v[(i, i)] += NEWTON_REGULARIZATION;
        }
        let rhs = f.map(|t| -t);
        let d = v.lu().solve(&rhs).ok_or_else(|| {
            Error::SingularNewtonSystem(format!(
                "regularized {p}x{p} system is singular at iteration {k}"
            ))
        })?;
        let mut alpha = 1.0_f64;
        let mut halvings = 0;
        loop {
            let candidate = &y + &d * alpha;
            let f_candidate = residual_map(a, b, c, tau, &candidate)?;
            if f_candidate.norm() < f_norm {
                trace.step_norms.push((&d * alpha).norm());
                y = candidate;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::SolverFailure(format!(
                    "line search exhausted {MAX_HALVINGS} halvings at iteration {k}"
                )));
            }
            alpha *= 0.5;
        }
    }
    unreachable!("the iteration either converges, errors, or exhausts max_iter");
}
