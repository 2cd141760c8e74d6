//! Independent numerical oracles: finite-difference slope fits for
//! derivative claims, directional-quotient convergence, semismoothness
//! estimates along smooth nearby points, factorization-gauge randomization,
//! and Lipschitz modulus sampling.
//!
//! Every oracle builds its reference values from plain operator evaluation
//! only, never from the derivative code path under test.

use crate::decomposition::{self, Tolerances};
use crate::error::{Error, Result};
use crate::jacobian;
use crate::mapping::SymmetricMapping;
use crate::operator;
use crate::space::BlockKind;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Radii used by slope fits when the caller does not supply a schedule.
/// Smaller radii are excluded to stay above the double-precision
/// cancellation floor of the residuals.
pub const DEFAULT_RADII: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Minimum log-log determination coefficient for a fit to count as a clean
/// single-regime power law.
pub const MIN_R_SQUARED: f64 = 0.98;

/// Outcome of a log-log slope fit of residuals against radii.
#[derive(Debug, Clone)]
pub struct SlopeReport {
    /// Strictly decreasing evaluation radii.
    pub radii: Vec<f64>,
    /// Nonnegative residual norms, one per radius.
    pub residuals: Vec<f64>,
    /// Least-squares slope of log residual against log radius.
    pub fitted_slope: f64,
    /// Determination coefficient of the fit.
    pub r_squared: f64,
    /// Slope the fit is compared against.
    pub threshold: f64,
    /// Whether the fit clears the threshold with an acceptable fit quality.
    pub passed: bool,
    /// Whether every residual sat below the numerical floor, in which case
    /// the check passes vacuously and the slope is reported as infinite.
    pub at_floor: bool,
}

impl SlopeReport {
    /// Deterministic key-value rendering consumed by the command-line
    /// front end. Identical reports render to identical bytes.
    pub fn render(&self, label: &str) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "check = {label}\nradii = [{}]\nresiduals = [{}]\nfitted_slope = {:.16e}\nr_squared = {:.16e}\nthreshold = {:.16e}\nat_floor = {}\npassed = {}\n",
            list(&self.radii),
            list(&self.residuals),
            self.fitted_slope,
            self.r_squared,
            self.threshold,
            self.at_floor,
            self.passed,
        )
    }
}

fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 4 {
        return Err(Error::BadParam(
            "slope fits need at least four radii".into(),
        ));
    }
    if radii.iter().any(|&t| !(t > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadParam(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Fits log10 residual against log10 radius. Residuals below `floor` are
/// clamped so that cancellation noise cannot dominate the fit; if the whole
/// curve sits at the floor the check passes vacuously.
fn fit_report(radii: &[f64], residuals: Vec<f64>, floor: f64, threshold: f64) -> SlopeReport {
    if residuals.iter().all(|&r| r <= floor) {
        return SlopeReport {
            radii: radii.to_vec(),
            residuals,
            fitted_slope: f64::INFINITY,
            r_squared: 1.0,
            threshold,
            passed: true,
            at_floor: true,
        };
    }
    let xs: Vec<f64> = radii.iter().map(|t| t.log10()).collect();
    let ys: Vec<f64> = residuals.iter().map(|&r| r.max(floor).log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let fitted_slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    SlopeReport {
        radii: radii.to_vec(),
        residuals,
        fitted_slope,
        r_squared,
        threshold,
        passed: fitted_slope >= threshold && r_squared >= MIN_R_SQUARED,
        at_floor: false,
    }
}

/// Measures the first-order expansion quality of the derivative at a point
/// of differentiability: residuals `‖G(X+tH) − G(X) − t·G′(X)H‖` should
/// shrink at least quadratically for smooth underlying maps.
pub fn fd_frechet_slope(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    radii: &[f64],
) -> Result<SlopeReport> {
    validate_radii(radii)?;
    let hermitian = match g.signature().blocks() {
        [BlockKind::Sym(_)] => true,
        [BlockKind::Rect(_, _)] => false,
        _ => {
            return Err(Error::Shape(
                "slope fits need a single-block signature".into(),
            ))
        }
    };
    let tols = Tolerances::default();
    let gx = eval_any(g, x, hermitian, &tols)?;
    let dgh = derivative_any(g, x, h, hermitian, &tols)?;
    let floor = 1e-13 * (1.0 + gx.norm());
    let mut residuals = Vec::with_capacity(radii.len());
    for &t in radii {
        let gxt = eval_any(g, &(x + h * t), hermitian, &tols)?;
        residuals.push((gxt - &gx - &dgh * t).norm());
    }
    Ok(fit_report(radii, residuals, floor, 1.8))
}

/// Measures the first-order expansion quality of the directional
/// derivative at an arbitrary base point: residuals
/// `‖G(X̄+tH) − G(X̄) − Ψ(tH)‖` should shrink superlinearly — quadratically
/// for piecewise-linear underlying maps.
pub fn dir_quotient_check(
    g: &SymmetricMapping,
    x_bar: &DMatrix<f64>,
    h: &DMatrix<f64>,
    radii: &[f64],
) -> Result<SlopeReport> {
    validate_radii(radii)?;
    if g.metadata().lipschitz.is_none() {
        return Err(Error::CapabilityMissing(format!(
            "mapping '{}' declares no Lipschitz modulus",
            g.name()
        )));
    }
    let tols = Tolerances::default();
    let gx = operator::apply(g, x_bar, &tols)?;
    let psi = jacobian::psi_operator(g, x_bar, &tols)?;
    let floor = 1e-13 * (1.0 + gx.norm());
    let mut residuals = Vec::with_capacity(radii.len());
    for &t in radii {
        let gxt = operator::apply(g, &(x_bar + h * t), &tols)?;
        let dir = psi.apply(&(h * t))?;
        residuals.push((gxt - &gx - dir).norm());
    }
    Ok(fit_report(radii, residuals, floor, 1.8))
}

fn eval_any(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    hermitian: bool,
    tols: &Tolerances,
) -> Result<DMatrix<f64>> {
    if hermitian {
        operator::apply_hermitian(g, x, tols)
    } else {
        operator::apply(g, x, tols)
    }
}

fn derivative_any(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    hermitian: bool,
    tols: &Tolerances,
) -> Result<DMatrix<f64>> {
    if hermitian {
        let out = operator::frechet_apply_mixed(g, &[x.clone()], &[h.clone()], tols)?;
        Ok(out.into_iter().next().expect("one block in, one block out"))
    } else {
        operator::frechet_apply(g, x, h, tols)
    }
}

fn unit_direction(raw: DMatrix<f64>, hermitian: bool) -> DMatrix<f64> {
    let shaped = if hermitian {
        (&raw + raw.transpose()) * 0.5
    } else {
        raw
    };
    let norm = shaped.norm();
    if norm > 0.0 {
        shaped / norm
    } else {
        shaped
    }
}

/// Measures the semismoothness order at `x_bar`: at each radius, nearby
/// points of differentiability are sampled along the given directions
/// (resampling a direction when it lands on a nondifferentiable point) and
/// the worst residual `‖G(X) − G(X̄) − G′(X)(X−X̄)‖` is recorded.
pub fn semismooth_slope(
    g: &SymmetricMapping,
    x_bar: &DMatrix<f64>,
    directions: &[DMatrix<f64>],
    radii: &[f64],
    seed: u64,
) -> Result<SlopeReport> {
    validate_radii(radii)?;
    if directions.is_empty() {
        return Err(Error::BadParam(
            "at least one sampling direction is required".into(),
        ));
    }
    let hermitian = match g.signature().blocks() {
        [BlockKind::Sym(_)] => true,
        [BlockKind::Rect(_, _)] => false,
        _ => {
            return Err(Error::Shape(
                "semismoothness sampling needs a single-block signature".into(),
            ))
        }
    };
    let tols = Tolerances::default();
    let g_ref = eval_any(g, x_bar, hermitian, &tols)?;
    let floor = 1e-13 * (1.0 + g_ref.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nr, nc) = x_bar.shape();
    let mut residuals = Vec::with_capacity(radii.len());
    for &t in radii {
        let mut worst = 0.0_f64;
        for d0 in directions {
            if d0.shape() != (nr, nc) {
                return Err(Error::Shape(format!(
                    "direction is {}x{}, base point is {nr}x{nc}",
                    d0.nrows(),
                    d0.ncols()
                )));
            }
            let mut dir = unit_direction(d0.clone(), hermitian);
            let mut attempts = 0;
            loop {
                let x = x_bar + &dir * t;
                if jacobian::is_smooth_point(g, &x, &tols)? {
                    let step = &x - x_bar;
                    let lin = derivative_any(g, &x, &step, hermitian, &tols)?;
                    let gx = eval_any(g, &x, hermitian, &tols)?;
                    worst = worst.max((gx - &g_ref - lin).norm());
                    break;
                }
                attempts += 1;
                if attempts >= 60 {
                    return Err(Error::NoSmoothPointFound(format!(
                        "no differentiable point found at radius {t:.3e} within 60 draws"
                    )));
                }
                let raw = DMatrix::from_fn(nr, nc, |_, _| rng.sample(StandardNormal));
                dir = unit_direction(raw, hermitian);
            }
        }
        residuals.push(worst);
    }
    Ok(fit_report(radii, residuals, floor, 1.8))
}

/// A Haar-distributed random orthogonal matrix, via the sign-corrected QR
/// factorization of a Gaussian matrix.
pub fn haar_orthogonal(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let raw: DMatrix<f64> = DMatrix::from_fn(k, k, |_, _| rng.sample(StandardNormal));
    let qr = raw.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn mix_columns(mat: &mut DMatrix<f64>, cols: &[usize], q: &DMatrix<f64>) {
    if cols.is_empty() {
        return;
    }
    let sub = mat.select_columns(cols.iter());
    let mixed = &sub * q;
    for (c, &j) in cols.iter().enumerate() {
        mat.column_mut(j).copy_from(&mixed.column(c));
    }
}

/// Randomizes the factorization gauge: joint orthogonal mixing of the tied
/// groups on both factors, an independent rotation of the zero rows on the
/// left, and a joint rotation of the zero columns with the orthogonal
/// completion on the right. Returns the largest deviation of the
/// re-assembled operator value from the reference assembly.
pub fn invariance_check(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let tols = Tolerances::default();
    let xo = if x.nrows() > x.ncols() {
        x.transpose()
    } else {
        x.clone()
    };
    operator::expect_single_rect(g, xo.nrows(), xo.ncols())?;
    let (fact, part) = decomposition::svd_full(&xo, &tols)?;
    let gamma = g.eval(&fact.sigma)?;
    let gd = DMatrix::from_diagonal(&gamma);
    let g_ref = &fact.u * &gd * fact.v1.transpose();
    let v2 = fact
        .v2
        .as_ref()
        .expect("full factorizations carry the orthogonal completion");
    let (m, n) = xo.shape();
    let z = part.zeros.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let mut u_t = fact.u.clone();
        let mut v1_t = fact.v1.clone();
        for grp in &part.groups {
            let q = haar_orthogonal(grp.len(), &mut rng);
            mix_columns(&mut u_t, grp, &q);
            mix_columns(&mut v1_t, grp, &q);
        }
        if z > 0 {
            let q = haar_orthogonal(z, &mut rng);
            mix_columns(&mut u_t, &part.zeros, &q);
        }
        let width = z + (n - m);
        if width > 0 {
            let q = haar_orthogonal(width, &mut rng);
            let mut joint = DMatrix::zeros(n, width);
            for (c, &j) in part.zeros.iter().enumerate() {
                joint.column_mut(c).copy_from(&v1_t.column(j));
            }
            joint.view_mut((0, z), (n, n - m)).copy_from(v2);
            let mixed = &joint * &q;
            for (c, &j) in part.zeros.iter().enumerate() {
                v1_t.column_mut(j).copy_from(&mixed.column(c));
            }
        }
        let g_t = &u_t * &gd * v1_t.transpose();
        worst = worst.max((g_t - &g_ref).norm());
    }
    Ok(worst)
}

/// Samples difference quotients `‖G(X)−G(X′)‖/‖X−X′‖` over random pairs in
/// a ball of radius `1 + ‖X̄‖` around the base point and returns the
/// largest one observed.
pub fn lipschitz_estimate(
    g: &SymmetricMapping,
    x_bar: &DMatrix<f64>,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let hermitian = match g.signature().blocks() {
        [BlockKind::Sym(_)] => true,
        [BlockKind::Rect(_, _)] => false,
        _ => {
            return Err(Error::Shape(
                "modulus sampling needs a single-block signature".into(),
            ))
        }
    };
    let tols = Tolerances::default();
    let radius = 1.0 + x_bar.norm();
    let (nr, nc) = x_bar.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> DMatrix<f64> {
        let raw = DMatrix::from_fn(nr, nc, |_, _| rng.sample(StandardNormal));
        let scale: f64 = rng.random();
        x_bar + unit_direction(raw, hermitian) * (radius * scale)
    };
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let x1 = draw(&mut rng);
        let x2 = draw(&mut rng);
        let gap = (&x1 - &x2).norm();
        if gap == 0.0 {
            continue;
        }
        let g1 = eval_any(g, &x1, hermitian, &tols)?;
        let g2 = eval_any(g, &x2, hermitian, &tols)?;
        worst = worst.max((g1 - g2).norm() / gap);
    }
    Ok(worst)
}
