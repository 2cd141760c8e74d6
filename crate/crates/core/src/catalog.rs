//! Ready-made equivariant mappings: spectral shrinkage, positive-part
//! clipping, rank-correction rescaling, scalar lifts, ordered-simplex shape
//! projection, and the identity baseline.
//!
//! Every constructor takes the product-space signature the mapping will act
//! on, validates its parameters, and attaches whatever calculus capabilities
//! the mapping honestly supports.

use crate::error::{Error, Result};
use crate::mapping::{MappingMetadata, SymmetricMapping};
use crate::space::{BlockKind, SpaceSignature};
use nalgebra::{DMatrix, DVector};
use std::rc::Rc;

/// Width of the band around a kink inside which a point is classified as
/// nonsmooth and the one-sided derivative formula is used. Factorizations
/// reproduce constructed kink values only to a few ulps, so exact equality
/// would misclassify them.
const KINK_TOL: f64 = 1e-10;

/// Per-coordinate kink classification shared by the piecewise-linear maps.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Regime {
    /// Locally linear with slope 1.
    Free,
    /// At a kink; the sign says from which side slope 1 is approached.
    Kink(f64),
    /// Locally constant.
    Dead,
}

fn soft_regime(v: f64, tau: f64) -> Regime {
    let margin = v.abs() - tau;
    if margin > KINK_TOL {
        Regime::Free
    } else if margin < -KINK_TOL {
        Regime::Dead
    } else {
        Regime::Kink(if v >= 0.0 { 1.0 } else { -1.0 })
    }
}

fn clip_regime(v: f64) -> Regime {
    if v > KINK_TOL {
        Regime::Free
    } else if v < -KINK_TOL {
        Regime::Dead
    } else {
        Regime::Kink(1.0)
    }
}

fn regime_dir(regime: Regime, d: f64) -> f64 {
    match regime {
        Regime::Free => d,
        Regime::Kink(s) => s * (s * d).max(0.0),
        Regime::Dead => 0.0,
    }
}

/// Derivative mapping of a piecewise-linear map whose coordinates fall into
/// the given regimes: coordinatewise `regime_dir`, with the kink coordinates
/// of the tangent variable as its only nonsmoothness.
fn piecewise_dir_mapping(
    name: String,
    regimes: Vec<Regime>,
    tangent_sig: &SpaceSignature,
) -> Result<SymmetricMapping> {
    if tangent_sig.spectral_len() != regimes.len() {
        return Err(Error::Shape(format!(
            "tangent signature carries {} values, base point has {}",
            tangent_sig.spectral_len(),
            regimes.len()
        )));
    }
    let r_eval = regimes.clone();
    let r_jac = regimes.clone();
    let r_smooth = regimes;
    Ok(SymmetricMapping::new(
        name,
        tangent_sig.clone(),
        Rc::new(move |h: &DVector<f64>| {
            Ok(DVector::from_iterator(
                h.len(),
                h.iter().enumerate().map(|(i, &d)| regime_dir(r_eval[i], d)),
            ))
        }),
        MappingMetadata {
            lipschitz: Some(1.0),
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(
        Rc::new(move |h: &DVector<f64>| {
            Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                h.len(),
                h.iter().enumerate().map(|(i, &d)| match r_jac[i] {
                    Regime::Free => 1.0,
                    Regime::Kink(s) => {
                        if s * d > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Regime::Dead => 0.0,
                }),
            )))
        }),
        Rc::new(move |h: &DVector<f64>| {
            h.iter()
                .enumerate()
                .all(|(i, &d)| !matches!(r_smooth[i], Regime::Kink(_)) || d.abs() > KINK_TOL)
        }),
    ))
}

/// Shrinks every spectral value toward zero by `tau`, the proximal mapping
/// of `tau` times the sum of absolute values.
pub fn soft_threshold(tau: f64, sig: SpaceSignature) -> Result<SymmetricMapping> {
    if !(tau > 0.0) {
        return Err(Error::BadParam(format!("tau must be positive, got {tau}")));
    }
    let t_eval = tau;
    let t_jac = tau;
    let t_smooth = tau;
    let t_dir = tau;
    let t_map = tau;
    Ok(SymmetricMapping::new(
        format!("soft(tau={tau})"),
        sig,
        Rc::new(move |x: &DVector<f64>| {
            Ok(x.map(|v| v.signum() * (v.abs() - t_eval).max(0.0)))
        }),
        MappingMetadata {
            lipschitz: Some(1.0),
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(
        Rc::new(move |x: &DVector<f64>| {
            Ok(DMatrix::from_diagonal(
                &x.map(|v| if v.abs() > t_jac { 1.0 } else { 0.0 }),
            ))
        }),
        Rc::new(move |x: &DVector<f64>| {
            x.iter().all(|&v| (v.abs() - t_smooth).abs() > KINK_TOL)
        }),
    )
    .with_dir_deriv(Rc::new(move |x: &DVector<f64>, h: &DVector<f64>| {
        Ok(DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(h.iter())
                .map(|(&v, &d)| regime_dir(soft_regime(v, t_dir), d)),
        ))
    }))
    .with_dir_mapping(Rc::new(move |x: &DVector<f64>, tsig: &SpaceSignature| {
        let regimes = x.iter().map(|&v| soft_regime(v, t_map)).collect();
        piecewise_dir_mapping("soft-deriv".into(), regimes, tsig)
    })))
}

/// Positive part of every value: the eigenvalue map of the projection onto
/// the positive semidefinite cone. Symmetric blocks only.
pub fn psd_clip(sig: SpaceSignature) -> Result<SymmetricMapping> {
    if !sig.blocks().iter().all(|b| matches!(b, BlockKind::Sym(_))) {
        return Err(Error::BadParam(
            "positive-part clipping acts on symmetric blocks only".into(),
        ));
    }
    Ok(SymmetricMapping::new(
        "psdclip",
        sig,
        Rc::new(|x: &DVector<f64>| Ok(x.map(|v| v.max(0.0)))),
        MappingMetadata {
            lipschitz: Some(1.0),
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(
        Rc::new(|x: &DVector<f64>| {
            Ok(DMatrix::from_diagonal(
                &x.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            ))
        }),
        Rc::new(|x: &DVector<f64>| x.iter().all(|&v| v.abs() > KINK_TOL)),
    )
    .with_dir_deriv(Rc::new(|x: &DVector<f64>, h: &DVector<f64>| {
        Ok(DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(h.iter())
                .map(|(&v, &d)| regime_dir(clip_regime(v), d)),
        ))
    }))
    .with_dir_mapping(Rc::new(|x: &DVector<f64>, tsig: &SpaceSignature| {
        let regimes = x.iter().map(|&v| clip_regime(v)).collect();
        piecewise_dir_mapping("psdclip-deriv".into(), regimes, tsig)
    })))
}

/// Rank-correction rescaling: each value is passed through a sigmoidal gain
/// after normalization by the largest magnitude. Discontinuous at the
/// origin, and its Jacobian is genuinely asymmetric.
pub fn rank_correction(eps: f64, tau: f64, sig: SpaceSignature) -> Result<SymmetricMapping> {
    if !(eps > 0.0) || !(tau > 0.0) {
        return Err(Error::BadParam(format!(
            "eps and tau must be positive, got eps={eps}, tau={tau}"
        )));
    }
    let a = eps.powf(tau);
    let h = move |t: f64| t.signum() * (1.0 + a) * t.abs().powf(tau) / (t.abs().powf(tau) + a);
    let h_prime = move |t: f64| {
        let p = t.abs().powf(tau);
        (1.0 + a) * tau * a * t.abs().powf(tau - 1.0) / ((p + a) * (p + a))
    };
    let smooth = move |x: &DVector<f64>| {
        let s = x.amax();
        if s <= 0.0 {
            return false;
        }
        let mut top = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &v in x.iter() {
            let m = v.abs();
            if m > top {
                second = top;
                top = m;
            } else if m > second {
                second = m;
            }
        }
        x.len() == 1 || top - second > 1e-9 * s
    };
    Ok(SymmetricMapping::new(
        format!("rankcorr(eps={eps},tau={tau})"),
        sig,
        Rc::new(move |x: &DVector<f64>| {
            let s = x.amax();
            if s == 0.0 {
                return Ok(DVector::zeros(x.len()));
            }
            Ok(x.map(|v| h(v / s)))
        }),
        MappingMetadata {
            lipschitz: None,
            directionally_differentiable: false,
            psi_hypothesis: false,
        },
    )
    .with_jacobian(
        Rc::new(move |x: &DVector<f64>| {
            let s = x.amax();
            let jstar = (0..x.len())
                .max_by(|&i, &t| x[i].abs().partial_cmp(&x[t].abs()).unwrap())
                .expect("nonempty spectrum");
            let sign_star = if x[jstar] >= 0.0 { 1.0 } else { -1.0 };
            let mut j = DMatrix::zeros(x.len(), x.len());
            for i in 0..x.len() {
                let slope = h_prime(x[i] / s);
                j[(i, i)] += slope / s;
                j[(i, jstar)] -= slope * sign_star * x[i] / (s * s);
            }
            Ok(j)
        }),
        Rc::new(smooth),
    ))
}

fn build_loewner(
    name: String,
    h: Rc<dyn Fn(f64) -> f64>,
    h_prime: Rc<dyn Fn(f64) -> f64>,
    sig: SpaceSignature,
    lipschitz: Option<f64>,
) -> Result<SymmetricMapping> {
    if sig.blocks().iter().any(|b| matches!(b, BlockKind::Rect(_, _))) {
        if h(0.0).abs() > 1e-12 {
            return Err(Error::BadParam(
                "rectangular blocks require a scalar function vanishing at zero".into(),
            ));
        }
        for t in [0.7, 1.9] {
            if (h(t) + h(-t)).abs() > 1e-12 * (1.0 + h(t).abs()) {
                return Err(Error::BadParam(
                    "rectangular blocks require an odd scalar function".into(),
                ));
            }
        }
    }
    let h_eval = h.clone();
    let hp_jac = h_prime.clone();
    let hp_dir = h_prime.clone();
    let hp_map = h_prime;
    Ok(SymmetricMapping::new(
        name,
        sig,
        Rc::new(move |x: &DVector<f64>| Ok(x.map(|v| h_eval(v)))),
        MappingMetadata {
            lipschitz,
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(
        Rc::new(move |x: &DVector<f64>| {
            Ok(DMatrix::from_diagonal(&x.map(|v| hp_jac(v))))
        }),
        Rc::new(|_: &DVector<f64>| true),
    )
    .with_dir_deriv(Rc::new(move |x: &DVector<f64>, d: &DVector<f64>| {
        Ok(DVector::from_iterator(
            x.len(),
            x.iter().zip(d.iter()).map(|(&v, &dv)| hp_dir(v) * dv),
        ))
    }))
    .with_dir_mapping(Rc::new(move |x: &DVector<f64>, tsig: &SpaceSignature| {
        if tsig.spectral_len() != x.len() {
            return Err(Error::Shape(format!(
                "tangent signature carries {} values, base point has {}",
                tsig.spectral_len(),
                x.len()
            )));
        }
        let slopes = x.map(|v| hp_map(v));
        let s_eval = slopes.clone();
        let s_jac = slopes;
        Ok(SymmetricMapping::new(
            "scalar-lift-deriv",
            tsig.clone(),
            Rc::new(move |d: &DVector<f64>| Ok(d.component_mul(&s_eval))),
            MappingMetadata {
                lipschitz: None,
                directionally_differentiable: true,
                psi_hypothesis: true,
            },
        )
        .with_jacobian(
            Rc::new(move |_: &DVector<f64>| Ok(DMatrix::from_diagonal(&s_jac))),
            Rc::new(|_: &DVector<f64>| true),
        ))
    })))
}

/// Lifts a smooth scalar function to every spectral value. Rectangular
/// blocks require the function to be odd and vanish at zero.
pub fn loewner(
    h: Rc<dyn Fn(f64) -> f64>,
    h_prime: Rc<dyn Fn(f64) -> f64>,
    sig: SpaceSignature,
) -> Result<SymmetricMapping> {
    build_loewner("loewner".into(), h, h_prime, sig, None)
}

/// Scalar-lift preset: cube each value.
pub fn loewner_cube(sig: SpaceSignature) -> Result<SymmetricMapping> {
    build_loewner(
        "loewner(cube)".into(),
        Rc::new(|t| t * t * t),
        Rc::new(|t| 3.0 * t * t),
        sig,
        None,
    )
}

/// Scalar-lift preset: multiply every value by `c`.
pub fn loewner_scale(c: f64, sig: SpaceSignature) -> Result<SymmetricMapping> {
    build_loewner(
        format!("loewner(scale,c={c})"),
        Rc::new(move |t| c * t),
        Rc::new(move |_| c),
        sig,
        Some(c.abs()),
    )
}

/// Leaves every spectral value unchanged.
pub fn identity(sig: SpaceSignature) -> Result<SymmetricMapping> {
    Ok(SymmetricMapping::new(
        "identity",
        sig,
        Rc::new(|x: &DVector<f64>| Ok(x.clone())),
        MappingMetadata {
            lipschitz: Some(1.0),
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(
        Rc::new(|x: &DVector<f64>| Ok(DMatrix::identity(x.len(), x.len()))),
        Rc::new(|_: &DVector<f64>| true),
    )
    .with_dir_deriv(Rc::new(|_: &DVector<f64>, h: &DVector<f64>| Ok(h.clone())))
    .with_dir_mapping(Rc::new(|_: &DVector<f64>, tsig: &SpaceSignature| {
        identity(tsig.clone())
    })))
}

/// Outcome of the ordered-simplex projection on presorted values.
struct SortedProjection {
    y: Vec<f64>,
    /// Consecutive runs of equal entries among the leading `k`, each run
    /// tagged with whether it is pinned to zero.
    blocks: Vec<(Vec<usize>, bool)>,
    kkt_residual: f64,
    strict_complementarity_margin: f64,
}

/// Projects presorted values `a` (nonincreasing order assumed for the
/// leading `k`) onto the set `sum(y[..k]) = 1`, `y[0] >= ... >= y[k-1] >= 0`,
/// `y[k..] = 0`, by enumerating the `2^k` candidate active sets of the
/// inequality constraints and keeping the feasible candidate of least cost.
fn project_sorted(a: &[f64], k: usize) -> Result<SortedProjection> {
    let m = a.len();
    let feas_tol = 1e-12;
    let mut best: Option<(f64, Vec<f64>, Vec<(Vec<usize>, bool)>)> = None;
    for mask in 0u32..(1u32 << k) {
        // Bit i < k-1 activates y_i = y_{i+1}; bit k-1 activates y_{k-1} = 0.
        let mut blocks: Vec<(Vec<usize>, bool)> = Vec::new();
        let mut current = vec![0usize];
        for i in 0..k {
            let chained = i + 1 < k && (mask >> i) & 1 == 1;
            if chained {
                current.push(i + 1);
            } else {
                let pinned = current.contains(&(k - 1)) && (mask >> (k - 1)) & 1 == 1;
                blocks.push((std::mem::take(&mut current), pinned));
                if i + 1 < k {
                    current = vec![i + 1];
                }
            }
        }
        let free_count: usize = blocks
            .iter()
            .filter(|(_, pinned)| !pinned)
            .map(|(b, _)| b.len())
            .sum();
        let mut y = vec![0.0; m];
        if free_count == 0 {
            // Everything pinned to zero cannot satisfy the sum constraint.
            continue;
        }
        let free_sum: f64 = blocks
            .iter()
            .filter(|(_, pinned)| !pinned)
            .flat_map(|(b, _)| b.iter().map(|&i| a[i]))
            .sum();
        let nu = (free_sum - 1.0) / free_count as f64;
        for (block, pinned) in &blocks {
            if *pinned {
                continue;
            }
            let mean: f64 = block.iter().map(|&i| a[i]).sum::<f64>() / block.len() as f64;
            for &i in block {
                y[i] = mean - nu;
            }
        }
        let feasible = (0..k).all(|i| {
            let upper = if i == 0 { f64::INFINITY } else { y[i - 1] };
            y[i] >= -feas_tol && y[i] <= upper + feas_tol
        });
        if !feasible {
            continue;
        }
        let cost: f64 = (0..k).map(|i| (y[i] - a[i]) * (y[i] - a[i])).sum();
        if best.as_ref().map(|(c, _, _)| cost < *c).unwrap_or(true) {
            best = Some((cost, y, blocks));
        }
    }
    let (_, y, blocks) = best.ok_or_else(|| {
        Error::SolverFailure("no feasible candidate in the active-set enumeration".into())
    })?;

    // Multipliers from stationarity: mu_i = (y_i - a_i) + nu + mu_{i-1},
    // where constraint i < k-1 is y_i >= y_{i+1} and constraint k-1 is
    // y_{k-1} >= 0. Dual feasibility and complementarity certify optimality.
    let free_idx: Vec<usize> = blocks
        .iter()
        .filter(|(_, pinned)| !pinned)
        .flat_map(|(b, _)| b.iter().copied())
        .collect();
    let nu = if free_idx.is_empty() {
        0.0
    } else {
        free_idx.iter().map(|&i| a[i] - y[i]).sum::<f64>() / free_idx.len() as f64
    };
    let mut residual: f64 = 0.0;
    let mut strict_margin = f64::INFINITY;
    let mut mu_prev = 0.0;
    for i in 0..k {
        let mu = (y[i] - a[i]) + nu + mu_prev;
        let slack = if i + 1 < k { y[i] - y[i + 1] } else { y[i] };
        residual = residual.max(-mu).max((mu * slack).abs());
        strict_margin = strict_margin.min(mu.max(0.0) + slack.max(0.0));
        mu_prev = mu;
    }
    Ok(SortedProjection {
        y,
        blocks,
        kkt_residual: residual.max(0.0),
        strict_complementarity_margin: strict_margin,
    })
}

/// Projection onto rank-`k` shape vectors: the closest vector whose leading
/// `k` sorted entries are nonincreasing, nonnegative, and sum to one, with
/// all remaining entries zero. Acts on a single symmetric block.
pub fn shape_projection(k: usize, sig: SpaceSignature) -> Result<SymmetricMapping> {
    if !sig.is_single_sym() {
        return Err(Error::BadParam(
            "shape projection acts on a single symmetric block".into(),
        ));
    }
    let m = sig.spectral_len();
    if k < 1 || k > m {
        return Err(Error::BadParam(format!(
            "rank k={k} must satisfy 1 <= k <= {m}"
        )));
    }
    if k > 12 {
        return Err(Error::SolverFailure(format!(
            "active-set enumeration is limited to k <= 12, got {k}"
        )));
    }
    let sort_desc = |x: &DVector<f64>| {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&i, &t| x[t].partial_cmp(&x[i]).unwrap());
        let a: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        (order, a)
    };
    let k_eval = k;
    let k_jac = k;
    let k_smooth = k;
    Ok(SymmetricMapping::new(
        format!("shape(k={k})"),
        sig,
        Rc::new(move |x: &DVector<f64>| {
            let (order, a) = sort_desc(x);
            let proj = project_sorted(&a, k_eval)?;
            if proj.kkt_residual > 1e-10 {
                return Err(Error::SolverFailure(format!(
                    "projection optimality residual {:.3e} exceeds 1e-10",
                    proj.kkt_residual
                )));
            }
            let mut y = DVector::zeros(x.len());
            for (pos, &orig) in order.iter().enumerate() {
                y[orig] = proj.y[pos];
            }
            Ok(y)
        }),
        MappingMetadata {
            lipschitz: None,
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(
        Rc::new(move |x: &DVector<f64>| {
            let (order, a) = sort_desc(x);
            let proj = project_sorted(&a, k_jac)?;
            let mlen = x.len();
            let free: Vec<usize> = proj
                .blocks
                .iter()
                .filter(|(_, pinned)| !pinned)
                .flat_map(|(b, _)| b.iter().copied())
                .collect();
            let mut js = DMatrix::zeros(mlen, mlen);
            for (block, pinned) in &proj.blocks {
                if *pinned {
                    continue;
                }
                for &i in block {
                    for &t in block {
                        js[(i, t)] += 1.0 / block.len() as f64;
                    }
                    for &t in &free {
                        js[(i, t)] -= 1.0 / free.len() as f64;
                    }
                }
            }
            // Undo the sort: entry (orig_i, orig_t) reads the sorted entry.
            let mut j = DMatrix::zeros(mlen, mlen);
            for (pos_i, &orig_i) in order.iter().enumerate() {
                for (pos_t, &orig_t) in order.iter().enumerate() {
                    j[(orig_i, orig_t)] = js[(pos_i, pos_t)];
                }
            }
            Ok(j)
        }),
        Rc::new(move |x: &DVector<f64>| {
            let (_, a) = sort_desc(x);
            let scale = x.amax().max(1.0);
            if (1..a.len()).any(|i| a[i - 1] - a[i] <= 1e-9 * scale) {
                return false;
            }
            match project_sorted(&a, k_smooth) {
                Ok(p) => {
                    p.kkt_residual <= 1e-10 && p.strict_complementarity_margin > 1e-9
                }
                Err(_) => false,
            }
        }),
    ))
}

/// A named catalog mapping with a human-readable note.
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: String,
    pub mapping: SymmetricMapping,
    pub note: &'static str,
}

/// Default-parameter catalog instances applicable to the given signature.
pub fn standard_entries(sig: &SpaceSignature) -> Result<Vec<CatalogEntry>> {
    let mut entries = vec![
        CatalogEntry {
            name: "soft",
            params: "tau=0.5".into(),
            mapping: soft_threshold(0.5, sig.clone())?,
            note: "shrinks each spectral value toward zero by tau",
        },
        CatalogEntry {
            name: "rankcorr",
            params: "eps=1,tau=1".into(),
            mapping: rank_correction(1.0, 1.0, sig.clone())?,
            note: "sigmoidal gain after normalization by the largest magnitude",
        },
        CatalogEntry {
            name: "loewner",
            params: "preset=cube".into(),
            mapping: loewner_cube(sig.clone())?,
            note: "cubes each spectral value",
        },
        CatalogEntry {
            name: "identity",
            params: String::new(),
            mapping: identity(sig.clone())?,
            note: "leaves the argument unchanged",
        },
    ];
    if sig.blocks().iter().all(|b| matches!(b, BlockKind::Sym(_))) {
        entries.push(CatalogEntry {
            name: "psdclip",
            params: String::new(),
            mapping: psd_clip(sig.clone())?,
            note: "positive part of each eigenvalue",
        });
        if sig.is_single_sym() {
            let k = sig.spectral_len().min(2);
            entries.push(CatalogEntry {
                name: "shape",
                params: format!("k={k}"),
                mapping: shape_projection(k, sig.clone())?,
                note: "nearest ordered-simplex shape vector of rank k",
            });
        }
    }
    Ok(entries)
}

/// Parses a mapping description of the form `name` or `name:key=val,...`.
pub fn parse_g_spec(spec: &str, sig: SpaceSignature) -> Result<SymmetricMapping> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (spec.trim(), ""),
    };
    let mut params: Vec<(String, String)> = Vec::new();
    if !rest.is_empty() {
        for piece in rest.split(',') {
            let (key, val) = piece.split_once('=').ok_or_else(|| {
                Error::BadParam(format!("malformed parameter '{piece}' (expected key=value)"))
            })?;
            params.push((key.trim().to_string(), val.trim().to_string()));
        }
    }
    let float = |params: &[(String, String)], key: &str| -> Result<f64> {
        let raw = params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::BadParam(format!("{name} requires parameter {key}")))?;
        raw.parse::<f64>()
            .map_err(|_| Error::BadParam(format!("parameter {key}='{raw}' is not a number")))
    };
    let known = |params: &[(String, String)], allowed: &[&str]| -> Result<()> {
        for (k, _) in params {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::BadParam(format!(
                    "unknown parameter '{k}' for {name}"
                )));
            }
        }
        Ok(())
    };
    match name {
        "identity" => {
            known(&params, &[])?;
            identity(sig)
        }
        "soft" => {
            known(&params, &["tau"])?;
            soft_threshold(float(&params, "tau")?, sig)
        }
        "psdclip" => {
            known(&params, &[])?;
            psd_clip(sig)
        }
        "rankcorr" => {
            known(&params, &["eps", "tau"])?;
            rank_correction(float(&params, "eps")?, float(&params, "tau")?, sig)
        }
        "loewner" => {
            known(&params, &["preset", "c"])?;
            let preset = params
                .iter()
                .find(|(k, _)| k == "preset")
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::BadParam("loewner requires preset=cube|scale".into()))?;
            match preset {
                "cube" => loewner_cube(sig),
                "scale" => loewner_scale(float(&params, "c")?, sig),
                other => Err(Error::BadParam(format!("unknown loewner preset '{other}'"))),
            }
        }
        "shape" => {
            known(&params, &["k"])?;
            let kf = float(&params, "k")?;
            if kf.fract() != 0.0 || kf < 1.0 {
                return Err(Error::BadParam(format!("k={kf} is not a positive integer")));
            }
            shape_projection(kf as usize, sig)
        }
        other => Err(Error::BadParam(format!("unknown mapping '{other}'"))),
    }
}
