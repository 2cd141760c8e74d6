//! Directional derivative operators and sampled generalized derivative
//! elements of lifted mappings at arbitrary base points.
//!
//! The directional operator splits a direction into divided-difference
//! strips and tangent blocks, pushes the tangent blocks through the
//! derivative mapping of the underlying vector map, and lifts the result
//! back. Sampled elements replace that possibly nonlinear push by its
//! linearization at a random tangent perturbation, stabilized over a
//! decreasing radius schedule.

use crate::decomposition::{self, BlockPartition, SpectralFactorization, Tolerances};
use crate::error::{Error, Result};
use crate::mapping::{MappingMetadata, SymmetricMapping};
use crate::operator::{self, LinearMatrixMap};
use crate::space::{BlockKind, SpaceSignature};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::rc::Rc;

/// Certificate attached to an accepted sampled element: the rotations and
/// spectral direction of a smooth-point sequence realizing the element as a
/// derivative limit, plus the accepted linearization radius.
#[derive(Debug, Clone)]
pub struct ClarkeWitness {
    /// Left rotation, block diagonal over the tied groups and the zero rows.
    pub m_rot: DMatrix<f64>,
    /// Right rotation, block diagonal over the tied groups, the zero
    /// columns, and the orthogonal completion.
    pub n_rot: DMatrix<f64>,
    /// Spectrum of the unit-scale tangent sample, ordered like the base
    /// spectrum.
    pub kappa: DVector<f64>,
    /// Radius at which two consecutive linearizations agreed.
    pub radius: f64,
}

/// The directional derivative of a lifted mapping at a fixed base point, as
/// an operator on directions. Positively homogeneous, generally nonlinear
/// at nondifferentiable base points.
#[derive(Debug, Clone)]
pub struct DirectionalOperator {
    shape: (usize, usize),
    transposed: bool,
    fact: SpectralFactorization,
    part: BlockPartition,
    g_sigma: DVector<f64>,
    phi: SymmetricMapping,
    tols: Tolerances,
}

impl DirectionalOperator {
    /// Shape of accepted directions, matching the base point as given.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Partition of the base spectrum underlying the tangent split.
    pub fn partition(&self) -> &BlockPartition {
        &self.part
    }

    /// The derivative mapping acting on the tangent blocks.
    pub fn derivative_mapping(&self) -> &SymmetricMapping {
        &self.phi
    }

    /// Signature of the tangent product space.
    pub fn tangent_signature(&self) -> &SpaceSignature {
        self.phi.signature()
    }

    pub fn apply(&self, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if h.shape() != self.shape {
            return Err(Error::Shape(format!(
                "direction is {}x{}, base point is {}x{}",
                h.nrows(),
                h.ncols(),
                self.shape.0,
                self.shape.1
            )));
        }
        let ho = if self.transposed {
            h.transpose()
        } else {
            h.clone()
        };
        let strip = operator::strip_term(&self.fact, &self.part, &self.g_sigma, &ho)?;
        let d = operator::tangent_direction(&self.fact, &self.part, &ho)?;
        let pushed = operator::apply_mixed(&self.phi, &d.into_blocks(), &self.tols)?;
        let lift = operator::embed_tangent(&self.fact, &self.part, &pushed)?;
        let out = strip + lift;
        Ok(if self.transposed { out.transpose() } else { out })
    }
}

/// Builds the directional derivative operator of `g` at `x`. Requires a
/// directional derivative capability on `g`; a derivative mapping is used
/// when declared, otherwise the plain directional derivative closure.
pub fn psi_operator(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    tols: &Tolerances,
) -> Result<DirectionalOperator> {
    let transposed = x.nrows() > x.ncols();
    let xo = if transposed { x.transpose() } else { x.clone() };
    operator::expect_single_rect(g, xo.nrows(), xo.ncols())?;
    if !(g.has_dir_mapping() || g.has_dir_deriv()) {
        return Err(Error::CapabilityMissing(format!(
            "mapping '{}' provides no directional derivative",
            g.name()
        )));
    }
    let (fact, part) = decomposition::svd_full(&xo, tols)?;
    let g_sigma = g.eval(&fact.sigma)?;
    let tangent_sig = operator::tangent_signature(&part, xo.nrows(), xo.ncols())?;
    let phi = if g.has_dir_mapping() {
        g.dir_mapping(&fact.sigma, &tangent_sig)?
    } else {
        let base = fact.sigma.clone();
        let inner = g.clone();
        SymmetricMapping::new(
            format!("{}-dir", g.name()),
            tangent_sig,
            Rc::new(move |d: &DVector<f64>| inner.dir_deriv(&base, d)),
            MappingMetadata {
                lipschitz: g.metadata().lipschitz,
                directionally_differentiable: true,
                psi_hypothesis: g.metadata().psi_hypothesis,
            },
        )
    };
    Ok(DirectionalOperator {
        shape: (x.nrows(), x.ncols()),
        transposed,
        fact,
        part,
        g_sigma,
        phi,
        tols: *tols,
    })
}

/// Whether the lifted mapping is differentiable at `x`: the underlying map
/// must be differentiable at the spectrum of `x`.
pub fn is_smooth_point(g: &SymmetricMapping, x: &DMatrix<f64>, tols: &Tolerances) -> Result<bool> {
    match g.signature().blocks() {
        [BlockKind::Sym(_)] => {
            operator::expect_single_sym(g, x.nrows())?;
            let (fact, _) = decomposition::eig_sym(x, tols)?;
            g.is_smooth(&fact.lambda)
        }
        [BlockKind::Rect(_, _)] => {
            let xo = if x.nrows() > x.ncols() {
                x.transpose()
            } else {
                x.clone()
            };
            operator::expect_single_rect(g, xo.nrows(), xo.ncols())?;
            let (fact, _) = decomposition::svd_lowmem(&xo, tols)?;
            g.is_smooth(&fact.sigma)
        }
        _ => Err(Error::Shape(
            "smoothness of a single matrix argument needs a single-block signature".into(),
        )),
    }
}

/// One sampled-element action: the divided-difference strip plus the lifted
/// linearization of the derivative mapping at the tangent perturbation.
fn linearized_apply(
    fact: &SpectralFactorization,
    part: &BlockPartition,
    g_sigma: &DVector<f64>,
    phi: &SymmetricMapping,
    w_blocks: &[DMatrix<f64>],
    tols: &Tolerances,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let strip = operator::strip_term(fact, part, g_sigma, h)?;
    let d = operator::tangent_direction(fact, part, h)?;
    let pushed = operator::frechet_apply_mixed(phi, w_blocks, &d.into_blocks(), tols)?;
    let lift = operator::embed_tangent(fact, part, &pushed)?;
    Ok(strip + lift)
}

/// A unit-Frobenius random tangent tuple: symmetrized square blocks for the
/// tied groups, a dense block for the zero rows.
fn sample_tangent(rng: &mut ChaCha8Rng, sig: &SpaceSignature) -> Vec<DMatrix<f64>> {
    let mut blocks: Vec<DMatrix<f64>> = sig
        .blocks()
        .iter()
        .map(|kind| match *kind {
            BlockKind::Sym(k) => {
                let raw = DMatrix::from_fn(k, k, |_, _| rng.sample(StandardNormal));
                (&raw + raw.transpose()) * 0.5
            }
            BlockKind::Rect(p, q) => DMatrix::from_fn(p, q, |_, _| rng.sample(StandardNormal)),
        })
        .collect();
    let total = blocks
        .iter()
        .map(|b| b.norm_squared())
        .sum::<f64>()
        .sqrt();
    if total > 0.0 {
        for b in &mut blocks {
            *b /= total;
        }
    }
    blocks
}

/// Per-block spectra of a tangent tuple, concatenated in signature order.
fn tangent_spectrum(
    blocks: &[DMatrix<f64>],
    sig: &SpaceSignature,
    tols: &Tolerances,
) -> Result<DVector<f64>> {
    let mut vals: Vec<f64> = Vec::new();
    for (kind, b) in sig.blocks().iter().zip(blocks) {
        match kind {
            BlockKind::Sym(_) => {
                vals.extend(decomposition::eig_sym(b, tols)?.0.lambda.iter().copied());
            }
            BlockKind::Rect(_, _) => {
                vals.extend(decomposition::svd_lowmem(b, tols)?.0.sigma.iter().copied());
            }
        }
    }
    Ok(DVector::from_vec(vals))
}

/// Probe directions on which consecutive linearizations are compared: the
/// full canonical basis for small shapes, sixteen fixed-seed unit Gaussian
/// matrices otherwise.
fn probe_directions(m: usize, n: usize) -> Vec<DMatrix<f64>> {
    if m * n <= 64 {
        let mut probes = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                let mut e = DMatrix::zeros(m, n);
                e[(i, j)] = 1.0;
                probes.push(e);
            }
        }
        probes
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        (0..16)
            .map(|_| {
                let p: DMatrix<f64> = DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
                let norm = p.norm();
                p / norm
            })
            .collect()
    }
}

/// Block-diagonal rotations factoring the tangent sample: eigenvector bases
/// on the tied groups, singular bases on the zero block.
fn rotation_witness(
    w_blocks: &[DMatrix<f64>],
    sig: &SpaceSignature,
    m: usize,
    n: usize,
    radius: f64,
    tols: &Tolerances,
) -> Result<ClarkeWitness> {
    let mut m_rot = DMatrix::zeros(m, m);
    let mut n_rot = DMatrix::zeros(n, n);
    let mut kappa: Vec<f64> = Vec::with_capacity(m);
    let mut at_m = 0;
    let mut at_n = 0;
    for (kind, w) in sig.blocks().iter().zip(w_blocks) {
        match kind {
            BlockKind::Sym(k) => {
                let (fact, _) = decomposition::eig_sym(w, tols)?;
                m_rot.view_mut((at_m, at_m), (*k, *k)).copy_from(&fact.p);
                n_rot.view_mut((at_n, at_n), (*k, *k)).copy_from(&fact.p);
                kappa.extend(fact.lambda.iter().copied());
                at_m += k;
                at_n += k;
            }
            BlockKind::Rect(p, q) => {
                let (fact, _) = decomposition::svd_full(w, tols)?;
                m_rot.view_mut((at_m, at_m), (*p, *p)).copy_from(&fact.u);
                let v2 = fact
                    .v2
                    .as_ref()
                    .expect("full factorizations carry the orthogonal completion");
                n_rot
                    .view_mut((at_n, at_n), (*q, *p))
                    .copy_from(&fact.v1);
                n_rot
                    .view_mut((at_n, at_n + p), (*q, q - p))
                    .copy_from(v2);
                kappa.extend(fact.sigma.iter().copied());
                at_m += p;
                at_n += q;
            }
        }
    }
    Ok(ClarkeWitness {
        m_rot,
        n_rot,
        kappa: DVector::from_vec(kappa),
        radius,
    })
}

/// Draws one element of the generalized derivative of the lifted mapping at
/// `x`: the directional operator is linearized at a random smooth tangent
/// perturbation, and the linearization is accepted once two consecutive
/// radii of the schedule agree to `1e-8` on a probe basis. The returned map
/// carries a witness describing the accepted sample.
pub fn clarke_element(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    seed: u64,
    radius_schedule: Option<&[f64]>,
    tols: &Tolerances,
) -> Result<LinearMatrixMap> {
    let transposed = x.nrows() > x.ncols();
    let xo = if transposed { x.transpose() } else { x.clone() };
    operator::expect_single_rect(g, xo.nrows(), xo.ncols())?;
    if !g.metadata().psi_hypothesis {
        return Err(Error::CapabilityMissing(format!(
            "mapping '{}' does not declare the sampling hypotheses",
            g.name()
        )));
    }
    if !g.has_dir_mapping() {
        return Err(Error::CapabilityMissing(format!(
            "mapping '{}' provides no derivative mapping to linearize",
            g.name()
        )));
    }
    let (fact, part) = decomposition::svd_full(&xo, tols)?;
    let g_sigma = g.eval(&fact.sigma)?;
    let (om, on) = (xo.nrows(), xo.ncols());
    let tangent_sig = operator::tangent_signature(&part, om, on)?;
    let phi = g.dir_mapping(&fact.sigma, &tangent_sig)?;
    if !phi.has_jacobian() {
        return Err(Error::CapabilityMissing(format!(
            "derivative mapping of '{}' provides no jacobian",
            g.name()
        )));
    }
    let schedule: Vec<f64> = match radius_schedule {
        Some(s) => s.to_vec(),
        None => {
            let scale = 1.0 + xo.norm();
            [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
                .iter()
                .map(|t| t * scale)
                .collect()
        }
    };
    if schedule.len() < 2
        || schedule.iter().any(|&t| !(t > 0.0))
        || schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::BadParam(
            "the radius schedule must be positive, strictly decreasing, and have at least two entries"
                .into(),
        ));
    }
    let probes = probe_directions(om, on);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..60 {
        let w = sample_tangent(&mut rng, &tangent_sig);
        let kappa = match tangent_spectrum(&w, &tangent_sig, tols) {
            Ok(k) => k,
            Err(_) => continue,
        };
        // The derivative mapping must stay differentiable along the whole
        // schedule, so every linearization below is legitimate.
        if !schedule
            .iter()
            .all(|&t| phi.is_smooth(&(&kappa * t)).unwrap_or(false))
        {
            continue;
        }
        let mut prev: Option<Vec<DMatrix<f64>>> = None;
        let mut accepted: Option<f64> = None;
        for &t in &schedule {
            let wt: Vec<DMatrix<f64>> = w.iter().map(|b| b * t).collect();
            let images: Result<Vec<DMatrix<f64>>> = probes
                .iter()
                .map(|h| linearized_apply(&fact, &part, &g_sigma, &phi, &wt, tols, h))
                .collect();
            let images = match images {
                Ok(v) => v,
                Err(_) => break,
            };
            if let Some(prev_images) = &prev {
                let diff = images
                    .iter()
                    .zip(prev_images.iter())
                    .map(|(a, b)| (a - b).amax())
                    .fold(0.0_f64, f64::max);
                if diff <= 1e-8 {
                    accepted = Some(t);
                    break;
                }
            }
            prev = Some(images);
        }
        if let Some(t) = accepted {
            let witness = rotation_witness(&w, &tangent_sig, om, on, t, tols)?;
            let wt: Vec<DMatrix<f64>> = w.iter().map(|b| b * t).collect();
            let fact_c = fact.clone();
            let part_c = part.clone();
            let gs_c = g_sigma.clone();
            let phi_c = phi.clone();
            let tols_c = *tols;
            let apply_fn = Rc::new(move |h: &DMatrix<f64>| {
                let ho = if transposed { h.transpose() } else { h.clone() };
                let out = linearized_apply(&fact_c, &part_c, &gs_c, &phi_c, &wt, &tols_c, &ho)?;
                Ok(if transposed { out.transpose() } else { out })
            });
            return Ok(
                LinearMatrixMap::new((x.nrows(), x.ncols()), apply_fn).with_witness(witness)
            );
        }
    }
    Err(Error::NoSmoothPointFound(
        "no sampled tangent direction stayed smooth and stabilized within 60 attempts".into(),
    ))
}
