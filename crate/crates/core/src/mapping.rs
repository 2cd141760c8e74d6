//! Spectral-value mappings and their calculus capabilities.
//!
//! A [`SymmetricMapping`] is a function on the flattened spectral vector of a
//! product space. It must commute with the symmetry group of that space:
//! coordinate permutations within each symmetric block and signed
//! permutations within each rectangular block. Optional capabilities
//! (Jacobian, smoothness test, directional derivative, derivative mapping)
//! unlock the corresponding matrix-space operations downstream.

use crate::error::{Error, Result};
use crate::space::{BlockKind, SpaceSignature};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::rc::Rc;

pub type EvalFn = Rc<dyn Fn(&DVector<f64>) -> Result<DVector<f64>>>;
pub type JacFn = Rc<dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>>>;
pub type SmoothFn = Rc<dyn Fn(&DVector<f64>) -> bool>;
pub type DirFn = Rc<dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>>;
pub type DirMapFn = Rc<dyn Fn(&DVector<f64>, &SpaceSignature) -> Result<SymmetricMapping>>;

/// Analytic facts about a mapping that calling code may rely on.
#[derive(Debug, Clone, Copy)]
pub struct MappingMetadata {
    /// Global Lipschitz constant when one is known.
    pub lipschitz: Option<f64>,
    /// Whether one-sided directional derivatives exist everywhere.
    pub directionally_differentiable: bool,
    /// Whether the mapping satisfies the regularity needed for generalized
    /// Jacobian sampling: locally Lipschitz, directionally differentiable,
    /// with a derivative mapping that is itself spectral over the tangent
    /// space at every point.
    pub psi_hypothesis: bool,
}

impl Default for MappingMetadata {
    fn default() -> Self {
        MappingMetadata {
            lipschitz: None,
            directionally_differentiable: false,
            psi_hypothesis: false,
        }
    }
}

/// A mapping on spectral vectors, equivariant under the space's symmetry group.
#[derive(Clone)]
pub struct SymmetricMapping {
    name: String,
    signature: SpaceSignature,
    eval_fn: EvalFn,
    jac_fn: Option<JacFn>,
    smooth_fn: Option<SmoothFn>,
    dir_fn: Option<DirFn>,
    dir_map_fn: Option<DirMapFn>,
    metadata: MappingMetadata,
}

impl fmt::Debug for SymmetricMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricMapping")
            .field("name", &self.name)
            .field("signature", &self.signature)
            .field("metadata", &self.metadata)
            .finish()
    }
}

impl SymmetricMapping {
    pub fn new(
        name: impl Into<String>,
        signature: SpaceSignature,
        eval_fn: EvalFn,
        metadata: MappingMetadata,
    ) -> Self {
        SymmetricMapping {
            name: name.into(),
            signature,
            eval_fn,
            jac_fn: None,
            smooth_fn: None,
            dir_fn: None,
            dir_map_fn: None,
            metadata,
        }
    }

    /// Attaches a Jacobian together with the smoothness predicate guarding it.
    pub fn with_jacobian(mut self, jac_fn: JacFn, smooth_fn: SmoothFn) -> Self {
        self.jac_fn = Some(jac_fn);
        self.smooth_fn = Some(smooth_fn);
        self
    }

    /// Attaches a one-sided directional derivative `(x, h) -> g'(x; h)`.
    pub fn with_dir_deriv(mut self, dir_fn: DirFn) -> Self {
        self.dir_fn = Some(dir_fn);
        self
    }

    /// Attaches a factory producing the derivative mapping `h -> g'(x; h)` as
    /// a [`SymmetricMapping`] over a caller-supplied tangent-space signature.
    pub fn with_dir_mapping(mut self, dir_map_fn: DirMapFn) -> Self {
        self.dir_map_fn = Some(dir_map_fn);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn metadata(&self) -> &MappingMetadata {
        &self.metadata
    }

    fn check_len(&self, x: &DVector<f64>, what: &str) -> Result<()> {
        let want = self.signature.spectral_len();
        if x.len() != want {
            return Err(Error::Shape(format!(
                "{}: {what} has length {}, signature expects {want}",
                self.name,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x, "input")?;
        let y = (self.eval_fn)(x)?;
        debug_assert_eq!(y.len(), x.len());
        Ok(y)
    }

    /// Whether the mapping is differentiable at `x`. Fails with
    /// `CapabilityMissing` when no smoothness predicate was attached.
    pub fn is_smooth(&self, x: &DVector<f64>) -> Result<bool> {
        self.check_len(x, "input")?;
        let f = self.smooth_fn.as_ref().ok_or_else(|| {
            Error::CapabilityMissing(format!("{} has no smoothness predicate", self.name))
        })?;
        Ok(f(x))
    }

    /// Jacobian at a smooth point. Fails with `NotSmooth` at kinks.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(x, "input")?;
        let jac = self.jac_fn.as_ref().ok_or_else(|| {
            Error::CapabilityMissing(format!("{} has no jacobian", self.name))
        })?;
        if let Some(smooth) = &self.smooth_fn {
            if !smooth(x) {
                return Err(Error::NotSmooth(format!(
                    "{} is not differentiable at the given point",
                    self.name
                )));
            }
        }
        let j = jac(x)?;
        debug_assert_eq!(j.shape(), (x.len(), x.len()));
        Ok(j)
    }

    /// One-sided directional derivative `g'(x; h)`.
    pub fn dir_deriv(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x, "input")?;
        self.check_len(h, "direction")?;
        let f = self.dir_fn.as_ref().ok_or_else(|| {
            Error::CapabilityMissing(format!("{} has no directional derivative", self.name))
        })?;
        f(x, h)
    }

    /// Derivative mapping `h -> g'(x; h)` as a mapping over `tangent_sig`.
    pub fn dir_mapping(
        &self,
        x: &DVector<f64>,
        tangent_sig: &SpaceSignature,
    ) -> Result<SymmetricMapping> {
        self.check_len(x, "input")?;
        let f = self.dir_map_fn.as_ref().ok_or_else(|| {
            Error::CapabilityMissing(format!("{} has no derivative mapping", self.name))
        })?;
        f(x, tangent_sig)
    }

    pub fn has_jacobian(&self) -> bool {
        self.jac_fn.is_some()
    }

    pub fn has_dir_deriv(&self) -> bool {
        self.dir_fn.is_some()
    }

    pub fn has_dir_mapping(&self) -> bool {
        self.dir_map_fn.is_some()
    }
}

/// One equivariance failure observed by [`check_mixed_symmetry`].
#[derive(Debug, Clone)]
pub struct SymmetryWitness {
    pub point: DVector<f64>,
    pub transformed: DVector<f64>,
    pub violation: f64,
}

/// Outcome of randomized equivariance testing.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub trials: usize,
    pub max_violation: f64,
    pub witnesses: Vec<SymmetryWitness>,
}

const WITNESS_THRESHOLD: f64 = 1e-12;
const MAX_WITNESSES: usize = 10;

/// Draws random symmetry-group elements (per-block permutations, with signs
/// on rectangular blocks) and measures `max ||g(Qx) - Q g(x)||_inf`.
pub fn check_mixed_symmetry(
    g: &SymmetricMapping,
    points: &[DVector<f64>],
    trials_per_point: usize,
    seed: u64,
) -> Result<SymmetryReport> {
    let sig = g.signature().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    let mut witnesses = Vec::new();
    let mut trials = 0;
    for x in points {
        let gx = g.eval(x)?;
        for _ in 0..trials_per_point {
            let (perm, signs) = random_group_element(&sig, &mut rng);
            let qx = apply_group_element(x, &perm, &signs);
            let q_gx = apply_group_element(&gx, &perm, &signs);
            let g_qx = g.eval(&qx)?;
            let violation = (g_qx - q_gx).amax();
            trials += 1;
            if violation > max_violation {
                max_violation = violation;
            }
            if violation > WITNESS_THRESHOLD && witnesses.len() < MAX_WITNESSES {
                witnesses.push(SymmetryWitness {
                    point: x.clone(),
                    transformed: qx,
                    violation,
                });
            }
        }
    }
    Ok(SymmetryReport {
        trials,
        max_violation,
        witnesses,
    })
}

fn random_group_element(
    sig: &SpaceSignature,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<f64>) {
    let total = sig.spectral_len();
    let mut perm: Vec<usize> = (0..total).collect();
    let mut signs = vec![1.0; total];
    for (k, block) in sig.blocks().iter().enumerate() {
        let range = sig.spectral_range(k).expect("block index in range");
        let slice = &mut perm[range.clone()];
        slice.shuffle(rng);
        if let BlockKind::Rect(_, _) = block {
            for i in range {
                if rng.random_bool(0.5) {
                    signs[i] = -1.0;
                }
            }
        }
    }
    (perm, signs)
}

fn apply_group_element(x: &DVector<f64>, perm: &[usize], signs: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), (0..x.len()).map(|i| signs[i] * x[perm[i]]))
}

/// Central-difference Jacobian estimate with the given step.
pub fn fd_jacobian(g: &SymmetricMapping, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += step;
        xm[col] -= step;
        let diff = (g.eval(&xp)? - g.eval(&xm)?) / (2.0 * step);
        j.set_column(col, &diff);
    }
    Ok(j)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum UnitLabel {
    Group(usize, usize),
    Zero(usize),
}

/// Labels each spectral index by (block, tie-class), with a zero class for
/// rectangular blocks. Values need not be sorted.
fn unit_labels(sig: &SpaceSignature, x: &DVector<f64>, tie_tol: f64) -> Vec<UnitLabel> {
    let mut labels = vec![UnitLabel::Zero(usize::MAX); x.len()];
    for (k, block) in sig.blocks().iter().enumerate() {
        let range = sig.spectral_range(k).expect("block index in range");
        let idx: Vec<usize> = range.clone().collect();
        let max_abs = idx.iter().map(|&i| x[i].abs()).fold(0.0_f64, f64::max);
        let zero_threshold = match block {
            BlockKind::Rect(_, _) => Some(1e-11 * max_abs),
            BlockKind::Sym(_) => None,
        };
        let mut order = idx.clone();
        order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap());
        let mut group = 0;
        let mut lead: Option<f64> = None;
        for &i in &order {
            if let Some(zt) = zero_threshold {
                if x[i].abs() <= zt {
                    labels[i] = UnitLabel::Zero(k);
                    continue;
                }
            }
            match lead {
                Some(v) if v - x[i] <= tie_tol * v.abs().max(1.0) => {}
                Some(_) => {
                    group += 1;
                    lead = Some(x[i]);
                }
                None => lead = Some(x[i]),
            }
            labels[i] = UnitLabel::Group(k, group);
        }
    }
    labels
}

const STRUCTURE_CHECK_TOL: f64 = 1e-10;

/// Verifies the structural identities a mixed-symmetric Jacobian must satisfy:
/// equal diagonal entries on tied values, off-diagonal entries constant on
/// each pair of tie classes, and zero off-diagonal rows and columns at
/// vanishing singular values of rectangular blocks. All comparisons are
/// absolute with tolerance `1e-10`.
pub fn jacobian_structure_check(g: &SymmetricMapping, x: &DVector<f64>) -> Result<bool> {
    let j = g.jacobian(x)?;
    let labels = unit_labels(g.signature(), x, 1e-9);
    let n = x.len();

    for i in 0..n {
        for t in 0..n {
            if labels[i] == labels[t] && (j[(i, i)] - j[(t, t)]).abs() > STRUCTURE_CHECK_TOL {
                return Ok(false);
            }
        }
    }
    for i in 0..n {
        if let UnitLabel::Zero(_) = labels[i] {
            for t in 0..n {
                if t == i {
                    continue;
                }
                if j[(i, t)].abs() > STRUCTURE_CHECK_TOL || j[(t, i)].abs() > STRUCTURE_CHECK_TOL {
                    return Ok(false);
                }
            }
        }
    }
    for i in 0..n {
        for t in 0..n {
            if t == i {
                continue;
            }
            for i2 in 0..n {
                for t2 in 0..n {
                    if t2 == i2 || (i2 == i && t2 == t) {
                        continue;
                    }
                    if labels[i2] == labels[i]
                        && labels[t2] == labels[t]
                        && (j[(i, t)] - j[(i2, t2)]).abs() > STRUCTURE_CHECK_TOL
                    {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
