//! Lifting vector mappings to matrix arguments: evaluation through the
//! factorization, derivative application in dense and low-memory form,
//! directional derivatives at possibly nonsmooth points, product-space
//! variants with cross-block coupling, and the induced proximal calculus.
//!
//! Rectangular entry points accept arguments with more rows than columns by
//! transposing on the way in and out; the mapping signature always describes
//! the wide orientation. Product-space entry points require the exact block
//! orientation of their signature.

use crate::decomposition::{
    self, BlockPartition, EigenFactorization, SpectralFactorization, Tolerances,
};
use crate::error::{Error, Result};
use crate::jacobian::{self, ClarkeWitness};
use crate::kernels;
use crate::mapping::SymmetricMapping;
use crate::space::{BlockKind, SpaceSignature};
use nalgebra::{DMatrix, DVector};
use std::rc::Rc;

/// Tangent data of a factored base point: one symmetric matrix per tied
/// group of nonzero spectral values, and one rectangular block coupling the
/// zero rows to the zero columns and the orthogonal completion.
#[derive(Debug, Clone)]
pub struct BlockDirection {
    pub sym_blocks: Vec<DMatrix<f64>>,
    pub rect_block: DMatrix<f64>,
}

impl BlockDirection {
    /// The blocks in signature order: tied groups first, then the
    /// rectangular zero block.
    pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
        let mut blocks = self.sym_blocks;
        blocks.push(self.rect_block);
        blocks
    }
}

/// A linear map on a matrix space carried as a closure, with an optional
/// adjoint and an optional certificate describing how a sampled map was
/// stabilized.
#[derive(Clone)]
pub struct LinearMatrixMap {
    shape: (usize, usize),
    apply_fn: Rc<dyn Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>>,
    adjoint_fn: Option<Rc<dyn Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>>>,
    witness: Option<ClarkeWitness>,
}

impl LinearMatrixMap {
    pub fn new(
        shape: (usize, usize),
        apply_fn: Rc<dyn Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>>,
    ) -> Self {
        LinearMatrixMap {
            shape,
            apply_fn,
            adjoint_fn: None,
            witness: None,
        }
    }

    pub fn with_adjoint(
        mut self,
        adjoint_fn: Rc<dyn Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>>,
    ) -> Self {
        self.adjoint_fn = Some(adjoint_fn);
        self
    }

    pub(crate) fn with_witness(mut self, witness: ClarkeWitness) -> Self {
        self.witness = Some(witness);
        self
    }

    /// Shape of both the argument and the image.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn apply(&self, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if h.shape() != self.shape {
            return Err(Error::Shape(format!(
                "argument is {}x{}, map acts on {}x{}",
                h.nrows(),
                h.ncols(),
                self.shape.0,
                self.shape.1
            )));
        }
        (self.apply_fn)(h)
    }

    pub fn has_adjoint(&self) -> bool {
        self.adjoint_fn.is_some()
    }

    pub fn adjoint(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let adj = self.adjoint_fn.as_ref().ok_or_else(|| {
            Error::CapabilityMissing("this linear map carries no adjoint".into())
        })?;
        if w.shape() != self.shape {
            return Err(Error::Shape(format!(
                "argument is {}x{}, map acts on {}x{}",
                w.nrows(),
                w.ncols(),
                self.shape.0,
                self.shape.1
            )));
        }
        adj(w)
    }

    /// Certificate attached to sampled generalized derivative elements.
    pub fn witness(&self) -> Option<&ClarkeWitness> {
        self.witness.as_ref()
    }
}

impl std::fmt::Debug for LinearMatrixMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearMatrixMap")
            .field("shape", &self.shape)
            .field("has_adjoint", &self.adjoint_fn.is_some())
            .field("witness", &self.witness)
            .finish()
    }
}

pub(crate) fn expect_single_rect(g: &SymmetricMapping, m: usize, n: usize) -> Result<()> {
    match g.signature().blocks() {
        [BlockKind::Rect(bm, bn)] if *bm == m && *bn == n => Ok(()),
        _ => Err(Error::Shape(format!(
            "mapping '{}' does not act on a single {m}x{n} rectangular block",
            g.name()
        ))),
    }
}

pub(crate) fn expect_single_sym(g: &SymmetricMapping, m: usize) -> Result<()> {
    match g.signature().blocks() {
        [BlockKind::Sym(bm)] if *bm == m => Ok(()),
        _ => Err(Error::Shape(format!(
            "mapping '{}' does not act on a single symmetric block of order {m}",
            g.name()
        ))),
    }
}

fn expect_same_shape(x: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<()> {
    if x.shape() != h.shape() {
        return Err(Error::Shape(format!(
            "direction is {}x{}, base point is {}x{}",
            h.nrows(),
            h.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Evaluates the lifted mapping on a rectangular argument.
pub fn apply(g: &SymmetricMapping, x: &DMatrix<f64>, tols: &Tolerances) -> Result<DMatrix<f64>> {
    if x.nrows() > x.ncols() {
        return Ok(apply(g, &x.transpose(), tols)?.transpose());
    }
    expect_single_rect(g, x.nrows(), x.ncols())?;
    let (fact, _) = decomposition::svd_lowmem(x, tols)?;
    let gamma = g.eval(&fact.sigma)?;
    Ok(&fact.u * DMatrix::from_diagonal(&gamma) * fact.v1.transpose())
}

/// Evaluates the lifted mapping on a symmetric argument through its
/// eigenvalues.
pub fn apply_hermitian(
    g: &SymmetricMapping,
    y: &DMatrix<f64>,
    tols: &Tolerances,
) -> Result<DMatrix<f64>> {
    expect_single_sym(g, y.nrows())?;
    let (fact, _) = decomposition::eig_sym(y, tols)?;
    let gamma = g.eval(&fact.lambda)?;
    Ok(&fact.p * DMatrix::from_diagonal(&gamma) * fact.p.transpose())
}

enum BlockFactorization {
    Sym(EigenFactorization, BlockPartition),
    Rect(SpectralFactorization, BlockPartition),
}

fn check_block_shape(kind: &BlockKind, x: &DMatrix<f64>, k: usize) -> Result<()> {
    let want = match *kind {
        BlockKind::Sym(m) => (m, m),
        BlockKind::Rect(m, n) => (m, n),
    };
    if x.shape() != want {
        return Err(Error::Shape(format!(
            "block {k} is {}x{}, signature expects {}x{}",
            x.nrows(),
            x.ncols(),
            want.0,
            want.1
        )));
    }
    Ok(())
}

fn factor_blocks(
    g: &SymmetricMapping,
    xs: &[DMatrix<f64>],
    tols: &Tolerances,
) -> Result<Vec<BlockFactorization>> {
    let blocks = g.signature().blocks();
    if xs.len() != blocks.len() {
        return Err(Error::Shape(format!(
            "{} argument blocks for a {}-block signature",
            xs.len(),
            blocks.len()
        )));
    }
    blocks
        .iter()
        .zip(xs.iter())
        .enumerate()
        .map(|(k, (kind, x))| {
            check_block_shape(kind, x, k)?;
            match kind {
                BlockKind::Sym(_) => {
                    let (fact, part) = decomposition::eig_sym(x, tols)?;
                    Ok(BlockFactorization::Sym(fact, part))
                }
                BlockKind::Rect(_, _) => {
                    let (fact, part) = decomposition::svd_full(x, tols)?;
                    Ok(BlockFactorization::Rect(fact, part))
                }
            }
        })
        .collect()
}

fn concat_spectra(facts: &[BlockFactorization]) -> DVector<f64> {
    let total: usize = facts
        .iter()
        .map(|f| match f {
            BlockFactorization::Sym(e, _) => e.lambda.len(),
            BlockFactorization::Rect(s, _) => s.sigma.len(),
        })
        .sum();
    let mut out = DVector::zeros(total);
    let mut at = 0;
    for f in facts {
        let vals = match f {
            BlockFactorization::Sym(e, _) => &e.lambda,
            BlockFactorization::Rect(s, _) => &s.sigma,
        };
        out.rows_mut(at, vals.len()).copy_from(vals);
        at += vals.len();
    }
    out
}

/// Evaluates the lifted mapping on a tuple of block arguments sharing one
/// spectral coordinate vector.
pub fn apply_mixed(
    g: &SymmetricMapping,
    xs: &[DMatrix<f64>],
    tols: &Tolerances,
) -> Result<Vec<DMatrix<f64>>> {
    let facts = factor_blocks(g, xs, tols)?;
    let gamma = g.eval(&concat_spectra(&facts))?;
    let mut out = Vec::with_capacity(facts.len());
    let mut at = 0;
    for (f, x) in facts.iter().zip(xs.iter()) {
        match f {
            BlockFactorization::Sym(e, _) => {
                let gk = gamma.rows(at, e.lambda.len()).into_owned();
                at += e.lambda.len();
                out.push(&e.p * DMatrix::from_diagonal(&gk) * e.p.transpose());
            }
            BlockFactorization::Rect(s, _) => {
                let gk = gamma.rows(at, s.sigma.len()).into_owned();
                at += s.sigma.len();
                if s.sigma.is_empty() {
                    out.push(DMatrix::zeros(0, x.ncols()));
                } else {
                    out.push(&s.u * DMatrix::from_diagonal(&gk) * s.v1.transpose());
                }
            }
        }
    }
    Ok(out)
}

/// First-block action of the derivative at a differentiable point: the
/// kernel Hadamard products on the square part plus the diagonal coupling,
/// and the row profile for the trailing part.
fn smooth_square_action(
    g: &SymmetricMapping,
    fact: &SpectralFactorization,
    part: &BlockPartition,
    h: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = fact.v1.nrows();
    let gamma = g.eval(&fact.sigma)?;
    let jac = g.jacobian(&fact.sigma)?;
    let kern = kernels::build_smooth_kernels(&fact.sigma, &gamma, &jac, part, n)?;
    let a = fact.u.transpose() * h * &fact.v1;
    let (s, t) = decomposition::sym_skew_split(&a)?;
    let coupling = &kern.c * s.diagonal();
    let m1 = kern.e1.component_mul(&s)
        + DMatrix::from_diagonal(&coupling)
        + kern.e2.component_mul(&t);
    Ok((m1, kern.f))
}

/// Applies the derivative of the lifted mapping at a differentiable point.
pub fn frechet_apply(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    tols: &Tolerances,
) -> Result<DMatrix<f64>> {
    if x.nrows() > x.ncols() {
        return Ok(frechet_apply(g, &x.transpose(), &h.transpose(), tols)?.transpose());
    }
    expect_single_rect(g, x.nrows(), x.ncols())?;
    expect_same_shape(x, h)?;
    let (fact, part) = decomposition::svd_full(x, tols)?;
    let (m1, f) = smooth_square_action(g, &fact, &part, h)?;
    let v2 = fact
        .v2
        .as_ref()
        .expect("full factorizations carry the orthogonal completion");
    let mut b = fact.u.transpose() * h * v2;
    for i in 0..b.nrows() {
        let mut row = b.row_mut(i);
        row *= f[i];
    }
    Ok(&fact.u * (m1 * fact.v1.transpose() + b * v2.transpose()))
}

/// Applies the derivative without forming the orthogonal completion: the
/// trailing term is reconstructed from the projector `I - V1 V1^T`, so no
/// `n x (n - m)` factor is ever allocated.
pub fn frechet_apply_lowmem(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    tols: &Tolerances,
) -> Result<DMatrix<f64>> {
    if x.nrows() > x.ncols() {
        return Ok(frechet_apply_lowmem(g, &x.transpose(), &h.transpose(), tols)?.transpose());
    }
    expect_single_rect(g, x.nrows(), x.ncols())?;
    expect_same_shape(x, h)?;
    let (fact, part) = decomposition::svd_lowmem(x, tols)?;
    let (m1, f) = smooth_square_action(g, &fact, &part, h)?;
    let hv1 = h * &fact.v1;
    let mut tail = fact.u.transpose() * (h - hv1 * fact.v1.transpose());
    for i in 0..tail.nrows() {
        let mut row = tail.row_mut(i);
        row *= f[i];
    }
    Ok(&fact.u * (m1 * fact.v1.transpose() + tail))
}

/// Applies the directional derivative of the lifted mapping, defined at
/// every point regardless of differentiability.
pub fn dir_derivative(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    tols: &Tolerances,
) -> Result<DMatrix<f64>> {
    jacobian::psi_operator(g, x, tols)?.apply(h)
}

/// Applies the derivative of the lifted mapping on a tuple of blocks,
/// including the cross-block coupling through the shared spectral
/// coordinates.
pub fn frechet_apply_mixed(
    g: &SymmetricMapping,
    xs: &[DMatrix<f64>],
    hs: &[DMatrix<f64>],
    tols: &Tolerances,
) -> Result<Vec<DMatrix<f64>>> {
    if hs.len() != xs.len() {
        return Err(Error::Shape(format!(
            "{} direction blocks for {} argument blocks",
            hs.len(),
            xs.len()
        )));
    }
    let facts = factor_blocks(g, xs, tols)?;
    for (k, (kind, h)) in g.signature().blocks().iter().zip(hs.iter()).enumerate() {
        check_block_shape(kind, h, k)?;
        if matches!(kind, BlockKind::Sym(_)) {
            let asym = (h - h.transpose()).amax();
            if asym > 1e-12 * (1.0 + h.amax()) {
                return Err(Error::NotSymmetric(format!(
                    "direction block {k} deviates from symmetry by {asym:.3e}"
                )));
            }
        }
    }
    let kappa = concat_spectra(&facts);
    let gamma = g.eval(&kappa)?;
    let jac = g.jacobian(&kappa)?;
    let total = kappa.len();

    // Spectral velocities of all blocks, feeding every block's diagonal term.
    let mut velocity = DVector::zeros(total);
    let mut at = 0;
    for (f, h) in facts.iter().zip(hs.iter()) {
        match f {
            BlockFactorization::Sym(e, _) => {
                let ht = e.p.transpose() * ((h + h.transpose()) * 0.5) * &e.p;
                for i in 0..e.lambda.len() {
                    velocity[at + i] = ht[(i, i)];
                }
                at += e.lambda.len();
            }
            BlockFactorization::Rect(s, _) => {
                let a = s.u.transpose() * h * &s.v1;
                for i in 0..s.sigma.len() {
                    velocity[at + i] = a[(i, i)];
                }
                at += s.sigma.len();
            }
        }
    }

    // Coupling rows of block k: its rows of the full Jacobian with the
    // first-order kernel diagonal removed at its own columns.
    let coupling_diag = |range: std::ops::Range<usize>, eta: &DVector<f64>| -> DVector<f64> {
        let len = range.end - range.start;
        let mut rows = jac.rows(range.start, len).into_owned();
        for i in 0..len {
            rows[(i, range.start + i)] -= eta[i];
        }
        rows * &velocity
    };

    let mut out = Vec::with_capacity(facts.len());
    let mut start = 0;
    for (f, h) in facts.iter().zip(hs.iter()) {
        match f {
            BlockFactorization::Sym(e, part) => {
                let len = e.lambda.len();
                let gk = gamma.rows(start, len).into_owned();
                let jk = jac.view((start, start), (len, len)).into_owned();
                let kern = kernels::build_sym_kernels(&e.lambda, &gk, &jk, part)?;
                let ht = e.p.transpose() * ((h + h.transpose()) * 0.5) * &e.p;
                let diag = coupling_diag(start..start + len, &kern.eta);
                let inner = kern.a.component_mul(&ht) + DMatrix::from_diagonal(&diag);
                out.push(&e.p * inner * e.p.transpose());
                start += len;
            }
            BlockFactorization::Rect(s, part) => {
                let len = s.sigma.len();
                let nk = s.v1.nrows();
                if len == 0 {
                    out.push(DMatrix::zeros(0, nk));
                    continue;
                }
                let gk = gamma.rows(start, len).into_owned();
                let jk = jac.view((start, start), (len, len)).into_owned();
                let kern = kernels::build_smooth_kernels(&s.sigma, &gk, &jk, part, nk)?;
                let a = s.u.transpose() * h * &s.v1;
                let (sym, skew) = decomposition::sym_skew_split(&a)?;
                let diag = coupling_diag(start..start + len, &kern.eta);
                let m1 = kern.e1.component_mul(&sym)
                    + DMatrix::from_diagonal(&diag)
                    + kern.e2.component_mul(&skew);
                let v2 = s
                    .v2
                    .as_ref()
                    .expect("full factorizations carry the orthogonal completion");
                let mut b = s.u.transpose() * h * v2;
                for i in 0..len {
                    let mut row = b.row_mut(i);
                    row *= kern.f[i];
                }
                out.push(&s.u * (m1 * s.v1.transpose() + b * v2.transpose()));
                start += len;
            }
        }
    }
    Ok(out)
}

/// Certifies a coordinatewise proximal mapping for lifting: the declared
/// modulus of continuity must not exceed one.
pub fn prox_from_vector_prox(theta_prox: &SymmetricMapping) -> Result<SymmetricMapping> {
    match theta_prox.metadata().lipschitz {
        Some(c) if c <= 1.0 => Ok(theta_prox.clone()),
        Some(c) => Err(Error::BadParam(format!(
            "declared modulus {c} exceeds 1; the matrix lift would not be a proximal mapping"
        ))),
        None => Err(Error::BadParam(
            "mapping declares no modulus of continuity; a proximal lift needs modulus at most 1"
                .into(),
        )),
    }
}

/// Value and gradient of the envelope `inf_Y theta(sigma(Y)) + |Y - X|^2/2`,
/// evaluated through the lifted proximal mapping: the gradient is the
/// proximal residual `X - P(X)`.
pub fn moreau_gradient<F>(
    theta: F,
    theta_prox: &SymmetricMapping,
    x: &DMatrix<f64>,
    tols: &Tolerances,
) -> Result<(f64, DMatrix<f64>)>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let p = apply(theta_prox, x, tols)?;
    let sigma_p = if p.nrows() > p.ncols() {
        decomposition::svd_lowmem(&p.transpose(), tols)?.0.sigma
    } else {
        decomposition::svd_lowmem(&p, tols)?.0.sigma
    };
    let residual = x - &p;
    let value = theta(&sigma_p)? + 0.5 * residual.norm_squared();
    Ok((value, residual))
}

/// Signature of the tangent space at a base point with the given partition:
/// one symmetric block per tied group and one rectangular block joining the
/// zero rows to the zero columns and the `n - m` completion directions.
pub(crate) fn tangent_signature(
    part: &BlockPartition,
    m: usize,
    n: usize,
) -> Result<SpaceSignature> {
    let mut blocks: Vec<BlockKind> = part
        .groups
        .iter()
        .map(|grp| BlockKind::Sym(grp.len()))
        .collect();
    let z = part.zeros.len();
    blocks.push(BlockKind::Rect(z, z + (n - m)));
    SpaceSignature::new(blocks)
}

/// Extracts the tangent blocks of a direction: symmetrized group diagonal
/// blocks of `U^T H V1` and the zero-row coupling `[A_bb, U_b^T H V2]`.
pub(crate) fn tangent_direction(
    fact: &SpectralFactorization,
    part: &BlockPartition,
    h: &DMatrix<f64>,
) -> Result<BlockDirection> {
    let v2 = fact.v2.as_ref().ok_or_else(|| {
        Error::CapabilityMissing("tangent extraction needs the orthogonal completion".into())
    })?;
    let a = fact.u.transpose() * h * &fact.v1;
    let b = fact.u.transpose() * h * v2;
    let sym_blocks = part
        .groups
        .iter()
        .map(|grp| {
            let sub = a.select_rows(grp.iter()).select_columns(grp.iter());
            (&sub + sub.transpose()) * 0.5
        })
        .collect();
    let z = &part.zeros;
    let mut rect = DMatrix::zeros(z.len(), z.len() + b.ncols());
    for (ri, &i) in z.iter().enumerate() {
        for (ci, &j) in z.iter().enumerate() {
            rect[(ri, ci)] = a[(i, j)];
        }
        for c in 0..b.ncols() {
            rect[(ri, z.len() + c)] = b[(i, c)];
        }
    }
    Ok(BlockDirection {
        sym_blocks,
        rect_block: rect,
    })
}

/// Lifts tangent-space blocks back to the matrix space of the base point.
pub(crate) fn embed_tangent(
    fact: &SpectralFactorization,
    part: &BlockPartition,
    blocks: &[DMatrix<f64>],
) -> Result<DMatrix<f64>> {
    let m = fact.u.nrows();
    let n = fact.v1.nrows();
    if blocks.len() != part.groups.len() + 1 {
        return Err(Error::Shape(format!(
            "{} tangent blocks for {} groups plus the zero block",
            blocks.len(),
            part.groups.len()
        )));
    }
    let z = &part.zeros;
    let rect = blocks.last().expect("checked nonempty");
    if rect.shape() != (z.len(), z.len() + (n - m)) {
        return Err(Error::Shape(format!(
            "zero block is {}x{}, expected {}x{}",
            rect.nrows(),
            rect.ncols(),
            z.len(),
            z.len() + (n - m)
        )));
    }
    let mut first = DMatrix::zeros(m, m);
    for (l, grp) in part.groups.iter().enumerate() {
        let blk = &blocks[l];
        if blk.shape() != (grp.len(), grp.len()) {
            return Err(Error::Shape(format!(
                "tangent block {l} is {}x{}, group has {} indices",
                blk.nrows(),
                blk.ncols(),
                grp.len()
            )));
        }
        for (ri, &i) in grp.iter().enumerate() {
            for (ci, &j) in grp.iter().enumerate() {
                first[(i, j)] = blk[(ri, ci)];
            }
        }
    }
    for (ri, &i) in z.iter().enumerate() {
        for (ci, &j) in z.iter().enumerate() {
            first[(i, j)] = rect[(ri, ci)];
        }
    }
    let mut out = &fact.u * (first * fact.v1.transpose());
    if n > m {
        let v2 = fact.v2.as_ref().ok_or_else(|| {
            Error::CapabilityMissing("tangent embedding needs the orthogonal completion".into())
        })?;
        let mut second = DMatrix::zeros(m, n - m);
        for (ri, &i) in z.iter().enumerate() {
            for c in 0..(n - m) {
                second[(i, c)] = rect[(ri, z.len() + c)];
            }
        }
        out += &fact.u * (second * v2.transpose());
    }
    Ok(out)
}

/// The part of the directional derivative outside the tangent blocks:
/// divided-difference kernels applied with every tangent-covered entry
/// zeroed out, so the lifted tangent term is never double counted.
pub(crate) fn strip_term(
    fact: &SpectralFactorization,
    part: &BlockPartition,
    g_sigma: &DVector<f64>,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = fact.u.nrows();
    let n = fact.v1.nrows();
    let kern = kernels::build_partition_zero_kernels(&fact.sigma, g_sigma, part);
    let a = fact.u.transpose() * h * &fact.v1;
    let (s, t) = decomposition::sym_skew_split(&a)?;
    let mut inner = (kern.e1.component_mul(&s) + kern.e2.component_mul(&t)) * fact.v1.transpose();
    if n > m {
        let v2 = fact.v2.as_ref().ok_or_else(|| {
            Error::CapabilityMissing("the strip term needs the orthogonal completion".into())
        })?;
        let mut b = fact.u.transpose() * h * v2;
        for i in 0..m {
            let mut row = b.row_mut(i);
            row *= kern.f[i];
        }
        inner += b * v2.transpose();
    }
    Ok(&fact.u * inner)
}
