//! Spectral factorizations and tie-aware partitions of the spectrum.
//!
//! Rectangular matrices `X` with `m <= n` factor as `X = U [Diag(sigma) 0] V^T`
//! with `V = [V1 V2]`; symmetric matrices factor as `Y = P Diag(lambda) P^T`.
//! Singular values are grouped into blocks of numerically tied values plus a
//! zero set, and eigenvalues into tied groups, because every derivative
//! formula downstream is constant on those blocks.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Thresholds controlling tie grouping and zero classification.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative gap below which adjacent spectral values are grouped:
    /// a value joins the current group when `lead - value <= tie_tol * max(1, |lead|)`.
    pub tie_tol: f64,
    /// Absolute threshold below which a singular value counts as zero.
    /// `None` resolves to `1e-11 * sigma_max`.
    pub zero_tol: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tie_tol: 1e-9,
            zero_tol: None,
        }
    }
}

impl Tolerances {
    /// Absolute zero threshold for a spectrum whose largest value is `sigma_max`.
    pub fn zero_threshold(&self, sigma_max: f64) -> f64 {
        self.zero_tol.unwrap_or(1e-11 * sigma_max)
    }
}

/// Full singular value factorization `X = U [Diag(sigma) 0] [V1 V2]^T`.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    /// Left singular vectors, `m x m`.
    pub u: DMatrix<f64>,
    /// Singular values, nonincreasing and nonnegative.
    pub sigma: DVector<f64>,
    /// Leading right singular vectors, `n x m`.
    pub v1: DMatrix<f64>,
    /// Orthonormal basis of the null space of `X^T X` restricted to the
    /// complement of `V1`, `n x (n - m)`. Absent for low-memory factorizations.
    pub v2: Option<DMatrix<f64>>,
}

/// Eigenfactorization `Y = P Diag(lambda) P^T` with `lambda` nonincreasing.
#[derive(Debug, Clone)]
pub struct EigenFactorization {
    pub p: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

/// Partition of a nonincreasing spectrum into tied groups and a zero set.
///
/// Groups are contiguous index runs of numerically equal nonzero values,
/// ordered by decreasing value and indexed from zero. The zero set is the
/// trailing run of values below the zero threshold (always empty for
/// eigenvalue partitions, which have no zero classification).
#[derive(Debug, Clone)]
pub struct BlockPartition {
    pub groups: Vec<Vec<usize>>,
    pub zeros: Vec<usize>,
    pub tie_tol: f64,
    /// Resolved absolute zero threshold, `None` when zeros were not classified.
    pub zero_tol: Option<f64>,
}

impl BlockPartition {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Index of the group containing `i`, or `None` when `i` is in the zero set.
    pub fn group_of(&self, i: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&i))
    }

    pub fn is_zero(&self, i: usize) -> bool {
        self.zeros.contains(&i)
    }

    /// Number of indices covered by groups; the zero set starts here.
    pub fn nonzero_count(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    /// True when `i` shares its value with at least one other index.
    pub fn is_tied(&self, i: usize) -> bool {
        if self.is_zero(i) {
            self.zeros.len() >= 2
        } else {
            self.group_of(i)
                .map(|l| self.groups[l].len() >= 2)
                .unwrap_or(false)
        }
    }

    /// Advisory messages for classification decisions that fell within a
    /// factor of two of their threshold.
    pub fn boundary_warnings(&self, values: &DVector<f64>) -> Vec<String> {
        let mut warnings = Vec::new();
        let n = values.len();
        for i in 0..n.saturating_sub(1) {
            let same_unit = match (self.group_of(i), self.group_of(i + 1)) {
                (Some(a), Some(b)) => a == b,
                (None, None) => true,
                _ => false,
            };
            if same_unit {
                continue;
            }
            let gap = values[i] - values[i + 1];
            if gap <= 2.0 * self.tie_tol * values[i].abs().max(1.0) {
                warnings.push(format!(
                    "values {i} and {} are separated by {gap:.3e}, within twice the tie tolerance",
                    i + 1
                ));
            }
        }
        if let Some(zt) = self.zero_tol {
            for g in &self.groups {
                for &i in g {
                    if values[i].abs() <= 2.0 * zt {
                        warnings.push(format!(
                            "value {i} = {:.3e} is within twice the zero threshold {zt:.3e}",
                            values[i]
                        ));
                    }
                }
            }
        }
        warnings
    }
}

/// Groups a nonincreasing spectrum into tied blocks, classifying values at or
/// below `zero_threshold` (when given) into the zero set first.
pub fn partition_values(
    values: &DVector<f64>,
    tie_tol: f64,
    zero_threshold: Option<f64>,
) -> BlockPartition {
    let n = values.len();
    debug_assert!(
        (1..n).all(|i| values[i - 1] >= values[i]),
        "spectrum must be nonincreasing"
    );
    let mut zeros = Vec::new();
    let mut nonzero_end = n;
    if let Some(zt) = zero_threshold {
        while nonzero_end > 0 && values[nonzero_end - 1].abs() <= zt {
            nonzero_end -= 1;
        }
        zeros.extend(nonzero_end..n);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < nonzero_end {
        let lead = values[i];
        let mut group = vec![i];
        let mut j = i + 1;
        while j < nonzero_end && lead - values[j] <= tie_tol * lead.abs().max(1.0) {
            group.push(j);
            j += 1;
        }
        groups.push(group);
        i = j;
    }
    BlockPartition {
        groups,
        zeros,
        tie_tol,
        zero_tol: zero_threshold,
    }
}

fn sort_descending_in_place(
    values: &mut DVector<f64>,
    columns: &mut [&mut DMatrix<f64>],
) {
    let n = values.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return;
    }
    let sorted = DVector::from_iterator(n, perm.iter().map(|&p| values[p]));
    *values = sorted;
    for mat in columns {
        **mat = mat.select_columns(perm.iter());
    }
}

/// One-sided Jacobi factorization of `X` with `m <= n`: orthogonalizes the
/// columns of `X^T` by plane rotations. Slower than the default backend but
/// accurate for any spectrum; the default backend loses several digits on
/// clusters of equal singular values, so this is the fallback when the
/// reconstruction residual check fails.
fn jacobi_svd(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = (x.nrows(), x.ncols());
    let mut b = x.transpose(); // n x m; columns converge to sigma_j * v1_j
    let mut u = DMatrix::<f64>::identity(m, m); // accumulated rotations
    let mut converged = false;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = b.column(p).dot(&b.column(p));
                let beta = b.column(q).dot(&b.column(q));
                let gamma = b.column(p).dot(&b.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let vp = b[(i, p)];
                    let vq = b[(i, q)];
                    b[(i, p)] = c * vp - s * vq;
                    b[(i, q)] = s * vp + c * vq;
                }
                for i in 0..m {
                    let vp = u[(i, p)];
                    let vq = u[(i, q)];
                    u[(i, p)] = c * vp - s * vq;
                    u[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(
            "plane-rotation factorization did not converge in 60 sweeps".into(),
        ));
    }
    let sigma = DVector::from_fn(m, |j, _| b.column(j).norm());
    let scale = sigma.max();
    let mut v1 = DMatrix::zeros(n, m);
    let mut filled: Vec<usize> = Vec::new();
    for j in 0..m {
        if sigma[j] > 1e-13 * scale.max(1.0) {
            v1.set_column(j, &(b.column(j) / sigma[j]));
            filled.push(j);
        }
    }
    // Columns for vanishing singular values: orthonormal completion against
    // the filled ones, built from seeded probes so the result is
    // deterministic and no n x n workspace is allocated.
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0C07_FEED);
    for j in 0..m {
        if filled.contains(&j) {
            continue;
        }
        loop {
            let mut cand = DVector::from_fn(n, |_, _| {
                rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
            });
            for &k in &filled {
                let proj = v1.column(k).dot(&cand);
                cand -= v1.column(k) * proj;
            }
            let norm = cand.norm();
            if norm > 0.25 {
                v1.set_column(j, &(cand / norm));
                filled.push(j);
                break;
            }
        }
    }
    Ok((u, sigma, v1))
}

fn factorize(x: &DMatrix<f64>, tols: &Tolerances, complete_basis: bool) -> Result<(SpectralFactorization, BlockPartition)> {
    let (m, n) = (x.nrows(), x.ncols());
    if m > n {
        return Err(Error::Shape(format!(
            "matrix is {m} x {n} with more rows than columns; transpose first"
        )));
    }
    if m == 0 {
        let fact = SpectralFactorization {
            u: DMatrix::zeros(0, 0),
            sigma: DVector::zeros(0),
            v1: DMatrix::zeros(n, 0),
            v2: Some(DMatrix::identity(n, n)),
        };
        let part = partition_values(&fact.sigma, tols.tie_tol, Some(0.0));
        return Ok((fact, part));
    }
    // Plane rotations reconstruct to a few ulps and never misconverge on
    // tied values, so they are the primary route at moderate row counts.
    // The backend bidiagonal solver is kept for tall spectra where Jacobi
    // sweeps get expensive; its result is verified and rescued on failure
    // because it can lose all accuracy on clusters of equal singular values.
    let (mut u, mut sigma, mut v1) = if m <= 64 {
        jacobi_svd(x)?
    } else {
        let svd = x
            .clone()
            .try_svd(true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::NonConvergence("singular value iteration stalled".into()))?;
        let u = svd.u.expect("u requested");
        let v1 = svd.v_t.expect("v_t requested").transpose();
        let sigma = svd.singular_values.map(|s| s.max(0.0));
        let recon = &u * DMatrix::from_diagonal(&sigma) * v1.transpose();
        if (&recon - x).norm() > 1e-10 * (1.0 + x.norm()) {
            jacobi_svd(x)?
        } else {
            (u, sigma, v1)
        }
    };
    sort_descending_in_place(&mut sigma, &mut [&mut u, &mut v1]);
    let recon = &u * DMatrix::from_diagonal(&sigma) * v1.transpose();
    let err = (&recon - x).norm();
    if err > 1e-10 * (1.0 + x.norm()) {
        return Err(Error::NonConvergence(format!(
            "factorization residual {err:.3e} exceeds tolerance"
        )));
    }

    let v2 = if !complete_basis {
        None
    } else if n == m {
        Some(DMatrix::zeros(n, 0))
    } else {
        // Orthonormal basis of range(I - V1 V1^T) via pivoted QR; the first
        // n - m columns of Q span the complement of the V1 column space.
        let projector = DMatrix::identity(n, n) - &v1 * v1.transpose();
        let q = projector.col_piv_qr().q();
        Some(q.columns(0, n - m).into_owned())
    };

    let zt = tols.zero_threshold(sigma.max());
    let part = partition_values(&sigma, tols.tie_tol, Some(zt));
    Ok((SpectralFactorization { u, sigma, v1, v2 }, part))
}

/// Factorizes `X` (with `m <= n`) including the trailing basis `V2`.
pub fn svd_full(x: &DMatrix<f64>, tols: &Tolerances) -> Result<(SpectralFactorization, BlockPartition)> {
    factorize(x, tols, true)
}

/// Factorization without the `n x (n - m)` trailing basis, for workloads
/// where `n` is large and that factor must never be materialized.
pub fn svd_lowmem(x: &DMatrix<f64>, tols: &Tolerances) -> Result<(SpectralFactorization, BlockPartition)> {
    factorize(x, tols, false)
}

/// Eigenfactorization of a symmetric matrix, eigenvalues nonincreasing.
///
/// Fails with `NotSymmetric` when `||Y - Y^T|| > 1e-12 * (1 + ||Y||)`.
pub fn eig_sym(y: &DMatrix<f64>, tols: &Tolerances) -> Result<(EigenFactorization, BlockPartition)> {
    let (m, n) = (y.nrows(), y.ncols());
    if m != n {
        return Err(Error::Shape(format!("matrix is {m} x {n}, not square")));
    }
    let asym = (y - y.transpose()).norm();
    if asym > 1e-12 * (1.0 + y.norm()) {
        return Err(Error::NotSymmetric(format!(
            "||Y - Y^T|| = {asym:.3e} exceeds tolerance"
        )));
    }
    let sym = (y + y.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::NonConvergence("eigenvalue iteration stalled".into()))?;
    let mut p = eig.eigenvectors;
    let mut lambda = eig.eigenvalues;
    sort_descending_in_place(&mut lambda, &mut [&mut p]);
    let part = partition_values(&lambda, tols.tie_tol, None);
    Ok((EigenFactorization { p, lambda }, part))
}

/// Splits a square matrix into its symmetric and skew-symmetric parts.
pub fn sym_skew_split(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "matrix is {} x {}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let s = (a + a.transpose()) * 0.5;
    let t = (a - a.transpose()) * 0.5;
    Ok((s, t))
}

/// Rank-one-sum map `U_l V1_l^T` of the singular subspace for tied group `l`
/// (zero-based). Summing `sigma_lead(l) * block_subspace_map(l)` over all
/// groups reconstructs `X` when ties are exact.
pub fn block_subspace_map(
    fact: &SpectralFactorization,
    part: &BlockPartition,
    l: usize,
) -> Result<DMatrix<f64>> {
    let group = part
        .groups
        .get(l)
        .ok_or_else(|| Error::Index(format!("group {l} out of range for {} groups", part.num_groups())))?;
    let ul = fact.u.select_columns(group.iter());
    let vl = fact.v1.select_columns(group.iter());
    Ok(ul * vl.transpose())
}

/// Directional derivative of `X -> U_l V1_l^T` at the factored point.
///
/// Requires group `l` to be separated from every other singular value and
/// from zero by more than the tie tolerance; otherwise the subspace is not
/// differentiable and `DegenerateBlock` is returned.
pub fn block_subspace_derivative(
    fact: &SpectralFactorization,
    part: &BlockPartition,
    l: usize,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let group = part
        .groups
        .get(l)
        .ok_or_else(|| Error::Index(format!("group {l} out of range for {} groups", part.num_groups())))?;
    let m = fact.u.nrows();
    let n = fact.v1.nrows();
    if h.nrows() != m || h.ncols() != n {
        return Err(Error::Shape(format!(
            "direction is {} x {}, expected {m} x {n}",
            h.nrows(),
            h.ncols()
        )));
    }
    let sigma = &fact.sigma;
    for &i in group {
        let si = sigma[i];
        if si <= part.tie_tol * si.abs().max(1.0) {
            return Err(Error::DegenerateBlock(format!(
                "group {l} touches zero: sigma[{i}] = {si:.3e}"
            )));
        }
        for j in 0..m {
            if group.contains(&j) {
                continue;
            }
            let gap = (si - sigma[j]).abs();
            if gap <= part.tie_tol * si.abs().max(sigma[j].abs()).max(1.0) {
                return Err(Error::DegenerateBlock(format!(
                    "group {l} not separated: |sigma[{i}] - sigma[{j}]| = {gap:.3e}"
                )));
            }
        }
    }

    let a = fact.u.transpose() * h * &fact.v1;
    let mut gamma = DMatrix::zeros(m, m);
    for &i in group {
        let si = sigma[i];
        for j in 0..m {
            if j == i {
                continue;
            }
            let sj = sigma[j];
            if group.contains(&j) {
                // Within a tied block only the skew part of the rotation
                // survives in the subspace sum; its kernel 1/sigma_bar stays
                // finite where the symmetric-part kernel would be 0/0.
                gamma[(j, i)] = (a[(j, i)] - a[(i, j)]) / (si + sj);
            } else {
                let den = si * si - sj * sj;
                gamma[(j, i)] = (si * a[(j, i)] + sj * a[(i, j)]) / den;
                gamma[(i, j)] = (si * a[(i, j)] + sj * a[(j, i)]) / den;
            }
        }
    }
    let mut out = &fact.u * gamma * fact.v1.transpose();

    if n > m {
        let v2 = fact.v2.as_ref().ok_or_else(|| {
            Error::CapabilityMissing(
                "subspace derivative needs the full factorization with trailing basis".into(),
            )
        })?;
        let b = fact.u.transpose() * h * v2;
        let mut upsilon = DMatrix::zeros(m, n - m);
        for &i in group {
            for j in 0..n - m {
                upsilon[(i, j)] = b[(i, j)] / sigma[i];
            }
        }
        out += &fact.u * upsilon * v2.transpose();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn svd_sorts_descending() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let (f, p) = svd_full(&x, &Tolerances::default()).unwrap();
        assert_eq!(f.sigma.as_slice(), &[3.0, 1.0]);
        assert_eq!(p.groups, vec![vec![0], vec![1]]);
        let recon = &f.u * DMatrix::from_diagonal(&f.sigma) * f.v1.transpose();
        assert_abs_diff_eq!(recon, x, epsilon = 1e-12);
    }

    #[test]
    fn svd_bases_are_orthonormal() {
        let x = gauss(3, 5, 7);
        let (f, _) = svd_full(&x, &Tolerances::default()).unwrap();
        let v2 = f.v2.as_ref().unwrap();
        assert_eq!(v2.shape(), (5, 2));
        let eye3 = DMatrix::<f64>::identity(3, 3);
        assert!((f.u.transpose() * &f.u - &eye3).norm() <= 1e-12);
        assert!((f.v1.transpose() * &f.v1 - &eye3).norm() <= 1e-12);
        assert!((v2.transpose() * v2 - DMatrix::<f64>::identity(2, 2)).norm() <= 1e-12);
        assert!((f.v1.transpose() * v2).norm() <= 1e-12);
        let recon = &f.u * DMatrix::from_diagonal(&f.sigma) * f.v1.transpose();
        assert!((recon - &x).norm() <= 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn svd_rejects_wide_side_down() {
        let x = DMatrix::<f64>::zeros(4, 2);
        assert!(matches!(
            svd_full(&x, &Tolerances::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_matrix_partitions_to_zero_set() {
        let x = DMatrix::<f64>::zeros(2, 3);
        let (f, p) = svd_full(&x, &Tolerances::default()).unwrap();
        assert!(p.groups.is_empty());
        assert_eq!(p.zeros, vec![0, 1]);
        assert_eq!(f.v2.as_ref().unwrap().shape(), (3, 1));
    }

    #[test]
    fn exact_ties_form_one_group() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        let (f, p) = svd_full(&x, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(f.sigma[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.sigma[1], 2.0, epsilon = 1e-12);
        assert_eq!(p.groups, vec![vec![0, 1]]);
        assert!(p.is_tied(0) && p.is_tied(1));
    }

    #[test]
    fn rank_deficiency_lands_in_zero_set() {
        let mut x = DMatrix::<f64>::zeros(2, 3);
        x[(0, 0)] = 2.0;
        let (_, p) = svd_full(&x, &Tolerances::default()).unwrap();
        assert_eq!(p.groups, vec![vec![0]]);
        assert_eq!(p.zeros, vec![1]);
        assert!(!p.is_tied(0));
        assert!(!p.is_tied(1), "a single zero is not tied");
    }

    #[test]
    fn boundary_warnings_flag_marginal_gaps() {
        let tols = Tolerances::default();
        let v = DVector::from_vec(vec![1.0, 1.0 - 1.5e-9]);
        let p = partition_values(&v, tols.tie_tol, Some(1e-11));
        assert_eq!(p.num_groups(), 2, "gap above tie_tol keeps values apart");
        assert_eq!(p.boundary_warnings(&v).len(), 1);

        let clean = DVector::from_vec(vec![3.0, 1.0]);
        let pc = partition_values(&clean, tols.tie_tol, Some(1e-11));
        assert!(pc.boundary_warnings(&clean).is_empty());
    }

    #[test]
    fn eig_sym_sorts_and_reconstructs() {
        let tols = Tolerances::default();
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        let (e, p) = eig_sym(&y, &tols).unwrap();
        assert_eq!(e.lambda.as_slice(), &[2.0, -1.0]);
        assert_eq!(p.groups, vec![vec![0], vec![1]]);
        assert!(p.zeros.is_empty());

        let y = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (e, _) = eig_sym(&y, &tols).unwrap();
        assert_abs_diff_eq!(e.lambda[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.lambda[1], -1.0, epsilon = 1e-12);
        let recon = &e.p * DMatrix::from_diagonal(&e.lambda) * e.p.transpose();
        assert_abs_diff_eq!(recon, y, epsilon = 1e-12);

        let (_, p) = eig_sym(&DMatrix::<f64>::identity(3, 3), &tols).unwrap();
        assert_eq!(p.groups, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn eig_sym_rejects_asymmetric_input() {
        let y = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            eig_sym(&y, &Tolerances::default()),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn sym_skew_split_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        let (s, t) = sym_skew_split(&a).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        assert_eq!(s + t, a);
        assert!(sym_skew_split(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn subspace_map_reproduces_rank_pieces() {
        let tols = Tolerances::default();
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let (f, p) = svd_full(&x, &tols).unwrap();
        let nu0 = block_subspace_map(&f, &p, 0).unwrap();
        let nu1 = block_subspace_map(&f, &p, 1).unwrap();
        assert_abs_diff_eq!(nu0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(nu1, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), epsilon = 1e-12);
        assert!(block_subspace_map(&f, &p, 2).is_err());

        let two_i = DMatrix::<f64>::identity(2, 2) * 2.0;
        let (f, p) = svd_full(&two_i, &tols).unwrap();
        assert_eq!(p.num_groups(), 1);
        let nu = block_subspace_map(&f, &p, 0).unwrap();
        assert_abs_diff_eq!(nu, DMatrix::<f64>::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn subspace_maps_reconstruct_input() {
        let tols = Tolerances::default();
        let x = gauss(3, 5, 11);
        let (f, p) = svd_full(&x, &tols).unwrap();
        let mut recon = DMatrix::<f64>::zeros(3, 5);
        for (l, g) in p.groups.iter().enumerate() {
            recon += block_subspace_map(&f, &p, l).unwrap() * f.sigma[g[0]];
        }
        assert!((recon - &x).norm() <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn subspace_derivative_matches_frozen_value() {
        let tols = Tolerances::default();
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let (f, p) = svd_full(&x, &tols).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = block_subspace_derivative(&f, &p, 0, &h).unwrap();
        assert_abs_diff_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]), epsilon = 1e-12);
        let zero = block_subspace_derivative(&f, &p, 0, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(zero, DMatrix::zeros(2, 2));
    }

    #[test]
    fn subspace_derivative_matches_finite_differences() {
        let tols = Tolerances::default();
        let x = gauss(3, 4, 21);
        let h = gauss(3, 4, 22);
        let (f, p) = svd_full(&x, &tols).unwrap();
        let step = 1e-5;
        for l in 0..p.num_groups() {
            let d = block_subspace_derivative(&f, &p, l, &h).unwrap();
            let (fp, pp) = svd_full(&(&x + &h * step), &tols).unwrap();
            let (fm, pm) = svd_full(&(&x - &h * step), &tols).unwrap();
            let np = block_subspace_map(&fp, &pp, l).unwrap();
            let nm = block_subspace_map(&fm, &pm, l).unwrap();
            let fd = (np - nm) / (2.0 * step);
            assert!(
                (&d - &fd).norm() <= 1e-6,
                "group {l}: formula and finite differences differ by {:.3e}",
                (&d - &fd).norm()
            );
        }
    }

    #[test]
    fn subspace_derivative_rejects_unseparated_groups() {
        let tols = Tolerances::default();
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-10]));
        let (f, p) = svd_full(&x, &tols).unwrap();
        assert_eq!(p.num_groups(), 2, "1e-10 sits above the zero threshold");
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(block_subspace_derivative(&f, &p, 0, &h).is_ok());
        assert!(matches!(
            block_subspace_derivative(&f, &p, 1, &h),
            Err(Error::DegenerateBlock(_))
        ));
    }
}
