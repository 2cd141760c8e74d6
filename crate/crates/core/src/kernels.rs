//! First-divided-difference kernels entering every derivative formula.
//!
//! For a rectangular point with singular values `sigma` and mapped values
//! `g = g(sigma)`, the Hadamard kernels are
//!
//! - `E1[i][j] = (g_i - g_j) / (sigma_i - sigma_j)` acting on symmetric parts,
//! - `E2[i][j] = (g_i + g_j) / (sigma_i + sigma_j)` acting on skew parts,
//! - `F[i] = g_i / sigma_i` scaling the rows of the trailing block,
//!
//! with the indeterminate entries resolved in two ways. The zero-fill
//! variant simply writes `0` wherever the denominator vanishes exactly; it is
//! correct for one-sided directional derivatives, where the tied and
//! vanishing values get their own correction term. The smooth variant fills
//! them with the limits the Jacobian `J = g'(sigma)` dictates, using
//! `eta_i = J_ii - J_ij` (with `j` a neighbor tied to `i`) and the coupling
//! matrix `C = J - Diag(eta)`, which is the complete recipe for the Frechet
//! derivative at a differentiable point.

use crate::decomposition::BlockPartition;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Kernels with exact-zero fills for indeterminate entries.
#[derive(Debug, Clone)]
pub struct ZeroKernels {
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub f: DVector<f64>,
}

/// Kernels with Jacobian-limit fills, valid at differentiable points.
#[derive(Debug, Clone)]
pub struct SmoothRectKernels {
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub f: DVector<f64>,
    pub eta: DVector<f64>,
    /// Coupling matrix `J - Diag(eta)`; block-constant over tie classes with
    /// zero rows and columns on vanishing singular values.
    pub c: DMatrix<f64>,
}

/// Eigenvalue-side kernels for symmetric arguments.
#[derive(Debug, Clone)]
pub struct SymKernels {
    /// Divided differences of eigenvalues, `eta` fills on tied pairs and the
    /// diagonal.
    pub a: DMatrix<f64>,
    pub eta: DVector<f64>,
    /// Coupling matrix `J - Diag(eta)`.
    pub c: DMatrix<f64>,
}

const STRUCTURE_TOL: f64 = 1e-8;

/// Builds the exact-fill kernels. The width `n >= m` of the underlying
/// rectangular space is only validated here; `F` is returned as the length-m
/// row profile of the `m x (n - m)` trailing block.
pub fn build_zero_kernels(
    sigma: &DVector<f64>,
    g_sigma: &DVector<f64>,
    n: usize,
) -> Result<ZeroKernels> {
    let m = sigma.len();
    if g_sigma.len() != m {
        return Err(Error::Shape(format!(
            "mapped values have length {}, expected {m}",
            g_sigma.len()
        )));
    }
    if n < m {
        return Err(Error::Shape(format!("width {n} is smaller than height {m}")));
    }
    let mut e1 = DMatrix::zeros(m, m);
    let mut e2 = DMatrix::zeros(m, m);
    let mut f = DVector::zeros(m);
    for i in 0..m {
        for j in 0..m {
            let diff = sigma[i] - sigma[j];
            if diff != 0.0 {
                e1[(i, j)] = (g_sigma[i] - g_sigma[j]) / diff;
            }
            let sum = sigma[i] + sigma[j];
            if sum != 0.0 {
                e2[(i, j)] = (g_sigma[i] + g_sigma[j]) / sum;
            }
        }
        if sigma[i] != 0.0 {
            f[i] = g_sigma[i] / sigma[i];
        }
    }
    Ok(ZeroKernels { e1, e2, f })
}

/// Zero-order kernels with every entry covered by a tangent-block lift set
/// to zero: pairs in the same tie group get no first divided difference,
/// both-zero pairs get neither ratio, and zero rows get no trailing profile.
/// Classification follows the partition rather than exact value equality, so
/// kernels and lift stay consistent when tied values differ by rounding.
pub(crate) fn build_partition_zero_kernels(
    sigma: &DVector<f64>,
    g_sigma: &DVector<f64>,
    part: &BlockPartition,
) -> ZeroKernels {
    let m = sigma.len();
    let mut e1 = DMatrix::zeros(m, m);
    let mut e2 = DMatrix::zeros(m, m);
    let mut f = DVector::zeros(m);
    for i in 0..m {
        for j in 0..m {
            if i != j && !same_unit(part, i, j) {
                e1[(i, j)] = (g_sigma[i] - g_sigma[j]) / (sigma[i] - sigma[j]);
            }
            if !(part.is_zero(i) && part.is_zero(j)) {
                e2[(i, j)] = (g_sigma[i] + g_sigma[j]) / (sigma[i] + sigma[j]);
            }
        }
        if !part.is_zero(i) {
            f[i] = g_sigma[i] / sigma[i];
        }
    }
    ZeroKernels { e1, e2, f }
}

/// True when `i` and `j` carry the same spectral value according to the
/// partition: same tie group, or both in the zero set.
fn same_unit(part: &BlockPartition, i: usize, j: usize) -> bool {
    match (part.group_of(i), part.group_of(j)) {
        (Some(a), Some(b)) => a == b,
        (None, None) => part.is_zero(i) && part.is_zero(j),
        _ => false,
    }
}

/// The tied neighbor used to form `eta_i`: the next index when it shares the
/// value, otherwise the previous one. `None` when `i` is untied.
fn tied_neighbor(part: &BlockPartition, i: usize, m: usize) -> Option<usize> {
    if !part.is_tied(i) {
        return None;
    }
    if i + 1 < m && same_unit(part, i, i + 1) {
        Some(i + 1)
    } else {
        Some(i - 1)
    }
}

fn eta_values(j: &DMatrix<f64>, part: &BlockPartition) -> DVector<f64> {
    let m = j.nrows();
    DVector::from_iterator(
        m,
        (0..m).map(|i| match tied_neighbor(part, i, m) {
            Some(t) => j[(i, i)] - j[(i, t)],
            None => j[(i, i)],
        }),
    )
}

/// Checks the structural identities the Jacobian of an equivariant mapping
/// must satisfy on this partition, at tolerance `1e-8`.
fn validate_structure(
    j: &DMatrix<f64>,
    part: &BlockPartition,
    zero_rows_vanish: bool,
) -> Result<()> {
    let m = j.nrows();
    for i in 0..m {
        for t in (i + 1)..m {
            if same_unit(part, i, t) && (j[(i, i)] - j[(t, t)]).abs() > STRUCTURE_TOL {
                return Err(Error::Structure(format!(
                    "diagonal entries {i} and {t} differ by {:.3e} on tied values",
                    (j[(i, i)] - j[(t, t)]).abs()
                )));
            }
        }
    }
    if zero_rows_vanish {
        for i in 0..m {
            if !part.is_zero(i) {
                continue;
            }
            for t in 0..m {
                if t == i {
                    continue;
                }
                if j[(i, t)].abs() > STRUCTURE_TOL || j[(t, i)].abs() > STRUCTURE_TOL {
                    return Err(Error::Structure(format!(
                        "off-diagonal coupling at vanishing value {i} is {:.3e}",
                        j[(i, t)].abs().max(j[(t, i)].abs())
                    )));
                }
            }
        }
    }
    let unit = |i: usize| part.group_of(i).map(|l| l as isize).unwrap_or(-1);
    for i in 0..m {
        for t in 0..m {
            if t == i {
                continue;
            }
            for i2 in 0..m {
                for t2 in 0..m {
                    if t2 == i2 {
                        continue;
                    }
                    if unit(i2) == unit(i)
                        && unit(t2) == unit(t)
                        && (j[(i, t)] - j[(i2, t2)]).abs() > STRUCTURE_TOL
                    {
                        return Err(Error::Structure(format!(
                            "off-diagonal entries ({i},{t}) and ({i2},{t2}) differ by {:.3e} \
                             within one tie-class pair",
                            (j[(i, t)] - j[(i2, t2)]).abs()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Builds Jacobian-limit kernels at a differentiable point. Fails with a
/// structure error when `J` is incompatible with the partition.
pub fn build_smooth_kernels(
    sigma: &DVector<f64>,
    g_sigma: &DVector<f64>,
    j: &DMatrix<f64>,
    part: &BlockPartition,
    n: usize,
) -> Result<SmoothRectKernels> {
    let m = sigma.len();
    if g_sigma.len() != m || j.shape() != (m, m) {
        return Err(Error::Shape(
            "mapped values and jacobian must match the spectrum length".into(),
        ));
    }
    if n < m {
        return Err(Error::Shape(format!("width {n} is smaller than height {m}")));
    }
    validate_structure(j, part, true)?;

    let eta = eta_values(j, part);
    let mut e1 = DMatrix::zeros(m, m);
    let mut e2 = DMatrix::zeros(m, m);
    let mut f = DVector::zeros(m);
    for i in 0..m {
        for t in 0..m {
            e1[(i, t)] = if i == t || same_unit(part, i, t) {
                eta[i]
            } else {
                (g_sigma[i] - g_sigma[t]) / (sigma[i] - sigma[t])
            };
            e2[(i, t)] = if part.is_zero(i) && part.is_zero(t) {
                j[(i, i)]
            } else {
                (g_sigma[i] + g_sigma[t]) / (sigma[i] + sigma[t])
            };
        }
        f[i] = if part.is_zero(i) {
            j[(i, i)]
        } else {
            g_sigma[i] / sigma[i]
        };
    }
    let c = j - DMatrix::from_diagonal(&eta);
    Ok(SmoothRectKernels { e1, e2, f, eta, c })
}

/// Builds eigenvalue-side kernels at a differentiable point of a symmetric
/// argument. The partition comes from the eigenfactorization and has no zero
/// set.
pub fn build_sym_kernels(
    lambda: &DVector<f64>,
    g_lambda: &DVector<f64>,
    j: &DMatrix<f64>,
    part: &BlockPartition,
) -> Result<SymKernels> {
    let m = lambda.len();
    if g_lambda.len() != m || j.shape() != (m, m) {
        return Err(Error::Shape(
            "mapped values and jacobian must match the spectrum length".into(),
        ));
    }
    validate_structure(j, part, false)?;

    let eta = eta_values(j, part);
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for t in 0..m {
            a[(i, t)] = if i == t || same_unit(part, i, t) {
                eta[i]
            } else {
                (g_lambda[i] - g_lambda[t]) / (lambda[i] - lambda[t])
            };
        }
    }
    let c = j - DMatrix::from_diagonal(&eta);
    Ok(SymKernels { a, eta, c })
}
