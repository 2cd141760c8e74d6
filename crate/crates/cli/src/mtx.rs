//! Matrix Market file reading and writing.
//!
//! Array (dense) and coordinate inputs are accepted, in `general` or
//! `symmetric` storage. Output is always dense array format printed with 17
//! significant digits, which round-trips IEEE doubles exactly.

use nalgebra::DMatrix;
use std::fs;
use std::path::Path;

/// Reads a real matrix in Matrix Market array or coordinate format.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_matrix(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_matrix(text: &str) -> Result<DMatrix<f64>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let head: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if head.len() != 5 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
        return Err(
            "first line must be '%%MatrixMarket matrix <format> <field> <symmetry>'".into(),
        );
    }
    let (format, field, symmetry) = (head[2].as_str(), head[3].as_str(), head[4].as_str());
    if !matches!(field, "real" | "integer" | "double") {
        return Err(format!("unsupported field '{field}': only real matrices are read"));
    }
    let symmetric = match symmetry {
        "general" => false,
        "symmetric" => true,
        other => return Err(format!("unsupported symmetry '{other}'")),
    };

    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size = body.next().ok_or("missing size line")?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| format!("bad size entry '{t}'")))
        .collect::<Result<_, _>>()?;
    let mut tokens = body.flat_map(str::split_whitespace);
    let mut next_value = |what: &str| -> Result<f64, String> {
        let t = tokens
            .next()
            .ok_or_else(|| format!("file ends before all {what} are read"))?;
        t.parse::<f64>().map_err(|_| format!("bad value '{t}'"))
    };

    match format {
        "array" => {
            let [m, n] = dims[..] else {
                return Err("array size line must be 'rows cols'".into());
            };
            let mut mat = DMatrix::zeros(m, n);
            if symmetric {
                if m != n {
                    return Err("symmetric storage requires a square matrix".into());
                }
                for j in 0..n {
                    for i in j..m {
                        let v = next_value("lower-triangle entries")?;
                        mat[(i, j)] = v;
                        mat[(j, i)] = v;
                    }
                }
            } else {
                for j in 0..n {
                    for i in 0..m {
                        mat[(i, j)] = next_value("entries")?;
                    }
                }
            }
            Ok(mat)
        }
        "coordinate" => {
            let [m, n, nnz] = dims[..] else {
                return Err("coordinate size line must be 'rows cols nnz'".into());
            };
            let mut mat = DMatrix::zeros(m, n);
            for _ in 0..nnz {
                let i = next_value("triplets")? as usize;
                let j = next_value("triplets")? as usize;
                let v = next_value("triplets")?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(format!("coordinate ({i}, {j}) outside {m} x {n}"));
                }
                mat[(i - 1, j - 1)] += v;
                if symmetric && i != j {
                    mat[(j - 1, i - 1)] += v;
                }
            }
            Ok(mat)
        }
        other => Err(format!("unsupported format '{other}'")),
    }
}

/// Writes a matrix in Matrix Market dense array format with full precision.
pub fn write_matrix(path: &Path, mat: &DMatrix<f64>) -> Result<(), String> {
    let mut out = String::with_capacity(28 * mat.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", mat.nrows(), mat.ncols()));
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            out.push_str(&format!("{:.16e}\n", mat[(i, j)]));
        }
    }
    fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
