//! Demo-problem files for the Newton solver.
//!
//! A problem is a JSON document:
//!
//! ```json
//! {
//!   "m": 10, "n": 10, "tau": 0.5,
//!   "A": "random:291",
//!   "b": [0.1, 0.2, 0.3, 0.4, 0.5],
//!   "C": [[...], ...],
//!   "y0": [0, 0, 0, 0, 0],
//!   "tol": 1e-8,
//!   "max_iter": 50
//! }
//! ```
//!
//! `A` is either `"random:<seed>"` (a seeded Gaussian measurement map with
//! one matrix per entry of `b`) or an explicit list of `m x n` matrices given
//! as nested row arrays. `y0`, `tol`, and `max_iter` are optional and default
//! to the zero vector, `1e-8`, and `50`.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use spectrop::solver::MeasurementMap;
use std::fs;
use std::path::Path;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    m: usize,
    n: usize,
    tau: f64,
    #[serde(rename = "A")]
    a: MeasurementSpec,
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(default)]
    y0: Option<Vec<f64>>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    max_iter: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeasurementSpec {
    Random(String),
    Explicit(Vec<Vec<Vec<f64>>>),
}

/// A fully materialized solver instance.
pub struct Problem {
    pub a: MeasurementMap,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub tau: f64,
    pub y0: DVector<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

fn nested_matrix(rows: &[Vec<f64>], m: usize, n: usize, what: &str) -> Result<DMatrix<f64>, String> {
    if rows.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{what} must be {m} rows of {n} entries"));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Loads and validates a problem file.
pub fn load_problem(path: &Path) -> Result<Problem, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let p = file.b.len();
    let a = match &file.a {
        MeasurementSpec::Random(tag) => {
            let seed = tag
                .strip_prefix("random:")
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| format!("field A string must be 'random:<seed>', got '{tag}'"))?;
            MeasurementMap::random(p, file.m, file.n, seed).map_err(|e| e.to_string())?
        }
        MeasurementSpec::Explicit(mats) => {
            if mats.len() != p {
                return Err(format!(
                    "field A lists {} matrices for {p} entries of b",
                    mats.len()
                ));
            }
            let built: Vec<DMatrix<f64>> = mats
                .iter()
                .enumerate()
                .map(|(k, rows)| nested_matrix(rows, file.m, file.n, &format!("A[{k}]")))
                .collect::<Result<_, _>>()?;
            MeasurementMap::new(built).map_err(|e| e.to_string())?
        }
    };
    let c = nested_matrix(&file.c, file.m, file.n, "C")?;
    let y0 = match &file.y0 {
        Some(v) if v.len() != p => {
            return Err(format!("y0 has {} entries, expected {p}", v.len()))
        }
        Some(v) => DVector::from_row_slice(v),
        None => DVector::zeros(p),
    };
    Ok(Problem {
        a,
        b: DVector::from_row_slice(&file.b),
        c,
        tau: file.tau,
        y0,
        tol: file.tol.unwrap_or(1e-8),
        max_iter: file.max_iter.unwrap_or(50),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(name: &str, text: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("spectrop-problem-tests");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn explicit_problem_loads_with_defaults() {
        let path = write_temp(
            "explicit.json",
            r#"{"m":1,"n":1,"tau":0.5,"A":[[[1.0]]],"b":[0.3],"C":[[0.0]]}"#,
        );
        let p = load_problem(&path).unwrap();
        assert_eq!(p.a.len(), 1);
        assert_eq!(p.y0, DVector::zeros(1));
        assert_eq!(p.tol, 1e-8);
        assert_eq!(p.max_iter, 50);
    }

    #[test]
    fn random_measurements_are_seeded() {
        let path = write_temp(
            "random.json",
            r#"{"m":3,"n":4,"tau":1.0,"A":"random:7","b":[0.1,0.2],"C":[[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#,
        );
        let p = load_problem(&path).unwrap();
        assert_eq!(p.a.len(), 2);
        assert_eq!(p.a.shape(), (3, 4));
        let again = load_problem(&path).unwrap();
        assert_eq!(p.a.mats()[0], again.a.mats()[0], "seeded map is deterministic");
    }

    #[test]
    fn shape_mismatches_are_reported() {
        let bad_c = write_temp(
            "bad_c.json",
            r#"{"m":2,"n":2,"tau":0.5,"A":"random:1","b":[0.1],"C":[[0.0,0.0]]}"#,
        );
        assert!(load_problem(&bad_c).err().unwrap().contains("C must be"));

        let bad_a = write_temp(
            "bad_a.json",
            r#"{"m":1,"n":1,"tau":0.5,"A":"random_seed","b":[0.1],"C":[[0.0]]}"#,
        );
        assert!(load_problem(&bad_a).err().unwrap().contains("random:<seed>"));

        let bad_y0 = write_temp(
            "bad_y0.json",
            r#"{"m":1,"n":1,"tau":0.5,"A":[[[1.0]]],"b":[0.1],"C":[[0.0]],"y0":[1.0,2.0]}"#,
        );
        assert!(load_problem(&bad_y0).err().unwrap().contains("y0"));
    }
}
