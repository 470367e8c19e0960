//! Matrix interchange documents.
//!
//! A matrix is `{"n": 2, "entries": [[re, im], ...]}` with `n * n` entries
//! in row-major order. A pair document holds two such matrices under the
//! keys `"A"` and `"B"`.

use expconvex::hermitian::{ComplexMatrix, HermitianMatrix, UnitaryMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub n: usize,
    pub entries: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDoc {
    #[serde(rename = "A")]
    pub a: MatrixDoc,
    #[serde(rename = "B")]
    pub b: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFile {
    Single(MatrixDoc),
    Pair(PairDoc),
}

/// Parses a document; errors carry line and column from the JSON reader, or
/// the matrix name and entry position for shape problems.
pub fn parse(text: &str) -> Result<MatrixFile, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("parse error: {e}"))?;
    let is_pair = value
        .as_object()
        .is_some_and(|o| o.contains_key("A") || o.contains_key("B"));
    let file = if is_pair {
        MatrixFile::Pair(serde_json::from_str(text).map_err(|e| format!("parse error: {e}"))?)
    } else {
        MatrixFile::Single(serde_json::from_str(text).map_err(|e| format!("parse error: {e}"))?)
    };
    match &file {
        MatrixFile::Single(m) => check_shape("matrix", m)?,
        MatrixFile::Pair(p) => {
            check_shape("matrix A", &p.a)?;
            check_shape("matrix B", &p.b)?;
        }
    }
    Ok(file)
}

fn check_shape(name: &str, m: &MatrixDoc) -> Result<(), String> {
    if m.n == 0 {
        return Err(format!("{name}: n must be positive"));
    }
    let expected = m.n * m.n;
    if m.entries.len() != expected {
        let position = m.entries.len().min(expected);
        return Err(format!(
            "{name}: n = {} requires {expected} entries, found {} (first mismatch at entry {position}, row {}, column {})",
            m.n,
            m.entries.len(),
            position / m.n,
            position % m.n,
        ));
    }
    Ok(())
}

impl MatrixDoc {
    pub fn to_hermitian(&self, name: &str) -> Result<HermitianMatrix, String> {
        check_shape(name, self)?;
        let entries: Vec<Complex64> = self
            .entries
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        let m = ComplexMatrix::from_row_major(self.n, self.n, &entries)
            .map_err(|e| format!("{name}: {e}"))?;
        HermitianMatrix::new(m).map_err(|e| format!("{name}: {e}"))
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self {
            n: m.nrows(),
            entries: m.row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_hermitian(h: &HermitianMatrix) -> Self {
        Self::from_matrix(h.as_matrix())
    }

    pub fn from_unitary(u: &UnitaryMatrix) -> Self {
        Self::from_matrix(u.as_matrix())
    }
}

impl PairDoc {
    pub fn to_pair(&self) -> Result<(HermitianMatrix, HermitianMatrix), String> {
        Ok((
            self.a.to_hermitian("matrix A")?,
            self.b.to_hermitian("matrix B")?,
        ))
    }
}

/// Reads a pair document from `path`.
pub fn read_pair(path: &std::path::Path) -> Result<(HermitianMatrix, HermitianMatrix), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    match parse(&text).map_err(|e| format!("{}: {e}", path.display()))? {
        MatrixFile::Pair(p) => p.to_pair(),
        MatrixFile::Single(_) => Err(format!(
            "{}: expected a document with keys \"A\" and \"B\"",
            path.display()
        )),
    }
}

pub fn complex_list(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}
