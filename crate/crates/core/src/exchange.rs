//! Matrix exchange documents: `{"dim": n, "rows": [[[re, im], ...], ...]}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;

/// Largest dimension accepted from a document.
pub const MAX_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub dim: usize,
    pub rows: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExchangeError {
    #[error("dim must be between 1 and {MAX_DIM}, got {0}")]
    Dimension(usize),
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("{0}")]
    Syntax(String),
}

pub fn complex(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

impl MatrixDocument {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixDocument {
            dim: m.nrows(),
            rows: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, ExchangeError> {
        let n = self.dim;
        if n == 0 || n > MAX_DIM {
            return Err(ExchangeError::Dimension(n));
        }
        if self.rows.len() != n {
            return Err(ExchangeError::RowCount {
                expected: n,
                found: self.rows.len(),
            });
        }
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(ExchangeError::RowLength {
                    row: i,
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &entry) in row.iter().enumerate() {
                if !(entry[0].is_finite() && entry[1].is_finite()) {
                    return Err(ExchangeError::NonFinite { row: i, col: j });
                }
                m[(i, j)] = complex(entry);
            }
        }
        Ok(m)
    }
}

pub fn parse_matrix(text: &str) -> Result<CMatrix, ExchangeError> {
    let doc: MatrixDocument =
        serde_json::from_str(text).map_err(|e| ExchangeError::Syntax(e.to_string()))?;
    doc.to_matrix()
}

pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string_pretty(&MatrixDocument::from_matrix(m))
        .expect("matrix documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn round_trip() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.5), c(-2.0, 0.0), c(0.0, 1e-300), c(3.25, -7.0)],
        );
        assert_eq!(parse_matrix(&matrix_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(
            parse_matrix(r#"{"dim":0,"rows":[]}"#),
            Err(ExchangeError::Dimension(0))
        );
        assert!(matches!(
            parse_matrix(r#"{"dim":2,"rows":[[[1,0],[0,0]]]}"#),
            Err(ExchangeError::RowCount { .. })
        ));
        assert!(matches!(
            parse_matrix(r#"{"dim":1,"rows":[[[1,0],[0,0]]]}"#),
            Err(ExchangeError::RowLength { .. })
        ));
        assert!(matches!(
            parse_matrix(r#"{"dim":1,"rows":[[[1,0]]],"extra":1}"#),
            Err(ExchangeError::Syntax(_))
        ));
    }
}
