//! JSON form of square complex matrices:
//!
//! ```json
//! { "dim": 2, "re": [1.0, 0.0, 0.0, 0.0], "im": [0.0, 0.0, 0.0, 0.0] }
//! ```
//!
//! Entries are row-major. `im` may be omitted for real matrices.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::state::DensityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        assert!(m.is_square(), "only square matrices have a JSON form");
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dim: n, re, im: Some(im) }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::validation("matrix dim must be positive"));
        }
        if self.re.len() != n * n {
            return Err(Error::validation(format!("'re' has {} entries, expected {}", self.re.len(), n * n)));
        }
        if let Some(im) = &self.im {
            if im.len() != n * n {
                return Err(Error::validation(format!("'im' has {} entries, expected {}", im.len(), n * n)));
            }
        }
        let im = |k: usize| self.im.as_ref().map_or(0.0, |v| v[k]);
        Ok(ComplexMatrix::from_fn(n, n, |i, j| C64::new(self.re[i * n + j], im(i * n + j))))
    }
}

/// `#[serde(with = "crate::serial::matrix")]` adapter for `ComplexMatrix` fields.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexMatrix, D::Error> {
        MatrixJson::deserialize(d)?.to_matrix().map_err(serde::de::Error::custom)
    }
}

/// Same as [`matrix`] for `Option<ComplexMatrix>`.
pub mod opt_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<ComplexMatrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixJson::from_matrix).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<ComplexMatrix>, D::Error> {
        Option::<MatrixJson>::deserialize(d)?
            .map(|m| m.to_matrix())
            .transpose()
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(self.matrix()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixJson::deserialize(d)?.to_matrix().map_err(serde::de::Error::custom)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}
