//! Serialization helpers shared by the structured (JSON) outputs.

use serde::ser::{SerializeSeq, Serializer};

use crate::linalg::{Matrix, Vector};

/// Matrices serialize as nested row arrays.
pub fn ser_matrix<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in m.row_iter() {
        let row: Vec<f64> = r.iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub fn ser_vector<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
