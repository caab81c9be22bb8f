use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("distance file: {0}")]
    Csv(#[from] csv::Error),
    #[error("distance file lists ({0}, {1}) twice with different values")]
    Conflict(String, String),
    #[error("distance file misses the pair ({0}, {1})")]
    Missing(String, String),
    #[error("distance file gives {0} a nonzero distance to itself")]
    NonzeroDiagonal(String),
}

/// Symmetric matrix of package distances with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    package_ids: Vec<String>,
    values: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    package_id_a: String,
    package_id_b: String,
    distance: u32,
}

impl DistanceMatrix {
    /// Fills the upper triangle from `distance(i, j)` for `i < j` in
    /// row-major order and mirrors it.
    pub fn compute<F>(package_ids: Vec<String>, distance: F) -> Self
    where
        F: Fn(usize, usize) -> u32 + Sync + Send,
    {
        let n = package_ids.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let results = crate::par::map_collect(&pairs, |&(i, j)| distance(i, j));
        let mut values = vec![0; n * n];
        for (&(i, j), d) in pairs.iter().zip(results) {
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
        Self { package_ids, values }
    }

    /// Builds from a full row-major matrix. Panics if it is not square,
    /// symmetric and zero on the diagonal.
    pub fn from_rows(package_ids: Vec<String>, rows: &[Vec<u32>]) -> Self {
        let n = package_ids.len();
        assert_eq!(rows.len(), n);
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            assert_eq!(row[i], 0, "diagonal must be zero");
            values.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(values[i * n + j], values[j * n + i], "matrix must be symmetric");
            }
        }
        Self { package_ids, values }
    }

    pub fn len(&self) -> usize {
        self.package_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.package_ids.is_empty()
    }

    pub fn package_ids(&self) -> &[String] {
        &self.package_ids
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.values[i * self.len() + j]
    }

    /// Row-major values.
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Writes `package_id_a,package_id_b,distance` rows for every `i ≤ j`,
    /// self-pairs included so that the package list survives a round trip.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(writer);
        for i in 0..self.len() {
            for j in i..self.len() {
                w.serialize(Row {
                    package_id_a: self.package_ids[i].clone(),
                    package_id_b: self.package_ids[j].clone(),
                    distance: self.get(i, j),
                })?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the format of [`DistanceMatrix::write_csv`]. Package order is
    /// the order of first appearance.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MatrixError> {
        let mut r = csv::Reader::from_reader(reader);
        let mut ids: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut entries: HashMap<(usize, usize), u32> = HashMap::new();
        for row in r.deserialize::<Row>() {
            let row = row?;
            let mut idx = |id: &String| {
                *index.entry(id.clone()).or_insert_with(|| {
                    ids.push(id.clone());
                    ids.len() - 1
                })
            };
            let a = idx(&row.package_id_a);
            let b = idx(&row.package_id_b);
            if a == b && row.distance != 0 {
                return Err(MatrixError::NonzeroDiagonal(row.package_id_a));
            }
            let key = (a.min(b), a.max(b));
            if let Some(&previous) = entries.get(&key) {
                if previous != row.distance {
                    return Err(MatrixError::Conflict(row.package_id_a, row.package_id_b));
                }
            }
            entries.insert(key, row.distance);
        }
        let n = ids.len();
        let mut values = vec![0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = *entries
                    .get(&(i, j))
                    .ok_or_else(|| MatrixError::Missing(ids[i].clone(), ids[j].clone()))?;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(Self { package_ids: ids, values })
    }
}
