//! Tabular fairness datasets: binary label, binary sensitive attribute,
//! real-valued features.

mod csv_io;
mod toy;

pub use csv_io::{
    load_csv, load_dataset, save_dataset, split_by_column, value_counts, EncodedSplit, LoadReport,
    RawTable,
    SchemaConfig,
};
pub use toy::{make_toy, GroupSpec, ToySpec};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub a: Vec<u8>,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        x: Array2<f64>,
        y: Vec<u8>,
        a: Vec<u8>,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || a.len() != n {
            return Err(Error::InvalidData(format!(
                "row counts disagree: x has {n}, y has {}, a has {}",
                y.len(),
                a.len()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::InvalidData(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if y.iter().chain(&a).any(|&v| v > 1) {
            return Err(Error::InvalidData("labels and sensitive attribute must be 0/1".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        Ok(Self {
            x,
            y,
            a,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Row indices with sensitive attribute `group`.
    pub fn group_rows(&self, group: u8) -> Vec<usize> {
        self.a
            .iter()
            .enumerate()
            .filter_map(|(i, &g)| (g == group).then_some(i))
            .collect()
    }

    /// Row indices of group `group`, failing when it is empty.
    pub fn nonempty_group_rows(&self, group: u8) -> Result<Vec<usize>> {
        let rows = self.group_rows(group);
        if rows.is_empty() {
            return Err(Error::DegenerateGroup { group });
        }
        Ok(rows)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            a: rows.iter().map(|&i| self.a[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// The group view `S_a`.
    pub fn group(&self, group: u8) -> Dataset {
        self.subset(&self.group_rows(group))
    }

    pub fn positive_rate(&self) -> f64 {
        self.y.iter().map(|&v| v as f64).sum::<f64>() / self.len().max(1) as f64
    }
}
