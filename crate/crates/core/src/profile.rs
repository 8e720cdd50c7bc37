use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::MaxAbsResidual;

/// Position-resolved data: one fixed-length row of real values per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    label: String,
    columns: Vec<String>,
    points: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Profile {
    pub fn new(
        label: impl Into<String>,
        columns: Vec<String>,
        points: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "profile points must be strictly increasing".into(),
            ));
        }
        if values.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} points but {} value rows",
                points.len(),
                values.len()
            )));
        }
        if let Some(row) = values.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::InvalidArgument(format!(
                "profile row of length {} does not match {} columns",
                row.len(),
                columns.len()
            )));
        }
        Ok(Self {
            label: label.into(),
            columns,
            points,
            values,
        })
    }

    /// Single-column profile.
    pub fn scalar(label: impl Into<String>, points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        let rows = values.into_iter().map(|v| vec![v]).collect();
        Self::new(label.clone(), vec![label], points, rows)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[index]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.column(idx))
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Riemann sum `sum_k weight * value_k` of one column.
    pub fn riemann_sum(&self, column: usize, weight: f64) -> f64 {
        self.values.iter().map(|row| row[column]).sum::<f64>() * weight
    }
}

impl MaxAbsResidual for Profile {
    fn max_abs_residual(&self, other: &Self) -> Result<f64> {
        if self.points.len() != other.points.len() || self.columns.len() != other.columns.len() {
            return Err(Error::DimensionMismatch {
                context: "profile residual",
                left: format!("{}x{}", self.points.len(), self.columns.len()),
                right: format!("{}x{}", other.points.len(), other.columns.len()),
            });
        }
        Ok(self
            .values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
    }
}
