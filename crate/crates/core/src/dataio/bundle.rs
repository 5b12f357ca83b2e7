use ndarray::{Array2, Axis};

use super::error::DataError;
use crate::scalar::{to_f64, Real};

/// Sample matrix with entries in `[0, 1]` plus optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle<T: Real> {
    pub name: String,
    /// `n x dim`, row-major.
    pub x: Array2<T>,
    pub labels: Option<Vec<usize>>,
}

impl<T: Real> DatasetBundle<T> {
    pub fn new(
        name: impl Into<String>,
        x: Array2<T>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, DataError> {
        let bundle = Self {
            name: name.into(),
            x,
            labels,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// `max(label) + 1`, or `None` without labels.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for (row, r) in self.x.axis_iter(Axis(0)).enumerate() {
            if let Some(&v) = r.iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
                return Err(DataError::OutOfRange {
                    row,
                    value: to_f64(v),
                });
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.n() {
                return Err(DataError::CountMismatch {
                    images: self.n(),
                    labels: labels.len(),
                });
            }
        }
        Ok(())
    }

    /// Row-wise concatenation, used to merge train and test splits.
    /// Labels survive only if both parts carry them.
    pub fn concat(&self, other: &Self) -> Result<Self, DataError> {
        if self.dim() != other.dim() {
            return Err(DataError::InvalidArgument(format!(
                "cannot concatenate dim {} with dim {}",
                self.dim(),
                other.dim()
            )));
        }
        let x =
            ndarray::concatenate(Axis(0), &[self.x.view(), other.x.view()]).expect("dims checked");
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Self {
            name: format!("{}+{}", self.name, other.name),
            x,
            labels,
        })
    }

    /// Same dataset with `x` replaced (e.g. by a corrupted copy).
    pub fn with_x(&self, x: Array2<T>) -> Self {
        Self {
            name: self.name.clone(),
            x,
            labels: self.labels.clone(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Array2<T> {
        self.x.select(Axis(0), idx)
    }
}
