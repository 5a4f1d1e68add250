use serde::{Deserialize, Serialize};

use crate::corpus::{dot, norm, EmbeddingMatrix, LabelKind, LabelSet, LabelValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// Lowest scale level to highest scale level.
    OrdinalPole,
    /// "no" centroid to "yes" centroid.
    BinaryCentroid,
    /// Bottom-third centroid to top-third centroid of a measurement.
    TercileCentroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// Drops values ≤ 0 and takes log10 of the rest.
    Log10Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisRecipe {
    pub kind: AxisKind,
    pub transform: Transform,
}

impl AxisRecipe {
    pub fn new(kind: AxisKind) -> Self {
        Self {
            kind,
            transform: Transform::Identity,
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    /// The natural recipe for a label set: ordinal poles, binary centroids or
    /// numeric terciles.
    pub fn for_labels(labels: &LabelSet) -> Result<Self> {
        let kind = match labels.kind {
            LabelKind::Ordinal => AxisKind::OrdinalPole,
            LabelKind::Binary => AxisKind::BinaryCentroid,
            LabelKind::Numeric => AxisKind::TercileCentroid,
            other => {
                return Err(Error::invalid(format!(
                    "{}: {other:?} labels do not define an axis",
                    labels.dimension
                )))
            }
        };
        Ok(Self::new(kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    FullData,
    Fold { repeat: usize, fold: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub definition: String,
    pub members: Vec<i64>,
}

/// Positions of the tercile cuts within the sorted training values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TercileCut {
    pub n: usize,
    /// Entities at sorted positions `< low_end` form the low pole.
    pub low_end: usize,
    /// Entities at sorted positions `>= high_start` form the high pole.
    pub high_start: usize,
    pub low_threshold: f64,
    pub high_threshold: f64,
}

/// A unit direction in embedding space running from a low pole to a high pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub kind: AxisKind,
    pub direction: Vec<f64>,
    pub low: Pole,
    pub high: Pole,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<TercileCut>,
    pub transform: Transform,
    pub provenance: Provenance,
}

impl Axis {
    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// Axis with a given direction and no pole bookkeeping, normalized.
    pub fn from_direction(name: impl Into<String>, direction: Vec<f64>) -> Result<Self> {
        let len = norm(&direction);
        if len == 0.0 || !len.is_finite() {
            return Err(Error::degenerate("axis direction has zero length"));
        }
        Ok(Self {
            name: name.into(),
            kind: AxisKind::OrdinalPole,
            direction: direction.into_iter().map(|v| v / len).collect(),
            low: Pole {
                definition: "given".into(),
                members: Vec::new(),
            },
            high: Pole {
                definition: "given".into(),
                members: Vec::new(),
            },
            cut: None,
            transform: Transform::Identity,
            provenance: Provenance::FullData,
        })
    }

    pub fn project_row(&self, v: &[f64]) -> f64 {
        dot(v, &self.direction)
    }
}

/// Scalar projections of entities onto one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSet {
    pub axis: String,
    pub values: Vec<(i64, f64)>,
}

/// Projects the given entities onto `axis`, in the order given.
pub fn project(matrix: &EmbeddingMatrix, axis: &Axis, ids: &[i64]) -> Result<ProjectionSet> {
    if matrix.dim() != axis.dim() {
        return Err(Error::DimensionMismatch {
            expected: axis.dim(),
            actual: matrix.dim(),
        });
    }
    let values = ids
        .iter()
        .map(|&id| Ok((id, axis.project_row(matrix.row(matrix.require_id(id)?)))))
        .collect::<Result<_>>()?;
    Ok(ProjectionSet {
        axis: axis.name.clone(),
        values,
    })
}

/// Labeled entities reduced to one scalar each, ordered by entity id.
///
/// The scalar is the scale rank for ordinal labels, 1/0 for binary labels and
/// the (optionally transformed) value for measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisData {
    pub name: String,
    pub recipe: AxisRecipe,
    pub rows: Vec<usize>,
    pub ids: Vec<i64>,
    pub values: Vec<f64>,
    /// Highest rank for ordinal data (scale length − 1).
    pub top_level: f64,
    pub scale: Vec<String>,
    pub notes: Vec<String>,
}

impl AxisData {
    pub fn from_labels(matrix: &EmbeddingMatrix, labels: &LabelSet, recipe: AxisRecipe) -> Result<Self> {
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut dropped = 0usize;
        for (row, value) in labels.resolve(matrix)? {
            let scalar = match (recipe.kind, value) {
                (AxisKind::OrdinalPole, LabelValue::Level(_))
                | (AxisKind::BinaryCentroid, LabelValue::Flag(_))
                | (AxisKind::TercileCentroid, LabelValue::Number(_))
                | (AxisKind::TercileCentroid, LabelValue::Level(_)) => labels.scalar(value),
                _ => None,
            }
            .ok_or_else(|| {
                Error::invalid(format!(
                    "{}: {:?} labels cannot build a {:?} axis",
                    labels.dimension, labels.kind, recipe.kind
                ))
            })?;
            let scalar = match recipe.transform {
                Transform::Identity => scalar,
                Transform::Log10Positive if scalar > 0.0 => scalar.log10(),
                Transform::Log10Positive => {
                    dropped += 1;
                    continue;
                }
            };
            rows.push(row);
            ids.push(matrix.entity(row).id);
            values.push(scalar);
        }
        let mut notes = Vec::new();
        if dropped > 0 {
            notes.push(format!("{dropped} entities with non-positive values excluded before log10"));
        }
        if !labels.missing.is_empty() {
            notes.push(format!("{} entities without a label excluded", labels.missing.len()));
        }
        let top_level = labels.scale.len().saturating_sub(1) as f64;
        Ok(Self {
            name: labels.dimension.clone(),
            recipe,
            rows,
            ids,
            values,
            top_level,
            scale: labels.scale.clone(),
            notes,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Pole membership (as item indices) among `items`.
    pub fn poles(&self, items: &[usize]) -> Result<(Vec<usize>, Vec<usize>, Option<TercileCut>)> {
        match self.recipe.kind {
            AxisKind::OrdinalPole => {
                let low = items.iter().copied().filter(|&i| self.values[i] == 0.0).collect();
                let high = items
                    .iter()
                    .copied()
                    .filter(|&i| self.values[i] == self.top_level)
                    .collect();
                Ok((low, high, None))
            }
            AxisKind::BinaryCentroid => {
                let low = items.iter().copied().filter(|&i| self.values[i] == 0.0).collect();
                let high = items.iter().copied().filter(|&i| self.values[i] == 1.0).collect();
                Ok((low, high, None))
            }
            AxisKind::TercileCentroid => {
                if items.len() < 6 {
                    return Err(Error::invalid(format!(
                        "{}: tercile axes need at least 6 values, got {}",
                        self.name,
                        items.len()
                    )));
                }
                let mut sorted = items.to_vec();
                sorted.sort_by(|&a, &b| {
                    self.values[a]
                        .total_cmp(&self.values[b])
                        .then(self.ids[a].cmp(&self.ids[b]))
                });
                let n = sorted.len();
                let third = n / 3;
                let cut = TercileCut {
                    n,
                    low_end: third,
                    high_start: n - third,
                    low_threshold: self.values[sorted[third - 1]],
                    high_threshold: self.values[sorted[n - third]],
                };
                Ok((
                    sorted[..third].to_vec(),
                    sorted[n - third..].to_vec(),
                    Some(cut),
                ))
            }
        }
    }

    fn pole_definitions(&self) -> (String, String) {
        match self.recipe.kind {
            AxisKind::OrdinalPole => (
                format!("level {}", self.scale.first().map_or("0", String::as_str)),
                format!("level {}", self.scale.last().map_or("top", String::as_str)),
            ),
            AxisKind::BinaryCentroid => ("no".into(), "yes".into()),
            AxisKind::TercileCentroid => ("bottom third".into(), "top third".into()),
        }
    }

    /// Builds an axis from the items in `train` only.
    pub fn build(&self, matrix: &EmbeddingMatrix, train: &[usize], provenance: Provenance) -> Result<Axis> {
        let (low, high, cut) = self.poles(train)?;
        if low.is_empty() || high.is_empty() {
            return Err(Error::degenerate(format!(
                "{}: empty {} pole",
                self.name,
                if low.is_empty() { "low" } else { "high" }
            )));
        }
        let dim = matrix.dim();
        let mut direction = vec![0.0; dim];
        for (items, weight) in [(&high, 1.0 / high.len() as f64), (&low, -1.0 / low.len() as f64)] {
            for &i in items.iter() {
                for (d, v) in direction.iter_mut().zip(matrix.row(self.rows[i])) {
                    *d += weight * v;
                }
            }
        }
        let len = norm(&direction);
        if len <= f64::MIN_POSITIVE {
            return Err(Error::degenerate(format!(
                "{}: pole centroids coincide",
                self.name
            )));
        }
        direction.iter_mut().for_each(|d| *d /= len);
        let (low_def, high_def) = self.pole_definitions();
        let members = |items: &[usize]| {
            let mut ids: Vec<i64> = items.iter().map(|&i| self.ids[i]).collect();
            ids.sort_unstable();
            ids
        };
        Ok(Axis {
            name: self.name.clone(),
            kind: self.recipe.kind,
            direction,
            low: Pole {
                definition: low_def,
                members: members(&low),
            },
            high: Pole {
                definition: high_def,
                members: members(&high),
            },
            cut,
            transform: self.recipe.transform,
            provenance,
        })
    }

    /// Projections of `items` onto `axis`.
    pub fn project_items(&self, matrix: &EmbeddingMatrix, axis: &Axis, items: &[usize]) -> Vec<f64> {
        items
            .iter()
            .map(|&i| axis.project_row(matrix.row(self.rows[i])))
            .collect()
    }
}

/// Builds the full-data axis for `labels` using `recipe`.
pub fn build_axis(matrix: &EmbeddingMatrix, labels: &LabelSet, recipe: AxisRecipe) -> Result<Axis> {
    let data = AxisData::from_labels(matrix, labels, recipe)?;
    data.build(matrix, &data.all(), Provenance::FullData)
}
