//! KNN retention-time classifier and its evaluation harness.

mod eval;
mod knn;
mod metrics;

pub use eval::{
    cross_validate, cross_validate_with, iterative_elimination, permutation_importance,
    EliminationPoint, EliminationResult, EvalReport, EvalTiming,
};
pub use knn::{fit_rows, train, KnnClassifier, KnnModel, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use metrics::{f_score, ConfusionMatrix};

use serde::{Deserialize, Serialize};

use crate::energy::Objective;
use crate::error::{Error, Result};
use crate::features::FeatureCatalog;
use crate::scalar::Scalar;

pub const DEFAULT_K: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LabeledSample<F> {
    pub workload: String,
    pub phase: String,
    pub objective: Objective,
    /// Raw (unstandardized) feature values in catalog order.
    pub features: Vec<F>,
    /// Index into the retention set.
    pub label: usize,
}

/// Samples sharing one catalog and one label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Dataset<F> {
    pub catalog: FeatureCatalog,
    /// Names of the label classes, index = label.
    pub classes: Vec<String>,
    pub samples: Vec<LabeledSample<F>>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(catalog: FeatureCatalog, classes: Vec<String>) -> Self {
        Self {
            catalog,
            classes,
            samples: Vec::new(),
        }
    }

    /// Builds an unnamed dataset from a matrix and labels (one objective).
    pub fn from_matrix(catalog: FeatureCatalog, n_classes: usize, x: Vec<Vec<F>>, y: Vec<usize>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        let mut d = Self::new(catalog, (0..n_classes).map(|c| format!("class{c}")).collect());
        for (i, (features, label)) in x.into_iter().zip(y).enumerate() {
            d.push(LabeledSample {
                workload: format!("s{i}"),
                phase: "p0".into(),
                objective: Objective::Latency,
                features,
                label,
            })?;
        }
        Ok(d)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: LabeledSample<F>) -> Result<()> {
        if sample.features.len() != self.catalog.len() {
            return Err(Error::Dimension {
                expected: self.catalog.len(),
                got: sample.features.len(),
            });
        }
        if sample.label >= self.n_classes() {
            return Err(Error::Schema(format!(
                "label {} outside the {} classes",
                sample.label,
                self.n_classes()
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    /// The samples for one objective.
    pub fn for_objective(&self, objective: Objective) -> Self {
        Self {
            catalog: self.catalog.clone(),
            classes: self.classes.clone(),
            samples: self.samples.iter().filter(|s| s.objective == objective).cloned().collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            catalog: self.catalog.clone(),
            classes: self.classes.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn features(&self) -> Vec<Vec<F>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Anything that can be fitted on raw feature rows and queried.
pub trait Classifier<F> {
    fn fit(&mut self, x: &[Vec<F>], y: &[usize]) -> Result<()>;
    fn predict(&self, x: &[F]) -> Result<usize>;
}
