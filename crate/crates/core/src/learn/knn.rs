use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset};
use crate::error::{Error, Result};
use crate::features::{FeatureCatalog, Standardizer};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "retention-lab-knn";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Uniform-weight k-nearest-neighbor classifier over standardized,
/// selected features with squared Euclidean distance.
///
/// Neighbors are ordered by (distance, label, training index). A vote tie
/// goes to the label of the nearest neighbor among the tied labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct KnnModel<F> {
    pub k: usize,
    pub catalog: FeatureCatalog,
    pub classes: Vec<String>,
    /// Catalog indices the model uses, in use order.
    pub selected: Vec<usize>,
    /// Fitted on the selected columns of the training set.
    pub standardizer: Standardizer<F>,
    pub train: Vec<Vec<F>>,
    pub labels: Vec<usize>,
}

fn check_selected(selected: &[usize], dim: usize) -> Result<()> {
    if selected.is_empty() {
        return Err(Error::InvalidParams("no features selected".into()));
    }
    for (i, &j) in selected.iter().enumerate() {
        if j >= dim {
            return Err(Error::InvalidParams(format!("feature index {j} outside catalog of {dim}")));
        }
        if selected[..i].contains(&j) {
            return Err(Error::InvalidParams(format!("feature index {j} selected twice")));
        }
    }
    Ok(())
}

fn pick<F: Scalar>(v: &[F], selected: &[usize]) -> Vec<F> {
    selected.iter().map(|&j| v[j]).collect()
}

fn fit_standardizer<F: Scalar>(rows: &[Vec<F>]) -> Result<Standardizer<F>> {
    if rows.len() == 1 {
        let dim = rows[0].len();
        return Ok(Standardizer {
            mean: rows[0].clone(),
            std: vec![F::zero(); dim],
        });
    }
    Standardizer::fit(rows)
}

/// Fits a model on raw rows and labels.
pub fn fit_rows<F: Scalar>(
    catalog: &FeatureCatalog,
    classes: &[String],
    x: &[Vec<F>],
    y: &[usize],
    k: usize,
    selected: &[usize],
) -> Result<KnnModel<F>> {
    if x.is_empty() {
        return Err(Error::InvalidParams("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if k == 0 || k > x.len() {
        return Err(Error::InvalidParams(format!(
            "k = {k} must be between 1 and the training size {}",
            x.len()
        )));
    }
    check_selected(selected, catalog.len())?;
    if let Some(row) = x.iter().find(|r| r.len() != catalog.len()) {
        return Err(Error::Dimension {
            expected: catalog.len(),
            got: row.len(),
        });
    }
    let picked: Vec<Vec<F>> = x.iter().map(|r| pick(r, selected)).collect();
    let standardizer = fit_standardizer(&picked)?;
    let train = picked
        .iter()
        .map(|r| standardizer.apply(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(KnnModel {
        k,
        catalog: catalog.clone(),
        classes: classes.to_vec(),
        selected: selected.to_vec(),
        standardizer,
        train,
        labels: y.to_vec(),
    })
}

pub fn train<F: Scalar>(dataset: &Dataset<F>, k: usize, selected: &[usize]) -> Result<KnnModel<F>> {
    fit_rows(
        &dataset.catalog,
        &dataset.classes,
        &dataset.features(),
        &dataset.labels(),
        k,
        selected,
    )
}

impl<F: Scalar> KnnModel<F> {
    /// Label plus the number of per-feature distance terms evaluated.
    pub fn predict_counted(&self, raw: &[F]) -> Result<(usize, u64)> {
        if raw.len() != self.catalog.len() {
            return Err(Error::Dimension {
                expected: self.catalog.len(),
                got: raw.len(),
            });
        }
        let q = self.standardizer.apply(&pick(raw, &self.selected))?;
        let mut ops = 0u64;
        let mut neigh: Vec<(F, usize, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(i, row)| {
                ops += row.len() as u64;
                let d = row.iter().zip(&q).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>();
                (d, self.labels[i], i)
            })
            .collect();
        let order = |a: &(F, usize, usize), b: &(F, usize, usize)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        };
        let k = self.k.min(neigh.len());
        if k < neigh.len() {
            neigh.select_nth_unstable_by(k - 1, order);
            neigh.truncate(k);
        }
        neigh.sort_by(order);

        let n_labels = self.labels.iter().max().map_or(0, |m| m + 1);
        let mut votes = vec![0usize; n_labels];
        for &(_, label, _) in &neigh {
            votes[label] += 1;
        }
        let best = *votes.iter().max().expect("k >= 1");
        let label = neigh
            .iter()
            .map(|&(_, l, _)| l)
            .find(|&l| votes[l] == best)
            .expect("a neighbor carries the winning count");
        Ok((label, ops))
    }

    pub fn predict(&self, raw: &[F]) -> Result<usize> {
        self.predict_counted(raw).map(|(l, _)| l)
    }

    pub fn selected_names(&self) -> Vec<&'static str> {
        self.selected.iter().map(|&j| self.catalog.features[j].name()).collect()
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            format_version: MODEL_FORMAT_VERSION,
            catalog_version: self.catalog.version.clone(),
            model: self.clone(),
        };
        serde_json::to_writer_pretty(out, &file)?;
        Ok(())
    }

    /// Loads a model and checks it against the catalog in use.
    pub fn load<R: Read>(input: R, expected: &FeatureCatalog) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        match value.get("format").and_then(|v| v.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => {
                return Err(Error::Schema(format!(
                    "not a model file (format {:?})",
                    other.unwrap_or("missing")
                )))
            }
        }
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(Error::Schema(format!(
                "unsupported model format version {version:?}"
            )));
        }
        let catalog_version = value
            .get("catalog_version")
            .and_then(|v| v.as_str())
            .unwrap_or_default();
        expected.check_version(catalog_version)?;
        let file: ModelFile<F> = serde_json::from_value(value)?;
        let m = file.model;
        if m.catalog != *expected {
            return Err(Error::CatalogMismatch {
                expected: expected.version.clone(),
                found: format!("{} (different feature list)", m.catalog.version),
            });
        }
        check_selected(&m.selected, m.catalog.len())?;
        if m.train.len() != m.labels.len() || m.k == 0 || m.k > m.train.len() {
            return Err(Error::Schema("inconsistent model contents".into()));
        }
        if m.train.iter().any(|r| r.len() != m.selected.len())
            || m.standardizer.dim() != m.selected.len()
        {
            return Err(Error::Schema("model rows do not match its selected features".into()));
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct ModelFile<F> {
    format: String,
    format_version: u32,
    catalog_version: String,
    model: KnnModel<F>,
}

/// [`Classifier`] adapter that fits a fresh KNN model on each call.
#[derive(Clone, Debug)]
pub struct KnnClassifier<F> {
    pub catalog: FeatureCatalog,
    pub k: usize,
    pub selected: Vec<usize>,
    pub model: Option<KnnModel<F>>,
}

impl<F: Scalar> Classifier<F> for KnnClassifier<F> {
    fn fit(&mut self, x: &[Vec<F>], y: &[usize]) -> Result<()> {
        self.model = Some(fit_rows(&self.catalog, &[], x, y, self.k, &self.selected)?);
        Ok(())
    }

    fn predict(&self, x: &[F]) -> Result<usize> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("classifier used before fit".into()))?
            .predict(x)
    }
}
