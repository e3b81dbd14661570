use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::knn::{fit_rows, KnnClassifier, KnnModel};
use super::metrics::{f_score, ConfusionMatrix};
use super::{Classifier, Dataset};
use crate::energy::Objective;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Wall-clock measurements, kept apart so reports compare by content.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalTiming {
    pub queries: u64,
    pub mean_prediction_ns: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: usize,
    pub seed: u64,
    /// Seeds handed to per-fold randomized steps.
    pub fold_seeds: Vec<u64>,
    pub f_score: f64,
    pub confusion: ConfusionMatrix,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Prediction for every sample, in dataset order.
    pub predictions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<EvalTiming>,
}

impl PartialEq for EvalReport {
    fn eq(&self, other: &Self) -> bool {
        self.folds == other.folds
            && self.seed == other.seed
            && self.fold_seeds == other.fold_seeds
            && self.f_score == other.f_score
            && self.confusion == other.confusion
            && self.precision == other.precision
            && self.recall == other.recall
            && self.predictions == other.predictions
    }
}

impl EvalReport {
    fn from_confusion(
        folds: usize,
        seed: u64,
        fold_seeds: Vec<u64>,
        confusion: ConfusionMatrix,
        predictions: Vec<usize>,
        timing: EvalTiming,
    ) -> Self {
        let n = confusion.n_classes;
        Self {
            folds,
            seed,
            fold_seeds,
            f_score: f_score(&confusion),
            precision: (0..n).map(|c| confusion.precision(c)).collect(),
            recall: (0..n).map(|c| confusion.recall(c)).collect(),
            confusion,
            predictions,
            timing: Some(timing),
        }
    }
}

/// Seeded shuffle split into `folds` near-equal contiguous test folds.
/// Returns the folds and one derived seed per fold.
fn split_folds(n: usize, folds: usize, seed: u64) -> Result<(Vec<Vec<usize>>, Vec<u64>)> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidParams(format!(
            "{folds} folds need between 2 and {n} (the dataset size)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = n / folds + usize::from(f < n % folds);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    let seeds = (0..folds).map(|_| rng.next_u64()).collect();
    Ok((out, seeds))
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    test.iter().for_each(|&i| in_test[i] = true);
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// Cross-validates any classifier; `make` builds a fresh one per fold.
pub fn cross_validate_with<F: Scalar, C: Classifier<F>>(
    dataset: &Dataset<F>,
    folds: usize,
    seed: u64,
    mut make: impl FnMut() -> C,
) -> Result<EvalReport> {
    let n = dataset.len();
    let (test_folds, fold_seeds) = split_folds(n, folds, seed)?;
    let mut confusion = ConfusionMatrix::new(dataset.n_classes());
    let mut predictions = vec![usize::MAX; n];
    let mut timing = EvalTiming::default();
    let mut elapsed_ns = 0u128;
    for test in &test_folds {
        let train_idx = complement(n, test);
        let x: Vec<Vec<F>> = train_idx.iter().map(|&i| dataset.samples[i].features.clone()).collect();
        let y: Vec<usize> = train_idx.iter().map(|&i| dataset.samples[i].label).collect();
        let mut clf = make();
        clf.fit(&x, &y)?;
        for &i in test {
            let t = Instant::now();
            let p = clf.predict(&dataset.samples[i].features)?;
            elapsed_ns += t.elapsed().as_nanos();
            timing.queries += 1;
            if p >= dataset.n_classes() {
                return Err(Error::Schema(format!("classifier predicted unknown class {p}")));
            }
            predictions[i] = p;
            confusion.record(dataset.samples[i].label, p);
        }
    }
    timing.mean_prediction_ns = elapsed_ns as f64 / timing.queries.max(1) as f64;
    Ok(EvalReport::from_confusion(folds, seed, fold_seeds, confusion, predictions, timing))
}

/// K-fold cross-validation of the KNN classifier on the selected features.
pub fn cross_validate<F: Scalar>(
    dataset: &Dataset<F>,
    k: usize,
    selected: &[usize],
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    cross_validate_with(dataset, folds, seed, || KnnClassifier {
        catalog: dataset.catalog.clone(),
        k,
        selected: selected.to_vec(),
        model: None,
    })
}

fn score<F: Scalar>(model: &KnnModel<F>, rows: &[Vec<F>], labels: &[usize], n_classes: usize) -> Result<f64> {
    let mut m = ConfusionMatrix::new(n_classes);
    for (row, &label) in rows.iter().zip(labels) {
        m.record(label, model.predict(row)?);
    }
    Ok(f_score(&m))
}

/// Mean drop in macro-F on `test` when each selected feature's column is
/// shuffled, over `repeats` seeded shuffles. Sorted by descending
/// importance, ties by catalog index.
pub fn permutation_importance<F: Scalar>(
    test: &Dataset<F>,
    model: &KnnModel<F>,
    seed: u64,
    repeats: usize,
) -> Result<Vec<(usize, f64)>> {
    if repeats == 0 {
        return Err(Error::InvalidParams("permutation importance needs at least one repeat".into()));
    }
    if test.is_empty() {
        return Err(Error::InvalidParams("empty held-out set".into()));
    }
    let n_classes = test.n_classes().max(model.classes.len());
    let rows = test.features();
    let labels = test.labels();
    let baseline = score(model, &rows, &labels, n_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(model.selected.len());
    let mut shuffled = rows.clone();
    for &j in &model.selected {
        let mut drop = 0.0;
        let mut column: Vec<F> = rows.iter().map(|r| r[j]).collect();
        for _ in 0..repeats {
            column.shuffle(&mut rng);
            for (r, &v) in shuffled.iter_mut().zip(&column) {
                r[j] = v;
            }
            drop += baseline - score(model, &shuffled, &labels, n_classes)?;
        }
        for (r, orig) in shuffled.iter_mut().zip(&rows) {
            r[j] = orig[j];
        }
        out.push((j, drop / repeats as f64));
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationPoint {
    pub n_features: usize,
    /// Catalog indices active at this step.
    pub features: Vec<usize>,
    pub f_score: f64,
    /// Distance terms per query: training size x feature count.
    pub prediction_ops: u64,
    /// Wall-clock, not part of equality checks on the curve.
    pub mean_prediction_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationResult {
    pub objective: Objective,
    pub selected: Vec<usize>,
    pub curve: Vec<EliminationPoint>,
}

/// Backward elimination from the full catalog: cross-validate, drop the
/// feature with the lowest fold-averaged permutation importance (the later
/// one on ties), repeat down to one feature. The selected set is the
/// smallest one reaching the best F-score seen.
pub fn iterative_elimination<F: Scalar>(
    dataset: &Dataset<F>,
    objective: Objective,
    seed: u64,
    k: usize,
    folds: usize,
    repeats: usize,
) -> Result<EliminationResult> {
    let data = dataset.for_objective(objective);
    if data.is_empty() {
        return Err(Error::InvalidParams(format!("no samples for objective {objective}")));
    }
    let n = data.len();
    let rows = data.features();
    let labels = data.labels();
    let mut active: Vec<usize> = (0..data.catalog.len()).collect();
    let mut curve = Vec::with_capacity(active.len());
    loop {
        let report = cross_validate(&data, k, &active, folds, seed)?;
        let (test_folds, fold_seeds) = split_folds(n, folds, seed)?;
        let train_size = n - test_folds.iter().map(Vec::len).max().unwrap_or(0);
        curve.push(EliminationPoint {
            n_features: active.len(),
            features: active.clone(),
            f_score: report.f_score,
            prediction_ops: (train_size * active.len()) as u64,
            mean_prediction_ns: report.timing.map_or(0.0, |t| t.mean_prediction_ns),
        });
        if active.len() == 1 {
            break;
        }
        let mut importance = vec![0.0; data.catalog.len()];
        for (test, &fold_seed) in test_folds.iter().zip(&fold_seeds) {
            let train_idx = complement(n, test);
            let x: Vec<Vec<F>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
            let y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let model = fit_rows(&data.catalog, &data.classes, &x, &y, k, &active)?;
            for (j, imp) in permutation_importance(&data.subset(test), &model, fold_seed, repeats)? {
                importance[j] += imp / folds as f64;
            }
        }
        let (pos, _) = active
            .iter()
            .enumerate()
            .min_by(|a, b| importance[*a.1].total_cmp(&importance[*b.1]).then(b.0.cmp(&a.0)))
            .expect("at least two active features");
        active.remove(pos);
    }
    let best = curve.iter().map(|p| p.f_score).fold(f64::NEG_INFINITY, f64::max);
    let selected = curve
        .iter()
        .filter(|p| p.f_score == best)
        .min_by_key(|p| p.n_features)
        .expect("non-empty curve")
        .features
        .clone();
    Ok(EliminationResult {
        objective,
        selected,
        curve,
    })
}
