use serde::{Deserialize, Serialize};

/// Square confusion matrix, rows = true class, columns = predicted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_rows(counts: Vec<Vec<u64>>) -> Self {
        let n = counts.len();
        assert!(counts.iter().all(|r| r.len() == n), "confusion matrix must be square");
        Self { n_classes: n, counts }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// Zero when the class was never predicted.
    pub fn precision(&self, class: usize) -> f64 {
        let p = self.col_sum(class);
        if p == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / p as f64
        }
    }

    /// Zero when the class never occurs.
    pub fn recall(&self, class: usize) -> f64 {
        let t = self.row_sum(class);
        if t == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / t as f64
        }
    }

    pub fn f1(&self, class: usize) -> f64 {
        let (p, r) = (self.precision(class), self.recall(class));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Macro-averaged F1 over every class of the matrix.
pub fn f_score(confusion: &ConfusionMatrix) -> f64 {
    if confusion.n_classes == 0 {
        return 0.0;
    }
    (0..confusion.n_classes).map(|c| confusion.f1(c)).sum::<f64>() / confusion.n_classes as f64
}
