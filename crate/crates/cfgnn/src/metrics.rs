//! Confusion-matrix evaluation for imbalanced multiclass classifiers.
//!
//! Beyond the usual precision/recall/F1 family this module carries the three
//! skew-robust statistics: the geometric mean of per-class recalls, the
//! multiclass Matthews correlation coefficient (the R_k statistic), and the
//! classification mean accuracy cmA (the plain average of per-class recalls).
//!
//! Zero-denominator conventions, applied uniformly: precision, recall, and F1
//! are 0 whenever their denominator is 0, and a degenerate MCC denominator
//! yields 0.

use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("prediction and truth lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Counts indexed `(true class, predicted class)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

/// Build a confusion matrix from label vectors.
pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for &label in &[t, p] {
            if label >= classes {
                return Err(MetricsError::LabelOutOfRange { label, classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Per-class precision/recall/F1 plus their macro and weighted averages.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRecallF1 {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let c = counts.len();
        assert!(counts.iter().all(|row| row.len() == c), "confusion matrix must be square");
        ConfusionMatrix { counts }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// True-class count for class `k` (row sum).
    pub fn support(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// Predicted-class count for class `k` (column sum).
    pub fn predicted(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.classes()).map(|k| self.counts[k][k]).sum();
        trace as f64 / total as f64
    }

    pub fn precision_recall_f1(&self) -> PrecisionRecallF1 {
        let c = self.classes();
        let total = self.total() as f64;
        let mut precision = Vec::with_capacity(c);
        let mut recall = Vec::with_capacity(c);
        let mut f1 = Vec::with_capacity(c);
        for k in 0..c {
            let tp = self.counts[k][k] as f64;
            let fp = self.predicted(k) as f64 - tp;
            let fn_ = self.support(k) as f64 - tp;
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            precision.push(p);
            recall.push(r);
            f1.push(f);
        }
        let macro_avg = |xs: &[f64]| xs.iter().sum::<f64>() / c as f64;
        let weighted_avg = |xs: &[f64]| {
            if total == 0.0 {
                0.0
            } else {
                xs.iter().enumerate().map(|(k, &x)| x * self.support(k) as f64).sum::<f64>() / total
            }
        };
        PrecisionRecallF1 {
            macro_precision: macro_avg(&precision),
            macro_recall: macro_avg(&recall),
            macro_f1: macro_avg(&f1),
            weighted_precision: weighted_avg(&precision),
            weighted_recall: weighted_avg(&recall),
            weighted_f1: weighted_avg(&f1),
            precision,
            recall,
            f1,
        }
    }

    /// Geometric mean of per-class recalls, `(prod_k recall_k)^(1/C)`.
    /// For two classes this is the familiar `sqrt(TPR * TNR)`.
    pub fn g_mean(&self) -> f64 {
        let recalls = self.precision_recall_f1().recall;
        let c = recalls.len() as f64;
        if recalls.iter().any(|&r| r == 0.0) {
            return 0.0;
        }
        (recalls.iter().map(|r| r.ln()).sum::<f64>() / c).exp()
    }

    /// Multiclass Matthews correlation coefficient in the closed R_k form:
    /// `(c s - sum_k p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))`
    /// with `c` the trace, `s` the total, and `t_k`/`p_k` the row/column
    /// sums. A degenerate denominator yields 0.
    pub fn mcc(&self) -> f64 {
        let classes = self.classes();
        let s = self.total() as f64;
        let c: f64 = (0..classes).map(|k| self.counts[k][k] as f64).sum();
        let t: Vec<f64> = (0..classes).map(|k| self.support(k) as f64).collect();
        let p: Vec<f64> = (0..classes).map(|k| self.predicted(k) as f64).collect();
        let numerator = c * s - t.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
        let dt = s * s - t.iter().map(|x| x * x).sum::<f64>();
        let dp = s * s - p.iter().map(|x| x * x).sum::<f64>();
        if dt <= 0.0 || dp <= 0.0 {
            return 0.0;
        }
        numerator / (dt * dp).sqrt()
    }

    /// Classification mean accuracy: the average of per-class recalls over
    /// classes that actually occur. Classes with zero support are excluded;
    /// [`ConfusionMatrix::unsupported_classes`] reports which ones were.
    pub fn cma(&self) -> f64 {
        let mut sum = 0.0;
        let mut seen = 0usize;
        for k in 0..self.classes() {
            let support = self.support(k);
            if support > 0 {
                sum += self.counts[k][k] as f64 / support as f64;
                seen += 1;
            }
        }
        if seen == 0 {
            0.0
        } else {
            sum / seen as f64
        }
    }

    /// Classes excluded from [`ConfusionMatrix::cma`] for lack of samples.
    pub fn unsupported_classes(&self) -> Vec<usize> {
        (0..self.classes()).filter(|&k| self.support(k) == 0).collect()
    }

    /// Write the matrix as CSV with class names on both the header row and
    /// the leading column.
    pub fn write_csv<W: Write>(&self, class_names: &[String], writer: W) -> Result<(), MetricsError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(class_names.iter().cloned());
        wtr.write_record(&header)?;
        for (k, row) in self.counts.iter().enumerate() {
            let mut record = vec![class_names[k].clone()];
            record.extend(row.iter().map(|c| c.to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fixed-schema evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<PerClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub g_mean: f64,
    pub mcc: f64,
    pub cma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix, class_names: &[String]) -> Self {
        assert_eq!(cm.classes(), class_names.len());
        let prf = cm.precision_recall_f1();
        let per_class = (0..cm.classes())
            .map(|k| PerClassMetrics {
                name: class_names[k].clone(),
                precision: prf.precision[k],
                recall: prf.recall[k],
                f1: prf.f1[k],
                support: cm.support(k),
            })
            .collect();
        MetricsReport {
            accuracy: cm.accuracy(),
            per_class,
            macro_f1: prf.macro_f1,
            weighted_f1: prf.weighted_f1,
            g_mean: cm.g_mean(),
            mcc: cm.mcc(),
            cma: cm.cma(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
