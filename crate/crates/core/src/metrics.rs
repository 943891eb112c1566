//! Confusion counts and macro-averaged statistics. The positive class is
//! label 1 ("same pair").

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        ConfusionMatrix { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

/// Counts predictions against labels, both in `{0, 1}`.
pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &y)) in predictions.iter().zip(labels).enumerate() {
        match (p, y) {
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            _ => return Err(Error::InvalidInput(format!("entry {i}: values must be 0 or 1, got ({p}, {y})"))),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set when some class hit a zero denominator; the affected value is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub loss: Option<f64>,
    /// Index 0: the negative class, 1: the positive class.
    pub per_class: [ClassStats; 2],
    pub degenerate: Degenerate,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 averaged without weighting.
pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no entries".into()));
    }
    let mut deg = Degenerate::default();
    // (true positives, predicted positives, actual positives) seen from each class.
    let views = [(cm.tn, cm.tn + cm.fn_, cm.tn + cm.fp), (cm.tp, cm.tp + cm.fp, cm.tp + cm.fn_)];
    let mut per_class = [ClassStats::default(); 2];
    for (stats, &(hit, predicted, actual)) in per_class.iter_mut().zip(&views) {
        let precision = ratio(hit, predicted, &mut deg.precision);
        let recall = ratio(hit, actual, &mut deg.recall);
        let f1 = if precision + recall == 0.0 {
            deg.f1 = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        *stats = ClassStats { precision, recall, f1 };
    }
    let mean = |f: fn(&ClassStats) -> f64| (f(&per_class[0]) + f(&per_class[1])) / 2.0;
    Ok(MetricsReport {
        accuracy: (cm.tn + cm.tp) as f64 / total as f64,
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        loss: None,
        per_class,
        degenerate: deg,
        confusion: *cm,
    })
}

impl MetricsReport {
    pub fn with_loss(mut self, loss: f64) -> Self {
        self.loss = Some(loss);
        self
    }

    pub const CSV_HEADER: &'static str = "tn,fp,fn,tp,accuracy,precision,recall,f1,loss";

    pub fn csv_row(&self) -> String {
        let c = &self.confusion;
        let loss = self.loss.map_or(String::new(), |l| format!("{l:.6}"));
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{loss}",
            c.tn, c.fp, c.fn_, c.tp, self.accuracy, self.precision, self.recall, self.f1
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.confusion;
        writeln!(f, "                 predicted 0  predicted 1")?;
        writeln!(f, "actual 0 (diff)  {:>11}  {:>11}", c.tn, c.fp)?;
        writeln!(f, "actual 1 (same)  {:>11}  {:>11}", c.fn_, c.tp)?;
        if let Some(l) = self.loss {
            writeln!(f, "loss       {l:.5}")?;
        }
        writeln!(f, "accuracy   {:.5}", self.accuracy)?;
        writeln!(f, "precision  {:.5}", self.precision)?;
        writeln!(f, "recall     {:.5}", self.recall)?;
        write!(f, "f1         {:.5}", self.f1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_matrix() {
        let r = macro_metrics(&ConfusionMatrix::new(126, 2, 7, 121)).unwrap();
        assert!((r.accuracy - 0.96484).abs() < 1e-4);
        assert!((r.precision - 0.96556).abs() < 1e-4);
        assert!((r.recall - 0.96484).abs() < 1e-4);
        assert!((r.f1 - 0.96483).abs() < 1e-4);
    }

    #[test]
    fn perfect_and_degenerate() {
        let r = macro_metrics(&ConfusionMatrix::new(10, 0, 0, 10)).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        let r = macro_metrics(&ConfusionMatrix::new(0, 0, 10, 0)).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert!(r.degenerate.precision);
        assert!(macro_metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[1, 0], &[1, 0]).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let cm = confusion(&[1, 1, 1], &[0, 0, 0]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(0, 3, 0, 0));
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn csv_row_shape() {
        let r = macro_metrics(&ConfusionMatrix::new(126, 2, 7, 121)).unwrap().with_loss(0.1);
        assert_eq!(r.csv_row().split(',').count(), MetricsReport::CSV_HEADER.split(',').count());
        assert!(r.csv_row().starts_with("126,2,7,121,0.964844"));
    }
}
