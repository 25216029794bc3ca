use super::{Phase, Plm};
use crate::mnist::{Dataset, Split};

/// Classification error rates, each in `[0, 1]`.
///
/// `direct` classifies the original image; `recall` classifies the image the
/// recall network synthesizes for the same class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorRates {
    pub train_direct: f64,
    pub train_recall: f64,
    pub new_direct: f64,
    pub new_recall: f64,
    pub all_direct: f64,
    pub all_recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub phase: Phase,
    pub errors: ErrorRates,
}

/// Count-weighted mean of the TRAIN and NEW rates; this is how every
/// `all_*` column is produced.
pub fn weighted_all(n_train: usize, train: f64, n_new: usize, new: f64) -> f64 {
    let total = n_train + n_new;
    if total == 0 {
        return 0.0;
    }
    (n_train as f64 * train + n_new as f64 * new) / total as f64
}

fn rate(mistakes: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        mistakes as f64 / n as f64
    }
}

/// Error rates of `plm` on the dataset's original images and on its own
/// recalled images. Never touches the networks' weights. An image the storage
/// network cannot score (non-finite values after a blow-up) counts as a miss.
pub fn evaluate(plm: &Plm, dataset: &Dataset) -> ErrorRates {
    let classes: Vec<usize> = dataset.examples().iter().map(|e| e.class).collect();
    let originals: Vec<&[f64]> = dataset.examples().iter().map(|e| e.image.as_slice()).collect();
    let direct = plm.classify_many(&originals);
    let recall = plm.recall_and_classify(&classes);

    let mut miss = [[0usize; 2]; 2];
    for (i, ex) in dataset.examples().iter().enumerate() {
        let split = usize::from(ex.split == Split::New);
        miss[split][0] += usize::from(direct[i] != Some(ex.class));
        miss[split][1] += usize::from(recall[i] != Some(ex.class));
    }
    let (nt, nn) = (dataset.n_train(), dataset.n_new());
    let train_direct = rate(miss[0][0], nt);
    let train_recall = rate(miss[0][1], nt);
    let new_direct = rate(miss[1][0], nn);
    let new_recall = rate(miss[1][1], nn);
    ErrorRates {
        train_direct,
        train_recall,
        new_direct,
        new_recall,
        all_direct: weighted_all(nt, train_direct, nn, new_direct),
        all_recall: weighted_all(nt, train_recall, nn, new_recall),
    }
}

/// Consumer of metrics rows, fed in iteration order.
pub trait MetricsSink {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()>;
}

impl MetricsSink for Vec<MetricsRow> {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        self.push(*row);
        Ok(())
    }
}

/// Discards every row.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _row: &MetricsRow) -> std::io::Result<()> {
        Ok(())
    }
}

impl<S: MetricsSink + ?Sized> MetricsSink for &mut S {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        (**self).record(row)
    }
}
