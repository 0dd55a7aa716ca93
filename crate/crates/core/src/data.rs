//! In-memory datasets, one-hot targets, seeded batching and a synthetic blob
//! generator. File formats live in the `pcn` crate.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PcnError, Result};
use crate::matrix::Matrix;
use crate::rng;

/// `inputs` is `N × d_0` with entries in `[0, 1]`; `labels[i]` is the class of row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let ds = Dataset { inputs, labels, num_classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.rows() != self.labels.len() {
            return Err(PcnError::InvalidConfig(format!(
                "{} input rows but {} labels",
                self.inputs.rows(),
                self.labels.len()
            )));
        }
        if let Some(v) = self.inputs.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PcnError::InvalidConfig(format!("input value {v} outside [0, 1]")));
        }
        if let Some((index, &label)) = self.labels.iter().enumerate().find(|(_, &l)| l >= self.num_classes) {
            return Err(PcnError::LabelOutOfRange { index, label, num_classes: self.num_classes });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// The first `n` samples (all of them if `n ≥ N`).
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Splits into the first `n` samples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }

    pub fn shuffled(&self, seed: u64) -> Dataset {
        self.select(&permutation(self.len(), seed))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    idx
}

/// `B × C` one-hot target matrix.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), num_classes);
    for (i, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(PcnError::LabelOutOfRange { index: i, label, num_classes });
        }
        m.set(i, label, 1.0);
    }
    Ok(m)
}

/// A seeded visiting order over `0..N`, cut into batches of `batch_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub permutation: Vec<usize>,
    pub drop_last: bool,
}

impl BatchPlan {
    pub fn new(num_samples: usize, batch_size: usize, seed: u64, drop_last: bool) -> Result<Self> {
        if batch_size == 0 {
            return Err(PcnError::InvalidConfig("batch size must be at least 1".into()));
        }
        if batch_size > num_samples {
            return Err(PcnError::InvalidConfig(format!(
                "batch size {batch_size} exceeds dataset size {num_samples}"
            )));
        }
        Ok(BatchPlan { batch_size, permutation: permutation(num_samples, seed), drop_last })
    }

    /// Plan for training epoch `epoch`; the shuffle seed is `seed ^ epoch`.
    pub fn for_epoch(num_samples: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Self> {
        Self::new(num_samples, batch_size, seed ^ epoch as u64, true)
    }

    /// Unshuffled plan visiting every sample once, keeping a short final batch.
    pub fn sequential(num_samples: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || num_samples == 0 {
            return Err(PcnError::InvalidConfig("empty dataset or zero batch size".into()));
        }
        Ok(BatchPlan { batch_size, permutation: (0..num_samples).collect(), drop_last: false })
    }

    pub fn num_batches(&self) -> usize {
        let n = self.permutation.len();
        if self.drop_last {
            n / self.batch_size
        } else {
            n.div_ceil(self.batch_size)
        }
    }

    /// Sample indices of batch `i`.
    pub fn indices(&self, i: usize) -> &[usize] {
        let start = i * self.batch_size;
        let end = (start + self.batch_size).min(self.permutation.len());
        &self.permutation[start..end]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

/// Materializes the batches of `plan` over `dataset`.
pub fn batches<'a>(dataset: &'a Dataset, plan: &'a BatchPlan) -> Result<impl Iterator<Item = Batch> + 'a> {
    if plan.permutation.len() != dataset.len() {
        return Err(PcnError::InvalidConfig(format!(
            "plan covers {} samples, dataset has {}",
            plan.permutation.len(),
            dataset.len()
        )));
    }
    Ok((0..plan.num_batches()).map(move |i| {
        let idx = plan.indices(i);
        Batch { inputs: dataset.inputs.select_rows(idx), labels: idx.iter().map(|&j| dataset.labels[j]).collect() }
    }))
}

/// Gaussian class blobs with unit within-class deviation, rescaled into `[0, 1]`.
///
/// Class means sit on a lattice with spacing `separation`, so any two means are
/// at least that far apart. Sample `i` belongs to class `i mod num_classes`.
pub fn synth_blobs(
    num_classes: usize,
    samples_per_class: usize,
    input_dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || samples_per_class == 0 || input_dim == 0 {
        return Err(PcnError::InvalidConfig("classes, samples per class and dimension must be positive".into()));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(PcnError::InvalidConfig(format!("separation must be positive, got {separation}")));
    }
    let means = lattice_means(num_classes, input_dim, separation);
    let n = num_classes * samples_per_class;
    let mut rng = rng::seeded(seed);
    let mut inputs = Matrix::zeros(n, input_dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % num_classes;
        for (j, v) in inputs.row_mut(i).iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = means[class][j] + z;
        }
        labels.push(class);
    }
    let (lo, hi) = inputs.as_slice().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    for v in inputs.as_mut_slice() {
        *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.5 };
    }
    Dataset::new(inputs, labels, num_classes)
}

fn lattice_means(num_classes: usize, dim: usize, spacing: f64) -> Vec<Vec<f64>> {
    let mut side = 2usize;
    while side.checked_pow(dim as u32).is_some_and(|cells| cells < num_classes) {
        side += 1;
    }
    (0..num_classes)
        .map(|c| {
            let mut rest = c;
            (0..dim)
                .map(|_| {
                    let digit = rest % side;
                    rest /= side;
                    digit as f64 * spacing
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_hot_examples() {
        let m = one_hot(&[3], 10).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(one_hot(&[0, 1], 2).unwrap(), Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(
            one_hot(&[1, 10], 10).unwrap_err(),
            PcnError::LabelOutOfRange { index: 1, label: 10, num_classes: 10 }
        );
    }

    #[test]
    fn batch_counts() {
        assert_eq!(BatchPlan::new(50_000, 500, 0, true).unwrap().num_batches(), 100);
        assert_eq!(BatchPlan::new(10_000, 500, 0, true).unwrap().num_batches(), 20);
        let plan = BatchPlan::new(10, 3, 0, true).unwrap();
        assert_eq!(plan.num_batches(), 3);
        let covered: usize = (0..3).map(|i| plan.indices(i).len()).sum();
        assert_eq!(covered, 9);
        assert!(BatchPlan::new(3, 4, 0, true).is_err());
        assert!(BatchPlan::new(3, 0, 0, true).is_err());
        assert_eq!(BatchPlan::sequential(10, 3).unwrap().num_batches(), 4);
    }

    #[test]
    fn plan_is_seeded_permutation() {
        let a = BatchPlan::new(100, 10, 7, true).unwrap();
        assert_eq!(a, BatchPlan::new(100, 10, 7, true).unwrap());
        assert_ne!(a, BatchPlan::new(100, 10, 8, true).unwrap());
        let mut sorted = a.permutation.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_eq!(BatchPlan::for_epoch(100, 10, 7, 1).unwrap().permutation, BatchPlan::new(100, 10, 6, true).unwrap().permutation);
    }

    #[test]
    fn blobs_examples() {
        let ds = synth_blobs(2, 10, 4, 3.0, 1).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.class_counts(), vec![10, 10]);
        assert_eq!(ds, synth_blobs(2, 10, 4, 3.0, 1).unwrap());
        assert!(synth_blobs(2, 10, 4, 0.0, 1).is_err());
        assert!(synth_blobs(0, 10, 4, 1.0, 1).is_err());
        assert!(ds.inputs.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn lattice_means_are_separated() {
        for (c, d) in [(3, 16), (10, 2), (9, 1), (5, 3)] {
            let means = lattice_means(c, d, 2.5);
            for i in 0..c {
                for j in 0..i {
                    let dist2: f64 = means[i].iter().zip(&means[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    assert!(dist2 >= 2.5 * 2.5 - 1e-12, "{c} classes in {d} dims");
                }
            }
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(Matrix::zeros(2, 1), vec![0], 1).is_err());
        assert!(Dataset::new(Matrix::filled(1, 1, 1.5), vec![0], 1).is_err());
        assert!(Dataset::new(Matrix::zeros(1, 1), vec![2], 2).is_err());
    }
}
