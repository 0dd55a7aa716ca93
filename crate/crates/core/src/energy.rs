//! Total prediction-error energy and per-step energy trajectories.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{PcnError, Phase, Result};
use crate::model::ErrorBundle;

/// Batch-averaged energy
/// `(1/B) Σ_b [ ½ Σ_{l<L} ‖ε_b(l)‖² + ½ ‖ε_b^sup‖² ]`, the supervised term only
/// when the bundle carries one.
pub fn total_energy(bundle: &ErrorBundle) -> f64 {
    let batch = bundle.batch_size() as f64;
    let mut sum: f64 = bundle.errors.iter().map(|e| e.sum_squares()).sum();
    if let Some(e_sup) = &bundle.sup_err {
        sum += e_sup.sum_squares();
    }
    0.5 * sum / batch
}

/// Per-sample energies, one entry per batch row.
pub fn sample_energies(bundle: &ErrorBundle) -> Vec<f64> {
    (0..bundle.batch_size())
        .map(|b| {
            let mut s: f64 = bundle.errors.iter().map(|e| e.row(b).iter().map(|v| v * v).sum::<f64>()).sum();
            if let Some(e_sup) = &bundle.sup_err {
                s += e_sup.row(b).iter().map(|v| v * v).sum::<f64>();
            }
            0.5 * s
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub epoch: usize,
    pub batch_index: usize,
    /// 0 is the energy before any update; step `t` follows the `t`-th update.
    pub step_index: usize,
    pub phase: Phase,
    pub energy: f64,
}

/// Ordered energy records for one run.
///
/// Within one `(epoch, batch)` the step index strictly increases and the phase
/// moves from `infer` to `learn` at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    records: Vec<EnergyRecord>,
}

impl EnergyTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(
        &mut self,
        epoch: usize,
        batch_index: usize,
        step_index: usize,
        phase: Phase,
        energy: f64,
    ) -> Result<()> {
        if energy.is_nan() || energy < 0.0 {
            return Err(PcnError::TraceOrder(format!("energy must be nonnegative, got {energy}")));
        }
        if let Some(last) = self.records.last() {
            let key = (epoch, batch_index);
            let last_key = (last.epoch, last.batch_index);
            if key < last_key {
                return Err(PcnError::TraceOrder(format!(
                    "epoch/batch {key:?} recorded after {last_key:?}"
                )));
            }
            if key == last_key {
                if step_index <= last.step_index {
                    return Err(PcnError::TraceOrder(format!(
                        "step {step_index} after step {} in epoch {epoch} batch {batch_index}",
                        last.step_index
                    )));
                }
                if last.phase == Phase::Learn && phase == Phase::Infer {
                    return Err(PcnError::TraceOrder(format!(
                        "infer after learn in epoch {epoch} batch {batch_index}"
                    )));
                }
            }
        }
        self.records.push(EnergyRecord { epoch, batch_index, step_index, phase, energy });
        Ok(())
    }

    /// Records of one `(epoch, batch)` pair.
    pub fn batch(&self, epoch: usize, batch_index: usize) -> impl Iterator<Item = &EnergyRecord> {
        self.records.iter().filter(move |r| r.epoch == epoch && r.batch_index == batch_index)
    }

    /// CSV with header `epoch,batch,step,phase,energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.records.len() + 1));
        out.push_str("epoch,batch,step,phase,energy\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.batch_index,
                r.step_index,
                r.phase,
                format_significant(r.energy, 9)
            );
        }
        out
    }
}

/// Plain decimal rendering with `digits` significant digits.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), value);
    }
    let magnitude = libm::floor(libm::log10(value.abs())) as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use alloc::vec;

    fn bundle(errors: Vec<Matrix>, sup: Option<Matrix>) -> ErrorBundle {
        let b = errors[0].rows();
        ErrorBundle {
            preacts: errors.clone(),
            preds: errors.clone(),
            gain_mod: errors.clone(),
            errors,
            sup_pred: sup.clone(),
            sup_err: sup,
            top_err: Matrix::zeros(b, 1),
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(total_energy(&bundle(vec![Matrix::zeros(2, 3)], None)), 0.0);
        assert_eq!(total_energy(&bundle(vec![Matrix::from_rows(&[[1.0, -1.0]])], None)), 1.0);
        let dup = Matrix::from_rows(&[[1.0, -1.0], [1.0, -1.0]]);
        assert_eq!(total_energy(&bundle(vec![dup], None)), 1.0);
        let with_sup = bundle(vec![Matrix::from_rows(&[[1.0, -1.0]])], Some(Matrix::from_rows(&[[2.0]])));
        assert_eq!(total_energy(&with_sup), 3.0);
        assert_eq!(sample_energies(&with_sup), vec![3.0]);
    }

    #[test]
    fn record_ordering_contract() {
        let mut t = EnergyTrace::new();
        t.record(0, 0, 0, Phase::Infer, 1.0).unwrap();
        assert_eq!(t.len(), 1);
        t.record(0, 0, 1, Phase::Infer, 0.5).unwrap();
        assert!(t.record(0, 0, 1, Phase::Infer, 0.5).is_err());
        assert!(t.record(0, 0, 0, Phase::Infer, 0.5).is_err());
        t.record(0, 0, 2, Phase::Learn, 0.4).unwrap();
        assert!(t.record(0, 0, 3, Phase::Infer, 0.4).is_err());
        t.record(0, 1, 0, Phase::Infer, 2.0).unwrap();
        assert!(t.record(0, 0, 9, Phase::Learn, 0.1).is_err());
        assert!(t.record(1, 0, 0, Phase::Infer, -1.0).is_err());
        assert_eq!(t.batch(0, 0).count(), 3);
    }

    #[test]
    fn csv_layout() {
        let mut t = EnergyTrace::new();
        t.record(0, 3, 0, Phase::Infer, 1.0 / 3.0).unwrap();
        t.record(0, 3, 1, Phase::Learn, 1234.5678901234).unwrap();
        assert_eq!(t.to_csv(), "epoch,batch,step,phase,energy\n0,3,0,infer,0.333333333\n0,3,1,learn,1234.56789\n");
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.0, 9), "0.00000000");
        assert_eq!(format_significant(2.5e-5, 9), "0.0000250000000");
        assert_eq!(format_significant(123456789012.0, 9), "123456789012");
    }
}
