//! Multi-threaded evaluation. Batches are independent once the weights are
//! frozen, so they run on the rayon pool and are merged in batch order; the
//! report equals the sequential one bit for bit.

use rayon::prelude::*;

use pcn_core::trainer::eval_plan;
use pcn_core::{evaluate_batch, Dataset, EvalReport, EvalSettings, GenerativeStack, PcnError, Result};

pub fn evaluate_parallel(stack: &GenerativeStack, settings: &EvalSettings, dataset: &Dataset) -> Result<EvalReport> {
    if dataset.num_classes != stack.output_dim() {
        return Err(PcnError::InvalidConfig(format!(
            "class-count mismatch: dataset has {} classes, readout has {} outputs",
            dataset.num_classes,
            stack.output_dim()
        )));
    }
    let plan = eval_plan(dataset, settings)?;
    let parts = (0..plan.num_batches())
        .into_par_iter()
        .map(|i| {
            let idx = plan.indices(i);
            let inputs = dataset.inputs.select_rows(idx);
            let labels: Vec<usize> = idx.iter().map(|&j| dataset.labels[j]).collect();
            evaluate_batch(stack, settings, &inputs, &labels, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_batches(settings.mode, stack.output_dim(), &parts))
}

/// Sizes the global pool; `0` keeps rayon's default of one thread per core.
pub fn configure_threads(threads: usize) -> std::result::Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()
}
