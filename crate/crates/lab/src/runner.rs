//! Parallel evaluation of protocol cells.

use rayon::prelude::*;
use stirpat_core::panel::PanelDataset;
use stirpat_core::protocol::{assemble, plan, prepare, run_cell, ProtocolConfig, ProtocolOutput};

use crate::error::{LabError, Result};

pub const THREADS_ENV: &str = "STIRPAT_LAB_THREADS";

/// Worker cap from `STIRPAT_LAB_THREADS`; 0 or unset lets rayon decide.
pub fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| LabError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
    }
}

/// Same result as [`stirpat_core::protocol::run_protocol`], with the
/// (method, variant) cells spread over a thread pool.
pub fn run_parallel(ds: &PanelDataset, config: &ProtocolConfig) -> Result<ProtocolOutput> {
    if config.methods.is_empty() || config.variants.is_empty() {
        return Err(LabError::Usage("no methods or variants selected".into()));
    }
    let prep = prepare(ds, config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap()?)
        .build()
        .map_err(|e| LabError::Failed(e.to_string()))?;
    let runs = pool.install(|| {
        plan(config)
            .into_par_iter()
            .map(|(m, v)| run_cell(&prep, m, v, config))
            .collect()
    });
    Ok(assemble(&prep, config, runs))
}
