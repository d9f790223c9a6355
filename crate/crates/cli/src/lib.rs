//! Benchmark harness: experiment specs, solver dispatch, cached reference
//! optima, CSV traces and scaling studies.

use std::io::Write;
use std::path::Path;

pub mod error;
pub mod experiment;
pub mod reference;
pub mod scaling;
pub mod spec;

pub use error::{Category, Error, Result};
pub use experiment::{
    read_summary, run_experiment, run_solver, trace_file_name, CellResult, ExperimentReport,
    SummaryRow, SUMMARY_CSV_HEADER,
};
pub use reference::{cached_reference, compute_reference, ReferenceMethod, ReferenceValue};
pub use scaling::{scaling_study, ScalingOptions, ScalingPoint, ScalingReport, SolverFit};
pub use spec::{parse_overrides, DatasetSource, ExperimentSpec, SolverKind, SyntheticSpec};

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
