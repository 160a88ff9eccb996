use std::path::{Path, PathBuf};

use super::plot::plot_trace;
use super::{DlcCorridor, HarnessError, OutputOptions, RunResult, Trace};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputFiles {
    pub csv: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub plots: Vec<PathBuf>,
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf, HarnessError> {
    std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Writes `trace.csv`, `metrics.json` and the SVG figures into `dir`,
/// creating it if needed.
pub fn emit_outputs(
    dir: &Path,
    trace: &Trace,
    result: &RunResult,
    options: &OutputOptions,
    corridor: Option<&DlcCorridor>,
) -> Result<OutputFiles, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files = OutputFiles::default();
    if options.csv {
        files.csv = Some(write(dir.join("trace.csv"), &trace.to_csv())?);
    }
    if options.metrics {
        let mut json = serde_json::to_string_pretty(result).expect("metrics serialize");
        json.push('\n');
        files.metrics = Some(write(dir.join("metrics.json"), &json)?);
    }
    if options.plots {
        for (fig, svg) in plot_trace(trace, corridor)? {
            files.plots.push(write(dir.join(fig.file_name()), &svg)?);
        }
    }
    Ok(files)
}
