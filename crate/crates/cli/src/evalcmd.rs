//! `lidarseq eval`: metrics between a generated and a reference dataset.

use anyhow::{anyhow, Result};
use lidarseq_metrics::{evaluate_run, EvalConfig};
use std::path::Path;

pub fn cmd_eval(
    gen_dir: &Path,
    ref_dir: &Path,
    out_file: &Path,
    eval_cfg: &EvalConfig,
) -> Result<()> {
    let report = evaluate_run(gen_dir, ref_dir, eval_cfg).map_err(|e| anyhow!("{}", e))?;
    let text = report.render();
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out_file, &text)?;
    print!("{}", text);
    Ok(())
}
