//! Instanton record files and the printed trace.

use std::fmt::Write as _;
use std::path::Path;

use csisa_core::isa::{InstantonRecord, StepCase};

use crate::error::{HarnessError, Result};

pub fn record_to_json(record: &InstantonRecord) -> Result<String> {
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    Ok(s)
}

pub fn record_from_json(text: &str) -> Result<InstantonRecord> {
    Ok(serde_json::from_str(text)?)
}

pub fn save_record(record: &InstantonRecord, path: &Path) -> Result<()> {
    write_file(path, &record_to_json(record)?)
}

pub fn load_record(path: &Path) -> Result<InstantonRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    record_from_json(&text)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn case_label(case: StepCase) -> &'static str {
    match case {
        StepCase::Init => "init",
        StepCase::MedianStep => "median",
        StepCase::LeaveOneOutStep => "leave-one-out",
        StepCase::Halt => "instanton",
    }
}

/// One block per trace entry: case, ℓ0, then the support with values.
pub fn format_trace(record: &InstantonRecord) -> String {
    let mut out = String::new();
    let t = &record.trace;
    match t.seed {
        Some(seed) => {
            let _ = writeln!(
                out,
                "seed {seed}, init_k {}, matrix {}",
                t.init_k, record.matrix_id
            );
        }
        None => {
            let _ = writeln!(out, "init_k {}, matrix {}", t.init_k, record.matrix_id);
        }
    }
    for (n, step) in t.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "step {n:>3}  {:<13} l0 = {}",
            case_label(step.case),
            step.l0
        );
        for (i, v) in &step.entries {
            let _ = writeln!(out, "    [{i:>4}] {v:>+.6e}");
        }
    }
    let reductions = record
        .leave_one_out_verdicts
        .iter()
        .filter(|&&ok| ok)
        .count();
    let _ = writeln!(
        out,
        "instanton length {} after {} step(s); {}/{} single-entry reductions decode correctly",
        record.length,
        t.iterations(),
        reductions,
        record.leave_one_out_verdicts.len()
    );
    out
}
