//! CSV and JSON writers. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use surfhop_core::{ComparisonRow, EnsembleFrame, JumpRow};

pub const FRAME_HEADER: &str = "t,p_plus,p_minus,alpha,beta,energy,work,frustrated,consistency_gap";
pub const COMPARE_HEADER: &str =
    "t,p_plus,p_plus_ref,p_minus,p_minus_ref,alpha,alpha_ref,beta,beta_ref,energy,energy_ref,work";
pub const JUMP_HEADER: &str =
    "pk,q_star,gap,qtsh_down,qtsh_up,fssh_down,fssh_up,up_frustrated,singular,rel_discrepancy";
pub const SCAN_HEADER: &str = "q,v1,v2,v12,v_plus,v_minus,omega,phi,d,alpha_loc,f_q";

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v:.16e}").unwrap();
    }
}

pub fn frames_csv(frames: &[EnsembleFrame]) -> String {
    let mut out = String::with_capacity(200 * (frames.len() + 1));
    out.push_str(FRAME_HEADER);
    out.push('\n');
    for f in frames {
        push_row(
            &mut out,
            &[
                f.t,
                f.p_plus,
                f.p_minus,
                f.mean_alpha,
                f.mean_beta,
                f.energy,
                f.work,
            ],
        );
        writeln!(out, ",{},{:.16e}", f.frustrated_count, f.consistency_gap).unwrap();
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str(COMPARE_HEADER);
    out.push('\n');
    for r in rows {
        push_row(
            &mut out,
            &[
                r.t,
                r.p_plus,
                r.p_plus_ref,
                r.p_minus,
                r.p_minus_ref,
                r.alpha,
                r.alpha_ref,
                r.beta,
                r.beta_ref,
                r.energy,
                r.energy_ref,
                r.work,
            ],
        );
        out.push('\n');
    }
    out
}

pub fn jump_csv(rows: &[JumpRow]) -> String {
    let mut out = String::new();
    out.push_str(JUMP_HEADER);
    out.push('\n');
    for r in rows {
        push_row(
            &mut out,
            &[
                r.pk,
                r.q_star,
                r.gap,
                r.qtsh_down,
                r.qtsh_up,
                r.fssh_down.unwrap_or(f64::NAN),
                r.fssh_up.unwrap_or(f64::NAN),
            ],
        );
        write!(out, ",{},{},", r.up_frustrated, r.singular).unwrap();
        push_row(&mut out, &[r.rel_discrepancy]);
        out.push('\n');
    }
    out
}

pub fn scan_csv(rows: &[[f64; 11]]) -> String {
    let mut out = String::new();
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for r in rows {
        push_row(&mut out, r);
        out.push('\n');
    }
    out
}

/// `frames.csv` -> `frames.json`.
pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
