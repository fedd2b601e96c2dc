//! Trace CSV and summary JSON.
//!
//! CSV columns, for state dimension `n` and measurement dimension `m`:
//!
//! ```text
//! step, epoch, time_s, source, meas_0..m, truth_0..n,
//! espf_mode_0..n, espf_reset, espf_live, espf_pruned, espf_mean_surprisal,
//! espf_retention, espf_log_det_spread, espf_sigma, espf_kernel_radius,
//! espf_residual_0..m, espf_compatibility,
//! ukf_mean_0..n, ukf_cov_trace, ukf_residual_0..m,
//! espf_pos_err, ukf_pos_err
//! ```
//!
//! Floats carry 17 significant digits. `espf_compatibility` lists the
//! per-point values separated by `;`. Cells of a filter that did not run
//! are empty.

use std::fmt::Write as _;
use std::path::Path;

use crate::metrics::{position_errors, Summary};
use crate::run::RunTrace;
use crate::HarnessError;

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_floats(row: &mut Vec<String>, values: Option<&[f64]>, len: usize) {
    match values {
        Some(v) => row.extend(v.iter().map(|&x| float(x))),
        None => row.extend(std::iter::repeat_n(String::new(), len)),
    }
}

pub fn csv_header(n: usize, m: usize) -> Vec<String> {
    fn idx(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
        (0..k).map(move |i| format!("{prefix}_{i}"))
    }
    let mut h: Vec<String> = ["step", "epoch", "time_s", "source"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(idx("meas", m));
    h.extend(idx("truth", n));
    h.extend(idx("espf_mode", n));
    h.extend(
        [
            "espf_reset",
            "espf_live",
            "espf_pruned",
            "espf_mean_surprisal",
            "espf_retention",
            "espf_log_det_spread",
            "espf_sigma",
            "espf_kernel_radius",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h.extend(idx("espf_residual", m));
    h.push("espf_compatibility".into());
    h.extend(idx("ukf_mean", n));
    h.push("ukf_cov_trace".into());
    h.extend(idx("ukf_residual", m));
    h.push("espf_pos_err".into());
    h.push("ukf_pos_err".into());
    h
}

pub fn trace_csv(trace: &RunTrace) -> String {
    let n = trace.dim;
    let m = trace.records.first().map_or(0, |r| r.measurement.len());
    let (espf_err, ukf_err) = position_errors(trace);
    let mut out = csv_header(n, m).join(",");
    out.push('\n');
    for (k, r) in trace.records.iter().enumerate() {
        let mut row = vec![
            r.step.to_string(),
            r.epoch.to_string(),
            float(r.time),
            r.source.to_string(),
        ];
        push_floats(&mut row, Some(&r.measurement), m);
        push_floats(&mut row, Some(&r.truth), n);
        let e = r.espf.as_ref();
        push_floats(&mut row, e.map(|e| e.mode.as_slice()), n);
        match e {
            Some(e) => {
                row.push(u8::from(e.reset).to_string());
                row.push(e.live_before.to_string());
                row.push(e.pruned.to_string());
                for x in [
                    e.mean_surprisal,
                    e.necessity_retention,
                    e.log_det_spread,
                    e.sigma,
                    e.kernel_radius,
                ] {
                    row.push(float(x));
                }
            }
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        push_floats(&mut row, e.map(|e| e.residual.as_slice()), m);
        row.push(e.map_or(String::new(), |e| {
            e.compatibility
                .iter()
                .map(|&c| float(c))
                .collect::<Vec<_>>()
                .join(";")
        }));
        let u = r.ukf.as_ref();
        push_floats(&mut row, u.map(|u| u.mean.as_slice()), n);
        row.push(u.map_or(String::new(), |u| float(u.covariance_trace)));
        push_floats(&mut row, u.map(|u| u.residual.as_slice()), m);
        row.push(espf_err[k].map_or(String::new(), float));
        row.push(ukf_err[k].map_or(String::new(), float));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

/// Writes `trace.csv`, `summary.json` and `config_resolved.txt`.
pub fn write_outputs(
    out_dir: &Path,
    resolved_config: &str,
    trace: &RunTrace,
    summary: &Summary,
) -> Result<(), HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    for (name, body) in [
        ("trace.csv", trace_csv(trace)),
        ("summary.json", summary_json(summary)),
        ("config_resolved.txt", resolved_config.to_string()),
    ] {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}
