//! Text artifacts for an [`ExperimentReport`]: curves CSV, key=value metrics,
//! and the per-epoch loss history.

use std::fmt::Write as _;

use fem_surrogate_core::mlp::TrainHistory;
use fem_surrogate_core::surrogate::ExperimentReport;

/// `freq_hz,true_1..k,pred_1..k,is_test`.
pub fn curves_csv(report: &ExperimentReport) -> String {
    let k = report.channels.len();
    let mut out = String::from("freq_hz");
    for i in 1..=k {
        let _ = write!(out, ",true_{i}");
    }
    for i in 1..=k {
        let _ = write!(out, ",pred_{i}");
    }
    out.push_str(",is_test\n");
    for row in &report.curves {
        let _ = write!(out, "{:.16e}", row.freq_hz);
        for v in row.truth.iter().chain(&row.prediction) {
            let _ = write!(out, ",{v:.16e}");
        }
        let _ = writeln!(out, ",{}", u8::from(row.is_test));
    }
    out
}

fn join_hz(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|f| format!("{f:.6}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// One `key=value` per line. Scaled-space losses carry a `_scaled` suffix;
/// relative errors are in physical units.
pub fn metrics_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for (k, v) in &report.config_echo {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "grid_step_hz={:.16e}", report.grid_step_hz);
    let _ = writeln!(out, "train_mse_scaled={:.16e}", report.train_mse_scaled);
    let _ = writeln!(out, "test_mse_scaled={:.16e}", report.test_mse_scaled);
    let _ = writeln!(
        out,
        "test_rel_rmse_offpeak={:.16e}",
        report.test_rel_rmse_offpeak
    );
    for (i, c) in report.channels.iter().enumerate() {
        let n = c.name;
        let _ = writeln!(out, "test_rel_rmse.{n}={:.16e}", c.test_rel_rmse);
        let _ = writeln!(out, "true_argmax_hz.{n}={:.16e}", c.true_argmax_hz);
        let _ = writeln!(out, "pred_argmax_hz.{n}={:.16e}", c.predicted_argmax_hz);
        let _ = writeln!(
            out,
            "argmax_within_one_step.{n}={}",
            report.argmax_within_one_step(i)
        );
        let _ = writeln!(out, "true_median.{n}={:.16e}", c.median);
        let _ = writeln!(
            out,
            "prominent_true_peaks_hz.{n}={}",
            join_hz(c.prominent_peaks.iter().map(|p| p.freq_hz))
        );
        let matched = c
            .prominent_peaks
            .iter()
            .map(|p| {
                p.matched_freq_hz
                    .map_or_else(|| "-".to_owned(), |f| format!("{f:.6}"))
            })
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(out, "matched_pred_peaks_hz.{n}={matched}");
        let _ = writeln!(
            out,
            "pred_peaks_hz.{n}={}",
            join_hz(c.predicted_peaks_hz.iter().copied())
        );
        let _ = writeln!(out, "all_peaks_matched.{n}={}", c.all_peaks_matched());
    }
    out
}

/// `epoch,train_mse,test_mse`, epochs counted from 1.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_mse,test_mse\n");
    for (i, tr) in history.train_mse.iter().enumerate() {
        let te = history
            .test_mse
            .as_ref()
            .and_then(|t| t.get(i))
            .map_or_else(String::new, |v| format!("{v:.16e}"));
        let _ = writeln!(out, "{},{tr:.16e},{te}", i + 1);
    }
    out
}

/// Looks up `key` in a metrics document.
pub fn metric<'a>(metrics: &'a str, key: &str) -> Option<&'a str> {
    metrics
        .lines()
        .find_map(|l| l.split_once('=').filter(|(k, _)| *k == key).map(|(_, v)| v))
}
