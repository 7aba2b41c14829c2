//! Minimal SVG line plots: one panel per channel, true curve solid,
//! prediction dashed, test points as open circles.

use std::fmt::Write as _;

use fem_surrogate_core::surrogate::ExperimentReport;

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let positive = values.clone().all(|v| v > 0.0);
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let log = positive && hi / lo > 100.0;
        let (lo, hi) = if log {
            (lo.log10(), hi.log10())
        } else {
            (lo, hi)
        };
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log {
            v.max(f64::MIN_POSITIVE).log10()
        } else {
            v
        };
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], style: &str) {
    out.push_str("<polyline fill=\"none\" ");
    out.push_str(style);
    out.push_str(" points=\"");
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

/// Renders every channel of `report` as a stacked panel.
pub fn render_svg(report: &ExperimentReport) -> String {
    let k = report.channels.len();
    let height = PANEL_H * k as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let curves = &report.curves;
    let f_lo = curves.first().map_or(0.0, |r| r.freq_hz);
    let f_hi = curves.last().map_or(1.0, |r| r.freq_hz);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;

    for (c, channel) in report.channels.iter().enumerate() {
        let top = PANEL_H * c as f64;
        let axis = Axis::fit(
            curves
                .iter()
                .flat_map(move |r| [r.truth[c], r.prediction[c]]),
        );
        let x = |f: f64| MARGIN_L + plot_w * (f - f_lo) / (f_hi - f_lo).max(f64::MIN_POSITIVE);
        let y = |v: f64| top + MARGIN_T + plot_h * (1.0 - axis.frac(v));

        let _ = writeln!(out, "<g class=\"panel\" id=\"panel-{}\">", channel.name);
        let _ = writeln!(
            out,
            "<rect x=\"{MARGIN_L}\" y=\"{:.2}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#888\"/>",
            top + MARGIN_T
        );
        let scale = if axis.log { " (log scale)" } else { "" };
        let _ = writeln!(
            out,
            "<text x=\"{MARGIN_L}\" y=\"{:.2}\">{}{scale}: true (solid) vs predicted (dashed), test points circled</text>",
            top + MARGIN_T - 10.0,
            channel.name
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">frequency [Hz]  {f_lo:.1} .. {f_hi:.1}</text>",
            MARGIN_L + plot_w / 2.0,
            top + PANEL_H - 10.0
        );

        let truth: Vec<(f64, f64)> = curves
            .iter()
            .map(|r| (x(r.freq_hz), y(r.truth[c])))
            .collect();
        let pred: Vec<(f64, f64)> = curves
            .iter()
            .map(|r| (x(r.freq_hz), y(r.prediction[c])))
            .collect();
        polyline(&mut out, &truth, "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
        polyline(
            &mut out,
            &pred,
            "stroke=\"#d1495b\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"",
        );
        for r in curves.iter().filter(|r| r.is_test) {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"none\" stroke=\"#2a9d8f\"/>",
                x(r.freq_hz),
                y(r.truth[c])
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
