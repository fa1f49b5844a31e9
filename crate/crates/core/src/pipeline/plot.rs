//! SVG rendering of a self-training trace.

use std::fmt::Write;

use crate::selftrain::StTrace;

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD_L: f64 = 56.0;
const PAD_R: f64 = 56.0;
const PAD_T: f64 = 24.0;
const PAD_B: f64 = 40.0;

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

/// Batch loss (blue), corpus loss at window bounds (dots), test accuracy on
/// the right axis (orange) and dashed lines at every target refresh.
pub fn trace_svg(trace: &StTrace, update_interval: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let steps = trace.records.len().max(1) as f64;
    let x = |step: f64| PAD_L + (W - PAD_L - PAD_R) * step / steps;
    let loss_range = finite_range(
        trace
            .records
            .iter()
            .map(|r| r.loss)
            .chain(trace.windows.iter().flat_map(|w| [w.start_loss, w.end_loss])),
    )
    .unwrap_or((0.0, 1.0));
    let y = |v: f64, (lo, hi): (f64, f64)| H - PAD_B - (H - PAD_T - PAD_B) * (v - lo) / (hi - lo);

    let _ = writeln!(
        s,
        r##"<g stroke="#444" fill="none"><line x1="{PAD_L}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{b}"/><line x1="{r}" y1="{PAD_T}" x2="{r}" y2="{b}"/></g>"##,
        b = H - PAD_B,
        r = W - PAD_R
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#,
        (W + PAD_L - PAD_R) / 2.0,
        H - 8.0
    );
    let _ = writeln!(s, r##"<text x="4" y="{}" fill="#1f5fbf">{:.3}</text>"##, PAD_T + 4.0, loss_range.1);
    let _ = writeln!(s, r##"<text x="4" y="{}" fill="#1f5fbf">{:.3}</text>"##, H - PAD_B, loss_range.0);
    let _ = writeln!(s, r#"<text x="{PAD_L}" y="{}">0</text>"#, H - PAD_B + 14.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        W - PAD_R,
        H - PAD_B + 14.0,
        trace.records.len()
    );

    if update_interval > 0 {
        let mut step = update_interval;
        while step < trace.records.len() {
            let xs = x(step as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{xs:.1}" y1="{PAD_T}" x2="{xs:.1}" y2="{}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
                H - PAD_B
            );
            step += update_interval;
        }
    }

    let loss_points: Vec<String> = trace
        .records
        .iter()
        .filter(|r| r.loss.is_finite())
        .map(|r| format!("{:.1},{:.1}", x(r.step as f64), y(r.loss, loss_range)))
        .collect();
    if !loss_points.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f5fbf" stroke-width="1" points="{}"/>"##,
            loss_points.join(" ")
        );
    }
    for w in &trace.windows {
        for (step, v) in [(w.start, w.start_loss), (w.end + 1, w.end_loss)] {
            if v.is_finite() {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#0b2f66"/>"##,
                    x(step as f64),
                    y(v, loss_range)
                );
            }
        }
    }

    let acc: Vec<(usize, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.test_acc.filter(|a| a.is_finite()).map(|a| (r.step, a)))
        .collect();
    if !acc.is_empty() {
        let points: Vec<String> = acc
            .iter()
            .map(|&(step, a)| format!("{:.1},{:.1}", x(step as f64), y(a, (0.0, 1.0))))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#d9730d" stroke-width="1.5" points="{}"/>"##,
            points.join(" ")
        );
        let _ = writeln!(s, r##"<text x="{}" y="{}" fill="#d9730d">acc 1.0</text>"##, W - PAD_R + 4.0, PAD_T + 4.0);
        let _ = writeln!(s, r##"<text x="{}" y="{}" fill="#d9730d">0.0</text>"##, W - PAD_R + 4.0, H - PAD_B);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selftrain::{TraceRecord, WindowLoss};

    #[test]
    fn renders_all_series() {
        let trace = StTrace {
            records: (0..20)
                .map(|i| TraceRecord {
                    step: i,
                    loss: 1.0 / (i as f64 + 1.0),
                    test_acc: (i % 10 == 0).then_some(0.5 + i as f64 / 100.0),
                })
                .collect(),
            windows: vec![WindowLoss {
                start: 0,
                end: 9,
                start_loss: 0.9,
                end_loss: 0.4,
            }],
        };
        let svg = trace_svg(&trace, 10);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
    }

    #[test]
    fn empty_trace_still_renders() {
        let svg = trace_svg(&StTrace::default(), 50);
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("<polyline"));
    }
}
