//! Minimal SVG plot emission: confusion-matrix heatmaps, training curves,
//! and regression scatter plots. Pure string assembly with fixed float
//! formatting, so outputs are deterministic and diffable.

use std::fmt::Write;

use crate::metrics::{ConfusionMatrix, EpochHistory};

const CELL: f64 = 64.0;
const MARGIN: f64 = 70.0;

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, content: &str) {
    let _ = write!(
        out,
        "  <text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\">{content}</text>\n"
    );
}

/// Heatmap of a confusion matrix: rows are true classes, columns predicted.
pub fn confusion_matrix_svg(cm: &ConfusionMatrix, labels: &[String]) -> String {
    let k = cm.classes();
    let grid = CELL * k as f64;
    let width = MARGIN + grid + 20.0;
    let height = MARGIN + grid + 40.0;
    let max = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| cm.count(i, j))
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    let mut out = String::new();
    svg_open(&mut out, width, height);
    text(&mut out, MARGIN + grid / 2.0, 16.0, "middle", "predicted");
    for (j, label) in labels.iter().enumerate().take(k) {
        text(
            &mut out,
            MARGIN + (j as f64 + 0.5) * CELL,
            MARGIN - 8.0,
            "middle",
            label,
        );
    }
    for i in 0..k {
        text(
            &mut out,
            MARGIN - 8.0,
            MARGIN + (i as f64 + 0.6) * CELL,
            "end",
            labels.get(i).map(String::as_str).unwrap_or("?"),
        );
        for j in 0..k {
            let count = cm.count(i, j);
            let shade = 255.0 - 200.0 * (count as f64 / max);
            let x = MARGIN + j as f64 * CELL;
            let y = MARGIN + i as f64 * CELL;
            let _ = write!(
                out,
                "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" \
fill=\"rgb({shade:.0},{shade:.0},255)\" stroke=\"#444\"/>\n"
            );
            let color = if count as f64 / max > 0.6 { "#fff" } else { "#000" };
            let _ = write!(
                out,
                "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{color}\">{count}</text>\n",
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.x_min) / (self.x_max - self.x_min).max(1e-12) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.y_min) / (self.y_max - self.y_min).max(1e-12) * self.h
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let _ = write!(
            out,
            "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#000\"/>\n",
            self.x0, self.y0, self.w, self.h
        );
        text(out, self.x0 + self.w / 2.0, self.y0 + self.h + 32.0, "middle", x_label);
        text(out, self.x0 - 40.0, self.y0 - 10.0, "start", y_label);
        text(out, self.x0, self.y0 + self.h + 16.0, "middle", &format!("{:.2}", self.x_min));
        text(
            out,
            self.x0 + self.w,
            self.y0 + self.h + 16.0,
            "middle",
            &format!("{:.2}", self.x_max),
        );
        text(out, self.x0 - 6.0, self.y0 + self.h, "end", &format!("{:.2}", self.y_min));
        text(out, self.x0 - 6.0, self.y0 + 10.0, "end", &format!("{:.2}", self.y_max));
    }
}

fn polyline(out: &mut String, frame: &Frame, ys: &[f64], color: &str) {
    if ys.is_empty() {
        return;
    }
    let mut points = String::new();
    for (i, &v) in ys.iter().enumerate() {
        let _ = write!(points, "{:.1},{:.1} ", frame.x(i as f64 + 1.0), frame.y(v));
    }
    let _ = write!(
        out,
        "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.trim_end()
    );
}

/// Training curves: loss plus accuracy/AUC series over epochs.
pub fn history_svg(history: &EpochHistory) -> String {
    let epochs = history.len().max(1);
    let mut out = String::new();
    svg_open(&mut out, 520.0, 360.0);

    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let auc: Vec<f64> = history.val_roc_auc.iter().map(|a| a.unwrap_or(f64::NAN)).collect();
    let series: [(&str, &str, Vec<f64>); 4] = [
        ("train loss", "#d62728", history.train_loss.clone()),
        ("train acc", "#1f77b4", history.train_accuracy.clone()),
        ("val acc", "#2ca02c", history.val_accuracy.clone()),
        ("val auc", "#9467bd", auc),
    ];
    for (_, _, ys) in &series {
        for &v in ys.iter().filter(|v| v.is_finite()) {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let frame = Frame {
        x0: 60.0,
        y0: 30.0,
        w: 420.0,
        h: 260.0,
        x_min: 1.0,
        x_max: epochs as f64,
        y_min,
        y_max: y_max + (y_max - y_min).max(1e-9) * 0.05,
    };
    frame.axes(&mut out, "epoch", "value");
    for (i, (name, color, ys)) in series.iter().enumerate() {
        if ys.iter().all(|v| !v.is_finite()) {
            continue;
        }
        polyline(&mut out, &frame, ys, color);
        let _ = write!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{name}</text>\n",
            70.0 + 110.0 * i as f64,
            320.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Predicted-vs-true scatter with the identity reference line.
pub fn scatter_svg(target: &[f64], pred: &[f64], x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, 460.0, 420.0);
    let lo = target
        .iter()
        .chain(pred)
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let hi = target
        .iter()
        .chain(pred)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1.0);
    let frame = Frame {
        x0: 60.0,
        y0: 30.0,
        w: 360.0,
        h: 320.0,
        x_min: lo,
        x_max: hi,
        y_min: lo,
        y_max: hi,
    };
    frame.axes(&mut out, x_label, y_label);
    let _ = write!(
        out,
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
        frame.x(lo),
        frame.y(lo),
        frame.x(hi),
        frame.y(hi)
    );
    for (&t, &p) in target.iter().zip(pred) {
        let _ = write!(
            out,
            "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.2\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n",
            frame.x(t),
            frame.y(p)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_svg_contains_counts_and_labels() {
        let cm = ConfusionMatrix::binary(200, 1, 2, 197);
        let labels = vec!["clean".to_string(), "contaminated".to_string()];
        let svg = confusion_matrix_svg(&cm, &labels);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains(">197<"));
        assert!(svg.contains("clean"));
        assert!(svg.contains("contaminated"));
        // 4 cells.
        assert_eq!(svg.matches("<rect").count(), 4);
    }

    #[test]
    fn history_svg_draws_one_polyline_per_series() {
        let history = EpochHistory {
            train_loss: vec![0.7, 0.4, 0.2],
            train_accuracy: vec![0.5, 0.8, 0.95],
            val_accuracy: vec![0.5, 0.75, 0.9],
            val_roc_auc: vec![Some(0.6), Some(0.9), Some(0.99)],
        };
        let svg = history_svg(&history);
        assert_eq!(svg.matches("<polyline").count(), 4);

        let no_auc = EpochHistory {
            val_roc_auc: vec![None; 3],
            ..history
        };
        assert_eq!(history_svg(&no_auc).matches("<polyline").count(), 3);
    }

    #[test]
    fn scatter_svg_plots_every_point() {
        let target = [0.0, 25.0, 50.0, 75.0, 100.0];
        let pred = [1.0, 24.0, 52.0, 74.0, 99.0];
        let svg = scatter_svg(&target, &pred, "true dilution %", "predicted %");
        assert_eq!(svg.matches("<circle").count(), 5);
        assert!(svg.contains("true dilution %"));
    }

    #[test]
    fn svg_output_is_deterministic() {
        let cm = ConfusionMatrix::binary(5, 1, 2, 7);
        let labels = vec!["a".to_string(), "b".to_string()];
        assert_eq!(confusion_matrix_svg(&cm, &labels), confusion_matrix_svg(&cm, &labels));
    }
}
