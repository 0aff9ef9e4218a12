//! Dependency-free SVG report plots: the five-panel derivative figure with
//! fiducial markers, training curves, and the regression scatter.

use ppgmorph_core::fiducials::{DerivativeStack, FiducialSet, Point};

const W: f64 = 860.0;
const MARGIN: f64 = 48.0;

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xmin) / (self.xmax - self.xmin).max(1e-300) * self.w
    }
    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.ymin) / (self.ymax - self.ymin).max(1e-300) * self.h
    }
    fn polyline(&self, xs: impl Iterator<Item = f64>, ys: &[f64], color: &str) -> String {
        let pts: Vec<String> = xs
            .zip(ys)
            .map(|(x, y)| format!("{:.2},{:.2}", self.x(x), self.y(*y)))
            .collect();
        format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\"/>\n",
            pts.join(" ")
        )
    }
    fn axes(&self, label: &str) -> String {
        format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#999\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#333\">{label}</text>\n",
            self.x0,
            self.y0,
            self.w,
            self.h,
            self.x0 + 6.0,
            self.y0 + 16.0
        )
    }
}

fn span(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min == max {
        (min - 1.0, max + 1.0)
    } else {
        let pad = 0.06 * (max - min);
        (min - pad, max + pad)
    }
}

/// Five stacked panels (PPG through SPG) with labelled O/S/N (and D when
/// detected) marker glyphs on the PPG panel.
pub fn five_panel_svg(stack: &DerivativeStack, fids: &FiducialSet) -> String {
    let names = ["PPG", "VPG", "APG", "JPG", "SPG"];
    let waves = [&stack.ppg, &stack.vpg, &stack.apg, &stack.jpg, &stack.spg];
    let panel_h = 110.0;
    let height = MARGIN * 2.0 + panel_h * 5.0 + 14.0 * 4.0;
    let mut svg = header(W, height);
    let n = stack.ppg.len();

    for (k, (name, wave)) in names.iter().zip(waves).enumerate() {
        let (ymin, ymax) = span(wave);
        let frame = Frame {
            x0: MARGIN,
            y0: MARGIN + k as f64 * (panel_h + 14.0),
            w: W - 2.0 * MARGIN,
            h: panel_h,
            xmin: 0.0,
            xmax: (n - 1) as f64,
            ymin,
            ymax,
        };
        svg.push_str(&frame.axes(name));
        svg.push_str(&frame.polyline((0..n).map(|i| i as f64), wave, "#1763a6"));

        if k == 0 {
            let mut markers: Vec<(&str, &Point)> = vec![("O", &fids.o), ("S", &fids.s)];
            if let Some(p) = &fids.n {
                markers.push(("N", p));
            }
            if let Some(p) = &fids.d {
                markers.push(("D", p));
            }
            for (label, p) in markers {
                let (mx, my) = (frame.x(p.idx as f64), frame.y(p.val));
                svg.push_str(&format!(
                    "<circle id=\"marker-{label}\" cx=\"{mx:.2}\" cy=\"{my:.2}\" r=\"4\" \
                     fill=\"#c22\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#c22\" \
                     font-weight=\"bold\">{label}</text>\n",
                    mx + 5.0,
                    my - 5.0
                ));
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// One curve per (model, split) pair against the epoch axis.
pub struct Curve {
    pub label: String,
    pub values: Vec<f64>,
    pub color: String,
}

pub fn curves_svg(title: &str, y_label: &str, curves: &[Curve]) -> String {
    let height = 420.0;
    let mut svg = header(W, height);
    let epochs = curves.iter().map(|c| c.values.len()).max().unwrap_or(1);
    let all: Vec<f64> = curves.iter().flat_map(|c| c.values.iter().copied()).collect();
    let (ymin, ymax) = span(&all);
    let frame = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: W - 2.0 * MARGIN,
        h: height - 2.0 * MARGIN,
        xmin: 0.0,
        xmax: (epochs.max(2) - 1) as f64,
        ymin,
        ymax,
    };
    svg.push_str(&frame.axes(title));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#333\">epoch</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#333\" transform=\"rotate(-90 14 {:.1})\">{y_label}</text>\n",
        W / 2.0,
        height - 12.0,
        14.0,
        height / 2.0,
        height / 2.0
    ));
    for (k, curve) in curves.iter().enumerate() {
        svg.push_str(&frame.polyline((0..curve.values.len()).map(|i| i as f64), &curve.values, &curve.color));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{}</text>\n",
            frame.x0 + frame.w - 170.0,
            frame.y0 + 16.0 + 15.0 * k as f64,
            curve.color,
            curve.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Predicted-vs-true age scatter with the 45-degree reference line and an
/// MAE annotation.
pub fn scatter_svg(title: &str, pairs: &[(f64, f64)], mae: f64) -> String {
    let height = 520.0;
    let mut svg = header(W, height);
    let mut all: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    all.push(0.0);
    let (lo, hi) = span(&all);
    let frame = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: W - 2.0 * MARGIN,
        h: height - 2.0 * MARGIN,
        xmin: lo,
        xmax: hi,
        ymin: lo,
        ymax: hi,
    };
    svg.push_str(&frame.axes(title));
    // 45-degree reference
    svg.push_str(&format!(
        "<line id=\"reference-45deg\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
         stroke=\"#888\" stroke-dasharray=\"5,4\"/>\n",
        frame.x(lo),
        frame.y(lo),
        frame.x(hi),
        frame.y(hi)
    ));
    for &(t, p) in pairs {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"#1763a6\" fill-opacity=\"0.6\"/>\n",
            frame.x(t),
            frame.y(p)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#333\" font-weight=\"bold\">MAE = {mae:.2} years</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#333\">true age</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#333\">predicted</text>\n",
        frame.x0 + 10.0,
        frame.y0 + 34.0,
        W / 2.0,
        height - 12.0,
        6.0,
        MARGIN + 12.0
    ));
    svg.push_str("</svg>\n");
    svg
}
