//! SVG rendering of a circular layout: the circle outline, one red anchor per
//! cluster with its index, and one dot per sample colored by assigned
//! cluster. Outliers are drawn as open rings. Output bytes are deterministic
//! for identical inputs.

use std::path::Path;

use crate::layout::{CircularLayout, CycleOrder};
use crate::{Error, Result};

/// Fixed 16-color palette; sample colors cycle through it by cluster index.
pub const PALETTE: [&str; 16] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#c5b0d5", "#c49c94", "#f7b6d2", "#dbdb8d",
];

const ANCHOR_COLOR: &str = "#d62728";

#[derive(Debug, Clone, Copy)]
pub struct SvgStyle {
    pub width_px: u32,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { width_px: 900 }
    }
}

/// Maps math coordinates into the SVG canvas: centered, y-axis flipped, with
/// a 5% margin around the circle.
fn transform(style: &SvgStyle, radius: f64, x: f64, y: f64) -> (f64, f64) {
    let w = style.width_px as f64;
    let center = w / 2.0;
    let margin = 0.05 * w;
    let scale = (w / 2.0 - margin) / radius;
    (center + x * scale, center - y * scale)
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Builds the SVG text for a layout. `labels` holds the assigned cluster per
/// sample and selects the palette color.
pub fn svg_document(
    layout: &CircularLayout,
    cycle: &CycleOrder,
    labels: &[usize],
    style: &SvgStyle,
) -> Result<String> {
    let n = layout.sample_coords.len();
    if labels.len() != n || layout.outlier_flags.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels / {} outlier flags for {n} samples",
            labels.len(),
            layout.outlier_flags.len()
        )));
    }
    if cycle.order.len() != layout.anchor_coords.len() {
        return Err(Error::DimensionMismatch(
            "cycle order and anchors disagree".into(),
        ));
    }
    let w = style.width_px;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {w} {w}\">\n"
    ));

    let (cx, cy) = transform(style, layout.radius, 0.0, 0.0);
    let (rim_x, _) = transform(style, layout.radius, layout.radius, 0.0);
    let circle_r = rim_x - cx;
    out.push_str(&format!(
        "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"{ANCHOR_COLOR}\" stroke-width=\"1.5\"/>\n",
        fmt(cx),
        fmt(cy),
        fmt(circle_r)
    ));

    for (i, &[x, y]) in layout.sample_coords.iter().enumerate() {
        let (sx, sy) = transform(style, layout.radius, x, y);
        let color = PALETTE[labels[i] % PALETTE.len()];
        if layout.outlier_flags[i] {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>\n",
                fmt(sx),
                fmt(sy)
            ));
        } else {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>\n",
                fmt(sx),
                fmt(sy)
            ));
        }
    }

    for (pos, &[x, y]) in layout.anchor_coords.iter().enumerate() {
        let (ax, ay) = transform(style, layout.radius, x, y);
        out.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"{ANCHOR_COLOR}\"/>\n",
            fmt(ax),
            fmt(ay)
        ));
        // cluster index just outside the rim
        let (tx, ty) = transform(style, layout.radius, x * 1.08, y * 1.08);
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" dominant-baseline=\"middle\">{}</text>\n",
            fmt(tx),
            fmt(ty),
            cycle.order[pos]
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_svg(
    layout: &CircularLayout,
    cycle: &CycleOrder,
    labels: &[usize],
    out_path: &Path,
    style: &SvgStyle,
) -> Result<()> {
    let document = svg_document(layout, cycle, labels, style)?;
    std::fs::write(out_path, document)
        .map_err(|e| Error::io(out_path.display().to_string(), e))
}
