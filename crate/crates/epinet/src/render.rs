//! Deterministic SVG rendering of network models and comparison plots.
//!
//! Output is plain SVG 1.1 built by string assembly: no timestamps, no
//! generated identifiers, fixed-precision coordinates. Identical inputs
//! always produce byte-identical documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::accumulation::pair_of;
use crate::corpus::Codebook;
use crate::error::{Error, Result};
use crate::networks::{GroupNetwork, SubtractedNetwork};
use crate::projection::{EnaScore, NodeLayout};
use crate::stats::{mean_ci, StatReport};

/// Fallback colors assigned to conditions (in sorted order) that have no
/// explicit entry in [`PlotStyle::condition_colors`].
const PALETTE: [&str; 6] = [
    "#2166ac", "#b2182b", "#1b7837", "#762a83", "#e08214", "#35978f",
];

/// Visual parameters for the SVG renderers. All sizes are in SVG user units
/// (pixels at default scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    /// Explicit per-condition colors; conditions absent here fall back to a
    /// built-in palette.
    pub condition_colors: BTreeMap<String, String>,
    /// Fill color of code nodes.
    pub node_color: String,
    pub node_radius_min: f64,
    pub node_radius_max: f64,
    pub edge_width_min: f64,
    pub edge_width_max: f64,
    pub font_family: String,
    pub font_size: f64,
    /// `stroke-dasharray` used for confidence-interval rectangles.
    pub ci_dash: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 800.0,
            height: 600.0,
            condition_colors: BTreeMap::new(),
            node_color: "#404040".into(),
            node_radius_min: 4.0,
            node_radius_max: 13.0,
            edge_width_min: 1.0,
            edge_width_max: 6.0,
            font_family: "Helvetica, Arial, sans-serif".into(),
            font_size: 12.0,
            ci_dash: "5,4".into(),
        }
    }
}

impl PlotStyle {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("node_radius_min", self.node_radius_min),
            ("edge_width_min", self.edge_width_min),
            ("font_size", self.font_size),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "plot style: {name} must be positive, got {value}"
                )));
            }
        }
        if !(self.node_radius_max.is_finite() && self.node_radius_max > self.node_radius_min) {
            return Err(Error::InvalidConfig(
                "plot style: node_radius_max must exceed node_radius_min".into(),
            ));
        }
        if !(self.edge_width_max.is_finite() && self.edge_width_max > self.edge_width_min) {
            return Err(Error::InvalidConfig(
                "plot style: edge_width_max must exceed edge_width_min".into(),
            ));
        }
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (condition, color) in &self.condition_colors {
            if color.trim().is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "plot style: empty color for condition `{condition}`"
                )));
            }
            if let Some(other) = seen.insert(color.as_str(), condition.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "plot style: conditions `{other}` and `{condition}` share color `{color}`"
                )));
            }
        }
        Ok(())
    }

    /// Color for a condition: explicit entry if present, otherwise the
    /// palette color for `fallback_index`.
    pub fn condition_color(&self, condition: &str, fallback_index: usize) -> String {
        self.condition_colors
            .get(condition)
            .cloned()
            .unwrap_or_else(|| PALETTE[fallback_index % PALETTE.len()].to_string())
    }
}

/// Formats a coordinate with fixed precision, normalizing negative zero so
/// equal values always print identically.
fn fmt(value: f64) -> String {
    let s = format!("{value:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn fmt_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Affine map from `[in_lo, in_hi]` onto `[out_lo, out_hi]`; a degenerate
/// input range maps everything to the midpoint of the output range.
fn affine(value: f64, in_lo: f64, in_hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if in_hi > in_lo {
        out_lo + (value - in_lo) / (in_hi - in_lo) * (out_hi - out_lo)
    } else {
        (out_lo + out_hi) / 2.0
    }
}

/// Isotropic model-space → canvas transform: the bounding box of the content
/// (plus the origin) is scaled with equal axis scaling to fit 90% of the
/// canvas, centered. The y axis is flipped for SVG's downward convention.
struct CanvasFrame {
    center_x: f64,
    center_y: f64,
    scale: f64,
    width: f64,
    height: f64,
}

impl CanvasFrame {
    fn fit(points: &[(f64, f64)], style: &PlotStyle) -> CanvasFrame {
        let mut min_x = 0.0f64;
        let mut max_x = 0.0f64;
        let mut min_y = 0.0f64;
        let mut max_y = 0.0f64;
        for &(x, y) in points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        let span_x = (max_x - min_x).max(1e-12);
        let span_y = (max_y - min_y).max(1e-12);
        let scale = (0.9 * style.width / span_x).min(0.9 * style.height / span_y);
        CanvasFrame {
            center_x: (min_x + max_x) / 2.0,
            center_y: (min_y + max_y) / 2.0,
            scale: if scale.is_finite() { scale } else { 1.0 },
            width: style.width,
            height: style.height,
        }
    }

    fn to_canvas(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.width / 2.0 + (x - self.center_x) * self.scale,
            self.height / 2.0 - (y - self.center_y) * self.scale,
        )
    }
}

/// First two model-space coordinates of each node; a one-dimensional layout
/// is drawn along the x axis.
fn node_points(layout: &NodeLayout, codebook: &Codebook) -> Result<Vec<(f64, f64)>> {
    if layout.positions.len() != codebook.len() {
        return Err(Error::InvalidParameter(format!(
            "layout has positions for {} nodes but the codebook has {} codes",
            layout.positions.len(),
            codebook.len()
        )));
    }
    Ok(layout
        .positions
        .iter()
        .map(|p| (p.first().copied().unwrap_or(0.0), p.get(1).copied().unwrap_or(0.0)))
        .collect())
}

fn document_header(style: &PlotStyle) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"{font}\" font-size=\"{size}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
        w = fmt(style.width),
        h = fmt(style.height),
        font = xml_escape(&style.font_family),
        size = fmt(style.font_size),
    )
}

/// Axis cross through the canvas image of the model-space origin, with
/// SVD1/SVD2 labels carrying variance-explained percentages when available.
fn axes(svg: &mut String, frame: &CanvasFrame, variance: &[f64], style: &PlotStyle) {
    let (x0, y0) = frame.to_canvas(0.0, 0.0);
    let margin_x = 0.05 * style.width;
    let margin_y = 0.05 * style.height;
    let label_1 = match variance.first() {
        Some(v) => format!("SVD1 ({})", fmt_percent(*v)),
        None => "SVD1".to_string(),
    };
    let label_2 = match variance.get(1) {
        Some(v) => format!("SVD2 ({})", fmt_percent(*v)),
        None => "SVD2".to_string(),
    };
    let _ = writeln!(
        svg,
        "<line class=\"axis\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-width=\"1\"/>\n\
         <line class=\"axis\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-width=\"1\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"#555555\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"start\" fill=\"#555555\">{}</text>",
        fmt(margin_x),
        fmt(y0),
        fmt(style.width - margin_x),
        fmt(y0),
        fmt(x0),
        fmt(margin_y),
        fmt(x0),
        fmt(style.height - margin_y),
        fmt(style.width - margin_x),
        fmt(y0 - 6.0),
        xml_escape(&label_1),
        fmt(x0 + 6.0),
        fmt(margin_y + style.font_size),
        xml_escape(&label_2),
    );
}

/// Positive weights drawn for a network: `(pair index, weight)` with zeros
/// dropped, plus the min/max magnitude over what remains.
fn drawn_edges(weights: &[f64]) -> (Vec<(usize, f64)>, f64, f64) {
    let edges: Vec<(usize, f64)> = weights
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, w)| *w != 0.0)
        .collect();
    let lo = edges
        .iter()
        .map(|(_, w)| w.abs())
        .fold(f64::INFINITY, f64::min);
    let hi = edges.iter().map(|(_, w)| w.abs()).fold(0.0f64, f64::max);
    (edges, lo, hi)
}

fn edge_line(
    svg: &mut String,
    from: (f64, f64),
    to: (f64, f64),
    color: &str,
    width: f64,
    opacity: f64,
) {
    let _ = writeln!(
        svg,
        "<line class=\"edge\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" \
         stroke-width=\"{}\" stroke-opacity=\"{}\" stroke-linecap=\"round\"/>",
        fmt(from.0),
        fmt(from.1),
        fmt(to.0),
        fmt(to.1),
        color,
        fmt(width),
        fmt(opacity),
    );
}

fn node_circles(
    svg: &mut String,
    canvas_nodes: &[(f64, f64)],
    radii: &[f64],
    codebook: &Codebook,
    style: &PlotStyle,
) {
    for (idx, &(cx, cy)) in canvas_nodes.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<circle class=\"node\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>",
            fmt(cx),
            fmt(cy),
            fmt(radii[idx]),
            style.node_color,
        );
    }
    for (idx, &(cx, cy)) in canvas_nodes.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<text class=\"node-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" \
             fill=\"#222222\">{}</text>",
            fmt(cx),
            fmt(cy - radii[idx] - 4.0),
            xml_escape(&codebook.codes()[idx].id),
        );
    }
}

/// Renders one network over its node layout.
///
/// Node radius is an affine function of that code's frequency in the
/// network; edge stroke width and opacity grow affinely with edge weight;
/// zero-weight edges are omitted entirely.
pub fn render_network_svg(
    network: &GroupNetwork,
    layout: &NodeLayout,
    codebook: &Codebook,
    variance_explained: &[f64],
    style: &PlotStyle,
) -> Result<String> {
    style.validate()?;
    let k = codebook.len();
    if network.size() != k {
        return Err(Error::DimensionMismatch(format!(
            "network over {} codes rendered against a {k}-code codebook",
            network.size()
        )));
    }
    let model_nodes = node_points(layout, codebook)?;
    let mut bbox = model_nodes.clone();
    bbox.push((0.0, 0.0));
    let frame = CanvasFrame::fit(&bbox, style);
    let canvas_nodes: Vec<(f64, f64)> = model_nodes
        .iter()
        .map(|&(x, y)| frame.to_canvas(x, y))
        .collect();

    let color = style.condition_color(&network.condition, 0);
    let mut svg = document_header(style);
    let _ = writeln!(
        svg,
        "<text class=\"title\" x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>",
        fmt(0.05 * style.width),
        fmt(0.05 * style.height),
        color,
        xml_escape(&network.condition),
    );
    axes(&mut svg, &frame, variance_explained, style);

    let (edges, w_lo, w_hi) = drawn_edges(network.weights());
    for (index, weight) in edges {
        let (i, j) = pair_of(index, k);
        let w = weight.abs();
        edge_line(
            &mut svg,
            canvas_nodes[i],
            canvas_nodes[j],
            &color,
            affine(w, w_lo, w_hi, style.edge_width_min, style.edge_width_max),
            affine(w, w_lo, w_hi, 0.45, 1.0),
        );
    }

    let freqs = network.node_frequencies();
    let f_lo = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let f_hi = freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let radii: Vec<f64> = freqs
        .iter()
        .map(|&f| affine(f, f_lo, f_hi, style.node_radius_min, style.node_radius_max))
        .collect();
    node_circles(&mut svg, &canvas_nodes, &radii, codebook, style);

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders a two-condition comparison: unit points colored by condition,
/// group means as squares with dashed 95% confidence-interval rectangles,
/// and the subtracted network's edges colored by sign (positive = first
/// condition, negative = second).
pub fn render_comparison_svg(
    subtracted: &SubtractedNetwork,
    scores: &[EnaScore],
    stats: &[StatReport],
    layout: &NodeLayout,
    codebook: &Codebook,
    variance_explained: &[f64],
    style: &PlotStyle,
) -> Result<String> {
    style.validate()?;
    let k = codebook.len();
    if subtracted.size() != k {
        return Err(Error::DimensionMismatch(format!(
            "subtracted network over {} codes rendered against a {k}-code codebook",
            subtracted.size()
        )));
    }
    let model_nodes = node_points(layout, codebook)?;

    let mut groups: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for score in scores {
        let slot = if score.condition == subtracted.condition_a {
            0
        } else if score.condition == subtracted.condition_b {
            1
        } else {
            return Err(Error::InvalidParameter(format!(
                "score for unit `{}` has condition `{}`, not `{}` or `{}`",
                score.unit_id, score.condition, subtracted.condition_a, subtracted.condition_b
            )));
        };
        let x = score.coordinates.first().copied().ok_or_else(|| {
            Error::InvalidParameter(format!("unit `{}` has no coordinates", score.unit_id))
        })?;
        groups[slot].push((x, score.coordinates.get(1).copied().unwrap_or(0.0)));
    }
    for (points, condition) in groups
        .iter()
        .zip([&subtracted.condition_a, &subtracted.condition_b])
    {
        if points.is_empty() {
            return Err(Error::EmptyInput(format!(
                "no scores for condition `{condition}`"
            )));
        }
    }

    // Mean and, when n >= 2, the 95% CI box per condition.
    type CiBox = ((f64, f64), (f64, f64));
    let mut means = Vec::new();
    let mut ci_boxes: Vec<Option<CiBox>> = Vec::new();
    for points in &groups {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        means.push((
            xs.iter().sum::<f64>() / xs.len() as f64,
            ys.iter().sum::<f64>() / ys.len() as f64,
        ));
        if points.len() >= 2 {
            let ci_x = mean_ci(&xs, 0.95)?;
            let ci_y = mean_ci(&ys, 0.95)?;
            ci_boxes.push(Some((ci_x, ci_y)));
        } else {
            ci_boxes.push(None);
        }
    }

    let mut bbox = model_nodes.clone();
    bbox.push((0.0, 0.0));
    bbox.extend(groups[0].iter().copied());
    bbox.extend(groups[1].iter().copied());
    for ci in ci_boxes.iter().flatten() {
        let ((x_lo, x_hi), (y_lo, y_hi)) = *ci;
        bbox.push((x_lo, y_lo));
        bbox.push((x_hi, y_hi));
    }
    let frame = CanvasFrame::fit(&bbox, style);
    let canvas_nodes: Vec<(f64, f64)> = model_nodes
        .iter()
        .map(|&(x, y)| frame.to_canvas(x, y))
        .collect();

    let color_a = style.condition_color(&subtracted.condition_a, 0);
    let color_b = style.condition_color(&subtracted.condition_b, 1);

    let mut svg = document_header(style);
    let _ = writeln!(
        svg,
        "<text class=\"title\" x=\"{}\" y=\"{}\" fill=\"#222222\">\
         <tspan fill=\"{}\">{}</tspan> vs <tspan fill=\"{}\">{}</tspan></text>",
        fmt(0.05 * style.width),
        fmt(0.05 * style.height),
        color_a,
        xml_escape(&subtracted.condition_a),
        color_b,
        xml_escape(&subtracted.condition_b),
    );
    axes(&mut svg, &frame, variance_explained, style);

    for (ci, color) in ci_boxes.iter().zip([&color_a, &color_b]) {
        if let Some(((x_lo, x_hi), (y_lo, y_hi))) = ci {
            let (left, bottom) = frame.to_canvas(*x_lo, *y_lo);
            let (right, top) = frame.to_canvas(*x_hi, *y_hi);
            let _ = writeln!(
                svg,
                "<rect class=\"ci\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" \
                 stroke=\"{}\" stroke-width=\"1\" stroke-dasharray=\"{}\"/>",
                fmt(left),
                fmt(top),
                fmt(right - left),
                fmt(bottom - top),
                color,
                xml_escape(&style.ci_dash),
            );
        }
    }

    let (edges, w_lo, w_hi) = drawn_edges(subtracted.weights());
    for (index, weight) in edges {
        let (i, j) = pair_of(index, k);
        let color = if weight > 0.0 { &color_a } else { &color_b };
        let w = weight.abs();
        edge_line(
            &mut svg,
            canvas_nodes[i],
            canvas_nodes[j],
            color,
            affine(w, w_lo, w_hi, style.edge_width_min, style.edge_width_max),
            affine(w, w_lo, w_hi, 0.45, 1.0),
        );
    }

    let mid_radius = (style.node_radius_min + style.node_radius_max) / 2.0;
    let radii = vec![mid_radius; k];
    node_circles(&mut svg, &canvas_nodes, &radii, codebook, style);

    for (points, color) in groups.iter().zip([&color_a, &color_b]) {
        for &(x, y) in points {
            let (cx, cy) = frame.to_canvas(x, y);
            let _ = writeln!(
                svg,
                "<circle class=\"unit\" cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"{}\" \
                 fill-opacity=\"0.85\"/>",
                fmt(cx),
                fmt(cy),
                color,
            );
        }
    }
    for (&(mx, my), color) in means.iter().zip([&color_a, &color_b]) {
        let (cx, cy) = frame.to_canvas(mx, my);
        let half = 5.0;
        let _ = writeln!(
            svg,
            "<rect class=\"mean\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            fmt(cx - half),
            fmt(cy - half),
            fmt(2.0 * half),
            fmt(2.0 * half),
            color,
        );
    }

    for (line, report) in stats.iter().enumerate() {
        let text = format!(
            "{}: t({}) = {}, p = {}, d = {}",
            report.dimension,
            fmt(report.df),
            fmt(report.t),
            fmt(report.p_two_sided),
            fmt(report.cohens_d),
        );
        let y = style.height - 6.0 - (stats.len() - 1 - line) as f64 * (style.font_size + 2.0);
        let _ = writeln!(
            svg,
            "<text class=\"stat\" x=\"{}\" y=\"{}\" fill=\"#333333\">{}</text>",
            fmt(0.05 * style.width),
            fmt(y),
            xml_escape(&text),
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Code;
    use crate::stats::GroupSummary;
    use regex::Regex;
    use serde_json::json;

    fn codebook(ids: &[&str]) -> Codebook {
        Codebook::new(
            ids.iter()
                .map(|id| Code {
                    id: id.to_string(),
                    label: String::new(),
                    definition: String::new(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn layout3() -> NodeLayout {
        NodeLayout {
            dims: 2,
            positions: vec![vec![-1.0, 0.5], vec![0.8, 0.9], vec![0.2, -1.1]],
        }
    }

    fn group(weights: &[f64], freqs: &[f64]) -> GroupNetwork {
        serde_json::from_value(json!({
            "condition": "aware",
            "mode": "mean-of-normalized",
            "size": freqs.len(),
            "weights": weights,
            "node_frequencies": freqs,
            "unit_count": 2,
        }))
        .unwrap()
    }

    fn subtracted(weights: &[f64], size: usize) -> SubtractedNetwork {
        serde_json::from_value(json!({
            "condition_a": "aware",
            "condition_b": "unaware",
            "mode": "mean-of-normalized",
            "size": size,
            "weights": weights,
        }))
        .unwrap()
    }

    fn score(unit: &str, condition: &str, x: f64, y: f64) -> EnaScore {
        EnaScore {
            unit_id: unit.into(),
            condition: condition.into(),
            coordinates: vec![x, y],
        }
    }

    /// Values of `attr` on elements carrying `class`, in document order.
    fn attr_values(doc: &str, class: &str, attr: &str) -> Vec<f64> {
        let pattern = Regex::new(&format!("{attr}=\"(-?[0-9.]+)\"")).unwrap();
        doc.lines()
            .filter(|line| line.contains(&format!("class=\"{class}\"")))
            .filter_map(|line| {
                pattern
                    .captures(line)
                    .map(|c| c[1].parse::<f64>().unwrap())
            })
            .collect()
    }

    fn attr_strings(doc: &str, class: &str, attr: &str) -> Vec<String> {
        let pattern = Regex::new(&format!("{attr}=\"([^\"]*)\"")).unwrap();
        doc.lines()
            .filter(|line| line.contains(&format!("class=\"{class}\"")))
            .filter_map(|line| pattern.captures(line).map(|c| c[1].to_string()))
            .collect()
    }

    #[test]
    fn rendering_is_deterministic() {
        let network = group(&[0.2, 0.0, 0.8], &[0.3, 0.9, 0.6]);
        let style = PlotStyle::default();
        let first =
            render_network_svg(&network, &layout3(), &codebook(&["A", "B", "C"]), &[0.4, 0.3], &style)
                .unwrap();
        let second =
            render_network_svg(&network, &layout3(), &codebook(&["A", "B", "C"]), &[0.4, 0.3], &style)
                .unwrap();
        assert_eq!(first, second);
        assert!(first.starts_with("<svg "));
        assert!(first.ends_with("</svg>\n"));
    }

    #[test]
    fn node_radius_order_follows_frequency_order() {
        let network = group(&[0.0, 0.0, 0.0], &[0.2, 0.9, 0.5]);
        let style = PlotStyle::default();
        let doc =
            render_network_svg(&network, &layout3(), &codebook(&["A", "B", "C"]), &[], &style)
                .unwrap();
        let radii = attr_values(&doc, "node", "r");
        assert_eq!(radii.len(), 3);
        assert!(radii[1] > radii[2] && radii[2] > radii[0]);
        assert_eq!(radii[0], style.node_radius_min);
        assert_eq!(radii[1], style.node_radius_max);
    }

    #[test]
    fn edge_width_and_opacity_increase_with_weight() {
        let network = group(&[0.2, 0.0, 0.8], &[1.0, 1.0, 1.0]);
        let doc = render_network_svg(
            &network,
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[0.5, 0.2],
            &PlotStyle::default(),
        )
        .unwrap();
        let widths = attr_values(&doc, "edge", "stroke-width");
        let opacities = attr_values(&doc, "edge", "stroke-opacity");
        assert_eq!(widths.len(), 2, "zero-weight edge must be omitted");
        assert!(widths[1] > widths[0]);
        assert!(opacities[1] > opacities[0]);
    }

    #[test]
    fn zero_network_renders_nodes_and_axes_only() {
        let network = group(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]);
        let doc = render_network_svg(
            &network,
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default(),
        )
        .unwrap();
        assert!(!doc.contains("class=\"edge\""));
        assert_eq!(attr_values(&doc, "node", "r").len(), 3);
        assert_eq!(attr_values(&doc, "axis", "x1").len(), 2);
    }

    #[test]
    fn axis_labels_carry_variance_percentages() {
        let network = group(&[0.1, 0.1, 0.1], &[1.0, 1.0, 1.0]);
        let doc = render_network_svg(
            &network,
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[0.394, 0.236],
            &PlotStyle::default(),
        )
        .unwrap();
        assert!(doc.contains("SVD1 (39.4%)"));
        assert!(doc.contains("SVD2 (23.6%)"));
    }

    #[test]
    fn all_coordinates_stay_inside_the_viewbox() {
        let layout = NodeLayout {
            dims: 2,
            positions: vec![vec![-8.0, 3.0], vec![6.0, -9.0], vec![0.1, 7.5]],
        };
        let network = group(&[0.7, 0.2, 0.4], &[0.5, 1.5, 2.5]);
        let style = PlotStyle::default();
        let doc = render_network_svg(
            &network,
            &layout,
            &codebook(&["A", "B", "C"]),
            &[0.6, 0.3],
            &style,
        )
        .unwrap();
        let number = Regex::new("(cx|cy|x|y|x1|y1|x2|y2)=\"(-?[0-9.]+)\"").unwrap();
        for captures in number.captures_iter(&doc) {
            let value: f64 = captures[2].parse().unwrap();
            let max = if captures[1].starts_with('c') || captures[1].starts_with('x') {
                if captures[1].contains('y') { style.height } else { style.width }
            } else {
                style.height
            };
            assert!(
                (0.0..=max).contains(&value),
                "{}={} outside the canvas",
                &captures[1],
                value
            );
        }
    }

    #[test]
    fn missing_node_positions_are_an_error() {
        let network = group(&[0.1, 0.2, 0.3], &[1.0, 1.0, 1.0]);
        let short = NodeLayout {
            dims: 2,
            positions: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        };
        assert!(render_network_svg(
            &network,
            &short,
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default()
        )
        .is_err());
    }

    #[test]
    fn duplicate_condition_colors_are_rejected() {
        let mut style = PlotStyle::default();
        style
            .condition_colors
            .insert("aware".into(), "#112233".into());
        style
            .condition_colors
            .insert("unaware".into(), "#112233".into());
        assert!(style.validate().is_err());
    }

    #[test]
    fn style_validation_rejects_degenerate_ranges() {
        let bad_radius = PlotStyle {
            node_radius_max: PlotStyle::default().node_radius_min,
            ..PlotStyle::default()
        };
        assert!(bad_radius.validate().is_err());
        let bad_width = PlotStyle {
            edge_width_min: 0.0,
            ..PlotStyle::default()
        };
        assert!(bad_width.validate().is_err());
    }

    #[test]
    fn code_ids_are_xml_escaped() {
        let network = group(&[0.5], &[1.0, 2.0]);
        let layout = NodeLayout {
            dims: 2,
            positions: vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
        };
        let doc = render_network_svg(
            &network,
            &layout,
            &codebook(&["Q&A", "B<C"]),
            &[],
            &PlotStyle::default(),
        )
        .unwrap();
        assert!(doc.contains("Q&amp;A"));
        assert!(doc.contains("B&lt;C"));
    }

    fn comparison_inputs() -> (SubtractedNetwork, Vec<EnaScore>) {
        let scores = vec![
            score("P1", "aware", 0.9, 0.2),
            score("P2", "aware", 0.5, -0.1),
            score("P3", "unaware", -0.6, 0.4),
            score("P4", "unaware", -0.2, -0.5),
        ];
        (subtracted(&[0.3, 0.0, 0.0], 3), scores)
    }

    #[test]
    fn single_positive_edge_gets_first_condition_color() {
        let (diff, scores) = comparison_inputs();
        let doc = render_comparison_svg(
            &diff,
            &scores,
            &[],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[0.4, 0.2],
            &PlotStyle::default(),
        )
        .unwrap();
        let strokes = attr_strings(&doc, "edge", "stroke");
        assert_eq!(strokes, vec![PALETTE[0].to_string()]);
    }

    #[test]
    fn negative_edges_get_second_condition_color() {
        let (_, scores) = comparison_inputs();
        let diff = subtracted(&[-0.4, 0.0, 0.25], 3);
        let doc = render_comparison_svg(
            &diff,
            &scores,
            &[],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default(),
        )
        .unwrap();
        let strokes = attr_strings(&doc, "edge", "stroke");
        assert_eq!(strokes, vec![PALETTE[1].to_string(), PALETTE[0].to_string()]);
    }

    #[test]
    fn identical_score_sets_make_mean_squares_coincide() {
        let scores = vec![
            score("P1", "aware", 0.4, 0.1),
            score("P2", "aware", -0.4, -0.1),
            score("P3", "unaware", 0.4, 0.1),
            score("P4", "unaware", -0.4, -0.1),
        ];
        let doc = render_comparison_svg(
            &subtracted(&[0.1, 0.0, 0.0], 3),
            &scores,
            &[],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default(),
        )
        .unwrap();
        let xs = attr_values(&doc, "mean", "x");
        let ys = attr_values(&doc, "mean", "y");
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[0], xs[1]);
        assert_eq!(ys[0], ys[1]);
    }

    #[test]
    fn ci_rectangles_reproduce_stats_module_intervals() {
        let (diff, scores) = comparison_inputs();
        let doc = render_comparison_svg(
            &diff,
            &scores,
            &[],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default(),
        )
        .unwrap();
        // Canvas distance between the two aware unit points along x...
        let unit_x = attr_values(&doc, "unit", "cx");
        let canvas_dx = (unit_x[0] - unit_x[1]).abs();
        // ...fixes the model->canvas scale, which the CI box width must obey.
        let rect_w = attr_values(&doc, "ci", "width");
        let (lo, hi) = mean_ci(&[0.9, 0.5], 0.95).unwrap();
        let expected_ratio = (hi - lo) / (0.9 - 0.5);
        assert!(
            (rect_w[0] / canvas_dx - expected_ratio).abs() < 1e-3,
            "CI box width disagrees with the stats module"
        );
    }

    #[test]
    fn stat_reports_appear_as_footer_text() {
        let (diff, scores) = comparison_inputs();
        let summary = GroupSummary {
            label: "aware".into(),
            n: 2,
            mean: 0.7,
            sd: 0.28,
            ci_95: (0.0, 1.4),
        };
        let report = StatReport {
            dimension: "SVD1".into(),
            group_a: summary.clone(),
            group_b: GroupSummary {
                label: "unaware".into(),
                ..summary
            },
            t: 2.5,
            df: 1.9,
            p_two_sided: 0.13,
            cohens_d: 1.2,
        };
        let doc = render_comparison_svg(
            &diff,
            &scores,
            &[report],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default(),
        )
        .unwrap();
        assert!(doc.contains("SVD1: t(1.9000) = 2.5000, p = 0.1300, d = 1.2000"));
    }

    #[test]
    fn comparison_requires_scores_for_both_conditions() {
        let (diff, mut scores) = comparison_inputs();
        scores.retain(|s| s.condition == "aware");
        assert!(render_comparison_svg(
            &diff,
            &scores,
            &[],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default()
        )
        .is_err());
    }

    #[test]
    fn scores_from_unknown_conditions_are_rejected() {
        let (diff, mut scores) = comparison_inputs();
        scores.push(score("P9", "other", 0.0, 0.0));
        assert!(render_comparison_svg(
            &diff,
            &scores,
            &[],
            &layout3(),
            &codebook(&["A", "B", "C"]),
            &[],
            &PlotStyle::default()
        )
        .is_err());
    }

    #[test]
    fn comparison_rendering_is_deterministic() {
        let (diff, scores) = comparison_inputs();
        let render = || {
            render_comparison_svg(
                &diff,
                &scores,
                &[],
                &layout3(),
                &codebook(&["A", "B", "C"]),
                &[0.5, 0.25],
                &PlotStyle::default(),
            )
            .unwrap()
        };
        assert_eq!(render(), render());
    }
}
