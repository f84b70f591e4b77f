//! Self-contained SVG figures: the layer-range heatmap and the PCA scatter.
//!
//! Heatmap cells carry their exact value in `data-m`, `data-n` and `data-d`
//! attributes so the image can be checked against the grid it came from.

use std::fmt::Write as _;

use crate::gap::GapGrid;
use crate::pca::ProjectedPoint;

pub type Rgb = (u8, u8, u8);

const WHITE: Rgb = (255, 255, 255);
/// Warm end, used for positive values.
pub const RED: Rgb = (214, 39, 40);
/// Cool end; `RED` with red and blue channels exchanged.
pub const BLUE: Rgb = (40, 39, 214);

/// Blue–white–red scale, symmetric about zero, linear per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergingScale {
    /// Magnitude mapped to the saturated ends.
    pub limit: f64,
}

impl DivergingScale {
    pub fn new(limit: f64) -> Self {
        Self { limit: limit.abs() }
    }

    pub fn color(&self, d: f64) -> Rgb {
        let t = if self.limit > 0.0 {
            (d / self.limit).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let end = if t >= 0.0 { RED } else { BLUE };
        let t = t.abs();
        let mix = |w: u8, e: u8| (w as f64 + t * (e as f64 - w as f64)).round() as u8;
        (mix(WHITE.0, end.0), mix(WHITE.1, end.1), mix(WHITE.2, end.2))
    }
}

pub fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c.0, c.1, c.2)
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOptions {
    pub cell_size: f64,
    /// Fixed color limit; `None` scales to the grid's max |d|.
    pub scale: Option<f64>,
    pub title: Option<String>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            cell_size: 20.0,
            scale: None,
            title: None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RenderError {
    #[error("nothing to render: {0}")]
    Empty(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
}

/// Triangular heatmap: column `n`, row `m` (row 0 at the bottom), one
/// `rect.cell` per grid cell, plus a color legend.
pub fn render_heatmap(grid: &GapGrid, opts: &HeatmapOptions) -> Result<String, RenderError> {
    if grid.cells.is_empty() || grid.num_layers == 0 {
        return Err(RenderError::Empty("grid has no cells"));
    }
    if grid.cells.iter().any(|c| !c.d.is_finite()) {
        return Err(RenderError::NonFinite);
    }
    let scale = DivergingScale::new(opts.scale.unwrap_or_else(|| grid.max_abs()));
    let l = grid.num_layers as f64;
    let cell = opts.cell_size;
    let (left, top) = (48.0, if opts.title.is_some() { 36.0 } else { 16.0 });
    let plot = l * cell;
    let legend_x = left + plot + 24.0;
    let width = legend_x + 80.0;
    let height = top + plot + 44.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    if let Some(title) = &opts.title {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            width / 2.0,
            xml_escape(title)
        );
    }
    svg.push_str("<g class=\"cells\">\n");
    for c in &grid.cells {
        let x = left + c.n as f64 * cell;
        let y = top + (grid.num_layers - 1 - c.m) as f64 * cell;
        let _ = writeln!(
            svg,
            r#"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" data-m="{}" data-n="{}" data-d="{}"/>"#,
            hex(scale.color(c.d)),
            c.m,
            c.n,
            c.d
        );
    }
    svg.push_str("</g>\n");

    // axis ticks: every layer when small, every 4th otherwise
    let step = if grid.num_layers <= 12 { 1 } else { 4 };
    svg.push_str("<g class=\"axes\">\n");
    for i in (0..grid.num_layers).step_by(step) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{i}</text>"#,
            left + (i as f64 + 0.5) * cell,
            top + plot + 12.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{i}</text>"#,
            left - 4.0,
            top + (grid.num_layers - 1 - i) as f64 * cell + cell * 0.5 + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#,
        left + plot / 2.0,
        top + plot + 28.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle">m</text>"#,
        top + plot / 2.0
    );
    svg.push_str("</g>\n");

    // legend: 21 swatches from +limit (top) to -limit (bottom)
    let swatches = 21;
    let sw_h = plot / swatches as f64;
    svg.push_str("<g class=\"legend\">\n");
    for i in 0..swatches {
        let frac = 1.0 - 2.0 * i as f64 / (swatches - 1) as f64;
        let value = frac * scale.limit;
        let _ = writeln!(
            svg,
            r#"<rect class="swatch" x="{legend_x}" y="{}" width="14" height="{sw_h}" fill="{}"/>"#,
            top + i as f64 * sw_h,
            hex(scale.color(value))
        );
    }
    for (frac, label_y) in [(1.0, top + 8.0), (0.0, top + plot / 2.0 + 3.0), (-1.0, top + plot)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{label_y}">{:+.3}</text>"#,
            legend_x + 18.0,
            frac * scale.limit
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScatterOptions {
    pub explained_variance: Option<[f64; 2]>,
    pub title: Option<String>,
}

/// Labelled scatter of projected points with equal x/y scaling.
pub fn render_scatter(points: &[ProjectedPoint], opts: &ScatterOptions) -> Result<String, RenderError> {
    if points.is_empty() {
        return Err(RenderError::Empty("no points"));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(RenderError::NonFinite);
    }
    let (plot_w, plot_h) = (480.0, 480.0);
    let (left, top) = (56.0, if opts.title.is_some() { 40.0 } else { 20.0 });
    let pad = 0.08;

    let (min_x, max_x) = bounds(points.iter().map(|p| p.x));
    let (min_y, max_y) = bounds(points.iter().map(|p| p.y));
    let span = (max_x - min_x).max(max_y - min_y);
    let unit = if span > 0.0 { plot_w * (1.0 - 2.0 * pad) / span } else { 1.0 };
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let to_px = |x: f64, y: f64| {
        (
            left + plot_w / 2.0 + (x - cx) * unit,
            top + plot_h / 2.0 - (y - cy) * unit,
        )
    };
    let width = left + plot_w + 24.0;
    let height = top + plot_h + 44.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    if let Some(title) = &opts.title {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="13">{}</text>"#,
            width / 2.0,
            xml_escape(title)
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect class="frame" x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999999"/>"##
    );
    let (x_label, y_label) = match opts.explained_variance {
        Some([a, b]) => (
            format!("PC1 ({:.1}% of variance)", a * 100.0),
            format!("PC2 ({:.1}% of variance)", b * 100.0),
        ),
        None => ("PC1".to_string(), "PC2".to_string()),
    };
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        left + plot_w / 2.0,
        top + plot_h + 28.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{y_label}</text>"#,
        top + plot_h / 2.0
    );
    svg.push_str("<g class=\"points\">\n");
    for p in points {
        let (px, py) = to_px(p.x, p.y);
        let word = xml_escape(&p.word);
        let _ = writeln!(
            svg,
            r##"<circle class="point" cx="{px}" cy="{py}" r="4" fill="#333333" data-word="{word}" data-x="{}" data-y="{}"/>"##,
            p.x, p.y
        );
        let _ = writeln!(
            svg,
            r#"<text class="label" x="{}" y="{}">{word}</text>"#,
            px + 6.0,
            py - 6.0
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::GapCell;

    fn grid(values: &[f64], num_layers: usize) -> GapGrid {
        let cells = crate::gap::LayerRange::all(num_layers)
            .zip(values)
            .map(|(r, d)| GapCell { m: r.m, n: r.n, d: *d })
            .collect();
        GapGrid { num_layers, cells }
    }

    fn fills(svg: &str) -> Vec<String> {
        svg.lines()
            .filter(|l| l.contains("class=\"cell\""))
            .map(|l| {
                let start = l.find("fill=\"").unwrap() + 6;
                l[start..start + 7].to_string()
            })
            .collect()
    }

    #[test]
    fn midpoint_is_white() {
        assert_eq!(DivergingScale::new(1.0).color(0.0), WHITE);
        assert_eq!(DivergingScale::new(0.0).color(0.3), WHITE);
        assert_eq!(DivergingScale::new(1.0).color(1.0), RED);
        assert_eq!(DivergingScale::new(1.0).color(-5.0), BLUE);
    }

    #[test]
    fn all_zero_grid_is_white() {
        let svg = render_heatmap(&grid(&[0.0; 6], 3), &HeatmapOptions::default()).unwrap();
        let f = fills(&svg);
        assert_eq!(f.len(), 6);
        assert!(f.iter().all(|c| c == "#ffffff"));
    }

    #[test]
    fn negation_swaps_red_and_blue() {
        let g = grid(&[0.3, -0.1, 0.05, 0.0, -0.25, 0.12], 3);
        let a = fills(&render_heatmap(&g, &HeatmapOptions::default()).unwrap());
        let b = fills(&render_heatmap(&g.negated(), &HeatmapOptions::default()).unwrap());
        let swap = |c: &String| format!("#{}{}{}", &c[5..7], &c[3..5], &c[1..3]);
        assert_eq!(a.iter().map(swap).collect::<Vec<_>>(), b);
    }

    #[test]
    fn red_minus_blue_is_monotone() {
        let s = DivergingScale::new(0.7);
        let mut last = i32::MIN;
        for i in -100..=100 {
            let (r, _, b) = s.color(i as f64 / 100.0);
            let diff = r as i32 - b as i32;
            assert!(diff >= last);
            last = diff;
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let g = GapGrid { num_layers: 0, cells: vec![] };
        assert_eq!(
            render_heatmap(&g, &HeatmapOptions::default()),
            Err(RenderError::Empty("grid has no cells"))
        );
        assert!(render_scatter(&[], &ScatterOptions::default()).is_err());
    }

    #[test]
    fn scatter_collinear_and_single() {
        let pts: Vec<ProjectedPoint> = [-2.0, 0.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, x)| ProjectedPoint { word: format!("w{i}"), x: *x, y: 0.0 })
            .collect();
        let svg = render_scatter(&pts, &ScatterOptions::default()).unwrap();
        let cys: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains("class=\"point\""))
            .map(|l| l.split("cy=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(cys.len(), 3);
        assert!(cys.iter().all(|c| *c == cys[0]));

        let one = [ProjectedPoint { word: "<person>".into(), x: 1.0, y: 1.0 }];
        let svg = render_scatter(&one, &ScatterOptions::default()).unwrap();
        assert_eq!(svg.matches("class=\"point\"").count(), 1);
        assert!(svg.contains("&lt;person&gt;"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let g = grid(&[0.3, -0.1, 0.05], 2);
        let opts = HeatmapOptions { title: Some("t".into()), ..Default::default() };
        assert_eq!(render_heatmap(&g, &opts).unwrap(), render_heatmap(&g, &opts).unwrap());
    }
}
