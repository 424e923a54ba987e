//! Deterministic SVG rendering of a 12-lead report with markings.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::ecg_io::EcgRecord;
use crate::error::{Error, Result};
use crate::lead::{Lead, N_LEADS};
use crate::num::Scalar;

use super::markings::{Marking, MarkingShape};

const BUNDLED_LAYOUT: &str = include_str!("../../data/layout.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportLayout {
    pub rows: usize,
    pub cols: usize,
    pub mm_per_mv: f64,
    pub mm_per_s: f64,
    pub px_per_mm: f64,
    pub panel_height_mm: f64,
    pub margin_mm: f64,
    pub grid: bool,
    pub trace_color: String,
    pub marking_color: String,
    pub halo_color: String,
    pub grid_minor_color: String,
    pub grid_major_color: String,
    pub font_size_px: f64,
}

impl Default for ReportLayout {
    fn default() -> Self {
        ReportLayout {
            rows: 12,
            cols: 1,
            mm_per_mv: 10.0,
            mm_per_s: 25.0,
            px_per_mm: 3.78,
            panel_height_mm: 30.0,
            margin_mm: 10.0,
            grid: true,
            trace_color: "#1a1a1a".into(),
            marking_color: "#d62728".into(),
            halo_color: "#ff9896".into(),
            grid_minor_color: "#fbe3e0".into(),
            grid_major_color: "#f2b8b0".into(),
            font_size_px: 11.0,
        }
    }
}

impl ReportLayout {
    /// The layout file shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_LAYOUT).expect("bundled layout is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let l: ReportLayout = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let scales = [self.mm_per_mv, self.mm_per_s, self.px_per_mm, self.panel_height_mm];
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParam("layout scales must be positive".into()));
        }
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < N_LEADS {
            return Err(Error::InvalidParam(format!("a {}x{} grid cannot hold 12 leads", self.rows, self.cols)));
        }
        Ok(())
    }
}

/// Escapes text for SVG content and attribute values.
fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Panel {
    x0: f64,
    y_mid: f64,
    px_per_sample: f64,
    px_per_mv: f64,
}

impl Panel {
    fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.px_per_sample
    }

    fn y(&self, mv: f64) -> f64 {
        self.y_mid - mv * self.px_per_mv
    }
}

/// Renders `record` with `markings` as a standalone SVG document.
pub fn render_report<T: Scalar>(record: &EcgRecord<T>, markings: &[Marking], layout: &ReportLayout) -> Result<String> {
    layout.validate()?;
    let mm = layout.px_per_mm;
    let margin = layout.margin_mm * mm;
    let panel_w = record.duration_s() * layout.mm_per_s * mm;
    let panel_h = layout.panel_height_mm * mm;
    let legend_lines = if markings.is_empty() { 0 } else { markings.len() + 1 };
    let legend_h = legend_lines as f64 * layout.font_size_px * 1.4;
    let width = 2.0 * margin + layout.cols as f64 * panel_w;
    let height = 2.0 * margin + layout.rows as f64 * panel_h + legend_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="{:.2}">"#,
        layout.font_size_px
    )
    .unwrap();
    writeln!(s, r#"<title>{}</title>"#, esc(record.name())).unwrap();
    if layout.grid {
        let (m1, m5) = (mm, 5.0 * mm);
        writeln!(s, "<defs>").unwrap();
        writeln!(
            s,
            r#"<pattern id="grid-minor" width="{m1:.2}" height="{m1:.2}" patternUnits="userSpaceOnUse"><path d="M {m1:.2} 0 L 0 0 0 {m1:.2}" fill="none" stroke="{}" stroke-width="0.5"/></pattern>"#,
            esc(&layout.grid_minor_color)
        )
        .unwrap();
        writeln!(
            s,
            r#"<pattern id="grid-major" width="{m5:.2}" height="{m5:.2}" patternUnits="userSpaceOnUse"><rect width="{m5:.2}" height="{m5:.2}" fill="url(#grid-minor)"/><path d="M {m5:.2} 0 L 0 0 0 {m5:.2}" fill="none" stroke="{}" stroke-width="1"/></pattern>"#,
            esc(&layout.grid_major_color)
        )
        .unwrap();
        writeln!(s, "</defs>").unwrap();
    }
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    if layout.grid {
        writeln!(
            s,
            r#"<rect id="grid" x="{margin:.2}" y="{margin:.2}" width="{:.2}" height="{:.2}" fill="url(#grid-major)"/>"#,
            layout.cols as f64 * panel_w,
            layout.rows as f64 * panel_h
        )
        .unwrap();
    }

    let fs = record.fs();
    for lead in Lead::ALL {
        let i = lead.index();
        let (row, col) = (i % layout.rows, i / layout.rows);
        let panel = Panel {
            x0: margin + col as f64 * panel_w,
            y_mid: margin + (row as f64 + 0.5) * panel_h,
            px_per_sample: layout.mm_per_s * mm / fs,
            px_per_mv: layout.mm_per_mv * mm,
        };
        writeln!(s, r#"<g id="lead-{}">"#, lead.name()).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            panel.x0 + 2.0 * mm,
            margin + row as f64 * panel_h + layout.font_size_px + mm,
            lead.name()
        )
        .unwrap();
        let xs = record.lead(lead);
        let mut pts = String::with_capacity(xs.len() * 14);
        for (j, v) in xs.iter().enumerate() {
            if j > 0 {
                pts.push(' ');
            }
            write!(pts, "{:.2},{:.2}", panel.x(j), panel.y(v.as_f64())).unwrap();
        }
        writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{pts}"/>"#, esc(&layout.trace_color)).unwrap();
        for m in markings.iter().filter(|m| m.lead == lead) {
            draw_marking(&mut s, m, &panel, xs, layout);
        }
        writeln!(s, "</g>").unwrap();
    }

    if !markings.is_empty() {
        let y0 = margin + layout.rows as f64 * panel_h + layout.font_size_px * 1.4;
        writeln!(s, r#"<g id="legend">"#).unwrap();
        writeln!(s, r#"<text x="{margin:.2}" y="{y0:.2}" font-weight="bold">Counterfactual clues (beat, feature, frequency)</text>"#).unwrap();
        for (n, m) in markings.iter().enumerate() {
            let value = m.value_overlay.map(|v| format!(", {v:.2} mV")).unwrap_or_default();
            writeln!(
                s,
                r#"<text x="{margin:.2}" y="{:.2}" fill="{}" opacity="{:.2}">beat {}: {} {}/{}{}</text>"#,
                y0 + (n + 1) as f64 * layout.font_size_px * 1.4,
                esc(&layout.marking_color),
                m.opacity(),
                m.beat_index,
                esc(&m.feature),
                m.frequency,
                m.k,
                value
            )
            .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

fn draw_marking<T: Scalar>(s: &mut String, m: &Marking, p: &Panel, xs: &[T], layout: &ReportLayout) {
    let at = |i: usize| xs.get(i).map_or(0.0, |v| v.as_f64());
    let color = esc(&layout.marking_color);
    let common = format!(r#"stroke="{color}" stroke-width="{:.2}" opacity="{:.2}""#, m.stroke_width(), m.opacity());
    let title = format!("<title>{} beat {}</title>", esc(&m.feature), m.beat_index);
    match m.shape {
        MarkingShape::Peak { .. } => {
            let i = m.anchors[0];
            writeln!(
                s,
                r#"<circle class="marking" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" {common}>{title}</circle>"#,
                p.x(i),
                p.y(at(i)),
                2.0 * layout.px_per_mm
            )
            .unwrap();
        }
        MarkingShape::Pair { .. } => {
            let (i, j) = (m.anchors[0], m.anchors[1]);
            let (x1, y1, x2, y2) = (p.x(i), p.y(at(i)), p.x(j), p.y(at(j)));
            writeln!(
                s,
                r#"<line class="marking" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke-dasharray="4 2" {common}>{title}</line>"#
            )
            .unwrap();
            if let Some(v) = m.value_overlay {
                writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}">{v:.2}</text>"#,
                    (x1 + x2) / 2.0 + 2.0,
                    (y1 + y2) / 2.0 - 2.0
                )
                .unwrap();
            }
        }
        MarkingShape::Segment => {
            let (i, j) = (m.anchors[0], m.anchors[1]);
            let h = 2.0 * layout.mm_per_mv * layout.px_per_mm * 0.5;
            writeln!(
                s,
                r#"<rect class="marking" x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}" fill-opacity="{:.2}" stroke="none">{title}</rect>"#,
                p.x(i),
                p.y_mid - h / 2.0,
                p.x(j) - p.x(i),
                esc(&layout.halo_color),
                0.2 + 0.5 * m.emphasis
            )
            .unwrap();
        }
    }
}
