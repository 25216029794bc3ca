//! Two-panel error plot: direct classification on top, via-recall below.

use std::fmt::Write;

use plm_core::{ErrorRates, MetricsRow};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 620.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const PANEL_HEIGHT: f64 = 230.0;
const PANEL_TOPS: [f64; 2] = [40.0, 340.0];

struct Series {
    label: &'static str,
    color: &'static str,
    direct: fn(&ErrorRates) -> f64,
    recall: fn(&ErrorRates) -> f64,
}

const SERIES: [Series; 3] = [
    Series {
        label: "train50",
        color: "#1f77b4",
        direct: |e| e.train_direct,
        recall: |e| e.train_recall,
    },
    Series {
        label: "new25",
        color: "#d62728",
        direct: |e| e.new_direct,
        recall: |e| e.new_recall,
    },
    Series {
        label: "all75",
        color: "#2ca02c",
        direct: |e| e.all_direct,
        recall: |e| e.all_recall,
    },
];

/// Maps an iteration and an error rate into the plot box of one panel.
/// Errors are clamped to `[0, 1]` (NaN counts as 1), so points never leave
/// the box.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub max_iteration: f64,
}

impl Frame {
    pub fn x(&self, iteration: usize) -> f64 {
        self.left + self.width * (iteration as f64 / self.max_iteration).clamp(0.0, 1.0)
    }

    pub fn y(&self, error: f64) -> f64 {
        let e = if error.is_nan() { 1.0 } else { error.clamp(0.0, 1.0) };
        self.top + self.height * (1.0 - e)
    }
}

/// Iterations that close a phase: the last row before each phase change.
pub fn phase_boundaries(rows: &[MetricsRow]) -> Vec<usize> {
    rows.windows(2)
        .filter(|w| w[0].phase != w[1].phase)
        .map(|w| w[0].iteration)
        .collect()
}

pub fn render(rows: &[MetricsRow]) -> String {
    let max_iteration = rows.iter().map(|r| r.iteration).max().unwrap_or(0).max(1) as f64;
    let boundaries = phase_boundaries(rows);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    for (panel, top) in PANEL_TOPS.into_iter().enumerate() {
        let frame = Frame {
            left: LEFT,
            top,
            width: WIDTH - LEFT - RIGHT,
            height: PANEL_HEIGHT,
            max_iteration,
        };
        let title = if panel == 0 { "a: direct" } else { "b: via recall" };
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            frame.left, frame.top, frame.width, frame.height
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{title}</text>"#, frame.left, frame.top - 8.0);
        for (tick, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
                frame.left - 6.0,
                frame.y(tick) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            frame.left + frame.width,
            frame.top + frame.height + 16.0,
            max_iteration as usize
        );

        for &b in &boundaries {
            let x = frame.x(b);
            let _ = writeln!(
                s,
                r#"<line class="phase-boundary" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
                frame.top,
                frame.top + frame.height
            );
        }

        for series in &SERIES {
            let value = if panel == 0 { series.direct } else { series.recall };
            let points: Vec<String> = rows
                .iter()
                .map(|r| format!("{:.2},{:.2}", frame.x(r.iteration), frame.y(value(&r.errors))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="{}" fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                series.label,
                series.color,
                points.join(" ")
            );
            if rows.len() == 1 {
                let r = &rows[0];
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                    frame.x(r.iteration),
                    frame.y(value(&r.errors)),
                    series.color
                );
            }
        }
    }

    let legend_x = WIDTH - RIGHT + 20.0;
    for (i, series) in SERIES.iter().enumerate() {
        let y = PANEL_TOPS[0] + 20.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/>"#,
            legend_x + 20.0,
            series.color
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, legend_x + 26.0, y + 4.0, series.label);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">PSGD iteration</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    s.push_str("</svg>\n");
    s
}
