//! Savings vs. similarity scatter as a self-contained SVG.

use std::fmt::Write;

use plc_core::encoder::Strategy;

use crate::report::RunRow;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlotError {
    #[error("no plottable rows")]
    NoRows,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 60.0;

fn color(s: Strategy) -> &'static str {
    match s {
        Strategy::PromptOnly => "#1f77b4",
        Strategy::PromptCanny => "#ff7f0e",
        Strategy::PromptCannyColor => "#2ca02c",
        Strategy::SalientFeatures => "#d62728",
    }
}

/// y value of a row: embedding similarity, falling back to SSIM.
fn similarity(r: &RunRow) -> Option<f64> {
    r.embed_sim_preview.or(r.ssim_preview)
}

/// Scatter of (savings, embed_sim_preview), one colour per strategy.
/// Rows without savings or similarity are skipped. Savings below zero
/// stretch the x axis to the left; the y axis spans [min(0, y), 1].
pub fn tradeoff_svg(rows: &[RunRow]) -> Result<String, PlotError> {
    let points: Vec<(Strategy, f64, f64)> = rows
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| Some((r.strategy, r.savings?, similarity(r)?)))
        .collect();
    if points.is_empty() {
        return Err(PlotError::NoRows);
    }
    let x_min = points.iter().map(|p| p.1).fold(0.0f64, f64::min).floor();
    let y_min = points.iter().map(|p| p.2).fold(0.0f64, f64::min).floor();
    let (x_max, y_max) = (1.0, 1.0);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * pw;
    let sy = |y: f64| MARGIN_T + (y_max - y) / (y_max - y_min) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#,
            sx(xv),
            HEIGHT - MARGIN_B + 18.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#, MARGIN_L - 6.0, sy(yv) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">bandwidth savings</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">similarity to original</text>"#,
        MARGIN_T + ph / 2.0
    );

    for &(strategy, x, y) in &points {
        let _ = writeln!(
            s,
            r#"<circle class="marker" data-strategy="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8"/>"#,
            strategy.as_str(),
            sx(x),
            sy(y),
            color(strategy)
        );
    }

    let mut present: Vec<Strategy> = points.iter().map(|p| p.0).collect();
    present.sort_by_key(|s| Strategy::ALL.iter().position(|a| a == s));
    present.dedup();
    for (i, strategy) in present.iter().enumerate() {
        let y = MARGIN_T + 10.0 + i as f64 * 20.0;
        let x = WIDTH - MARGIN_R + 15.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            color(*strategy),
            x + 10.0,
            y + 4.0,
            strategy.as_str()
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
