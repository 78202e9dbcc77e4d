use std::fmt::Write;

use graph_kalman::experiment::CellStat;
use graph_kalman::HeatmapResult;

const CELL: f64 = 18.0;
const MARGIN: f64 = 60.0;

// A few viridis stops, interpolated linearly.
const STOPS: [(f64, [u8; 3]); 5] =
    [(0.0, [68, 1, 84]), (0.25, [59, 82, 139]), (0.5, [33, 145, 140]), (0.75, [94, 201, 98]), (1.0, [253, 231, 37])];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let i = STOPS.iter().position(|&(s, _)| s >= t).unwrap_or(STOPS.len() - 1).max(1);
    let ((s0, c0), (s1, c1)) = (STOPS[i - 1], STOPS[i]);
    let f = (t - s0) / (s1 - s0);
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
}

/// Heatmap with σ̃ along x and σ along y (σ = 0 at the bottom). Undefined
/// cells are grey; flagged cells get a red outline.
pub fn heatmap_svg(result: &HeatmapResult, kalman: bool, title: &str, lo: f64, hi: f64) -> String {
    let (rows, cols) = (result.sigmas.len(), result.sigma_tildes.len());
    let width = 2.0 * MARGIN + cols as f64 * CELL + 60.0;
    let height = 2.0 * MARGIN + rows as f64 * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14">{title}</text>"#, MARGIN);
    for c in &result.cells {
        let i = result.sigmas.iter().position(|&v| v == c.sigma).unwrap_or(0);
        let j = result.sigma_tildes.iter().position(|&v| v == c.sigma_tilde).unwrap_or(0);
        let stat: CellStat = if kalman { c.kalman } else { c.inverse };
        let fill = if stat.value.is_finite() { color((stat.value - lo) / (hi - lo)) } else { "#bbbbbb".into() };
        let x = MARGIN + j as f64 * CELL;
        let y = MARGIN + (rows - 1 - i) as f64 * CELL;
        let stroke = if c.flagged { r##" stroke="#d62728" stroke-width="1""## } else { "" };
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"{stroke}><title>sigma={} sigma_tilde={} value={}</title></rect>"#,
            c.sigma, c.sigma_tilde, stat.value
        );
        if stat.value.is_finite() {
            let ink = if (stat.value - lo) / (hi - lo) > 0.6 { "#000" } else { "#fff" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="5" text-anchor="middle" fill="{ink}">{:.2}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 2.0,
                stat.value
            );
        }
    }
    let bottom = MARGIN + rows as f64 * CELL;
    for (j, v) in result.sigma_tildes.iter().enumerate().step_by(4) {
        let x = MARGIN + (j as f64 + 0.5) * CELL;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{v:.2}</text>"#, bottom + 14.0);
    }
    for (i, v) in result.sigmas.iter().enumerate().step_by(4) {
        let y = MARGIN + (rows - 1 - i) as f64 * CELL + CELL * 0.7;
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{v:.2}</text>"#, MARGIN - 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">observation noise sigma_tilde</text>"#,
        MARGIN + cols as f64 * CELL / 2.0,
        bottom + 32.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">process noise sigma</text>"#,
        MARGIN + rows as f64 * CELL / 2.0
    );
    let bar_x = MARGIN + cols as f64 * CELL + 16.0;
    let steps = 40;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let y = bottom - (k + 1) as f64 * rows as f64 * CELL / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{y:.2}" width="12" height="{:.2}" fill="{}"/>"#,
            rows as f64 * CELL / steps as f64 + 0.5,
            color(t)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.2}</text>"#, bar_x + 16.0, MARGIN + 8.0);
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}">{lo:.2}</text>"#, bar_x + 16.0);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(2.0), "#fde725");
    }
}
