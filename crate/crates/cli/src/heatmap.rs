//! Self-rendered SVG heatmaps for success-rate grids. No plotting
//! dependency: the file is assembled as text, so identical grids produce
//! byte-identical output.

use std::path::Path;

use superres_core::{Error, Result};

const CELL: usize = 48;
const MARGIN_LEFT: usize = 96;
const MARGIN_TOP: usize = 24;
const MARGIN_BOTTOM: usize = 72;
const MARGIN_RIGHT: usize = 24;

/// Grayscale level for a rate: 0 maps to black, 1 to white.
fn shade(rate: f64) -> u8 {
    (rate * 255.0).round() as u8
}

/// Renders `rates` (row-major, rows bottom-up so row 0 sits at the bottom
/// of the image like an axis-aligned plot) with one label per column and
/// row. Grid must be rectangular with every rate in [0, 1].
pub fn render_heatmap<P: AsRef<Path>>(
    rates: &[Vec<f64>],
    x_labels: &[String],
    y_labels: &[String],
    x_name: &str,
    y_name: &str,
    path: P,
) -> Result<()> {
    let svg = heatmap_svg(rates, x_labels, y_labels, x_name, y_name)?;
    std::fs::write(path, svg)?;
    Ok(())
}

/// The SVG text itself; split out so tests can parse without touching disk.
pub fn heatmap_svg(
    rates: &[Vec<f64>],
    x_labels: &[String],
    y_labels: &[String],
    x_name: &str,
    y_name: &str,
) -> Result<String> {
    let ny = rates.len();
    if ny == 0 {
        return Err(Error::InvalidParameter {
            name: "rates",
            reason: "grid must be nonempty".to_string(),
        });
    }
    let nx = rates[0].len();
    if nx == 0 || rates.iter().any(|row| row.len() != nx) {
        return Err(Error::InvalidParameter {
            name: "rates",
            reason: "grid must be rectangular with nonempty rows".to_string(),
        });
    }
    if y_labels.len() != ny || x_labels.len() != nx {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: format!(
                "need {nx} x-labels and {ny} y-labels, got {} and {}",
                x_labels.len(),
                y_labels.len()
            ),
        });
    }
    for row in rates {
        for &r in row {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter {
                    name: "rates",
                    reason: format!("rate {r} outside [0, 1]"),
                });
            }
        }
    }

    let width = MARGIN_LEFT + nx * CELL + MARGIN_RIGHT;
    let height = MARGIN_TOP + ny * CELL + MARGIN_BOTTOM;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    s.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"rgb(255,255,255)\"/>\n"
    ));
    for (iy, row) in rates.iter().enumerate() {
        // Row 0 at the bottom.
        let y = MARGIN_TOP + (ny - 1 - iy) * CELL;
        for (ix, &rate) in row.iter().enumerate() {
            let x = MARGIN_LEFT + ix * CELL;
            let v = shade(rate);
            s.push_str(&format!(
                "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({v},{v},{v})\" stroke=\"rgb(128,128,128)\" stroke-width=\"1\"/>\n"
            ));
        }
    }
    for (ix, label) in x_labels.iter().enumerate() {
        let x = MARGIN_LEFT + ix * CELL + CELL / 2;
        let y = MARGIN_TOP + ny * CELL + 20;
        s.push_str(&format!(
            "  <text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            escape(label)
        ));
    }
    for (iy, label) in y_labels.iter().enumerate() {
        let x = MARGIN_LEFT - 8;
        let y = MARGIN_TOP + (ny - 1 - iy) * CELL + CELL / 2 + 4;
        s.push_str(&format!(
            "  <text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            escape(label)
        ));
    }
    let xn_x = MARGIN_LEFT + nx * CELL / 2;
    let xn_y = MARGIN_TOP + ny * CELL + 48;
    s.push_str(&format!(
        "  <text x=\"{xn_x}\" y=\"{xn_y}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        escape(x_name)
    ));
    let yn_y = MARGIN_TOP + ny * CELL / 2;
    s.push_str(&format!(
        "  <text x=\"16\" y=\"{yn_y}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {yn_y})\">{}</text>\n",
        escape(y_name)
    ));
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    fn count(haystack: &str, needle: &str) -> usize {
        haystack.match_indices(needle).count()
    }

    #[test]
    fn all_zero_grid_renders_black_cells() {
        let svg = heatmap_svg(&[vec![0.0; 3], vec![0.0; 3]], &labels(3), &labels(2), "m", "delta")
            .unwrap();
        assert_eq!(count(&svg, "fill=\"rgb(0,0,0)\""), 6);
    }

    #[test]
    fn all_one_grid_renders_white_cells() {
        let svg =
            heatmap_svg(&[vec![1.0; 2], vec![1.0; 2]], &labels(2), &labels(2), "x", "y").unwrap();
        // 4 cells plus the background rect.
        assert_eq!(count(&svg, "fill=\"rgb(255,255,255)\""), 5);
    }

    #[test]
    fn deterministic_bytes() {
        let g = vec![vec![0.25, 0.75], vec![1.0, 0.0]];
        let a = heatmap_svg(&g, &labels(2), &labels(2), "x", "y").unwrap();
        let b = heatmap_svg(&g, &labels(2), &labels(2), "x", "y").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_and_ragged() {
        assert!(heatmap_svg(&[vec![1.5]], &labels(1), &labels(1), "x", "y").is_err());
        assert!(
            heatmap_svg(&[vec![0.0, 0.0], vec![0.0]], &labels(2), &labels(2), "x", "y").is_err()
        );
        assert!(heatmap_svg(&[vec![0.0]], &labels(2), &labels(1), "x", "y").is_err());
    }
}
