//! Bar charts for plot values: aligned text for the terminal, SVG for files.

use colloquy_core::value::{fmt_real, PlotSpec};

pub const TEXT_WIDTH: usize = 40;

fn bar_len(v: f64, max: f64, width: usize) -> usize {
    if max <= 0.0 || !v.is_finite() {
        return 0;
    }
    ((v.abs() / max) * width as f64).round() as usize
}

fn max_abs(spec: &PlotSpec) -> f64 {
    spec.values
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// One line per category, labels padded to a common width.
pub fn text_chart(spec: &PlotSpec, width: usize) -> String {
    let label_w = spec.categories.iter().map(|c| c.chars().count()).max().unwrap_or(0);
    let max = max_abs(spec);
    let mut out = format!("{}\n", spec.title);
    for (c, v) in spec.categories.iter().zip(&spec.values) {
        let mark = if *v < 0.0 { '-' } else { '#' };
        let bar: String = std::iter::repeat_n(mark, bar_len(*v, max, width)).collect();
        out.push_str(&format!("{c:<label_w$} | {bar:<width$} {}\n", fmt_real(*v)));
    }
    out.push_str(&format!("{:<label_w$}   {}", "", spec.y_label));
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Horizontal bars in category order.
pub fn svg_chart(spec: &PlotSpec) -> String {
    const ROW: usize = 24;
    const BAR_W: f64 = 360.0;
    let label_w = 16 + 7 * spec.categories.iter().map(|c| c.chars().count()).max().unwrap_or(0);
    let top = 40;
    let height = top + ROW * spec.categories.len() + 40;
    let width = label_w + BAR_W as usize + 90;
    let max = max_abs(spec);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2,
        escape(&spec.title)
    ));
    for (i, (c, v)) in spec.categories.iter().zip(&spec.values).enumerate() {
        let y = top + i * ROW;
        let w = if max > 0.0 && v.is_finite() {
            v.abs() / max * BAR_W
        } else {
            0.0
        };
        let fill = if *v < 0.0 { "#c0504d" } else { "#4f81bd" };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            label_w - 8,
            y + 16,
            escape(c)
        ));
        out.push_str(&format!(
            "<rect x=\"{label_w}\" y=\"{}\" width=\"{w:.2}\" height=\"{}\" fill=\"{fill}\"/>\n",
            y + 4,
            ROW - 8
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\">{}</text>\n",
            label_w as f64 + w + 6.0,
            y + 16,
            escape(&fmt_real(*v))
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n</svg>\n",
        label_w + BAR_W as usize / 2,
        height - 12,
        escape(&spec.y_label)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlotSpec {
        PlotSpec::bar(
            vec!["certainty".into(), "swear".into(), "past".into()],
            vec![4.0, 2.0, 0.5],
            "Odds ratios",
            "category",
            "odds ratio",
        )
        .unwrap()
    }

    #[test]
    fn text_bars_scale_to_the_largest() {
        let t = text_chart(&spec(), 8);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Odds ratios");
        assert_eq!(lines[1], "certainty | ######## 4.0");
        assert_eq!(lines[2], "swear     | ####     2.0");
        assert_eq!(lines[3], "past      | #        0.5");
    }

    #[test]
    fn svg_has_one_bar_per_category() {
        let s = svg_chart(&spec());
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("<rect").count(), 3);
        assert!(s.contains(">certainty</text>"));
        assert!(s.contains("width=\"360.00\""));
    }

    #[test]
    fn empty_and_zero_plots_render() {
        let empty = PlotSpec::bar(vec![], vec![], "t", "x", "y").unwrap();
        assert_eq!(svg_chart(&empty).matches("<rect").count(), 0);
        let zero = PlotSpec::bar(vec!["a".into()], vec![0.0], "t", "x", "y").unwrap();
        assert!(text_chart(&zero, 10).contains("a |            0.0"));
    }
}
