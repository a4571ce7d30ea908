use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Grouped bar chart as SVG: one group per entry of `groups`, one bar per
/// series. Bars start at zero; missing values leave a gap.
pub fn grouped_bar_chart(
    path: impl AsRef<Path>,
    title: &str,
    y_label: &str,
    groups: &[String],
    series: &[(String, Vec<Option<f64>>)],
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let width = 120 + 60 * groups.len().max(1) as u32 * series.len().max(1) as u32 / 2;
    let root = SVGBackend::new(path, (width.max(480), 360)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let values = || series.iter().flat_map(|(_, v)| v.iter().flatten().copied());
    let y_max = values().fold(0.0f64, f64::max);
    let y_min = values().fold(0.0f64, f64::min);
    let pad = ((y_max - y_min) * 0.1).max(1.0);
    let (y_min, y_max) = (if y_min < 0.0 { y_min - pad } else { 0.0 }, y_max + pad);
    let n = groups.len().max(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(-0.5f64..n - 0.5, y_min..y_max)
        .map_err(plot_err)?;
    let labels = groups.to_vec();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(groups.len().max(1) * 2 + 1)
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 {
                labels.get(i as usize).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    let k = series.len().max(1) as f64;
    let bar = 0.8 / k;
    for (s, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let rects = values.iter().enumerate().filter_map(|(g, v)| {
            v.map(|v| {
                let x0 = g as f64 - 0.4 + s as f64 * bar;
                Rectangle::new([(x0, 0.0), (x0 + bar, v)], color.filled())
            })
        });
        chart
            .draw_series(rects)
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bars.svg");
        let groups: Vec<String> = ["P0", "P1", "P2"].iter().map(|s| s.to_string()).collect();
        let series = vec![
            ("a".to_string(), vec![Some(50.0), Some(60.0), None]),
            ("b".to_string(), vec![Some(40.0), Some(-70.0), Some(65.0)]),
        ];
        grouped_bar_chart(&path, "Dice", "Dice (%)", &groups, &series).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count() >= 5, true);
    }
}
