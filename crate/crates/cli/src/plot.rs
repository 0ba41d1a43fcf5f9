//! SVG charts of mean cumulative regret with ±1 std bands, and of the
//! window-size sweep. Charts are rendered from the CSV outputs so that
//! `plot` can redraw them later.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plotters::prelude::*;

pub type Band = Vec<(f64, f64, f64)>;

/// Mean and sample std of a cumulative-regret column per algorithm and step,
/// with algorithms in order of first appearance.
pub fn step_bands(path: &Path, column: &str) -> Result<Vec<(String, Band)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no `{name}` column", path.display()))
    };
    let (alg_i, t_i, v_i) = (idx("algorithm")?, idx("t")?, idx(column)?);
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let alg = &record[alg_i];
        let a = match order.iter().position(|o| o == alg) {
            Some(a) => a,
            None => {
                order.push(alg.to_string());
                order.len() - 1
            }
        };
        let t: usize = record[t_i].parse().context("bad `t` value")?;
        let v: f64 = record[v_i].parse().with_context(|| format!("bad `{column}` value"))?;
        values.entry((a, t)).or_default().push(v);
    }
    let mut bands: Vec<(String, Band)> = order.into_iter().map(|a| (a, Vec::new())).collect();
    for ((a, t), vals) in values {
        let (mean, std) = smooco_core::bench::mean_std(&vals);
        bands[a].1.push((t as f64, mean, std));
    }
    Ok(bands)
}

pub fn band_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[(String, Band)]) -> Result<()> {
    let points = series.iter().flat_map(|(_, b)| b.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, s) in points {
        let s = if s.is_finite() { s } else { 0.0 };
        if !(x.is_finite() && m.is_finite()) {
            continue;
        }
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(m - s);
        y1 = y1.max(m + s);
    }
    if !x0.is_finite() {
        bail!("nothing to plot for {title}");
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw()?;
    for (i, (name, band)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let clean: Vec<(f64, f64, f64)> = band
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, m, s)| (x, m, if s.is_finite() { s } else { 0.0 }))
            .collect();
        if clean.iter().any(|p| p.2 > 0.0) {
            let mut outline: Vec<(f64, f64)> = clean.iter().map(|&(x, m, s)| (x, m + s)).collect();
            outline.extend(clean.iter().rev().map(|&(x, m, s)| (x, m - s)));
            chart.draw_series(std::iter::once(Polygon::new(outline, color.mix(0.15).filled())))?;
        }
        chart
            .draw_series(LineSeries::new(clean.iter().map(|&(x, m, _)| (x, m)), color.stroke_width(2)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// Cumulative regret, and its imbalance and switching parts, from a
/// per-step CSV.
pub fn plot_steps(steps_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let charts = [
        ("regret.svg", "cum_regret", "Cumulative regret"),
        ("imbalance_regret.svg", "cum_imb_regret", "Cumulative imbalance regret"),
        ("switching_regret.svg", "cum_sw_regret", "Cumulative switching regret"),
    ];
    let mut written = Vec::new();
    for (file, column, title) in charts {
        let bands = step_bands(steps_csv, column)?;
        let path = out_dir.join(file);
        band_chart(&path, title, "t", "regret", &bands)?;
        written.push(path);
    }
    Ok(written)
}

/// Mean regret and mean window solve time against window size, one line per
/// solver.
pub fn plot_sweep(sweep_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut reader = csv::Reader::from_path(sweep_csv).with_context(|| format!("reading {}", sweep_csv.display()))?;
    let mut regret: Vec<(String, Band)> = Vec::new();
    let mut time: Vec<(String, Band)> = Vec::new();
    for record in reader.records() {
        let r = record?;
        let solver = r[0].to_string();
        let size: f64 = r[1].parse()?;
        let (mean, std, t): (f64, f64, f64) = (r[2].parse()?, r[3].parse()?, r[4].parse()?);
        if regret.last().is_none_or(|(s, _)| *s != solver) {
            regret.push((solver.clone(), Vec::new()));
            time.push((solver, Vec::new()));
        }
        regret.last_mut().expect("pushed above").1.push((size, mean, std));
        time.last_mut().expect("pushed above").1.push((size, t, 0.0));
    }
    let a = out_dir.join("sweep_regret.svg");
    let b = out_dir.join("sweep_time.svg");
    band_chart(&a, "Final regret by window size", "window size", "regret", &regret)?;
    band_chart(&b, "Solve time per window", "window size", "seconds", &time)?;
    Ok(vec![a, b])
}
