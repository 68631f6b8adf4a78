//! SVG figures from run records.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{HarnessError, Result};
use crate::record::RunRecord;
use crate::verify::SweepPoint;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [RGBColor; 4] = [BLUE, RED, BLACK, GREEN];

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Record(format!("plot: {e}"))
}

/// Plain line chart; with `log_x` the x values are plotted as `log10 x`.
pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> Result<()> {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let all = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(tx(x));
        x1 = x1.max(tx(x));
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    let x_desc = if log_x { format!("log10 {x_label}") } else { x_label.to_string() };
    chart.configure_mesh().x_desc(x_desc).y_desc(y_label).draw().map_err(plot_err)?;
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| (tx(x), y)).collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color))
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        if pts.len() <= 20 {
            chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
        }
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Mean over runs of a per-episode quantity.
pub fn mean_by_episode<F: Fn(&crate::record::EpisodeRow) -> f64>(runs: &[RunRecord], f: F) -> Vec<(f64, f64)> {
    let n = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let mean = runs.iter().map(|r| f(&r.rows[i])).sum::<f64>() / runs.len() as f64;
            (i as f64, mean)
        })
        .collect()
}

pub fn plot_p_exp(runs: &[RunRecord], path: &Path) -> Result<()> {
    let series = [Series { label: "mean p_exp".into(), points: mean_by_episode(runs, |r| r.p_exp) }];
    line_chart(path, "Exploration probability", "episode", "p_exp", &series, false)
}

pub fn plot_cumulative_p_exp_sq(runs: &[RunRecord], path: &Path) -> Result<()> {
    let mean = mean_by_episode(runs, |r| r.p_exp * r.p_exp);
    let mut acc = 0.0;
    let cumulative: Vec<(f64, f64)> = mean
        .iter()
        .map(|&(i, v)| {
            acc += v;
            (i, acc)
        })
        .collect();
    let mut series = vec![Series { label: "mean cumulative p_exp^2".into(), points: cumulative.clone() }];
    if let (Some(first), Some(last), Some(r)) = (cumulative.first(), cumulative.last(), runs.first()) {
        let b = r.meta.theorem1_bound;
        series.push(Series { label: "bound".into(), points: vec![(first.0, b), (last.0, b)] });
    }
    line_chart(path, "Cumulative squared exploration probability", "episode", "sum p_exp^2", &series, false)
}

pub fn plot_tv(runs: &[RunRecord], path: &Path) -> Result<()> {
    let series = [
        Series { label: "mentor".into(), points: mean_by_episode(runs, |r| r.tv_mentor) },
        Series { label: "planner".into(), points: mean_by_episode(runs, |r| r.tv_star) },
    ];
    line_chart(path, "Total variation of the MAP model's predictions", "episode", "mean TV", &series, false)
}

pub fn plot_sweep(main: &[SweepPoint], control: &[SweepPoint], path: &Path) -> Result<()> {
    let pts = |ps: &[SweepPoint]| {
        let mut v: Vec<(f64, f64)> = ps.iter().map(|p| (p.beta, p.fraction)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let series = [
        Series { label: "space prior".into(), points: pts(main) },
        Series { label: "equal-space control".into(), points: pts(control) },
    ];
    line_chart(path, "Runs with a benign MAP model", "beta", "fraction of runs", &series, true)
}

/// Writes the three per-episode figures for a set of runs.
pub fn plot_runs(runs: &[RunRecord], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    plot_p_exp(runs, &dir.join("p_exp.svg"))?;
    plot_cumulative_p_exp_sq(runs, &dir.join("cumulative_p_exp_sq.svg"))?;
    plot_tv(runs, &dir.join("tv.svg"))
}
