//! SVG figures. Each document starts with a `manifest_sha256` XML comment.

use std::fs;
use std::path::Path;

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::TrialRow;
use crate::scenario::{Phase, StepRecord, SweepRow, TrajectoryLog};

const MAX_POINTS: usize = 2000;
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn perr<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(format!("plot: {e}"))
}

fn stamp(svg: String, hash: &str) -> String {
    format!("<!-- manifest_sha256={hash} -->\n{svg}")
}

fn range(vals: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad)..(hi + pad)
}

fn thin(records: &[StepRecord]) -> Vec<&StepRecord> {
    let stride = records.len().div_ceil(MAX_POINTS).max(1);
    records.iter().step_by(stride).collect()
}

type Series<'a> = (&'a str, Vec<(f64, f64)>);

fn line_chart(
    area: &DrawingArea<SVGBackend, Shift>,
    title: &str,
    x_desc: &str,
    series: &[Series],
) -> Result<()> {
    let xr = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let yr = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 16))
        .margin(8)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(xr, yr)
        .map_err(perr)?;
    chart.configure_mesh().x_desc(x_desc).draw().map_err(perr)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), &color))
            .map_err(perr)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(perr)?;
    Ok(())
}

/// Paths, inputs, and Lyapunov / barrier values of one episode.
pub fn trajectory_svg(log: &TrajectoryLog, hash: &str) -> Result<String> {
    let recs = thin(&log.records);
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 1100)).into_drawing_area();
        root.fill(&WHITE).map_err(perr)?;
        let panels = root.split_evenly((3, 1));
        let path = |f: fn(&StepRecord) -> (f64, f64)| recs.iter().map(|r| f(r)).collect();
        line_chart(
            &panels[0],
            "paths",
            "x [m]",
            &[
                ("ego", path(|r| (r.ego.x, r.ego.y))),
                ("lead", path(|r| (r.lead.x, r.lead.y))),
                ("oncoming", path(|r| (r.oncoming.x, r.oncoming.y))),
            ],
        )?;
        line_chart(
            &panels[1],
            "inputs",
            "t [s]",
            &[
                ("omega [rad/s]", path(|r| (r.t, r.u.omega))),
                ("a [m/s^2]", path(|r| (r.t, r.u.a))),
            ],
        )?;
        let bottom = panels[2].split_evenly((1, 2));
        line_chart(&bottom[0], "V", "t [s]", &[("V", path(|r| (r.t, r.v)))])?;
        line_chart(
            &bottom[1],
            "barriers",
            "t [s]",
            &[
                ("h_lane", path(|r| (r.t, r.h_lane))),
                ("h_lead", path(|r| (r.t, r.h_lead))),
            ],
        )?;
        root.present().map_err(perr)?;
    }
    Ok(stamp(svg, hash))
}

/// Per-phase convergence times against disturbance level, with budget lines.
pub fn montecarlo_svg(rows: &[TrialRow], budgets: &[(Phase, f64)], hash: &str) -> Result<String> {
    let pick = |p: Phase, r: &TrialRow| match p {
        Phase::MergeOut => r.t_merge_out,
        Phase::Pass => r.t_pass,
        Phase::MergeBack => r.t_merge_back,
        Phase::Follow => None,
    };
    let xr = range(rows.iter().map(|r| r.phi_inf));
    let yr = range(
        rows.iter()
            .flat_map(|r| Phase::OVERTAKE.map(|p| pick(p, r).unwrap_or(f64::NAN)))
            .chain(budgets.iter().map(|b| b.1))
            .chain([0.0]),
    );
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 600)).into_drawing_area();
        root.fill(&WHITE).map_err(perr)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("convergence time vs disturbance level", ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(50)
            .build_cartesian_2d(xr.clone(), yr)
            .map_err(perr)?;
        chart
            .configure_mesh()
            .x_desc("phi_inf")
            .y_desc("T [s]")
            .draw()
            .map_err(perr)?;
        for (i, &phase) in Phase::OVERTAKE.iter().enumerate() {
            let color = PALETTE[i];
            let pts: Vec<_> = rows
                .iter()
                .filter_map(|r| pick(phase, r).map(|t| (r.phi_inf, t)))
                .collect();
            chart
                .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
                .map_err(perr)?
                .label(phase.name())
                .legend(move |(x, y)| Circle::new((x + 8, y), 3, color.filled()));
            if let Some(&(_, b)) = budgets.iter().find(|b| b.0 == phase) {
                chart
                    .draw_series(LineSeries::new(
                        [(xr.start, b), (xr.end, b)],
                        color.stroke_width(1),
                    ))
                    .map_err(perr)?;
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(perr)?;
        root.present().map_err(perr)?;
    }
    Ok(stamp(svg, hash))
}

/// `c3*` against the total window, one series per (omega_max, a_max) pair.
pub fn sweep_svg(rows: &[SweepRow], hash: &str) -> Result<String> {
    let mut keys: Vec<(f64, f64, f64)> = Vec::new();
    for r in rows {
        let key = (r.k, r.omega_max, r.a_max);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let names: Vec<String> = keys
        .iter()
        .map(|(k, w, a)| format!("K={k} omega_max={w} a_max={a}"))
        .collect();
    let series: Vec<Series> = keys
        .iter()
        .zip(&names)
        .map(|(key, name)| {
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| (r.k, r.omega_max, r.a_max) == *key && r.c3_star.is_finite())
                .map(|r| (r.t_total, r.c3_star))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (name.as_str(), pts)
        })
        .collect();
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 600)).into_drawing_area();
        root.fill(&WHITE).map_err(perr)?;
        line_chart(&root, "c3* vs fixed-time window", "T [s]", &series)?;
        root.present().map_err(perr)?;
    }
    Ok(stamp(svg, hash))
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg)?;
    Ok(())
}
