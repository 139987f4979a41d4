//! CSV time series, JSON summary and SVG plots of a run.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use super::checks::RunChecks;
use super::config::{ConfigFile, RunConfig};
use super::run::RunLog;
use crate::diagnostics::{EmSpectrum, GainBoundReport};
use crate::error::{Error, Result};
use crate::vehicle::AssumptionReport;

const OBSERVER_COLUMNS: [&str; 19] = [
    "p_hat_x",
    "p_hat_y",
    "p_hat_z",
    "v_hat_x",
    "v_hat_y",
    "v_hat_z",
    "euler_err_roll",
    "euler_err_pitch",
    "euler_err_yaw",
    "dist_R",
    "b_hat_x",
    "b_hat_y",
    "b_hat_z",
    "tilde_b_norm",
    "sigma_R_norm",
    "sat_active",
    "zeta_norm",
    "V",
    "W",
];

pub fn csv_header(log: &RunLog) -> String {
    let mut cols: Vec<String> = ["t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for v in &log.variants {
        cols.extend(OBSERVER_COLUMNS.iter().map(|c| format!("{}_{c}", v.name())));
    }
    cols.join(",")
}

fn push_field(line: &mut String, x: f64) {
    line.push_str(&format!(",{x:.16e}"));
}

/// Writes one row per grid point. Floats use `{:.16e}` so identical runs give
/// identical bytes.
pub fn write_csv<W: Write>(log: &RunLog, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{}", csv_header(log))?;
    let mut line = String::new();
    for row in &log.rows {
        line.clear();
        line.push_str(&format!("{:.16e}", row.t));
        row.p
            .iter()
            .chain(row.v.iter())
            .for_each(|&x| push_field(&mut line, x));
        for r in &row.observers {
            let vecs = r
                .p_hat
                .iter()
                .chain(r.v_hat.iter())
                .chain(r.euler_err.iter());
            vecs.for_each(|&x| push_field(&mut line, x));
            push_field(&mut line, r.dist_r);
            r.b_hat.iter().for_each(|&x| push_field(&mut line, x));
            push_field(&mut line, r.tilde_b_norm);
            push_field(&mut line, r.sigma_r_norm);
            line.push_str(if r.sat_active { ",1" } else { ",0" });
            for x in [r.zeta.norm(), r.v, r.w] {
                push_field(&mut line, x);
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSummary {
    pub beta1: f64,
    pub beta2: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ConfigFile,
    pub c5: f64,
    pub warnings: Vec<String>,
    pub assumptions: AssumptionReport,
    pub spectrum: EmSpectrum,
    pub lyapunov: LyapunovSummary,
    pub bounds: Option<GainBoundReport>,
    pub checks: RunChecks,
}

impl Summary {
    pub fn new(log: &RunLog, cfg: &RunConfig, checks: RunChecks) -> Self {
        let ctx = &log.context;
        Summary {
            config: cfg.file.clone(),
            c5: cfg.c5,
            warnings: ctx.warnings.clone(),
            assumptions: ctx.assumptions.clone(),
            spectrum: ctx.spectrum,
            lyapunov: LyapunovSummary {
                beta1: ctx.lyapunov.beta1,
                beta2: ctx.lyapunov.beta2,
                residual: ctx.lyapunov.residual,
            },
            bounds: ctx.bounds,
            checks,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

const PALETTE: [RGBColor; 3] = [BLUE, RED, GREEN];

struct Panel<'a> {
    title: &'a str,
    series: Vec<(String, Vec<(f64, f64)>)>,
    log_scale: bool,
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

fn draw_panels(path: &Path, panels: &[Panel<'_>]) -> Result<()> {
    let height = 320 * panels.len() as u32;
    let root = SVGBackend::new(path, (900, height)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let areas = root.split_evenly((panels.len(), 1));
    for (panel, area) in panels.iter().zip(&areas) {
        let pts = panel.series.iter().flat_map(|(_, s)| s.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in pts {
            let y = if panel.log_scale {
                y.max(1e-12).log10()
            } else {
                y
            };
            if !y.is_finite() {
                continue;
            }
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 >= x1 {
            x1 = x0 + 1.0;
        }
        if y0 >= y1 {
            y1 = y0 + 1.0;
        }
        let pad = 0.05 * (y1 - y0);
        let mut chart = ChartBuilder::on(area)
            .caption(panel.title, ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .y_desc(if panel.log_scale { "log10" } else { "" })
            .draw()
            .map_err(plot_err)?;
        for (k, (name, s)) in panel.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let log_scale = panel.log_scale;
            chart
                .draw_series(LineSeries::new(
                    s.iter()
                        .map(move |&(x, y)| (x, if log_scale { y.max(1e-12).log10() } else { y })),
                    &color,
                ))
                .map_err(plot_err)?
                .label(name.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Keeps at most `max_points` samples of a series.
fn thin(series: Vec<(f64, f64)>, max_points: usize) -> Vec<(f64, f64)> {
    let stride = series.len().div_ceil(max_points).max(1);
    series.into_iter().step_by(stride).collect()
}

const PLOT_POINTS: usize = 2000;

fn write_plots(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>> {
    let truth = |f: fn(&super::run::Row) -> f64| {
        thin(log.rows.iter().map(|r| (r.t, f(r))).collect(), PLOT_POINTS)
    };
    let per_observer =
        |f: &dyn Fn(&super::run::ObserverRecord) -> f64| -> Vec<(String, Vec<(f64, f64)>)> {
            log.variants
                .iter()
                .enumerate()
                .map(|(i, v)| (v.name().to_string(), thin(log.series(i, f), PLOT_POINTS)))
                .collect()
        };

    let mut written = Vec::new();
    let mut emit = |name: &str, panels: Vec<Panel<'_>>| -> Result<()> {
        let path = dir.join(name);
        draw_panels(&path, &panels)?;
        written.push(path);
        Ok(())
    };

    emit(
        "trajectory.svg",
        vec![Panel {
            title: "true position",
            series: vec![
                ("p_x".into(), truth(|r| r.p.x)),
                ("p_y".into(), truth(|r| r.p.y)),
                ("p_z".into(), truth(|r| r.p.z)),
            ],
            log_scale: false,
        }],
    )?;
    emit(
        "position_error.svg",
        vec![Panel {
            title: "|p - p_hat|",
            series: per_observer(&|r| r.p_err_norm),
            log_scale: true,
        }],
    )?;
    emit(
        "velocity_error.svg",
        vec![Panel {
            title: "|v - v_hat|",
            series: per_observer(&|r| r.v_err_norm),
            log_scale: true,
        }],
    )?;
    let euler: Vec<Panel<'_>> = ["roll error [rad]", "pitch error [rad]", "yaw error [rad]"]
        .iter()
        .enumerate()
        .map(|(axis, title)| Panel {
            title,
            series: per_observer(&|r| r.euler_err[axis]),
            log_scale: false,
        })
        .collect();
    emit("euler_error.svg", euler)?;
    emit(
        "bias_error.svg",
        vec![Panel {
            title: "|b - b_hat| [rad/s]",
            series: per_observer(&|r| r.tilde_b_norm),
            log_scale: true,
        }],
    )?;
    Ok(written)
}

/// Writes `run.csv`, `summary.json` and the SVG plots into `dir`.
pub fn emit_artifacts(log: &RunLog, summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join("run.csv");
    write_csv(log, fs::File::create(&csv)?)?;
    let json = dir.join("summary.json");
    fs::write(&json, summary.to_json()?)?;
    let mut paths = vec![csv, json];
    paths.extend(write_plots(log, dir)?);
    Ok(paths)
}
