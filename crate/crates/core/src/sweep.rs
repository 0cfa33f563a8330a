//! Grid experiments over width, depth, step size and noise level.

use std::io::{BufRead, Write};

use crate::dynamics::FhnParams;
use crate::exec::{map_ordered, Exec};
use crate::learner::{run_experiment, LearnError, TrainConfig};
use crate::numfmt::format_f64 as fmt;

pub const SWEEP_HEADER: &str = "width,depth,dt,noise,seed,mse_u,mse_v,final_loss,seconds";
pub const SUMMARY_HEADER: &str =
    "width,depth,dt,noise,seeds,median_mse_u,median_mse_v,median_final_loss";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub dts: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub seeds_per_cell: usize,
    /// Replicate `r` of every cell uses seed `base_seed + r`.
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.widths.is_empty()
            || self.depths.is_empty()
            || self.dts.is_empty()
            || self.noise_levels.is_empty()
        {
            return Err(LearnError::Config("every sweep axis needs at least one value".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(LearnError::Config("seeds per cell must be at least 1".into()));
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.widths.len()
            * self.depths.len()
            * self.dts.len()
            * self.noise_levels.len()
            * self.seeds_per_cell
    }

    /// One configuration per run, ordered dt, noise, depth, width, seed.
    pub fn configs(&self, template: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.run_count());
        for &dt in &self.dts {
            for &noise in &self.noise_levels {
                for &depth in &self.depths {
                    for &width in &self.widths {
                        for r in 0..self.seeds_per_cell as u64 {
                            out.push(TrainConfig {
                                dt,
                                noise,
                                depth,
                                width,
                                seed: self.base_seed.wrapping_add(r),
                                ..*template
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One run of a sweep. Failed runs carry NaN metrics and the error text.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub width: usize,
    pub depth: usize,
    pub dt: f64,
    pub noise: f64,
    pub seed: u64,
    pub mse_u: f64,
    pub mse_v: f64,
    pub final_loss: f64,
    pub seconds: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn same_cell(&self, other: &SweepRow) -> bool {
        self.width == other.width
            && self.depth == other.depth
            && self.dt == other.dt
            && self.noise == other.noise
    }
}

pub fn run_cell(params: &FhnParams, cfg: &TrainConfig, exec: Exec) -> SweepRow {
    let mut row = SweepRow {
        width: cfg.width,
        depth: cfg.depth,
        dt: cfg.dt,
        noise: cfg.noise,
        seed: cfg.seed,
        mse_u: f64::NAN,
        mse_v: f64::NAN,
        final_loss: f64::NAN,
        seconds: f64::NAN,
        error: None,
    };
    match run_experiment(params, cfg, exec) {
        Ok(outcome) => {
            row.mse_u = outcome.eval.mse_u();
            row.mse_v = outcome.eval.mse_v();
            row.final_loss = outcome.report.final_loss;
            row.seconds = outcome.report.seconds;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every configuration of `spec`; rows come back in configuration order
/// regardless of completion order.
pub fn run_sweep(
    spec: &SweepSpec,
    template: &TrainConfig,
    params: &FhnParams,
    exec: Exec,
) -> Result<Vec<SweepRow>, LearnError> {
    spec.validate()?;
    let configs = spec.configs(template);
    for cfg in &configs {
        cfg.validate()?;
    }
    Ok(map_ordered(exec, configs, |cfg| run_cell(params, &cfg, exec)))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        let seconds = if r.seconds.is_nan() {
            "nan".to_string()
        } else {
            format!("{:.3}", r.seconds)
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.width,
            r.depth,
            fmt(r.dt),
            fmt(r.noise),
            r.seed,
            fmt(r.mse_u),
            fmt(r.mse_v),
            fmt(r.final_loss),
            seconds
        )?;
    }
    Ok(())
}

pub fn read_sweep_csv<R: BufRead>(reader: R) -> Result<Vec<SweepRow>, String> {
    let mut lines = reader.lines();
    let head = lines
        .next()
        .ok_or("empty sweep file")?
        .map_err(|e| e.to_string())?;
    if head.trim() != SWEEP_HEADER {
        return Err(format!("unexpected sweep header `{head}`"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("row {}: expected 9 fields", n + 2));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: `{s}`: {e}", n + 2));
        let int = |s: &str| s.parse::<u64>().map_err(|e| format!("row {}: `{s}`: {e}", n + 2));
        rows.push(SweepRow {
            width: int(f[0])? as usize,
            depth: int(f[1])? as usize,
            dt: float(f[2])?,
            noise: float(f[3])?,
            seed: int(f[4])?,
            mse_u: float(f[5])?,
            mse_v: float(f[6])?,
            final_loss: float(f[7])?,
            seconds: float(f[8])?,
            error: None,
        });
    }
    Ok(rows)
}

/// Median with NaN ordered above every number, so failed replicates pull the
/// median upward instead of being dropped.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| match (a.is_nan(), b.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => a.total_cmp(b),
    });
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub width: usize,
    pub depth: usize,
    pub dt: f64,
    pub noise: f64,
    pub seeds: usize,
    pub median_mse_u: f64,
    pub median_mse_v: f64,
    pub median_final_loss: f64,
}

/// Medians over the replicates of each cell; cells keep their row order.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut groups: Vec<Vec<&SweepRow>> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|g| g[0].same_cell(row)) {
            Some(g) => g.push(row),
            None => groups.push(vec![row]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let col = |f: fn(&SweepRow) -> f64| median(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                width: g[0].width,
                depth: g[0].depth,
                dt: g[0].dt,
                noise: g[0].noise,
                seeds: g.len(),
                median_mse_u: col(|r| r.mse_u),
                median_mse_v: col(|r| r.mse_v),
                median_final_loss: col(|r| r.final_loss),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(cells: &[CellSummary], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.width,
            c.depth,
            fmt(c.dt),
            fmt(c.noise),
            c.seeds,
            fmt(c.median_mse_u),
            fmt(c.median_mse_v),
            fmt(c.median_final_loss)
        )?;
    }
    Ok(())
}
