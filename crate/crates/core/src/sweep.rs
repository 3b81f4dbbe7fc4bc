//! Classification sweeps over `(α, k, geometry)` grids.
//!
//! Cells are independent and evaluated in a parallel map; rows come back in
//! grid order whatever the execution mode. A cell that fails is logged with
//! its error and the sweep moves on.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::local4::{self, Shape};

/// Either absolute values of `k` or offsets above `k0(α)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KGrid {
    Values(Vec<u32>),
    AboveK0(Vec<u32>),
}

/// A single cell given explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub alpha: f64,
    pub k: u32,
    pub rho: f64,
    pub shape: Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub alphas: Vec<f64>,
    pub k: KGrid,
    /// Random shapes per `(α, k)` pair.
    #[serde(default)]
    pub geometries: usize,
    /// Off-axis displacement; bisected per `(α, k)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cells: Vec<CellSpec>,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<SweepSpec> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub k: u64,
    pub k0: Option<u64>,
    pub rho: Option<f64>,
    pub s: f64,
    pub u_b: f64,
    pub u_c: f64,
    pub status: String,
    pub label: Option<String>,
    pub winner_case: Option<String>,
    pub value: Option<f64>,
    pub w_value: Option<f64>,
    pub z_value: Option<f64>,
    pub choicek1: Option<f64>,
    pub choicek2: Option<f64>,
    pub choicek3: Option<f64>,
    pub choicek4: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

struct Cell {
    alpha: f64,
    k: std::result::Result<u32, String>,
    k0: Option<u64>,
    rho: std::result::Result<f64, String>,
    shape: Shape,
}

fn k0_checked(alpha: f64) -> std::result::Result<u64, String> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(local4::estimate_k0(alpha))
    } else {
        Err(format!("alpha must lie in (0, 1) for the dichotomy, got {alpha}"))
    }
}

fn cells(spec: &SweepSpec, exec: Execution) -> Vec<Cell> {
    let shapes = Shape::random(spec.geometries, spec.seed);
    let mut out = Vec::new();
    for &alpha in &spec.alphas {
        let k0 = k0_checked(alpha);
        let ks: Vec<std::result::Result<u32, String>> = match &spec.k {
            KGrid::Values(v) => v.iter().map(|&k| Ok(k)).collect(),
            KGrid::AboveK0(off) => off
                .iter()
                .map(|&o| {
                    let k0 = k0.clone()?;
                    u32::try_from(k0 + o as u64).map_err(|_| format!("k0 + {o} = {} overflows", k0 + o as u64))
                })
                .collect(),
        };
        for k in ks {
            let rho = match (&k, spec.rho) {
                (_, Some(r)) => Ok(r),
                (Ok(k), None) => local4::bisect_rho(&Shape::corners(), *k, alpha, 2.0, 1e-3, exec)
                    .map_err(|e| e.to_string()),
                (Err(e), None) => Err(e.clone()),
            };
            for &shape in &shapes {
                out.push(Cell { alpha, k: k.clone(), k0: k0.clone().ok(), rho: rho.clone(), shape });
            }
        }
    }
    for c in &spec.cells {
        out.push(Cell { alpha: c.alpha, k: Ok(c.k), k0: k0_checked(c.alpha).ok(), rho: Ok(c.rho), shape: c.shape });
    }
    out
}

fn run_cell(c: &Cell) -> SweepRow {
    let mut row = SweepRow {
        alpha: c.alpha,
        k: c.k.as_ref().map(|&k| k as u64).unwrap_or(0),
        k0: c.k0,
        rho: c.rho.as_ref().ok().copied(),
        s: c.shape.s,
        u_b: c.shape.u_b,
        u_c: c.shape.u_c,
        ..Default::default()
    };
    let result = (|| -> Result<()> {
        let k = c.k.clone().map_err(Error::Config)?;
        let rho = c.rho.clone().map_err(Error::Config)?;
        let inst = c.shape.instance(rho, k);
        let r = local4::local4_solve(&inst, c.alpha)?;
        let m = local4::exclusion_margins(&inst, c.alpha)?;
        row.label = Some(r.label.to_string());
        row.winner_case = Some(r.winner_case);
        row.value = Some(r.value);
        row.w_value = Some(r.w_value);
        row.z_value = Some(r.z_value);
        row.choicek1 = Some(m.choicek1);
        row.choicek2 = Some(m.choicek2);
        row.choicek3 = Some(m.choicek3);
        row.choicek4 = Some(m.choicek4);
        Ok(())
    })();
    match result {
        Ok(()) => row.status = "ok".into(),
        Err(e) => {
            row.status = "failed".into();
            row.error = Some(e.to_string());
        }
    }
    row
}

pub fn run(spec: &SweepSpec, exec: Execution) -> Vec<SweepRow> {
    let cells = cells(spec, exec);
    exec::map(exec, &cells, run_cell)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid() {
        let spec = SweepSpec::parse(r#"{"k": {"values": []}}"#).unwrap();
        assert!(run(&spec, Execution::Sequential).is_empty());
    }

    #[test]
    fn bad_cell_is_isolated() {
        let spec = SweepSpec::parse(
            r#"{
                "alphas": [0.5], "k": {"values": [6]}, "geometries": 2, "rho": 0.01, "seed": 3,
                "cells": [{"alpha": 0.5, "k": 1, "rho": 0.01, "shape": {"s": 0.5, "u_b": 1, "u_c": -1}}]
            }"#,
        )
        .unwrap();
        let rows = run(&spec, Execution::Parallel);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().filter(|r| !r.ok()).count(), 1);
        assert!(rows[2].error.as_deref().unwrap().contains("k must be at least 2"));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
