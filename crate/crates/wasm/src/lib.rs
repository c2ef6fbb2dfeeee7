//! Browser bindings for the demo page in `www/`.
//!
//! Configs use the same `key = value` text as the command line runner.

use crcnet::analysis::verify;
use crcnet::control::Scheme;
use crcnet::experiment::{average, codec_rank, codec_table, simulate_seed, RunConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Series {
    scheme: String,
    t: Vec<usize>,
    fnr: Vec<f64>,
    load: Vec<f64>,
    fpr: Vec<f64>,
    theta: Vec<f64>,
    /// `beta[k][t]`.
    beta: Vec<Vec<f64>>,
    bounds: Vec<Bound>,
}

#[derive(Serialize)]
struct Bound {
    id: &'static str,
    lhs: f64,
    rhs: f64,
    satisfied: bool,
    /// Seeds that violated this check.
    failures: usize,
}

#[derive(Serialize)]
struct Comparison {
    alpha: f64,
    capacity: f64,
    series: Vec<Series>,
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn run_scheme(cfg: &RunConfig, scheme: Scheme) -> Result<Series, JsValue> {
    let cfg = RunConfig { scheme, ..cfg.clone() };
    let trajs = cfg
        .seed_list()
        .into_iter()
        .map(|s| simulate_seed(&cfg, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let rows = average(&trajs).map_err(err)?;
    let k = cfg.k();

    // worst seed per check, reported on the first seed's lhs/rhs otherwise
    let mut bounds: Vec<Bound> = Vec::new();
    for traj in &trajs {
        let report = verify(traj, cfg.theta).map_err(err)?;
        for e in report.entries {
            match bounds.iter_mut().find(|b| b.id == e.id) {
                Some(b) => {
                    if !e.satisfied {
                        b.failures += 1;
                        b.satisfied = false;
                        (b.lhs, b.rhs) = (e.lhs, e.rhs);
                    }
                }
                None => bounds.push(Bound {
                    id: e.id,
                    lhs: e.lhs,
                    rhs: e.rhs,
                    satisfied: e.satisfied,
                    failures: usize::from(!e.satisfied),
                }),
            }
        }
    }
    Ok(Series {
        scheme: scheme.to_string(),
        t: rows.iter().map(|r| r.t).collect(),
        fnr: rows.iter().map(|r| r.avg_fnr).collect(),
        load: rows.iter().map(|r| r.avg_load).collect(),
        fpr: rows.iter().map(|r| r.avg_fpr).collect(),
        theta: rows.iter().map(|r| r.theta).collect(),
        beta: (0..k).map(|j| rows.iter().map(|r| r.beta[j]).collect()).collect(),
        bounds,
    })
}

/// Runs all three schemes on the config and returns seed-averaged
/// time-averaged FNR, load and FPR series plus bound checks, as JSON.
#[wasm_bindgen]
pub fn compare(config: &str) -> Result<String, JsValue> {
    let cfg = RunConfig::parse(config, "config".as_ref()).map_err(err)?;
    let series = Scheme::ALL
        .into_iter()
        .map(|s| run_scheme(&cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    serde_json::to_string(&Comparison {
        alpha: cfg.alpha,
        capacity: cfg.capacity,
        series,
    })
    .map_err(err)
}

#[derive(Serialize)]
struct Rank {
    rank: u32,
    length: u32,
}

/// Rank and codeword length of a 0/1 block, as JSON.
#[wasm_bindgen]
pub fn rank(block: &str) -> Result<String, JsValue> {
    let (rank, length) = codec_rank(block).map_err(err)?;
    serde_json::to_string(&Rank { rank, length }).map_err(err)
}

#[derive(Serialize)]
struct TableRow {
    block: String,
    rank: u32,
    length: u32,
}

/// Full rank table for block size `m`, as JSON.
#[wasm_bindgen]
pub fn table(m: usize) -> Result<String, JsValue> {
    let rows: Vec<TableRow> = codec_table(m)
        .map_err(err)?
        .into_iter()
        .map(|(block, rank, length)| TableRow { block, rank, length })
        .collect();
    serde_json::to_string(&rows).map_err(err)
}
