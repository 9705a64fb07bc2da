//! Runs a sweep and writes its CSV tables and manifest.
//!
//! Files and columns:
//! - `sumrate.csv`: seed, scheme, M, N, rho, sum_rate_bps (one row per run)
//! - `cdf.csv`: scheme, M, N, rho, q, kappa, sum_rate_bps, cdf (empirical
//!   CDF of the sum rate over seeds, one row per distinct value)
//! - `cost.csv`: q, kappa, mno, cost (mean over the cooperative runs at that
//!   price and weight)
//! - `overhead.csv`: seed, scheme, M, N, rho, stage, kind, anchor, agents,
//!   quota, messages, bound (one row per formation stage and per A-BS)

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mbn_core::baselines::exhaustive_optimal;
use mbn_core::metrics::{aggregate, overhead_check, OverheadReport, RunMetrics};
use mbn_core::{run, RunOutput, Scheme};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::sweep::{SchemeName, SweepConfig};

pub struct Record {
    pub point: usize,
    pub seed: u64,
    pub scheme: SchemeName,
    pub metrics: RunMetrics,
    pub overhead: Option<OverheadReport>,
}

/// Runs every scheme at every point and seed. Results come back in grid
/// order whatever the thread count.
pub fn execute(cfg: &SweepConfig) -> Result<Vec<Record>> {
    let points = cfg.points();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| cfg.seed_list().into_iter().map(move |s| (p, s)))
        .collect();
    let nested: Vec<Vec<Record>> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let sc = &points[p].scenario;
            let inst = sc.instance(seed).with_context(|| format!("building instance for seed {seed}"))?;
            cfg.schemes
                .iter()
                .map(|&scheme| {
                    let out = match scheme {
                        SchemeName::Optimal => {
                            let best = exhaustive_optimal(&inst.topology, &inst.channel, &sc.network, &inst.pricing, &cfg.limits)?;
                            RunOutput {
                                formation: best.formation,
                                allocation: best.allocation,
                                stages: Vec::new(),
                            }
                        }
                        other => {
                            let s = match other {
                                SchemeName::Cooperative => Scheme::Cooperative,
                                SchemeName::Noncoop => Scheme::NonCooperative,
                                _ => Scheme::Random { seed },
                            };
                            run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, s)?
                        }
                    };
                    let overhead = matches!(scheme, SchemeName::Cooperative | SchemeName::Noncoop)
                        .then(|| overhead_check(&out, sc.radio.subchannels));
                    Ok(Record {
                        point: p,
                        seed,
                        scheme,
                        metrics: RunMetrics::from_run(&inst.topology, &inst.pricing, &out),
                        overhead,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .with_context(|| format!("seed {seed}, M={}", sc.num_sbs))
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config_hash: String,
    seeds: Vec<u64>,
    points: usize,
    runs: usize,
    files: [&'static str; 4],
    config: &'a SweepConfig,
}

pub fn config_hash(cfg: &SweepConfig) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(cfg)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_all(dir: &Path, cfg: &SweepConfig, records: &[Record]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let points = cfg.points();
    let files = ["sumrate.csv", "cdf.csv", "cost.csv", "overhead.csv"];
    let path = |f: &str| dir.join(f);

    let mut w = writer(&path(files[0]))?;
    w.write_record(["seed", "scheme", "M", "N", "rho", "sum_rate_bps"])?;
    for r in records {
        let s = &points[r.point].scenario;
        w.serialize((r.seed, r.scheme.to_string(), s.num_sbs, s.num_mnos, s.radio.rho, r.metrics.sum_rate))?;
    }
    w.flush()?;

    let mut groups: BTreeMap<(usize, SchemeName), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.point, r.scheme)).or_default().push(r.metrics.sum_rate);
    }
    let mut w = writer(&path(files[1]))?;
    w.write_record(["scheme", "M", "N", "rho", "q", "kappa", "sum_rate_bps", "cdf"])?;
    for ((p, scheme), values) in &groups {
        let s = &points[*p].scenario;
        let mut grid = values.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for (x, f) in aggregate(values, &grid)?.cdf {
            w.serialize((scheme.to_string(), s.num_sbs, s.num_mnos, s.radio.rho, s.price, s.kappa_mbps, x, f))?;
        }
    }
    w.flush()?;

    // non-negative floats sort like their bit patterns
    // (q, kappa, per-MNO totals, runs)
    type CostCell = (f64, f64, Vec<f64>, usize);
    let mut costs: BTreeMap<(u64, u64), CostCell> = BTreeMap::new();
    for r in records.iter().filter(|r| r.scheme == SchemeName::Cooperative) {
        let s = &points[r.point].scenario;
        let e = costs
            .entry((s.price.to_bits(), s.kappa_mbps.to_bits()))
            .or_insert_with(|| (s.price, s.kappa_mbps, vec![0.0; s.num_mnos], 0));
        for (acc, c) in e.2.iter_mut().zip(&r.metrics.mno_cost) {
            *acc += c;
        }
        e.3 += 1;
    }
    let mut w = writer(&path(files[2]))?;
    w.write_record(["q", "kappa", "mno", "cost"])?;
    for (q, kappa, sums, n) in costs.values() {
        for (mno, total) in sums.iter().enumerate() {
            w.serialize((q, kappa, mno, total / *n as f64))?;
        }
    }
    w.flush()?;

    let mut w = writer(&path(files[3]))?;
    w.write_record([
        "seed", "scheme", "M", "N", "rho", "stage", "kind", "anchor", "agents", "quota", "messages", "bound",
    ])?;
    for r in records {
        let Some(report) = &r.overhead else { continue };
        let s = &points[r.point].scenario;
        let (seed, scheme, m, n, rho) = (r.seed, r.scheme.to_string(), s.num_sbs, s.num_mnos, s.radio.rho);
        for st in &report.formation {
            w.serialize((seed, &scheme, m, n, rho, st.stage, "formation", "", st.demanders, st.quota, st.messages, st.bound))?;
        }
        for a in &report.allocation {
            let quota = a.bound / s.radio.subchannels.max(1);
            let bound = a.bound as f64;
            w.serialize((seed, &scheme, m, n, rho, a.stage, "allocation", a.anchor.0, a.children, quota, a.messages, bound))?;
        }
    }
    w.flush()?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(cfg)?,
        seeds: cfg.seed_list(),
        points: points.len(),
        runs: records.len(),
        files,
        config: cfg,
    };
    let mpath = dir.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).with_context(|| format!("writing {}", mpath.display()))?;

    let mut written: Vec<PathBuf> = files.iter().map(|f| path(f)).collect();
    written.push(mpath);
    Ok(written)
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(f))
}
