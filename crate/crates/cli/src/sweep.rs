//! Sweep definitions: a base scenario, the axes to vary, and the schemes to
//! run at every point.

use std::fmt;

use anyhow::{anyhow, bail, Context, Result};
use mbn_core::{ExhaustiveLimits, Scenario};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Cooperative,
    #[serde(alias = "non_cooperative")]
    Noncoop,
    Random,
    Optimal,
}

impl SchemeName {
    pub const ALL: [SchemeName; 4] = [Self::Cooperative, Self::Noncoop, Self::Random, Self::Optimal];

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.to_string() == s)
            .or((s == "non_cooperative").then_some(Self::Noncoop))
            .ok_or_else(|| anyhow!("unknown scheme `{s}` (expected cooperative, noncoop, random or optimal)"))
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cooperative => "cooperative",
            Self::Noncoop => "noncoop",
            Self::Random => "random",
            Self::Optimal => "optimal",
        })
    }
}

/// Swept values. An empty axis keeps the base scenario's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Axes {
    pub num_sbs: Vec<usize>,
    pub rho: Vec<f64>,
    pub price: Vec<f64>,
    pub kappa_mbps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub sweep: Axes,
    pub schemes: Vec<SchemeName>,
    pub seeds: u64,
    pub first_seed: u64,
    pub limits: ExhaustiveLimits,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            scenario: Scenario::default(),
            sweep: Axes::default(),
            schemes: vec![SchemeName::Cooperative, SchemeName::Noncoop, SchemeName::Random],
            seeds: 200,
            first_seed: 0,
            limits: ExhaustiveLimits::default(),
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub scenario: Scenario,
}

impl Point {
    pub fn num_sbs(&self) -> usize {
        self.scenario.num_sbs
    }
}

fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
    if axis.is_empty() {
        vec![base]
    } else {
        axis.to_vec()
    }
}

fn range_f(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

pub const PRESETS: [(&str, &str); 7] = [
    ("fig3", "sum rate vs M against the exhaustive optimum (N=2, K=5, M 3..8)"),
    ("fig4", "sum rate vs M (N=5, M 5..65)"),
    ("fig5", "sum rate vs LOS probability (M=20, N=5)"),
    ("fig6", "sum-rate CDF per scheme (M=60, N=5)"),
    ("fig7", "sum-rate CDF per LOS probability (M=20, N=5)"),
    ("fig8", "per-operator cost over price and kappa (M=15, N=3)"),
    ("overhead", "request counts vs M (N=5, M 5..65)"),
];

pub fn preset_names() -> String {
    PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
}

pub fn preset(name: &str) -> Result<SweepConfig> {
    use SchemeName::*;
    let mut c = SweepConfig::default();
    match name {
        "fig3" => {
            c.scenario.num_mnos = 2;
            c.scenario.radio.subchannels = 5;
            c.sweep.num_sbs = (3..=8).collect();
            c.schemes = vec![Cooperative, Noncoop, Random, Optimal];
            c.seeds = 100;
        }
        "fig4" => {
            c.scenario.num_mnos = 5;
            c.sweep.num_sbs = (5..=65).step_by(10).collect();
        }
        "fig5" => {
            c.scenario.num_mnos = 5;
            c.sweep.rho = range_f(0.0, 0.2, 6);
        }
        "fig6" => {
            c.scenario.num_sbs = 60;
            c.scenario.num_mnos = 5;
        }
        "fig7" => {
            c.scenario.num_mnos = 5;
            c.sweep.rho = range_f(0.2, 0.2, 5);
            c.schemes = vec![Cooperative];
        }
        "fig8" => {
            c.scenario.num_sbs = 15;
            c.scenario.num_mnos = 3;
            c.sweep.price = range_f(0.0, 1.0, 11);
            c.sweep.kappa_mbps = range_f(0.0, 10.0, 11);
            c.schemes = vec![Cooperative];
            c.seeds = 50;
        }
        "overhead" => {
            c.scenario.num_mnos = 5;
            c.sweep.num_sbs = (5..=65).step_by(10).collect();
            c.schemes = vec![Cooperative];
        }
        _ => bail!(UsageError(format!("unknown preset `{name}`; available: {}", preset_names()))),
    }
    Ok(c)
}

/// Marks errors that come from bad input rather than a failed run.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| usage(format!("bad config: {e}")))
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the config;
    /// a path that does not start at a top-level section is taken relative to
    /// `scenario`. Values are parsed as JSON, falling back to a string.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut doc = serde_json::to_value(&self).context("serializing config")?;
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| usage(format!("override `{ov}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut path: Vec<&str> = key.split('.').collect();
            if !doc.as_object().is_some_and(|o| o.contains_key(path[0])) {
                path.insert(0, "scenario");
            }
            set_path(&mut doc, &path, value).map_err(|e| usage(format!("override `{key}`: {e}")))?;
        }
        serde_json::from_value(doc).map_err(|e| usage(format!("bad override: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(usage("no schemes selected"));
        }
        if self.seeds == 0 {
            return Err(usage("at least one seed is needed"));
        }
        for p in self.points() {
            p.scenario.validate().map_err(|e| usage(e.to_string()))?;
            if self.schemes.contains(&SchemeName::Optimal) {
                let (m, k) = (p.num_sbs(), p.scenario.radio.subchannels);
                if m > self.limits.max_sbs || k > self.limits.max_subchannels {
                    return Err(usage(format!(
                        "the optimal scheme is limited to M <= {} and K <= {} (asked for M={m}, K={k}); \
                         raise limits.max_sbs / limits.max_subchannels to force it",
                        self.limits.max_sbs, self.limits.max_subchannels
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }

    /// Grid points in a fixed order: M, then rho, then price, then kappa.
    pub fn points(&self) -> Vec<Point> {
        let base = &self.scenario;
        let mut out = Vec::new();
        for &m in &or_base(&self.sweep.num_sbs, base.num_sbs) {
            for &rho in &or_base(&self.sweep.rho, base.radio.rho) {
                for &q in &or_base(&self.sweep.price, base.price) {
                    for &kappa in &or_base(&self.sweep.kappa_mbps, base.kappa_mbps) {
                        let mut s = base.clone();
                        s.num_sbs = m;
                        s.radio.rho = rho;
                        s.price = q;
                        s.kappa_mbps = kappa;
                        out.push(Point { scenario: s });
                    }
                }
            }
        }
        out
    }
}

fn set_path(doc: &mut Value, path: &[&str], value: Value) -> std::result::Result<(), String> {
    let mut cur = doc;
    for (i, part) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| format!("`{}` is not a section", path[..i].join(".")))?;
        let slot = obj.get_mut(*part).ok_or_else(|| format!("unknown key `{part}`"))?;
        if i + 1 == path.len() {
            *slot = value;
            return Ok(());
        }
        cur = slot;
    }
    unreachable!("split always yields a segment")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves_and_validates() {
        for (name, _) in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_preset_lists_the_options() {
        let e = preset("fig99").unwrap_err().to_string();
        assert!(e.contains("fig4") && e.contains("overhead"), "{e}");
    }

    #[test]
    fn fig4_sweeps_m() {
        let c = preset("fig4").unwrap();
        let ms: Vec<usize> = c.points().iter().map(Point::num_sbs).collect();
        assert_eq!(ms, vec![5, 15, 25, 35, 45, 55, 65]);
        assert!(c.points().iter().all(|p| p.scenario.num_mnos == 5));
    }

    #[test]
    fn fig5_sweeps_rho() {
        let c = preset("fig5").unwrap();
        let rhos: Vec<f64> = c.points().iter().map(|p| p.scenario.radio.rho).collect();
        assert_eq!(rhos.len(), 6);
        assert!((rhos[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_reach_nested_and_top_level_keys() {
        let c = SweepConfig::default()
            .with_overrides(&["radio.rho=0.3".into(), "seeds=7".into(), "sweep.num_sbs=[4,6]".into()])
            .unwrap();
        assert_eq!(c.scenario.radio.rho, 0.3);
        assert_eq!(c.seeds, 7);
        assert_eq!(c.sweep.num_sbs, vec![4, 6]);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        for ov in ["radio.rhoo=0.3", "novalue", "num_sbs=\"x\"", "radio.rho.x=1"] {
            let e = SweepConfig::default().with_overrides(&[ov.into()]).unwrap_err();
            assert!(e.is::<UsageError>(), "{ov}: {e}");
        }
    }

    #[test]
    fn optimal_is_refused_on_large_instances() {
        let mut c = preset("fig4").unwrap();
        c.schemes.push(SchemeName::Optimal);
        let e = c.validate().unwrap_err();
        assert!(e.is::<UsageError>() && e.to_string().contains("M <= 8"), "{e}");
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeName::ALL {
            assert_eq!(SchemeName::parse(&s.to_string()).unwrap(), s);
        }
        assert_eq!(SchemeName::parse("non_cooperative").unwrap(), SchemeName::Noncoop);
        assert!(SchemeName::parse("greedy").is_err());
    }
}
