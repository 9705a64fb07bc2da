//! Scenario parameters and per-seed instance construction.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, RadioConfig};
use crate::error::{Error, Result};
use crate::formation::PricingConfig;
use crate::pipeline::NetworkConfig;
use crate::topology::{generate_topology, Topology};

/// Everything needed to draw one Monte-Carlo instance. Defaults follow the
/// standard simulation table (73 GHz, 5 GHz in 50 sub-channels, 400 m
/// deployment radius, 200 m range, 1 Mbps minimum rate, unit price).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub num_sbs: usize,
    pub num_mnos: usize,
    pub d_max_m: f64,
    pub range_m: f64,
    pub radio: RadioConfig,
    pub network: NetworkConfig,
    /// Price per sub-channel charged by every SBS.
    pub price: f64,
    /// Cost weight of every SBS, in Mbps per currency unit.
    pub kappa_mbps: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            num_sbs: 20,
            num_mnos: 3,
            d_max_m: 400.0,
            range_m: 200.0,
            radio: RadioConfig::default(),
            network: NetworkConfig::default(),
            price: 1.0,
            kappa_mbps: 1.0,
        }
    }
}

/// One drawn instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub topology: Topology,
    pub channel: ChannelRealization,
    pub pricing: PricingConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.network.validate()?;
        if !(self.price >= 0.0 && self.price.is_finite()) {
            return Err(Error::Config(format!("price must be finite and non-negative, got {}", self.price)));
        }
        if !(self.kappa_mbps >= 0.0 && self.kappa_mbps.is_finite()) {
            return Err(Error::Config(format!("kappa must be finite and non-negative, got {}", self.kappa_mbps)));
        }
        Ok(())
    }

    pub fn pricing(&self, num_nodes: usize) -> PricingConfig {
        PricingConfig::uniform(num_nodes, self.price, self.kappa_mbps * 1e6)
    }

    pub fn instance(&self, seed: u64) -> Result<Instance> {
        self.validate()?;
        let topology = generate_topology(seed, self.num_sbs, self.num_mnos, self.d_max_m, self.range_m)?;
        let channel = ChannelRealization::sample(&topology, &self.radio, seed)?;
        let pricing = self.pricing(topology.num_nodes());
        Ok(Instance {
            seed,
            topology,
            channel,
            pricing,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
