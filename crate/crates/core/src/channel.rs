//! Large-scale path loss, link-state/fading sampling and per-sub-channel rates.
//!
//! Powers are handled in milliwatts internally; configuration is in dB/dBm.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::topology::{NodeId, Topology};

/// RNG stream reserved for channel realizations.
const CHANNEL_STREAM: u64 = 1;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Los,
    Nlos,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub carrier_hz: f64,
    pub d0: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub xi_los_db: f64,
    pub xi_nlos_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            carrier_hz: 73e9,
            d0: 1.0,
            alpha_los: 2.0,
            alpha_nlos: 3.5,
            xi_los_db: 4.2,
            xi_nlos_db: 7.9,
        }
    }
}

impl PathLossParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn exponent(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.alpha_los,
            LinkState::Nlos => self.alpha_nlos,
        }
    }

    pub fn shadowing_std_db(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.xi_los_db,
            LinkState::Nlos => self.xi_nlos_db,
        }
    }

    /// Free-space loss at the reference distance.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * PI * self.d0 / self.wavelength()).log10()
    }

    fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::Config("reference distance d0 must be positive".into()));
        }
        if !(self.alpha_los >= 1.0 && self.alpha_nlos >= 1.0) {
            return Err(Error::Config("path-loss exponents must be >= 1".into()));
        }
        if !(self.xi_los_db >= 0.0 && self.xi_nlos_db >= 0.0) {
            return Err(Error::Config("shadowing deviations must be non-negative".into()));
        }
        Ok(())
    }
}

/// Large-scale path loss in dB for a link of length `dist` in `state`, with a
/// given shadowing value. Only defined for `dist >= d0`.
pub fn path_loss_db(p: &PathLossParams, dist: f64, state: LinkState, shadowing_db: f64) -> Result<f64> {
    if !(dist >= p.d0) {
        return Err(Error::BelowReferenceDistance { dist, d0: p.d0 });
    }
    Ok(p.reference_loss_db() + 10.0 * p.exponent(state) * (dist / p.d0).log10() + shadowing_db)
}

/// Sectorized pattern: main-lobe gain inside the beamwidth, side-lobe gain elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaPattern {
    pub g_max_db: f64,
    pub g_min_db: f64,
    pub beamwidth_deg: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            g_max_db: 18.0,
            g_min_db: -2.0,
            beamwidth_deg: 10.0,
        }
    }
}

impl AntennaPattern {
    /// Probability that a randomly oriented boresight covers a given direction.
    pub fn main_lobe_probability(&self) -> f64 {
        self.beamwidth_deg / 360.0
    }

    /// Combined gain of an aligned transmit/receive pair (linear).
    pub fn intended_gain(&self) -> f64 {
        db_to_linear(2.0 * self.g_max_db)
    }

    /// Mean combined gain of an interfering pair with independent random boresights.
    pub fn expected_interference_gain(&self) -> f64 {
        let p = self.main_lobe_probability();
        let per_end = p * db_to_linear(self.g_max_db) + (1.0 - p) * db_to_linear(self.g_min_db);
        per_end * per_end
    }

    fn validate(&self) -> Result<()> {
        if !(self.g_max_db > self.g_min_db) {
            return Err(Error::Config("main-lobe gain must exceed side-lobe gain".into()));
        }
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg <= 360.0) {
            return Err(Error::Config("beamwidth must lie in (0, 360] degrees".into()));
        }
        Ok(())
    }
}

/// Small-scale fading law of the per-sub-channel power gain |h|^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    /// Unit-mean exponential power gain (Rayleigh envelope).
    #[default]
    Rayleigh,
    /// |h|^2 = 1 on every sub-channel.
    None,
}

/// How the combined antenna gain of an interfering link is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceGainModel {
    /// Each end independently points its main lobe at the victim with
    /// probability beamwidth/360; the gain is the product of the two ends.
    #[default]
    RandomBoresight,
    /// Both ends always present side lobes.
    SideLobe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Number of sub-channels K.
    pub subchannels: usize,
    /// Total bandwidth in Hz, split evenly over the sub-channels.
    pub bandwidth_hz: f64,
    pub p_mbs_dbm: f64,
    pub p_sbs_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    /// Probability that a link is line-of-sight.
    pub rho: f64,
    pub path_loss: PathLossParams,
    pub antenna: AntennaPattern,
    pub fading: FadingModel,
    pub interference_gain: InterferenceGainModel,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            subchannels: 50,
            bandwidth_hz: 5e9,
            p_mbs_dbm: 40.0,
            p_sbs_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            rho: 0.5,
            path_loss: PathLossParams::default(),
            antenna: AntennaPattern::default(),
            fading: FadingModel::default(),
            interference_gain: InterferenceGainModel::default(),
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subchannels == 0 {
            return Err(Error::Config("at least one sub-channel is required".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        self.path_loss.validate()?;
        self.antenna.validate()
    }

    pub fn subchannel_bandwidth(&self) -> f64 {
        self.bandwidth_hz / self.subchannels as f64
    }

    pub fn noise_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + linear_to_db(self.subchannel_bandwidth())
    }

    pub fn noise_mw(&self) -> f64 {
        db_to_linear(self.noise_dbm())
    }

    pub fn total_power_dbm(&self, tx: NodeId) -> f64 {
        if tx.is_mbs() {
            self.p_mbs_dbm
        } else {
            self.p_sbs_dbm
        }
    }

    /// Uniform power split over all sub-channels.
    pub fn subchannel_power_mw(&self, tx: NodeId) -> f64 {
        db_to_linear(self.total_power_dbm(tx)) / self.subchannels as f64
    }

    /// Shannon rate of one sub-channel for a given signal and interference.
    pub fn rate_from_powers(&self, signal_mw: f64, interference_mw: f64) -> f64 {
        self.subchannel_bandwidth() * (1.0 + signal_mw / (interference_mw + self.noise_mw())).log2()
    }
}

/// One coherence-time snapshot of every random channel quantity.
///
/// Link state and shadowing are drawn once per unordered node pair; fading and
/// interference antenna gains per ordered pair (and sub-channel for fading).
/// The LoS decision compares a uniform draw against `rho`, so two realizations
/// with the same seed and different `rho` are monotonically coupled.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    cfg: RadioConfig,
    n: usize,
    los: Vec<bool>,
    shadow_z: Vec<f64>,
    psi: Vec<f64>,
    fading: Vec<f64>,
    // derived: linear path gains (including shadowing) per unordered pair and state
    gain_los: Vec<f64>,
    gain_nlos: Vec<f64>,
    // mean path gain with zero shadowing, averaged over the link state
    mean_gain: Vec<f64>,
}

impl ChannelRealization {
    pub fn sample(topo: &Topology, cfg: &RadioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = topo.num_nodes();
        let k = cfg.subchannels;
        let mut rng = stream_rng(seed, CHANNEL_STREAM);
        let pairs = n * (n - 1) / 2;
        let mut los = Vec::with_capacity(pairs);
        let mut shadow_z = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let u: f64 = rng.random();
            los.push(u < cfg.rho);
            shadow_z.push(rng.sample(StandardNormal));
        }
        let p_main = cfg.antenna.main_lobe_probability();
        let g_max = db_to_linear(cfg.antenna.g_max_db);
        let g_min = db_to_linear(cfg.antenna.g_min_db);
        let mut psi = vec![0.0; n * n];
        for tx in 0..n {
            for rx in 0..n {
                if tx == rx {
                    continue;
                }
                psi[tx * n + rx] = match cfg.interference_gain {
                    InterferenceGainModel::RandomBoresight => {
                        let a = if rng.random::<f64>() < p_main { g_max } else { g_min };
                        let b = if rng.random::<f64>() < p_main { g_max } else { g_min };
                        a * b
                    }
                    InterferenceGainModel::SideLobe => g_min * g_min,
                };
            }
        }
        let fading = match cfg.fading {
            FadingModel::Rayleigh => (0..n * n * k)
                .map(|i| {
                    let (tx, rx) = ((i / k) / n, (i / k) % n);
                    if tx == rx {
                        0.0
                    } else {
                        rng.sample(Exp1)
                    }
                })
                .collect(),
            FadingModel::None => vec![1.0; n * n * k],
        };
        Ok(Self::assemble(topo, cfg.clone(), los, shadow_z, psi, fading))
    }

    fn assemble(
        topo: &Topology,
        cfg: RadioConfig,
        los: Vec<bool>,
        shadow_z: Vec<f64>,
        psi: Vec<f64>,
        fading: Vec<f64>,
    ) -> Self {
        let n = topo.num_nodes();
        let pairs = n * (n - 1) / 2;
        let mut gain_los = Vec::with_capacity(pairs);
        let mut gain_nlos = Vec::with_capacity(pairs);
        let mut mean_gain = Vec::with_capacity(pairs);
        let pl = &cfg.path_loss;
        for i in 0..n {
            for j in (i + 1)..n {
                let idx = gain_los.len();
                // co-located nodes are evaluated at the reference distance
                let d = topo.distance(NodeId(i), NodeId(j)).max(pl.d0);
                let z = shadow_z[idx];
                let g = |s: LinkState, chi: f64| db_to_linear(-path_loss_db(pl, d, s, chi).expect("d >= d0"));
                gain_los.push(g(LinkState::Los, pl.xi_los_db * z));
                gain_nlos.push(g(LinkState::Nlos, pl.xi_nlos_db * z));
                mean_gain.push(cfg.rho * g(LinkState::Los, 0.0) + (1.0 - cfg.rho) * g(LinkState::Nlos, 0.0));
            }
        }
        ChannelRealization {
            cfg,
            n,
            los,
            shadow_z,
            psi,
            fading,
            gain_los,
            gain_nlos,
            mean_gain,
        }
    }

    pub fn config(&self) -> &RadioConfig {
        &self.cfg
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn subchannels(&self) -> usize {
        self.cfg.subchannels
    }

    fn pair(&self, a: NodeId, b: NodeId) -> usize {
        let (i, j) = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
        debug_assert!(i != j && j < self.n);
        // index of (i, j), i < j, in row-major upper-triangle order
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Realized link state of the pair.
    pub fn state(&self, a: NodeId, b: NodeId) -> LinkState {
        if self.los[self.pair(a, b)] {
            LinkState::Los
        } else {
            LinkState::Nlos
        }
    }

    /// Shadowing of the pair in dB, were the link in `state`.
    pub fn shadowing_db(&self, a: NodeId, b: NodeId, state: LinkState) -> f64 {
        self.cfg.path_loss.shadowing_std_db(state) * self.shadow_z[self.pair(a, b)]
    }

    /// |h|^2 from `tx` to `rx` on sub-channel `k`.
    pub fn fading(&self, tx: NodeId, rx: NodeId, k: usize) -> f64 {
        self.fading[(tx.0 * self.n + rx.0) * self.cfg.subchannels + k]
    }

    /// Sampled combined antenna gain of `tx` interfering at `rx` (linear).
    pub fn interference_gain(&self, tx: NodeId, rx: NodeId) -> f64 {
        self.psi[tx.0 * self.n + rx.0]
    }

    /// Linear path gain (inverse of the path loss, shadowing included).
    pub fn path_gain(&self, a: NodeId, b: NodeId, state: LinkState) -> f64 {
        let p = self.pair(a, b);
        match state {
            LinkState::Los => self.gain_los[p],
            LinkState::Nlos => self.gain_nlos[p],
        }
    }

    pub fn realized_path_gain(&self, a: NodeId, b: NodeId) -> f64 {
        self.path_gain(a, b, self.state(a, b))
    }

    /// Received power of the intended link on `k` in `state` (mW).
    pub fn signal_mw(&self, tx: NodeId, rx: NodeId, k: usize, state: LinkState) -> f64 {
        self.cfg.subchannel_power_mw(tx)
            * self.cfg.antenna.intended_gain()
            * self.path_gain(tx, rx, state)
            * self.fading(tx, rx, k)
    }

    /// Realized interference power received at `rx` on `k` from `tx` (mW).
    pub fn interference_mw(&self, tx: NodeId, rx: NodeId, k: usize) -> f64 {
        self.cfg.subchannel_power_mw(tx)
            * self.interference_gain(tx, rx)
            * self.realized_path_gain(tx, rx)
            * self.fading(tx, rx, k)
    }

    /// Achievable rate of `tx -> rx` on sub-channel `k` in `state`, with the
    /// given co-channel transmitters interfering.
    pub fn subchannel_rate(&self, tx: NodeId, rx: NodeId, k: usize, state: LinkState, interferers: &[NodeId]) -> f64 {
        let interference: f64 = interferers
            .iter()
            .filter(|&&m| m != tx && m != rx)
            .map(|&m| self.interference_mw(m, rx, k))
            .sum();
        self.rate_with_interference(tx, rx, k, state, interference)
    }

    pub fn rate_with_interference(&self, tx: NodeId, rx: NodeId, k: usize, state: LinkState, interference_mw: f64) -> f64 {
        self.cfg
            .rate_from_powers(self.signal_mw(tx, rx, k, state), interference_mw)
    }

    /// Mean interference at `rx` (mW, identical on every sub-channel) when every
    /// listed node transmits: zero shadowing, unit fading, state-averaged path
    /// gain and the mean random-boresight antenna gain.
    pub fn expected_interference(&self, rx: NodeId, interferers: &[NodeId]) -> f64 {
        let psi = match self.cfg.interference_gain {
            InterferenceGainModel::RandomBoresight => self.cfg.antenna.expected_interference_gain(),
            InterferenceGainModel::SideLobe => db_to_linear(2.0 * self.cfg.antenna.g_min_db),
        };
        interferers
            .iter()
            .filter(|&&m| m != rx)
            .map(|&m| self.cfg.subchannel_power_mw(m) * psi * self.mean_gain[self.pair(m, rx)])
            .sum()
    }

    /// Rate averaged over the link state: rho times the LoS sum plus (1 - rho)
    /// times the NLoS sum over the selected sub-channels.
    pub fn average_rate(&self, tx: NodeId, rx: NodeId, subchannels: impl IntoIterator<Item = usize>, interference_mw: f64) -> f64 {
        let rho = self.cfg.rho;
        let (mut los, mut nlos) = (0.0, 0.0);
        for k in subchannels {
            los += self.rate_with_interference(tx, rx, k, LinkState::Los, interference_mw);
            nlos += self.rate_with_interference(tx, rx, k, LinkState::Nlos, interference_mw);
        }
        rho * los + (1.0 - rho) * nlos
    }

    pub fn to_trace(&self) -> ChannelTrace {
        let mut pairs = Vec::with_capacity(self.los.len());
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let (a, b) = (NodeId(i), NodeId(j));
                let state = self.state(a, b);
                pairs.push(PairRecord {
                    i: a,
                    j: b,
                    los: state == LinkState::Los,
                    chi_db: self.shadowing_db(a, b, state),
                    shadow_z: self.shadow_z[self.pair(a, b)],
                });
            }
        }
        let k = self.cfg.subchannels;
        let mut links = Vec::with_capacity(self.n * (self.n - 1));
        for tx in 0..self.n {
            for rx in 0..self.n {
                if tx == rx {
                    continue;
                }
                let base = (tx * self.n + rx) * k;
                links.push(LinkRecord {
                    tx: NodeId(tx),
                    rx: NodeId(rx),
                    psi: self.psi[tx * self.n + rx],
                    fading: self.fading[base..base + k].to_vec(),
                });
            }
        }
        ChannelTrace {
            radio: self.cfg.clone(),
            pairs,
            links,
        }
    }

    /// Rebuilds a realization from a trace recorded on the same topology.
    pub fn from_trace(topo: &Topology, trace: &ChannelTrace) -> Result<Self> {
        let cfg = trace.radio.clone();
        cfg.validate()?;
        let n = topo.num_nodes();
        let k = cfg.subchannels;
        let pairs = n * (n - 1) / 2;
        if trace.pairs.len() != pairs || trace.links.len() != n * (n - 1) {
            return Err(Error::Config(format!("trace does not match a {n}-node topology")));
        }
        let mut los = vec![false; pairs];
        let mut shadow_z = vec![0.0; pairs];
        let mut psi = vec![0.0; n * n];
        let mut fading = vec![0.0; n * n * k];
        let index = |i: usize, j: usize| i * (2 * n - i - 1) / 2 + (j - i - 1);
        for p in &trace.pairs {
            let (i, j) = (p.i.0.min(p.j.0), p.i.0.max(p.j.0));
            if i == j || j >= n {
                return Err(Error::Config(format!("bad pair record ({}, {})", p.i, p.j)));
            }
            los[index(i, j)] = p.los;
            shadow_z[index(i, j)] = p.shadow_z;
        }
        for l in &trace.links {
            if l.tx == l.rx || l.tx.0 >= n || l.rx.0 >= n || l.fading.len() != k {
                return Err(Error::Config(format!("bad link record ({}, {})", l.tx, l.rx)));
            }
            psi[l.tx.0 * n + l.rx.0] = l.psi;
            let base = (l.tx.0 * n + l.rx.0) * k;
            fading[base..base + k].copy_from_slice(&l.fading);
        }
        Ok(Self::assemble(topo, cfg, los, shadow_z, psi, fading))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: NodeId,
    pub j: NodeId,
    pub los: bool,
    pub chi_db: f64,
    pub shadow_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub tx: NodeId,
    pub rx: NodeId,
    pub psi: f64,
    pub fading: Vec<f64>,
}

/// Replayable JSON dump of a [`ChannelRealization`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub radio: RadioConfig,
    pub pairs: Vec<PairRecord>,
    pub links: Vec<LinkRecord>,
}
