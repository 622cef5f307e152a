//! Link gains (path loss, wall loss, log-normal shadowing), SINR, and
//! transmission success probabilities.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{FadingMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::{FapId, FueId, MueId, NetworkTopology};
use crate::Real;

/// Propagation class of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propagation {
    Indoor,
    Outdoor,
}

/// Network node endpoints, for link classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    Mbs,
    Fap(FapId),
    Fue(FueId),
    Mue(MueId),
}

/// Channel parameters over a scalar type; the simulator instantiates this
/// at [`Real`] from the scenario config.
#[derive(Debug, Clone)]
pub struct ChannelParams<T: Scalar = Real> {
    pub pl_indoor: (T, T),
    pub pl_outdoor: (T, T),
    pub wall_loss_db: T,
    pub shadow_sigma_db: T,
    pub noise_w: T,
    pub bandwidth_hz: T,
    pub fading_mode: FadingMode,
    pub n_fading_draws: u32,
    pub interference_fading: bool,
}

impl ChannelParams<Real> {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let c = &cfg.channel;
        ChannelParams {
            pl_indoor: (c.pl_indoor_intercept_db, c.pl_indoor_slope_db),
            pl_outdoor: (c.pl_outdoor_intercept_db, c.pl_outdoor_slope_db),
            wall_loss_db: c.wall_loss_db,
            shadow_sigma_db: c.shadow_sigma_db,
            noise_w: cfg.noise_watts(),
            bandwidth_hz: c.bandwidth_hz,
            fading_mode: c.fading_mode,
            n_fading_draws: c.n_fading_draws,
            interference_fading: c.interference_fading,
        }
    }
}

/// Distance-dependent path loss in dB.
pub fn path_loss_db<T: Scalar>(params: &ChannelParams<T>, prop: Propagation, distance: T) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(Error::Domain(format!(
            "path loss requires distance > 0, got {distance}"
        )));
    }
    let (intercept, slope) = match prop {
        Propagation::Indoor => params.pl_indoor,
        Propagation::Outdoor => params.pl_outdoor,
    };
    Ok(intercept + slope * distance.log10())
}

/// Propagation class and wall count from the endpoint kinds. Only the FUE
/// link to its own FAP is indoor; everything touching the macro tier is
/// outdoor, and crossing the femtocell wall costs one wall loss.
pub fn classify(tx: NodeRef, rx: NodeRef) -> (Propagation, u32) {
    use NodeRef::*;
    match (tx, rx) {
        (Fue(_), Fap(_)) | (Fap(_), Fue(_)) => (Propagation::Indoor, 0),
        (Mue(_), Mbs) | (Mbs, Mue(_)) => (Propagation::Outdoor, 0),
        (Mue(_), Fue(_)) | (Fue(_), Mue(_)) => (Propagation::Outdoor, 1),
        (Fue(_), Mbs) | (Mbs, Fue(_)) => (Propagation::Outdoor, 1),
        (Mue(_), Fap(_)) | (Fap(_), Mue(_)) => (Propagation::Outdoor, 1),
        other => unreachable!("unmodeled link class {other:?}"),
    }
}

/// Mean power gain of one link: path loss, wall losses, and one frozen
/// log-normal shadowing sample. Fast fading is excluded by construction.
#[derive(Debug, Clone, Copy)]
pub struct LinkGain {
    pub tx: NodeRef,
    pub rx: NodeRef,
    pub mean_gain: Real,
    pub n_walls: u32,
}

fn node_position(topology: &NetworkTopology, node: NodeRef) -> crate::topology::Position {
    match node {
        NodeRef::Mbs => topology.mbs.position,
        NodeRef::Fap(id) => topology.fap(id).position,
        NodeRef::Fue(id) => topology.fue(id).position,
        NodeRef::Mue(id) => topology.mue(id).position,
    }
}

/// Draw the mean gain of one link, consuming exactly one shadowing sample.
pub fn mean_gain<R: Rng>(
    topology: &NetworkTopology,
    params: &ChannelParams,
    tx: NodeRef,
    rx: NodeRef,
    rng: &mut R,
) -> LinkGain {
    let (prop, n_walls) = classify(tx, rx);
    let d = node_position(topology, tx)
        .distance(&node_position(topology, rx))
        .max(1e-3);
    let pl = path_loss_db(params, prop, d).expect("positive distance");
    let z: Real = rng.sample(StandardNormal);
    let shadow = params.shadow_sigma_db * z;
    let total_db = pl + n_walls as Real * params.wall_loss_db + shadow;
    LinkGain {
        tx,
        rx,
        mean_gain: (-total_db).db_to_linear(),
        n_walls,
    }
}

/// SINR of a transmission given interferer received powers and noise.
pub fn sinr<T: Scalar>(signal: T, interferers: &[T], noise: T) -> T {
    let total = interferers.iter().fold(noise, |acc, &i| acc + i);
    signal / total
}

/// Closed-form success probability: exponential fading on the signal,
/// interference held at its mean.
pub fn success_probability_closed_form<T: Scalar>(
    signal_mean: T,
    interference_mean: T,
    noise: T,
    gamma: T,
) -> T {
    (-gamma * (interference_mean + noise) / signal_mean).exp()
}

/// Empirical success probability over seeded unit-mean exponential fading
/// draws on the signal and (optionally) each interferer.
pub fn success_probability_monte_carlo<R: Rng>(
    signal_mean: Real,
    interferer_means: &[Real],
    noise: Real,
    gamma: Real,
    n_draws: u32,
    interference_fading: bool,
    rng: &mut R,
) -> Real {
    let exp1 = |rng: &mut R| -> Real {
        let u: Real = rng.random();
        -(1.0 - u).ln()
    };
    let mut hits = 0u64;
    for _ in 0..n_draws {
        let s = signal_mean * exp1(rng);
        let mut interference = 0.0;
        for &i in interferer_means {
            interference += if interference_fading { i * exp1(rng) } else { i };
        }
        if s / (interference + noise) >= gamma {
            hits += 1;
        }
    }
    hits as Real / n_draws as Real
}

/// Success probability in the configured fading mode.
pub fn success_probability<R: Rng>(
    params: &ChannelParams,
    signal_mean: Real,
    interferer_means: &[Real],
    gamma: Real,
    rng: &mut R,
) -> Real {
    match params.fading_mode {
        FadingMode::ClosedForm => {
            let interference: Real = interferer_means.iter().sum();
            success_probability_closed_form(signal_mean, interference, params.noise_w, gamma)
        }
        FadingMode::MonteCarlo => success_probability_monte_carlo(
            signal_mean,
            interferer_means,
            params.noise_w,
            gamma,
            params.n_fading_draws,
            params.interference_fading,
            rng,
        ),
    }
}

/// All link gains a round needs, frozen at generation. Draw order is fixed
/// so a round's gains are a pure function of its shadowing stream.
#[derive(Debug, Clone)]
pub struct LinkGains {
    n_faps: usize,
    n_fues: usize,
    mue_to_mbs: Vec<Real>,
    fue_to_mbs: Vec<Real>,
    fue_to_own_fap: Vec<Real>,
    mue_to_fap: Vec<Real>,
    mue_to_fue: Vec<Real>,
}

impl LinkGains {
    pub fn build<R: Rng>(topology: &NetworkTopology, params: &ChannelParams, rng: &mut R) -> Self {
        let n_faps = topology.faps.len();
        let n_fues = topology.fues.len();
        let n_mues = topology.mues.len();
        let mut g = LinkGains {
            n_faps,
            n_fues,
            mue_to_mbs: Vec::with_capacity(n_mues),
            fue_to_mbs: Vec::with_capacity(n_fues),
            fue_to_own_fap: Vec::with_capacity(n_fues),
            mue_to_fap: Vec::with_capacity(n_mues * n_faps),
            mue_to_fue: Vec::with_capacity(n_mues * n_fues),
        };
        for m in &topology.mues {
            g.mue_to_mbs
                .push(mean_gain(topology, params, NodeRef::Mue(m.id), NodeRef::Mbs, rng).mean_gain);
        }
        for f in &topology.fues {
            g.fue_to_mbs
                .push(mean_gain(topology, params, NodeRef::Fue(f.id), NodeRef::Mbs, rng).mean_gain);
        }
        for f in &topology.fues {
            g.fue_to_own_fap.push(
                mean_gain(topology, params, NodeRef::Fue(f.id), NodeRef::Fap(f.fap_id), rng)
                    .mean_gain,
            );
        }
        for m in &topology.mues {
            for f in &topology.faps {
                g.mue_to_fap.push(
                    mean_gain(topology, params, NodeRef::Mue(m.id), NodeRef::Fap(f.id), rng)
                        .mean_gain,
                );
            }
        }
        for m in &topology.mues {
            for f in &topology.fues {
                g.mue_to_fue.push(
                    mean_gain(topology, params, NodeRef::Mue(m.id), NodeRef::Fue(f.id), rng)
                        .mean_gain,
                );
            }
        }
        g
    }

    pub fn mue_mbs(&self, m: MueId) -> Real {
        self.mue_to_mbs[m.0 as usize]
    }

    pub fn fue_mbs(&self, l: FueId) -> Real {
        self.fue_to_mbs[l.0 as usize]
    }

    pub fn fue_own_fap(&self, l: FueId) -> Real {
        self.fue_to_own_fap[l.0 as usize]
    }

    pub fn mue_fap(&self, m: MueId, n: FapId) -> Real {
        self.mue_to_fap[m.0 as usize * self.n_faps + n.0 as usize]
    }

    pub fn mue_fue(&self, m: MueId, l: FueId) -> Real {
        self.mue_to_fue[m.0 as usize * self.n_fues + l.0 as usize]
    }

    /// Test hook: a gains table with every entry supplied directly.
    pub fn from_raw(
        n_faps: usize,
        n_fues: usize,
        mue_to_mbs: Vec<Real>,
        fue_to_mbs: Vec<Real>,
        fue_to_own_fap: Vec<Real>,
        mue_to_fap: Vec<Real>,
        mue_to_fue: Vec<Real>,
    ) -> Self {
        LinkGains {
            n_faps,
            n_fues,
            mue_to_mbs,
            fue_to_mbs,
            fue_to_own_fap,
            mue_to_fap,
            mue_to_fue,
        }
    }

    /// Zero out every cross-tier gain, leaving only each FUE's own-FAP link,
    /// the MUE-MBS links, and the D2D links. Used to construct
    /// externality-free instances.
    pub fn zero_cross_interference(&mut self) {
        for v in self.fue_to_mbs.iter_mut() {
            *v = 0.0;
        }
        for v in self.mue_to_fap.iter_mut() {
            *v = 0.0;
        }
    }
}
