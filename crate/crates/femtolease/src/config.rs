//! Scenario configuration: the documented key-value schema (TOML dialect).
//!
//! Only `scenario.n_faps` and `scenario.n_mues` are required; every other
//! key defaults to the standard system parameters. See `docs/config.md` in
//! the repository root for the schema reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::dbm_to_watts;
use crate::Real;

/// Femtocell admission / scheduling policy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessPolicy {
    /// Every player transmits on its own assignment; no cooperation. The
    /// closed access policy yields exactly this schedule, so `closed` and
    /// `noncooperative` share one evaluation path.
    Noncooperative,
    Closed,
    /// MUEs inside a femtocell disc are admitted on a secondary subchannel.
    Open,
    /// Distributed coalition formation with spectrum leasing.
    Cooperative,
}

impl AccessPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noncoop" | "noncooperative" => Some(Self::Noncooperative),
            "closed" => Some(Self::Closed),
            "open" => Some(Self::Open),
            "coop" | "cooperative" => Some(Self::Cooperative),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Noncooperative => "noncooperative",
            Self::Closed => "closed",
            Self::Open => "open",
            Self::Cooperative => "cooperative",
        }
    }
}

/// How success probabilities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Exponential fading on the signal only, interference at its mean:
    /// `exp(-gamma (I + sigma^2) / S)`.
    ClosedForm,
    /// Empirical frequency over seeded fading draws.
    MonteCarlo,
}

/// Retransmission-adjusted arrival model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// `lambda * (1 - (1 - Pt)^D)`: the delivered-fraction reading.
    Literal,
    /// `lambda * E[transmission attempts]`: the channel-occupancy reading.
    ExpectedTransmissions,
}

/// Service rate used for the relay queue at the serving FUE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayQueueMode {
    /// Relayed traffic is served by the leased relay slices.
    RelaySlice,
    /// Relayed traffic is served at the FUE's own-traffic rate.
    OwnRate,
}

fn default_fues_per_fap() -> u32 {
    1
}
fn default_macro_radius() -> Real {
    1000.0
}
fn default_femto_radius() -> Real {
    20.0
}
fn default_forbidden_macro() -> Real {
    50.0
}
fn default_forbidden_femto() -> Real {
    0.2
}
fn default_n_subchannels() -> u32 {
    500
}
fn default_sensing_margin() -> Real {
    2.0
}

/// Network layout parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Number of femtocell access points (N).
    pub n_faps: u32,
    /// Number of macrocell users (M).
    pub n_mues: u32,
    /// FUEs served per FAP (L_n).
    #[serde(default = "default_fues_per_fap")]
    pub fues_per_fap: u32,
    #[serde(default = "default_macro_radius")]
    pub macro_radius_m: Real,
    #[serde(default = "default_femto_radius")]
    pub femto_radius_m: Real,
    /// MUEs are dropped no closer than this to the MBS.
    #[serde(default = "default_forbidden_macro")]
    pub forbidden_macro_m: Real,
    /// FUEs are dropped no closer than this to their FAP.
    #[serde(default = "default_forbidden_femto")]
    pub forbidden_femto_m: Real,
    /// Size of the subchannel pool.
    #[serde(default = "default_n_subchannels")]
    pub n_subchannels: u32,
    /// FAP discs inflated by this factor count as within sensing range.
    #[serde(default = "default_sensing_margin")]
    pub sensing_margin: Real,
    /// Optional pinned placements for path sweeps.
    #[serde(default)]
    pub pin: Option<PinSection>,
}

/// Deterministic placements for the mobility-style position sweep: FAP 0 is
/// fixed, MUE 0 walks the x axis, optionally forced co-channel with FUE 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSection {
    pub fap_position: Option<[Real; 2]>,
    pub mue_x: Option<Real>,
    #[serde(default)]
    pub mue_y: Real,
    #[serde(default)]
    pub cochannel: bool,
}

fn default_pl_indoor_intercept() -> Real {
    37.0
}
fn default_pl_indoor_slope() -> Real {
    30.0
}
fn default_pl_outdoor_intercept() -> Real {
    15.3
}
fn default_pl_outdoor_slope() -> Real {
    37.6
}
fn default_wall_loss() -> Real {
    12.0
}
fn default_shadow_sigma() -> Real {
    10.0
}
fn default_noise_density() -> Real {
    -174.0
}
fn default_bandwidth() -> Real {
    180_000.0
}
fn default_fading_mode() -> FadingMode {
    FadingMode::ClosedForm
}
fn default_n_fading_draws() -> u32 {
    100_000
}
fn default_true() -> bool {
    true
}
fn default_compensation_target() -> Real {
    -60.0
}

/// Propagation and fading parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_pl_indoor_intercept")]
    pub pl_indoor_intercept_db: Real,
    #[serde(default = "default_pl_indoor_slope")]
    pub pl_indoor_slope_db: Real,
    #[serde(default = "default_pl_outdoor_intercept")]
    pub pl_outdoor_intercept_db: Real,
    #[serde(default = "default_pl_outdoor_slope")]
    pub pl_outdoor_slope_db: Real,
    #[serde(default = "default_wall_loss")]
    pub wall_loss_db: Real,
    #[serde(default = "default_shadow_sigma")]
    pub shadow_sigma_db: Real,
    #[serde(default = "default_noise_density")]
    pub noise_density_dbm_hz: Real,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: Real,
    #[serde(default = "default_fading_mode")]
    pub fading_mode: FadingMode,
    #[serde(default = "default_n_fading_draws")]
    pub n_fading_draws: u32,
    /// Monte-Carlo mode only: draw fading on interferers too.
    #[serde(default = "default_true")]
    pub interference_fading: bool,
    /// When on, uplink transmit power equalizes mean received power to the
    /// target below (capped at P_max) instead of transmitting at P_max.
    #[serde(default)]
    pub path_loss_compensation: bool,
    #[serde(default = "default_compensation_target")]
    pub compensation_target_dbm: Real,
}

impl Default for ChannelSection {
    fn default() -> Self {
        toml::from_str("").expect("channel defaults")
    }
}

fn default_p_max() -> Real {
    20.0
}
fn default_gamma_mue() -> Real {
    10.0
}
fn default_gamma_fue() -> Real {
    15.0
}
fn default_d2d_target_snr() -> Real {
    20.0
}
fn default_d2d_range() -> Real {
    100.0
}

/// Transmit powers, SINR targets, and the D2D discovery range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    #[serde(default = "default_p_max")]
    pub p_max_dbm: Real,
    #[serde(default = "default_gamma_mue")]
    pub gamma_mue_db: Real,
    #[serde(default = "default_gamma_fue")]
    pub gamma_fue_db: Real,
    /// Mean SNR target at the relay used to set the D2D transmit power.
    #[serde(default = "default_d2d_target_snr")]
    pub d2d_target_snr_db: Real,
    /// Maximum MUE-FUE distance for discovery and deviation checks.
    #[serde(default = "default_d2d_range")]
    pub d2d_range_m: Real,
}

impl Default for RadioSection {
    fn default() -> Self {
        toml::from_str("").expect("radio defaults")
    }
}

fn default_lambda() -> Real {
    150_000.0
}
fn default_max_retx() -> u32 {
    4
}
fn default_arrival_mode() -> ArrivalMode {
    ArrivalMode::Literal
}
fn default_relay_queue_mode() -> RelayQueueMode {
    RelayQueueMode::RelaySlice
}
fn default_packet_size() -> u32 {
    1000
}

/// Arrival rates and the retransmission model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    #[serde(default = "default_lambda")]
    pub lambda_mue_bps: Real,
    #[serde(default = "default_lambda")]
    pub lambda_fue_bps: Real,
    /// Maximum number of transmission attempts (D).
    #[serde(default = "default_max_retx")]
    pub max_retx: u32,
    #[serde(default = "default_arrival_mode")]
    pub arrival_mode: ArrivalMode,
    #[serde(default = "default_relay_queue_mode")]
    pub relay_queue_mode: RelayQueueMode,
    /// Used only by the discrete-event queueing cross-check.
    #[serde(default = "default_packet_size")]
    pub packet_size_bits: u32,
}

impl Default for TrafficSection {
    fn default() -> Self {
        toml::from_str("").expect("traffic defaults")
    }
}

fn default_delta() -> Real {
    0.5
}
fn default_alpha_step() -> Real {
    0.05
}
fn default_beta_step() -> Real {
    0.01
}
fn default_power_split_points() -> u32 {
    64
}
fn default_lease_passes() -> u32 {
    3
}
fn default_improvement_margin() -> Real {
    1e-3
}

/// Payoff tradeoff and lease-search resolutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    /// Capacity-delay tradeoff exponent, in (0, 1).
    #[serde(default = "default_delta")]
    pub delta: Real,
    #[serde(default = "default_alpha_step")]
    pub alpha_grid_step: Real,
    #[serde(default = "default_beta_step")]
    pub beta_grid_step: Real,
    #[serde(default = "default_power_split_points")]
    pub power_split_points: u32,
    /// Renegotiation passes when canonicalizing a whole partition.
    #[serde(default = "default_lease_passes")]
    pub lease_passes: u32,
    /// Relative payoff gain a player must clear before switching or
    /// leaving; damps micro-renegotiation churn.
    #[serde(default = "default_improvement_margin")]
    pub improvement_margin: Real,
}

impl Default for GameSection {
    fn default() -> Self {
        toml::from_str("").expect("game defaults")
    }
}

fn default_rounds() -> u32 {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_policy() -> AccessPolicy {
    AccessPolicy::Cooperative
}
fn default_jobs() -> u32 {
    1
}
fn default_name() -> String {
    "scenario".to_string()
}

/// Execution parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: AccessPolicy,
    /// Worker threads for round evaluation (0 = all cores).
    #[serde(default = "default_jobs")]
    pub jobs: u32,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("run defaults")
    }
}

/// One sweep axis: a parameter name and the values it takes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// One of `n`, `m`, `delta`, `r`, `policy`, `mue_x`.
    pub param: String,
    pub values: AxisValues,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    Numbers(Vec<Real>),
    Strings(Vec<String>),
}

impl AxisValues {
    pub fn len(&self) -> usize {
        match self {
            Self::Numbers(v) => v.len(),
            Self::Strings(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
}

/// Full scenario configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub radio: RadioSection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub game: GameSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Environment variable prefix for overrides (`FEMTOLEASE_SEED`, `_ROUNDS`,
/// `_JOBS`, `_POLICY`). Applied by [`ScenarioConfig::apply_env_overrides`].
pub const ENV_PREFIX: &str = "FEMTOLEASE_";

impl ScenarioConfig {
    /// Parse from TOML text. Parse errors keep the line-anchored diagnostic
    /// produced by the TOML parser.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// A minimal valid config, used by tests and small tools.
    pub fn minimal(n_faps: u32, n_mues: u32) -> Self {
        let text = format!("[scenario]\nn_faps = {n_faps}\nn_mues = {n_mues}\n");
        ScenarioConfig::from_toml_str(&text).expect("minimal config")
    }

    /// Check cross-field invariants; returns the offending key in messages.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if s.n_faps == 0 {
            return fail("scenario.n_faps must be >= 1".into());
        }
        if s.fues_per_fap == 0 {
            return fail("scenario.fues_per_fap must be >= 1".into());
        }
        if !(s.macro_radius_m > 0.0) || !s.macro_radius_m.is_finite() {
            return fail("scenario.macro_radius_m must be positive and finite".into());
        }
        if !(10.0..=50.0).contains(&s.femto_radius_m) {
            return fail(format!(
                "scenario.femto_radius_m must lie in [10, 50], got {}",
                s.femto_radius_m
            ));
        }
        if s.forbidden_macro_m < 0.0 || s.forbidden_macro_m >= s.macro_radius_m {
            return fail("scenario.forbidden_macro_m must lie in [0, macro_radius_m)".into());
        }
        if s.forbidden_femto_m < 0.0 || s.forbidden_femto_m >= s.femto_radius_m {
            return fail("scenario.forbidden_femto_m must lie in [0, femto_radius_m)".into());
        }
        if s.n_subchannels == 0 {
            return fail("scenario.n_subchannels must be >= 1".into());
        }
        if s.n_subchannels < s.n_mues {
            return fail(format!(
                "scenario.n_subchannels ({}) must be >= scenario.n_mues ({})",
                s.n_subchannels, s.n_mues
            ));
        }
        if s.sensing_margin < 0.0 {
            return fail("scenario.sensing_margin must be >= 0".into());
        }
        let c = &self.channel;
        for (k, v) in [
            ("channel.wall_loss_db", c.wall_loss_db),
            ("channel.shadow_sigma_db", c.shadow_sigma_db),
        ] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{k} must be finite and >= 0"));
            }
        }
        if !(c.bandwidth_hz > 0.0) {
            return fail("channel.bandwidth_hz must be positive".into());
        }
        if c.fading_mode == FadingMode::MonteCarlo && c.n_fading_draws < 100 {
            return fail("channel.n_fading_draws must be >= 100 in monte_carlo mode".into());
        }
        let t = &self.traffic;
        if !(t.lambda_mue_bps > 0.0) || !(t.lambda_fue_bps > 0.0) {
            return fail("traffic.lambda_*_bps must be positive".into());
        }
        if t.max_retx == 0 {
            return fail("traffic.max_retx must be >= 1".into());
        }
        if t.packet_size_bits == 0 {
            return fail("traffic.packet_size_bits must be >= 1".into());
        }
        let g = &self.game;
        if !(g.delta > 0.0 && g.delta < 1.0) {
            return fail(format!("game.delta must lie in (0, 1), got {}", g.delta));
        }
        if !(g.alpha_grid_step > 0.0 && g.alpha_grid_step <= 1.0) {
            return fail("game.alpha_grid_step must lie in (0, 1]".into());
        }
        if !(g.beta_grid_step > 0.0 && g.beta_grid_step <= 1.0) {
            return fail("game.beta_grid_step must lie in (0, 1]".into());
        }
        if g.power_split_points == 0 {
            return fail("game.power_split_points must be >= 1".into());
        }
        if g.lease_passes == 0 {
            return fail("game.lease_passes must be >= 1".into());
        }
        if !(g.improvement_margin >= 0.0) || !g.improvement_margin.is_finite() {
            return fail("game.improvement_margin must be finite and >= 0".into());
        }
        let r = &self.radio;
        if !(dbm_to_watts(r.p_max_dbm) > 0.0) {
            return fail("radio.p_max_dbm invalid".into());
        }
        if !(r.d2d_range_m > 0.0) {
            return fail("radio.d2d_range_m must be positive".into());
        }
        if self.run.rounds == 0 {
            return fail("run.rounds must be >= 1".into());
        }
        for ax in &self.sweep.axes {
            if ax.values.is_empty() {
                return fail(format!("sweep axis `{}` has no values", ax.param));
            }
            let known = ["n", "m", "delta", "r", "policy", "mue_x"];
            if !known.contains(&ax.param.as_str()) {
                return fail(format!(
                    "unknown sweep axis `{}` (expected one of {:?})",
                    ax.param, known
                ));
            }
            if ax.param == "policy" {
                match &ax.values {
                    AxisValues::Strings(vs) => {
                        for v in vs {
                            if AccessPolicy::parse(v).is_none() {
                                return fail(format!("unknown policy `{v}` in sweep axis"));
                            }
                        }
                    }
                    AxisValues::Numbers(_) => {
                        return fail("policy axis values must be strings".into())
                    }
                }
            } else if matches!(ax.values, AxisValues::Strings(_)) {
                return fail(format!("sweep axis `{}` values must be numbers", ax.param));
            }
        }
        Ok(())
    }

    /// Apply `FEMTOLEASE_*` environment overrides (seed, rounds, jobs, policy).
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        let get = |k: &str| std::env::var(format!("{ENV_PREFIX}{k}")).ok();
        if let Some(v) = get("SEED") {
            self.run.seed = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{ENV_PREFIX}SEED: bad u64 `{v}`")))?;
        }
        if let Some(v) = get("ROUNDS") {
            self.run.rounds = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{ENV_PREFIX}ROUNDS: bad u32 `{v}`")))?;
        }
        if let Some(v) = get("JOBS") {
            self.run.jobs = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{ENV_PREFIX}JOBS: bad u32 `{v}`")))?;
        }
        if let Some(v) = get("POLICY") {
            self.run.policy = AccessPolicy::parse(&v)
                .ok_or_else(|| Error::InvalidConfig(format!("{ENV_PREFIX}POLICY: `{v}`")))?;
        }
        Ok(())
    }

    /// Thermal noise power over one subchannel, in watts.
    pub fn noise_watts(&self) -> Real {
        dbm_to_watts(self.channel.noise_density_dbm_hz) * self.channel.bandwidth_hz
    }

    pub fn p_max_watts(&self) -> Real {
        dbm_to_watts(self.radio.p_max_dbm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_parses_with_defaults() {
        let cfg = ScenarioConfig::minimal(3, 2);
        assert_eq!(cfg.scenario.n_subchannels, 500);
        assert_eq!(cfg.traffic.max_retx, 4);
        assert_eq!(cfg.game.delta, 0.5);
        assert_eq!(cfg.radio.p_max_dbm, 20.0);
        assert_eq!(cfg.run.policy, AccessPolicy::Cooperative);
    }

    #[test]
    fn missing_required_key_names_it() {
        let err = ScenarioConfig::from_toml_str("[scenario]\nn_mues = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("n_faps"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err =
            ScenarioConfig::from_toml_str("[scenario]\nn_faps = 1\nn_mues = 1\nbogus = 3\n")
                .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus"), "{msg}");
        assert!(msg.contains("line"), "expected line anchor: {msg}");
    }

    #[test]
    fn semantic_validation_names_key() {
        let mut cfg = ScenarioConfig::minimal(1, 1);
        cfg.game.delta = 1.5;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("game.delta"), "{msg}");

        let mut cfg = ScenarioConfig::minimal(1, 1);
        cfg.scenario.n_mues = 600;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("n_subchannels"), "{msg}");
    }

    #[test]
    fn noise_power_matches_density_times_bandwidth() {
        let cfg = ScenarioConfig::minimal(1, 1);
        // -174 dBm/Hz over 180 kHz.
        let expected = 10f64.powf(-174.0 / 10.0) * 1e-3 * 180_000.0;
        approx::assert_relative_eq!(cfg.noise_watts(), expected, max_relative = 1e-12);
    }

    #[test]
    fn policy_aliases() {
        assert_eq!(AccessPolicy::parse("coop"), Some(AccessPolicy::Cooperative));
        assert_eq!(
            AccessPolicy::parse("noncoop"),
            Some(AccessPolicy::Noncooperative)
        );
        assert_eq!(AccessPolicy::parse("bogus"), None);
    }
}
