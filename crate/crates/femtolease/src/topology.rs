//! Two-tier network layout and orthogonal subchannel assignment.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scalar::dbm_to_watts;
use crate::Real;

/// Planar position in meters, MBS at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: Real,
    pub y: Real,
}

impl Position {
    pub fn distance(&self, other: &Position) -> Real {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> Real {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FapId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FueId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MueId(pub u32);

/// A game player: an FUE or an MUE. The derived order (FUEs before MUEs,
/// then by index) is the tie-break order used throughout negotiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlayerId {
    Fue(FueId),
    Mue(MueId),
}

impl std::fmt::Display for PlayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlayerId::Fue(FueId(i)) => write!(f, "fue{i}"),
            PlayerId::Mue(MueId(i)) => write!(f, "mue{i}"),
        }
    }
}

/// Macrocell base station, fixed at the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mbs {
    pub position: Position,
}

/// Femtocell access point serving a disc of `radius` meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fap {
    pub id: FapId,
    pub position: Position,
    pub radius: Real,
    pub subchannels: Vec<u32>,
    pub fue_ids: Vec<FueId>,
}

/// Femtocell user, dropped inside its serving FAP's disc.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fue {
    pub id: FueId,
    pub fap_id: FapId,
    pub position: Position,
    pub arrival_rate_bps: Real,
    pub max_power_w: Real,
    pub tx_power_w: Real,
    pub subchannel: u32,
}

/// Macrocell user, served by the MBS on a dedicated subchannel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mue {
    pub id: MueId,
    pub position: Position,
    pub arrival_rate_bps: Real,
    pub subchannel: u32,
    pub tx_power_w: Real,
}

/// Generated network layout plus the subchannel assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub mbs: Mbs,
    pub faps: Vec<Fap>,
    pub fues: Vec<Fue>,
    pub mues: Vec<Mue>,
    pub n_subchannels: u32,
    pub rng_seed: u64,
}

impl NetworkTopology {
    pub fn fap(&self, id: FapId) -> &Fap {
        &self.faps[id.0 as usize]
    }

    pub fn fue(&self, id: FueId) -> &Fue {
        &self.fues[id.0 as usize]
    }

    pub fn mue(&self, id: MueId) -> &Mue {
        &self.mues[id.0 as usize]
    }

    pub fn n_players(&self) -> usize {
        self.fues.len() + self.mues.len()
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.fues
            .iter()
            .map(|f| PlayerId::Fue(f.id))
            .chain(self.mues.iter().map(|m| PlayerId::Mue(m.id)))
    }

    pub fn player_subchannel(&self, p: PlayerId) -> u32 {
        match p {
            PlayerId::Fue(l) => self.fue(l).subchannel,
            PlayerId::Mue(m) => self.mue(m).subchannel,
        }
    }

    pub fn player_position(&self, p: PlayerId) -> Position {
        match p {
            PlayerId::Fue(l) => self.fue(l).position,
            PlayerId::Mue(m) => self.mue(m).position,
        }
    }

    /// Order-independent structural fingerprint for determinism checks.
    pub fn structural_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.rng_seed);
        h.write_u64(self.n_subchannels as u64);
        for f in &self.faps {
            h.write_u64(f.id.0 as u64);
            h.write_u64(f.position.x.to_bits());
            h.write_u64(f.position.y.to_bits());
            h.write_u64(f.radius.to_bits());
            for &s in &f.subchannels {
                h.write_u64(s as u64);
            }
        }
        for u in &self.fues {
            h.write_u64(u.id.0 as u64);
            h.write_u64(u.fap_id.0 as u64);
            h.write_u64(u.position.x.to_bits());
            h.write_u64(u.position.y.to_bits());
            h.write_u64(u.subchannel as u64);
            h.write_u64(u.tx_power_w.to_bits());
        }
        for m in &self.mues {
            h.write_u64(m.id.0 as u64);
            h.write_u64(m.position.x.to_bits());
            h.write_u64(m.position.y.to_bits());
            h.write_u64(m.subchannel as u64);
            h.write_u64(m.tx_power_w.to_bits());
        }
        h.finish()
    }

    /// Export as CSV rows `id,kind,x,y,subchannel,fap_id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,kind,x,y,subchannel,fap_id")?;
        writeln!(w, "0,mbs,{},{},,", self.mbs.position.x, self.mbs.position.y)?;
        for f in &self.faps {
            let subs: Vec<String> = f.subchannels.iter().map(|s| s.to_string()).collect();
            writeln!(
                w,
                "{},fap,{},{},{},",
                f.id.0,
                f.position.x,
                f.position.y,
                subs.join(";")
            )?;
        }
        for u in &self.fues {
            writeln!(
                w,
                "{},fue,{},{},{},{}",
                u.id.0, u.position.x, u.position.y, u.subchannel, u.fap_id.0
            )?;
        }
        for m in &self.mues {
            writeln!(
                w,
                "{},mue,{},{},{},",
                m.id.0, m.position.x, m.position.y, m.subchannel
            )?;
        }
        Ok(())
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn sample_annulus<R: Rng>(rng: &mut R, center: Position, r_min: Real, r_max: Real) -> Position {
    let u: Real = rng.random();
    let v: Real = rng.random();
    let r = (r_min * r_min + (r_max * r_max - r_min * r_min) * u).sqrt();
    let theta = 2.0 * std::f64::consts::PI * v;
    Position {
        x: center.x + r * theta.cos(),
        y: center.y + r * theta.sin(),
    }
}

/// True when two FAPs must hold disjoint subchannel sets: their coverage
/// discs, inflated by the sensing margin, overlap.
pub fn within_sensing_range(a: &Fap, b: &Fap, margin: Real) -> bool {
    a.position.distance(&b.position) <= margin * (a.radius + b.radius)
}

/// Draw FAP, FUE and MUE placements. Positions only; subchannels unassigned.
pub fn place_nodes<R: Rng>(config: &ScenarioConfig, seed: u64, rng: &mut R) -> NetworkTopology {
    let s = &config.scenario;
    let origin = Position { x: 0.0, y: 0.0 };
    let p_max = config.p_max_watts();

    let mut faps: Vec<Fap> = (0..s.n_faps)
        .map(|i| Fap {
            id: FapId(i),
            position: sample_annulus(rng, origin, 0.0, s.macro_radius_m),
            radius: s.femto_radius_m,
            subchannels: Vec::new(),
            fue_ids: Vec::new(),
        })
        .collect();
    if let Some(pin) = &s.pin {
        if let Some([x, y]) = pin.fap_position {
            faps[0].position = Position { x, y };
        }
    }

    let mut fues = Vec::with_capacity((s.n_faps * s.fues_per_fap) as usize);
    for fap in faps.iter_mut() {
        for _ in 0..s.fues_per_fap {
            let id = FueId(fues.len() as u32);
            let position = sample_annulus(rng, fap.position, s.forbidden_femto_m, fap.radius);
            let tx_power_w = uplink_power(config, indoor_pl_gain(config, &position, &fap.position));
            fues.push(Fue {
                id,
                fap_id: fap.id,
                position,
                arrival_rate_bps: config.traffic.lambda_fue_bps,
                max_power_w: p_max,
                tx_power_w,
                subchannel: u32::MAX,
            });
            fap.fue_ids.push(id);
        }
    }

    let mut mues: Vec<Mue> = (0..s.n_mues)
        .map(|i| {
            let position = sample_annulus(rng, origin, s.forbidden_macro_m, s.macro_radius_m);
            Mue {
                id: MueId(i),
                position,
                arrival_rate_bps: config.traffic.lambda_mue_bps,
                subchannel: u32::MAX,
                tx_power_w: p_max,
            }
        })
        .collect();
    if let Some(pin) = &s.pin {
        if let Some(x) = pin.mue_x {
            if !mues.is_empty() {
                mues[0].position = Position { x, y: pin.mue_y };
            }
        }
    }
    for m in mues.iter_mut() {
        m.tx_power_w = uplink_power(config, outdoor_pl_gain(config, &m.position, &origin));
    }

    NetworkTopology {
        mbs: Mbs { position: origin },
        faps,
        fues,
        mues,
        n_subchannels: s.n_subchannels,
        rng_seed: seed,
    }
}

fn indoor_pl_gain(config: &ScenarioConfig, a: &Position, b: &Position) -> Real {
    let d = a.distance(b).max(1e-3);
    let pl = config.channel.pl_indoor_intercept_db + config.channel.pl_indoor_slope_db * d.log10();
    10f64.powf(-pl / 10.0)
}

fn outdoor_pl_gain(config: &ScenarioConfig, a: &Position, b: &Position) -> Real {
    let d = a.distance(b).max(1e-3);
    let pl =
        config.channel.pl_outdoor_intercept_db + config.channel.pl_outdoor_slope_db * d.log10();
    10f64.powf(-pl / 10.0)
}

/// Uplink transmit power: P_max, or under path-loss compensation the power
/// that equalizes the mean received power to the configured target.
fn uplink_power(config: &ScenarioConfig, pl_gain: Real) -> Real {
    let p_max = config.p_max_watts();
    if config.channel.path_loss_compensation {
        let target = dbm_to_watts(config.channel.compensation_target_dbm);
        (target / pl_gain).min(p_max)
    } else {
        p_max
    }
}

/// Assign subchannels: every FAP takes a set disjoint from FAPs within
/// sensing range (greedy, in startup order), every MUE draws one subchannel
/// uniformly from the pool.
pub fn assign_subchannels<R: Rng>(
    topology: &mut NetworkTopology,
    sensing_margin: Real,
    rng: &mut R,
) -> Result<()> {
    let pool: Vec<u32> = (0..topology.n_subchannels).collect();

    // FAPs first, in id order: each senses already-started neighbors and
    // picks its set from the remaining pool.
    for i in 0..topology.faps.len() {
        let mut available = pool.clone();
        for j in 0..i {
            if within_sensing_range(&topology.faps[i], &topology.faps[j], sensing_margin) {
                let taken = topology.faps[j].subchannels.clone();
                available.retain(|s| !taken.contains(s));
            }
        }
        let need = topology.faps[i].fue_ids.len();
        if available.len() < need {
            return Err(Error::InfeasibleAssignment(format!(
                "fap {} needs {} subchannels but only {} remain after sensing",
                i,
                need,
                available.len()
            )));
        }
        let mut chosen = Vec::with_capacity(need);
        for _ in 0..need {
            let k = rng.random_range(0..available.len());
            chosen.push(available.swap_remove(k));
        }
        chosen.sort_unstable();
        for (slot, &fue_id) in topology.faps[i].fue_ids.clone().iter().enumerate() {
            topology.fues[fue_id.0 as usize].subchannel = chosen[slot];
        }
        topology.faps[i].subchannels = chosen;
    }

    for m in topology.mues.iter_mut() {
        m.subchannel = rng.random_range(0..topology.n_subchannels);
    }
    Ok(())
}

/// Generate a full topology: placement, subchannel assignment, pins.
/// Bit-identical for identical `(config, seed)`.
pub fn generate_topology(config: &ScenarioConfig, seed: u64) -> Result<NetworkTopology> {
    let mut rng = crate::rng::stream_rng(seed, crate::rng::Stream::Topology);
    let mut topology = place_nodes(config, seed, &mut rng);
    assign_subchannels(&mut topology, config.scenario.sensing_margin, &mut rng)?;
    if let Some(pin) = &config.scenario.pin {
        if pin.cochannel && !topology.mues.is_empty() && !topology.fues.is_empty() {
            topology.mues[0].subchannel = topology.fues[0].subchannel;
        }
    }
    Ok(topology)
}

/// Inverse index of the assignment: subchannel -> (MUEs, FUEs) on it.
pub fn cochannel_sets(topology: &NetworkTopology) -> BTreeMap<u32, (Vec<MueId>, Vec<FueId>)> {
    let mut map: BTreeMap<u32, (Vec<MueId>, Vec<FueId>)> = BTreeMap::new();
    for m in &topology.mues {
        map.entry(m.subchannel).or_default().0.push(m.id);
    }
    for f in &topology.fues {
        map.entry(f.subchannel).or_default().1.push(f.id);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn cfg(n: u32, m: u32) -> ScenarioConfig {
        ScenarioConfig::minimal(n, m)
    }

    #[test]
    fn degenerate_counts() {
        let t = generate_topology(&cfg(1, 0), 7).unwrap();
        assert_eq!(t.faps.len(), 1);
        assert_eq!(t.fues.len(), 1);
        assert_eq!(t.mues.len(), 0);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let c = cfg(200, 200);
        let a = generate_topology(&c, 99).unwrap();
        let b = generate_topology(&c, 99).unwrap();
        assert_eq!(a.structural_hash(), b.structural_hash());
        let c2 = generate_topology(&c, 100).unwrap();
        assert_ne!(a.structural_hash(), c2.structural_hash());
    }

    #[test]
    fn placement_bounds_hold() {
        let c = cfg(40, 60);
        for seed in 0..20 {
            let t = generate_topology(&c, seed).unwrap();
            for m in &t.mues {
                let d = m.position.norm();
                assert!(d >= 50.0 - 1e-9 && d <= 1000.0 + 1e-9, "mue at {d}");
            }
            for u in &t.fues {
                let fap = t.fap(u.fap_id);
                let d = u.position.distance(&fap.position);
                assert!(d > 0.2 - 1e-12 && d <= fap.radius + 1e-9, "fue at {d}");
            }
        }
    }

    /// Monte-Carlo mean MUE distance vs. the closed-form annulus mean
    /// (2/3)(R^3 - a^3)/(R^2 - a^2).
    #[test]
    fn mean_mue_distance_matches_annulus_oracle() {
        let c = cfg(1, 200);
        let mut sum = 0.0;
        let mut n = 0u64;
        for seed in 0..100 {
            let t = generate_topology(&c, seed).unwrap();
            for m in &t.mues {
                sum += m.position.norm();
                n += 1;
            }
        }
        let mean = sum / n as Real;
        let (r, a) = (1000.0_f64, 50.0_f64);
        let oracle = 2.0 / 3.0 * (r.powi(3) - a.powi(3)) / (r.powi(2) - a.powi(2));
        let rel = (mean - oracle).abs() / oracle;
        assert!(rel < 0.01, "mean {mean} vs oracle {oracle}");
    }

    fn two_fap_topology(dist: Real, pool: u32) -> NetworkTopology {
        let mut c = cfg(2, 0);
        c.scenario.n_subchannels = pool;
        let mut t = place_nodes(&c, 0, &mut crate::rng::stream_rng(0, crate::rng::Stream::Topology));
        t.faps[0].position = Position { x: 0.0, y: 0.0 };
        t.faps[1].position = Position { x: dist, y: 0.0 };
        t
    }

    #[test]
    fn nearby_faps_get_disjoint_sets() {
        let mut t = two_fap_topology(5.0, 8);
        let mut rng = crate::rng::stream_rng(1, crate::rng::Stream::Topology);
        assign_subchannels(&mut t, 2.0, &mut rng).unwrap();
        let a = &t.faps[0].subchannels;
        let b = &t.faps[1].subchannels;
        assert!(a.iter().all(|s| !b.contains(s)), "{a:?} vs {b:?}");
    }

    #[test]
    fn distant_faps_may_reuse() {
        // Pool of one subchannel forces reuse; assignment must still succeed.
        let mut t = two_fap_topology(2000.0, 1);
        let mut rng = crate::rng::stream_rng(1, crate::rng::Stream::Topology);
        assign_subchannels(&mut t, 2.0, &mut rng).unwrap();
        assert_eq!(t.faps[0].subchannels, t.faps[1].subchannels);
    }

    #[test]
    fn nearby_faps_with_tiny_pool_are_infeasible() {
        let mut t = two_fap_topology(5.0, 1);
        let mut rng = crate::rng::stream_rng(1, crate::rng::Stream::Topology);
        let err = assign_subchannels(&mut t, 2.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAssignment(_)));
    }

    /// Three mutually-sensing FAPs need three colors; a pool of two fails,
    /// matching the chromatic number of the triangle conflict graph. A
    /// 3-chain (ends out of range) is 2-colorable and must succeed.
    #[test]
    fn clique_of_three_exhausts_pool_of_two() {
        let mut c = cfg(3, 0);
        c.scenario.n_subchannels = 2;
        let mut t = place_nodes(&c, 0, &mut crate::rng::stream_rng(0, crate::rng::Stream::Topology));
        for (i, f) in t.faps.iter_mut().enumerate() {
            f.position = Position { x: i as Real * 5.0, y: 0.0 };
        }
        let mut rng = crate::rng::stream_rng(1, crate::rng::Stream::Topology);
        let err = assign_subchannels(&mut t, 2.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAssignment(_)));

        // Chain: 0-1 and 1-2 within range, 0-2 not (spacing 60 m, range 80 m).
        let mut t = place_nodes(&c, 0, &mut crate::rng::stream_rng(0, crate::rng::Stream::Topology));
        for (i, f) in t.faps.iter_mut().enumerate() {
            f.position = Position { x: i as Real * 60.0, y: 0.0 };
        }
        let mut rng = crate::rng::stream_rng(1, crate::rng::Stream::Topology);
        assign_subchannels(&mut t, 2.0, &mut rng).unwrap();
        assert_ne!(t.faps[0].subchannels, t.faps[1].subchannels);
        assert_ne!(t.faps[1].subchannels, t.faps[2].subchannels);
    }

    #[test]
    fn cochannel_sets_rescan_oracle() {
        let c = cfg(30, 40);
        let t = generate_topology(&c, 5).unwrap();
        let sets = cochannel_sets(&t);
        let mut mue_count = 0;
        let mut fue_count = 0;
        for (sub, (mues, fues)) in &sets {
            for m in mues {
                assert_eq!(t.mue(*m).subchannel, *sub);
                mue_count += 1;
            }
            for f in fues {
                assert_eq!(t.fue(*f).subchannel, *sub);
                fue_count += 1;
            }
        }
        assert_eq!(mue_count, t.mues.len());
        assert_eq!(fue_count, t.fues.len());
        assert!(cochannel_sets(&generate_topology(&cfg(1, 0), 0).unwrap()).len() >= 1);
    }

    #[test]
    fn empty_topology_gives_empty_map() {
        let mut t = generate_topology(&cfg(1, 0), 0).unwrap();
        t.fues.clear();
        t.faps.clear();
        assert!(cochannel_sets(&t).is_empty());
    }

    #[test]
    fn pinned_placements_apply() {
        let mut c = cfg(2, 3);
        c.scenario.pin = Some(crate::config::PinSection {
            fap_position: Some([800.0, 0.0]),
            mue_x: Some(780.0),
            mue_y: 0.0,
            cochannel: true,
        });
        let t = generate_topology(&c, 3).unwrap();
        assert_eq!(t.faps[0].position, Position { x: 800.0, y: 0.0 });
        assert_eq!(t.mues[0].position, Position { x: 780.0, y: 0.0 });
        assert_eq!(t.mues[0].subchannel, t.fues[0].subchannel);
    }

    #[test]
    fn csv_export_shape() {
        let t = generate_topology(&cfg(2, 2), 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,kind,x,y,subchannel,fap_id");
        assert_eq!(lines.len(), 1 + 1 + 2 + 2 + 2);
    }
}
