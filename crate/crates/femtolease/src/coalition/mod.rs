//! Partition-form game state: coalitions, partitions, outcomes.

mod eval;
mod formation;
mod oracle;
mod stability;

pub use eval::{
    evaluate_coalition, evaluate_partition, noncoop_fue_stats, noncoop_mue_stats, noncoop_rate,
    CoalitionEval, EvalContext, GameParams, MemberEval, PlayerStats, Schedule,
};
pub use formation::{form_coalitions, interferer_discovery, CandidateLists, FormationResult};
pub use oracle::{recursive_core_oracle, OracleOutcome, ORACLE_PLAYER_CAP};
pub use stability::{is_stable, Deviation, StabilityReport};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{FueId, MueId, NetworkTopology, PlayerId};
use crate::traffic::Payoff;
use crate::Real;

/// Lease agreed between one serviced MUE and its relay FUE: the granted
/// superframe fraction `alpha`, its relay/reward split `beta`, and the FUE
/// transmit powers on the two subslots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaseTerms {
    pub alpha: Real,
    pub beta: Real,
    pub relay_power_w: Real,
    pub own_power_w: Real,
}

impl LeaseTerms {
    /// Power-budget constraint: `beta P_R + (1-beta) P_T < p_max`.
    pub fn within_budget(&self, p_max_w: Real) -> bool {
        self.beta * self.relay_power_w + (1.0 - self.beta) * self.own_power_w < p_max_w
    }
}

/// One coalition: either a singleton player, or one relay FUE plus the MUEs
/// it services under per-member lease terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coalition {
    pub relay_fue: Option<FueId>,
    pub mue_ids: BTreeSet<MueId>,
    pub lease: BTreeMap<MueId, LeaseTerms>,
}

impl Coalition {
    pub fn singleton_fue(l: FueId) -> Self {
        Coalition {
            relay_fue: Some(l),
            mue_ids: BTreeSet::new(),
            lease: BTreeMap::new(),
        }
    }

    pub fn singleton_mue(m: MueId) -> Self {
        Coalition {
            relay_fue: None,
            mue_ids: [m].into_iter().collect(),
            lease: BTreeMap::new(),
        }
    }

    pub fn cooperative(fue: FueId, members: impl IntoIterator<Item = MueId>) -> Self {
        Coalition {
            relay_fue: Some(fue),
            mue_ids: members.into_iter().collect(),
            lease: BTreeMap::new(),
        }
    }

    pub fn is_cooperative(&self) -> bool {
        self.relay_fue.is_some()
            && !self.mue_ids.is_empty()
            && self
                .mue_ids
                .iter()
                .all(|m| self.lease.get(m).map(|t| t.alpha > 0.0).unwrap_or(false))
    }

    pub fn len(&self) -> usize {
        self.relay_fue.map(|_| 1).unwrap_or(0) + self.mue_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.relay_fue
            .iter()
            .map(|l| PlayerId::Fue(*l))
            .chain(self.mue_ids.iter().map(|m| PlayerId::Mue(*m)))
    }

    pub fn contains(&self, p: PlayerId) -> bool {
        match p {
            PlayerId::Fue(l) => self.relay_fue == Some(l),
            PlayerId::Mue(m) => self.mue_ids.contains(&m),
        }
    }

    /// Lowest player id, the deterministic processing key.
    pub fn min_player(&self) -> Option<PlayerId> {
        self.players().min()
    }
}

/// Disjoint coalitions covering every FUE and MUE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub coalitions: Vec<Coalition>,
}

impl Partition {
    /// The fully non-cooperative partition.
    pub fn all_singletons(topology: &NetworkTopology) -> Self {
        let mut coalitions = Vec::with_capacity(topology.n_players());
        for f in &topology.fues {
            coalitions.push(Coalition::singleton_fue(f.id));
        }
        for m in &topology.mues {
            coalitions.push(Coalition::singleton_mue(m.id));
        }
        Partition { coalitions }
    }

    /// Check disjoint cover of the player set and coalition shape.
    pub fn validate(&self, topology: &NetworkTopology) -> Result<()> {
        let mut seen: BTreeSet<PlayerId> = BTreeSet::new();
        for c in &self.coalitions {
            if c.is_empty() {
                return Err(Error::InvalidPartition("empty coalition".into()));
            }
            if c.relay_fue.is_none() && c.mue_ids.len() > 1 {
                return Err(Error::InvalidPartition(
                    "multi-MUE coalition without a relay FUE".into(),
                ));
            }
            for p in c.players() {
                if !seen.insert(p) {
                    return Err(Error::InvalidPartition(format!("player {p} appears twice")));
                }
            }
        }
        let expected: BTreeSet<PlayerId> = topology.players().collect();
        if seen != expected {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} players, topology has {}",
                seen.len(),
                expected.len()
            )));
        }
        Ok(())
    }

    pub fn coalition_of(&self, p: PlayerId) -> Option<usize> {
        self.coalitions.iter().position(|c| c.contains(p))
    }

    /// Sort coalitions by lowest member id: the canonical processing order.
    pub fn sort_canonical(&mut self) {
        self.coalitions.sort_by_key(|c| c.min_player());
    }

    /// Mean coalition size counting singletons: players / coalitions.
    pub fn mean_coalition_size(&self) -> Real {
        let players: usize = self.coalitions.iter().map(|c| c.len()).sum();
        players as Real / self.coalitions.len() as Real
    }

    pub fn cooperative_count(&self) -> usize {
        self.coalitions.iter().filter(|c| c.is_cooperative()).count()
    }

    /// Structure key ignoring lease terms, for memoization and comparison.
    pub fn structure_key(&self) -> Vec<(Option<FueId>, Vec<MueId>)> {
        let mut key: Vec<(Option<FueId>, Vec<MueId>)> = self
            .coalitions
            .iter()
            .map(|c| (c.relay_fue, c.mue_ids.iter().copied().collect()))
            .collect();
        key.sort();
        key
    }

    /// Export as CSV rows `coalition_id,fue_id,mue_ids,alpha,beta`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "coalition_id,fue_id,mue_ids,alpha,beta")?;
        let mut sorted = self.clone();
        sorted.sort_canonical();
        for (i, c) in sorted.coalitions.iter().enumerate() {
            let fue = c.relay_fue.map(|l| l.0.to_string()).unwrap_or_default();
            let mues: Vec<String> = c.mue_ids.iter().map(|m| m.0.to_string()).collect();
            let alphas: Vec<String> = c
                .mue_ids
                .iter()
                .filter_map(|m| c.lease.get(m))
                .map(|t| t.alpha.to_string())
                .collect();
            let betas: Vec<String> = c
                .mue_ids
                .iter()
                .filter_map(|m| c.lease.get(m))
                .map(|t| t.beta.to_string())
                .collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                i,
                fue,
                mues.join(";"),
                alphas.join(";"),
                betas.join(";")
            )?;
        }
        Ok(())
    }
}

/// Payoff vector plus the partition it arose from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub payoffs: BTreeMap<PlayerId, Payoff>,
    pub partition: Partition,
}

impl Outcome {
    pub fn value(&self, p: PlayerId) -> Real {
        self.payoffs.get(&p).map(|x| x.value).unwrap_or(0.0)
    }

    pub fn total_value(&self) -> Real {
        self.payoffs.values().map(|x| x.value).sum()
    }
}

/// Group-preference operator: `ys` dominates `xs` over `group` when no
/// member is worse off and at least one is strictly better.
pub fn group_prefers(
    group: &[PlayerId],
    ys: &BTreeMap<PlayerId, Payoff>,
    xs: &BTreeMap<PlayerId, Payoff>,
) -> bool {
    let mut strict = false;
    for p in group {
        let y = ys.get(p).map(|v| v.value).unwrap_or(0.0);
        let x = xs.get(p).map(|v| v.value).unwrap_or(0.0);
        if y < x {
            return false;
        }
        if y > x {
            strict = true;
        }
    }
    strict
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::topology::generate_topology;

    #[test]
    fn all_singletons_is_valid() {
        let t = generate_topology(&ScenarioConfig::minimal(3, 4), 1).unwrap();
        let p = Partition::all_singletons(&t);
        p.validate(&t).unwrap();
        assert_eq!(p.coalitions.len(), 7);
        assert_eq!(p.mean_coalition_size(), 1.0);
        assert_eq!(p.cooperative_count(), 0);
    }

    #[test]
    fn validate_rejects_overlap_and_gaps() {
        let t = generate_topology(&ScenarioConfig::minimal(2, 2), 1).unwrap();
        let mut p = Partition::all_singletons(&t);
        p.coalitions.push(Coalition::singleton_mue(MueId(0)));
        assert!(matches!(p.validate(&t), Err(Error::InvalidPartition(_))));
        let mut p = Partition::all_singletons(&t);
        p.coalitions.pop();
        assert!(matches!(p.validate(&t), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn cooperative_requires_positive_alpha() {
        let mut c = Coalition::cooperative(FueId(0), [MueId(1)]);
        assert!(!c.is_cooperative());
        c.lease.insert(
            MueId(1),
            LeaseTerms {
                alpha: 0.5,
                beta: 0.4,
                relay_power_w: 0.05,
                own_power_w: 0.05,
            },
        );
        assert!(c.is_cooperative());
    }

    #[test]
    fn group_preference_operator_is_irreflexive_and_transitive() {
        let mk = |vals: &[(PlayerId, Real)]| -> BTreeMap<PlayerId, Payoff> {
            vals.iter()
                .map(|(p, v)| {
                    (
                        *p,
                        Payoff {
                            value: *v,
                            rate_bps: 0.0,
                            delay: 1.0,
                            delta: 0.5,
                        },
                    )
                })
                .collect()
        };
        let a = PlayerId::Mue(MueId(0));
        let b = PlayerId::Mue(MueId(1));
        let group = vec![a, b];
        let x = mk(&[(a, 1.0), (b, 1.0)]);
        let y = mk(&[(a, 2.0), (b, 1.0)]);
        let z = mk(&[(a, 2.0), (b, 3.0)]);
        assert!(!group_prefers(&group, &x, &x), "irreflexive");
        assert!(group_prefers(&group, &y, &x));
        assert!(group_prefers(&group, &z, &y));
        assert!(group_prefers(&group, &z, &x), "transitive");
        assert!(!group_prefers(&group, &x, &y));
    }

    #[test]
    fn partition_csv_shape() {
        let t = generate_topology(&ScenarioConfig::minimal(1, 2), 1).unwrap();
        let mut p = Partition::all_singletons(&t);
        let mut c = Coalition::cooperative(FueId(0), [MueId(0)]);
        c.lease.insert(
            MueId(0),
            LeaseTerms {
                alpha: 0.6,
                beta: 0.5,
                relay_power_w: 0.08,
                own_power_w: 0.02,
            },
        );
        p.coalitions.retain(|c| {
            !c.contains(PlayerId::Fue(FueId(0))) && !c.contains(PlayerId::Mue(MueId(0)))
        });
        p.coalitions.push(c);
        p.validate(&t).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("coalition_id,fue_id,mue_ids,alpha,beta\n"));
        assert!(text.contains("0,0,0,0.6,0.5"), "{text}");
    }
}
