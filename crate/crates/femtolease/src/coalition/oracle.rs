//! Exhaustive recursive-core computation on small instances.
//!
//! The core of the partition-form game is found by recursion over residual
//! games: an outcome is dominated via a deviating coalition when, for at
//! least one solution of the residual game played by everyone else (its
//! core when nonempty, otherwise all residual outcomes), the deviators all
//! do no worse and at least one strictly better. Outcome payoffs always
//! come from the canonical lease negotiation, so payoff division follows
//! the unique power mapping rather than free transfers.
//!
//! The outcome space contains the partitions that can physically form:
//! cooperative coalitions are one relay FUE plus D2D-reachable MUEs whose
//! canonical negotiation succeeds (mutual rationality included). Structures
//! whose negotiation fails can never arise and are not part of the game.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::leaseopt::canonical_terms;
use crate::topology::{FueId, MueId, PlayerId};
use crate::Real;

use super::{evaluate_partition, group_prefers, Coalition, EvalContext, Outcome, Partition};

/// Hard cap on exhaustive enumeration (the partition count is a Bell
/// number).
pub const ORACLE_PLAYER_CAP: usize = 8;

/// One undominated outcome, with the per-coalition game values attached.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleOutcome {
    pub outcome: Outcome,
    /// Coalitional game value of each cooperative coalition (payoff sums).
    pub coalition_values: Vec<Real>,
}

type StructKey = Vec<(Option<FueId>, Vec<MueId>)>;

struct Oracle<'a> {
    ctx: &'a EvalContext<'a>,
    baseline: BTreeMap<PlayerId, Real>,
    eval_memo: BTreeMap<StructKey, Option<Outcome>>,
    omega_memo: BTreeMap<(Vec<PlayerId>, StructKey), Vec<StructKey>>,
    core_memo: BTreeMap<(Vec<PlayerId>, StructKey), Vec<StructKey>>,
}

impl<'a> Oracle<'a> {
    fn canonical(&mut self, structure: &Partition) -> Option<Outcome> {
        let key = structure.structure_key();
        if let Some(hit) = self.eval_memo.get(&key) {
            return hit.clone();
        }
        let value = match canonical_terms(self.ctx, structure, &self.baseline) {
            Ok(with_terms) => evaluate_partition(self.ctx, &with_terms).ok(),
            Err(Error::InfeasibleLease(_)) => None,
            Err(_) => None,
        };
        self.eval_memo.insert(key, value.clone());
        value
    }

    fn structure_from_key(key: &StructKey) -> Partition {
        Partition {
            coalitions: key
                .iter()
                .map(|(fue, mues)| Coalition {
                    relay_fue: *fue,
                    mue_ids: mues.iter().copied().collect(),
                    lease: BTreeMap::new(),
                })
                .collect(),
        }
    }

    /// All shape-valid coalitions over `players` that contain the first
    /// player. FUEs host any D2D-reachable subset of the listed MUEs; a
    /// leading MUE can only stand alone (FUEs order before MUEs, so a
    /// cooperative coalition is always generated at its FUE).
    fn coalitions_with_head(&self, players: &[PlayerId]) -> Vec<Coalition> {
        let head = players[0];
        match head {
            PlayerId::Mue(m) => vec![Coalition::singleton_mue(m)],
            PlayerId::Fue(l) => {
                let reachable: Vec<MueId> = players[1..]
                    .iter()
                    .filter_map(|p| match p {
                        PlayerId::Mue(m) if self.ctx.d2d_in_range(*m, l) => Some(*m),
                        _ => None,
                    })
                    .collect();
                let mut out = Vec::with_capacity(1 << reachable.len());
                for mask in 0u32..(1 << reachable.len()) {
                    let members = reachable
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, m)| *m);
                    out.push(Coalition::cooperative(l, members));
                }
                out
            }
        }
    }

    /// All shape-valid partitions of `players`.
    fn partitions_of(&self, players: &[PlayerId]) -> Vec<Vec<Coalition>> {
        if players.is_empty() {
            return vec![Vec::new()];
        }
        let mut result = Vec::new();
        for c in self.coalitions_with_head(players) {
            let rest: Vec<PlayerId> = players
                .iter()
                .copied()
                .filter(|p| !c.contains(*p))
                .collect();
            for mut tail in self.partitions_of(&rest) {
                tail.insert(0, c.clone());
                result.push(tail);
            }
        }
        result
    }

    /// All deviating coalitions available inside `players`: every MUE as a
    /// singleton, every FUE with any reachable member subset.
    fn deviations_of(&self, players: &[PlayerId]) -> Vec<Coalition> {
        let mut out = Vec::new();
        for (i, p) in players.iter().enumerate() {
            match p {
                PlayerId::Mue(m) => out.push(Coalition::singleton_mue(*m)),
                PlayerId::Fue(_) => {
                    let mut sub = players.to_vec();
                    sub.swap(0, i);
                    out.extend(self.coalitions_with_head(&sub));
                }
            }
        }
        out
    }

    /// Feasible outcomes of the residual game over `players`, the outside
    /// arrangement held fixed.
    fn omega(&mut self, players: &[PlayerId], outside: &Partition) -> Vec<StructKey> {
        let memo_key = (players.to_vec(), outside.structure_key());
        if let Some(hit) = self.omega_memo.get(&memo_key) {
            return hit.clone();
        }
        let mut keys = Vec::new();
        for residual in self.partitions_of(players) {
            let mut combined = outside.clone();
            combined.coalitions.extend(residual);
            if self.canonical(&combined).is_some() {
                keys.push(combined.structure_key());
            }
        }
        self.omega_memo.insert(memo_key, keys.clone());
        keys
    }

    /// Residual core: undominated outcomes of the residual game.
    fn core(&mut self, players: &[PlayerId], outside: &Partition) -> Vec<StructKey> {
        let memo_key = (players.to_vec(), outside.structure_key());
        if let Some(hit) = self.core_memo.get(&memo_key) {
            return hit.clone();
        }
        let all = self.omega(players, outside);
        let mut undominated = Vec::new();
        'outcomes: for key in &all {
            let x = self
                .canonical(&Self::structure_from_key(key))
                .expect("memoized feasible outcome");
            for s in self.deviations_of(players) {
                if self.dominates_via(&s, players, outside, &x) {
                    continue 'outcomes;
                }
            }
            undominated.push(key.clone());
        }
        self.core_memo.insert(memo_key, undominated.clone());
        undominated
    }

    /// Does some reaction of the residual players make coalition `s`
    /// prefer deviating from outcome `x`?
    fn dominates_via(
        &mut self,
        s: &Coalition,
        players: &[PlayerId],
        outside: &Partition,
        x: &Outcome,
    ) -> bool {
        let group: Vec<PlayerId> = s.players().collect();
        let rest: Vec<PlayerId> = players
            .iter()
            .copied()
            .filter(|p| !s.contains(*p))
            .collect();
        let mut outside_with_s = outside.clone();
        outside_with_s.coalitions.push(s.clone());
        let assumption = {
            let c = self.core(&rest, &outside_with_s);
            if c.is_empty() {
                self.omega(&rest, &outside_with_s)
            } else {
                c
            }
        };
        for key in assumption {
            let y = self
                .canonical(&Self::structure_from_key(&key))
                .expect("memoized feasible outcome");
            if group_prefers(&group, &y.payoffs, &x.payoffs) {
                return true;
            }
        }
        false
    }
}

/// Exact recursive core of the instance. Refuses player counts above
/// `max_players` (itself capped at [`ORACLE_PLAYER_CAP`]).
pub fn recursive_core_oracle(
    ctx: &EvalContext,
    max_players: usize,
) -> Result<Vec<OracleOutcome>> {
    let cap = max_players.min(ORACLE_PLAYER_CAP);
    let n = ctx.topology.n_players();
    if n > cap {
        return Err(Error::OracleTooLarge(n, cap));
    }
    let baseline = crate::leaseopt::baseline_payoffs(ctx)?;
    let mut oracle = Oracle {
        ctx,
        baseline,
        eval_memo: BTreeMap::new(),
        omega_memo: BTreeMap::new(),
        core_memo: BTreeMap::new(),
    };
    let players: Vec<PlayerId> = ctx.topology.players().collect();
    let empty = Partition {
        coalitions: Vec::new(),
    };
    let core_keys = oracle.core(&players, &empty);
    let mut out = Vec::with_capacity(core_keys.len());
    for key in core_keys {
        let outcome = oracle
            .canonical(&Oracle::structure_from_key(&key))
            .expect("memoized feasible outcome");
        let coalition_values = outcome
            .partition
            .coalitions
            .iter()
            .map(|c| {
                let xs: Vec<Real> = c.players().map(|p| outcome.value(p)).collect();
                crate::traffic::coalition_value(&xs, c.is_cooperative())
            })
            .collect();
        out.push(OracleOutcome {
            outcome,
            coalition_values,
        });
    }
    Ok(out)
}
