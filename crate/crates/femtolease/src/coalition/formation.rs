//! Distributed coalition formation: interferer discovery, pairwise
//! negotiation sweeps, and departure checks.
//!
//! Each sweep proposes joins in a fixed deterministic order: mutual-best
//! interferer pairs first, then each FUE walking its ranked co-channel
//! interferer list, then each MUE walking its ranked nearby-FUE list. A
//! join is accepted when the joiner strictly improves on its current payoff
//! (and its floors) and no member of the hosting coalition is worse off.
//! Departures are accepted only when the leaver strictly gains. The loop
//! ends with a sweep that changes nothing.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::leaseopt::{floors_for, negotiate_coalition, NegotiationEnv};
use crate::topology::{FueId, MueId, PlayerId};
use crate::Real;

use super::{evaluate_partition, Coalition, EvalContext, Outcome, Partition, Schedule};

/// Ranked cooperation candidates from RSSI measurements.
#[derive(Debug, Clone)]
pub struct CandidateLists {
    /// Per FUE: co-channel MUEs within D2D range, strongest interferer
    /// first.
    pub fue_candidates: BTreeMap<FueId, Vec<MueId>>,
    /// Per MUE: FUEs within D2D range, strongest received signal first.
    pub mue_candidates: BTreeMap<MueId, Vec<FueId>>,
}

/// Build the ranked candidate lists. RSSI proxy: mean link gain times the
/// counterpart's transmit power. Ties break toward the lower id.
pub fn interferer_discovery(ctx: &EvalContext) -> CandidateLists {
    let mut fue_candidates = BTreeMap::new();
    for f in &ctx.topology.fues {
        let mut ranked: Vec<(Real, MueId)> = ctx
            .topology
            .mues
            .iter()
            .filter(|m| m.subchannel == f.subchannel && ctx.d2d_in_range(m.id, f.id))
            .map(|m| (ctx.gains.mue_fue(m.id, f.id) * m.tx_power_w, m.id))
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        fue_candidates.insert(f.id, ranked.into_iter().map(|(_, m)| m).collect());
    }
    let mut mue_candidates = BTreeMap::new();
    for m in &ctx.topology.mues {
        let mut ranked: Vec<(Real, FueId)> = ctx
            .topology
            .fues
            .iter()
            .filter(|f| ctx.d2d_in_range(m.id, f.id))
            .map(|f| (ctx.gains.mue_fue(m.id, f.id) * f.tx_power_w, f.id))
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        mue_candidates.insert(m.id, ranked.into_iter().map(|(_, f)| f).collect());
    }
    CandidateLists {
        fue_candidates,
        mue_candidates,
    }
}

fn coalition_index(partition: &Partition, p: PlayerId) -> usize {
    partition
        .coalition_of(p)
        .expect("player present in partition")
}

/// Trial join of `m` into the coalition led by `f`. Returns the applied
/// partition and outcome when acceptable.
pub(super) fn evaluate_join(
    ctx: &EvalContext,
    baseline: &BTreeMap<PlayerId, Real>,
    partition: &Partition,
    outcome: &Outcome,
    m: MueId,
    f: FueId,
) -> Result<Option<(Partition, Outcome)>> {
    if !ctx.d2d_in_range(m, f) {
        return Ok(None);
    }
    let target_idx = coalition_index(partition, PlayerId::Fue(f));
    if partition.coalitions[target_idx].contains(PlayerId::Mue(m)) {
        return Ok(None);
    }

    // Trial structure: m moves out of its coalition into the target, whose
    // lease is renegotiated from scratch.
    let mut trial = partition.clone();
    let old_idx = coalition_index(&trial, PlayerId::Mue(m));
    trial.coalitions[old_idx].mue_ids.remove(&m);
    trial.coalitions[old_idx].lease.remove(&m);
    if trial.coalitions[old_idx].is_empty() {
        trial.coalitions.swap_remove(old_idx);
    }
    let target_idx = coalition_index(&trial, PlayerId::Fue(f));
    trial.coalitions[target_idx].mue_ids.insert(m);
    trial.coalitions[target_idx].lease.clear();

    let members: Vec<MueId> = trial.coalitions[target_idx].mue_ids.iter().copied().collect();
    let pending_schedule = Schedule::build(ctx, &trial);
    let mut floors = floors_for(
        ctx,
        &pending_schedule,
        baseline,
        trial.coalitions[target_idx].players().collect::<Vec<_>>().into_iter(),
    );
    // The joiner must clear its current payoff by the switching margin.
    let current_m = outcome.value(PlayerId::Mue(m)) * (1.0 + ctx.params.improvement_margin);
    floors
        .entry(PlayerId::Mue(m))
        .and_modify(|v| *v = v.max(current_m))
        .or_insert(current_m);

    let env = NegotiationEnv {
        ctx,
        schedule: &pending_schedule,
        floors: &floors,
    };
    let neg = match negotiate_coalition(&env, f, &members) {
        Some(neg) => neg,
        None => return Ok(None),
    };

    // Pareto rule against the current outcome: hosting members (FUE
    // included) must not lose; the joiner improved strictly via its floor.
    if neg.eval.fue_payoff.value < outcome.value(PlayerId::Fue(f)) {
        return Ok(None);
    }
    for (other, me) in &neg.eval.members {
        if *other != m && me.payoff.value < outcome.value(PlayerId::Mue(*other)) {
            return Ok(None);
        }
    }

    trial.coalitions[target_idx].lease = neg.coalition.lease;
    let new_outcome = evaluate_partition(ctx, &trial)?;
    Ok(Some((trial, new_outcome)))
}

/// Trial departure of a cooperative member to a singleton. Acceptable only
/// if the leaver strictly gains; harm to the abandoned coalition does not
/// block it.
pub(super) fn evaluate_leave(
    ctx: &EvalContext,
    partition: &Partition,
    outcome: &Outcome,
    m: MueId,
) -> Result<Option<(Partition, Outcome)>> {
    let idx = coalition_index(partition, PlayerId::Mue(m));
    if partition.coalitions[idx].relay_fue.is_none() {
        return Ok(None);
    }
    let mut trial = partition.clone();
    trial.coalitions[idx].mue_ids.remove(&m);
    trial.coalitions[idx].lease.remove(&m);
    trial.coalitions.push(Coalition::singleton_mue(m));
    let new_outcome = evaluate_partition(ctx, &trial)?;
    let bar = outcome.value(PlayerId::Mue(m)) * (1.0 + ctx.params.improvement_margin);
    if new_outcome.value(PlayerId::Mue(m)) > bar {
        Ok(Some((trial, new_outcome)))
    } else {
        Ok(None)
    }
}

/// Trial disband by a relay FUE: every player of the coalition reverts to a
/// singleton. Acceptable only if the FUE strictly gains.
pub(super) fn evaluate_disband(
    ctx: &EvalContext,
    partition: &Partition,
    outcome: &Outcome,
    f: FueId,
) -> Result<Option<(Partition, Outcome)>> {
    let idx = coalition_index(partition, PlayerId::Fue(f));
    if !partition.coalitions[idx].is_cooperative() {
        return Ok(None);
    }
    let mut trial = partition.clone();
    let members: Vec<MueId> = trial.coalitions[idx].mue_ids.iter().copied().collect();
    trial.coalitions[idx] = Coalition::singleton_fue(f);
    for m in members {
        trial.coalitions.push(Coalition::singleton_mue(m));
    }
    let new_outcome = evaluate_partition(ctx, &trial)?;
    let bar = outcome.value(PlayerId::Fue(f)) * (1.0 + ctx.params.improvement_margin);
    if new_outcome.value(PlayerId::Fue(f)) > bar {
        Ok(Some((trial, new_outcome)))
    } else {
        Ok(None)
    }
}

/// Renegotiate every cooperative coalition in place; dissolve any that can
/// no longer form under the drifted interference context. Returns whether
/// anything changed.
fn stabilize_terms(
    ctx: &EvalContext,
    baseline: &BTreeMap<PlayerId, Real>,
    partition: &mut Partition,
) -> Result<bool> {
    let mut changed = false;
    partition.sort_canonical();
    let mut ci = 0;
    while ci < partition.coalitions.len() {
        let (fue, members) = match (
            partition.coalitions[ci].relay_fue,
            partition.coalitions[ci].mue_ids.len(),
        ) {
            (Some(l), n) if n > 0 => (
                l,
                partition.coalitions[ci]
                    .mue_ids
                    .iter()
                    .copied()
                    .collect::<Vec<_>>(),
            ),
            _ => {
                ci += 1;
                continue;
            }
        };
        let mut pending = partition.clone();
        pending.coalitions[ci].lease.clear();
        let schedule = Schedule::build(ctx, &pending);
        let floors = floors_for(
            ctx,
            &schedule,
            baseline,
            partition.coalitions[ci].players().collect::<Vec<_>>().into_iter(),
        );
        let env = NegotiationEnv {
            ctx,
            schedule: &schedule,
            floors: &floors,
        };
        match negotiate_coalition(&env, fue, &members) {
            Some(neg) => {
                if neg.coalition.lease != partition.coalitions[ci].lease {
                    partition.coalitions[ci].lease = neg.coalition.lease;
                    changed = true;
                }
                ci += 1;
            }
            None => {
                // Coalition no longer viable: dissolve to singletons.
                partition.coalitions[ci] = Coalition::singleton_fue(fue);
                for m in members {
                    partition.coalitions.push(Coalition::singleton_mue(m));
                }
                partition.sort_canonical();
                changed = true;
            }
        }
    }
    Ok(changed)
}

/// Result of the formation run.
#[derive(Debug, Clone)]
pub struct FormationResult {
    pub partition: Partition,
    pub outcome: Outcome,
    /// Negotiation sweeps executed, the final no-change sweep included.
    pub iterations: u32,
    /// All-singleton baseline payoffs on this instance.
    pub baseline: BTreeMap<PlayerId, Real>,
}

/// Run the distributed formation to a partition no sweep can improve.
pub fn form_coalitions(ctx: &EvalContext) -> Result<FormationResult> {
    let baseline = crate::leaseopt::baseline_payoffs(ctx)?;
    let lists = interferer_discovery(ctx);
    let mut partition = Partition::all_singletons(ctx.topology);
    let mut outcome = evaluate_partition(ctx, &partition)?;

    let max_sweeps = (ctx.topology.n_players() as u32 * 8).max(16);
    let mut sweeps = 0u32;
    loop {
        sweeps += 1;
        let mut changed = false;
        let mut tried: BTreeSet<(MueId, FueId)> = BTreeSet::new();

        // Mutual-best interferer pairs form first.
        for f in ctx.topology.fues.iter().map(|f| f.id) {
            let target_idx = coalition_index(&partition, PlayerId::Fue(f));
            let top_m = lists.fue_candidates[&f]
                .iter()
                .find(|m| !partition.coalitions[target_idx].contains(PlayerId::Mue(**m)))
                .copied();
            let Some(m) = top_m else { continue };
            let current_relay = partition.coalitions[coalition_index(&partition, PlayerId::Mue(m))]
                .relay_fue;
            let top_f = lists.mue_candidates[&m]
                .iter()
                .find(|g| current_relay != Some(**g))
                .copied();
            if top_f == Some(f) && tried.insert((m, f)) {
                if let Some((p, o)) = evaluate_join(ctx, &baseline, &partition, &outcome, m, f)? {
                    partition = p;
                    outcome = o;
                    changed = true;
                    if std::env::var("FEMTOLEASE_TRACE").is_ok() {
                        eprintln!("sweep {sweeps}: mutual join mue{} -> fue{}", m.0, f.0);
                    }
                }
            }
        }

        // Each FUE walks its interferer list until an acceptance.
        for f in ctx.topology.fues.iter().map(|f| f.id) {
            for m in &lists.fue_candidates[&f] {
                let target_idx = coalition_index(&partition, PlayerId::Fue(f));
                if partition.coalitions[target_idx].contains(PlayerId::Mue(*m)) {
                    continue;
                }
                if !tried.insert((*m, f)) {
                    continue;
                }
                if let Some((p, o)) = evaluate_join(ctx, &baseline, &partition, &outcome, *m, f)? {
                    partition = p;
                    outcome = o;
                    changed = true;
                    if std::env::var("FEMTOLEASE_TRACE").is_ok() {
                        eprintln!("sweep {sweeps}: fue-walk join mue{} -> fue{}", m.0, f.0);
                    }
                    break;
                }
            }
        }

        // Each MUE walks its nearby-FUE list until an acceptance.
        for m in ctx.topology.mues.iter().map(|m| m.id) {
            for f in &lists.mue_candidates[&m] {
                let relay = partition.coalitions[coalition_index(&partition, PlayerId::Mue(m))]
                    .relay_fue;
                if relay == Some(*f) {
                    continue;
                }
                if !tried.insert((m, *f)) {
                    continue;
                }
                if let Some((p, o)) = evaluate_join(ctx, &baseline, &partition, &outcome, m, *f)? {
                    partition = p;
                    outcome = o;
                    changed = true;
                    if std::env::var("FEMTOLEASE_TRACE").is_ok() {
                        eprintln!(
                            "sweep {sweeps}: mue-walk join mue{} -> fue{} (value {:.6e}, fue {:.6e})",
                            m.0, f.0,
                            outcome.value(PlayerId::Mue(m)),
                            outcome.value(PlayerId::Fue(*f))
                        );
                    }
                    break;
                }
            }
        }

        // Departures: members first, then relay disbands.
        for m in ctx.topology.mues.iter().map(|m| m.id) {
            if let Some((p, o)) = evaluate_leave(ctx, &partition, &outcome, m)? {
                partition = p;
                outcome = o;
                changed = true;
                if std::env::var("FEMTOLEASE_TRACE").is_ok() {
                    eprintln!("sweep {sweeps}: leave mue{}", m.0);
                }
            }
        }
        for f in ctx.topology.fues.iter().map(|f| f.id) {
            if let Some((p, o)) = evaluate_disband(ctx, &partition, &outcome, f)? {
                partition = p;
                outcome = o;
                changed = true;
            }
        }

        if !changed {
            // Quiesce lease terms under the final interference context.
            if stabilize_terms(ctx, &baseline, &mut partition)? {
                outcome = evaluate_partition(ctx, &partition)?;
                changed = true;
                if std::env::var("FEMTOLEASE_TRACE").is_ok() {
                    eprintln!("sweep {sweeps}: terms stabilized");
                }
            }
        }
        if !changed || sweeps >= max_sweeps {
            break;
        }
    }

    partition.sort_canonical();
    outcome = evaluate_partition(ctx, &partition)?;
    Ok(FormationResult {
        partition,
        outcome,
        iterations: sweeps,
        baseline,
    })
}
