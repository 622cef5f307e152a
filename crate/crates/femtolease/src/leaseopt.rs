//! Per-coalition lease negotiation: the granted superframe fraction `alpha`
//! per serviced MUE, its relay/reward split `beta`, and the FUE transmit
//! powers on the two subslots.
//!
//! The objective has min{} kinks and an infinite-delay cliff, so the search
//! is a nested grid: for a candidate `alpha` the FUE picks `(beta, t)`
//! maximizing its own payoff subject to every member strictly beating its
//! veto floor; the MUE then picks the `alpha` maximizing its own payoff
//! among the candidates that also leave the FUE strictly better off.
//! Power candidates are parameterized on the budget line
//! `beta P_R + (1-beta) P_T = p_max (1 - margin)`, which satisfies the
//! power constraint strictly by construction.

use std::collections::BTreeMap;

use crate::coalition::{
    evaluate_partition, Coalition, CoalitionEval, EvalContext, LeaseTerms, Partition, Schedule,
};
use crate::error::{Error, Result};
use crate::topology::{FueId, MueId, PlayerId};
use crate::Real;

/// Strict slack keeping the power budget inequality strict.
const BUDGET_MARGIN: Real = 1e-6;

/// Strict per-player veto levels: a candidate lease is feasible only when
/// every coalition player's payoff strictly exceeds its floor.
pub type Floors = BTreeMap<PlayerId, Real>;

/// A negotiated coalition: terms plus its evaluation in the negotiation
/// context.
#[derive(Debug, Clone)]
pub struct NegotiatedCoalition {
    pub coalition: Coalition,
    pub eval: CoalitionEval,
}

/// Candidate grids derived from the game parameters.
struct Grids {
    alphas: Vec<Real>,
    betas: Vec<Real>,
    splits: Vec<Real>,
}

fn grids(ctx: &EvalContext) -> Grids {
    let p = ctx.params;
    let n_alpha = (1.0 / p.alpha_step).round().max(1.0) as usize;
    let alphas = (1..=n_alpha).map(|k| k as Real * p.alpha_step).collect();
    let n_beta = (1.0 / p.beta_step).round().max(1.0) as usize;
    let betas = (1..=n_beta).map(|k| k as Real * p.beta_step).collect();
    let points = p.power_split_points.max(2) as usize;
    let splits = (1..points).map(|i| i as Real / points as Real).collect();
    Grids {
        alphas,
        betas,
        splits,
    }
}

fn terms_for(p_max_w: Real, alpha: Real, beta: Real, t: Real) -> LeaseTerms {
    let budget = p_max_w * (1.0 - BUDGET_MARGIN);
    let own_power_w = if beta >= 1.0 {
        0.0
    } else {
        (1.0 - t) * budget / (1.0 - beta)
    };
    LeaseTerms {
        alpha,
        beta,
        relay_power_w: t * budget / beta,
        own_power_w,
    }
}

/// Negotiation environment: the interference context with this coalition's
/// players still non-cooperative, plus the veto floors.
pub struct NegotiationEnv<'a> {
    pub ctx: &'a EvalContext<'a>,
    pub schedule: &'a Schedule,
    pub floors: &'a Floors,
}

impl<'a> NegotiationEnv<'a> {
    fn floor(&self, p: PlayerId) -> Real {
        self.floors.get(&p).copied().unwrap_or(0.0)
    }
}

/// Best `(beta, t)` for one member's fixed alpha, holding other members'
/// terms: FUE-optimal among candidates where every player strictly beats
/// its floor. Deterministic: first strict maximum wins on the ascending
/// grid.
fn best_terms_for_alpha(
    env: &NegotiationEnv,
    working: &mut Coalition,
    member: MueId,
    alpha: Real,
) -> Option<(LeaseTerms, CoalitionEval)> {
    let fue = working.relay_fue.expect("relay present");
    let g = grids(env.ctx);
    let p_max = env.ctx.params.p_max_w;
    let mut best: Option<(LeaseTerms, CoalitionEval)> = None;
    let mut best_xl = Real::NEG_INFINITY;
    for &beta in &g.betas {
        for &t in &g.splits {
            let terms = terms_for(p_max, alpha, beta, t);
            working.lease.insert(member, terms);
            let ev = match crate::coalition::evaluate_coalition(env.ctx, env.schedule, working) {
                Ok(ev) => ev,
                Err(_) => continue,
            };
            if ev.fue_payoff.value <= env.floor(PlayerId::Fue(fue)) {
                continue;
            }
            let vetoed = ev
                .members
                .iter()
                .any(|(m, me)| me.payoff.value <= env.floor(PlayerId::Mue(*m)));
            if vetoed {
                continue;
            }
            if ev.fue_payoff.value > best_xl {
                best_xl = ev.fue_payoff.value;
                best = Some((terms, ev));
            }
        }
    }
    working.lease.remove(&member);
    best
}

/// Quick upper bound on a member's achievable payoff at a given alpha: the
/// D2D share caps the rate and the first hop floors the delay.
fn member_upper_bound(
    env: &NegotiationEnv,
    first_hop_rate: Real,
    first_hop_arrival: Real,
    alpha: Real,
) -> Real {
    let rate_cap = (1.0 - alpha) * first_hop_rate;
    let delay_floor = crate::traffic::md1_delay(first_hop_arrival, first_hop_rate);
    if first_hop_arrival <= 0.0 || delay_floor.is_infinite() || delay_floor <= 0.0 {
        return 0.0;
    }
    crate::traffic::power_payoff_value(rate_cap, delay_floor, env.ctx.params.delta)
}

/// Negotiate a member's superframe grant: grid over alpha, inner
/// `(beta, t)` optimization, member-optimal alpha among candidates that
/// leave the FUE strictly above its floor. Returns the chosen terms and the
/// coalition evaluation at them.
fn negotiate_member(
    env: &NegotiationEnv,
    working: &mut Coalition,
    member: MueId,
) -> Option<(LeaseTerms, CoalitionEval)> {
    if !env.ctx.d2d_in_range(member, working.relay_fue.expect("relay")) {
        return None;
    }
    let fue = working.relay_fue.unwrap();
    let g_d2d = env.ctx.gains.mue_fue(member, fue);
    let p_d2d = env.ctx.d2d_power(member, fue);
    let noise = env.ctx.params.noise_w();
    let first_hop_rate =
        crate::traffic::shannon_rate(env.ctx.params.bandwidth(), g_d2d * p_d2d / noise);
    let pt = crate::channel::success_probability_closed_form(
        g_d2d * p_d2d,
        0.0,
        noise,
        env.ctx.params.gamma_mue,
    );
    let first_hop_arrival = crate::traffic::effective_arrival(
        env.ctx.topology.mue(member).arrival_rate_bps,
        pt,
        env.ctx.params.max_retx,
        env.ctx.params.arrival_mode,
    );
    // Unstable first hop: the member's payoff is zero at every term.
    if first_hop_arrival >= first_hop_rate {
        return None;
    }

    let g = grids(env.ctx);
    let floor_m = env.floor(PlayerId::Mue(member));
    let mut best: Option<(LeaseTerms, CoalitionEval)> = None;
    let mut best_xm = Real::NEG_INFINITY;
    for &alpha in &g.alphas {
        if member_upper_bound(env, first_hop_rate, first_hop_arrival, alpha) <= floor_m {
            continue;
        }
        if let Some((terms, ev)) = best_terms_for_alpha(env, working, member, alpha) {
            let xm = ev.members[&member].payoff.value;
            if xm > best_xm {
                best_xm = xm;
                best = Some((terms, ev));
            }
        }
    }
    best
}

/// Spec surface: negotiate the grant of a single candidate MUE toward a
/// relay FUE, both starting from their floors. `None` means "do not
/// cooperate".
pub fn negotiate_alpha(
    env: &NegotiationEnv,
    fue: FueId,
    member: MueId,
) -> Option<NegotiatedCoalition> {
    negotiate_coalition(env, fue, &[member])
}

/// Canonical negotiation of a whole coalition: members in id order, each
/// granting its alpha via [`negotiate_alpha`]-style search with earlier
/// members' terms held. Returns `None` when any member cannot rationally
/// join.
pub fn negotiate_coalition(
    env: &NegotiationEnv,
    fue: FueId,
    members: &[MueId],
) -> Option<NegotiatedCoalition> {
    let mut working = Coalition::cooperative(fue, []);
    let mut sorted: Vec<MueId> = members.to_vec();
    sorted.sort();
    sorted.dedup();
    for m in &sorted {
        working.mue_ids.insert(*m);
        let (terms, _) = negotiate_member(env, &mut working, *m)?;
        working.lease.insert(*m, terms);
    }
    // Final full check with every member active.
    let ev = crate::coalition::evaluate_coalition(env.ctx, env.schedule, &working).ok()?;
    if ev.fue_payoff.value <= env.floor(PlayerId::Fue(fue)) {
        return None;
    }
    for (m, me) in &ev.members {
        if me.payoff.value <= env.floor(PlayerId::Mue(*m)) {
            return None;
        }
    }
    Some(NegotiatedCoalition {
        coalition: working,
        eval: ev,
    })
}

/// Spec surface: optimize `(beta, t)` per member at fixed alphas,
/// maximizing the FUE payoff under the member vetoes.
pub fn optimize_lease(
    env: &NegotiationEnv,
    fue: FueId,
    alphas: &[(MueId, Real)],
) -> Result<NegotiatedCoalition> {
    let mut working = Coalition::cooperative(fue, []);
    let mut sorted: Vec<(MueId, Real)> = alphas.to_vec();
    sorted.sort_by_key(|(m, _)| *m);
    for (m, alpha) in &sorted {
        if !(*alpha > 0.0 && *alpha <= 1.0) {
            return Err(Error::InfeasibleLease(format!(
                "alpha {alpha} outside (0, 1]"
            )));
        }
        working.mue_ids.insert(*m);
        let (terms, _) = best_terms_for_alpha(env, &mut working, *m, *alpha)
            .ok_or_else(|| Error::InfeasibleLease(format!("no feasible split for mue{}", m.0)))?;
        working.lease.insert(*m, terms);
    }
    let ev = crate::coalition::evaluate_coalition(env.ctx, env.schedule, &working)?;
    if ev.fue_payoff.value <= env.floor(PlayerId::Fue(fue)) {
        return Err(Error::InfeasibleLease("fue below floor".into()));
    }
    for (m, me) in &ev.members {
        if me.payoff.value <= env.floor(PlayerId::Mue(*m)) {
            return Err(Error::InfeasibleLease(format!("mue{} below floor", m.0)));
        }
    }
    Ok(NegotiatedCoalition {
        coalition: working,
        eval: ev,
    })
}

/// Veto floors for a coalition's players: the larger of the all-singleton
/// baseline payoff and the player's singleton payoff in the pending
/// context.
pub fn floors_for(
    ctx: &EvalContext,
    schedule_pending: &Schedule,
    baseline: &BTreeMap<PlayerId, Real>,
    players: impl Iterator<Item = PlayerId>,
) -> Floors {
    let mut floors = Floors::new();
    for p in players {
        let here = match p {
            PlayerId::Fue(l) => {
                crate::coalition::noncoop_fue_stats(ctx, schedule_pending, l, &[])
                    .payoff
                    .value
            }
            PlayerId::Mue(m) => {
                crate::coalition::noncoop_mue_stats(ctx, schedule_pending, m)
                    .payoff
                    .value
            }
        };
        let base = baseline.get(&p).copied().unwrap_or(0.0);
        floors.insert(p, here.max(base));
    }
    floors
}

/// Assign canonical lease terms to every cooperative coalition of a
/// partition structure: coalitions in lowest-member order, renegotiated for
/// up to `lease_passes` rounds until terms reach a fixed point. Fails with
/// `InfeasibleLease` when some coalition cannot form at all.
pub fn canonical_terms(
    ctx: &EvalContext,
    structure: &Partition,
    baseline: &BTreeMap<PlayerId, Real>,
) -> Result<Partition> {
    let mut part = structure.clone();
    for c in part.coalitions.iter_mut() {
        c.lease.clear();
    }
    part.sort_canonical();

    for _pass in 0..ctx.params.lease_passes {
        let mut changed = false;
        for ci in 0..part.coalitions.len() {
            let (fue, members) = match (&part.coalitions[ci].relay_fue, &part.coalitions[ci].mue_ids) {
                (Some(l), ms) if !ms.is_empty() => (*l, ms.iter().copied().collect::<Vec<_>>()),
                _ => continue,
            };
            let mut pending = part.clone();
            pending.coalitions[ci].lease.clear();
            let schedule = Schedule::build(ctx, &pending);
            let floors = floors_for(
                ctx,
                &schedule,
                baseline,
                part.coalitions[ci].players().collect::<Vec<_>>().into_iter(),
            );
            let env = NegotiationEnv {
                ctx,
                schedule: &schedule,
                floors: &floors,
            };
            let neg = negotiate_coalition(&env, fue, &members).ok_or_else(|| {
                Error::InfeasibleLease(format!(
                    "coalition around fue{} cannot form",
                    fue.0
                ))
            })?;
            if neg.coalition.lease != part.coalitions[ci].lease {
                part.coalitions[ci].lease = neg.coalition.lease;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(part)
}

/// All-singleton baseline payoff of every player, the strict reference for
/// mutual rationality.
pub fn baseline_payoffs(ctx: &EvalContext) -> Result<BTreeMap<PlayerId, Real>> {
    let outcome = evaluate_partition(ctx, &Partition::all_singletons(ctx.topology))?;
    Ok(outcome
        .payoffs
        .iter()
        .map(|(p, x)| (*p, x.value))
        .collect())
}
