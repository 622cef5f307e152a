//! Partition evaluation: transmission schedule, interference bookkeeping,
//! and per-player payoffs.
//!
//! The schedule renders the superframe split as duty-cycled transmissions.
//! A cooperative member transmits on its own subchannel toward its relay
//! for a `(1-alpha)` fraction at D2D power; its relay FUE occupies the
//! remaining `alpha` fraction, split `beta` / `(1-beta)` between forwarding
//! (at `P_R`) and its own traffic (at `P_T`). Receivers see the cross-tier
//! interferer classes only: FAPs sum MUE transmissions, the MBS sums FUE
//! transmissions, and the D2D hop is interference-free.
//!
//! Success probabilities inside the game engine always use the closed form
//! so that repeated evaluation of a candidate is reproducible; the
//! Monte-Carlo fading mode backs the standalone outage operation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{success_probability_closed_form, ChannelParams, LinkGains};
use crate::config::{ArrivalMode, RelayQueueMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::{FapId, FueId, MueId, NetworkTopology, PlayerId};
use crate::traffic::{
    effective_arrival, md1_delay, power_payoff_value, relay_backlog_arrival, relay_member_rate,
    shannon_rate, Payoff,
};
use crate::Real;

use super::{Coalition, Outcome, Partition};

/// Game-level parameters derived from the scenario config.
#[derive(Debug, Clone)]
pub struct GameParams {
    pub channel: ChannelParams,
    /// Linear SINR targets.
    pub gamma_mue: Real,
    pub gamma_fue: Real,
    /// Linear mean-SNR target for the D2D power choice.
    pub d2d_target_snr: Real,
    pub d2d_range_m: Real,
    pub p_max_w: Real,
    pub max_retx: u32,
    pub arrival_mode: ArrivalMode,
    pub relay_queue_mode: RelayQueueMode,
    pub delta: Real,
    pub alpha_step: Real,
    pub beta_step: Real,
    pub power_split_points: u32,
    pub lease_passes: u32,
    pub improvement_margin: Real,
}

impl GameParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        GameParams {
            channel: ChannelParams::from_config(cfg),
            gamma_mue: cfg.radio.gamma_mue_db.db_to_linear(),
            gamma_fue: cfg.radio.gamma_fue_db.db_to_linear(),
            d2d_target_snr: cfg.radio.d2d_target_snr_db.db_to_linear(),
            d2d_range_m: cfg.radio.d2d_range_m,
            p_max_w: cfg.p_max_watts(),
            max_retx: cfg.traffic.max_retx,
            arrival_mode: cfg.traffic.arrival_mode,
            relay_queue_mode: cfg.traffic.relay_queue_mode,
            delta: cfg.game.delta,
            alpha_step: cfg.game.alpha_grid_step,
            beta_step: cfg.game.beta_grid_step,
            power_split_points: cfg.game.power_split_points,
            lease_passes: cfg.game.lease_passes,
            improvement_margin: cfg.game.improvement_margin,
        }
    }

    pub fn noise_w(&self) -> Real {
        self.channel.noise_w
    }

    pub fn bandwidth(&self) -> Real {
        self.channel.bandwidth_hz
    }
}

/// Borrowed bundle passed through every evaluation.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub topology: &'a NetworkTopology,
    pub gains: &'a LinkGains,
    pub params: &'a GameParams,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        topology: &'a NetworkTopology,
        gains: &'a LinkGains,
        params: &'a GameParams,
    ) -> Self {
        EvalContext {
            topology,
            gains,
            params,
        }
    }

    /// D2D transmit power of MUE `m` toward FUE `l`: the power reaching the
    /// mean-SNR target, capped at P_max.
    pub fn d2d_power(&self, m: MueId, l: FueId) -> Real {
        let g = self.gains.mue_fue(m, l);
        if g <= 0.0 {
            return self.params.p_max_w;
        }
        (self.params.d2d_target_snr * self.params.noise_w() / g).min(self.params.p_max_w)
    }

    pub fn d2d_in_range(&self, m: MueId, l: FueId) -> bool {
        self.topology
            .mue(m)
            .position
            .distance(&self.topology.fue(l).position)
            <= self.params.d2d_range_m
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MueTx {
    pub mue: MueId,
    pub power_w: Real,
    pub duty: Real,
}

#[derive(Debug, Clone, Copy)]
pub struct FueTx {
    pub fue: FueId,
    pub power_w: Real,
    pub duty: Real,
}

/// Duty-cycled transmissions per subchannel under one partition.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    mue_tx: BTreeMap<u32, Vec<MueTx>>,
    fue_tx: BTreeMap<u32, Vec<FueTx>>,
}

impl Schedule {
    /// Build the schedule for a partition. Transmissions are emitted in
    /// player-id order so interference sums are reproducible bit-for-bit.
    pub fn build(ctx: &EvalContext, partition: &Partition) -> Schedule {
        let topology = ctx.topology;
        // mue -> serving relay and terms; members without agreed terms are
        // still plain singletons (their coalition is pending).
        let mut relay_of: Vec<Option<(FueId, super::LeaseTerms)>> =
            vec![None; topology.mues.len()];
        // fue -> leased members (to detect a leased-over native slot)
        let mut fue_members: Vec<Vec<MueId>> = vec![Vec::new(); topology.fues.len()];
        for c in &partition.coalitions {
            if let Some(l) = c.relay_fue {
                for m in &c.mue_ids {
                    if let Some(terms) = c.lease.get(m) {
                        relay_of[m.0 as usize] = Some((l, *terms));
                        fue_members[l.0 as usize].push(*m);
                    }
                }
            }
        }

        let mut schedule = Schedule::default();
        for f in &topology.fues {
            let members = &fue_members[f.id.0 as usize];
            let native_leased = members
                .iter()
                .any(|m| topology.mue(*m).subchannel == f.subchannel);
            if !native_leased {
                schedule.fue_tx.entry(f.subchannel).or_default().push(FueTx {
                    fue: f.id,
                    power_w: f.tx_power_w,
                    duty: 1.0,
                });
            }
            let mut sorted = members.clone();
            sorted.sort();
            for m in sorted {
                let (_, terms) = relay_of[m.0 as usize].expect("member has relay");
                let k = topology.mue(m).subchannel;
                let e = schedule.fue_tx.entry(k).or_default();
                if terms.alpha * terms.beta > 0.0 {
                    e.push(FueTx {
                        fue: f.id,
                        power_w: terms.relay_power_w,
                        duty: terms.alpha * terms.beta,
                    });
                }
                if terms.alpha * (1.0 - terms.beta) > 0.0 {
                    e.push(FueTx {
                        fue: f.id,
                        power_w: terms.own_power_w,
                        duty: terms.alpha * (1.0 - terms.beta),
                    });
                }
            }
        }
        for m in &topology.mues {
            match relay_of[m.id.0 as usize] {
                None => schedule.mue_tx.entry(m.subchannel).or_default().push(MueTx {
                    mue: m.id,
                    power_w: m.tx_power_w,
                    duty: 1.0,
                }),
                Some((l, terms)) => {
                    schedule.mue_tx.entry(m.subchannel).or_default().push(MueTx {
                        mue: m.id,
                        power_w: ctx.d2d_power(m.id, l),
                        duty: 1.0 - terms.alpha,
                    })
                }
            }
        }
        schedule
    }

    /// MUE interference received at a FAP on one subchannel, excluding the
    /// time-separated transmissions of `exclude_mues` (the receiver's own
    /// coalition).
    pub fn interference_at_fap(
        &self,
        ctx: &EvalContext,
        fap: FapId,
        subchannel: u32,
        exclude_mues: &[MueId],
    ) -> Real {
        let mut total = 0.0;
        if let Some(txs) = self.mue_tx.get(&subchannel) {
            for tx in txs {
                if exclude_mues.contains(&tx.mue) {
                    continue;
                }
                total += ctx.gains.mue_fap(tx.mue, fap) * tx.power_w * tx.duty;
            }
        }
        total
    }

    /// FUE interference received at the MBS on one subchannel.
    pub fn interference_at_mbs(&self, ctx: &EvalContext, subchannel: u32) -> Real {
        let mut total = 0.0;
        if let Some(txs) = self.fue_tx.get(&subchannel) {
            for tx in txs {
                total += ctx.gains.fue_mbs(tx.fue) * tx.power_w * tx.duty;
            }
        }
        total
    }
}

/// Link statistics for one non-cooperative (singleton) player.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlayerStats {
    pub rate_bps: Real,
    pub success_prob: Real,
    pub arrival_bps: Real,
    pub delay: Real,
    pub payoff: Payoff,
}

fn payoff_from(rate: Real, arrival: Real, delay_if_live: Real, delta: Real) -> (Real, Payoff) {
    // A link that delivers nothing is dead: its payoff is zero rather than
    // the unbounded value the empty-queue delay would suggest.
    let delay = if arrival <= 0.0 {
        Real::INFINITY
    } else {
        delay_if_live
    };
    let value = power_payoff_value(rate, delay, delta);
    (
        delay,
        Payoff {
            value,
            rate_bps: rate,
            delay,
            delta,
        },
    )
}

/// Uplink service rate of a non-cooperative MUE under the schedule.
pub fn noncoop_rate(ctx: &EvalContext, schedule: &Schedule, player: PlayerId) -> Real {
    match player {
        PlayerId::Mue(m) => noncoop_mue_stats(ctx, schedule, m).rate_bps,
        PlayerId::Fue(l) => noncoop_fue_stats(ctx, schedule, l, &[]).rate_bps,
    }
}

/// Non-cooperative MUE: MBS uplink with co-channel FUE interference.
pub fn noncoop_mue_stats(ctx: &EvalContext, schedule: &Schedule, m: MueId) -> PlayerStats {
    let p = ctx.params;
    let mue = ctx.topology.mue(m);
    let signal = ctx.gains.mue_mbs(m) * mue.tx_power_w;
    let interference = schedule.interference_at_mbs(ctx, mue.subchannel);
    let rate = shannon_rate(p.bandwidth(), signal / (interference + p.noise_w()));
    let pt = success_probability_closed_form(signal, interference, p.noise_w(), p.gamma_mue);
    let arrival = effective_arrival(mue.arrival_rate_bps, pt, p.max_retx, p.arrival_mode);
    let (delay, payoff) = payoff_from(rate, arrival, md1_delay(arrival, rate), p.delta);
    PlayerStats {
        rate_bps: rate,
        success_prob: pt,
        arrival_bps: arrival,
        delay,
        payoff,
    }
}

/// Non-cooperative FUE: FAP uplink with co-channel MUE interference.
/// `exclude_mues` removes time-separated coalition members when the FUE is
/// evaluated as the relay of a coalition.
pub fn noncoop_fue_stats(
    ctx: &EvalContext,
    schedule: &Schedule,
    l: FueId,
    exclude_mues: &[MueId],
) -> PlayerStats {
    let p = ctx.params;
    let fue = ctx.topology.fue(l);
    let signal = ctx.gains.fue_own_fap(l) * fue.tx_power_w;
    let interference =
        schedule.interference_at_fap(ctx, fue.fap_id, fue.subchannel, exclude_mues);
    let rate = shannon_rate(p.bandwidth(), signal / (interference + p.noise_w()));
    let pt = success_probability_closed_form(signal, interference, p.noise_w(), p.gamma_fue);
    let arrival = effective_arrival(fue.arrival_rate_bps, pt, p.max_retx, p.arrival_mode);
    let (delay, payoff) = payoff_from(rate, arrival, md1_delay(arrival, rate), p.delta);
    PlayerStats {
        rate_bps: rate,
        success_prob: pt,
        arrival_bps: arrival,
        delay,
        payoff,
    }
}

/// Evaluation of one serviced MUE inside a coalition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MemberEval {
    /// Cooperative service rate: min of the two hops' effective rates.
    pub rate_bps: Real,
    /// D2D-hop rate at full duty.
    pub first_hop_rate_bps: Real,
    pub first_hop_arrival_bps: Real,
    pub first_hop_delay: Real,
    pub delay: Real,
    pub payoff: Payoff,
}

/// Evaluation of a cooperative coalition under a schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoalitionEval {
    pub members: BTreeMap<MueId, MemberEval>,
    pub fue_own_rate_bps: Real,
    pub fue_payoff: Payoff,
    pub fue_success_prob: Real,
    pub relay_arrival_bps: Real,
    pub relay_service_bps: Real,
    pub forward_delay: Real,
}

/// Evaluate one cooperative coalition (relay FUE plus serviced MUEs with
/// lease terms) against the interference environment in `schedule`.
pub fn evaluate_coalition(
    ctx: &EvalContext,
    schedule: &Schedule,
    coalition: &Coalition,
) -> Result<CoalitionEval> {
    let p = ctx.params;
    let l = coalition
        .relay_fue
        .ok_or_else(|| Error::InvalidPartition("cooperative coalition without FUE".into()))?;
    let fue = ctx.topology.fue(l);
    let fap = fue.fap_id;
    let exclude: Vec<MueId> = coalition.mue_ids.iter().copied().collect();

    // Success probability of the FUE-FAP link at reference power, driving
    // the retransmission weighting of all forward traffic.
    let native_interf = schedule.interference_at_fap(ctx, fap, fue.subchannel, &exclude);
    let g_fap = ctx.gains.fue_own_fap(l);
    let pt_fue = success_probability_closed_form(
        g_fap * fue.tx_power_w,
        native_interf,
        p.noise_w(),
        p.gamma_fue,
    );

    let mut members = BTreeMap::new();
    let mut member_arrivals = Vec::with_capacity(exclude.len());
    let mut relay_service = 0.0;
    let mut fue_own_rate = 0.0;
    let mut native_leased = false;

    for m in &coalition.mue_ids {
        let terms = coalition
            .lease
            .get(m)
            .ok_or_else(|| Error::InvalidPartition(format!("member mue{} has no lease", m.0)))?;
        let mue = ctx.topology.mue(*m);
        let k = mue.subchannel;
        if k == fue.subchannel {
            native_leased = true;
        }
        let g_d2d = ctx.gains.mue_fue(*m, l);
        let p_d2d = ctx.d2d_power(*m, l);
        let first_hop_rate = shannon_rate(p.bandwidth(), g_d2d * p_d2d / p.noise_w());
        let pt_d2d =
            success_probability_closed_form(g_d2d * p_d2d, 0.0, p.noise_w(), p.gamma_mue);
        let arrival = effective_arrival(mue.arrival_rate_bps, pt_d2d, p.max_retx, p.arrival_mode);
        member_arrivals.push(arrival);

        let slice_interf = schedule.interference_at_fap(ctx, fap, k, &exclude);
        let c = g_fap / (slice_interf + p.noise_w());
        let relay_rate = shannon_rate(p.bandwidth(), c * terms.relay_power_w);
        let own_rate = shannon_rate(p.bandwidth(), c * terms.own_power_w);
        relay_service += terms.alpha * terms.beta * relay_rate;
        fue_own_rate += terms.alpha * (1.0 - terms.beta) * own_rate;

        let coop_rate = relay_member_rate(terms.alpha, terms.beta, first_hop_rate, relay_rate);
        members.insert(
            *m,
            MemberEval {
                rate_bps: coop_rate,
                first_hop_rate_bps: first_hop_rate,
                first_hop_arrival_bps: arrival,
                first_hop_delay: md1_delay(arrival, first_hop_rate),
                delay: Real::INFINITY,
                payoff: Payoff {
                    value: 0.0,
                    rate_bps: coop_rate,
                    delay: Real::INFINITY,
                    delta: p.delta,
                },
            },
        );
    }

    if !native_leased {
        let native_rate = shannon_rate(
            p.bandwidth(),
            g_fap * fue.tx_power_w / (native_interf + p.noise_w()),
        );
        fue_own_rate += native_rate;
    }

    let relay_arrival = relay_backlog_arrival(&member_arrivals, pt_fue, p.max_retx, p.arrival_mode);
    let relay_service_rate = match p.relay_queue_mode {
        RelayQueueMode::RelaySlice => relay_service,
        RelayQueueMode::OwnRate => fue_own_rate,
    };
    let forward_delay = if relay_arrival <= 0.0 {
        Real::INFINITY
    } else {
        md1_delay(relay_arrival, relay_service_rate)
    };

    for (m, ev) in members.iter_mut() {
        let _ = m;
        let delay = if ev.first_hop_arrival_bps <= 0.0 {
            Real::INFINITY
        } else {
            ev.first_hop_delay + forward_delay
        };
        ev.delay = delay;
        ev.payoff = Payoff {
            value: power_payoff_value(ev.rate_bps, delay, p.delta),
            rate_bps: ev.rate_bps,
            delay,
            delta: p.delta,
        };
    }

    // The FUE's payoff pairs its own-traffic rate with its own-traffic
    // queue: the spectral reward slices raise the rate, the relay burden
    // reaches the FUE only through the members' forward queue.
    let fue_arrival = effective_arrival(fue.arrival_rate_bps, pt_fue, p.max_retx, p.arrival_mode);
    let (_fue_delay, fue_payoff) = payoff_from(
        fue_own_rate,
        fue_arrival,
        md1_delay(fue_arrival, fue_own_rate),
        p.delta,
    );

    Ok(CoalitionEval {
        members,
        fue_own_rate_bps: fue_own_rate,
        fue_payoff,
        fue_success_prob: pt_fue,
        relay_arrival_bps: relay_arrival,
        relay_service_bps: relay_service_rate,
        forward_delay,
    })
}

/// Evaluate a full partition: every player's payoff, cross-coalition
/// interference consistent with the partition.
pub fn evaluate_partition(ctx: &EvalContext, partition: &Partition) -> Result<Outcome> {
    partition.validate(ctx.topology)?;
    let schedule = Schedule::build(ctx, partition);
    let mut payoffs = BTreeMap::new();
    for c in &partition.coalitions {
        if c.is_cooperative() {
            let ev = evaluate_coalition(ctx, &schedule, c)?;
            payoffs.insert(PlayerId::Fue(c.relay_fue.unwrap()), ev.fue_payoff);
            for (m, me) in &ev.members {
                payoffs.insert(PlayerId::Mue(*m), me.payoff);
            }
        } else {
            for player in c.players() {
                let payoff = match player {
                    PlayerId::Fue(l) => noncoop_fue_stats(ctx, &schedule, l, &[]).payoff,
                    PlayerId::Mue(m) => noncoop_mue_stats(ctx, &schedule, m).payoff,
                };
                payoffs.insert(player, payoff);
            }
        }
    }
    Ok(Outcome {
        payoffs,
        partition: partition.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::rng::{stream_rng, Stream};
    use crate::topology::{generate_topology, Position};
    use crate::traffic::retx_factor;
    use approx::assert_relative_eq;

    fn fixture(cfg: &ScenarioConfig, seed: u64) -> (crate::topology::NetworkTopology, LinkGains, GameParams) {
        let t = generate_topology(cfg, seed).unwrap();
        let params = GameParams::from_config(cfg);
        let gains = LinkGains::build(&t, &params.channel, &mut stream_rng(seed, Stream::Shadowing));
        (t, gains, params)
    }

    /// Hand-built two-player instance: one FUE and one co-channel MUE, all
    /// gains supplied directly, cross-checked by straight-line arithmetic.
    fn tiny_instance() -> (crate::topology::NetworkTopology, LinkGains, GameParams) {
        let mut cfg = ScenarioConfig::minimal(1, 1);
        cfg.scenario.n_subchannels = 4;
        let mut t = generate_topology(&cfg, 1).unwrap();
        t.faps[0].position = Position { x: 500.0, y: 0.0 };
        t.fues[0].position = Position { x: 505.0, y: 0.0 };
        t.mues[0].position = Position { x: 520.0, y: 0.0 };
        t.fues[0].subchannel = 0;
        t.faps[0].subchannels = vec![0];
        t.mues[0].subchannel = 0;
        let params = GameParams::from_config(&cfg);
        // gains: MUE->MBS 1e-12, FUE->MBS 2e-13, FUE->FAP 1e-6,
        //        MUE->FAP 5e-11, MUE->FUE 2e-9
        let gains = LinkGains::from_raw(
            1,
            1,
            vec![1e-12],
            vec![2e-13],
            vec![1e-6],
            vec![5e-11],
            vec![2e-9],
        );
        (t, gains, params)
    }

    #[test]
    fn noncoop_rates_match_straight_line_oracle() {
        let (t, gains, params) = tiny_instance();
        let ctx = EvalContext::new(&t, &gains, &params);
        let partition = Partition::all_singletons(&t);
        let schedule = Schedule::build(&ctx, &partition);

        let noise = params.noise_w();
        let p = 0.1; // 20 dBm
        // MUE at the MBS: FUE interferes at full duty.
        let expected_mue = 180e3 * (1.0 + 1e-12 * p / (2e-13 * p + noise)).log2();
        let got = noncoop_rate(&ctx, &schedule, PlayerId::Mue(MueId(0)));
        assert_relative_eq!(got, expected_mue, max_relative = 1e-12);
        // FUE at the FAP: MUE interferes at full duty.
        let expected_fue = 180e3 * (1.0 + 1e-6 * p / (5e-11 * p + noise)).log2();
        let got = noncoop_rate(&ctx, &schedule, PlayerId::Fue(FueId(0)));
        assert_relative_eq!(got, expected_fue, max_relative = 1e-12);
    }

    #[test]
    fn all_singleton_outcome_matches_noncoop_stats() {
        let cfg = ScenarioConfig::minimal(4, 6);
        let (t, gains, params) = fixture(&cfg, 5);
        let ctx = EvalContext::new(&t, &gains, &params);
        let partition = Partition::all_singletons(&t);
        let outcome = evaluate_partition(&ctx, &partition).unwrap();
        let schedule = Schedule::build(&ctx, &partition);
        for f in &t.fues {
            let stats = noncoop_fue_stats(&ctx, &schedule, f.id, &[]);
            assert_eq!(outcome.value(PlayerId::Fue(f.id)), stats.payoff.value);
        }
        for m in &t.mues {
            let stats = noncoop_mue_stats(&ctx, &schedule, m.id);
            assert_eq!(outcome.value(PlayerId::Mue(m.id)), stats.payoff.value);
        }
    }

    #[test]
    fn cooperation_removes_member_interference_at_fap() {
        let (t, gains, params) = tiny_instance();
        let ctx = EvalContext::new(&t, &gains, &params);

        let mut coop = Coalition::cooperative(FueId(0), [MueId(0)]);
        coop.lease.insert(
            MueId(0),
            super::super::LeaseTerms {
                alpha: 0.6,
                beta: 0.5,
                relay_power_w: 0.09,
                own_power_w: 0.09,
            },
        );
        let partition = Partition {
            coalitions: vec![coop.clone()],
        };
        let schedule = Schedule::build(&ctx, &partition);
        let ev = evaluate_coalition(&ctx, &schedule, &coop).unwrap();

        let noise = params.noise_w();
        // Native subchannel is leased over (co-channel member): FUE own rate
        // comes only from the reward slice, interference-free.
        let own_expected = 0.6 * 0.5 * 180e3 * (1.0 + 1e-6 * 0.09 / noise).log2();
        assert_relative_eq!(ev.fue_own_rate_bps, own_expected, max_relative = 1e-12);

        // Member rate: min of D2D share and relay slice.
        let p_d2d = (params.d2d_target_snr * noise / 2e-9).min(0.1);
        let first = 180e3 * (1.0 + 2e-9 * p_d2d / noise).log2();
        let relay = 180e3 * (1.0 + 1e-6 * 0.09 / noise).log2();
        let expected_member = (0.4 * first).min(0.6 * 0.5 * relay);
        let me = &ev.members[&MueId(0)];
        assert_relative_eq!(me.rate_bps, expected_member, max_relative = 1e-12);
        assert_relative_eq!(me.first_hop_rate_bps, first, max_relative = 1e-12);

        // Two-hop delay composes the hop waiting times.
        let lam = 150e3
            * retx_factor(
                success_probability_closed_form(2e-9 * p_d2d, 0.0, noise, params.gamma_mue),
                4,
                ArrivalMode::Literal,
            );
        assert_relative_eq!(me.first_hop_arrival_bps, lam, max_relative = 1e-12);
        let pt_fue =
            success_probability_closed_form(1e-6 * 0.1, 0.0, noise, params.gamma_fue);
        let lam_r = lam * retx_factor(pt_fue, 4, ArrivalMode::Literal);
        assert_relative_eq!(ev.relay_arrival_bps, lam_r, max_relative = 1e-12);
        let service = 0.6 * 0.5 * relay;
        assert_relative_eq!(
            me.delay,
            md1_delay(lam, first) + md1_delay(lam_r, service),
            max_relative = 1e-12
        );
    }

    #[test]
    fn outside_fue_sees_reduced_interference_after_cooperation() {
        // Two FAPs sharing a subchannel with one MUE; the MUE cooperates
        // with FUE 0 and FUE 1's uplink improves.
        let mut cfg = ScenarioConfig::minimal(2, 1);
        cfg.scenario.n_subchannels = 2;
        let mut t = generate_topology(&cfg, 2).unwrap();
        t.faps[0].position = Position { x: 300.0, y: 0.0 };
        t.faps[1].position = Position { x: -300.0, y: 0.0 };
        t.fues[0].position = Position { x: 305.0, y: 0.0 };
        t.fues[1].position = Position { x: -305.0, y: 0.0 };
        t.mues[0].position = Position { x: 280.0, y: 0.0 };
        for (i, f) in t.fues.iter_mut().enumerate() {
            f.subchannel = 0;
            t.faps[i].subchannels = vec![0];
        }
        t.mues[0].subchannel = 0;
        let params = GameParams::from_config(&cfg);
        let gains =
            LinkGains::build(&t, &params.channel, &mut stream_rng(2, Stream::Shadowing));
        let ctx = EvalContext::new(&t, &gains, &params);

        let singletons = Partition::all_singletons(&t);
        let before = Schedule::build(&ctx, &singletons);
        let rate_before = noncoop_fue_stats(&ctx, &before, FueId(1), &[]).rate_bps;

        let mut coop = Coalition::cooperative(FueId(0), [MueId(0)]);
        coop.lease.insert(
            MueId(0),
            super::super::LeaseTerms {
                alpha: 0.5,
                beta: 0.5,
                relay_power_w: 0.08,
                own_power_w: 0.08,
            },
        );
        let partition = Partition {
            coalitions: vec![coop, Coalition::singleton_fue(FueId(1))],
        };
        let after = Schedule::build(&ctx, &partition);
        let rate_after = noncoop_fue_stats(&ctx, &after, FueId(1), &[]).rate_bps;
        assert!(
            rate_after > rate_before,
            "outside FUE should benefit: {rate_after} vs {rate_before}"
        );
    }

    #[test]
    fn relabeling_players_permutes_payoffs() {
        let mut cfg = ScenarioConfig::minimal(1, 2);
        cfg.scenario.n_subchannels = 8;
        let mut t = generate_topology(&cfg, 9).unwrap();
        t.mues[0].subchannel = 3;
        t.mues[1].subchannel = 5;
        t.mues[0].position = Position { x: 100.0, y: 0.0 };
        t.mues[1].position = Position { x: -400.0, y: 200.0 };
        let params = GameParams::from_config(&cfg);
        let gains =
            LinkGains::build(&t, &params.channel, &mut stream_rng(3, Stream::Shadowing));
        let ctx = EvalContext::new(&t, &gains, &params);
        let base = evaluate_partition(&ctx, &Partition::all_singletons(&t)).unwrap();

        // Swap the two MUEs' identities (positions, subchannels, gains).
        let mut t2 = t.clone();
        t2.mues[0].position = t.mues[1].position;
        t2.mues[1].position = t.mues[0].position;
        t2.mues[0].subchannel = t.mues[1].subchannel;
        t2.mues[1].subchannel = t.mues[0].subchannel;
        let swapped_gains = LinkGains::from_raw(
            1,
            1,
            vec![gains.mue_mbs(MueId(1)), gains.mue_mbs(MueId(0))],
            vec![gains.fue_mbs(FueId(0))],
            vec![gains.fue_own_fap(FueId(0))],
            vec![gains.mue_fap(MueId(1), FapId(0)), gains.mue_fap(MueId(0), FapId(0))],
            vec![gains.mue_fue(MueId(1), FueId(0)), gains.mue_fue(MueId(0), FueId(0))],
        );
        let ctx2 = EvalContext::new(&t2, &swapped_gains, &params);
        let swapped = evaluate_partition(&ctx2, &Partition::all_singletons(&t2)).unwrap();
        assert_eq!(base.value(PlayerId::Mue(MueId(0))), swapped.value(PlayerId::Mue(MueId(1))));
        assert_eq!(base.value(PlayerId::Mue(MueId(1))), swapped.value(PlayerId::Mue(MueId(0))));
    }

    #[test]
    fn dead_link_yields_zero_payoff_not_unbounded() {
        let (t, mut gains, params) = tiny_instance();
        gains = LinkGains::from_raw(
            1,
            1,
            vec![1e-30], // hopeless MBS link: success probability underflows
            vec![2e-13],
            vec![1e-6],
            vec![5e-11],
            vec![2e-9],
        );
        let _ = &mut gains;
        let ctx = EvalContext::new(&t, &gains, &params);
        let partition = Partition::all_singletons(&t);
        let outcome = evaluate_partition(&ctx, &partition).unwrap();
        let payoff = outcome.payoffs[&PlayerId::Mue(MueId(0))];
        assert_eq!(payoff.value, 0.0);
        assert!(payoff.delay.is_infinite());
    }
}
