//! Rates, retransmission-adjusted arrivals, M/D/1 waiting times, and the
//! throughput-delay power payoff.

use serde::{Deserialize, Serialize};

use crate::config::ArrivalMode;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Real;

/// Shannon capacity of one subchannel, bits/s.
pub fn shannon_rate<T: Scalar>(bandwidth_hz: T, sinr: T) -> T {
    bandwidth_hz * (T::one() + sinr).log2()
}

/// Truncated-retransmission factor: the weight applied to the offered load
/// after at most `max_retx` attempts at per-attempt success `pt`.
pub fn retx_factor<T: Scalar>(pt: T, max_retx: u32, mode: ArrivalMode) -> T {
    let q = T::one() - pt;
    match mode {
        // sum_{d=1..D} Pt (1-Pt)^{d-1} = 1 - (1-Pt)^D
        ArrivalMode::Literal => T::one() - q.powi(max_retx as i32),
        // Expected number of attempts, counting the D dropped-packet slots.
        ArrivalMode::ExpectedTransmissions => {
            let mut sum = T::zero();
            for d in 1..=max_retx {
                sum = sum + T::from_f64_lossy(d as f64) * pt * q.powi(d as i32 - 1);
            }
            sum + T::from_f64_lossy(max_retx as f64) * q.powi(max_retx as i32)
        }
    }
}

/// Effective arrival rate after the retransmission protocol.
pub fn effective_arrival<T: Scalar>(lambda: T, pt: T, max_retx: u32, mode: ArrivalMode) -> T {
    lambda * retx_factor(pt, max_retx, mode)
}

/// Arrival/service pair of one M/D/1 queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub arrival: Real,
    pub service: Real,
}

impl QueueState {
    pub fn stable(&self) -> bool {
        self.arrival < self.service
    }
}

/// M/D/1 mean waiting time `arrival / (2 service (service - arrival))`;
/// infinite when the queue is unstable.
pub fn md1_delay<T: Scalar>(arrival: T, service: T) -> T {
    if arrival == T::zero() {
        return T::zero();
    }
    if arrival >= service {
        return T::infinity();
    }
    arrival / (T::from_f64_lossy(2.0) * service * (service - arrival))
}

/// Cooperative rate of a serviced MUE: the slower of the D2D hop (active a
/// `(1-alpha)` fraction) and the leased relay slice (`alpha*beta`).
pub fn relay_member_rate<T: Scalar>(alpha: T, beta: T, mue_relay_rate: T, fue_uplink_rate: T) -> T {
    ((T::one() - alpha) * mue_relay_rate).min(alpha * beta * fue_uplink_rate)
}

/// Combined effective traffic at a relaying FUE: own plus serviced arrivals,
/// retransmission-weighted on the FUE-FAP link.
pub fn relay_arrival<T: Scalar>(
    lambda_fue: T,
    member_arrivals: &[T],
    pt_fue: T,
    max_retx: u32,
    mode: ArrivalMode,
) -> T {
    let total = member_arrivals.iter().fold(lambda_fue, |acc, &a| acc + a);
    total * retx_factor(pt_fue, max_retx, mode)
}

/// Relayed-traffic arrival at the forward queue (own traffic excluded).
pub fn relay_backlog_arrival<T: Scalar>(
    member_arrivals: &[T],
    pt_fue: T,
    max_retx: u32,
    mode: ArrivalMode,
) -> T {
    member_arrivals.iter().fold(T::zero(), |acc, &a| acc + a)
        * retx_factor(pt_fue, max_retx, mode)
}

/// Two-hop delay of a serviced MUE: D2D queue plus the forward queue.
/// Infinite as soon as either hop is unstable.
pub fn coop_delay<T: Scalar>(
    member_arrival: T,
    mue_relay_rate: T,
    backlog_arrival: T,
    relay_service_rate: T,
) -> T {
    let first = md1_delay(member_arrival, mue_relay_rate);
    let second = md1_delay(backlog_arrival, relay_service_rate);
    first + second
}

/// Per-player power payoff `rate^delta / delay^(1-delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    pub value: Real,
    pub rate_bps: Real,
    pub delay: Real,
    pub delta: Real,
}

/// Payoff value alone; zero for infinite delay or zero rate.
pub fn power_payoff_value<T: Scalar>(rate: T, delay: T, delta: T) -> T {
    if delay.is_infinite() || rate == T::zero() {
        return T::zero();
    }
    rate.powf(delta) / delay.powf(T::one() - delta)
}

/// Full payoff record; a zero delay with positive rate is a domain error
/// (it cannot arise from `md1_delay` with a positive arrival).
pub fn power_payoff(rate: Real, delay: Real, delta: Real) -> Result<Payoff> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")));
    }
    if delay < 0.0 {
        return Err(Error::Domain(format!("negative delay {delay}")));
    }
    if delay == 0.0 && rate > 0.0 {
        return Err(Error::UnboundedPayoff(format!(
            "zero delay with rate {rate} b/s"
        )));
    }
    Ok(Payoff {
        value: power_payoff_value(rate, delay, delta),
        rate_bps: rate,
        delay,
        delta,
    })
}

/// Coalitional value: the payoff sum for a cooperative coalition of more
/// than one player with a positive lease, zero otherwise.
pub fn coalition_value<T: Scalar>(member_payoffs: &[T], any_positive_alpha: bool) -> T {
    if member_payoffs.len() > 1 && any_positive_alpha {
        member_payoffs.iter().fold(T::zero(), |acc, &x| acc + x)
    } else {
        T::zero()
    }
}
