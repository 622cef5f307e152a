//! Stability of an outcome against the deviations the formation protocol
//! admits: reverting to a singleton, a single MUE moving between
//! coalitions, pair formation, and a relay disband.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::topology::{FueId, MueId, PlayerId};
use crate::Real;

use super::formation::{evaluate_disband, evaluate_join, evaluate_leave};
use super::{EvalContext, Outcome};

/// A profitable deviation disproving stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Deviation {
    /// A cooperative member gains by reverting to a singleton.
    Leave(MueId),
    /// An MUE gains by joining (or moving to) the given FUE's coalition
    /// without harming its members.
    Join { mue: MueId, fue: FueId },
    /// A relay FUE gains by dissolving its coalition.
    Disband(FueId),
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub certificate: Option<Deviation>,
}

/// Check an outcome for stability; on instability the certificate names a
/// violating deviation. Deviations are restricted to D2D range, matching
/// the protocol's physical reach.
pub fn is_stable(
    ctx: &EvalContext,
    outcome: &Outcome,
    baseline: &BTreeMap<PlayerId, Real>,
) -> Result<StabilityReport> {
    let partition = &outcome.partition;

    // (a) individual rationality: no member gains by leaving, no relay by
    // disbanding.
    for m in ctx.topology.mues.iter().map(|m| m.id) {
        if evaluate_leave(ctx, partition, outcome, m)?.is_some() {
            return Ok(StabilityReport {
                stable: false,
                certificate: Some(Deviation::Leave(m)),
            });
        }
    }
    for f in ctx.topology.fues.iter().map(|f| f.id) {
        if evaluate_disband(ctx, partition, outcome, f)?.is_some() {
            return Ok(StabilityReport {
                stable: false,
                certificate: Some(Deviation::Disband(f)),
            });
        }
    }

    // (b) single moves and pair formations.
    for m in ctx.topology.mues.iter().map(|m| m.id) {
        for f in ctx.topology.fues.iter().map(|f| f.id) {
            if !ctx.d2d_in_range(m, f) {
                continue;
            }
            if evaluate_join(ctx, baseline, partition, outcome, m, f)?.is_some() {
                return Ok(StabilityReport {
                    stable: false,
                    certificate: Some(Deviation::Join { mue: m, fue: f }),
                });
            }
        }
    }

    Ok(StabilityReport {
        stable: true,
        certificate: None,
    })
}
