//! Per-objective returns with augmented-Lagrangian constraint pricing.
//!
//! Constraint order everywhere: 0 = shared renewable capacity,
//! 1 = source-balance residual, 2 = transmit power budget,
//! 3 = energy-composition residual.

use crate::env::SlotMeasurement;
use crate::error::{Error, Result};

pub const NUM_CONSTRAINTS: usize = 4;

/// What a rollout looked like, reduced to what the objectives need: mean
/// reward terms over the horizon plus per-constraint penalty sums (hinged,
/// accumulated per slot) and mean signed slacks.
#[derive(Debug, Clone, Default)]
pub struct RolloutAggregate {
    pub slots: usize,
    pub mean_sustainability: f64,
    pub mean_renewable_share: f64,
    pub mean_energy_per_bit: f64,
    /// Mean over slots of the summed per-server delay.
    pub mean_delay_sum: f64,
    pub penalty: [f64; NUM_CONSTRAINTS],
    pub signed: [f64; NUM_CONSTRAINTS],
}

impl RolloutAggregate {
    /// Reduce measured slots. `battery_counts_renewable` controls how battery
    /// discharge is attributed in the renewable-share term.
    pub fn from_measurements(
        measurements: &[SlotMeasurement],
        battery_counts_renewable: bool,
    ) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::EmptyRollout);
        }
        let mut agg = RolloutAggregate { slots: measurements.len(), ..Default::default() };
        let n = measurements.len() as f64;
        for m in measurements {
            agg.mean_sustainability += m.sustainability / n;
            agg.mean_energy_per_bit += m.energy_per_bit / n;
            agg.mean_delay_sum += m.delay_sum() / n;
            agg.mean_renewable_share +=
                crate::baselines::rer_metric(&m.dispatch, battery_counts_renewable) / n;
            agg.penalty[0] += m.slack_renewable.max(0.0);
            agg.penalty[1] += m.balance_hinge;
            agg.penalty[2] += m.slack_power.max(0.0);
            agg.penalty[3] += m.composition_hinge;
            agg.signed[0] += m.slack_renewable / n;
            agg.signed[1] += m.balance_hinge / n;
            agg.signed[2] += m.slack_power / n;
            agg.signed[3] += m.composition_hinge / n;
        }
        Ok(agg)
    }
}

/// Reward families an objective can optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Sustainability score; priced with the renewable-capacity and
    /// source-balance multipliers.
    Sustainability,
    /// Renewable energy ratio substituted for the sustainability score.
    RenewableShare,
    /// Negative energy per delivered bit; priced with the power-budget and
    /// composition multipliers.
    EnergyPerBit,
    /// Negative summed delay; same pricing as the energy objective.
    Delay,
}

/// The objectives a method trains on, optionally collapsed to one scalar.
#[derive(Debug, Clone)]
pub struct ObjectiveSet {
    pub kinds: Vec<ObjectiveKind>,
    /// When present, the kinds are folded into a single weighted objective.
    pub scalarize: Option<Vec<f64>>,
}

impl ObjectiveSet {
    /// Number of objectives the learner actually sees.
    pub fn dim(&self) -> usize {
        if self.scalarize.is_some() {
            1
        } else {
            self.kinds.len()
        }
    }
}

/// Q-values of one rollout under the given multipliers.
#[derive(Debug, Clone)]
pub struct ObjectiveVector {
    pub q: Vec<f64>,
    pub penalty: [f64; NUM_CONSTRAINTS],
    pub signed: [f64; NUM_CONSTRAINTS],
}

fn kind_value(kind: ObjectiveKind, agg: &RolloutAggregate, lambdas: &[f64; NUM_CONSTRAINTS]) -> f64 {
    match kind {
        ObjectiveKind::Sustainability => {
            agg.mean_sustainability - lambdas[0] * agg.penalty[0] - lambdas[1] * agg.penalty[1]
        }
        ObjectiveKind::RenewableShare => {
            agg.mean_renewable_share - lambdas[0] * agg.penalty[0] - lambdas[1] * agg.penalty[1]
        }
        ObjectiveKind::EnergyPerBit => {
            -agg.mean_energy_per_bit - lambdas[2] * agg.penalty[2] - lambdas[3] * agg.penalty[3]
        }
        ObjectiveKind::Delay => {
            -agg.mean_delay_sum - lambdas[2] * agg.penalty[2] - lambdas[3] * agg.penalty[3]
        }
    }
}

/// Evaluate every objective of `set` on an aggregated rollout.
pub fn evaluate_objectives(
    agg: &RolloutAggregate,
    lambdas: [f64; NUM_CONSTRAINTS],
    set: &ObjectiveSet,
) -> Result<ObjectiveVector> {
    if agg.slots == 0 {
        return Err(Error::EmptyRollout);
    }
    let per_kind: Vec<f64> = set.kinds.iter().map(|&k| kind_value(k, agg, &lambdas)).collect();
    let q = match &set.scalarize {
        Some(w) => {
            if w.len() != per_kind.len() {
                return Err(Error::Shape { expected: per_kind.len(), got: w.len() });
            }
            vec![w.iter().zip(&per_kind).map(|(a, b)| a * b).sum()]
        }
        None => per_kind,
    };
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged(format!("non-finite objective values {q:?}")));
    }
    Ok(ObjectiveVector { q, penalty: agg.penalty, signed: agg.signed })
}
