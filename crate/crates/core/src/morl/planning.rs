//! Action evaluation on predicted rollouts. The physical side of a candidate
//! plan (rates, energies, dispatch, queues, delays, constraint slacks) is
//! simulated with the known deterministic model under certainty-equivalent
//! exogenous inputs: channels held at their latest observed values, arrivals
//! at their means. The emissions side, which depends on the hidden intensity
//! process, comes from the learned state predictor; the all-grid reference is
//! anchored at the intensity implied by the last metered slot.

use crate::env::action::{Action, ActionSpace};
use crate::env::energy::EnergyDispatch;
use crate::env::queue::{comm_delay, queue_delay};
use crate::env::{metrics, slot_physics, ModelParams, PlanSnapshot};
use crate::error::{Error, Result};
use crate::morl::objectives::RolloutAggregate;
use crate::morl::policy::GaussianPolicy;
use crate::predictor::StatePredictor;

struct StepRecord {
    energy_total: f64,
    rate_sum_total: f64,
    delay_sum: f64,
    dispatch: Vec<EnergyDispatch>,
    slack_renewable: f64,
    slack_power: f64,
    balance_hinge: f64,
    composition_hinge: f64,
}

/// Roll the plan forward `horizon` slots: `first_action` on the first slot,
/// the policy mean afterwards, with the predictor supplying the
/// emissions-per-bit trajectory that the physics cannot.
pub fn plan_rollout(
    model: &ModelParams,
    space: &ActionSpace,
    snapshot: &PlanSnapshot,
    first_action: &Action,
    policy: &GaussianPolicy,
    predictor: &dyn StatePredictor,
    horizon: usize,
    battery_counts_renewable: bool,
) -> Result<RolloutAggregate> {
    if horizon == 0 {
        return Err(Error::EmptyRollout);
    }
    let cfg = &model.cfg;
    let slot = cfg.sim.slot_seconds;
    let servers = model.servers.len();
    let arrivals: Vec<f64> = model.arrival_means.clone();

    let mut batteries = snapshot.battery_levels.clone();
    let mut queues = snapshot.queue_lengths.clone();
    let mut tracker = snapshot.tracker.clone();
    let mut steps: Vec<StepRecord> = Vec::with_capacity(horizon);
    let mut failure: Option<Error> = None;
    let mut step_idx = 0usize;

    let mut provider = |obs: &[f64]| -> Vec<f64> {
        let action = if step_idx == 0 {
            first_action.clone()
        } else {
            match space.from_unit(&policy.mean_unit(obs)) {
                Ok(a) => a,
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                    first_action.clone()
                }
            }
        };
        match slot_physics(model, &snapshot.channels, &arrivals, &action, &batteries) {
            Ok(phys) => {
                let queue_at_start = queues.clone();
                for k in 0..servers {
                    let served = queues[k].min(phys.servers[k].service_capacity as f64);
                    queues[k] = queues[k] - served + phys.servers[k].arrivals;
                    batteries[k] = phys.servers[k].battery_next;
                }
                tracker.observe_lengths(&queue_at_start, &phys.rates);
                let cap_seconds = cfg.delay.cap_slots * slot;
                let mut delay_sum = 0.0;
                for (k, srv) in model.servers.iter().enumerate() {
                    let tau_q = queue_delay(tracker.queue_mean[k], model.arrival_rate_per_sec(k));
                    let tau_c: f64 = srv
                        .users
                        .iter()
                        .map(|&u| {
                            comm_delay(
                                cfg.traffic.packet_bits as f64,
                                tracker.smoothed_rate(u),
                                cap_seconds,
                            )
                        })
                        .sum();
                    delay_sum += tau_q + tau_c + phys.servers[k].delay.bottleneck;
                }
                steps.push(StepRecord {
                    energy_total: phys.servers.iter().map(|s| s.total_energy).sum(),
                    rate_sum_total: phys.rate_sum_total,
                    delay_sum,
                    dispatch: phys.servers.iter().map(|s| s.dispatch).collect(),
                    slack_renewable: phys.slack_renewable,
                    slack_power: phys.slack_power,
                    balance_hinge: phys.balance_hinge,
                    composition_hinge: phys.composition_hinge,
                });
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
            }
        }
        step_idx += 1;
        space.to_unit(&action)
    };

    let predicted = predictor.rollout(&snapshot.observation, &mut provider, horizon);
    if let Some(e) = failure {
        return Err(e);
    }
    if predicted.len() != horizon || steps.len() != horizon {
        return Err(Error::Shape { expected: horizon, got: predicted.len().min(steps.len()) });
    }

    let mut agg = RolloutAggregate { slots: horizon, ..Default::default() };
    let n = horizon as f64;
    let mut last_score = 0.0;
    let mut last_energy_per_bit = 0.0;
    for (rec, pred) in steps.iter().zip(&predicted) {
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged("predictor produced non-finite state".into()));
        }
        let bits = slot * rec.rate_sum_total;
        // Predicted per-server emissions-per-bit; a linear head can dip
        // below zero, which the metric treats as clean.
        let sum_per_bit: f64 = pred.iter().map(|&c| c.max(0.0)).sum();
        let score = match snapshot.grid_intensity {
            Some(wg) => match metrics::per_bit(wg * rec.energy_total, bits) {
                Some(reference) => {
                    last_score = metrics::sustainability(sum_per_bit, reference);
                    last_score
                }
                None => last_score,
            },
            None => last_score,
        };
        agg.mean_sustainability += score / n;
        agg.mean_renewable_share +=
            crate::baselines::rer_metric(&rec.dispatch, battery_counts_renewable) / n;
        let energy_per_bit = match metrics::per_bit(rec.energy_total, bits) {
            Some(e) => {
                last_energy_per_bit = e;
                e
            }
            None => last_energy_per_bit,
        };
        agg.mean_energy_per_bit += energy_per_bit / n;
        agg.mean_delay_sum += rec.delay_sum / n;
        agg.penalty[0] += rec.slack_renewable.max(0.0);
        agg.penalty[1] += rec.balance_hinge;
        agg.penalty[2] += rec.slack_power.max(0.0);
        agg.penalty[3] += rec.composition_hinge;
        agg.signed[0] += rec.slack_renewable / n;
        agg.signed[1] += rec.balance_hinge / n;
        agg.signed[2] += rec.slack_power / n;
        agg.signed[3] += rec.composition_hinge / n;
    }
    Ok(agg)
}
