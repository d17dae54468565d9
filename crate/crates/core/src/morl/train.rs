//! The alternating training loop: collect episodes with the current policy,
//! refit the state predictor, evaluate candidate actions on predicted
//! rollouts, price the constraints by bisection, reweight the local policies,
//! and project their preference mixture back onto the global policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::Method;
use crate::env::{ModelParams, NetworkEnv, PlanSnapshot, SlotMeasurement};
use crate::error::{Error, Result};
use crate::morl::global::fit_global_policy;
use crate::morl::local::{fit_local_policies, EvaluatedAction};
use crate::morl::multipliers::{update_multipliers, BisectOutcome, SampleSlacks};
use crate::morl::objectives::{evaluate_objectives, RolloutAggregate, NUM_CONSTRAINTS};
use crate::morl::planning::plan_rollout;
use crate::morl::policy::GaussianPolicy;
use crate::predictor::{
    LstmConfig, LstmPredictor, Standardizer, TrainablePredictor, TrajectoryBuffer, Transition,
};

const TRAINER_STREAM: u64 = u64::MAX - 3;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    /// Prediction and evaluation horizon in slots.
    pub horizon: usize,
    /// Actions sampled per state for the local policies.
    pub action_samples: usize,
    /// States evaluated per epoch.
    pub state_batch: usize,
    /// Shared greediness temperature of the local policies.
    pub temperature: f64,
    /// Per-parameter trust bound of the global-policy step.
    pub trust_delta: f64,
    /// Weighted-ML iterations per global-policy update.
    pub inner_iters: usize,
    pub lambda_max: f64,
    pub lambda_tol: f64,
    pub buffer_capacity: usize,
    /// Predictor optimization rounds per epoch.
    pub predictor_epochs: usize,
    /// Battery discharge counted as renewable in the share metric.
    pub battery_counts_renewable: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            episodes_per_epoch: 20,
            horizon: 10,
            action_samples: 64,
            state_batch: 8,
            temperature: 0.5,
            trust_delta: 0.1,
            inner_iters: 4,
            lambda_max: 1.0e3,
            lambda_tol: 1.0e-3,
            buffer_capacity: 8000,
            predictor_epochs: 4,
            battery_counts_renewable: true,
            seed: 0,
        }
    }
}

/// One learning-curve row.
#[derive(Debug, Clone)]
pub struct EpochRow {
    pub epoch: usize,
    pub mean_s: f64,
    pub energy_per_bit: f64,
    pub mean_delay: f64,
    pub viol_d1: f64,
    pub viol_d3: f64,
    pub lambdas: [f64; NUM_CONSTRAINTS],
    pub zeta: [f64; 3],
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub policy: GaussianPolicy,
    pub curves: Vec<EpochRow>,
    pub lambdas: [f64; NUM_CONSTRAINTS],
    /// Multiplier anomalies (saturation, non-monotone responses).
    pub notes: Vec<String>,
}

/// Train with a freshly initialized recurrent predictor.
pub fn train(
    model: &ModelParams,
    method: &Method,
    zeta: [f64; 3],
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let space_dim = crate::env::action::ActionSpace::new(&model.cfg).dim();
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    rng.set_stream(TRAINER_STREAM - 1);
    let lstm_cfg = LstmConfig { horizon: tcfg.horizon, ..Default::default() };
    let mut predictor = LstmPredictor::new(model.servers.len(), space_dim, lstm_cfg, &mut rng);
    train_with_predictor(model, method, zeta, tcfg, &mut predictor)
}

/// Train with any pluggable predictor (the carry-forward baseline included).
pub fn train_with_predictor(
    model: &ModelParams,
    method: &Method,
    zeta: [f64; 3],
    tcfg: &TrainConfig,
    predictor: &mut dyn TrainablePredictor,
) -> Result<TrainOutcome> {
    let mut env = NetworkEnv::from_model(model.clone());
    let space = env.action_space().clone();
    let state_dim = model.servers.len();
    let set = method.objective_set();
    let zeta_eff = method.effective_zeta(&zeta);
    let temperatures = vec![tcfg.temperature; set.dim()];

    let mut policy = GaussianPolicy::new(state_dim, space.dim());
    let mut buffer = TrajectoryBuffer::new(tcfg.buffer_capacity, state_dim, space.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    rng.set_stream(TRAINER_STREAM);

    let mut curves = Vec::with_capacity(tcfg.epochs);
    let mut lambdas = [0.0; NUM_CONSTRAINTS];
    let mut notes = Vec::new();
    let mut episode: u64 = 0;

    for epoch in 0..tcfg.epochs {
        // Collect on-policy episodes; reservoir-sample planning contexts.
        let mut measurements: Vec<SlotMeasurement> = Vec::new();
        let mut contexts: Vec<PlanSnapshot> = Vec::with_capacity(tcfg.state_batch);
        let mut seen = 0usize;
        for _ in 0..tcfg.episodes_per_epoch {
            env.reset(episode);
            episode += 1;
            let mut obs = env.observation().to_vec();
            for _ in 0..model.cfg.sim.horizon_slots {
                seen += 1;
                let keep = if contexts.len() < tcfg.state_batch {
                    Some(contexts.len())
                } else {
                    let j = rng.random_range(0..seen);
                    (j < tcfg.state_batch).then_some(j)
                };
                if let Some(slot_idx) = keep {
                    let snap = env.snapshot();
                    if slot_idx < contexts.len() {
                        contexts[slot_idx] = snap;
                    } else {
                        contexts.push(snap);
                    }
                }
                let feats = policy.features(&obs);
                let z = policy.sample(&mut rng, &feats);
                let unit = GaussianPolicy::squash(&z);
                let action = space.from_unit(&unit)?;
                let m = env.step(&action)?;
                let next_obs = m.observation.clone();
                buffer.record_with(
                    Transition { episode, state: obs, action: unit, next_state: next_obs.clone() },
                    Some(m.clone()),
                )?;
                measurements.push(m);
                obs = next_obs;
            }
        }

        policy.norm = Standardizer::fit(buffer.iter().map(|t| t.state.as_slice()), state_dim);
        predictor.fit(&buffer, tcfg.predictor_epochs, &mut rng)?;

        // Evaluate sampled actions on predicted rollouts.
        let observations: Vec<Vec<f64>> = contexts.iter().map(|c| c.observation.clone()).collect();
        let mut aggregates: Vec<RolloutAggregate> =
            Vec::with_capacity(contexts.len() * tcfg.action_samples);
        let mut local = {
            let aggregates = &mut aggregates;
            let contexts = &contexts;
            let policy_ref = &policy;
            let predictor_ref: &dyn TrainablePredictor = predictor;
            fit_local_policies(
                policy_ref,
                &observations,
                tcfg.action_samples,
                &temperatures,
                lambdas,
                &mut rng,
                |s, _i, z| {
                    let action = space.from_unit(&GaussianPolicy::squash(z))?;
                    let agg = plan_rollout(
                        model,
                        &space,
                        &contexts[s],
                        &action,
                        policy_ref,
                        predictor_ref,
                        tcfg.horizon,
                        tcfg.battery_counts_renewable,
                    )?;
                    let v = evaluate_objectives(&agg, lambdas, &set)?;
                    let out =
                        EvaluatedAction { q: v.q.clone(), hinge: agg.penalty, signed: agg.signed };
                    aggregates.push(agg);
                    Ok(out)
                },
            )?
        };

        // Bisection on the batch response, then reprice the local policies.
        let slack_samples: Vec<SampleSlacks> = aggregates
            .iter()
            .map(|a| SampleSlacks { hinge: a.penalty, signed: a.signed })
            .collect();
        let (new_lambdas, fits) = update_multipliers(&slack_samples, tcfg.lambda_max, tcfg.lambda_tol);
        lambdas = new_lambdas;
        for (j, fit) in fits.iter().enumerate() {
            match fit.outcome {
                BisectOutcome::Saturated => {
                    notes.push(format!("epoch {epoch}: constraint {j} multiplier saturated at cap"))
                }
                BisectOutcome::NonMonotone => {
                    notes.push(format!("epoch {epoch}: constraint {j} slack response non-monotone"))
                }
                _ => {}
            }
        }

        let n_samples = tcfg.action_samples;
        let mut fresh_q = vec![Vec::with_capacity(contexts.len()); set.dim()];
        for (s, _) in contexts.iter().enumerate() {
            let mut per_obj = vec![Vec::with_capacity(n_samples); set.dim()];
            for i in 0..n_samples {
                let v = evaluate_objectives(&aggregates[s * n_samples + i], lambdas, &set)?;
                for (r, q) in v.q.iter().enumerate() {
                    per_obj[r].push(*q);
                }
            }
            for (r, q) in per_obj.into_iter().enumerate() {
                fresh_q[r].push(q);
            }
        }
        local.reweight(fresh_q, lambdas)?;
        fit_global_policy(&mut policy, &local, &zeta_eff, tcfg.trust_delta, tcfg.inner_iters)?;

        curves.push(epoch_row(epoch, &measurements, lambdas, zeta, &model.cfg)?);
    }

    Ok(TrainOutcome { policy, curves, lambdas, notes })
}

fn epoch_row(
    epoch: usize,
    measurements: &[SlotMeasurement],
    lambdas: [f64; NUM_CONSTRAINTS],
    zeta: [f64; 3],
    cfg: &crate::config::Config,
) -> Result<EpochRow> {
    if measurements.is_empty() {
        return Err(Error::EmptyRollout);
    }
    let n = measurements.len() as f64;
    let d1_tol = 1e-9 * cfg.sim.renewable_cap_joules.max(1.0);
    let d3_tol = 1e-9 * cfg.sim.power_budget_w.max(1.0);
    let mut row = EpochRow {
        epoch,
        mean_s: 0.0,
        energy_per_bit: 0.0,
        mean_delay: 0.0,
        viol_d1: 0.0,
        viol_d3: 0.0,
        lambdas,
        zeta,
    };
    for m in measurements {
        row.mean_s += m.sustainability / n;
        row.energy_per_bit += m.energy_per_bit / n;
        row.mean_delay += m.mean_delay() / n;
        if m.slack_renewable > d1_tol {
            row.viol_d1 += 1.0 / n;
        }
        if m.slack_power > d3_tol {
            row.viol_d3 += 1.0 / n;
        }
    }
    if !row.mean_s.is_finite() || !row.energy_per_bit.is_finite() || !row.mean_delay.is_finite() {
        return Err(Error::Diverged(format!("non-finite epoch statistics at epoch {epoch}")));
    }
    Ok(row)
}

/// Run a trained (or untrained) policy for `episodes` evaluation episodes
/// using its mean action, and return the per-slot measurements.
pub fn evaluate_policy(
    model: &ModelParams,
    policy: &GaussianPolicy,
    episodes: usize,
    seed_base: u64,
) -> Result<Vec<SlotMeasurement>> {
    let mut env = NetworkEnv::from_model(model.clone());
    let space = env.action_space().clone();
    let mut out = Vec::with_capacity(episodes * model.cfg.sim.horizon_slots);
    for e in 0..episodes {
        env.reset(seed_base + e as u64);
        let mut obs = env.observation().to_vec();
        for _ in 0..model.cfg.sim.horizon_slots {
            let action = space.from_unit(&policy.mean_unit(&obs))?;
            let m = env.step(&action)?;
            obs = m.observation.clone();
            out.push(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn tiny_model() -> ModelParams {
        let mut cfg = Config::default();
        cfg.sim.users = 2;
        cfg.sim.servers = 1;
        cfg.sim.horizon_slots = 30;
        cfg.sim.seed = 7;
        ModelParams::new(&cfg).unwrap()
    }

    fn tiny_train_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            episodes_per_epoch: 2,
            horizon: 5,
            action_samples: 16,
            state_batch: 3,
            buffer_capacity: 400,
            predictor_epochs: 2,
            seed: 1,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_leave_policy_untouched() {
        let model = tiny_model();
        let tcfg = TrainConfig { epochs: 0, ..tiny_train_cfg() };
        let out = train(&model, &Method::Proposed, [1.0 / 3.0; 3], &tcfg).unwrap();
        assert!(out.curves.is_empty());
        let fresh = GaussianPolicy::new(1, 8);
        assert_eq!(out.policy.mean_unit(&[0.0]), fresh.mean_unit(&[0.0]));
    }

    #[test]
    fn curves_have_one_row_per_epoch() {
        let model = tiny_model();
        let out = train(&model, &Method::Proposed, [1.0 / 3.0; 3], &tiny_train_cfg()).unwrap();
        assert_eq!(out.curves.len(), 2);
        for (i, row) in out.curves.iter().enumerate() {
            assert_eq!(row.epoch, i);
            assert!(row.mean_s.is_finite());
            assert!(row.energy_per_bit.is_finite());
            assert!(row.mean_delay.is_finite());
        }
    }

    #[test]
    fn baseline_predictor_runs_end_to_end() {
        let model = tiny_model();
        let mut predictor = crate::predictor::LastValuePredictor::new(1);
        let out = train_with_predictor(
            &model,
            &Method::Proposed,
            [1.0 / 3.0; 3],
            &tiny_train_cfg(),
            &mut predictor,
        )
        .unwrap();
        assert_eq!(out.curves.len(), 2);
    }

    #[test]
    fn every_method_trains() {
        let model = tiny_model();
        let tcfg = TrainConfig { epochs: 1, ..tiny_train_cfg() };
        for method in [
            Method::Proposed,
            Method::Scalarized { weights: [1.0 / 3.0; 3] },
            Method::EeOnly,
            Method::Rer,
        ] {
            let out = train(&model, &method, [1.0 / 3.0; 3], &tcfg).unwrap();
            assert_eq!(out.curves.len(), 1, "method {}", method.name());
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let model = tiny_model();
        let tcfg = tiny_train_cfg();
        let a = train(&model, &Method::Proposed, [1.0 / 3.0; 3], &tcfg).unwrap();
        let b = train(&model, &Method::Proposed, [1.0 / 3.0; 3], &tcfg).unwrap();
        assert_eq!(a.curves.len(), b.curves.len());
        for (x, y) in a.curves.iter().zip(&b.curves) {
            assert_eq!(x.mean_s, y.mean_s);
            assert_eq!(x.energy_per_bit, y.energy_per_bit);
        }
        assert_eq!(a.policy.mean_unit(&[0.1]), b.policy.mean_unit(&[0.1]));
    }
}
