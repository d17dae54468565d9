//! Nonparametric local policies: improvement-weighted reweightings of
//! actions sampled from the current global policy, one per objective.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::morl::objectives::NUM_CONSTRAINTS;
use crate::morl::policy::GaussianPolicy;

/// Softmax of `(q − max q)/temperature` over the sampled actions. Equal
/// values yield the uniform distribution regardless of temperature.
pub fn improvement_weights(q: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if q.len() < 2 {
        return Err(Error::InsufficientData("need at least two sampled actions".into()));
    }
    if temperature <= 0.0 {
        return Err(Error::Config("temperature must be positive".into()));
    }
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = q.iter().map(|&v| ((v - max) / temperature).exp()).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Evaluation of one sampled action: its per-objective returns plus the
/// constraint hinge sums and mean signed slacks of its rollout.
#[derive(Debug, Clone)]
pub struct EvaluatedAction {
    pub q: Vec<f64>,
    pub hinge: [f64; NUM_CONSTRAINTS],
    pub signed: [f64; NUM_CONSTRAINTS],
}

/// The fitted local policies over one batch of states: a shared action
/// support per state and one weight vector per objective.
#[derive(Debug, Clone)]
pub struct LocalPolicySample {
    /// Feature vector per state.
    pub features: Vec<Vec<f64>>,
    /// Pre-squash actions, `[state][sample]`.
    pub actions: Vec<Vec<Vec<f64>>>,
    /// Per-objective returns, `[objective][state][sample]`.
    pub q: Vec<Vec<Vec<f64>>>,
    /// Normalized local-policy weights, same shape as `q`.
    pub weights: Vec<Vec<Vec<f64>>>,
    /// Constraint hinge sums per sampled action, `[state][sample]`.
    pub hinge: Vec<Vec<[f64; NUM_CONSTRAINTS]>>,
    /// Mean signed slacks per sampled action, `[state][sample]`.
    pub signed: Vec<Vec<[f64; NUM_CONSTRAINTS]>>,
    pub temperatures: Vec<f64>,
}

impl LocalPolicySample {
    pub fn objectives(&self) -> usize {
        self.weights.len()
    }

    pub fn states(&self) -> usize {
        self.features.len()
    }

    pub fn samples_per_state(&self) -> usize {
        self.actions.first().map(|a| a.len()).unwrap_or(0)
    }

    /// Recompute the weight vectors from fresh returns (after a multiplier
    /// update) without resampling the support.
    pub fn reweight(
        &mut self,
        q: Vec<Vec<Vec<f64>>>,
        lambdas: [f64; NUM_CONSTRAINTS],
    ) -> Result<()> {
        if q.len() != self.temperatures.len() {
            return Err(Error::Shape { expected: self.temperatures.len(), got: q.len() });
        }
        let mut weights = Vec::with_capacity(q.len());
        for (r, per_state) in q.iter().enumerate() {
            let mut w_r = Vec::with_capacity(per_state.len());
            for (s, q_vals) in per_state.iter().enumerate() {
                w_r.push(feasibility_weighted(
                    q_vals,
                    &self.hinge[s],
                    self.temperatures[r],
                    lambdas,
                )?);
            }
            weights.push(w_r);
        }
        self.q = q;
        self.weights = weights;
        Ok(())
    }
}

/// Improvement weights times the feasibility factor `exp(−Σ λ·hinge)`,
/// renormalized. Computed in log space so extreme multipliers cannot
/// underflow everything at once.
fn feasibility_weighted(
    q: &[f64],
    hinges: &[[f64; NUM_CONSTRAINTS]],
    temperature: f64,
    lambdas: [f64; NUM_CONSTRAINTS],
) -> Result<Vec<f64>> {
    let imp = improvement_weights(q, temperature)?;
    let logs: Vec<f64> = imp
        .iter()
        .zip(hinges)
        .map(|(&w, h)| {
            let penalty: f64 = lambdas.iter().zip(h).map(|(l, v)| l * v).sum();
            w.max(f64::MIN_POSITIVE).ln() - penalty
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Sample `n_samples` actions per state from the global policy, evaluate
/// each with `eval`, and build the improvement- and feasibility-weighted
/// local policy for every objective over the shared support.
pub fn fit_local_policies<F>(
    policy: &GaussianPolicy,
    observations: &[Vec<f64>],
    n_samples: usize,
    temperatures: &[f64],
    lambdas: [f64; NUM_CONSTRAINTS],
    rng: &mut ChaCha8Rng,
    mut eval: F,
) -> Result<LocalPolicySample>
where
    F: FnMut(usize, usize, &[f64]) -> Result<EvaluatedAction>,
{
    if n_samples < 16 {
        return Err(Error::Config(format!("need at least 16 action samples, got {n_samples}")));
    }
    policy.validate()?;
    let objectives = temperatures.len();
    let mut features = Vec::with_capacity(observations.len());
    let mut actions = Vec::with_capacity(observations.len());
    let mut q = vec![Vec::with_capacity(observations.len()); objectives];
    let mut weights = vec![Vec::with_capacity(observations.len()); objectives];
    let mut hinge_all = Vec::with_capacity(observations.len());
    let mut signed_all = Vec::with_capacity(observations.len());

    for (s, obs) in observations.iter().enumerate() {
        let feats = policy.features(obs);
        let mut zs = Vec::with_capacity(n_samples);
        let mut evals = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let z = policy.sample(rng, &feats);
            let e = eval(s, i, &z)?;
            if e.q.len() != objectives {
                return Err(Error::Shape { expected: objectives, got: e.q.len() });
            }
            zs.push(z);
            evals.push(e);
        }
        let hinges: Vec<[f64; NUM_CONSTRAINTS]> = evals.iter().map(|e| e.hinge).collect();
        for r in 0..objectives {
            let q_vals: Vec<f64> = evals.iter().map(|e| e.q[r]).collect();
            let w = feasibility_weighted(&q_vals, &hinges, temperatures[r], lambdas)?;
            q[r].push(q_vals);
            weights[r].push(w);
        }
        signed_all.push(evals.iter().map(|e| e.signed).collect());
        hinge_all.push(hinges);
        features.push(feats);
        actions.push(zs);
    }
    Ok(LocalPolicySample {
        features,
        actions,
        q,
        weights,
        hinge: hinge_all,
        signed: signed_all,
        temperatures: temperatures.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn equal_values_are_uniform() {
        let w = improvement_weights(&[2.0, 2.0, 2.0, 2.0], 0.5).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn high_temperature_approaches_uniform() {
        let w = improvement_weights(&[5.0, -3.0, 1.0], 1.0e6).unwrap();
        for &x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-4);
        }
    }

    #[test]
    fn two_action_softmax_hand_value() {
        let w = improvement_weights(&[1.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((w[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((w[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn shift_invariance() {
        let a = improvement_weights(&[0.3, -0.8, 2.0], 0.5).unwrap();
        let b = improvement_weights(&[100.3, 99.2, 102.0], 0.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn greedier_temperature_raises_argmax_weight() {
        let q = [1.0, 0.4, 0.0, -0.3];
        let mut last = 0.0;
        for temp in [2.0, 1.0, 0.5, 0.25, 0.1] {
            let w = improvement_weights(&q, temp).unwrap();
            assert!(w[0] >= last);
            last = w[0];
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(improvement_weights(&[1.0], 1.0).is_err());
        assert!(improvement_weights(&[1.0, 2.0], 0.0).is_err());
    }

    fn run_fit(
        lambdas: [f64; NUM_CONSTRAINTS],
        hinge_for: impl Fn(usize) -> [f64; NUM_CONSTRAINTS],
        q_for: impl Fn(usize) -> f64,
    ) -> LocalPolicySample {
        let policy = GaussianPolicy::new(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        fit_local_policies(
            &policy,
            &[vec![0.1, 0.2]],
            16,
            &[0.5],
            lambdas,
            &mut rng,
            |_, i, _| Ok(EvaluatedAction { q: vec![q_for(i)], hinge: hinge_for(i), signed: [0.0; 4] }),
        )
        .unwrap()
    }

    #[test]
    fn feasible_weights_match_improvement_weights() {
        let sample = run_fit([10.0, 10.0, 10.0, 10.0], |_| [0.0; 4], |i| i as f64 * 0.1);
        let imp = improvement_weights(&sample.q[0][0], 0.5).unwrap();
        for (a, b) in sample.weights[0][0].iter().zip(&imp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_multiplier_suppresses_violators() {
        let sample = run_fit(
            [0.0, 0.0, 1.0e3, 0.0],
            |i| if i == 0 { [0.0, 0.0, 1.0, 0.0] } else { [0.0; 4] },
            |_| 1.0,
        );
        assert!(sample.weights[0][0][0] < 1e-6, "violator weight {}", sample.weights[0][0][0]);
    }

    #[test]
    fn uniform_returns_sixteen_equal_weights() {
        let sample = run_fit([0.0; 4], |_| [0.0; 4], |_| 3.0);
        assert!(sample.weights[0][0].iter().all(|&w| (w - 1.0 / 16.0).abs() < 1e-12));
    }

    #[test]
    fn too_few_samples_rejected() {
        let policy = GaussianPolicy::new(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = fit_local_policies(&policy, &[vec![0.0]], 8, &[0.5], [0.0; 4], &mut rng, |_, _, _| {
            Ok(EvaluatedAction { q: vec![0.0], hinge: [0.0; 4], signed: [0.0; 4] })
        });
        assert!(out.is_err());
    }
}
