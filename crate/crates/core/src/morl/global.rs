//! Global-policy update: the preference-weighted mixture of the local
//! policies, projected back onto the parametric class by weighted maximum
//! likelihood under a trust region.

use crate::error::{Error, Result};
use crate::morl::local::LocalPolicySample;
use crate::morl::policy::{GaussianPolicy, WeightedSample};

/// Check that `zeta` lives on the probability simplex.
pub fn validate_simplex(zeta: &[f64]) -> Result<()> {
    if zeta.iter().any(|&z| z < 0.0 || !z.is_finite()) {
        return Err(Error::Config(format!("preference weights must be nonnegative: {zeta:?}")));
    }
    let sum: f64 = zeta.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("preference weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Per-state mixture over the shared support: `m_i = Σ_r ζ_r q_{r,i}`.
pub fn mixture_weights(local: &LocalPolicySample, zeta: &[f64]) -> Result<Vec<Vec<f64>>> {
    validate_simplex(zeta)?;
    if zeta.len() != local.objectives() {
        return Err(Error::Shape { expected: local.objectives(), got: zeta.len() });
    }
    let n = local.samples_per_state();
    let mut out = Vec::with_capacity(local.states());
    for s in 0..local.states() {
        let mut m = vec![0.0; n];
        for (r, &w) in zeta.iter().enumerate() {
            for (mi, &qi) in m.iter_mut().zip(&local.weights[r][s]) {
                *mi += w * qi;
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Diagnostics of one global-policy update.
#[derive(Debug, Clone)]
pub struct GlobalFit {
    /// Mixture weights per state over the shared support.
    pub mixture: Vec<Vec<f64>>,
    /// Projection objective before the first and after every inner iteration.
    pub objective_trace: Vec<f64>,
}

/// Project the mixture of local policies onto the parametric policy:
/// `inner_iters` weighted-ML steps, each bounded by `delta` per parameter.
pub fn fit_global_policy(
    policy: &mut GaussianPolicy,
    local: &LocalPolicySample,
    zeta: &[f64],
    delta: f64,
    inner_iters: usize,
) -> Result<GlobalFit> {
    let mixture = mixture_weights(local, zeta)?;
    let mut samples = Vec::with_capacity(local.states() * local.samples_per_state());
    for s in 0..local.states() {
        for (i, z) in local.actions[s].iter().enumerate() {
            samples.push(WeightedSample {
                features: local.features[s].clone(),
                z: z.clone(),
                weight: mixture[s][i],
            });
        }
    }
    let mut trace = vec![policy.objective(&samples)];
    for _ in 0..inner_iters {
        trace.push(policy.fit_step(&samples, delta)?);
    }
    Ok(GlobalFit { mixture, objective_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morl::local::{fit_local_policies, EvaluatedAction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_with_objectives(objs: usize, seed: u64) -> LocalPolicySample {
        let policy = GaussianPolicy::new(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fit_local_policies(
            &policy,
            &[vec![0.0, 0.5], vec![1.0, -0.5]],
            32,
            &vec![0.5; objs],
            [0.0; 4],
            &mut rng,
            |s, i, z| {
                let q: Vec<f64> = (0..objs)
                    .map(|r| (r + 1) as f64 * z[0] - (s as f64) * 0.1 + (i % 3) as f64 * 0.01)
                    .collect();
                Ok(EvaluatedAction { q, hinge: [0.0; 4], signed: [0.0; 4] })
            },
        )
        .unwrap()
    }

    #[test]
    fn point_mass_preference_returns_that_local_policy() {
        let local = sample_with_objectives(3, 1);
        let m = mixture_weights(&local, &[1.0, 0.0, 0.0]).unwrap();
        for s in 0..local.states() {
            assert_eq!(m[s], local.weights[0][s]);
        }
    }

    #[test]
    fn uniform_preference_averages_components() {
        let local = sample_with_objectives(3, 2);
        let zeta = [1.0 / 3.0; 3];
        let m = mixture_weights(&local, &zeta).unwrap();
        for s in 0..local.states() {
            for i in 0..local.samples_per_state() {
                let expect =
                    (local.weights[0][s][i] + local.weights[1][s][i] + local.weights[2][s][i]) / 3.0;
                assert_eq!(m[s][i], expect, "identity must hold to float addition");
            }
        }
    }

    #[test]
    fn identical_locals_collapse_the_mixture() {
        let policy = GaussianPolicy::new(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // All objectives share one return function, so q_r coincide.
        let local = fit_local_policies(
            &policy,
            &[vec![0.2, 0.8]],
            32,
            &[0.5; 3],
            [0.0; 4],
            &mut rng,
            |_, _, z| Ok(EvaluatedAction { q: vec![z[1]; 3], hinge: [0.0; 4], signed: [0.0; 4] }),
        )
        .unwrap();
        let m = mixture_weights(&local, &[0.2, 0.5, 0.3]).unwrap();
        for (a, b) in m[0].iter().zip(&local.weights[0][0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_preferences_rejected() {
        let local = sample_with_objectives(2, 4);
        assert!(mixture_weights(&local, &[0.9, 0.2]).is_err());
        assert!(mixture_weights(&local, &[-0.1, 1.1]).is_err());
        assert!(mixture_weights(&local, &[1.0]).is_err());
    }

    #[test]
    fn projection_objective_never_increases() {
        let local = sample_with_objectives(3, 5);
        let mut policy = GaussianPolicy::new(2, 3);
        let fit = fit_global_policy(&mut policy, &local, &[0.3, 0.3, 0.4], 0.1, 8).unwrap();
        for pair in fit.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "trace rose: {:?}", fit.objective_trace);
        }
    }
}
