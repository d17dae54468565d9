//! Constraint multipliers found by bisection on the policy's slack response.

use crate::morl::objectives::NUM_CONSTRAINTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisectOutcome {
    /// Constraint already satisfied with strict slack at zero price.
    Inactive,
    Converged,
    /// Slack stayed positive all the way to the cap.
    Saturated,
    /// Response did not behave monotonically; the last bracket was returned.
    NonMonotone,
}

#[derive(Debug, Clone, Copy)]
pub struct MultiplierFit {
    pub value: f64,
    pub outcome: BisectOutcome,
}

/// Find the smallest multiplier at which the expected slack crosses zero.
/// `response` maps a multiplier to the expected signed slack under the
/// reweighted policy and is expected to be nonincreasing.
pub fn bisect_multiplier(
    response: impl Fn(f64) -> f64,
    lambda_max: f64,
    tol: f64,
) -> MultiplierFit {
    let mut probes: Vec<(f64, f64)> = Vec::with_capacity(66);
    let at_zero = response(0.0);
    probes.push((0.0, at_zero));
    if at_zero <= tol.max(0.0) {
        return MultiplierFit { value: 0.0, outcome: BisectOutcome::Inactive };
    }
    let at_max = response(lambda_max);
    probes.push((lambda_max, at_max));
    if at_max > 0.0 {
        return MultiplierFit { value: lambda_max, outcome: BisectOutcome::Saturated };
    }
    let (mut lo, mut hi) = (0.0, lambda_max);
    for _ in 0..64 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = response(mid);
        probes.push((mid, r));
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = 0.5 * (lo + hi);
    // The bracket is valid either way; report whether the probes we saw were
    // consistent with a nonincreasing response.
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let slack_scale = at_zero.abs().max(1.0);
    let monotone = probes.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-9 * slack_scale);
    let outcome = if monotone { BisectOutcome::Converged } else { BisectOutcome::NonMonotone };
    MultiplierFit { value, outcome }
}

/// Slack summary of one evaluated rollout.
#[derive(Debug, Clone, Copy)]
pub struct SampleSlacks {
    pub hinge: [f64; NUM_CONSTRAINTS],
    pub signed: [f64; NUM_CONSTRAINTS],
}

/// Update every multiplier from a batch of evaluated action rollouts. The
/// slack response of constraint `j` at price `λ` is the batch expectation of
/// the signed slack under weights `∝ exp(−λ·hinge_j)`: raising the price
/// shifts mass onto actions that violate less.
pub fn update_multipliers(
    samples: &[SampleSlacks],
    lambda_max: f64,
    tol: f64,
) -> ([f64; NUM_CONSTRAINTS], [MultiplierFit; NUM_CONSTRAINTS]) {
    let mut lambdas = [0.0; NUM_CONSTRAINTS];
    let mut fits = [MultiplierFit { value: 0.0, outcome: BisectOutcome::Inactive }; NUM_CONSTRAINTS];
    for j in 0..NUM_CONSTRAINTS {
        let response = |lambda: f64| -> f64 {
            let mut num = 0.0;
            let mut den = 0.0;
            // Log-space weights keep large prices from flushing everything to zero.
            let max_log = samples.iter().map(|s| -lambda * s.hinge[j]).fold(f64::NEG_INFINITY, f64::max);
            for s in samples {
                let w = (-lambda * s.hinge[j] - max_log).exp();
                num += w * s.signed[j];
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        };
        let fit = bisect_multiplier(response, lambda_max, tol);
        lambdas[j] = fit.value;
        fits[j] = fit;
    }
    (lambdas, fits)
}
