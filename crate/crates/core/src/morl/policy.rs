//! Parametric global policy: a state-linear Gaussian with diagonal scale
//! over the pre-squash action space. Samples are squashed onto the unit cube
//! before being scaled into the action box.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::predictor::Standardizer;

const SCALE_FLOOR: f64 = 0.05;
const SCALE_CAP: f64 = 5.0;
const RIDGE: f64 = 1e-8;

/// One weighted maximum-likelihood sample: state features, a pre-squash
/// action, and its mixture weight.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub features: Vec<f64>,
    pub z: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    state_dim: usize,
    action_dim: usize,
    /// Mean map, `action_dim × (state_dim + 1)` row-major over `[1, s]`.
    weights: Vec<f64>,
    /// Per-dimension log standard deviation, state-independent.
    log_scale: Vec<f64>,
    /// State normalization applied inside the feature map.
    pub norm: Standardizer,
}

impl GaussianPolicy {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            weights: vec![0.0; action_dim * (state_dim + 1)],
            log_scale: vec![0.0; action_dim],
            norm: Standardizer::identity(state_dim),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn feature_dim(&self) -> usize {
        self.state_dim + 1
    }

    /// `[1, standardized state]`.
    pub fn features(&self, observation: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.feature_dim()];
        f[0] = 1.0;
        self.norm.apply_into(observation, &mut f[1..]);
        f
    }

    pub fn mean(&self, features: &[f64]) -> Vec<f64> {
        let fd = self.feature_dim();
        (0..self.action_dim)
            .map(|a| {
                let row = a * fd;
                features.iter().enumerate().map(|(j, &x)| self.weights[row + j] * x).sum()
            })
            .collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.log_scale.iter().map(|u| u.exp()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.log_scale.iter().any(|u| !u.is_finite() || u.exp() <= 0.0) {
            return Err(Error::Diverged("policy scale degenerate".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged("policy weights non-finite".into()));
        }
        Ok(())
    }

    /// Draw a pre-squash action.
    pub fn sample(&self, rng: &mut ChaCha8Rng, features: &[f64]) -> Vec<f64> {
        let mean = self.mean(features);
        let unit = Normal::new(0.0, 1.0).unwrap();
        mean.iter()
            .zip(&self.log_scale)
            .map(|(&m, &u)| m + u.exp() * unit.sample(rng))
            .collect()
    }

    /// Squash a pre-squash action onto the unit cube.
    pub fn squash(z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect()
    }

    /// Deterministic unit-cube action: the squashed mean.
    pub fn mean_unit(&self, observation: &[f64]) -> Vec<f64> {
        Self::squash(&self.mean(&self.features(observation)))
    }

    pub fn log_prob(&self, features: &[f64], z: &[f64]) -> f64 {
        let mean = self.mean(features);
        let mut lp = 0.0;
        for ((&m, &u), &v) in mean.iter().zip(&self.log_scale).zip(z) {
            let s = u.exp();
            let d = (v - m) / s;
            lp += -0.5 * d * d - u - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }

    /// Negative weighted log-likelihood of the samples: the projection
    /// objective tracked across inner iterations.
    pub fn objective(&self, samples: &[WeightedSample]) -> f64 {
        samples.iter().map(|s| -s.weight * self.log_prob(&s.features, &s.z)).sum()
    }

    /// One weighted maximum-likelihood step with a per-parameter trust bound
    /// of `delta`. Both sub-steps move toward the closed-form optimum, so the
    /// objective never increases. Returns the objective after the step.
    pub fn fit_step(&mut self, samples: &[WeightedSample], delta: f64) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no weighted samples".into()));
        }
        let fd = self.feature_dim();
        let ad = self.action_dim;

        // Weighted normal equations, one shared Gram matrix.
        let mut gram = vec![0.0; fd * fd];
        let mut rhs = vec![0.0; fd * ad];
        let mut weight_sum = 0.0;
        for s in samples {
            weight_sum += s.weight;
            for i in 0..fd {
                let wfi = s.weight * s.features[i];
                for j in 0..fd {
                    gram[i * fd + j] += wfi * s.features[j];
                }
                for a in 0..ad {
                    rhs[i * ad + a] += wfi * s.z[a];
                }
            }
        }
        if weight_sum <= 0.0 {
            return Err(Error::InsufficientData("sample weights sum to zero".into()));
        }
        for i in 0..fd {
            gram[i * fd + i] += RIDGE * weight_sum.max(1.0);
        }
        let solution = solve_multi(&gram, fd, &rhs, ad)?;

        // Mean step: scale the full direction so no entry moves more than delta.
        let mut max_move: f64 = 0.0;
        for a in 0..ad {
            for j in 0..fd {
                let target = solution[j * ad + a];
                max_move = max_move.max((target - self.weights[a * fd + j]).abs());
            }
        }
        let t = if max_move > delta { delta / max_move } else { 1.0 };
        for a in 0..ad {
            for j in 0..fd {
                let target = solution[j * ad + a];
                let w = &mut self.weights[a * fd + j];
                *w += t * (target - *w);
            }
        }

        // Scale step: move each log-scale toward its weighted ML value,
        // clamped to delta per coordinate.
        for a in 0..ad {
            let mut sq = 0.0;
            for s in samples {
                let row = a * fd;
                let mean: f64 =
                    s.features.iter().enumerate().map(|(j, &x)| self.weights[row + j] * x).sum();
                let d = s.z[a] - mean;
                sq += s.weight * d * d;
            }
            let target_var = (sq / weight_sum).max(SCALE_FLOOR * SCALE_FLOOR);
            let target_u = 0.5 * target_var.ln();
            let step = (target_u - self.log_scale[a]).clamp(-delta, delta);
            self.log_scale[a] =
                (self.log_scale[a] + step).clamp(SCALE_FLOOR.ln(), SCALE_CAP.ln());
        }
        self.validate()?;
        Ok(self.objective(samples))
    }
}

/// Solve `A X = B` for `n × n` A and `n × m` B by Gaussian elimination with
/// partial pivoting. Row-major everywhere.
fn solve_multi(a: &[f64], n: usize, b: &[f64], m: usize) -> Result<Vec<f64>> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Diverged("singular system in policy fit".into()));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            for j in 0..m {
                b.swap(col * m + j, pivot * m + j);
            }
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            for j in 0..m {
                b[row * m + j] -= factor * b[col * m + j];
            }
        }
    }
    for col in (0..n).rev() {
        let diag = a[col * n + col];
        for j in 0..m {
            let mut acc = b[col * m + j];
            for k in col + 1..n {
                acc -= a[col * n + k] * b[k * m + j];
            }
            b[col * m + j] = acc / diag;
        }
    }
    Ok(b)
}

const POLICY_MAGIC: &str = "sustainet-policy v1";

pub fn save_policy(p: &GaussianPolicy, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{POLICY_MAGIC}")?;
    writeln!(out, "state_dim {}", p.state_dim)?;
    writeln!(out, "action_dim {}", p.action_dim)?;
    writeln!(out, "norm_mean {}", join(&p.norm.mean))?;
    writeln!(out, "norm_std {}", join(&p.norm.std))?;
    writeln!(out, "params {}", p.weights.len() + p.log_scale.len())?;
    for v in p.weights.iter().chain(&p.log_scale) {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<GaussianPolicy> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(POLICY_MAGIC) {
        return Err(Error::Config(format!("{}: not a policy checkpoint", path.display())));
    }
    let mut kv = |key: &str| -> Result<String> {
        let line =
            lines.next().ok_or_else(|| Error::Config(format!("checkpoint truncated at {key}")))?;
        line.strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::Config(format!("expected {key}, found {line}")))
    };
    let state_dim: usize = parse(&kv("state_dim")?)?;
    let action_dim: usize = parse(&kv("action_dim")?)?;
    let mean = parse_vec(&kv("norm_mean")?)?;
    let std = parse_vec(&kv("norm_std")?)?;
    let count: usize = parse(&kv("params")?)?;
    let values: Vec<f64> =
        lines.filter(|l| !l.trim().is_empty()).map(|l| parse::<f64>(l.trim())).collect::<Result<_>>()?;
    if values.len() != count || count != action_dim * (state_dim + 1) + action_dim {
        return Err(Error::Config("policy checkpoint parameter count mismatch".into()));
    }
    let mut p = GaussianPolicy::new(state_dim, action_dim);
    let split = action_dim * (state_dim + 1);
    p.weights = values[..split].to_vec();
    p.log_scale = values[split..].to_vec();
    p.norm = Standardizer { mean, std };
    p.validate()?;
    Ok(p)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Config(format!("cannot parse checkpoint field {s:?}")))
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(parse::<f64>).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fresh_policy_centers_the_box() {
        let p = GaussianPolicy::new(2, 3);
        let unit = p.mean_unit(&[0.4, -0.2]);
        assert!(unit.iter().all(|&u| (u - 0.5).abs() < 1e-12));
    }

    #[test]
    fn density_normalizes_in_one_dimension() {
        // Numeric integral of exp(log_prob) over a wide grid ≈ 1.
        let p = GaussianPolicy::new(1, 1);
        let f = p.features(&[0.3]);
        let mut integral = 0.0;
        let step = 0.01;
        let mut x = -10.0;
        while x < 10.0 {
            integral += p.log_prob(&f, &[x]).exp() * step;
            x += step;
        }
        assert!((integral - 1.0).abs() < 1e-3, "integral {integral}");
    }

    #[test]
    fn weighted_fit_recovers_targets() {
        let mut p = GaussianPolicy::new(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Weighted samples centered at 1.2 regardless of state.
        let samples: Vec<WeightedSample> = (0..200)
            .map(|_| WeightedSample {
                features: vec![1.0, rng.random_range(-1.0..1.0)],
                z: vec![1.2 + rng.random_range(-0.01..0.01)],
                weight: 1.0,
            })
            .collect();
        let mut last = f64::INFINITY;
        for _ in 0..40 {
            let obj = p.fit_step(&samples, 0.1).unwrap();
            assert!(obj <= last + 1e-9, "objective rose: {obj} > {last}");
            last = obj;
        }
        let mean = p.mean(&[1.0, 0.0]);
        assert!((mean[0] - 1.2).abs() < 0.05, "mean {}", mean[0]);
    }

    #[test]
    fn trust_region_caps_each_step() {
        let mut p = GaussianPolicy::new(1, 1);
        let samples = vec![WeightedSample { features: vec![1.0, 0.0], z: vec![50.0], weight: 1.0 }];
        let before = p.weights.clone();
        p.fit_step(&samples, 0.1).unwrap();
        for (a, b) in before.iter().zip(&p.weights) {
            assert!((a - b).abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut p = GaussianPolicy::new(2, 3);
        p.weights[0] = 0.7;
        p.log_scale[1] = -0.3;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.txt");
        save_policy(&p, &path).unwrap();
        let q = load_policy(&path).unwrap();
        assert_eq!(p.weights, q.weights);
        assert_eq!(p.log_scale, q.log_scale);
    }
}
