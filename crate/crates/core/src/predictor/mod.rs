//! Environment-model learning: a pluggable multi-step state predictor, a
//! trivial carry-forward baseline, and the replay buffer feeding them.

pub mod buffer;
pub mod lstm;

use std::path::Path;

use crate::error::{Error, Result};

pub use buffer::{TrajectoryBuffer, Transition};
pub use lstm::{open_loop_mse, LstmConfig, LstmPredictor, Standardizer};

/// Multi-step open-loop state predictor. `next_action` is consulted once per
/// step with the current (possibly predicted) state; after the first step the
/// predictor consumes its own outputs.
pub trait StatePredictor: Send + Sync {
    fn state_dim(&self) -> usize;

    fn rollout(
        &self,
        state: &[f64],
        next_action: &mut dyn FnMut(&[f64]) -> Vec<f64>,
        horizon: usize,
    ) -> Vec<Vec<f64>>;
}

/// Carry-forward baseline: predicts that the state never moves.
#[derive(Debug, Clone)]
pub struct LastValuePredictor {
    dim: usize,
}

impl LastValuePredictor {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl StatePredictor for LastValuePredictor {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn rollout(
        &self,
        state: &[f64],
        next_action: &mut dyn FnMut(&[f64]) -> Vec<f64>,
        horizon: usize,
    ) -> Vec<Vec<f64>> {
        (0..horizon)
            .map(|_| {
                let _ = next_action(state);
                state.to_vec()
            })
            .collect()
    }
}

/// Per-epoch training losses.
#[derive(Debug, Clone, Default)]
pub struct TrainingReport {
    pub epoch_loss: Vec<f64>,
}

/// A predictor that can be refit from the replay buffer inside the training
/// loop.
pub trait TrainablePredictor: StatePredictor {
    fn fit(
        &mut self,
        buffer: &TrajectoryBuffer,
        epochs: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<TrainingReport>;
}

impl TrainablePredictor for LstmPredictor {
    fn fit(
        &mut self,
        buffer: &TrajectoryBuffer,
        epochs: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<TrainingReport> {
        self.train(buffer, epochs, rng)
    }
}

impl TrainablePredictor for LastValuePredictor {
    fn fit(
        &mut self,
        _buffer: &TrajectoryBuffer,
        _epochs: usize,
        _rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<TrainingReport> {
        Ok(TrainingReport::default())
    }
}

const CHECKPOINT_MAGIC: &str = "sustainet-predictor v1";

/// Flat text dump of an [`LstmPredictor`]: sizes, normalization statistics,
/// then one parameter per line.
pub fn save_predictor(p: &LstmPredictor, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    writeln!(out, "state_dim {}", p.state_dim())?;
    writeln!(out, "action_dim {}", p.action_dim())?;
    writeln!(out, "hidden {}", p.cfg.hidden)?;
    for (name, s) in [("norm_state", &p.norm_state), ("norm_action", &p.norm_action), ("norm_out", &p.norm_out)]
    {
        writeln!(out, "{name}_mean {}", join(&s.mean))?;
        writeln!(out, "{name}_std {}", join(&s.std))?;
    }
    writeln!(out, "params {}", p.params().len())?;
    for v in p.params() {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

/// Load a predictor checkpoint written by [`save_predictor`].
pub fn load_predictor(path: &Path) -> Result<LstmPredictor> {
    use rand::SeedableRng;
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Config(format!("{}: not a predictor checkpoint", path.display())));
    }
    let mut kv = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Config(format!("checkpoint truncated before {key}")))?;
        line.strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::Config(format!("expected {key}, found {line}")))
    };
    let state_dim: usize = parse(&kv("state_dim")?)?;
    let action_dim: usize = parse(&kv("action_dim")?)?;
    let hidden: usize = parse(&kv("hidden")?)?;
    let mut norms = Vec::new();
    for name in ["norm_state", "norm_action", "norm_out"] {
        let mean = parse_vec(&kv(&format!("{name}_mean"))?)?;
        let std = parse_vec(&kv(&format!("{name}_std"))?)?;
        norms.push(Standardizer { mean, std });
    }
    let count: usize = parse(&kv("params")?)?;
    let mut params = Vec::with_capacity(count);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        params.push(parse::<f64>(line.trim())?);
    }
    if params.len() != count {
        return Err(Error::Config(format!("expected {count} parameters, found {}", params.len())));
    }
    let cfg = LstmConfig { hidden, ..Default::default() };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut p = LstmPredictor::new(state_dim, action_dim, cfg, &mut rng);
    if p.params().len() != count {
        return Err(Error::Config("parameter count does not match layer sizes".into()));
    }
    p.set_params(params);
    let mut it = norms.into_iter();
    p.norm_state = it.next().unwrap();
    p.norm_action = it.next().unwrap();
    p.norm_out = it.next().unwrap();
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
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_repeats_current_state() {
        let p = LastValuePredictor::new(3);
        let s = vec![1.0, 2.0, 3.0];
        let out = p.rollout(&s, &mut |_| vec![0.0], 4);
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|v| *v == s));
    }

    #[test]
    fn zero_horizon_is_empty() {
        let p = LastValuePredictor::new(2);
        assert!(p.rollout(&[0.0, 0.0], &mut |_| vec![], 0).is_empty());
    }

    #[test]
    fn rollout_shape_is_horizon_by_state_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LstmPredictor::new(4, 2, LstmConfig::default(), &mut rng);
        let out = p.rollout(&[0.0; 4], &mut |_| vec![0.5, 0.5], 5);
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|v| v.len() == 4 && v.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmPredictor::new(3, 2, LstmConfig { hidden: 8, ..Default::default() }, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictor.txt");
        save_predictor(&p, &path).unwrap();
        let q = load_predictor(&path).unwrap();
        assert_eq!(p.params(), q.params());
        let a = p.rollout(&[0.1, 0.2, 0.3], &mut |_| vec![0.4, 0.6], 3);
        let b = q.rollout(&[0.1, 0.2, 0.3], &mut |_| vec![0.4, 0.6], 3);
        assert_eq!(a, b);
    }
}
