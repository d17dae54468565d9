//! Gated recurrent state predictor trained by backpropagation through time
//! on multi-step open-loop rollouts. Written directly against flat `f64`
//! buffers; the state it models is only a handful of values wide.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictor::buffer::TrajectoryBuffer;
use crate::predictor::{StatePredictor, TrainingReport};

/// Per-dimension affine normalization with a floored scale.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn fit<'a>(samples: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for s in samples.clone() {
            for (m, &x) in mean.iter_mut().zip(s) {
                *m += x;
            }
            count += 1;
        }
        if count == 0 {
            return Self::identity(dim);
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((v, &x), m) in var.iter_mut().zip(s).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var.iter().map(|v| (v / count as f64).max(1e-8).sqrt()).collect();
        Self { mean, std }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = (x[i] - self.mean[i]) / self.std[i];
        }
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.std.iter().zip(&self.mean)).map(|(&v, (&s, &m))| v * s + m).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LstmConfig {
    pub hidden: usize,
    /// Open-loop rollout length used for both training and evaluation.
    pub horizon: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    /// Windows per optimization step.
    pub batch_windows: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self { hidden: 32, horizon: 10, learning_rate: 1e-3, grad_clip: 1.0, batch_windows: 16 }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}

/// Recurrent next-state model. Input per step is the (standardized) current
/// state concatenated with the action; the output head predicts the next
/// state, which feeds back as the following step's state input.
pub struct LstmPredictor {
    state_dim: usize,
    action_dim: usize,
    hidden: usize,
    params: Vec<f64>,
    opt: Adam,
    pub norm_state: Standardizer,
    pub norm_action: Standardizer,
    pub norm_out: Standardizer,
    pub cfg: LstmConfig,
}

// Parameter layout offsets.
struct Layout {
    wx: usize,
    wh: usize,
    b: usize,
    wy: usize,
    by: usize,
    total: usize,
}

fn layout(input: usize, hidden: usize, state: usize) -> Layout {
    let wx = 0;
    let wh = wx + 4 * hidden * input;
    let b = wh + 4 * hidden * hidden;
    let wy = b + 4 * hidden;
    let by = wy + state * hidden;
    Layout { wx, wh, b, wy, by, total: by + state }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct StepTrace {
    x: Vec<f64>,
    gi: Vec<f64>,
    gf: Vec<f64>,
    go: Vec<f64>,
    gg: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    y: Vec<f64>,
}

impl LstmPredictor {
    pub fn new(state_dim: usize, action_dim: usize, cfg: LstmConfig, rng: &mut ChaCha8Rng) -> Self {
        let input = state_dim + action_dim;
        let l = layout(input, cfg.hidden, state_dim);
        let scale = 1.0 / ((input + cfg.hidden) as f64).sqrt();
        let params: Vec<f64> = (0..l.total).map(|_| rng.random_range(-scale..scale)).collect();
        Self {
            state_dim,
            action_dim,
            hidden: cfg.hidden,
            opt: Adam::new(params.len()),
            params,
            norm_state: Standardizer::identity(state_dim),
            norm_action: Standardizer::identity(action_dim),
            norm_out: Standardizer::identity(state_dim),
            cfg,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replace the parameter vector; used by checkpoint loading.
    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    fn input_dim(&self) -> usize {
        self.state_dim + self.action_dim
    }

    /// One recurrent step over a standardized input; `h` and `c` are updated
    /// in place and the standardized prediction is returned.
    fn forward_step(&self, x: &[f64], h: &mut Vec<f64>, c: &mut Vec<f64>) -> (StepTrace, Vec<f64>) {
        let hn = self.hidden;
        let input = self.input_dim();
        let l = layout(input, hn, self.state_dim);
        let mut z = vec![0.0; 4 * hn];
        for r in 0..4 * hn {
            let mut acc = self.params[l.b + r];
            let wx_row = l.wx + r * input;
            for j in 0..input {
                acc += self.params[wx_row + j] * x[j];
            }
            let wh_row = l.wh + r * hn;
            for j in 0..hn {
                acc += self.params[wh_row + j] * h[j];
            }
            z[r] = acc;
        }
        let gi: Vec<f64> = (0..hn).map(|j| sigmoid(z[j])).collect();
        let gf: Vec<f64> = (0..hn).map(|j| sigmoid(z[hn + j])).collect();
        let go: Vec<f64> = (0..hn).map(|j| sigmoid(z[2 * hn + j])).collect();
        let gg: Vec<f64> = (0..hn).map(|j| z[3 * hn + j].tanh()).collect();

        let mut c_new = vec![0.0; hn];
        let mut tanh_c = vec![0.0; hn];
        let mut h_new = vec![0.0; hn];
        for j in 0..hn {
            c_new[j] = gf[j] * c[j] + gi[j] * gg[j];
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = go[j] * tanh_c[j];
        }
        let mut y = vec![0.0; self.state_dim];
        for s in 0..self.state_dim {
            let mut acc = self.params[l.by + s];
            let row = l.wy + s * hn;
            for j in 0..hn {
                acc += self.params[row + j] * h_new[j];
            }
            y[s] = acc;
        }
        *h = h_new.clone();
        *c = c_new.clone();
        let trace = StepTrace { x: x.to_vec(), gi, gf, go, gg, c: c_new, tanh_c, h: h_new, y: y.clone() };
        (trace, y)
    }

    /// Open-loop forward over one window; returns per-step traces, the
    /// per-step standardized targets, and the loss in original units.
    fn forward_window(
        &self,
        states: &[&[f64]],
        actions: &[&[f64]],
        targets: &[&[f64]],
    ) -> (Vec<StepTrace>, Vec<Vec<f64>>, f64) {
        let n = actions.len();
        let sd = self.state_dim;
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut traces = Vec::with_capacity(n);
        let mut std_targets = Vec::with_capacity(n);
        let mut loss_orig = 0.0;

        let mut x = vec![0.0; self.input_dim()];
        self.norm_state.apply_into(states[0], &mut x[..sd]);
        for r in 0..n {
            self.norm_action.apply_into(actions[r], &mut x[sd..]);
            let (trace, y) = self.forward_step(&x.clone(), &mut h, &mut c);
            let mut t_std = vec![0.0; sd];
            self.norm_out.apply_into(targets[r], &mut t_std);
            for s in 0..sd {
                let e_orig = (y[s] - t_std[s]) * self.norm_out.std[s];
                loss_orig += e_orig * e_orig;
            }
            // Feed the prediction back as the next state input.
            if r + 1 < n {
                for s in 0..sd {
                    let orig = y[s] * self.norm_out.std[s] + self.norm_out.mean[s];
                    x[s] = (orig - self.norm_state.mean[s]) / self.norm_state.std[s];
                }
            }
            traces.push(trace);
            std_targets.push(t_std);
        }
        (traces, std_targets, loss_orig / (n * sd) as f64)
    }

    /// Accumulate gradients for one window. Returns the standardized-space
    /// loss actually differentiated.
    fn backward_window(&self, traces: &[StepTrace], targets: &[Vec<f64>], grads: &mut [f64]) -> f64 {
        let n = traces.len();
        let hn = self.hidden;
        let sd = self.state_dim;
        let input = self.input_dim();
        let l = layout(input, hn, sd);
        let denom = (n * sd) as f64;

        let mut loss = 0.0;
        let mut dy_extra = vec![vec![0.0; sd]; n];
        let mut dh_carry = vec![0.0; hn];
        let mut dc_carry = vec![0.0; hn];

        for r in (0..n).rev() {
            let tr = &traces[r];
            let mut dy = vec![0.0; sd];
            for s in 0..sd {
                let e = tr.y[s] - targets[r][s];
                loss += e * e / denom;
                dy[s] = 2.0 * e / denom + dy_extra[r][s];
            }
            // Output head.
            let mut dh = dh_carry.clone();
            for s in 0..sd {
                grads[l.by + s] += dy[s];
                let row = l.wy + s * hn;
                for j in 0..hn {
                    grads[row + j] += dy[s] * tr.h[j];
                    dh[j] += self.params[row + j] * dy[s];
                }
            }
            let c_prev: Vec<f64> =
                if r == 0 { vec![0.0; hn] } else { traces[r - 1].c.clone() };
            let h_prev: Vec<f64> =
                if r == 0 { vec![0.0; hn] } else { traces[r - 1].h.clone() };

            let mut dz = vec![0.0; 4 * hn];
            let mut dc_prev = vec![0.0; hn];
            for j in 0..hn {
                let do_ = dh[j] * tr.tanh_c[j];
                let dc = dh[j] * tr.go[j] * (1.0 - tr.tanh_c[j] * tr.tanh_c[j]) + dc_carry[j];
                let di = dc * tr.gg[j];
                let df = dc * c_prev[j];
                let dg = dc * tr.gi[j];
                dc_prev[j] = dc * tr.gf[j];
                dz[j] = di * tr.gi[j] * (1.0 - tr.gi[j]);
                dz[hn + j] = df * tr.gf[j] * (1.0 - tr.gf[j]);
                dz[2 * hn + j] = do_ * tr.go[j] * (1.0 - tr.go[j]);
                dz[3 * hn + j] = dg * (1.0 - tr.gg[j] * tr.gg[j]);
            }
            dc_carry = dc_prev;

            let mut dx = vec![0.0; input];
            let mut dh_prev = vec![0.0; hn];
            for row in 0..4 * hn {
                let g = dz[row];
                if g == 0.0 {
                    continue;
                }
                grads[l.b + row] += g;
                let wx_row = l.wx + row * input;
                for j in 0..input {
                    grads[wx_row + j] += g * tr.x[j];
                    dx[j] += self.params[wx_row + j] * g;
                }
                let wh_row = l.wh + row * hn;
                for j in 0..hn {
                    grads[wh_row + j] += g * h_prev[j];
                    dh_prev[j] += self.params[wh_row + j] * g;
                }
            }
            dh_carry = dh_prev;

            // The state slice of this step's input was the previous step's
            // prediction: route its gradient back through the affine bridge.
            if r > 0 {
                for s in 0..sd {
                    dy_extra[r - 1][s] += dx[s] * self.norm_out.std[s] / self.norm_state.std[s];
                }
            }
        }
        loss
    }

    /// Fit on the buffer for `epochs` optimization rounds. Zero epochs leave
    /// the model untouched and return an empty report.
    pub fn train(
        &mut self,
        buffer: &TrajectoryBuffer,
        epochs: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrainingReport> {
        if epochs == 0 {
            return Ok(TrainingReport::default());
        }
        let n = self.cfg.horizon;
        let starts = buffer.window_starts(n);
        if starts.is_empty() {
            return Err(Error::InsufficientData(format!(
                "buffer holds {} transitions, none form a contiguous window of {n}",
                buffer.len()
            )));
        }
        self.norm_state = Standardizer::fit(buffer.iter().map(|t| t.state.as_slice()), self.state_dim);
        self.norm_action =
            Standardizer::fit(buffer.iter().map(|t| t.action.as_slice()), self.action_dim);
        self.norm_out =
            Standardizer::fit(buffer.iter().map(|t| t.next_state.as_slice()), self.state_dim);

        let mut report = TrainingReport::default();
        let mut grads = vec![0.0; self.params.len()];
        for _ in 0..epochs {
            // Full batch when small; otherwise sample windows with replacement.
            let batch: Vec<usize> = if starts.len() <= self.cfg.batch_windows {
                starts.clone()
            } else {
                (0..self.cfg.batch_windows)
                    .map(|_| starts[rng.random_range(0..starts.len())])
                    .collect()
            };
            grads.iter_mut().for_each(|g| *g = 0.0);
            let mut epoch_loss = 0.0;
            for &start in &batch {
                let states: Vec<&[f64]> =
                    (0..n).map(|i| buffer.get(start + i).state.as_slice()).collect();
                let actions: Vec<&[f64]> =
                    (0..n).map(|i| buffer.get(start + i).action.as_slice()).collect();
                let targets: Vec<&[f64]> =
                    (0..n).map(|i| buffer.get(start + i).next_state.as_slice()).collect();
                let (traces, std_targets, loss_orig) = self.forward_window(&states, &actions, &targets);
                self.backward_window(&traces, &std_targets, &mut grads);
                epoch_loss += loss_orig;
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > self.cfg.grad_clip {
                let s = self.cfg.grad_clip / norm;
                grads.iter_mut().for_each(|g| *g *= s);
            }
            self.opt.step(&mut self.params, &grads, self.cfg.learning_rate);
            if self.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged("predictor parameters became non-finite".into()));
            }
            report.epoch_loss.push(epoch_loss / batch.len() as f64);
        }
        Ok(report)
    }
}

impl StatePredictor for LstmPredictor {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn rollout(
        &self,
        state: &[f64],
        next_action: &mut dyn FnMut(&[f64]) -> Vec<f64>,
        horizon: usize,
    ) -> Vec<Vec<f64>> {
        let sd = self.state_dim;
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut x = vec![0.0; self.input_dim()];
        let mut current = state.to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let action = next_action(&current);
            self.norm_state.apply_into(&current, &mut x[..sd]);
            self.norm_action.apply_into(&action, &mut x[sd..]);
            let (_, y) = self.forward_step(&x.clone(), &mut h, &mut c);
            current = self.norm_out.invert(&y);
            out.push(current.clone());
        }
        out
    }
}

/// Mean squared n-step open-loop error over every window in the buffer,
/// replaying the recorded actions. Works for any predictor, so it doubles as
/// the yardstick for the carry-forward baseline.
pub fn open_loop_mse(
    predictor: &dyn StatePredictor,
    buffer: &TrajectoryBuffer,
    horizon: usize,
) -> Result<f64> {
    let starts = buffer.window_starts(horizon);
    if starts.is_empty() {
        return Err(Error::InsufficientData("no complete windows".into()));
    }
    let sd = predictor.state_dim();
    let mut total = 0.0;
    for &start in &starts {
        let mut i = 0;
        let preds = predictor.rollout(
            &buffer.get(start).state,
            &mut |_| {
                let a = buffer.get(start + i).action.clone();
                i += 1;
                a
            },
            horizon,
        );
        for (r, p) in preds.iter().enumerate() {
            let target = &buffer.get(start + r).next_state;
            for s in 0..sd {
                let e = p[s] - target[s];
                total += e * e;
            }
        }
    }
    Ok(total / (starts.len() * horizon * sd) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::buffer::Transition;
    use crate::predictor::LastValuePredictor;
    use rand::SeedableRng;

    fn constant_buffer(value: f64, len: usize) -> TrajectoryBuffer {
        let mut buf = TrajectoryBuffer::new(len, 2, 1);
        for _ in 0..len {
            buf.record(Transition {
                episode: 0,
                state: vec![value, -value],
                action: vec![0.5],
                next_state: vec![value, -value],
            })
            .unwrap();
        }
        buf
    }

    #[test]
    fn zero_epochs_change_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = LstmPredictor::new(2, 1, LstmConfig::default(), &mut rng);
        let before = p.params().to_vec();
        let buf = constant_buffer(1.0, 32);
        let report = p.train(&buf, 0, &mut rng).unwrap();
        assert!(report.epoch_loss.is_empty());
        assert_eq!(p.params(), &before[..]);
    }

    #[test]
    fn constant_sequence_converges_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = LstmConfig { horizon: 5, ..Default::default() };
        let mut p = LstmPredictor::new(2, 1, cfg, &mut rng);
        let buf = constant_buffer(3.0, 64);
        let report = p.train(&buf, 200, &mut rng).unwrap();
        assert!(*report.epoch_loss.last().unwrap() < 1e-6, "loss {:?}", report.epoch_loss.last());
        let mse = open_loop_mse(&p, &buf, 5).unwrap();
        assert!(mse < 1e-6, "open-loop mse {mse}");
    }

    #[test]
    fn insufficient_data_is_signaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = LstmPredictor::new(2, 1, LstmConfig::default(), &mut rng);
        let buf = constant_buffer(1.0, 3); // shorter than the horizon
        assert!(matches!(p.train(&buf, 5, &mut rng), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = LstmConfig { hidden: 4, horizon: 3, ..Default::default() };
        let mut p = LstmPredictor::new(2, 1, cfg, &mut rng);
        // Give the normalizers a non-trivial shape.
        p.norm_state = Standardizer { mean: vec![0.1, -0.2], std: vec![0.9, 1.1] };
        p.norm_out = Standardizer { mean: vec![0.05, 0.0], std: vec![1.2, 0.8] };

        let states: Vec<Vec<f64>> = vec![vec![0.3, -0.1], vec![0.2, 0.1], vec![0.0, 0.4]];
        let actions: Vec<Vec<f64>> = vec![vec![0.7], vec![0.2], vec![0.9]];
        let targets: Vec<Vec<f64>> = vec![vec![0.2, 0.1], vec![0.0, 0.4], vec![-0.1, 0.2]];
        let sr: Vec<&[f64]> = states.iter().map(|v| v.as_slice()).collect();
        let ar: Vec<&[f64]> = actions.iter().map(|v| v.as_slice()).collect();
        let tr: Vec<&[f64]> = targets.iter().map(|v| v.as_slice()).collect();

        let mut grads = vec![0.0; p.params.len()];
        let (traces, std_t, _) = p.forward_window(&sr, &ar, &tr);
        let loss0 = p.backward_window(&traces, &std_t, &mut grads);

        let eps = 1e-6;
        for &idx in &[0usize, 7, p.params.len() / 2, p.params.len() - 1] {
            let saved = p.params[idx];
            p.params[idx] = saved + eps;
            let (tr2, std2, _) = p.forward_window(&sr, &ar, &tr);
            let mut sink = vec![0.0; p.params.len()];
            let loss_plus = p.backward_window(&tr2, &std2, &mut sink);
            p.params[idx] = saved;
            let fd = (loss_plus - loss0) / eps;
            assert!(
                (fd - grads[idx]).abs() < 1e-4 * fd.abs().max(1.0),
                "param {idx}: fd {fd} vs analytic {}",
                grads[idx]
            );
        }
    }

    #[test]
    fn sinusoid_beats_carry_forward() {
        // Smooth oscillation: multi-step prediction should comfortably beat
        // persistence at a 10-step horizon.
        let mut buf = TrajectoryBuffer::new(512, 2, 1);
        for t in 0..400u64 {
            let phase = 2.0 * std::f64::consts::PI * (t as f64) / 100.0;
            let next = 2.0 * std::f64::consts::PI * ((t + 1) as f64) / 100.0;
            buf.record(Transition {
                episode: 0,
                state: vec![phase.sin(), phase.cos()],
                action: vec![0.0],
                next_state: vec![next.sin(), next.cos()],
            })
            .unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = LstmConfig { horizon: 10, ..Default::default() };
        let mut p = LstmPredictor::new(2, 1, cfg, &mut rng);
        p.train(&buf, 400, &mut rng).unwrap();
        let trained = open_loop_mse(&p, &buf, 10).unwrap();
        let baseline = open_loop_mse(&LastValuePredictor::new(2), &buf, 10).unwrap();
        assert!(trained < baseline, "trained {trained} vs carry-forward {baseline}");
    }
}
