//! Experiment harness: seeded multi-run sweeps over arrival rate, time, or
//! preference weights, with a plain-text results table.

pub mod report;

use std::path::Path;

use rayon::prelude::*;

use crate::baselines::Method;
use crate::env::{ModelParams, SlotMeasurement};
use crate::error::{Error, Result};
use crate::morl::{evaluate_policy, train, GaussianPolicy, TrainConfig};
use crate::Config;

/// Sweep axis. The three modes mirror the standard experiment trio:
/// load sweep, convergence over time, and the preference tradeoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    ArrivalRate,
    TimeSeries,
    Preference,
}

impl SweepMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fig2" | "arrival" => Ok(SweepMode::ArrivalRate),
            "fig3" | "time" => Ok(SweepMode::TimeSeries),
            "fig4" | "preference" => Ok(SweepMode::Preference),
            other => Err(Error::Config(format!(
                "unknown sweep mode {other:?}; expected fig2|fig3|fig4"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepMode::ArrivalRate => "arrival_rate",
            SweepMode::TimeSeries => "time",
            SweepMode::Preference => "preference",
        }
    }
}

/// Evenly spaced preference points from delay-heavy to sustainability-heavy.
pub fn zeta_sweep_points() -> Vec<[f64; 3]> {
    (0..11)
        .map(|i| {
            let t = i as f64 / 10.0;
            [0.1 + 0.7 * t, 0.1, 0.8 - 0.7 * t]
        })
        .collect()
}

/// One experiment: a config, the methods to compare, seeds, and a sweep axis.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub config: Config,
    pub methods: Vec<Method>,
    pub mode: SweepMode,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// Preference over (sustainability, energy, delay) for training.
    pub zeta: [f64; 3],
    /// Arrival-rate sweep axis, packets per slot per user.
    pub arrival_rates: Vec<f64>,
    /// Arrival rate used for training in the rate and time sweeps.
    pub train_arrival_rate: f64,
    /// Slots of the time-series sweep.
    pub time_slots: usize,
    pub zeta_points: Vec<[f64; 3]>,
    pub eval_episodes: usize,
}

impl Experiment {
    pub fn new(config: Config, mode: SweepMode, methods: Vec<Method>, seeds: Vec<u64>) -> Self {
        Self {
            name: format!("sweep_{}", mode.name()),
            config,
            methods,
            mode,
            seeds,
            train: TrainConfig::default(),
            zeta: [1.0 / 3.0; 3],
            arrival_rates: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            train_arrival_rate: 15.0,
            time_slots: 2000,
            zeta_points: zeta_sweep_points(),
            eval_episodes: 5,
        }
    }
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "sweep_value",
    "method",
    "seed",
    "emissions_per_bit",
    "mean_S",
    "energy_per_bit",
    "mean_delay",
    "viol_D1",
    "viol_D3",
];

pub const METRICS_PER_ROW: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub method: String,
    pub seed: u64,
    pub metrics: [f64; METRICS_PER_ROW],
}

impl ResultRow {
    pub fn emissions_per_bit(&self) -> f64 {
        self.metrics[0]
    }

    pub fn mean_delay(&self) -> f64 {
        self.metrics[3]
    }
}

/// Across-seed mean and standard deviation for one sweep point and method.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_value: f64,
    pub method: String,
    pub mean: [f64; METRICS_PER_ROW],
    pub sd: [f64; METRICS_PER_ROW],
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Per-row failures that did not stop the sweep.
    pub failures: Vec<String>,
}

impl ResultsTable {
    /// Recompute the aggregate rows from the per-seed rows (Welford pass).
    pub fn aggregate(&mut self) {
        let mut keys: Vec<(f64, String)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(v, m)| *v == r.sweep_value && *m == r.method) {
                keys.push((r.sweep_value, r.method.clone()));
            }
        }
        self.aggregates = keys
            .into_iter()
            .map(|(sweep_value, method)| {
                let mut count = 0.0;
                let mut mean = [0.0; METRICS_PER_ROW];
                let mut m2 = [0.0; METRICS_PER_ROW];
                for r in
                    self.rows.iter().filter(|r| r.sweep_value == sweep_value && r.method == method)
                {
                    count += 1.0;
                    for j in 0..METRICS_PER_ROW {
                        let delta = r.metrics[j] - mean[j];
                        mean[j] += delta / count;
                        m2[j] += delta * (r.metrics[j] - mean[j]);
                    }
                }
                let sd = std::array::from_fn(|j| if count > 1.0 { (m2[j] / count).sqrt() } else { 0.0 });
                AggregateRow { sweep_value, method, mean, sd }
            })
            .collect();
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&RESULT_COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:e},{},{}", r.sweep_value, r.method, r.seed));
            for m in r.metrics {
                out.push_str(&format!(",{m:e}"));
            }
            out.push('\n');
        }
        for a in &self.aggregates {
            out.push_str(&format!("{:e},{},agg", a.sweep_value, a.method));
            for j in 0..METRICS_PER_ROW {
                out.push_str(&format!(",{:e}±{:e}", a.mean[j], a.sd[j]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != RESULT_COLUMNS.join(",") {
            return Err(Error::Config(format!("{}: unexpected results header", path.display())));
        }
        let mut table = ResultsTable::default();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != RESULT_COLUMNS.len() {
                return Err(Error::Config(format!("malformed results row: {line}")));
            }
            let sweep_value: f64 = parse_num(fields[0])?;
            let method = fields[1].to_string();
            if fields[2] == "agg" {
                let mut mean = [0.0; METRICS_PER_ROW];
                let mut sd = [0.0; METRICS_PER_ROW];
                for j in 0..METRICS_PER_ROW {
                    let cell = fields[3 + j];
                    let (m, s) = cell
                        .split_once('±')
                        .ok_or_else(|| Error::Config(format!("malformed aggregate cell {cell}")))?;
                    mean[j] = parse_num(m)?;
                    sd[j] = parse_num(s)?;
                }
                table.aggregates.push(AggregateRow { sweep_value, method, mean, sd });
            } else {
                let seed: u64 = fields[2]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed field {}", fields[2])))?;
                let mut metrics = [0.0; METRICS_PER_ROW];
                for j in 0..METRICS_PER_ROW {
                    metrics[j] = parse_num(fields[3 + j])?;
                }
                table.rows.push(ResultRow { sweep_value, method, seed, metrics });
            }
        }
        Ok(table)
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Config(format!("cannot parse number {s:?}")))
}

/// Reduce evaluation measurements to the six reported metrics.
pub fn metrics_of(measurements: &[SlotMeasurement], cfg: &Config) -> [f64; METRICS_PER_ROW] {
    let n = measurements.len() as f64;
    let d1_tol = 1e-9 * cfg.sim.renewable_cap_joules.max(1.0);
    let d3_tol = 1e-9 * cfg.sim.power_budget_w.max(1.0);
    let mut out = [0.0; METRICS_PER_ROW];
    for m in measurements {
        out[0] += m.emissions_per_bit / n;
        out[1] += m.sustainability / n;
        out[2] += m.energy_per_bit / n;
        out[3] += m.mean_delay() / n;
        if m.slack_renewable > d1_tol {
            out[4] += 1.0 / n;
        }
        if m.slack_power > d3_tol {
            out[5] += 1.0 / n;
        }
    }
    out
}

fn single_slot_metrics(m: &SlotMeasurement, cfg: &Config) -> [f64; METRICS_PER_ROW] {
    metrics_of(std::slice::from_ref(m), cfg)
}

struct TaskOutput {
    rows: Vec<ResultRow>,
    failure: Option<String>,
}

/// Train one policy per (method, seed) task and evaluate it along the sweep
/// axis. Tasks run in parallel; each is independently seeded, so the table
/// does not depend on scheduling. Failed tasks are recorded and skipped.
pub fn run_sweep(exp: &Experiment) -> Result<ResultsTable> {
    let mut tasks: Vec<(usize, Method, u64, Option<[f64; 3]>)> = Vec::new();
    match exp.mode {
        SweepMode::ArrivalRate | SweepMode::TimeSeries => {
            let mut idx = 0;
            for method in &exp.methods {
                for &seed in &exp.seeds {
                    tasks.push((idx, method.clone(), seed, None));
                    idx += 1;
                }
            }
        }
        SweepMode::Preference => {
            let mut idx = 0;
            for method in &exp.methods {
                for zeta in &exp.zeta_points {
                    for &seed in &exp.seeds {
                        tasks.push((idx, method.clone(), seed, Some(*zeta)));
                        idx += 1;
                    }
                }
            }
        }
    }

    let mut outputs: Vec<(usize, TaskOutput)> = tasks
        .par_iter()
        .map(|(idx, method, seed, zeta_override)| {
            let out = run_task(exp, method, *seed, *zeta_override);
            (*idx, out)
        })
        .collect();
    outputs.sort_by_key(|(idx, _)| *idx);

    let mut table = ResultsTable::default();
    for (_, out) in outputs {
        table.rows.extend(out.rows);
        if let Some(f) = out.failure {
            table.failures.push(f);
        }
    }
    table.aggregate();
    Ok(table)
}

fn run_task(exp: &Experiment, method: &Method, seed: u64, zeta_override: Option<[f64; 3]>) -> TaskOutput {
    let zeta = zeta_override.unwrap_or(exp.zeta);
    let label = format!("{} seed {} ζ {:?}", method.name(), seed, zeta);
    match run_task_inner(exp, method, seed, zeta, zeta_override.is_some()) {
        Ok(rows) => TaskOutput { rows, failure: None },
        Err(e) => TaskOutput { rows: Vec::new(), failure: Some(format!("{label}: {e}")) },
    }
}

fn train_model(exp: &Experiment, rate: f64) -> Result<ModelParams> {
    let mut model = ModelParams::new(&exp.config)?;
    model.set_arrival_means(rate);
    Ok(model)
}

fn run_task_inner(
    exp: &Experiment,
    method: &Method,
    seed: u64,
    zeta: [f64; 3],
    is_preference: bool,
) -> Result<Vec<ResultRow>> {
    let tcfg = TrainConfig { seed, ..exp.train.clone() };
    let eval_seed_base = 1_000_000 + seed * 1000;
    match exp.mode {
        SweepMode::ArrivalRate => {
            let model = train_model(exp, exp.train_arrival_rate)?;
            let outcome = train(&model, method, zeta, &tcfg)?;
            let mut rows = Vec::with_capacity(exp.arrival_rates.len());
            for &rate in &exp.arrival_rates {
                let mut eval_model = model.clone();
                eval_model.set_arrival_means(rate);
                let ms =
                    evaluate_policy(&eval_model, &outcome.policy, exp.eval_episodes, eval_seed_base)?;
                rows.push(ResultRow {
                    sweep_value: rate,
                    method: method.name().to_string(),
                    seed,
                    metrics: metrics_of(&ms, &exp.config),
                });
            }
            Ok(rows)
        }
        SweepMode::TimeSeries => {
            let model = train_model(exp, exp.train_arrival_rate)?;
            let outcome = train(&model, method, zeta, &tcfg)?;
            let mut long_model = model.clone();
            long_model.cfg.sim.horizon_slots = exp.time_slots;
            let ms = evaluate_policy(&long_model, &outcome.policy, 1, eval_seed_base)?;
            Ok(ms
                .iter()
                .map(|m| ResultRow {
                    sweep_value: m.slot as f64,
                    method: method.name().to_string(),
                    seed,
                    metrics: single_slot_metrics(m, &exp.config),
                })
                .collect())
        }
        SweepMode::Preference => {
            debug_assert!(is_preference);
            let model = train_model(exp, exp.train_arrival_rate)?;
            let outcome = train(&model, method, zeta, &tcfg)?;
            let ms = evaluate_policy(&model, &outcome.policy, exp.eval_episodes, eval_seed_base)?;
            Ok(vec![ResultRow {
                sweep_value: zeta[0],
                method: method.name().to_string(),
                seed,
                metrics: metrics_of(&ms, &exp.config),
            }])
        }
    }
}

/// Roll a fixed or uniform-random policy and return the trajectory; the
/// `simulate` entry point of the command-line tool.
pub fn simulate(config: &Config, seed: u64, slots: usize, random: bool) -> Result<Vec<SlotMeasurement>> {
    use rand::SeedableRng;
    let mut model = ModelParams::new(config)?;
    model.cfg.sim.horizon_slots = slots;
    let mut env = crate::env::NetworkEnv::from_model(model);
    let space = env.action_space().clone();
    env.reset(seed);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(slots);
    for _ in 0..slots {
        let action = if random { space.sample_uniform(&mut rng) } else { space.midpoint() };
        out.push(env.step(&action)?);
    }
    Ok(out)
}
