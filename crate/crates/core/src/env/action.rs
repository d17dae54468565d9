//! Control action: per-server charging draws, transmit powers, CPU clock,
//! compute split, and dispatch preferences, plus the box the policy samples in.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};

/// Decision vector of one server for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerAction {
    /// Renewable energy requested for battery charging, in J.
    pub charge_renewable: f64,
    /// Grid energy requested for battery charging, in J.
    pub charge_grid: f64,
    /// Transmit power per assigned user, in W, ordered as in the topology.
    pub transmit_power: Vec<f64>,
    /// CPU clock in cycles/sec.
    pub cpu_clock: f64,
    /// Fraction of the workload placed on the CPU.
    pub split: f64,
    /// Fraction of demand requested from the shared renewable pool.
    pub renewable_frac: f64,
    /// Fraction of the residual demand requested from the battery.
    pub battery_frac: f64,
}

/// Network-wide action: one [`ServerAction`] per server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub servers: Vec<ServerAction>,
}

impl Action {
    pub fn is_finite(&self) -> bool {
        self.servers.iter().all(|s| {
            s.charge_renewable.is_finite()
                && s.charge_grid.is_finite()
                && s.cpu_clock.is_finite()
                && s.split.is_finite()
                && s.renewable_frac.is_finite()
                && s.battery_frac.is_finite()
                && s.transmit_power.iter().all(|p| p.is_finite())
        })
    }

    /// Total transmit power across all users, in W.
    pub fn power_sum(&self) -> f64 {
        self.servers.iter().map(|s| s.transmit_power.iter().sum::<f64>()).sum()
    }
}

/// Box bounds of the flattened action vector and the mapping between env
/// units and the unit cube the policy works in. Layout per server:
/// `[charge_renewable, charge_grid, p_0..p_{n-1}, cpu_clock, split,
/// renewable_frac, battery_frac]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpace {
    lows: Vec<f64>,
    highs: Vec<f64>,
    group_sizes: Vec<usize>,
}

impl ActionSpace {
    pub fn new(cfg: &Config) -> Self {
        let groups = cfg.assignment();
        let mut lows = Vec::new();
        let mut highs = Vec::new();
        for g in &groups {
            lows.push(0.0);
            highs.push(cfg.battery.max_charge_per_slot_joules);
            lows.push(0.0);
            highs.push(cfg.battery.max_charge_per_slot_joules);
            for _ in g {
                lows.push(0.0);
                highs.push(cfg.sim.power_budget_w);
            }
            lows.push(cfg.compute.cpu_clock_range_hz[0]);
            highs.push(cfg.compute.cpu_clock_range_hz[1]);
            for _ in 0..3 {
                lows.push(0.0);
                highs.push(1.0);
            }
        }
        Self { lows, highs, group_sizes: groups.iter().map(Vec::len).collect() }
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    /// Map a point of the unit cube into the action box.
    pub fn from_unit(&self, unit: &[f64]) -> Result<Action> {
        if unit.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: unit.len() });
        }
        let scaled: Vec<f64> = unit
            .iter()
            .zip(self.lows.iter().zip(&self.highs))
            .map(|(&u, (&lo, &hi))| lo + u.clamp(0.0, 1.0) * (hi - lo))
            .collect();
        let mut servers = Vec::with_capacity(self.group_sizes.len());
        let mut i = 0;
        for &n in &self.group_sizes {
            let charge_renewable = scaled[i];
            let charge_grid = scaled[i + 1];
            let transmit_power = scaled[i + 2..i + 2 + n].to_vec();
            let cpu_clock = scaled[i + 2 + n];
            let split = scaled[i + 3 + n];
            let renewable_frac = scaled[i + 4 + n];
            let battery_frac = scaled[i + 5 + n];
            servers.push(ServerAction {
                charge_renewable,
                charge_grid,
                transmit_power,
                cpu_clock,
                split,
                renewable_frac,
                battery_frac,
            });
            i += 6 + n;
        }
        Ok(Action { servers })
    }

    /// Flatten an action back onto the unit cube (clamped).
    pub fn to_unit(&self, action: &Action) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.dim());
        for s in &action.servers {
            flat.push(s.charge_renewable);
            flat.push(s.charge_grid);
            flat.extend_from_slice(&s.transmit_power);
            flat.push(s.cpu_clock);
            flat.push(s.split);
            flat.push(s.renewable_frac);
            flat.push(s.battery_frac);
        }
        flat.iter()
            .zip(self.lows.iter().zip(&self.highs))
            .map(|(&x, (&lo, &hi))| if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }

    /// Uniform draw over the box.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Action {
        let unit: Vec<f64> = (0..self.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        self.from_unit(&unit).expect("dimension matches")
    }

    /// Box midpoint, a reasonable fixed policy.
    pub fn midpoint(&self) -> Action {
        self.from_unit(&vec![0.5; self.dim()]).expect("dimension matches")
    }
}
