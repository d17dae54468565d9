//! Simulation configuration: slot timing, fleet sizes, traffic, compute,
//! battery, and emission-process parameters, loadable from a TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top-level simulator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// Slot duration in seconds.
    pub slot_seconds: f64,
    /// Number of downlink users.
    pub users: usize,
    /// Number of compute servers.
    pub servers: usize,
    /// Channel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Receiver noise power in W (noise spectral density times bandwidth).
    pub noise_power_w: f64,
    /// Total transmit power budget across users, in W.
    pub power_budget_w: f64,
    /// Renewable energy available per slot across all servers, in J.
    pub renewable_cap_joules: f64,
    /// Slots per episode.
    pub horizon_slots: usize,
    /// Base RNG seed for parameter sampling and episode streams.
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            slot_seconds: 1e-3,
            users: 10,
            servers: 4,
            bandwidth_hz: 5.0e6,
            // 10 dB mean receive SNR at unit channel variance.
            noise_power_w: 0.1,
            power_budget_w: 1.0,
            renewable_cap_joules: 3.6e6, // 1.00 kWh
            horizon_slots: 200,
            seed: 0,
        }
    }
}

/// Packet traffic parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    /// Range of per-user mean arrivals, in packets per slot.
    pub arrival_mean_range: [f64; 2],
    /// Packet size in bits (common to all users).
    pub packet_bits: u64,
    /// Range of per-server processing cost, in FLOPs per bit.
    pub flops_per_bit_range: [f64; 2],
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            arrival_mean_range: [1.0, 30.0],
            packet_bits: 1000,
            flops_per_bit_range: [5.0e6, 15.0e6],
        }
    }
}

/// Per-server compute hardware parameters. Clock-dependent energy follows a
/// cubic core term plus a memory term plus a static term per side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeSection {
    /// Allowed CPU clock range in cycles/sec; the CPU clock is a control knob.
    pub cpu_clock_range_hz: [f64; 2],
    /// GPU clock range in cycles/sec; sampled once per server and then fixed.
    pub gpu_clock_range_hz: [f64; 2],
    pub cpu_flops_per_cycle: f64,
    pub gpu_flops_per_cycle: f64,
    /// Core-power coefficient of the cubic clock term, CPU side (W·s³).
    pub cpu_core_coeff: f64,
    /// Memory power, CPU side (W).
    pub cpu_mem_watts: f64,
    /// Static-power coefficient, CPU side (W·s).
    pub cpu_static_coeff: f64,
    pub gpu_core_coeff: f64,
    pub gpu_mem_watts: f64,
    pub gpu_static_coeff: f64,
    /// Range of the per-server compute-intensity factor (dimensionless, in [0,1]).
    pub intensity_range: [f64; 2],
    /// Range of the per-server memory-pressure factor (dimensionless, in [0,1]).
    pub memory_factor_range: [f64; 2],
}

impl Default for ComputeSection {
    fn default() -> Self {
        Self {
            cpu_clock_range_hz: [2.0e9, 3.0e9],
            gpu_clock_range_hz: [10.0e9, 12.0e9],
            cpu_flops_per_cycle: 8.0,
            gpu_flops_per_cycle: 64.0,
            cpu_core_coeff: 1.0e-28,
            cpu_mem_watts: 1.0,
            cpu_static_coeff: 1.0e-10,
            gpu_core_coeff: 4.0e-28,
            gpu_mem_watts: 4.0,
            gpu_static_coeff: 4.0e-10,
            intensity_range: [0.1, 0.5],
            memory_factor_range: [0.1, 0.5],
        }
    }
}

/// Battery storage parameters, shared by all servers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatterySection {
    /// Usable capacity in J.
    pub capacity_joules: f64,
    /// Per-slot retention factor in (0,1]; 1 means no self-discharge.
    pub self_discharge: f64,
    /// Charging efficiency in (0,1].
    pub charge_efficiency: f64,
    /// Initial level as a fraction of capacity.
    pub initial_fraction: f64,
    /// Upper bound on each charging draw (renewable or grid) per slot, in J.
    pub max_charge_per_slot_joules: f64,
}

impl Default for BatterySection {
    fn default() -> Self {
        Self {
            capacity_joules: 7.2e6, // 2 kWh
            self_discharge: 0.9999,
            charge_efficiency: 0.900,
            initial_fraction: 0.5,
            max_charge_per_slot_joules: 1.0,
        }
    }
}

/// Hidden emission-intensity process. The grid factor follows a sinusoid with
/// multiplicative noise; renewable and battery factors are fixed fractions of
/// the grid mean. The controller never observes these directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmissionSection {
    /// Mean grid emission factor in kg CO2 per J.
    pub grid_mean_kg_per_joule: f64,
    /// Relative amplitude of the sinusoidal component.
    pub amplitude: f64,
    /// Relative scale of the multiplicative noise.
    pub noise_scale: f64,
    /// Sinusoid period in slots.
    pub period_slots: f64,
    /// Renewable factor as a fraction of the grid mean.
    pub renewable_fraction: f64,
    /// Battery-discharge factor as a fraction of the grid mean.
    pub battery_fraction: f64,
}

impl Default for EmissionSection {
    fn default() -> Self {
        Self {
            grid_mean_kg_per_joule: 1.4e-7,
            amplitude: 0.3,
            noise_scale: 0.05,
            period_slots: 500.0,
            renewable_fraction: 0.05,
            battery_fraction: 0.15,
        }
    }
}

/// Wireless channel statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Range of per-user channel variance; each user's variance is sampled
    /// once, then coefficients are drawn i.i.d. across slots.
    pub variance_range: [f64; 2],
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { variance_range: [0.8, 1.2] }
    }
}

/// User-to-server assignment. Fixed for the lifetime of an environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    /// Explicit per-server user lists. When absent, users are assigned
    /// round-robin (user u goes to server u mod M).
    pub assignment: Option<Vec<Vec<usize>>>,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self { assignment: None }
    }
}

/// Delay-accounting knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaySection {
    /// Smoothing factor of the running-average rate used in the
    /// communication-delay term.
    pub rate_smoothing: f64,
    /// Communication-delay substitute, in slots, when the average rate is zero.
    pub cap_slots: f64,
}

impl Default for DelaySection {
    fn default() -> Self {
        Self { rate_smoothing: 0.05, cap_slots: 10.0 }
    }
}

/// Full simulator configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sim: SimSection,
    pub topology: TopologySection,
    pub traffic: TrafficSection,
    pub compute: ComputeSection,
    pub battery: BatterySection,
    pub emissions: EmissionSection,
    pub channel: ChannelSection,
    pub delay: DelaySection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Resolved user-to-server assignment.
    pub fn assignment(&self) -> Vec<Vec<usize>> {
        match &self.topology.assignment {
            Some(a) => a.clone(),
            None => {
                let mut groups = vec![Vec::new(); self.sim.servers];
                for u in 0..self.sim.users {
                    groups[u % self.sim.servers].push(u);
                }
                groups
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        if s.slot_seconds <= 0.0 {
            return Err(Error::Config("slot_seconds must be positive".into()));
        }
        if s.users == 0 || s.servers == 0 {
            return Err(Error::Config("users and servers must be nonzero".into()));
        }
        if s.servers > s.users {
            return Err(Error::Config(format!(
                "servers ({}) must not exceed users ({})",
                s.servers, s.users
            )));
        }
        for (name, v) in [
            ("bandwidth_hz", s.bandwidth_hz),
            ("noise_power_w", s.noise_power_w),
            ("power_budget_w", s.power_budget_w),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        if s.renewable_cap_joules <= 0.0 {
            return Err(Error::Config("renewable_cap_joules must be positive".into()));
        }
        if s.horizon_slots == 0 {
            return Err(Error::Config("horizon_slots must be nonzero".into()));
        }

        let t = &self.traffic;
        if t.arrival_mean_range[0] <= 0.0 || t.arrival_mean_range[1] < t.arrival_mean_range[0] {
            return Err(Error::Config("arrival_mean_range must be positive and ordered".into()));
        }
        if t.packet_bits == 0 {
            return Err(Error::Config("packet_bits must be a positive integer".into()));
        }
        if t.flops_per_bit_range[0] < 0.0 || t.flops_per_bit_range[1] < t.flops_per_bit_range[0] {
            return Err(Error::Config("flops_per_bit_range must be nonnegative and ordered".into()));
        }

        let c = &self.compute;
        for (name, r) in [
            ("cpu_clock_range_hz", c.cpu_clock_range_hz),
            ("gpu_clock_range_hz", c.gpu_clock_range_hz),
        ] {
            if r[0] <= 0.0 || r[1] < r[0] {
                return Err(Error::Config(format!("{name} must be positive and ordered")));
            }
        }
        for (name, r) in [
            ("intensity_range", c.intensity_range),
            ("memory_factor_range", c.memory_factor_range),
        ] {
            if r[0] < 0.0 || r[1] > 1.0 || r[1] < r[0] {
                return Err(Error::Config(format!("{name} must lie inside [0,1] and be ordered")));
            }
        }
        for (name, v) in [
            ("cpu_flops_per_cycle", c.cpu_flops_per_cycle),
            ("gpu_flops_per_cycle", c.gpu_flops_per_cycle),
            ("cpu_core_coeff", c.cpu_core_coeff),
            ("cpu_mem_watts", c.cpu_mem_watts),
            ("cpu_static_coeff", c.cpu_static_coeff),
            ("gpu_core_coeff", c.gpu_core_coeff),
            ("gpu_mem_watts", c.gpu_mem_watts),
            ("gpu_static_coeff", c.gpu_static_coeff),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        if c.cpu_flops_per_cycle <= 0.0 || c.gpu_flops_per_cycle <= 0.0 {
            return Err(Error::Config("FLOPs per cycle must be positive".into()));
        }

        let b = &self.battery;
        if b.capacity_joules <= 0.0 {
            return Err(Error::Config("battery capacity must be positive".into()));
        }
        if !(0.0 < b.self_discharge && b.self_discharge <= 1.0) {
            return Err(Error::Config("self_discharge must lie in (0,1]".into()));
        }
        if !(0.0 < b.charge_efficiency && b.charge_efficiency <= 1.0) {
            return Err(Error::Config("charge_efficiency must lie in (0,1]".into()));
        }
        if !(0.0..=1.0).contains(&b.initial_fraction) {
            return Err(Error::Config("initial_fraction must lie in [0,1]".into()));
        }
        if b.max_charge_per_slot_joules < 0.0 {
            return Err(Error::Config("max_charge_per_slot_joules must be nonnegative".into()));
        }

        let e = &self.emissions;
        if e.grid_mean_kg_per_joule < 0.0 {
            return Err(Error::Config("grid_mean_kg_per_joule must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&e.amplitude) {
            return Err(Error::Config("emission amplitude must lie in [0,1]".into()));
        }
        if e.noise_scale < 0.0 || e.period_slots <= 0.0 {
            return Err(Error::Config("emission noise/period must be valid".into()));
        }
        // Renewables and storage must not be dirtier than the grid.
        if e.renewable_fraction > 1.0 || e.battery_fraction > 1.0 {
            return Err(Error::Config(
                "renewable_fraction and battery_fraction must not exceed 1".into(),
            ));
        }
        if e.renewable_fraction < 0.0 || e.battery_fraction < 0.0 {
            return Err(Error::Config("emission fractions must be nonnegative".into()));
        }

        let ch = &self.channel;
        if ch.variance_range[0] <= 0.0 || ch.variance_range[1] < ch.variance_range[0] {
            return Err(Error::Config("channel variance_range must be positive and ordered".into()));
        }

        let d = &self.delay;
        if !(0.0 < d.rate_smoothing && d.rate_smoothing <= 1.0) {
            return Err(Error::Config("rate_smoothing must lie in (0,1]".into()));
        }
        if d.cap_slots <= 0.0 {
            return Err(Error::Config("delay cap_slots must be positive".into()));
        }

        // Topology checks: disjoint, covering, nonempty.
        if let Some(groups) = &self.topology.assignment {
            if groups.len() != s.servers {
                return Err(Error::Config(format!(
                    "assignment has {} groups, expected {}",
                    groups.len(),
                    s.servers
                )));
            }
            let mut seen = vec![false; s.users];
            for (k, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    return Err(Error::Config(format!("server {k} has no assigned users")));
                }
                for &u in g {
                    if u >= s.users {
                        return Err(Error::Config(format!("user index {u} out of range")));
                    }
                    if seen[u] {
                        return Err(Error::Config(format!("user {u} assigned twice")));
                    }
                    seen[u] = true;
                }
            }
            if seen.iter().any(|&x| !x) {
                return Err(Error::Config("assignment does not cover all users".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let parsed = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(parsed.sim.users, 10);
        assert_eq!(parsed.sim.servers, 4);
        assert_eq!(parsed.battery.self_discharge, 0.9999);
        assert_eq!(parsed.battery.charge_efficiency, 0.900);
        assert_eq!(parsed.sim.renewable_cap_joules, 3.6e6);
        assert_eq!(parsed.battery.capacity_joules, 7.2e6);
        assert_eq!(parsed.sim.power_budget_w, 1.0);
        assert_eq!(parsed.sim.bandwidth_hz, 5.0e6);
        assert_eq!(parsed.compute.cpu_clock_range_hz, [2.0e9, 3.0e9]);
        assert_eq!(parsed.compute.gpu_clock_range_hz, [10.0e9, 12.0e9]);
        assert_eq!(parsed.traffic.flops_per_bit_range, [5.0e6, 15.0e6]);
    }

    #[test]
    fn rejects_more_servers_than_users() {
        let mut cfg = Config::default();
        cfg.sim.users = 3;
        cfg.sim.servers = 4;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn round_robin_assignment_covers_all_users() {
        let cfg = Config::default();
        let groups = cfg.assignment();
        assert_eq!(groups.len(), 4);
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(groups.iter().all(|g| !g.is_empty()));
    }

    #[test]
    fn explicit_assignment_validated() {
        let mut cfg = Config::default();
        cfg.sim.users = 4;
        cfg.sim.servers = 2;
        cfg.topology.assignment = Some(vec![vec![0, 1], vec![2]]);
        assert!(cfg.validate().is_err()); // user 3 uncovered
        cfg.topology.assignment = Some(vec![vec![0, 1], vec![2, 3]]);
        assert!(cfg.validate().is_ok());
        cfg.topology.assignment = Some(vec![vec![0, 1, 2], vec![2, 3]]);
        assert!(cfg.validate().is_err()); // duplicate
    }
}
