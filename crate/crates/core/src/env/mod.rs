//! Discrete-time network environment: exogenous draws, compute and radio
//! physics, energy dispatch, queues, and the per-slot emission metrics.

pub mod action;
pub mod compute;
pub mod energy;
pub mod exogenous;
pub mod metrics;
pub mod queue;
pub mod radio;
pub mod trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use action::{Action, ActionSpace};
use compute::{side_energy, split_delay, workload_flops, SplitDelay};
use energy::{battery_step, dispatch_energy, emissions_kg, total_energy, EmissionFactors, EnergyDispatch};
use exogenous::{draw_arrivals, draw_channels, EmissionProcess};
use queue::{comm_delay, queue_advance, queue_delay, service_capacity, DelayTracker};

// RNG stream ids reserved for construction-time parameter sampling; episode
// streams are user-chosen and expected to stay well below these.
const STREAM_SERVER_PARAMS: u64 = u64::MAX - 1;
const STREAM_USER_PARAMS: u64 = u64::MAX - 2;

/// Fixed per-server hardware draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServerParams {
    /// Users assigned to this server.
    pub users: Vec<usize>,
    /// GPU clock in cycles/sec, sampled once and then fixed.
    pub gpu_clock: f64,
    /// Processing cost in FLOPs per bit.
    pub flops_per_bit: f64,
    /// Compute-intensity factor of the core-power term.
    pub intensity: f64,
    /// Memory-pressure factor of the memory-power term.
    pub memory_factor: f64,
}

/// Immutable model: configuration plus the per-server and per-user
/// parameters sampled from it. Cheap to clone and share across workers.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub cfg: Config,
    pub servers: Vec<ServerParams>,
    /// Mean packet arrivals per slot, per user.
    pub arrival_means: Vec<f64>,
    /// Channel standard deviation per user.
    pub channel_std: Vec<f64>,
}

impl ModelParams {
    pub fn new(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let groups = cfg.assignment();

        let mut srv_rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        srv_rng.set_stream(STREAM_SERVER_PARAMS);
        let servers = groups
            .into_iter()
            .map(|users| ServerParams {
                users,
                gpu_clock: sample_range(&mut srv_rng, cfg.compute.gpu_clock_range_hz),
                flops_per_bit: sample_range(&mut srv_rng, cfg.traffic.flops_per_bit_range),
                intensity: sample_range(&mut srv_rng, cfg.compute.intensity_range),
                memory_factor: sample_range(&mut srv_rng, cfg.compute.memory_factor_range),
            })
            .collect();

        let mut usr_rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        usr_rng.set_stream(STREAM_USER_PARAMS);
        let arrival_means = (0..cfg.sim.users)
            .map(|_| sample_range(&mut usr_rng, cfg.traffic.arrival_mean_range))
            .collect();
        let channel_std = (0..cfg.sim.users)
            .map(|_| sample_range(&mut usr_rng, cfg.channel.variance_range).sqrt())
            .collect();

        Ok(Self { cfg: cfg.clone(), servers, arrival_means, channel_std })
    }

    /// CPU speed in FLOPs/sec at a given clock.
    pub fn cpu_speed(&self, clock: f64) -> f64 {
        self.cfg.compute.cpu_flops_per_cycle * clock
    }

    /// GPU speed in FLOPs/sec of server `k`.
    pub fn gpu_speed(&self, k: usize) -> f64 {
        self.cfg.compute.gpu_flops_per_cycle * self.servers[k].gpu_clock
    }

    /// Aggregate arrival rate of server `k` in packets/sec.
    pub fn arrival_rate_per_sec(&self, k: usize) -> f64 {
        let per_slot: f64 = self.servers[k].users.iter().map(|&u| self.arrival_means[u]).sum();
        per_slot / self.cfg.sim.slot_seconds
    }

    /// Replace every user's mean arrival count per slot (sweep knob).
    pub fn set_arrival_means(&mut self, mean_per_slot: f64) {
        for m in &mut self.arrival_means {
            *m = mean_per_slot;
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    use rand::Rng;
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Physical outcome of one slot at one server, before emissions weighting.
#[derive(Debug, Clone)]
pub struct ServerPhysics {
    pub workload: f64,
    pub delay: SplitDelay,
    pub cpu_energy: f64,
    pub gpu_energy: f64,
    pub tx_energy: f64,
    pub rate_sum: f64,
    pub total_energy: f64,
    pub dispatch: EnergyDispatch,
    pub battery_next: f64,
    pub battery_waste: f64,
    pub service_capacity: u64,
    pub arrivals: f64,
    /// How far the compute bottleneck overran the slot, in seconds.
    pub deadline_excess: f64,
}

/// Physical outcome of one slot across the network.
#[derive(Debug, Clone)]
pub struct SlotPhysics {
    pub servers: Vec<ServerPhysics>,
    pub rates: Vec<f64>,
    pub rate_sum_total: f64,
    pub power_sum: f64,
    pub renewable_draw: f64,
    /// Signed renewable-capacity slack: `Σ renewable − cap`.
    pub slack_renewable: f64,
    /// Signed power-budget slack: `Σ p − budget`.
    pub slack_power: f64,
    /// Summed one-sided source-balance residuals across servers.
    pub balance_hinge: f64,
    /// Summed one-sided energy-composition residuals across servers.
    pub composition_hinge: f64,
}

/// Deterministic slot dynamics given the exogenous draws. Action components
/// are projected into their boxes first; the power budget is deliberately
/// not projected (it is priced by the learner instead).
pub fn slot_physics(
    model: &ModelParams,
    channels: &[f64],
    arrivals: &[f64],
    action: &Action,
    battery_levels: &[f64],
) -> Result<SlotPhysics> {
    let cfg = &model.cfg;
    let slot = cfg.sim.slot_seconds;
    let n_users = cfg.sim.users;
    if action.servers.len() != model.servers.len() {
        return Err(Error::Shape { expected: model.servers.len(), got: action.servers.len() });
    }

    // Projected transmit powers, gathered network-wide for interference.
    let mut powers = vec![0.0; n_users];
    for (k, srv) in model.servers.iter().enumerate() {
        let act = &action.servers[k];
        if act.transmit_power.len() != srv.users.len() {
            return Err(Error::Shape { expected: srv.users.len(), got: act.transmit_power.len() });
        }
        for (&u, &p) in srv.users.iter().zip(&act.transmit_power) {
            powers[u] = p.clamp(0.0, cfg.sim.power_budget_w);
        }
    }
    let power_sum: f64 = powers.iter().sum();

    let mut rates = vec![0.0; n_users];
    for u in 0..n_users {
        let gain_sq = channels[u] * channels[u];
        rates[u] = radio::downlink_rate(
            cfg.sim.bandwidth_hz,
            cfg.sim.noise_power_w,
            gain_sq,
            powers[u],
            power_sum - powers[u],
        );
    }
    let rate_sum_total: f64 = rates.iter().sum();

    let packet_bits = cfg.traffic.packet_bits as f64;
    let mut renewable_budget = cfg.sim.renewable_cap_joules;
    let mut servers = Vec::with_capacity(model.servers.len());
    let mut balance_hinge = 0.0;
    let mut composition_hinge = 0.0;

    for (k, srv) in model.servers.iter().enumerate() {
        let act = &action.servers[k];
        let clock = act.cpu_clock.clamp(cfg.compute.cpu_clock_range_hz[0], cfg.compute.cpu_clock_range_hz[1]);
        let split = act.split.clamp(0.0, 1.0);

        let bits_per_user: Vec<f64> = srv.users.iter().map(|_| packet_bits).collect();
        let packets: Vec<f64> = srv.users.iter().map(|&u| arrivals[u]).collect();
        let workload = workload_flops(srv.flops_per_bit, &bits_per_user, &packets);

        let delay = split_delay(split, model.cpu_speed(clock), model.gpu_speed(k), workload)?;
        let cpu_energy = side_energy(
            srv.intensity,
            cfg.compute.cpu_core_coeff,
            clock,
            srv.memory_factor,
            cfg.compute.cpu_mem_watts,
            cfg.compute.cpu_static_coeff,
            delay.cpu,
        )?;
        let gpu_energy = side_energy(
            srv.intensity,
            cfg.compute.gpu_core_coeff,
            srv.gpu_clock,
            srv.memory_factor,
            cfg.compute.gpu_mem_watts,
            cfg.compute.gpu_static_coeff,
            delay.gpu,
        )?;

        let mut tx_energy = 0.0;
        let mut rate_sum = 0.0;
        let mut group_power = 0.0;
        for &u in &srv.users {
            let gain_sq = channels[u] * channels[u];
            tx_energy += radio::transmission_energy(
                slot,
                cfg.sim.bandwidth_hz,
                cfg.sim.noise_power_w,
                gain_sq,
                power_sum - powers[u],
                rates[u],
                u,
            )?;
            rate_sum += rates[u];
            group_power += powers[u];
        }

        let demand = total_energy(tx_energy, gpu_energy, cpu_energy);
        let dispatch = dispatch_energy(
            act.renewable_frac,
            act.battery_frac,
            act.charge_renewable,
            act.charge_grid,
            demand,
            battery_levels[k],
            cfg.battery.max_charge_per_slot_joules,
            &mut renewable_budget,
        );
        let (battery_next, battery_waste) = battery_step(
            battery_levels[k],
            cfg.battery.capacity_joules,
            cfg.battery.self_discharge,
            cfg.battery.charge_efficiency,
            dispatch.battery_discharge,
            dispatch.charge(),
        )?;

        balance_hinge += (dispatch.delivered() - demand).max(0.0);
        composition_hinge += (slot * group_power + cpu_energy + gpu_energy - demand).max(0.0);

        servers.push(ServerPhysics {
            workload,
            delay,
            cpu_energy,
            gpu_energy,
            tx_energy,
            rate_sum,
            total_energy: demand,
            dispatch,
            battery_next,
            battery_waste,
            service_capacity: service_capacity(slot, rate_sum, srv.users.len(), packet_bits),
            arrivals: packets.iter().sum(),
            deadline_excess: (delay.bottleneck - slot).max(0.0),
        });
    }

    let renewable_draw: f64 = servers.iter().map(|s| s.dispatch.renewable).sum();
    Ok(SlotPhysics {
        servers,
        rates,
        rate_sum_total,
        power_sum,
        renewable_draw,
        slack_renewable: renewable_draw - cfg.sim.renewable_cap_joules,
        slack_power: power_sum - cfg.sim.power_budget_w,
        balance_hinge,
        composition_hinge,
    })
}

/// Everything observed and metered over one completed slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotMeasurement {
    pub slot: u64,
    /// Per-server emissions per bit — the controller's observation.
    pub observation: Vec<f64>,
    /// Sustainability score of this slot.
    pub sustainability: f64,
    /// All-grid reference intensity in kg/bit.
    pub grid_reference_per_bit: f64,
    /// Per-server emitted carbon in kg.
    pub emissions: Vec<f64>,
    pub energy_total: Vec<f64>,
    pub dispatch: Vec<EnergyDispatch>,
    pub battery_level: Vec<f64>,
    pub battery_waste: Vec<f64>,
    /// Queue lengths after the slot's service and arrivals.
    pub queue_length: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub served: Vec<u64>,
    pub service_capacity: Vec<u64>,
    pub rates: Vec<f64>,
    pub rate_sum: Vec<f64>,
    pub tau_queue: Vec<f64>,
    pub tau_comm: Vec<f64>,
    pub tau_compute: Vec<f64>,
    pub tau_total: Vec<f64>,
    pub deadline_excess: Vec<f64>,
    pub power_sum: f64,
    pub renewable_draw: f64,
    pub slack_renewable: f64,
    pub slack_power: f64,
    pub balance_hinge: f64,
    pub composition_hinge: f64,
    /// Network energy per delivered bit, J/bit.
    pub energy_per_bit: f64,
    /// Network emissions per delivered bit, kg/bit.
    pub emissions_per_bit: f64,
    /// True when this slot delivered no bits while consuming energy; ratio
    /// metrics carry their previous values.
    pub degenerate: bool,
    /// Exogenous draws, kept for instrumentation and replay checks.
    pub channels: Vec<f64>,
    pub factors: (f64, f64, f64),
}

impl SlotMeasurement {
    /// Mean per-server total delay this slot.
    pub fn mean_delay(&self) -> f64 {
        self.tau_total.iter().sum::<f64>() / self.tau_total.len() as f64
    }

    /// Summed per-server total delay this slot.
    pub fn delay_sum(&self) -> f64 {
        self.tau_total.iter().sum()
    }

    pub fn sum_per_bit(&self) -> f64 {
        self.observation.iter().sum()
    }
}

/// Frozen view of the environment internals used for certainty-equivalent
/// planning; everything in it is information the controller legitimately has.
#[derive(Debug, Clone)]
pub struct PlanSnapshot {
    pub observation: Vec<f64>,
    pub battery_levels: Vec<f64>,
    pub queue_lengths: Vec<f64>,
    pub tracker: DelayTracker,
    /// Most recent channel coefficients (the known side information).
    pub channels: Vec<f64>,
    /// Grid carbon intensity implied by the last metered slot, kg/J.
    pub grid_intensity: Option<f64>,
    pub slot: u64,
}

/// Sequential, seed-driven network environment.
#[derive(Debug, Clone)]
pub struct NetworkEnv {
    model: ModelParams,
    space: ActionSpace,
    emission: EmissionProcess,
    rng: ChaCha8Rng,
    batteries: Vec<f64>,
    queues: Vec<u64>,
    tracker: DelayTracker,
    observation: Vec<f64>,
    last_sustainability: f64,
    last_energy_per_bit: f64,
    last_emissions_per_bit: f64,
    last_channels: Vec<f64>,
    observed_grid_intensity: Option<f64>,
    total_arrived: Vec<u64>,
    total_served: Vec<u64>,
    slot: u64,
}

impl NetworkEnv {
    pub fn new(cfg: &Config) -> Result<Self> {
        let model = ModelParams::new(cfg)?;
        Ok(Self::from_model(model))
    }

    pub fn from_model(model: ModelParams) -> Self {
        let cfg = &model.cfg;
        let servers = model.servers.len();
        let users = cfg.sim.users;
        let space = ActionSpace::new(cfg);
        let emission = EmissionProcess::new(&cfg.emissions);
        let tracker = DelayTracker::new(servers, users, cfg.delay.rate_smoothing);
        let batteries = vec![cfg.battery.initial_fraction * cfg.battery.capacity_joules; servers];
        let last_channels = model.channel_std.clone();
        let rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        Self {
            space,
            emission,
            rng,
            batteries,
            queues: vec![0; servers],
            tracker,
            observation: vec![0.0; servers],
            last_sustainability: 0.0,
            last_energy_per_bit: 0.0,
            last_emissions_per_bit: 0.0,
            last_channels,
            observed_grid_intensity: None,
            total_arrived: vec![0; servers],
            total_served: vec![0; servers],
            slot: 0,
            model,
        }
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    pub fn battery_levels(&self) -> &[f64] {
        &self.batteries
    }

    pub fn queue_lengths(&self) -> &[u64] {
        &self.queues
    }

    /// Lifetime arrival/served totals per server, for conservation checks.
    pub fn queue_totals(&self) -> (Vec<u64>, Vec<u64>) {
        (self.total_arrived.clone(), self.total_served.clone())
    }

    /// Start a fresh episode on its own RNG stream. State, queues, batteries,
    /// and the hidden emission process all restart.
    pub fn reset(&mut self, episode: u64) -> &[f64] {
        let cfg = &self.model.cfg;
        self.rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        self.rng.set_stream(episode);
        self.emission.reset();
        self.batteries =
            vec![cfg.battery.initial_fraction * cfg.battery.capacity_joules; self.model.servers.len()];
        self.queues = vec![0; self.model.servers.len()];
        self.tracker =
            DelayTracker::new(self.model.servers.len(), cfg.sim.users, cfg.delay.rate_smoothing);
        self.observation = vec![0.0; self.model.servers.len()];
        self.last_sustainability = 0.0;
        self.last_energy_per_bit = 0.0;
        self.last_emissions_per_bit = 0.0;
        self.last_channels = self.model.channel_std.clone();
        self.observed_grid_intensity = None;
        self.total_arrived = vec![0; self.model.servers.len()];
        self.total_served = vec![0; self.model.servers.len()];
        self.slot = 0;
        &self.observation
    }

    pub fn snapshot(&self) -> PlanSnapshot {
        PlanSnapshot {
            observation: self.observation.clone(),
            battery_levels: self.batteries.clone(),
            queue_lengths: self.queues.iter().map(|&q| q as f64).collect(),
            tracker: self.tracker.clone(),
            channels: self.last_channels.clone(),
            grid_intensity: self.observed_grid_intensity,
            slot: self.slot,
        }
    }

    /// Advance one slot under `action`. Deterministic given the current RNG
    /// stream position. Infeasible requests are clipped, never rejected; the
    /// signed slacks report what the learner should price.
    pub fn step(&mut self, action: &Action) -> Result<SlotMeasurement> {
        if !action.is_finite() {
            return Err(Error::Config("action contains non-finite components".into()));
        }
        let cfg = self.model.cfg.clone();
        let slot_seconds = cfg.sim.slot_seconds;

        // Exogenous draws for the slot.
        let channels = draw_channels(&mut self.rng, &self.model.channel_std);
        let arrivals = draw_arrivals(
            &mut self.rng,
            &self
                .model
                .arrival_means
                .iter()
                .map(|&m| m) // packets per slot
                .collect::<Vec<_>>(),
        );
        let factors = self.emission.advance(&mut self.rng);

        let arrivals_f: Vec<f64> = arrivals.iter().map(|&a| a as f64).collect();
        let physics = slot_physics(&self.model, &channels, &arrivals_f, action, &self.batteries)?;

        // Queues: serve from what was waiting, then append arrivals.
        let queue_at_start = self.queues.clone();
        let servers_n = self.model.servers.len();
        let mut served = vec![0u64; servers_n];
        let mut arrivals_per_server = vec![0u64; servers_n];
        for (k, srv) in self.model.servers.iter().enumerate() {
            let lambda: u64 = srv.users.iter().map(|&u| arrivals[u]).sum();
            let (s, q) = queue_advance(self.queues[k], physics.servers[k].service_capacity, lambda);
            served[k] = s;
            self.queues[k] = q;
            arrivals_per_server[k] = lambda;
            self.total_arrived[k] += lambda;
            self.total_served[k] += s;
        }
        self.tracker.observe(&queue_at_start, &physics.rates);

        // Delay components per server.
        let mut tau_queue = vec![0.0; servers_n];
        let mut tau_comm = vec![0.0; servers_n];
        let mut tau_compute = vec![0.0; servers_n];
        let mut tau_total = vec![0.0; servers_n];
        let cap_seconds = cfg.delay.cap_slots * slot_seconds;
        for (k, srv) in self.model.servers.iter().enumerate() {
            tau_queue[k] = queue_delay(self.tracker.queue_mean[k], self.model.arrival_rate_per_sec(k));
            tau_comm[k] = srv
                .users
                .iter()
                .map(|&u| {
                    comm_delay(cfg.traffic.packet_bits as f64, self.tracker.smoothed_rate(u), cap_seconds)
                })
                .sum();
            tau_compute[k] = physics.servers[k].delay.bottleneck;
            tau_total[k] = tau_queue[k] + tau_comm[k] + tau_compute[k];
        }

        // Emissions metering.
        let mut emissions = vec![0.0; servers_n];
        let mut degenerate = false;
        let mut new_observation = self.observation.clone();
        for (k, sp) in physics.servers.iter().enumerate() {
            emissions[k] = emissions_kg(&sp.dispatch, &factors);
            match metrics::per_bit(emissions[k], slot_seconds * sp.rate_sum) {
                Some(c) => new_observation[k] = c,
                None => degenerate = true,
            }
        }
        let total_bits = slot_seconds * physics.rate_sum_total;
        let total_energy: f64 = physics.servers.iter().map(|s| s.total_energy).sum();
        let total_emissions: f64 = emissions.iter().sum();

        let grid_reference = match metrics::per_bit(factors.grid * total_energy, total_bits) {
            Some(c) => c,
            None => {
                degenerate = true;
                0.0
            }
        };
        let sustainability = if degenerate {
            self.last_sustainability
        } else {
            metrics::sustainability(new_observation.iter().sum(), grid_reference)
        };
        let energy_per_bit = match metrics::per_bit(total_energy, total_bits) {
            Some(e) if !degenerate => e,
            _ => self.last_energy_per_bit,
        };
        let emissions_per_bit = match metrics::per_bit(total_emissions, total_bits) {
            Some(e) if !degenerate => e,
            _ => self.last_emissions_per_bit,
        };

        self.batteries = physics.servers.iter().map(|s| s.battery_next).collect();
        self.observation = new_observation.clone();
        self.last_sustainability = sustainability;
        self.last_energy_per_bit = energy_per_bit;
        self.last_emissions_per_bit = emissions_per_bit;
        self.last_channels = channels.clone();
        if !degenerate && total_energy > 0.0 {
            // The all-grid reference is metered ex post, so the grid intensity
            // it implies is available to the planner.
            self.observed_grid_intensity = Some(factors.grid);
        }
        let measurement = SlotMeasurement {
            slot: self.slot,
            observation: new_observation,
            sustainability,
            grid_reference_per_bit: grid_reference,
            emissions,
            energy_total: physics.servers.iter().map(|s| s.total_energy).collect(),
            dispatch: physics.servers.iter().map(|s| s.dispatch).collect(),
            battery_level: self.batteries.clone(),
            battery_waste: physics.servers.iter().map(|s| s.battery_waste).collect(),
            queue_length: self.queues.clone(),
            arrivals: arrivals_per_server,
            served,
            service_capacity: physics.servers.iter().map(|s| s.service_capacity).collect(),
            rates: physics.rates.clone(),
            rate_sum: physics.servers.iter().map(|s| s.rate_sum).collect(),
            tau_queue,
            tau_comm,
            tau_compute,
            tau_total,
            deadline_excess: physics.servers.iter().map(|s| s.deadline_excess).collect(),
            power_sum: physics.power_sum,
            renewable_draw: physics.renewable_draw,
            slack_renewable: physics.slack_renewable,
            slack_power: physics.slack_power,
            balance_hinge: physics.balance_hinge,
            composition_hinge: physics.composition_hinge,
            energy_per_bit,
            emissions_per_bit,
            degenerate,
            channels,
            factors: (factors.renewable, factors.grid, factors.battery),
        };
        self.slot += 1;
        Ok(measurement)
    }
}
