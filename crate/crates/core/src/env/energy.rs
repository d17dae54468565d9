//! Per-server energy accounting: dispatch across renewable, battery, and
//! grid sources, battery evolution, and the resulting carbon emissions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Realized per-slot energy draws of one server, in J.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyDispatch {
    /// Total renewable draw, operations plus battery charging.
    pub renewable: f64,
    /// Portion of the renewable draw routed into the battery.
    pub renewable_to_battery: f64,
    /// Total grid draw, operations plus battery charging.
    pub grid: f64,
    /// Portion of the grid draw routed into the battery.
    pub grid_to_battery: f64,
    /// Energy discharged from the battery for operations.
    pub battery_discharge: f64,
}

impl EnergyDispatch {
    /// Renewable energy consumed immediately (not stored).
    pub fn immediate_renewable(&self) -> f64 {
        self.renewable - self.renewable_to_battery
    }

    /// Grid energy consumed immediately (not stored).
    pub fn immediate_grid(&self) -> f64 {
        self.grid - self.grid_to_battery
    }

    /// Energy delivered to operations; must equal the server's total demand.
    pub fn delivered(&self) -> f64 {
        self.immediate_renewable() + self.immediate_grid() + self.battery_discharge
    }

    /// Energy routed into the battery this slot.
    pub fn charge(&self) -> f64 {
        self.renewable_to_battery + self.grid_to_battery
    }
}

/// Sum of communication and computing energy at one server.
pub fn total_energy(transmission_sum: f64, gpu_energy: f64, cpu_energy: f64) -> f64 {
    transmission_sum + gpu_energy + cpu_energy
}

/// Split a server's `demand` across sources. `renewable_frac` of the demand
/// is requested from the shared renewable pool (clipped against
/// `renewable_budget`, which is drawn down in-place), `battery_frac` of the
/// residual from the battery (clipped against `battery_level`), and the rest
/// comes from the grid. Charging requests are drawn on top, with the
/// renewable one clipped against the remaining pool. Clipping makes the
/// result feasible by construction and the balance always holds exactly.
#[allow(clippy::too_many_arguments)]
pub fn dispatch_energy(
    renewable_frac: f64,
    battery_frac: f64,
    charge_renewable_request: f64,
    charge_grid_request: f64,
    demand: f64,
    battery_level: f64,
    charge_cap: f64,
    renewable_budget: &mut f64,
) -> EnergyDispatch {
    let renewable_frac = renewable_frac.clamp(0.0, 1.0);
    let battery_frac = battery_frac.clamp(0.0, 1.0);
    let demand = demand.max(0.0);

    let ops_renewable = (renewable_frac * demand).min(*renewable_budget);
    *renewable_budget -= ops_renewable;
    let residual = demand - ops_renewable;
    let battery_discharge = (battery_frac * residual).min(battery_level.max(0.0));
    let ops_grid = residual - battery_discharge;

    let renewable_to_battery = charge_renewable_request
        .clamp(0.0, charge_cap)
        .min(*renewable_budget);
    *renewable_budget -= renewable_to_battery;
    let grid_to_battery = charge_grid_request.clamp(0.0, charge_cap);

    EnergyDispatch {
        renewable: ops_renewable + renewable_to_battery,
        renewable_to_battery,
        grid: ops_grid + grid_to_battery,
        grid_to_battery,
        battery_discharge,
    }
}

/// Advance one battery by a slot: retention applies to what remains after
/// discharge, charging efficiency to what flows in, and anything above
/// capacity is discarded. Returns `(new_level, wasted)`.
pub fn battery_step(
    level: f64,
    capacity: f64,
    retention: f64,
    charge_efficiency: f64,
    discharge: f64,
    charge: f64,
) -> Result<(f64, f64)> {
    if discharge > level + 1e-12 * level.abs().max(1.0) {
        return Err(Error::BatteryDraw { draw: discharge, level });
    }
    let raw = retention * (level - discharge) + charge_efficiency * charge;
    if raw > capacity {
        Ok((capacity, raw - capacity))
    } else {
        Ok((raw, 0.0))
    }
}

/// Per-source carbon intensities in kg CO2 per J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionFactors {
    pub renewable: f64,
    pub grid: f64,
    pub battery: f64,
}

/// Carbon mass emitted by one server's dispatch this slot, in kg.
pub fn emissions_kg(dispatch: &EnergyDispatch, factors: &EmissionFactors) -> f64 {
    factors.renewable * dispatch.immediate_renewable()
        + factors.grid * dispatch.immediate_grid()
        + factors.battery * dispatch.battery_discharge
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_renewable_when_budget_ample() {
        let mut budget = 1.0e9;
        let d = dispatch_energy(1.0, 0.0, 0.0, 0.0, 10.0, 100.0, 1.0e9, &mut budget);
        assert_eq!(d.immediate_renewable(), 10.0);
        assert_eq!(d.immediate_grid(), 0.0);
        assert_eq!(d.battery_discharge, 0.0);
        assert_eq!(d.delivered(), 10.0);
    }

    #[test]
    fn split_rule_arithmetic() {
        // 10 J demand, 40% renewable, half the residual from the battery.
        let mut budget = 1.0e9;
        let d = dispatch_energy(0.4, 0.5, 0.0, 0.0, 10.0, 100.0, 1.0e9, &mut budget);
        assert!((d.immediate_renewable() - 4.0).abs() < 1e-12);
        assert!((d.battery_discharge - 3.0).abs() < 1e-12);
        assert!((d.immediate_grid() - 3.0).abs() < 1e-12);
        assert!((d.delivered() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_battery_falls_back_to_grid() {
        let mut budget = 1.0e9;
        let d = dispatch_energy(0.0, 1.0, 0.0, 0.0, 5.0, 0.0, 1.0e9, &mut budget);
        assert_eq!(d.battery_discharge, 0.0);
        assert_eq!(d.immediate_grid(), 5.0);
    }

    #[test]
    fn renewable_pool_drains_in_order() {
        let mut budget = 6.0;
        let first = dispatch_energy(1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 10.0, &mut budget);
        let second = dispatch_energy(1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 10.0, &mut budget);
        assert_eq!(first.renewable, 4.0);
        assert_eq!(second.renewable, 2.0); // clipped by what is left
        assert_eq!(second.immediate_grid(), 2.0);
        assert_eq!(budget, 0.0);
    }

    #[test]
    fn charging_is_clipped_by_pool_and_cap() {
        let mut budget = 3.0;
        let d = dispatch_energy(1.0, 0.0, 5.0, 7.0, 2.0, 0.0, 4.0, &mut budget);
        assert_eq!(d.immediate_renewable(), 2.0);
        assert_eq!(d.renewable_to_battery, 1.0); // pool exhausted
        assert_eq!(d.grid_to_battery, 4.0); // cap applies
        assert!((d.delivered() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn battery_identity_case() {
        let (level, waste) = battery_step(123.0, 1000.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(level, 123.0);
        assert_eq!(waste, 0.0);
    }

    #[test]
    fn battery_step_hand_arithmetic() {
        // 0.9999·(1000−100) + 0.9·50 = 944.91.
        let (level, waste) = battery_step(1000.0, 1.0e4, 0.9999, 0.9, 100.0, 50.0).unwrap();
        assert!((level - 944.91).abs() < 1e-9);
        assert_eq!(waste, 0.0);
    }

    #[test]
    fn battery_overflow_is_discarded() {
        let (level, waste) = battery_step(95.0, 100.0, 1.0, 1.0, 0.0, 20.0).unwrap();
        assert_eq!(level, 100.0);
        assert!((waste - 15.0).abs() < 1e-12);
    }

    #[test]
    fn overdraw_is_a_contract_violation() {
        assert!(matches!(
            battery_step(10.0, 100.0, 1.0, 1.0, 11.0, 0.0),
            Err(Error::BatteryDraw { .. })
        ));
    }

    #[test]
    fn emissions_all_grid() {
        let d = EnergyDispatch { grid: 7.0, ..Default::default() };
        let f = EmissionFactors { renewable: 0.3, grid: 2.0, battery: 0.5 };
        assert_eq!(emissions_kg(&d, &f), 14.0);
    }

    #[test]
    fn emissions_mixed_draws() {
        // Renewable 4, battery 3, grid 3 with factors (0.1, 1, 0.2) → 4.0.
        let d = EnergyDispatch {
            renewable: 4.0,
            renewable_to_battery: 0.0,
            grid: 3.0,
            grid_to_battery: 0.0,
            battery_discharge: 3.0,
        };
        let f = EmissionFactors { renewable: 0.1, grid: 1.0, battery: 0.2 };
        assert!((emissions_kg(&d, &f) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn emissions_zero_factors() {
        let d = EnergyDispatch { renewable: 5.0, grid: 5.0, ..Default::default() };
        let f = EmissionFactors { renewable: 0.0, grid: 0.0, battery: 0.0 };
        assert_eq!(emissions_kg(&d, &f), 0.0);
    }

    #[test]
    fn total_energy_sums() {
        assert_eq!(total_energy(3.0, 2.0, 1.0), 6.0);
        assert_eq!(total_energy(0.5, 0.0, 0.0), 0.5);
        assert_eq!(total_energy(0.0, 0.0, 0.0), 0.0);
    }
}
