//! Comparison schemes: scalarized training, energy-efficiency-only training,
//! and the renewable-energy-ratio reward substituted for the sustainability
//! score. All of them reuse the same learner; only the reward definition and
//! preference handling differ.

use crate::env::energy::EnergyDispatch;
use crate::error::{Error, Result};
use crate::morl::objectives::{ObjectiveKind, ObjectiveSet};

/// Training scheme selector.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Full three-objective learner on the sustainability score.
    Proposed,
    /// Single objective: a fixed weighted combination of the three.
    Scalarized { weights: [f64; 3] },
    /// Drops the sustainability objective entirely.
    EeOnly,
    /// Sustainability score replaced by the renewable energy ratio.
    Rer,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "proposed" => Ok(Method::Proposed),
            "scalarized" => Ok(Method::Scalarized { weights: [1.0 / 3.0; 3] }),
            "ee_only" => Ok(Method::EeOnly),
            "rer" => Ok(Method::Rer),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected proposed|scalarized|ee_only|rer"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Scalarized { .. } => "scalarized",
            Method::EeOnly => "ee_only",
            Method::Rer => "rer",
        }
    }

    /// The reward definitions this scheme trains on.
    pub fn objective_set(&self) -> ObjectiveSet {
        let full = vec![ObjectiveKind::Sustainability, ObjectiveKind::EnergyPerBit, ObjectiveKind::Delay];
        match self {
            Method::Proposed => ObjectiveSet { kinds: full, scalarize: None },
            Method::Scalarized { weights } => {
                ObjectiveSet { kinds: full, scalarize: Some(weights.to_vec()) }
            }
            Method::EeOnly => ObjectiveSet {
                kinds: vec![ObjectiveKind::EnergyPerBit, ObjectiveKind::Delay],
                scalarize: None,
            },
            Method::Rer => ObjectiveSet {
                kinds: vec![ObjectiveKind::RenewableShare, ObjectiveKind::EnergyPerBit, ObjectiveKind::Delay],
                scalarize: None,
            },
        }
    }

    /// Map a three-way preference onto this scheme's objectives. The
    /// energy-efficiency-only scheme renormalizes the last two weights; the
    /// scalarized scheme has a single objective by construction.
    pub fn effective_zeta(&self, zeta: &[f64; 3]) -> Vec<f64> {
        match self {
            Method::Proposed | Method::Rer => zeta.to_vec(),
            Method::Scalarized { .. } => vec![1.0],
            Method::EeOnly => {
                let rest = zeta[1] + zeta[2];
                if rest > 0.0 {
                    vec![zeta[1] / rest, zeta[2] / rest]
                } else {
                    vec![0.5, 0.5]
                }
            }
        }
    }
}

/// Fixed weighted combination of a full objective vector.
pub fn scalarized_reward(q: &[f64; 3], weights: &[f64; 3]) -> f64 {
    q.iter().zip(weights).map(|(a, b)| a * b).sum()
}

/// Drop the sustainability component, keeping energy efficiency and delay.
pub fn ee_only_objective(q: &[f64; 3]) -> [f64; 2] {
    [q[1], q[2]]
}

/// Fraction of delivered energy met by renewable sources. Battery discharge
/// counts as renewable-sourced when `battery_counts_renewable` is set. Zero
/// delivered energy means nothing was drawn from any dirty source: 1.
pub fn rer_metric(dispatches: &[EnergyDispatch], battery_counts_renewable: bool) -> f64 {
    let total: f64 = dispatches.iter().map(|d| d.delivered()).sum();
    if total <= 0.0 {
        return 1.0;
    }
    let green: f64 = dispatches
        .iter()
        .map(|d| {
            d.immediate_renewable()
                + if battery_counts_renewable { d.battery_discharge } else { 0.0 }
        })
        .sum();
    (green / total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalarization_arithmetic() {
        assert_eq!(scalarized_reward(&[3.0, -1.0, -2.0], &[1.0 / 3.0; 3]), 0.0);
        assert_eq!(scalarized_reward(&[5.0, 1.0, 9.0], &[1.0, 0.0, 0.0]), 5.0);
        assert_eq!(scalarized_reward(&[0.0, 0.0, 0.0], &[0.2, 0.3, 0.5]), 0.0);
    }

    #[test]
    fn ee_only_ignores_sustainability() {
        let a = ee_only_objective(&[0.9, -2.0, -3.0]);
        let b = ee_only_objective(&[-7.0, -2.0, -3.0]);
        assert_eq!(a, b);
        assert_eq!(a, [-2.0, -3.0]);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn rer_extremes() {
        let all_renewable = vec![EnergyDispatch { renewable: 5.0, ..Default::default() }];
        assert_eq!(rer_metric(&all_renewable, true), 1.0);
        let all_grid = vec![EnergyDispatch { grid: 5.0, ..Default::default() }];
        assert_eq!(rer_metric(&all_grid, true), 0.0);
    }

    #[test]
    fn rer_mixed_fraction() {
        // Renewable 4 J, battery 3 J, grid 3 J → 0.7 with battery credited.
        let d = vec![EnergyDispatch {
            renewable: 4.0,
            grid: 3.0,
            battery_discharge: 3.0,
            ..Default::default()
        }];
        assert!((rer_metric(&d, true) - 0.7).abs() < 1e-12);
        assert!((rer_metric(&d, false) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rer_zero_energy_is_one() {
        assert_eq!(rer_metric(&[EnergyDispatch::default()], true), 1.0);
    }

    #[test]
    fn zeta_mapping_per_method() {
        let zeta = [0.2, 0.3, 0.5];
        assert_eq!(Method::Proposed.effective_zeta(&zeta), vec![0.2, 0.3, 0.5]);
        assert_eq!(Method::Scalarized { weights: [0.0; 3] }.effective_zeta(&zeta), vec![1.0]);
        let ee = Method::EeOnly.effective_zeta(&zeta);
        assert!((ee[0] - 0.375).abs() < 1e-12 && (ee[1] - 0.625).abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for name in ["proposed", "scalarized", "ee_only", "rer"] {
            assert_eq!(Method::parse(name).unwrap().name(), name);
        }
        assert!(Method::parse("nope").is_err());
    }
}
