//! Downlink rate and the matching transmission energy.

use crate::error::{Error, Result};

/// Shannon rate for one user in bits/sec. The interfering signals reach the
/// user through the same channel coefficient as its own signal, so the
/// denominator is `gain_sq · interference + noise_power`.
pub fn downlink_rate(
    bandwidth: f64,
    noise_power: f64,
    gain_sq: f64,
    own_power: f64,
    interference: f64,
) -> f64 {
    if own_power <= 0.0 || gain_sq <= 0.0 {
        return 0.0;
    }
    let sinr = own_power * gain_sq / (gain_sq * interference + noise_power);
    bandwidth * (1.0 + sinr).log2()
}

/// Energy spent transmitting at `rate` for one slot of `slot` seconds,
/// obtained by inverting the rate expression:
/// `slot · (gain_sq·interference + noise_power)/gain_sq · (e^{rate·ln2/bandwidth} − 1)`.
///
/// A zero rate costs nothing. A nonzero rate over a dead channel is an
/// outage: the energy is undefined.
pub fn transmission_energy(
    slot: f64,
    bandwidth: f64,
    noise_power: f64,
    gain_sq: f64,
    interference: f64,
    rate: f64,
    user: usize,
) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    if gain_sq <= 0.0 {
        return Err(Error::Outage { user });
    }
    let growth = (rate * std::f64::consts::LN_2 / bandwidth).exp() - 1.0;
    Ok(slot * (gain_sq * interference + noise_power) / gain_sq * growth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_power_means_zero_rate() {
        assert_eq!(downlink_rate(5.0e6, 0.1, 1.3, 0.0, 0.5), 0.0);
    }

    #[test]
    fn unit_snr_gives_bandwidth() {
        // Single user, gain²·p/noise = 1 → log2(2) = 1 → rate = B.
        let r = downlink_rate(5.0e6, 0.2, 0.4, 0.5, 0.0);
        assert!((r - 5.0e6).abs() < 1e-6);
    }

    #[test]
    fn two_user_interference_case() {
        // gain²=1, both powers 1, noise 1 → SINR 0.5 → B·log2(1.5).
        let b = 5.0e6;
        let r = downlink_rate(b, 1.0, 1.0, 1.0, 1.0);
        assert!((r - b * 1.5f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn energy_inverts_to_power_times_slot() {
        let (slot, b, noise) = (1e-3, 5.0e6, 0.1);
        let (gain, p, interf) = (0.9, 0.3, 0.6);
        let rate = downlink_rate(b, noise, gain, p, interf);
        let e = transmission_energy(slot, b, noise, gain, interf, rate, 0).unwrap();
        assert!((e - p * slot).abs() <= 1e-9 * (p * slot));
    }

    #[test]
    fn zero_rate_costs_nothing() {
        assert_eq!(transmission_energy(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn unit_case_hand_arithmetic() {
        // gain²=1, no interference, noise 1, B=1, rate=1, slot=1 → e^{ln2}−1 = 1 J.
        let e = transmission_energy(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dead_channel_with_rate_is_outage() {
        let err = transmission_energy(1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 7).unwrap_err();
        assert!(matches!(err, Error::Outage { user: 7 }));
    }
}
