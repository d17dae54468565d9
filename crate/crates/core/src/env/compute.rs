//! Compute-side model: workload sizing, CPU/GPU split delay, and the
//! clock-dependent energy draw of each side.

use crate::error::{Error, Result};

/// Processing cost of the packets handled this slot:
/// `flops_per_bit · Σ_u bits_u · packets_u`, zipped over a server's users.
pub fn workload_flops(flops_per_bit: f64, packet_bits: &[f64], packets: &[f64]) -> f64 {
    debug_assert_eq!(packet_bits.len(), packets.len());
    let bits: f64 = packet_bits.iter().zip(packets).map(|(l, n)| l * n).sum();
    flops_per_bit * bits
}

/// Busy times of the two sides under a `split`-weighted partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDelay {
    /// CPU busy time in seconds.
    pub cpu: f64,
    /// GPU busy time in seconds.
    pub gpu: f64,
    /// Completion time: the slower of the two sides.
    pub bottleneck: f64,
}

/// Delay of running `workload` FLOPs with fraction `split` on a CPU of
/// `cpu_speed` FLOPs/sec and the rest on a GPU of `gpu_speed` FLOPs/sec.
/// Zero workload completes instantly regardless of speeds.
pub fn split_delay(split: f64, cpu_speed: f64, gpu_speed: f64, workload: f64) -> Result<SplitDelay> {
    if !(0.0..=1.0).contains(&split) {
        return Err(Error::Config(format!("split factor {split} outside [0,1]")));
    }
    if workload < 0.0 {
        return Err(Error::Config("workload must be nonnegative".into()));
    }
    if workload == 0.0 {
        return Ok(SplitDelay { cpu: 0.0, gpu: 0.0, bottleneck: 0.0 });
    }
    let cpu_share = split * workload;
    let gpu_share = (1.0 - split) * workload;
    if cpu_share > 0.0 && cpu_speed <= 0.0 {
        return Err(Error::Config("CPU share assigned with zero CPU speed".into()));
    }
    if gpu_share > 0.0 && gpu_speed <= 0.0 {
        return Err(Error::Config("GPU share assigned with zero GPU speed".into()));
    }
    let cpu = if cpu_share > 0.0 { cpu_share / cpu_speed } else { 0.0 };
    let gpu = if gpu_share > 0.0 { gpu_share / gpu_speed } else { 0.0 };
    Ok(SplitDelay { cpu, gpu, bottleneck: cpu.max(gpu) })
}

/// Split factor that equalizes both sides' busy times, minimizing the
/// bottleneck: `cpu_speed / (cpu_speed + gpu_speed)`.
pub fn optimal_split(cpu_speed: f64, gpu_speed: f64) -> f64 {
    cpu_speed / (cpu_speed + gpu_speed)
}

/// Energy of one compute side over its busy time:
/// `(intensity·core_coeff·clock³ + mem_factor·mem_watts + static_coeff·clock) · busy`.
pub fn side_energy(
    intensity: f64,
    core_coeff: f64,
    clock: f64,
    mem_factor: f64,
    mem_watts: f64,
    static_coeff: f64,
    busy: f64,
) -> Result<f64> {
    for (name, v) in [
        ("intensity", intensity),
        ("core_coeff", core_coeff),
        ("clock", clock),
        ("mem_factor", mem_factor),
        ("mem_watts", mem_watts),
        ("static_coeff", static_coeff),
        ("busy", busy),
    ] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::Config(format!("negative or non-finite energy parameter {name}")));
        }
    }
    let power = intensity * core_coeff * clock.powi(3) + mem_factor * mem_watts + static_coeff * clock;
    Ok(power * busy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_direct_substitution() {
        // Two users, one 1000-bit packet each, at 1e7 FLOPs/bit.
        let w = workload_flops(1.0e7, &[1000.0, 1000.0], &[1.0, 1.0]);
        assert_eq!(w, 2.0e10);
    }

    #[test]
    fn workload_empty_and_linear() {
        assert_eq!(workload_flops(1.0e7, &[1000.0], &[0.0]), 0.0);
        let base = workload_flops(5.0, &[100.0, 200.0], &[3.0, 4.0]);
        let doubled = workload_flops(5.0, &[200.0, 400.0], &[3.0, 4.0]);
        assert_eq!(doubled, 2.0 * base);
    }

    #[test]
    fn split_delay_hand_case() {
        // 4e9 and 2e10 FLOPs/s, 1e9 FLOPs, even split.
        let d = split_delay(0.5, 4.0e9, 2.0e10, 1.0e9).unwrap();
        assert!((d.cpu - 0.125).abs() < 1e-15);
        assert!((d.gpu - 0.025).abs() < 1e-15);
        assert_eq!(d.bottleneck, 0.125);
    }

    #[test]
    fn split_delay_all_gpu() {
        let d = split_delay(0.0, 4.0e9, 2.0e10, 1.0e9).unwrap();
        assert_eq!(d.cpu, 0.0);
        assert!((d.bottleneck - 1.0e9 / 2.0e10).abs() < 1e-15);
    }

    #[test]
    fn optimal_split_equalizes_sides() {
        let k = optimal_split(4.0e9, 2.0e10);
        assert!((k - 1.0 / 6.0).abs() < 1e-15);
        let d = split_delay(k, 4.0e9, 2.0e10, 1.0e9).unwrap();
        assert!((d.cpu - d.gpu).abs() < 1e-12);
        // Equalized time is W/(f_cpu + f_gpu).
        assert!((d.bottleneck - 1.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split_delay(1.5, 1.0, 1.0, 1.0).is_err());
        assert!(split_delay(0.5, 0.0, 1.0, 1.0).is_err());
        // Zero share on a dead side is fine.
        assert!(split_delay(1.0, 1.0, 0.0, 1.0).is_ok());
        // Zero workload is fine even with dead sides.
        assert_eq!(split_delay(0.5, 0.0, 0.0, 0.0).unwrap().bottleneck, 0.0);
    }

    #[test]
    fn side_energy_direct_substitution() {
        // (1·2·1³ + 1·3 + 4·1)·2 = 18 J.
        let e = side_energy(1.0, 2.0, 1.0, 1.0, 3.0, 4.0, 2.0).unwrap();
        assert_eq!(e, 18.0);
    }

    #[test]
    fn side_energy_zero_coefficients_and_linearity() {
        assert_eq!(side_energy(0.0, 2.0, 1.0, 0.0, 3.0, 0.0, 2.0).unwrap(), 0.0);
        let single = side_energy(0.3, 1.0e-28, 2.5e9, 0.2, 1.0, 1.0e-10, 1.0).unwrap();
        let double = side_energy(0.3, 1.0e-28, 2.5e9, 0.2, 1.0, 1.0e-10, 2.0).unwrap();
        assert!((double - 2.0 * single).abs() < 1e-12 * double.abs());
    }

    #[test]
    fn side_energy_rejects_negative_parameters() {
        assert!(side_energy(-0.1, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(side_energy(0.1, 1.0, 1.0, 0.0, -1.0, 0.0, 1.0).is_err());
    }
}
