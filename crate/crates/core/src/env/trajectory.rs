//! Trajectory log: one row per slot per server, stable column order.

use std::io::Write;
use std::path::Path;

use crate::env::SlotMeasurement;
use crate::error::Result;

pub const TRAJECTORY_COLUMNS: [&str; 19] = [
    "t", "k", "C_k_b", "S", "E_tot", "u", "u_b", "g", "g_b", "d", "b_level", "omega", "N_k",
    "tau_q", "tau_o", "tau_total", "rates_sum", "slack_D1", "slack_D3",
];

/// Write a trajectory as comma-delimited text. Numbers are emitted with full
/// round-trip precision so identical runs produce identical bytes.
pub fn write_trajectory(path: &Path, measurements: &[SlotMeasurement]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", TRAJECTORY_COLUMNS.join(","))?;
    for m in measurements {
        for k in 0..m.observation.len() {
            let d = &m.dispatch[k];
            let fields = [
                m.slot.to_string(),
                k.to_string(),
                fmt(m.observation[k]),
                fmt(m.sustainability),
                fmt(m.energy_total[k]),
                fmt(d.renewable),
                fmt(d.renewable_to_battery),
                fmt(d.grid),
                fmt(d.grid_to_battery),
                fmt(d.battery_discharge),
                fmt(m.battery_level[k]),
                m.queue_length[k].to_string(),
                m.service_capacity[k].to_string(),
                fmt(m.tau_queue[k]),
                fmt(m.tau_compute[k]),
                fmt(m.tau_total[k]),
                fmt(m.rate_sum[k]),
                fmt(m.slack_renewable),
                fmt(m.slack_power),
            ];
            writeln!(out, "{}", fields.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::env::NetworkEnv;

    #[test]
    fn rows_and_header_shape() {
        let mut cfg = Config::default();
        cfg.sim.users = 4;
        cfg.sim.servers = 2;
        let mut env = NetworkEnv::new(&cfg).unwrap();
        env.reset(0);
        let action = env.action_space().midpoint();
        let ms: Vec<_> = (0..3).map(|_| env.step(&action).unwrap()).collect();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        write_trajectory(&path, &ms).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert_eq!(lines[0], TRAJECTORY_COLUMNS.join(","));
        assert_eq!(lines[1].split(',').count(), TRAJECTORY_COLUMNS.len());
    }
}
