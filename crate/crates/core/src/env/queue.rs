//! Transmission queues and the three-part packet delay: queuing (via the
//! long-run average queue length), communication, and computing.

/// Packets a server can push out this slot:
/// `floor(slot · rate_sum / (group_size · packet_bits))`.
pub fn service_capacity(slot: f64, rate_sum: f64, group_size: usize, packet_bits: f64) -> u64 {
    if group_size == 0 || packet_bits <= 0.0 {
        return 0;
    }
    let packets = slot * rate_sum / (group_size as f64 * packet_bits);
    if packets <= 0.0 {
        0
    } else {
        packets.floor() as u64
    }
}

/// One slot of the queue recursion. Serves up to `capacity` of the packets
/// already queued, then appends this slot's arrivals.
/// Returns `(served, new_length)`.
pub fn queue_advance(length: u64, capacity: u64, arrivals: u64) -> (u64, u64) {
    let served = length.min(capacity);
    (served, length - served + arrivals)
}

/// Queuing delay from the running mean queue length and the aggregate
/// arrival rate in packets/sec.
pub fn queue_delay(mean_length: f64, arrival_rate_per_sec: f64) -> f64 {
    if arrival_rate_per_sec <= 0.0 {
        return 0.0;
    }
    mean_length / arrival_rate_per_sec
}

/// Per-packet communication delay for one user. Falls back to `cap_seconds`
/// when the running-average rate is zero.
pub fn comm_delay(packet_bits: f64, avg_rate: f64, cap_seconds: f64) -> f64 {
    if avg_rate <= 0.0 {
        cap_seconds
    } else {
        packet_bits / avg_rate
    }
}

/// Running delay statistics for an episode: per-server mean queue length and
/// per-user exponentially smoothed rates.
#[derive(Debug, Clone)]
pub struct DelayTracker {
    /// Running mean of each server's queue length, sampled at slot start.
    pub queue_mean: Vec<f64>,
    slots: u64,
    /// Smoothed per-user rate; `None` until the first observation.
    avg_rate: Vec<Option<f64>>,
    smoothing: f64,
}

impl DelayTracker {
    pub fn new(servers: usize, users: usize, smoothing: f64) -> Self {
        Self {
            queue_mean: vec![0.0; servers],
            slots: 0,
            avg_rate: vec![None; users],
            smoothing,
        }
    }

    /// Fold in one slot: the queue lengths as they stood at slot start and
    /// the realized per-user rates.
    pub fn observe(&mut self, queue_at_start: &[u64], rates: &[f64]) {
        self.observe_lengths(&queue_at_start.iter().map(|&q| q as f64).collect::<Vec<_>>(), rates);
    }

    /// Same as [`observe`](Self::observe) but for fractional queue lengths
    /// (used by expectation-based planning).
    pub fn observe_lengths(&mut self, queue_at_start: &[f64], rates: &[f64]) {
        self.slots += 1;
        let n = self.slots as f64;
        for (mean, &q) in self.queue_mean.iter_mut().zip(queue_at_start) {
            *mean += (q - *mean) / n;
        }
        for (avg, &r) in self.avg_rate.iter_mut().zip(rates) {
            *avg = Some(match *avg {
                None => r,
                Some(prev) => (1.0 - self.smoothing) * prev + self.smoothing * r,
            });
        }
    }

    pub fn smoothed_rate(&self, user: usize) -> f64 {
        self.avg_rate[user].unwrap_or(0.0)
    }

    pub fn slots_seen(&self) -> u64 {
        self.slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_floor_arithmetic() {
        // slot 1 s, rate sum 2e6 b/s, 2 users, 1000-bit packets → 1000.
        assert_eq!(service_capacity(1.0, 2.0e6, 2, 1000.0), 1000);
        // Just below a packet boundary still floors down.
        assert_eq!(service_capacity(1.0, 1999.0, 1, 1000.0), 1);
    }

    #[test]
    fn queue_recursion_arithmetic() {
        let (served, len) = queue_advance(5, 3, 2);
        assert_eq!(served, 3);
        assert_eq!(len, 4);
    }

    #[test]
    fn queue_drains_to_zero() {
        let (served, len) = queue_advance(2, 9, 0);
        assert_eq!(served, 2);
        assert_eq!(len, 0);
    }

    #[test]
    fn littles_law_with_constant_queue() {
        let mut t = DelayTracker::new(1, 1, 0.05);
        for _ in 0..100 {
            t.observe(&[10], &[1.0]);
        }
        assert!((queue_delay(t.queue_mean[0], 5.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_queue_has_zero_delay() {
        let mut t = DelayTracker::new(1, 1, 0.05);
        for _ in 0..50 {
            t.observe(&[0], &[1.0]);
        }
        assert_eq!(queue_delay(t.queue_mean[0], 5.0), 0.0);
    }

    #[test]
    fn comm_delay_caps_on_zero_rate() {
        assert_eq!(comm_delay(1000.0, 0.0, 0.01), 0.01);
        assert!((comm_delay(1000.0, 2000.0, 0.01) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_term_sum() {
        // Queue 1 s + one user at 0.5 s + compute 0.25 s = 1.75 s.
        let total = queue_delay(5.0, 5.0) + comm_delay(1000.0, 2000.0, 1.0) + 0.25;
        assert!((total - 1.75).abs() < 1e-12);
    }

    #[test]
    fn smoothed_rate_starts_at_first_observation() {
        let mut t = DelayTracker::new(1, 1, 0.1);
        t.observe(&[0], &[100.0]);
        assert_eq!(t.smoothed_rate(0), 100.0);
        t.observe(&[0], &[200.0]);
        assert!((t.smoothed_rate(0) - 110.0).abs() < 1e-12);
    }
}
