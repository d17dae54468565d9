//! Emissions-per-bit and the sustainability score.

/// Carbon mass per delivered bit. `None` flags a degenerate slot: emissions
/// with no bits delivered.
pub fn per_bit(emissions_kg: f64, bits: f64) -> Option<f64> {
    if bits > 0.0 {
        Some(emissions_kg / bits)
    } else if emissions_kg == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Sustainability score: squared relative reduction of the summed per-server
/// emissions-per-bit against the all-grid reference intensity. A zero
/// reference means no energy was consumed, so the score is 1.
pub fn sustainability(sum_per_bit: f64, grid_reference_per_bit: f64) -> f64 {
    if grid_reference_per_bit == 0.0 {
        return 1.0;
    }
    let ratio = sum_per_bit / grid_reference_per_bit;
    (1.0 - ratio) * (1.0 - ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_grid_collapses_to_zero() {
        // Single server: summed per-bit equals the reference → score 0.
        let c_b = per_bit(2.0e-7, 1000.0).unwrap();
        assert_eq!(sustainability(c_b, c_b), 0.0);
    }

    #[test]
    fn zero_emissions_give_one() {
        assert_eq!(sustainability(0.0, 3.0e-7), 1.0);
    }

    #[test]
    fn half_grid_half_renewable() {
        // Clean renewables covering half the energy → ratio 0.5 → score 0.25.
        let reference = per_bit(1.0 * 10.0, 1000.0).unwrap(); // grid factor 1, 10 J
        let actual = per_bit(1.0 * 5.0, 1000.0).unwrap(); // only the grid half emits
        assert!((sustainability(actual, reference) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn no_energy_consumed_scores_one() {
        assert_eq!(sustainability(0.0, 0.0), 1.0);
    }

    #[test]
    fn degenerate_slot_is_flagged() {
        assert_eq!(per_bit(0.0, 0.0), Some(0.0));
        assert_eq!(per_bit(1.0e-9, 0.0), None);
    }

    #[test]
    fn per_bit_monotone_in_grid_factor() {
        // Fixed dispatch, rising grid factor → per-bit never decreases.
        let bits = 500.0;
        let grid_energy = 4.0;
        let mut last = f64::NEG_INFINITY;
        for wg in [0.1, 0.5, 1.0, 2.0] {
            let c = per_bit(wg * grid_energy, bits).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn score_monotone_below_reference() {
        // On the branch sum ≤ reference, a larger sum never raises the score.
        let reference = 1.0;
        let mut last = f64::INFINITY;
        for sum in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let s = sustainability(sum, reference);
            assert!(s <= last);
            last = s;
        }
    }
}
