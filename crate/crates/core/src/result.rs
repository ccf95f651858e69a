use serde::{Deserialize, Serialize};

use crate::geometry::Assignment;

/// Version tag written into every JSON result and CSV row.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub assignment: Assignment,
    /// Per template point, every scene index whose normalized max-marginal
    /// lies within the tie band of the winner.
    pub tie_sets: Vec<Vec<usize>>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub collisions: usize,
}

/// Index of the largest value, lowest index on exact ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalizes `max_marginal` to sum one and returns every index within
/// `band` of the largest entry, always including `winner`.
pub(crate) fn tie_set(max_marginal: &[f64], winner: usize, band: f64) -> Vec<usize> {
    let total: f64 = max_marginal.iter().sum();
    let top = max_marginal[winner];
    let mut out: Vec<usize> = max_marginal
        .iter()
        .enumerate()
        .filter(|(i, &v)| *i == winner || (top - v) / total < band)
        .map(|(i, _)| i)
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.5; 4]), 0);
    }

    #[test]
    fn tie_band_is_relative_to_the_normalized_marginal() {
        assert_eq!(tie_set(&[1.0; 5], 0, 1e-4), vec![0, 1, 2, 3, 4]);
        assert_eq!(tie_set(&[0.5, 0.3, 0.2], 0, 1e-4), vec![0]);
        assert_eq!(tie_set(&[0.5, 0.49999, 0.2], 0, 1e-4), vec![0, 1]);
    }
}
