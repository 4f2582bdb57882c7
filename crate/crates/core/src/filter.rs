//! PHYDYAS prototype filter.
//!
//! The pulse is built by frequency sampling: for overlap factor `b` the
//! continuous pulse is
//!
//! ```text
//! p(t) = H0 + 2 Σ_{i=1}^{b-1} (-1)^i H_i cos(2π i t / (bN)),   0 ≤ t ≤ bN
//! ```
//!
//! which is symmetric about `t = bN/2`. Taps are taken at the half-sample
//! grid `t = k + 1/2`, `k = 0..bN-1`, so the discrete pulse is symmetric
//! about `(Lp - 1)/2`. Only the first half is evaluated; the second half is
//! mirrored so the symmetry holds bit-exactly. Unit-energy normalization is
//! the last step.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Frequency coefficients H1..H3 for `b = 4` (H0 = 1).
pub const PHYDYAS_B4: [f64; 3] = [0.971_959_83, std::f64::consts::FRAC_1_SQRT_2, 0.235_146_95];

/// Tolerance used by [`validate`] for the energy check.
pub const ENERGY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    taps: Vec<f64>,
    overlap_factor: usize,
    subcarriers: usize,
}

impl FilterCoefficients {
    /// Wraps arbitrary taps without checking invariants. Use [`validate`]
    /// to inspect them.
    pub fn from_taps(taps: Vec<f64>, overlap_factor: usize, subcarriers: usize) -> Self {
        Self {
            taps,
            overlap_factor,
            subcarriers,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn overlap_factor(&self) -> usize {
        self.overlap_factor
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Center of symmetry, `(Lp - 1) / 2`.
    pub fn center(&self) -> f64 {
        (self.taps.len() as f64 - 1.0) / 2.0
    }
}

/// Builds the unit-energy PHYDYAS pulse of length `b·N`.
pub fn design_phydyas(subcarriers: usize, overlap_factor: usize) -> Result<FilterCoefficients> {
    if subcarriers < 2 || !subcarriers.is_multiple_of(2) {
        return Err(Error::config(format!(
            "subcarrier count must be even and at least 2, got {subcarriers}"
        )));
    }
    let coeffs: &[f64] = match overlap_factor {
        4 => &PHYDYAS_B4,
        b => {
            return Err(Error::config(format!(
                "unsupported PHYDYAS overlap factor {b} (only 4 is tabulated)"
            )))
        }
    };

    let len = overlap_factor * subcarriers;
    let period = len as f64;
    let mut taps = vec![0.0; len];
    for k in 0..len / 2 {
        let t = k as f64 + 0.5;
        let mut value = 1.0;
        for (i, h) in coeffs.iter().enumerate() {
            let i = i + 1;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            value += 2.0 * sign * h * (2.0 * PI * i as f64 * t / period).cos();
        }
        taps[k] = value;
        taps[len - 1 - k] = value;
    }

    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    for t in &mut taps {
        *t /= norm;
    }

    Ok(FilterCoefficients {
        taps,
        overlap_factor,
        subcarriers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub energy: f64,
    pub max_symmetry_deviation: f64,
    pub expected_len: usize,
    pub actual_len: usize,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks length, symmetry and unit energy. Never fails; problems are
/// listed in the report.
pub fn validate(filter: &FilterCoefficients) -> ValidationReport {
    let taps = filter.taps();
    let expected_len = filter.overlap_factor * filter.subcarriers;
    let energy = filter.energy();
    let max_symmetry_deviation = taps
        .iter()
        .zip(taps.iter().rev())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut failures = Vec::new();
    if taps.len() != expected_len {
        failures.push(format!(
            "length {} differs from b*N = {expected_len}",
            taps.len()
        ));
    }
    if max_symmetry_deviation != 0.0 {
        failures.push(format!(
            "taps are not symmetric (max deviation {max_symmetry_deviation:e})"
        ));
    }
    if !((energy - 1.0).abs() <= ENERGY_TOLERANCE) {
        failures.push(format!("energy {energy} is not unity"));
    }

    ValidationReport {
        energy,
        max_symmetry_deviation,
        expected_len,
        actual_len: taps.len(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n256_has_length_1024() {
        let f = design_phydyas(256, 4).unwrap();
        assert_eq!(f.len(), 1024);
    }

    #[test]
    fn unit_energy_and_exact_symmetry() {
        for n in [2, 4, 16, 64, 256] {
            let f = design_phydyas(n, 4).unwrap();
            assert!((f.energy() - 1.0).abs() < 1e-12);
            let taps = f.taps();
            for k in 0..taps.len() {
                assert_eq!(taps[k] - taps[taps.len() - 1 - k], 0.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = design_phydyas(128, 4).unwrap();
        let b = design_phydyas(128, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pulse_peaks_at_center_and_vanishes_at_edges() {
        let f = design_phydyas(64, 4).unwrap();
        let taps = f.taps();
        let peak = taps.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(peak, taps[127]);
        assert!(taps[0].abs() < 1e-3 * peak);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(design_phydyas(64, 3), Err(Error::Config(_))));
        assert!(matches!(design_phydyas(63, 4), Err(Error::Config(_))));
        assert!(matches!(design_phydyas(0, 4), Err(Error::Config(_))));
    }

    #[test]
    fn validate_accepts_generator_output() {
        let report = validate(&design_phydyas(64, 4).unwrap());
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.actual_len, 256);
    }

    #[test]
    fn validate_flags_scaled_taps() {
        let f = design_phydyas(64, 4).unwrap();
        let scaled: Vec<f64> = f.taps().iter().map(|t| 2.0 * t).collect();
        let report = validate(&FilterCoefficients::from_taps(scaled, 4, 64));
        assert!(!report.passed());
        assert!((report.energy - 4.0).abs() < 1e-12);
        assert!(report.failures.iter().any(|m| m.contains("energy")));
        assert_eq!(report.max_symmetry_deviation, 0.0);
    }

    #[test]
    fn validate_flags_asymmetry() {
        let f = design_phydyas(64, 4).unwrap();
        let mut taps = f.taps().to_vec();
        taps[10] += 1e-3;
        let report = validate(&FilterCoefficients::from_taps(taps, 4, 64));
        assert!(report.failures.iter().any(|m| m.contains("symmetric")));
        assert!((report.max_symmetry_deviation - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn validate_flags_wrong_length() {
        let f = design_phydyas(64, 4).unwrap();
        let taps = f.taps()[..200].to_vec();
        let report = validate(&FilterCoefficients::from_taps(taps, 4, 64));
        assert!(report.failures.iter().any(|m| m.contains("length")));
    }
}
