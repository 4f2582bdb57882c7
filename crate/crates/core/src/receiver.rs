//! LS channel estimation and data detection on the demodulated grid.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::affine::AffineMatrixSet;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::oqam::RealOqamGrid;

/// Magnitude below which a subcarrier is treated as unequalizable.
pub const FADE_THRESHOLD: f64 = 1e-12;

/// Demodulated `N × (K+n)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedGrid(pub DMatrix<Complex64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorMode {
    /// Diagonal of `Y·E` as is; carries the `σ_c` gain.
    #[default]
    Raw,
    /// Diagonal of `Y·E` divided by `σ_c`.
    Normalized,
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorMode::Raw => "raw",
            EstimatorMode::Normalized => "normalized",
        })
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(EstimatorMode::Raw),
            "normalized" => Ok(EstimatorMode::Normalized),
            other => Err(Error::config(format!("unknown estimator mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Diagonal of `Ĥ`.
    pub values: Vec<Complex64>,
    pub mode: EstimatorMode,
}

impl ChannelEstimate {
    /// Genie estimate equal to the true CFR.
    pub fn perfect(channel: &ChannelRealization) -> Self {
        Self {
            values: channel.cfr().to_vec(),
            mode: EstimatorMode::Normalized,
        }
    }
}

/// `Y·M` for complex `Y` and real `M`, done as two real products.
pub fn project(y: &DMatrix<Complex64>, m: &DMatrix<f64>) -> DMatrix<Complex64> {
    let re = y.map(|v| v.re) * m;
    let im = y.map(|v| v.im) * m;
    re.zip_map(&im, Complex64::new)
}

fn check_shape(y: &ReceivedGrid, m: &AffineMatrixSet) -> Result<()> {
    if y.0.shape() != (m.subcarriers, m.instants()) {
        return Err(Error::input(format!(
            "received grid is {:?}, expected {}x{}",
            y.0.shape(),
            m.subcarriers,
            m.instants()
        )));
    }
    Ok(())
}

/// `Ĥ = diag(Y·E)`, optionally divided by `σ_c`. Off-diagonal entries of
/// the projection are not used, so only the diagonal is computed.
pub fn estimate_ls(
    y: &ReceivedGrid,
    m: &AffineMatrixSet,
    sigma_c2: f64,
    mode: EstimatorMode,
) -> Result<ChannelEstimate> {
    check_shape(y, m)?;
    let scale = match mode {
        EstimatorMode::Raw => 1.0,
        EstimatorMode::Normalized => {
            if !(sigma_c2 > 0.0) {
                return Err(Error::config(
                    "normalized estimation needs training power sigma_c2 > 0",
                ));
            }
            1.0 / sigma_c2.sqrt()
        }
    };
    let values = (0..m.subcarriers)
        .map(|row| {
            let acc: Complex64 = y
                .0
                .row(row)
                .iter()
                .zip(m.estimator.column(row).iter())
                .map(|(v, e)| v * *e)
                .sum();
            acc * scale
        })
        .collect();
    Ok(ChannelEstimate { values, mode })
}

/// `(1/N)·Σ_m |H_m - Ĥ_m|²` for one realization.
pub fn channel_mse(estimate: &ChannelEstimate, truth: &ChannelRealization) -> Result<f64> {
    let cfr = truth.cfr();
    if cfr.len() != estimate.values.len() {
        return Err(Error::input(format!(
            "estimate has {} subcarriers, channel has {}",
            estimate.values.len(),
            cfr.len()
        )));
    }
    Ok(cfr
        .iter()
        .zip(&estimate.values)
        .map(|(h, e)| (h - e).norm_sqr())
        .sum::<f64>()
        / cfr.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub grid: RealOqamGrid,
    /// Subcarriers whose estimate fell below [`FADE_THRESHOLD`].
    pub fade_events: usize,
}

/// `X̂ = Re{Ĥ⁻¹·Y·D}` with a one-tap equalizer per subcarrier.
pub fn detect(
    y: &ReceivedGrid,
    m: &AffineMatrixSet,
    estimate: &ChannelEstimate,
) -> Result<Detection> {
    check_shape(y, m)?;
    if estimate.values.len() != m.subcarriers {
        return Err(Error::input(format!(
            "estimate has {} subcarriers, expected {}",
            estimate.values.len(),
            m.subcarriers
        )));
    }
    let mut fade_events = 0;
    let inverse: Vec<Complex64> = estimate
        .values
        .iter()
        .map(|h| {
            let mag = h.norm();
            if mag < FADE_THRESHOLD {
                fade_events += 1;
                let phase = if mag > 0.0 { h.arg() } else { 0.0 };
                Complex64::from_polar(1.0 / FADE_THRESHOLD, -phase)
            } else {
                h.inv()
            }
        })
        .collect();

    let yd = project(&y.0, &m.detector);
    let x = DMatrix::from_fn(yd.nrows(), yd.ncols(), |row, col| (yd[(row, col)] * inverse[row]).re);
    Ok(Detection {
        grid: RealOqamGrid(x),
        fade_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{build_matrix_set, precode, BasisKind};
    use crate::channel::draw_channel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            if rng.random::<bool>() {
                std::f64::consts::FRAC_1_SQRT_2
            } else {
                -std::f64::consts::FRAC_1_SQRT_2
            }
        })
    }

    /// Matrix-level received grid `H·Z`, no modem and no noise.
    fn matrix_level(h: &[Complex64], z: &DMatrix<f64>) -> ReceivedGrid {
        ReceivedGrid(DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| h[r] * z[(r, c)]))
    }

    #[test]
    fn training_only_input_gives_scaled_channel() {
        let m = build_matrix_set(BasisKind::Dct, 8, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = draw_channel(4, 8, &mut rng).unwrap();
        let sigma_c = 0.6f64;
        let y = matrix_level(ch.cfr(), &(&m.training * sigma_c));
        let est = estimate_ls(&y, &m, sigma_c * sigma_c, EstimatorMode::Raw).unwrap();
        for (e, h) in est.values.iter().zip(ch.cfr()) {
            assert!((e - h * sigma_c).norm() < 1e-10);
        }
        let norm = estimate_ls(&y, &m, sigma_c * sigma_c, EstimatorMode::Normalized).unwrap();
        for (e, h) in norm.values.iter().zip(ch.cfr()) {
            assert!((e - h).norm() < 1e-10);
        }
    }

    #[test]
    fn data_only_input_is_invisible_to_estimator() {
        let m = build_matrix_set(BasisKind::Dct, 8, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = draw_channel(4, 8, &mut rng).unwrap();
        let x = random_signs(&mut rng, 8, 8);
        let y = matrix_level(ch.cfr(), &(&x * &m.precoder * 0.9));
        let full = project(&y.0, &m.estimator);
        assert!(full.iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn normalized_mode_needs_training() {
        let m = build_matrix_set(BasisKind::Dct, 4, 4, 4).unwrap();
        let y = ReceivedGrid(DMatrix::zeros(4, 8));
        assert!(matches!(
            estimate_ls(&y, &m, 0.0, EstimatorMode::Normalized),
            Err(Error::Config(_))
        ));
        assert!(estimate_ls(&y, &m, 0.0, EstimatorMode::Raw).is_ok());
    }

    #[test]
    fn shape_mismatch_is_an_input_error() {
        let m = build_matrix_set(BasisKind::Dct, 4, 4, 4).unwrap();
        let y = ReceivedGrid(DMatrix::zeros(4, 7));
        assert!(matches!(
            estimate_ls(&y, &m, 0.5, EstimatorMode::Raw),
            Err(Error::Input(_))
        ));
        let est = ChannelEstimate {
            values: vec![Complex64::new(1.0, 0.0); 4],
            mode: EstimatorMode::Raw,
        };
        assert!(matches!(detect(&y, &m, &est), Err(Error::Input(_))));
    }

    #[test]
    fn mse_of_exact_estimate_is_zero() {
        let ch = draw_channel(3, 16, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(channel_mse(&ChannelEstimate::perfect(&ch), &ch).unwrap(), 0.0);
    }

    /// Closed form of the biased estimate `σ_c·H`: the error is `(1-σ_c)·H`.
    #[test]
    fn biased_mse_closed_form() {
        let m = build_matrix_set(BasisKind::Dct, 16, 16, 16).unwrap();
        // unit-modulus CFR so (1/N)Σ|H|² = 1
        let taps = vec![Complex64::new(0.0, 1.0)];
        let ch = ChannelRealization::from_taps(taps, 16).unwrap();
        let sigma_c2 = 0.25f64;
        let y = matrix_level(ch.cfr(), &(&m.training * sigma_c2.sqrt()));
        let est = estimate_ls(&y, &m, sigma_c2, EstimatorMode::Raw).unwrap();
        let mse = channel_mse(&est, &ch).unwrap();
        assert!((mse - 0.25).abs() < 1e-12, "{mse}");
    }

    #[test]
    fn perfect_csi_recovers_scaled_data() {
        let m = build_matrix_set(BasisKind::Hadamard, 8, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ch = draw_channel(6, 8, &mut rng).unwrap();
        let x = RealOqamGrid(random_signs(&mut rng, 8, 8));
        let z = precode(&x, &m, 0.3).unwrap();
        let y = matrix_level(ch.cfr(), &z.z);
        let d = detect(&y, &m, &ChannelEstimate::perfect(&ch)).unwrap();
        assert!((d.grid.0 - &x.0 * z.sigma_s()).amax() < 1e-10);
        assert_eq!(d.fade_events, 0);
    }

    #[test]
    fn fade_guard_counts_and_keeps_values_finite() {
        let m = build_matrix_set(BasisKind::Dct, 4, 4, 4).unwrap();
        let y = ReceivedGrid(DMatrix::from_element(4, 8, Complex64::new(1e-3, 0.0)));
        let est = ChannelEstimate {
            values: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1e-13, 1e-14),
                Complex64::new(0.5, 0.5),
            ],
            mode: EstimatorMode::Raw,
        };
        let d = detect(&y, &m, &est).unwrap();
        assert_eq!(d.fade_events, 2);
        assert!(d.grid.0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn estimator_mode_parses() {
        assert_eq!("RAW".parse::<EstimatorMode>().unwrap(), EstimatorMode::Raw);
        assert_eq!(
            "normalized".parse::<EstimatorMode>().unwrap(),
            EstimatorMode::Normalized
        );
        assert!("mmse".parse::<EstimatorMode>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hard_decisions_ignore_positive_scaling(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = build_matrix_set(BasisKind::Dct, 8, 8, 8).unwrap();
            let y = ReceivedGrid(DMatrix::from_fn(8, 16, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }));
            let values: Vec<Complex64> = (0..8)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let a = ChannelEstimate { values: values.clone(), mode: EstimatorMode::Raw };
            let b = ChannelEstimate {
                values: values.iter().map(|v| v * scale).collect(),
                mode: EstimatorMode::Normalized,
            };
            let da = detect(&y, &m, &a).unwrap().grid.0;
            let db = detect(&y, &m, &b).unwrap().grid.0;
            for (p, q) in da.iter().zip(db.iter()) {
                prop_assert_eq!(p.signum(), q.signum());
            }
        }
    }
}
