//! Frequency-selective, time-invariant Rayleigh channel with AWGN.
//!
//! Taps are i.i.d. circularly-symmetric complex Gaussian with a uniform
//! power-delay profile, each with variance `1/Lh`, so the expected total
//! tap power is one.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<Complex64>,
    cfr: Vec<Complex64>,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps; the CFR is evaluated on `N`
    /// subcarriers.
    pub fn from_taps(taps: Vec<Complex64>, subcarriers: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::config("channel needs at least one tap"));
        }
        if taps.len() > subcarriers {
            return Err(Error::config(format!(
                "{} taps exceed N = {subcarriers}; the CFR would be undersampled",
                taps.len()
            )));
        }
        let cfr = frequency_response(&taps, subcarriers);
        Ok(Self { taps, cfr })
    }

    /// Single unit tap.
    pub fn identity(subcarriers: usize) -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            cfr: vec![Complex64::new(1.0, 0.0); subcarriers],
        }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    /// `H_m`, `m = 0..N`.
    pub fn cfr(&self) -> &[Complex64] {
        &self.cfr
    }

    pub fn subcarriers(&self) -> usize {
        self.cfr.len()
    }
}

/// `H_m = Σ_q h[q] e^{-j2πmq/N}`
pub fn frequency_response(taps: &[Complex64], subcarriers: usize) -> Vec<Complex64> {
    (0..subcarriers)
        .map(|m| {
            taps.iter()
                .enumerate()
                .map(|(q, h)| {
                    let w = -2.0 * PI * ((m * q) % subcarriers) as f64 / subcarriers as f64;
                    h * Complex64::from_polar(1.0, w)
                })
                .sum()
        })
        .collect()
}

/// Zero-mean circular complex Gaussian with `E|x|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

pub fn draw_channel<R: Rng + ?Sized>(
    tap_count: usize,
    subcarriers: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if tap_count == 0 || tap_count > subcarriers {
        return Err(Error::config(format!(
            "tap count Lh = {tap_count} must lie in 1..={subcarriers}"
        )));
    }
    let per_tap = 1.0 / tap_count as f64;
    let taps = (0..tap_count).map(|_| complex_gaussian(rng, per_tap)).collect();
    ChannelRealization::from_taps(taps, subcarriers)
}

/// Full linear convolution with the channel taps plus complex AWGN of
/// variance `noise_var` per sample. Output length is `len(s) + Lh - 1`.
/// With `noise_var == 0` the generator is not touched.
pub fn apply<R: Rng + ?Sized>(
    signal: &[Complex64],
    channel: &ChannelRealization,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(noise_var >= 0.0) {
        return Err(Error::config(format!("noise variance {noise_var} must be >= 0")));
    }
    let taps = channel.taps();
    let mut out = vec![Complex64::new(0.0, 0.0); signal.len() + taps.len() - 1];
    for (k, &s) in signal.iter().enumerate() {
        for (q, &h) in taps.iter().enumerate() {
            out[k + q] += s * h;
        }
    }
    if noise_var > 0.0 {
        for y in &mut out {
            *y += complex_gaussian(rng, noise_var);
        }
    }
    Ok(out)
}

/// Mean `|s[k]|²` over the sequence.
pub fn mean_power(signal: &[Complex64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    signal.iter().map(|v| v.norm_sqr()).sum::<f64>() / signal.len() as f64
}

/// Noise variance that puts `signal_power / σ²` at `snr_db`.
pub fn noise_variance_for_snr(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(taps: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut padded = taps.to_vec();
        padded.resize(n, Complex64::new(0.0, 0.0));
        (0..n)
            .map(|m| {
                padded
                    .iter()
                    .enumerate()
                    .map(|(q, h)| {
                        let a = -2.0 * PI * m as f64 * q as f64 / n as f64;
                        h * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn single_tap_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = draw_channel(1, 64, &mut rng).unwrap();
        let mag = ch.cfr()[0].norm();
        assert!(ch.cfr().iter().all(|h| (h.norm() - mag).abs() < 1e-12));
    }

    #[test]
    fn draws_are_reproducible() {
        let a = draw_channel(12, 256, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = draw_channel(12, 256, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn expected_tap_power_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = 10_000;
        let total: f64 = (0..draws)
            .map(|_| {
                draw_channel(12, 64, &mut rng)
                    .unwrap()
                    .taps()
                    .iter()
                    .map(|h| h.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        assert!((total / draws as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn rejects_bad_tap_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(draw_channel(0, 16, &mut rng), Err(Error::Config(_))));
        assert!(matches!(draw_channel(17, 16, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn identity_channel_passes_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s: Vec<Complex64> = (0..10).map(|k| Complex64::new(k as f64, -1.0)).collect();
        let out = apply(&s, &ChannelRealization::identity(8), 0.0, &mut rng).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn impulse_returns_taps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = draw_channel(5, 16, &mut rng).unwrap();
        let mut s = vec![Complex64::new(0.0, 0.0); 3];
        s[0] = Complex64::new(1.0, 0.0);
        let out = apply(&s, &ch, 0.0, &mut rng).unwrap();
        assert_eq!(out.len(), 7);
        assert_eq!(&out[..5], ch.taps());
    }

    #[test]
    fn noise_has_requested_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let zeros = vec![Complex64::new(0.0, 0.0); 100_000];
        let out = apply(&zeros, &ChannelRealization::identity(4), 4.0, &mut rng).unwrap();
        let var = mean_power(&out);
        assert!((var - 4.0).abs() < 0.1, "{var}");
        let mean: Complex64 = out.iter().sum::<Complex64>() / out.len() as f64;
        assert!(mean.norm() < 0.03);
    }

    #[test]
    fn rejects_negative_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(apply(&[], &ChannelRealization::identity(4), -1.0, &mut rng).is_err());
    }

    #[test]
    fn snr_to_noise_variance() {
        assert!((noise_variance_for_snr(2.0, 10.0) - 0.2).abs() < 1e-15);
        assert_eq!(noise_variance_for_snr(1.0, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn cfr_matches_naive_dft(seed in any::<u64>(), lh in 1usize..=16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = draw_channel(lh, 16, &mut rng).unwrap();
            let reference = naive_dft(ch.taps(), 16);
            for (a, b) in ch.cfr().iter().zip(&reference) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn convolution_is_linear(
            seed in any::<u64>(),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = draw_channel(6, 32, &mut rng).unwrap();
            let s1: Vec<Complex64> = (0..40).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let s2: Vec<Complex64> = (0..40).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let mix: Vec<Complex64> = s1.iter().zip(&s2).map(|(x, y)| x * a + y * b).collect();
            let lhs = apply(&mix, &ch, 0.0, &mut rng).unwrap();
            let r1 = apply(&s1, &ch, 0.0, &mut rng).unwrap();
            let r2 = apply(&s2, &ch, 0.0, &mut rng).unwrap();
            for k in 0..lhs.len() {
                prop_assert!((lhs[k] - (r1[k] * a + r2[k] * b)).norm() < 1e-12);
            }
        }
    }
}
