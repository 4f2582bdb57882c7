//! Monte Carlo driver.
//!
//! A sweep visits every `(σ_c², n, SNR)` point and runs `trials`
//! independent link simulations at each. Trial `t` draws its bits, channel
//! and noise from ChaCha streams keyed by the master seed and `t` alone, so
//! every point sees the same random inputs for a given trial (common random
//! numbers) and the outcome does not depend on how trials are scheduled
//! across threads. Per-trial outcomes are collected in order and reduced
//! sequentially, which keeps results bit-identical for any worker count.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affine::{build_matrix_set, precode, AffineMatrixSet};
use crate::channel::{apply, draw_channel, mean_power, noise_variance_for_snr, ChannelRealization};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::filter::design_phydyas;
use crate::modem::{analyze, synthesize, BasisFunctionSpec};
use crate::oqam::{oqam_destagger, oqam_stagger, qpsk_demodulate, qpsk_modulate, RealOqamGrid};
use crate::receiver::{
    channel_mse, detect, estimate_ls, ChannelEstimate, ReceivedGrid,
};

/// `K / (K + n)`: data instants over transmitted instants.
pub fn bandwidth_efficiency(frames: usize, redundancy: usize) -> f64 {
    frames as f64 / (frames + redundancy) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub sigma_c2: f64,
    pub redundancy: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    SnrDb(f64),
    /// Fixed per-sample variance; zero disables noise.
    Variance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub bits: u64,
    pub fade_events: u64,
    /// Stored as raw bits so the struct stays `Eq`; see [`TrialOutcome::mse`].
    mse_bits: u64,
}

impl TrialOutcome {
    pub fn mse(&self) -> f64 {
        f64::from_bits(self.mse_bits)
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

/// Everything one link pass produced, for inspection in tests.
#[derive(Debug, Clone)]
pub struct LinkOutput {
    pub sent_bits: Vec<u8>,
    pub sent_grid: RealOqamGrid,
    pub received: ReceivedGrid,
    pub estimate: ChannelEstimate,
    pub detected: RealOqamGrid,
    pub decided_bits: Vec<u8>,
    pub noise_var: f64,
    pub mse: f64,
    pub bit_errors: u64,
    pub fade_events: u64,
}

/// Independent random streams for one trial.
pub struct TrialStreams {
    pub bits: ChaCha8Rng,
    pub channel: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

const BITS_KEY: u64 = 0x6269_7473_0000_0001;
const CHANNEL_KEY: u64 = 0x6368_616e_0000_0002;
const NOISE_KEY: u64 = 0x6e6f_6973_0000_0003;

impl TrialStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        let stream = |key: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key);
            rng.set_stream(trial);
            rng
        };
        Self {
            bits: stream(BITS_KEY),
            channel: stream(CHANNEL_KEY),
            noise: stream(NOISE_KEY),
        }
    }
}

/// Shared, immutable state for running trials: the modem and one matrix
/// set per redundancy value.
#[derive(Debug, Clone)]
pub struct LinkSimulator {
    cfg: SimConfig,
    spec: BasisFunctionSpec,
    matrices: Vec<(usize, Arc<AffineMatrixSet>)>,
}

impl LinkSimulator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = BasisFunctionSpec::new(design_phydyas(cfg.subcarriers, cfg.overlap)?)?;
        let mut matrices: Vec<(usize, Arc<AffineMatrixSet>)> = Vec::new();
        for red in cfg.redundancies() {
            if matrices.iter().any(|(r, _)| *r == red) {
                continue;
            }
            let m = build_matrix_set(cfg.basis, cfg.subcarriers, cfg.frames(), red)?;
            matrices.push((red, Arc::new(m)));
        }
        Ok(Self {
            cfg: cfg.clone(),
            spec,
            matrices,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn modem(&self) -> &BasisFunctionSpec {
        &self.spec
    }

    pub fn matrices(&self, redundancy: usize) -> Result<&AffineMatrixSet> {
        self.matrices
            .iter()
            .find(|(r, _)| *r == redundancy)
            .map(|(_, m)| m.as_ref())
            .ok_or_else(|| Error::config(format!("redundancy {redundancy} is not configured")))
    }

    /// Sweep points in output order: `σ_c²` outermost, then `n`, then SNR.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &sigma_c2 in &self.cfg.sigma_c2 {
            for redundancy in self.cfg.redundancies() {
                for &snr_db in &self.cfg.snr_db {
                    out.push(SweepPoint {
                        sigma_c2,
                        redundancy,
                        snr_db,
                    });
                }
            }
        }
        out
    }

    /// One full pass: bits through the precoded FBMC link and back.
    pub fn run_link(
        &self,
        sigma_c2: f64,
        redundancy: usize,
        channel: &ChannelRealization,
        noise: Noise,
        bit_rng: &mut impl Rng,
        noise_rng: &mut impl Rng,
    ) -> Result<LinkOutput> {
        let m = self.matrices(redundancy)?;
        let (n_sub, k) = (self.cfg.subcarriers, self.cfg.frames());

        let sent_bits: Vec<u8> = (0..n_sub * k).map(|_| bit_rng.random_range(0..2u8)).collect();
        let symbols = qpsk_modulate(&sent_bits, n_sub, k)?;
        let sent_grid = oqam_stagger(&symbols);
        let z = precode(&sent_grid, m, sigma_c2)?;
        let tx = synthesize(&z.z, &self.spec)?;

        let noise_var = match noise {
            Noise::SnrDb(db) => noise_variance_for_snr(mean_power(&tx), db),
            Noise::Variance(v) => v,
        };
        let rx: Vec<Complex64> = apply(&tx, channel, noise_var, noise_rng)?;
        let received = ReceivedGrid(analyze(&rx, &self.spec, m.instants()));

        let estimate = estimate_ls(&received, m, sigma_c2, self.cfg.estimator_mode)?;
        let mse = channel_mse(&estimate, channel)?;
        let detection = if self.cfg.perfect_csi {
            detect(&received, m, &ChannelEstimate::perfect(channel))?
        } else {
            detect(&received, m, &estimate)?
        };
        let decided_bits = qpsk_demodulate(&oqam_destagger(&detection.grid)?);
        let bit_errors = sent_bits
            .iter()
            .zip(&decided_bits)
            .filter(|(a, b)| a != b)
            .count() as u64;

        Ok(LinkOutput {
            sent_bits,
            sent_grid,
            received,
            estimate,
            detected: detection.grid,
            decided_bits,
            noise_var,
            mse,
            bit_errors,
            fade_events: detection.fade_events as u64,
        })
    }

    /// Trial `trial` at `point`, with streams derived from the master seed.
    pub fn run_trial(&self, point: &SweepPoint, trial: u64) -> Result<TrialOutcome> {
        let mut streams = TrialStreams::new(self.cfg.seed, trial);
        self.run_trial_with(point, &mut streams)
    }

    pub fn run_trial_with(&self, point: &SweepPoint, streams: &mut TrialStreams) -> Result<TrialOutcome> {
        let channel = draw_channel(self.cfg.taps, self.cfg.subcarriers, &mut streams.channel)?;
        let out = self.run_link(
            point.sigma_c2,
            point.redundancy,
            &channel,
            Noise::SnrDb(point.snr_db),
            &mut streams.bits,
            &mut streams.noise,
        )?;
        Ok(TrialOutcome {
            bit_errors: out.bit_errors,
            bits: out.sent_bits.len() as u64,
            fade_events: out.fade_events,
            mse_bits: out.mse.to_bits(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sigma_c2: f64,
    pub redundancy: usize,
    pub snr_db: f64,
    pub mse: f64,
    /// Total errored bits over total bits.
    pub ber: f64,
    pub bw_eff: f64,
    pub trials: usize,
    pub fade_events: u64,
    pub bit_errors: u64,
    pub bits: u64,
    /// Per-trial values, in trial order. Empty when read back from CSV.
    pub trial_mse: Vec<f64>,
    pub trial_ber: Vec<f64>,
}

impl SweepRecord {
    pub fn mse_std_error(&self) -> f64 {
        std_error(&self.trial_mse)
    }

    pub fn ber_std_error(&self) -> f64 {
        std_error(&self.trial_ber)
    }
}

/// Sample standard deviation over `sqrt(len)`; zero for fewer than two values.
pub fn std_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Standard error of the mean of `a[i] - b[i]` (paired trials).
pub fn paired_std_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    std_error(&diff)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn find(&self, sigma_c2: f64, redundancy: usize, snr_db: f64) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.sigma_c2 == sigma_c2 && r.redundancy == redundancy && r.snr_db == snr_db)
    }
}

fn aggregate(point: SweepPoint, frames: usize, outcomes: &[TrialOutcome]) -> SweepRecord {
    let trial_mse: Vec<f64> = outcomes.iter().map(TrialOutcome::mse).collect();
    let trial_ber: Vec<f64> = outcomes.iter().map(TrialOutcome::ber).collect();
    let bit_errors = outcomes.iter().map(|o| o.bit_errors).sum::<u64>();
    let bits = outcomes.iter().map(|o| o.bits).sum::<u64>();
    SweepRecord {
        sigma_c2: point.sigma_c2,
        redundancy: point.redundancy,
        snr_db: point.snr_db,
        mse: trial_mse.iter().sum::<f64>() / outcomes.len() as f64,
        ber: bit_errors as f64 / bits as f64,
        bw_eff: bandwidth_efficiency(frames, point.redundancy),
        trials: outcomes.len(),
        fade_events: outcomes.iter().map(|o| o.fade_events).sum(),
        bit_errors,
        bits,
        trial_mse,
        trial_ber,
    }
}

/// How trials are scheduled. Results do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon workers; `None` uses the global pool. Falls back to sequential
    /// when built without the `parallel` feature.
    Parallel { workers: Option<usize> },
}

impl Execution {
    pub fn from_config(cfg: &SimConfig) -> Self {
        match cfg.workers {
            Some(1) => Execution::Sequential,
            workers => Execution::Parallel { workers },
        }
    }
}

fn run_items(sim: &LinkSimulator, items: &[(usize, u64)], points: &[SweepPoint], exec: Execution) -> Result<Vec<TrialOutcome>> {
    let job = |&(p, t): &(usize, u64)| sim.run_trial(&points[p], t);
    match exec {
        Execution::Sequential => items.iter().map(job).collect(),
        Execution::Parallel { workers } => parallel_map(items, job, workers),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(items: &[T], job: F, workers: Option<usize>) -> Result<Vec<TrialOutcome>>
where
    T: Sync,
    F: Fn(&T) -> Result<TrialOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || items.par_iter().map(&job).collect::<Result<Vec<_>>>();
    match workers {
        None => run(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::config(format!("cannot start {w} workers: {e}")))?
            .install(run),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(items: &[T], job: F, _workers: Option<usize>) -> Result<Vec<TrialOutcome>>
where
    F: Fn(&T) -> Result<TrialOutcome>,
{
    items.iter().map(job).collect()
}

/// Runs the whole sweep described by `cfg`, scheduled per `cfg.workers`.
pub fn sweep(cfg: &SimConfig) -> Result<SweepResult> {
    sweep_with(cfg, Execution::from_config(cfg))
}

pub fn sweep_with(cfg: &SimConfig, exec: Execution) -> Result<SweepResult> {
    let sim = LinkSimulator::new(cfg)?;
    let points = sim.points();
    let trials = cfg.trials as u64;
    let items: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let outcomes = run_items(&sim, &items, &points, exec)?;
    let records = points
        .iter()
        .zip(outcomes.chunks(cfg.trials))
        .map(|(point, chunk)| aggregate(*point, cfg.frames(), chunk))
        .collect();
    Ok(SweepResult { records })
}
