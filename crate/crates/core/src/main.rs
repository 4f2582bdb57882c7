use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fbmc_affine::config::{parse_floats, Redundancy, SimConfig};
use fbmc_affine::filter::design_phydyas;
use fbmc_affine::harness::sweep;
use fbmc_affine::modem::{transmux_response, BasisFunctionSpec};
use fbmc_affine::output::{emit_results, to_csv};
use fbmc_affine::{Error, Result};

/// Monte Carlo MSE/BER sweeps for FBMC/OQAM with affine precoding.
///
/// Bits fill the QPSK grid subcarrier-first (subcarrier index fastest, then
/// frames); bit pairs (b1, b0) map to ((1-2b1) + j(1-2b0))/sqrt(2).
/// Settings are applied in order: preset, config file, then flags.
#[derive(Debug, Parser)]
#[command(name = "fbmc-sim", version)]
struct Cli {
    /// Start from a named preset: `paper` (N=256, Lp=4N, Lh=12, 100 trials) or `desk`.
    #[arg(long)]
    preset: Option<String>,
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subcarrier count N.
    #[arg(long)]
    subcarriers: Option<usize>,
    /// Frames per burst K (defaults to N).
    #[arg(long)]
    frames: Option<usize>,
    /// Redundancy n, comma list; accepts multiples of N (1N, 2N, 5N) or absolute values.
    #[arg(long)]
    redundancy: Option<String>,
    /// Training power coefficients, comma list in [0, 1].
    #[arg(long = "sigma-c2")]
    sigma_c2: Option<String>,
    /// SNR values in dB, comma list.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Channel tap count Lh.
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// raw (keeps the sigma_c gain) or normalized.
    #[arg(long = "estimator-mode")]
    estimator_mode: Option<String>,
    /// dct or hadamard.
    #[arg(long)]
    basis: Option<String>,
    /// Detect with the true channel instead of the LS estimate.
    #[arg(long = "perfect-csi")]
    perfect_csi: bool,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the prototype filter taps, one per line, and exit.
    #[arg(long = "dump-filter")]
    dump_filter: Option<PathBuf>,
    /// Write the transmultiplexer table (dm,dn,re,im) over |dm|,|dn| <= 3 and exit.
    #[arg(long = "dump-transmux")]
    dump_transmux: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.preset {
        Some(name) => SimConfig::preset(name)?,
        None => SimConfig::default(),
    };
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = cli.subcarriers {
        cfg.subcarriers = v;
    }
    if let Some(v) = cli.frames {
        cfg.frames = Some(v);
    }
    if let Some(v) = &cli.redundancy {
        cfg.redundancy = v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(Redundancy::parse)
            .collect::<Result<_>>()?;
    }
    if let Some(v) = &cli.sigma_c2 {
        cfg.sigma_c2 = parse_floats("sigma-c2", v)?;
    }
    if let Some(v) = &cli.snr_db {
        cfg.snr_db = parse_floats("snr-db", v)?;
    }
    if let Some(v) = cli.taps {
        cfg.taps = v;
    }
    if let Some(v) = cli.trials {
        cfg.trials = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.estimator_mode {
        cfg.estimator_mode = v.parse()?;
    }
    if let Some(v) = &cli.basis {
        cfg.basis = v.parse()?;
    }
    if cli.perfect_csi {
        cfg.perfect_csi = true;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;

    if cli.dump_filter.is_some() || cli.dump_transmux.is_some() {
        let filter = design_phydyas(cfg.subcarriers, cfg.overlap)?;
        if let Some(path) = &cli.dump_filter {
            let text: String = filter.taps().iter().map(|t| format!("{t:e}\n")).collect();
            write(path, &text)?;
        }
        if let Some(path) = &cli.dump_transmux {
            let spec = BasisFunctionSpec::new(filter)?;
            write(path, &transmux_response(&spec, 3)?.to_csv())?;
        }
        return Ok(());
    }

    let result = sweep(&cfg)?;
    match &cli.out {
        Some(path) => emit_results(&result, path)?,
        None => print!("{}", to_csv(&result)),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fbmc-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
