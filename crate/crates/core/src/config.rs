//! Simulation parameters, presets and the `key = value` config file format.

use std::path::Path;

use crate::affine::{hadamard_supported, BasisKind};
use crate::error::{Error, Result};
use crate::receiver::EstimatorMode;

/// Redundancy given either as a multiple of `N` (`"2N"`) or absolutely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Redundancy {
    TimesSubcarriers(usize),
    Absolute(usize),
}

impl Redundancy {
    pub fn resolve(self, subcarriers: usize) -> usize {
        match self {
            Redundancy::TimesSubcarriers(k) => k * subcarriers,
            Redundancy::Absolute(n) => n,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("bad redundancy '{s}' (expected e.g. 128, N, 2N)"));
        if let Some(mult) = s.strip_suffix(['N', 'n']) {
            let mult = mult.trim();
            if mult.is_empty() {
                return Ok(Redundancy::TimesSubcarriers(1));
            }
            return mult.parse().map(Redundancy::TimesSubcarriers).map_err(|_| bad());
        }
        s.parse().map(Redundancy::Absolute).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub subcarriers: usize,
    /// `K`; `None` means `K = N`.
    pub frames: Option<usize>,
    pub redundancy: Vec<Redundancy>,
    pub taps: usize,
    pub overlap: usize,
    pub sigma_c2: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimator_mode: EstimatorMode,
    pub basis: BasisKind,
    pub perfect_csi: bool,
    /// Worker threads for the sweep; `None` uses the global pool.
    pub workers: Option<usize>,
}

pub const DEFAULT_SIGMA_C2: [f64; 7] = [0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const DEFAULT_SNR_DB: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0];

impl Default for SimConfig {
    /// Desk-scale configuration: N = K = n = 64, Lh = 12, 100 trials.
    fn default() -> Self {
        Self {
            subcarriers: 64,
            frames: None,
            redundancy: vec![Redundancy::TimesSubcarriers(1)],
            taps: 12,
            overlap: 4,
            sigma_c2: DEFAULT_SIGMA_C2.to_vec(),
            snr_db: DEFAULT_SNR_DB.to_vec(),
            trials: 100,
            seed: 0,
            estimator_mode: EstimatorMode::Raw,
            basis: BasisKind::Dct,
            perfect_csi: false,
            workers: None,
        }
    }
}

impl SimConfig {
    /// Full-scale setting: N = 256, Lp = 4N, Lh = 12, 100 trials.
    pub fn paper_preset() -> Self {
        Self {
            subcarriers: 256,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Self::paper_preset()),
            "desk" | "default" => Ok(Self::default()),
            other => Err(Error::config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames.unwrap_or(self.subcarriers)
    }

    /// Resolved redundancy values `n`.
    pub fn redundancies(&self) -> Vec<usize> {
        self.redundancy
            .iter()
            .map(|r| r.resolve(self.subcarriers))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.subcarriers;
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::config(format!("N = {n} must be even and >= 2")));
        }
        let k = self.frames();
        if k == 0 || !k.is_multiple_of(2) {
            return Err(Error::config(format!("K = {k} must be even and positive")));
        }
        if self.redundancy.is_empty() {
            return Err(Error::config("at least one redundancy value is required"));
        }
        for red in self.redundancies() {
            if red < n {
                return Err(Error::config(format!("redundancy n = {red} is below N = {n}")));
            }
            if self.basis == BasisKind::Hadamard && !hadamard_supported(k + red) {
                return Err(Error::config(format!(
                    "no Hadamard construction for K + n = {}",
                    k + red
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.taps == 0 || self.taps > n {
            return Err(Error::config(format!("Lh = {} must lie in 1..={n}", self.taps)));
        }
        if let Some(bad) = self.sigma_c2.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::config(format!("sigma_c2 = {bad} outside [0, 1]")));
        }
        if self.estimator_mode == EstimatorMode::Normalized && self.sigma_c2.contains(&0.0) {
            return Err(Error::config(
                "normalized estimation is undefined at sigma_c2 = 0",
            ));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::config(format!("snr_db = {bad} is not finite")));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be at least 1"));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let int = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::config(format!("'{key}' expects an integer, got '{v}'")))
        };
        match key.as_str() {
            "subcarriers" | "n_sub" => self.subcarriers = int(value)?,
            "frames" => self.frames = Some(int(value)?),
            "redundancy" => {
                self.redundancy = split_list(value).map(Redundancy::parse).collect::<Result<_>>()?
            }
            "taps" | "lh" => self.taps = int(value)?,
            "overlap" => self.overlap = int(value)?,
            "sigma_c2" => self.sigma_c2 = parse_floats(&key, value)?,
            "snr_db" => self.snr_db = parse_floats(&key, value)?,
            "trials" => self.trials = int(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad seed '{value}'")))?
            }
            "estimator_mode" => self.estimator_mode = value.parse()?,
            "basis" => self.basis = value.parse()?,
            "perfect_csi" => self.perfect_csi = parse_bool(value)?,
            "workers" => self.workers = Some(int(value)?),
            "preset" => *self = Self::preset(value)?,
            other => return Err(Error::config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a config file of `key = value` lines. `#` starts a comment.
    /// A `preset` line resets everything before it.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    /// Applies the settings in a config file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text).map_err(|(line, err)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: err.to_string(),
        })
    }

    fn apply_text(&mut self, text: &str) -> std::result::Result<(), (usize, Error)> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| (idx + 1, Error::config(format!("expected key = value, got '{line}'"))))?;
            self.set(key, value).map_err(|e| (idx + 1, e))?;
        }
        Ok(())
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_floats(key: &str, value: &str) -> Result<Vec<f64>> {
    split_list(value)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::config(format!("'{key}' expects numbers, got '{v}'")))
        })
        .collect()
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(Error::config(format!("expected a boolean, got '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redundancy_forms() {
        assert_eq!(Redundancy::parse("N").unwrap().resolve(64), 64);
        assert_eq!(Redundancy::parse("1N").unwrap().resolve(64), 64);
        assert_eq!(Redundancy::parse(" 5N ").unwrap().resolve(256), 1280);
        assert_eq!(Redundancy::parse("100").unwrap().resolve(64), 100);
        assert!(Redundancy::parse("xN").is_err());
        assert!(Redundancy::parse("").is_err());
    }

    #[test]
    fn defaults_are_desk_scale_and_valid() {
        let cfg = SimConfig::default();
        assert_eq!((cfg.subcarriers, cfg.frames(), cfg.redundancies()), (64, 64, vec![64]));
        assert_eq!((cfg.taps, cfg.overlap, cfg.trials), (12, 4, 100));
        cfg.validate().unwrap();
    }

    #[test]
    fn paper_preset() {
        let cfg = SimConfig::preset("paper").unwrap();
        assert_eq!(cfg.subcarriers, 256);
        assert_eq!(cfg.overlap * cfg.subcarriers, 1024);
        assert_eq!(cfg.taps, 12);
        assert_eq!(cfg.trials, 100);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_text_overrides_defaults() {
        let mut cfg = SimConfig::default();
        cfg.apply_text(
            "# comment\nsubcarriers = 16\nredundancy = N, 2N,5N\nsigma_c2=0.2,0.9 # trailing\n\
             snr_db = 0, 10\nbasis = hadamard\nperfect-csi = yes\nseed=42\n",
        )
        .unwrap();
        assert_eq!(cfg.subcarriers, 16);
        assert_eq!(cfg.redundancies(), vec![16, 32, 80]);
        assert_eq!(cfg.sigma_c2, vec![0.2, 0.9]);
        assert_eq!(cfg.snr_db, vec![0.0, 10.0]);
        assert_eq!(cfg.basis, BasisKind::Hadamard);
        assert!(cfg.perfect_csi);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn config_text_reports_line_numbers() {
        let mut cfg = SimConfig::default();
        let (line, _) = cfg.apply_text("trials = 3\n\nbogus = 1\n").unwrap_err();
        assert_eq!(line, 3);
        let (line, _) = cfg.apply_text("trials 3\n").unwrap_err();
        assert_eq!(line, 1);
    }

    #[test]
    fn validation_catches_invariant_violations() {
        let bad = [
            SimConfig { redundancy: vec![Redundancy::Absolute(10)], ..SimConfig::default() },
            SimConfig { frames: Some(7), ..SimConfig::default() },
            SimConfig { trials: 0, ..SimConfig::default() },
            SimConfig { sigma_c2: vec![1.2], ..SimConfig::default() },
            SimConfig { taps: 65, ..SimConfig::default() },
            SimConfig {
                redundancy: vec![Redundancy::Absolute(90)],
                basis: BasisKind::Hadamard,
                ..SimConfig::default()
            },
            SimConfig {
                estimator_mode: EstimatorMode::Normalized,
                sigma_c2: vec![0.0, 0.5],
                ..SimConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = SimConfig::from_file(Path::new("/nonexistent/cfg.txt")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
