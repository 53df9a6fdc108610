//! Experiment settings resolved in layers: per-experiment defaults, then
//! the output-directory environment variable, then a flat key=value
//! config file, then command-line flags. Later layers win.

use std::path::{Path, PathBuf};

use superres_core::{Error, Result};

/// Overrides the default output directory when set.
pub const OUT_DIR_ENV: &str = "SUPERRES_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Demo2d,
    SweepCutoff,
    SweepMeasurements,
    GmmDemo,
    ExactnessSuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Demo2d => "demo2d",
            ExperimentKind::SweepCutoff => "sweep-cutoff",
            ExperimentKind::SweepMeasurements => "sweep-measurements",
            ExperimentKind::GmmDemo => "gmm-demo",
            ExperimentKind::ExactnessSuite => "exactness-suite",
        }
    }
}

/// One flat bag of knobs; each experiment reads the subset it uses.
/// `delta` is the instance separation target (the mean separation for the
/// mixture demo), `r` the frequency cutoff (grid maximum in the cutoff
/// sweep, derived per column as 0.26/delta in the measurement sweep), `m`
/// the Gaussian sample count (grid maximum in the measurement sweep), and
/// `trials` the per-cell trial count (instance count for the exactness
/// suite).
#[derive(Debug, Clone)]
pub struct Settings {
    pub d: usize,
    pub k: usize,
    pub delta: f64,
    pub eps_z: f64,
    pub r: f64,
    pub m: usize,
    pub trials: usize,
    pub threshold: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub slices: usize,
    /// Mixture component deviation (gmm-demo only).
    pub sigma: f64,
    /// Mixture sample count (gmm-demo only).
    pub n_samples: usize,
}

impl Settings {
    pub fn defaults(kind: ExperimentKind) -> Settings {
        let base = Settings {
            d: 2,
            k: 8,
            delta: 0.05,
            eps_z: 0.1,
            r: 200.0,
            m: 30,
            trials: 1,
            threshold: 0.1,
            seed: 1,
            out_dir: PathBuf::from("."),
            slices: 2,
            sigma: 0.01,
            n_samples: 100_000,
        };
        match kind {
            ExperimentKind::Demo2d => base,
            ExperimentKind::SweepCutoff => Settings {
                d: 4,
                delta: 0.1,
                eps_z: 0.02,
                r: 25.0,
                m: 64,
                trials: 50,
                ..base
            },
            ExperimentKind::SweepMeasurements => Settings {
                d: 4,
                delta: 0.2,
                eps_z: 0.03,
                r: 0.0,
                m: 64,
                trials: 50,
                ..base
            },
            ExperimentKind::GmmDemo => Settings {
                k: 2,
                delta: 0.5,
                eps_z: 0.0,
                threshold: 0.02,
                ..base
            },
            ExperimentKind::ExactnessSuite => Settings {
                eps_z: 0.0,
                trials: 100,
                threshold: 1e-6,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "need at least one trial".to_string(),
            });
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: "must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// Partial settings from one source (config file or flags); `apply`
/// writes the present fields over a settings value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub delta: Option<f64>,
    pub eps_z: Option<f64>,
    pub r: Option<f64>,
    pub m: Option<usize>,
    pub trials: Option<usize>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub slices: Option<usize>,
    pub sigma: Option<f64>,
    pub n_samples: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Settings) {
        if let Some(v) = self.d {
            s.d = v;
        }
        if let Some(v) = self.k {
            s.k = v;
        }
        if let Some(v) = self.delta {
            s.delta = v;
        }
        if let Some(v) = self.eps_z {
            s.eps_z = v;
        }
        if let Some(v) = self.r {
            s.r = v;
        }
        if let Some(v) = self.m {
            s.m = v;
        }
        if let Some(v) = self.trials {
            s.trials = v;
        }
        if let Some(v) = self.threshold {
            s.threshold = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(ref v) = self.out_dir {
            s.out_dir = v.clone();
        }
        if let Some(v) = self.slices {
            s.slices = v;
        }
        if let Some(v) = self.sigma {
            s.sigma = v;
        }
        if let Some(v) = self.n_samples {
            s.n_samples = v;
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        Error::Parse(format!(
            "config line {line}: `{key}` does not accept `{value}`"
        ))
    })
}

/// Flat `key = value` lines; `#` starts a comment, blank lines are
/// skipped, unknown keys are errors.
pub fn parse_config(text: &str) -> Result<Overrides> {
    let mut o = Overrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((key, value)) = t.split_once('=') else {
            return Err(Error::Parse(format!(
                "config line {line}: expected `key = value`, got `{t}`"
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "d" => o.d = Some(parse_num(key, value, line)?),
            "k" => o.k = Some(parse_num(key, value, line)?),
            "delta" => o.delta = Some(parse_num(key, value, line)?),
            "eps_z" => o.eps_z = Some(parse_num(key, value, line)?),
            "R" | "r" => o.r = Some(parse_num(key, value, line)?),
            "m" => o.m = Some(parse_num(key, value, line)?),
            "trials" => o.trials = Some(parse_num(key, value, line)?),
            "threshold" => o.threshold = Some(parse_num(key, value, line)?),
            "seed" => o.seed = Some(parse_num(key, value, line)?),
            "out_dir" => o.out_dir = Some(PathBuf::from(value)),
            "slices" => o.slices = Some(parse_num(key, value, line)?),
            "sigma" => o.sigma = Some(parse_num(key, value, line)?),
            "n_samples" => o.n_samples = Some(parse_num(key, value, line)?),
            _ => {
                return Err(Error::Parse(format!(
                    "config line {line}: unknown key `{key}`"
                )))
            }
        }
    }
    Ok(o)
}

/// Defaults, then the environment, then the config file, then flags.
pub fn resolve(
    kind: ExperimentKind,
    config_path: Option<&Path>,
    flags: &Overrides,
) -> Result<Settings> {
    let mut settings = Settings::defaults(kind);
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            settings.out_dir = PathBuf::from(dir);
        }
    }
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path)?;
        parse_config(&text)?.apply(&mut settings);
    }
    flags.apply(&mut settings);
    settings.validate()?;
    Ok(settings)
}
