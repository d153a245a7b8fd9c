use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use froxpvs::neural::{ModelConfig, TrainConfig};
use froxpvs::scenegen::{DatasetConfig, DEFAULT_FRAMES};
use froxpvs::{PvsError, Result};

/// Every setting a command may read. Built from the defaults, then a
/// `key=value` file, then command-line flags, each overriding the last.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub d: usize,
    pub hidden: Vec<usize>,
    pub kernel: usize,
    pub gate: bool,
    /// Frames written by `gen-dataset`.
    pub frames: usize,
    /// Trailing frames kept out of training; `None` holds out a tenth.
    pub held_out: Option<usize>,
    /// Depth beyond which the far-field pass takes over; `None` disables it.
    pub threshold_distance: Option<f64>,
    pub eval_resolution: (usize, usize),
    pub include_dynamic: bool,
    /// Writes every timing as 0 so repeated runs produce identical files.
    pub deterministic: bool,
    pub bench_repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            d: 4,
            hidden: vec![32, 32],
            kernel: 3,
            gate: false,
            frames: DEFAULT_FRAMES,
            held_out: None,
            threshold_distance: None,
            eval_resolution: (256, 256),
            include_dynamic: false,
            deterministic: false,
            bench_repeats: 5,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| PvsError::InvalidInput(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(PvsError::InvalidInput(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

impl RunConfig {
    pub fn model(&self) -> ModelConfig {
        let m = ModelConfig::with_hidden(self.d, &self.hidden, self.kernel);
        if self.gate {
            m.gated()
        } else {
            m
        }
    }

    /// Applies one setting; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "d" => self.d = parse(key, v)?,
            "hidden" => {
                self.hidden = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|w| parse(key, w)).collect::<Result<_>>()?
                }
            }
            "kernel" => self.kernel = parse(key, v)?,
            "gate" => {
                self.gate = match v {
                    "occupancy" => true,
                    "none" => false,
                    _ => return Err(PvsError::InvalidInput(format!("`gate`: expected occupancy or none, got `{v}`"))),
                }
            }
            "frames" => self.frames = parse(key, v)?,
            "held_out" => self.held_out = if v == "auto" { None } else { Some(parse(key, v)?) },
            "threshold_distance" => {
                self.threshold_distance = if v == "none" { None } else { Some(parse(key, v)?) }
            }
            "eval_resolution" => {
                let (w, h) = v
                    .split_once('x')
                    .ok_or_else(|| PvsError::InvalidInput(format!("`{key}`: expected `WxH`, got `{v}`")))?;
                self.eval_resolution = (parse(key, w)?, parse(key, h)?);
            }
            "include_dynamic" => self.include_dynamic = parse_bool(key, v)?,
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            "bench_repeats" => self.bench_repeats = parse(key, v)?,
            _ => {
                if !self.train.set(key, v)? && !self.dataset.set(key, v)? {
                    return Err(PvsError::InvalidInput(format!("unknown setting `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| PvsError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| PvsError::Format {
                what: "config file",
                detail: format!("line {}: expected `key=value`", n + 1),
            })?;
            self.set(&k.trim().replace('-', "_"), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        self.model().validate()?;
        let (w, h) = self.eval_resolution;
        if w == 0 || h == 0 {
            return Err(PvsError::InvalidInput("evaluation resolution must be positive".into()));
        }
        if self.bench_repeats == 0 {
            return Err(PvsError::InvalidInput("bench_repeats must be at least 1".into()));
        }
        if let Some(t) = self.threshold_distance {
            let s = &self.dataset.scene;
            if !(t > s.near && t < s.far) {
                return Err(PvsError::InvalidInput(format!(
                    "threshold distance {t} outside ({}, {})",
                    s.near, s.far
                )));
            }
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let hidden = self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("d".to_string(), self.d.to_string()),
            ("hidden".into(), hidden),
            ("kernel".into(), self.kernel.to_string()),
            ("gate".into(), if self.gate { "occupancy" } else { "none" }.into()),
            ("frames".into(), self.frames.to_string()),
            ("held_out".into(), self.held_out.map_or_else(|| "auto".into(), |h| h.to_string())),
            (
                "threshold_distance".into(),
                self.threshold_distance.map_or_else(|| "none".into(), |t| t.to_string()),
            ),
            (
                "eval_resolution".into(),
                format!("{}x{}", self.eval_resolution.0, self.eval_resolution.1),
            ),
            ("include_dynamic".into(), self.include_dynamic.to_string()),
            ("deterministic".into(), self.deterministic.to_string()),
            ("bench_repeats".into(), self.bench_repeats.to_string()),
        ];
        out.extend(self.train.to_pairs());
        out.extend(self.dataset.to_pairs());
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
