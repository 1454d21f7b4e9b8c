use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contrastive::Normalize;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::segmenter::Sampler;

/// Training hyperparameters.
///
/// Parsed from flat `key = value` text; see [`TrainConfig::parse`]. Every
/// field name is a valid key, and a few dotted aliases
/// (`segmenter.tau_n`, `contrastive.normalize`, ...) are accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_m: f64,
    pub lambda_s: f64,
    pub lambda_c: f64,
    /// Epochs at the start during which `lambda_s` is treated as zero.
    pub warmup_epochs: usize,
    pub tau_g: f64,
    pub tau_n: f64,
    pub sinkhorn_lambda: f64,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
    pub num_motifs: usize,
    pub top_fraction: f64,
    pub max_segments: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub sampler: Sampler,
    pub normalize: Normalize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr: 1e-3,
            lambda_m: 1.0,
            lambda_s: 0.1,
            lambda_c: 1.0,
            warmup_epochs: 2,
            tau_g: 0.2,
            tau_n: 0.2,
            sinkhorn_lambda: 20.0,
            sinkhorn_iters: 300,
            sinkhorn_tol: 1e-6,
            num_motifs: 10,
            top_fraction: 0.1,
            max_segments: 10,
            layers: 3,
            hidden_dim: 64,
            sampler: Sampler::Motif,
            normalize: Normalize::Graphs,
            seed: 0,
        }
    }
}

fn canonical_key(key: &str) -> &str {
    match key {
        "learning_rate" | "train.lr" => "lr",
        "train.epochs" => "epochs",
        "train.batch_size" => "batch_size",
        "train.seed" => "seed",
        "K" | "k" | "motif.k" | "motif.num_motifs" => "num_motifs",
        "motif.tau_g" => "tau_g",
        "lambda" | "motif.lambda" | "sinkhorn.lambda" => "sinkhorn_lambda",
        "sinkhorn.iters" | "sinkhorn.max_iters" => "sinkhorn_iters",
        "sinkhorn.tol" => "sinkhorn_tol",
        "segmenter.tau_n" => "tau_n",
        "segmenter.top_fraction" => "top_fraction",
        "segmenter.max_segments" => "max_segments",
        "segmenter.sampler" => "sampler",
        "contrastive.normalize" => "normalize",
        "contrastive.tau_g" => "tau_g",
        "encoder.layers" => "layers",
        "encoder.hidden_dim" => "hidden_dim",
        other => other,
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl TrainConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match canonical_key(key) {
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "lambda_m" => self.lambda_m = parse_num(key, value)?,
            "lambda_s" => self.lambda_s = parse_num(key, value)?,
            "lambda_c" => self.lambda_c = parse_num(key, value)?,
            "warmup_epochs" => self.warmup_epochs = parse_num(key, value)?,
            "tau_g" => self.tau_g = parse_num(key, value)?,
            "tau_n" => self.tau_n = parse_num(key, value)?,
            "sinkhorn_lambda" => self.sinkhorn_lambda = parse_num(key, value)?,
            "sinkhorn_iters" => self.sinkhorn_iters = parse_num(key, value)?,
            "sinkhorn_tol" => self.sinkhorn_tol = parse_num(key, value)?,
            "num_motifs" => self.num_motifs = parse_num(key, value)?,
            "top_fraction" => self.top_fraction = parse_num(key, value)?,
            "max_segments" => self.max_segments = parse_num(key, value)?,
            "layers" => self.layers = parse_num(key, value)?,
            "hidden_dim" => self.hidden_dim = parse_num(key, value)?,
            "sampler" => self.sampler = value.parse()?,
            "normalize" => self.normalize = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults overridden by the assignments in `text`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical `key = value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("lr", self.lr.to_string());
        kv("lambda_m", self.lambda_m.to_string());
        kv("lambda_s", self.lambda_s.to_string());
        kv("lambda_c", self.lambda_c.to_string());
        kv("warmup_epochs", self.warmup_epochs.to_string());
        kv("tau_g", self.tau_g.to_string());
        kv("tau_n", self.tau_n.to_string());
        kv("sinkhorn_lambda", self.sinkhorn_lambda.to_string());
        kv("sinkhorn_iters", self.sinkhorn_iters.to_string());
        kv("sinkhorn_tol", self.sinkhorn_tol.to_string());
        kv("num_motifs", self.num_motifs.to_string());
        kv("top_fraction", self.top_fraction.to_string());
        kv("max_segments", self.max_segments.to_string());
        kv("layers", self.layers.to_string());
        kv("hidden_dim", self.hidden_dim.to_string());
        kv("sampler", self.sampler.to_string());
        kv("normalize", self.normalize.to_string());
        kv("seed", self.seed.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("tau_g", self.tau_g),
            ("tau_n", self.tau_n),
            ("sinkhorn_lambda", self.sinkhorn_lambda),
            ("sinkhorn_tol", self.sinkhorn_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let weights = [
            ("lambda_m", self.lambda_m),
            ("lambda_s", self.lambda_s),
            ("lambda_c", self.lambda_c),
        ];
        for (name, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if weights.iter().all(|(_, v)| *v == 0.0) {
            return Err(Error::Config("at least one loss weight must be > 0".into()));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "top_fraction must be in (0, 1], got {}",
                self.top_fraction
            )));
        }
        let counts = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("sinkhorn_iters", self.sinkhorn_iters),
            ("num_motifs", self.num_motifs),
            ("layers", self.layers),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.max_segments < 2 {
            return Err(Error::Config("max_segments must be >= 2".into()));
        }
        Ok(())
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            layers: self.layers,
            hidden_dim: self.hidden_dim,
        }
    }

    /// `lambda_s` in effect during `epoch` (1-based).
    pub fn lambda_s_at(&self, epoch: usize) -> f64 {
        if epoch <= self.warmup_epochs {
            0.0
        } else {
            self.lambda_s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.sampler = Sampler::Khop;
        cfg.lr = 3.5e-4;
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn aliases_and_comments() {
        let cfg = TrainConfig::parse("# note\n\nsegmenter.tau_n = 0.5\ncontrastive.normalize=subgraphs\nK = 5\n").unwrap();
        assert_eq!(cfg.tau_n, 0.5);
        assert_eq!(cfg.normalize, Normalize::Subgraphs);
        assert_eq!(cfg.num_motifs, 5);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(TrainConfig::parse("lambda_m = 0\nlambda_s = 0\nlambda_c = 0").is_err());
        assert!(TrainConfig::parse("tau_g = 0").is_err());
        assert!(TrainConfig::parse("unknown = 1").is_err());
        assert!(TrainConfig::parse("epochs").is_err());
        assert!(TrainConfig::parse("top_fraction = 1.5").is_err());
        assert!(TrainConfig::parse("sampler = bfs").is_err());
    }

    #[test]
    fn warmup_zeroes_segmenter_weight() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lambda_s_at(1), 0.0);
        assert_eq!(cfg.lambda_s_at(2), 0.0);
        assert_eq!(cfg.lambda_s_at(3), 0.1);
    }
}
