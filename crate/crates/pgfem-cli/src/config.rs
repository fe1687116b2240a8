//! Flat `key = value` experiment configuration with one section per
//! concern. Unknown sections or keys are rejected with the offending name.

use pgfem::pg::{PairKind, StopIterate, StopMetric};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("line {0}: expected `key = value`")]
    Malformed(usize),
    #[error("invalid value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Conforming,
    Fospg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Builtin,
    File(String),
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub method: Method,
    pub pair: PairKind,
    pub p: usize,
    pub q: usize,
    pub levels: usize,
    pub alpha0: f64,
    pub growth: f64,
    pub stop_tol: f64,
    pub stop_metric: StopMetric,
    pub stop_iterate: StopIterate,
    pub max_prox_iters: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub mesh_source: MeshSource,
    pub output_dir: String,
    // problem-specific knobs
    pub phi: Option<f64>,
    pub mesh_level: usize,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub time_steps: usize,
    pub eps: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: String::new(),
            method: Method::Fospg,
            pair: PairKind::P1BubbleP0,
            p: 1,
            q: 0,
            levels: 1,
            alpha0: 1.0,
            growth: 2.0,
            stop_tol: 1e-10,
            stop_metric: StopMetric::L2,
            stop_iterate: StopIterate::Raw,
            max_prox_iters: 80,
            newton_tol: 1e-10,
            max_newton_iters: 50,
            mesh_source: MeshSource::Builtin,
            output_dir: "out".to_string(),
            phi: None,
            mesh_level: 0,
            nx: None,
            ny: None,
            time_steps: 64,
            eps: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut have_problem = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].to_string();
                match section.as_str() {
                    "run" | "alpha" | "stop" | "mesh" | "output" | "problem" => {}
                    other => return Err(ConfigError::UnknownSection(other.to_string())),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Malformed(ln + 1))?;
            let full = format!("{section}.{key}");
            let bad = |value: &str| ConfigError::BadValue { key: full.clone(), value: value.to_string() };
            match full.as_str() {
                "run.problem" => {
                    cfg.problem = value.to_string();
                    have_problem = true;
                }
                "run.method" => {
                    cfg.method = match value {
                        "conforming" => Method::Conforming,
                        "fospg" => Method::Fospg,
                        _ => return Err(bad(value)),
                    }
                }
                "run.pair" => {
                    cfg.pair = match value {
                        "p1bubble_p0" => PairKind::P1BubbleP0,
                        "p1_p1" => PairKind::P1P1,
                        _ => return Err(bad(value)),
                    }
                }
                "run.p" => cfg.p = value.parse().map_err(|_| bad(value))?,
                "run.q" => cfg.q = value.parse().map_err(|_| bad(value))?,
                "run.levels" => cfg.levels = value.parse().map_err(|_| bad(value))?,
                "alpha.alpha0" => cfg.alpha0 = value.parse().map_err(|_| bad(value))?,
                "alpha.growth" => cfg.growth = value.parse().map_err(|_| bad(value))?,
                "stop.tol" => cfg.stop_tol = value.parse().map_err(|_| bad(value))?,
                "stop.metric" => {
                    cfg.stop_metric = match value {
                        "l2" => StopMetric::L2,
                        "h1" => StopMetric::H1Semi,
                        _ => return Err(bad(value)),
                    }
                }
                "stop.iterate" => {
                    cfg.stop_iterate = match value {
                        "raw" => StopIterate::Raw,
                        "averaged" => StopIterate::Averaged,
                        _ => return Err(bad(value)),
                    }
                }
                "stop.max_prox_iters" => cfg.max_prox_iters = value.parse().map_err(|_| bad(value))?,
                "stop.newton_tol" => cfg.newton_tol = value.parse().map_err(|_| bad(value))?,
                "stop.max_newton_iters" => {
                    cfg.max_newton_iters = value.parse().map_err(|_| bad(value))?
                }
                "mesh.source" => {
                    cfg.mesh_source = match value {
                        "builtin" => MeshSource::Builtin,
                        _ => return Err(bad(value)),
                    }
                }
                "mesh.file" => cfg.mesh_source = MeshSource::File(value.to_string()),
                "mesh.level" => cfg.mesh_level = value.parse().map_err(|_| bad(value))?,
                "mesh.nx" => cfg.nx = Some(value.parse().map_err(|_| bad(value))?),
                "mesh.ny" => cfg.ny = Some(value.parse().map_err(|_| bad(value))?),
                "output.dir" => cfg.output_dir = value.to_string(),
                "problem.phi" => cfg.phi = Some(value.parse().map_err(|_| bad(value))?),
                "problem.time_steps" => cfg.time_steps = value.parse().map_err(|_| bad(value))?,
                "problem.eps" => cfg.eps = Some(value.parse().map_err(|_| bad(value))?),
                _ => return Err(ConfigError::UnknownKey(full)),
            }
        }
        if !have_problem {
            return Err(ConfigError::Missing("run.problem"));
        }
        Ok(cfg)
    }

    /// Serializes so that `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "problem = {}", self.problem);
        let _ = writeln!(
            s,
            "method = {}",
            match self.method {
                Method::Conforming => "conforming",
                Method::Fospg => "fospg",
            }
        );
        let _ = writeln!(
            s,
            "pair = {}",
            match self.pair {
                PairKind::P1BubbleP0 => "p1bubble_p0",
                PairKind::P1P1 => "p1_p1",
            }
        );
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "[alpha]");
        let _ = writeln!(s, "alpha0 = {}", self.alpha0);
        let _ = writeln!(s, "growth = {}", self.growth);
        let _ = writeln!(s, "[stop]");
        let _ = writeln!(s, "tol = {:e}", self.stop_tol);
        let _ = writeln!(
            s,
            "metric = {}",
            match self.stop_metric {
                StopMetric::L2 => "l2",
                StopMetric::H1Semi => "h1",
            }
        );
        let _ = writeln!(
            s,
            "iterate = {}",
            match self.stop_iterate {
                StopIterate::Raw => "raw",
                StopIterate::Averaged => "averaged",
            }
        );
        let _ = writeln!(s, "max_prox_iters = {}", self.max_prox_iters);
        let _ = writeln!(s, "newton_tol = {:e}", self.newton_tol);
        let _ = writeln!(s, "max_newton_iters = {}", self.max_newton_iters);
        let _ = writeln!(s, "[mesh]");
        match &self.mesh_source {
            MeshSource::Builtin => {
                let _ = writeln!(s, "source = builtin");
            }
            MeshSource::File(f) => {
                let _ = writeln!(s, "file = {f}");
            }
        }
        let _ = writeln!(s, "level = {}", self.mesh_level);
        if let Some(nx) = self.nx {
            let _ = writeln!(s, "nx = {nx}");
        }
        if let Some(ny) = self.ny {
            let _ = writeln!(s, "ny = {ny}");
        }
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "dir = {}", self.output_dir);
        let _ = writeln!(s, "[problem]");
        if let Some(phi) = self.phi {
            let _ = writeln!(s, "phi = {phi}");
        }
        let _ = writeln!(s, "time_steps = {}", self.time_steps);
        if let Some(eps) = self.eps {
            let _ = writeln!(s, "eps = {eps}");
        }
        s
    }
}
