//! Flat `key = value` run description.
//!
//! `dt` is the snapshot and reduced step; the reference solver splits it
//! into the fewest substeps its stability bounds allow.

use std::collections::BTreeMap;
use std::path::Path;

use crate::adaptive::AdaptiveConfig;
use crate::error::{Error, Result};
use crate::fd::{FdConfig, Scheme};
use crate::flow::FlowSpec;
use crate::grid::{GridSpec, InnerProductKind};
use crate::model::{Equation, FrontParams};
use crate::rom::RomConfig;

pub const REQUIRED_KEYS: [&str; 14] = [
    "equation",
    "scheme",
    "d",
    "s_l",
    "p_x",
    "p_y",
    "flow",
    "A",
    "theta",
    "n_cells",
    "dt",
    "t_final",
    "e_pod",
    "inner_product",
];

pub const OPTIONAL_KEYS: [&str; 4] = [
    "record_stride",
    "adaptive.check_period",
    "adaptive.burst_len",
    "adaptive.eps",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveBlock {
    pub check_period: f64,
    pub burst_len: usize,
    pub eps: f64,
}

impl Default for AdaptiveBlock {
    fn default() -> Self {
        Self {
            check_period: 0.5,
            burst_len: 50,
            eps: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub equation: Equation,
    pub scheme: Scheme,
    pub params: FrontParams,
    pub flow: FlowSpec,
    pub n_cells: usize,
    pub dt: f64,
    pub t_final: f64,
    pub e_pod: f64,
    pub inner_product: InnerProductKind,
    pub record_stride: usize,
    pub adaptive: AdaptiveBlock,
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse {raw:?}")))
}

impl std::str::FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !REQUIRED_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        if let Some(k) = REQUIRED_KEYS.iter().find(|k| !map.contains_key(**k)) {
            return Err(Error::Config(format!("missing required key `{k}`")));
        }
        let get = |k: &str| map[k].as_str();
        let num = |k: &str| parse_value::<f64>(k, get(k));

        let equation: Equation = get("equation").parse()?;
        let scheme: Scheme = get("scheme").parse()?;
        let params = FrontParams::new(num("d")?, num("s_l")?, [num("p_x")?, num("p_y")?])
            .map_err(|e| Error::Config(e.to_string()))?;
        let (amplitude, theta) = (num("A")?, num("theta")?);
        let flow = match get("flow") {
            "steady" => FlowSpec::steady(amplitude),
            "time_periodic" => FlowSpec::time_periodic(amplitude, theta),
            other => return Err(Error::Config(format!("key `flow`: expected steady or time_periodic, got {other:?}"))),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        let n_cells = parse_value::<usize>("n_cells", get("n_cells"))?;
        GridSpec::new(n_cells).map_err(|e| Error::Config(e.to_string()))?;
        let dt = num("dt")?;
        let t_final = num("t_final")?;
        if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config("dt and t_final must be positive".into()));
        }
        let e_pod = num("e_pod")?;
        if !(0.0..1.0).contains(&e_pod) {
            return Err(Error::Config(format!("key `e_pod`: {e_pod} not in [0, 1)")));
        }
        let inner_product = get("inner_product")
            .parse::<InnerProductKind>()
            .map_err(|_| Error::Config(format!("key `inner_product`: expected h1 or l2, got {:?}", get("inner_product"))))?;
        let record_stride = match map.get("record_stride") {
            Some(v) => parse_value::<usize>("record_stride", v)?,
            None => 1,
        };
        if record_stride == 0 {
            return Err(Error::Config("key `record_stride` must be positive".into()));
        }
        let mut adaptive = AdaptiveBlock::default();
        if let Some(v) = map.get("adaptive.check_period") {
            adaptive.check_period = parse_value("adaptive.check_period", v)?;
        }
        if let Some(v) = map.get("adaptive.burst_len") {
            adaptive.burst_len = parse_value("adaptive.burst_len", v)?;
        }
        if let Some(v) = map.get("adaptive.eps") {
            adaptive.eps = parse_value("adaptive.eps", v)?;
        }
        Ok(RunConfig {
            equation,
            scheme,
            params,
            flow,
            n_cells,
            dt,
            t_final,
            e_pod,
            inner_product,
            record_stride,
            adaptive,
        })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.n_cells).expect("validated on parse")
    }

    /// Reference solver configuration with the step already split to satisfy
    /// the stability bounds.
    pub fn fd_config(&self) -> FdConfig {
        let base = FdConfig {
            params: self.params,
            dt: self.dt,
            scheme: self.scheme,
            equation: self.equation,
            flow: self.flow,
            grid: self.grid(),
        };
        let k = self.fd_substeps();
        FdConfig {
            dt: self.dt / k as f64,
            ..base
        }
    }

    /// Reference steps per `dt`.
    pub fn fd_substeps(&self) -> usize {
        FdConfig {
            params: self.params,
            dt: self.dt,
            scheme: self.scheme,
            equation: self.equation,
            flow: self.flow,
            grid: self.grid(),
        }
        .substeps_for(self.dt)
    }

    pub fn rom_config(&self) -> RomConfig {
        RomConfig {
            params: self.params,
            flow: self.flow,
            equation: self.equation,
            dt: self.dt,
        }
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            check_period: self.adaptive.check_period,
            burst_len: self.adaptive.burst_len,
            eps: self.adaptive.eps,
            fd: self.fd_config(),
            rom: self.rom_config(),
        }
    }
}
