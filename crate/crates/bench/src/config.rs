//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors so a
//! typo never silently falls back to a default. Floats are written in
//! shortest round-trip form, so `parse(to_text(c)) == c` for every config.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cavity_core::decomp::{choose_dims, validate_dims, DecompMode, Dims, GrowthType};
use cavity_core::halo::Strategy;
use cavity_core::run::{InitialState, RunSpec};
use cavity_core::solver::{FluidParams, SolverConfig};
use cavity_core::transport::TransportOptions;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error(transparent)]
    Decomp(#[from] cavity_core::decomp::DecompError),
}

/// Global interior size, `N` or `NXxNYxNZ` in text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize(pub [usize; 3]);

impl GridSize {
    pub fn nodes(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).product()
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        if a == b && b == c {
            write!(f, "{a}")
        } else {
            write!(f, "{a}x{b}x{c}")
        }
    }
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split(['x', 'X'])
            .map(|p| p.trim().parse::<usize>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        match *parts.as_slice() {
            [n] => Ok(GridSize([n; 3])),
            [a, b, c] => Ok(GridSize([a, b, c])),
            _ => Err(format!("expected N or NXxNYxNZ, got {s:?}")),
        }
    }
}

/// Everything a single solve needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSize,
    /// Rank count; taken from `dims` when absent.
    pub np: Option<usize>,
    pub mode: DecompMode,
    pub dims: Option<Dims>,
    pub strategy: Strategy,
    pub overlap: bool,
    pub growth: GrowthType,
    pub rayleigh: f64,
    pub u_ref: f64,
    pub dissipation: f64,
    pub t_hot: f64,
    pub t_cold: f64,
    pub cfl: f64,
    pub steps: usize,
    pub conv_tol: f64,
    pub rescale_pressure: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = FluidParams::<f64>::cavity();
        let s = SolverConfig::default();
        RunConfig {
            grid: GridSize([32; 3]),
            np: None,
            mode: DecompMode::ThreeD,
            dims: None,
            strategy: Strategy::V3,
            overlap: false,
            growth: GrowthType::FollowDims,
            rayleigh: FluidParams::<f64>::RAYLEIGH,
            u_ref: p.u_ref,
            dissipation: p.dissipation,
            t_hot: p.t_hot,
            t_cold: p.t_cold,
            cfl: s.cfl,
            steps: s.max_steps,
            conv_tol: s.conv_tol,
            rescale_pressure: s.rescale_pressure,
            seed: None,
            out: None,
        }
    }
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.to_owned(), value: value.to_owned(), reason: reason.to_string() }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn optional(value: &str) -> Option<&str> {
    (value != "none" && !value.is_empty()).then_some(value)
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key.trim() {
            "grid" => self.grid = parse(key, v)?,
            "np" => self.np = optional(v).map(|s| parse(key, s)).transpose()?,
            "mode" => self.mode = parse(key, v)?,
            "dims" => self.dims = optional(v).map(|s| parse(key, s)).transpose()?,
            "strategy" => self.strategy = parse(key, v)?,
            "overlap" => self.overlap = parse_bool(key, v)?,
            "growth" => {
                let n: u8 = parse(key, v)?;
                self.growth = GrowthType::from_number(n).ok_or_else(|| bad(key, v, "expected 1 or 2"))?;
            }
            "rayleigh" => self.rayleigh = parse(key, v)?,
            "u_ref" => self.u_ref = parse(key, v)?,
            "dissipation" => self.dissipation = parse(key, v)?,
            "t_hot" => self.t_hot = parse(key, v)?,
            "t_cold" => self.t_cold = parse(key, v)?,
            "cfl" => self.cfl = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "conv_tol" => self.conv_tol = parse(key, v)?,
            "rescale_pressure" => self.rescale_pressure = parse_bool(key, v)?,
            "seed" => self.seed = optional(v).map(|s| parse(key, s)).transpose()?,
            "out" => self.out = optional(v).map(PathBuf::from),
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    /// Overlays the settings of a config file onto `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: n + 1, text: raw.to_owned() })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".to_owned());
        [
            ("grid", self.grid.to_string()),
            ("np", opt(self.np.map(|n| n.to_string()))),
            ("mode", self.mode.to_string()),
            ("dims", opt(self.dims.map(|d| d.to_string()))),
            ("strategy", self.strategy.to_string()),
            ("overlap", self.overlap.to_string()),
            ("growth", self.growth.number().to_string()),
            ("rayleigh", format!("{:?}", self.rayleigh)),
            ("u_ref", format!("{:?}", self.u_ref)),
            ("dissipation", format!("{:?}", self.dissipation)),
            ("t_hot", format!("{:?}", self.t_hot)),
            ("t_cold", format!("{:?}", self.t_cold)),
            ("cfl", format!("{:?}", self.cfl)),
            ("steps", self.steps.to_string()),
            ("conv_tol", format!("{:?}", self.conv_tol)),
            ("rescale_pressure", self.rescale_pressure.to_string()),
            ("seed", opt(self.seed.map(|s| s.to_string()))),
            ("out", opt(self.out.as_ref().map(|p| p.display().to_string()))),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }

    /// The process grid this config runs on.
    pub fn resolve_dims(&self) -> Result<Dims, ConfigError> {
        match (self.dims, self.np) {
            (Some(d), np) => Ok(validate_dims(d, np.unwrap_or(d.ranks()), self.mode)?),
            (None, np) => Ok(choose_dims(np.unwrap_or(1), self.mode)?),
        }
    }

    pub fn fluid_params(&self) -> FluidParams<f64> {
        let mut p = FluidParams::with_rayleigh(self.rayleigh);
        p.u_ref = self.u_ref;
        p.dissipation = self.dissipation;
        p.t_hot = self.t_hot;
        p.t_cold = self.t_cold;
        p
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.cfl,
            max_steps: self.steps,
            conv_tol: self.conv_tol,
            rescale_pressure: self.rescale_pressure,
        }
    }

    pub fn to_spec(&self) -> Result<RunSpec<f64>, ConfigError> {
        Ok(RunSpec {
            n: self.grid.0,
            dims: self.resolve_dims()?,
            strategy: self.strategy,
            overlap: self.overlap,
            params: self.fluid_params(),
            config: self.solver_config(),
            transport: TransportOptions { randomize: self.seed, ..TransportOptions::default() },
            initial: InitialState::Rest,
            warmup: true,
            progress: None,
            fault: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_overrides() {
        let c = RunConfig::parse_text("# sweep point\ngrid = 16x16x32\n\nnp = 4 # ranks\nmode = 2d\n").unwrap();
        assert_eq!(c.grid, GridSize([16, 16, 32]));
        assert_eq!(c.resolve_dims().unwrap(), Dims([1, 2, 2]));
    }

    #[test]
    fn errors_name_the_problem() {
        assert_eq!(RunConfig::parse_text("gird = 3"), Err(ConfigError::UnknownKey("gird".into())));
        assert!(matches!(RunConfig::parse_text("grid 3"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse_text("growth = 3"), Err(ConfigError::BadValue { .. })));
        let c = RunConfig::parse_text("np = 4\ndims = 2x1x1").unwrap();
        assert!(c.resolve_dims().is_err());
    }
}
