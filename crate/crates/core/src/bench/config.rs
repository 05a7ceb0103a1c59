//! Run configuration: method naming, validation and `key = value` files.

use std::path::PathBuf;
use std::str::FromStr;

use super::problems::ProblemKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntegratorKind {
    Rkc,
    Rock2,
    Pirock,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CouplingKind {
    Pm1,
    Pm1v,
    Pm3,
    Dae,
}

/// How the reported pressure is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PressureKind {
    /// First-order pressure carried by the step.
    P1,
    /// Extra projection of the acceleration.
    P2,
    Ap1,
    Ap2,
    Ap2w,
}

macro_rules! named {
    ($t:ty, $what:literal, $($v:ident => $s:literal),+) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$v),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
    };
}

named!(IntegratorKind, "integrator", Rkc => "rkc", Rock2 => "rock2", Pirock => "pirock", Rk4 => "rk4");
named!(CouplingKind, "coupling", Pm1 => "pm1", Pm1v => "pm1v", Pm3 => "pm3", Dae => "dae");
named!(PressureKind, "pressure", P1 => "p1", P2 => "p2", Ap1 => "ap1", Ap2 => "ap2", Ap2w => "ap2w");

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Fixed { dt: f64 },
    Adaptive { atol: f64, rtol: f64, dt0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub re: f64,
    pub n: usize,
    pub step: StepPolicy,
    pub t0: f64,
    pub t_end: f64,
    pub integrator: IntegratorKind,
    pub coupling: CouplingKind,
    pub pressure: PressureKind,
    /// Second-order pressure every step (`true`) or only at the end.
    pub cp: bool,
    /// Fixed stage count overriding the automatic choice.
    pub stages: Option<usize>,
    pub advection: bool,
    /// Kahan-compensated accumulation (RK4 reference runs).
    pub compensated: bool,
    /// Stop as soon as the velocity norm exceeds this multiple of its initial scale.
    pub abort_factor: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Forced,
            re: 100.0,
            n: 64,
            step: StepPolicy::Fixed { dt: 1e-3 },
            t0: 0.0,
            t_end: 1.0,
            integrator: IntegratorKind::Rock2,
            coupling: CouplingKind::Dae,
            pressure: PressureKind::Ap1,
            cp: false,
            stages: None,
            advection: true,
            compensated: false,
            abort_factor: None,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value for {key}: '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value for {key}: '{v}'"))),
    }
}

impl RunConfig {
    /// Full method name, e.g. `rock2-dae-ap1-cp0`.
    pub fn method_name(&self) -> String {
        format!("{}-{}-{}-cp{}", self.integrator.name(), self.coupling.name(), self.pressure.name(), self.cp as u8)
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.step, StepPolicy::Adaptive { .. })
    }

    /// Rejects illegal combinations and out-of-range values.
    pub fn validate(&self) -> Result<()> {
        use CouplingKind::*;
        use IntegratorKind::*;
        use PressureKind::*;
        if self.n < 4 {
            return Err(Error::Config(format!("grid needs N >= 4, got {}", self.n)));
        }
        if !(self.re > 0.0 && self.re.is_finite()) {
            return Err(Error::Config(format!("Reynolds number must be positive, got {}", self.re)));
        }
        if !(self.t_end >= self.t0) {
            return Err(Error::Config(format!("t_end {} before t0 {}", self.t_end, self.t0)));
        }
        match self.step {
            StepPolicy::Fixed { dt } if !(dt > 0.0) => return Err(Error::Config(format!("dt must be positive, got {dt}"))),
            StepPolicy::Adaptive { atol, rtol, dt0 } if !(atol > 0.0 && rtol > 0.0 && dt0 > 0.0) => {
                return Err(Error::Config("adaptive stepping needs positive atol, rtol and initial dt".into()))
            }
            _ => {}
        }
        let adaptive = self.is_adaptive();
        if self.integrator == Rkc && adaptive && self.coupling != Pm1 {
            return Err(Error::Config(format!(
                "rkc with adaptive steps needs the pm1 coupling (error estimate invalid with {})",
                self.coupling.name()
            )));
        }
        if self.integrator == Pirock && (self.coupling != Pm1 || adaptive) {
            return Err(Error::Config("pirock supports only pm1 with a fixed step".into()));
        }
        if self.integrator == Rk4 && adaptive {
            return Err(Error::Config("rk4 has no error estimate; use a fixed step".into()));
        }
        if matches!(self.pressure, Ap1 | Ap2 | Ap2w) && self.coupling != Dae {
            return Err(Error::Config(format!("{} pressure needs the dae coupling", self.pressure.name())));
        }
        if self.pressure == Ap2 && self.integrator != Rkc {
            return Err(Error::Config("ap2 needs order-two stages (rkc only); use ap2w with rock2".into()));
        }
        if self.pressure == Ap2w && self.integrator != Rock2 {
            return Err(Error::Config("ap2w is the rock2 reconstruction; use ap2 with rkc".into()));
        }
        if self.compensated && self.integrator != Rk4 {
            return Err(Error::Config("compensated summation is available for rk4 only".into()));
        }
        if self.compensated && self.coupling != Dae {
            return Err(Error::Config("compensated rk4 runs use the dae coupling".into()));
        }
        if self.coupling == Pm3 && self.problem == ProblemKind::Cavity {
            return Err(Error::Config("pm3 needs exact boundary derivatives, which the cavity lacks".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` entry (keys as the CLI flags without dashes).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "problem" => self.problem = v.parse()?,
            "re" => self.re = parse_num(key, v)?,
            "nx" | "n" => self.n = parse_num(key, v)?,
            "dt" => {
                let dt = parse_num(key, v)?;
                self.step = match self.step {
                    StepPolicy::Fixed { .. } => StepPolicy::Fixed { dt },
                    StepPolicy::Adaptive { atol, rtol, .. } => StepPolicy::Adaptive { atol, rtol, dt0: dt },
                };
            }
            "adaptive" => {
                let on = parse_bool(key, v)?;
                self.step = match (on, self.step) {
                    (true, StepPolicy::Fixed { dt }) => StepPolicy::Adaptive { atol: 1e-3, rtol: 1e-3, dt0: dt },
                    (false, StepPolicy::Adaptive { dt0, .. }) => StepPolicy::Fixed { dt: dt0 },
                    (_, s) => s,
                };
            }
            "atol" | "rtol" => {
                let x: f64 = parse_num(key, v)?;
                if let StepPolicy::Adaptive { atol, rtol, dt0 } = self.step {
                    self.step = if key.trim() == "atol" {
                        StepPolicy::Adaptive { atol: x, rtol, dt0 }
                    } else {
                        StepPolicy::Adaptive { atol, rtol: x, dt0 }
                    };
                } else {
                    let dt0 = match self.step {
                        StepPolicy::Fixed { dt } => dt,
                        _ => unreachable!(),
                    };
                    self.step = StepPolicy::Adaptive { atol: x, rtol: x, dt0 };
                }
            }
            "t-end" | "t_end" => self.t_end = parse_num(key, v)?,
            "t0" => self.t0 = parse_num(key, v)?,
            "integrator" => self.integrator = v.parse()?,
            "coupling" => self.coupling = v.parse()?,
            "pressure" => self.pressure = v.parse()?,
            "cp" => self.cp = parse_bool(key, v)?,
            "stages" => self.stages = Some(parse_num(key, v)?),
            "advection" => self.advection = parse_bool(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` comments.
    pub fn apply_file_text(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut extra = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let k = k.trim();
            // keys not owned by a single run are handed back to the caller
            if k == "rock2-table" {
                extra.push((k.to_string(), v.trim().to_string()));
                continue;
            }
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(extra)
    }
}
