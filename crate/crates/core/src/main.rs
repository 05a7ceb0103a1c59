use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rkns::bench::studies::{
    convergence_space, convergence_table, convergence_time, efficiency_study, ghia_compare_file, reference_config,
    reynolds_study, stability_max_dt, stability_min_s, Table,
};
use rkns::bench::{run_simulation, RunConfig, StepPolicy};
use rkns::grid::GridSpec;
use rkns::integrators::Rock2Table;
use rkns::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rkns", version, about = "Stabilized explicit Runge-Kutta solvers for 2D incompressible Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write summary.txt plus field dumps.
    Run(RunArgs),
    /// Temporal or spatial convergence study.
    Convergence(ConvergenceArgs),
    /// Stability sweep.
    Stability(StabilityArgs),
    /// Work-precision data over tolerances.
    Efficiency(EfficiencyArgs),
    /// Adaptive runs over Reynolds numbers.
    Reynolds(ReynoldsArgs),
    /// Cavity run compared with reference centerline profiles.
    Ghia(GhiaArgs),
}

/// Flags shared by every subcommand; they override `--config` entries.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rock2_table: Option<PathBuf>,
    #[arg(long, value_parser = ["forced", "taylor", "cavity"])]
    problem: Option<String>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    /// Fixed step, or the initial step when adaptive.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    adaptive: bool,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_parser = ["rkc", "rock2", "pirock", "rk4"])]
    integrator: Option<String>,
    #[arg(long, value_parser = ["pm1", "pm1v", "pm3", "dae"])]
    coupling: Option<String>,
    #[arg(long, value_parser = ["p1", "p2", "ap1", "ap2", "ap2w"])]
    pressure: Option<String>,
    #[arg(long, value_parser = ["0", "1"])]
    cp: Option<String>,
    #[arg(long)]
    stages: Option<usize>,
    /// Drop the advection term.
    #[arg(long)]
    no_advection: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    /// Config file first, then flags; also installs a custom ROCK2 table.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut table = self.rock2_table.clone();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            for (k, v) in cfg.apply_file_text(&text)? {
                if k == "rock2-table" && table.is_none() {
                    table = Some(PathBuf::from(v));
                }
            }
        }
        if let Some(path) = table {
            Rock2Table::install(Rock2Table::from_file(&path)?)?;
        }
        let mut set = |k: &str, v: Option<String>| v.map(|v| cfg.set(k, &v)).transpose();
        set("problem", self.problem.clone())?;
        set("re", self.re.map(|x| x.to_string()))?;
        set("nx", self.nx.map(|x| x.to_string()))?;
        set("dt", self.dt.map(|x| x.to_string()))?;
        if self.adaptive {
            cfg.set("adaptive", "1")?;
        }
        let mut set = |k: &str, v: Option<String>| v.map(|v| cfg.set(k, &v)).transpose();
        set("atol", self.atol.map(|x| x.to_string()))?;
        set("rtol", self.rtol.map(|x| x.to_string()))?;
        set("t-end", self.t_end.map(|x| x.to_string()))?;
        set("integrator", self.integrator.clone())?;
        set("coupling", self.coupling.clone())?;
        set("pressure", self.pressure.clone())?;
        set("cp", self.cp.clone())?;
        set("stages", self.stages.map(|x| x.to_string()))?;
        if self.no_advection {
            cfg.advection = false;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Axis {
    Time,
    Space,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "time")]
    axis: Axis,
    /// Exponents m of the steps 2^-m (time axis).
    #[arg(long, value_delimiter = ',', default_value = "4,5,6,7,8,9,10")]
    levels: Vec<i32>,
    /// Exponent of the reference step (time axis).
    #[arg(long, default_value_t = 12)]
    reference_level: i32,
    /// Grids (space axis).
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    grids: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    reference_grid: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StabilityMode {
    MaxDtGivenS,
    MinSGivenDt,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "max-dt-given-s")]
    mode: StabilityMode,
    #[arg(long = "stage-list", value_delimiter = ',', default_value = "5,10,20")]
    stage_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    res: Vec<f64>,
    /// Relative width of the bisection bracket.
    #[arg(long, default_value_t = 0.01)]
    rel: f64,
    #[arg(long, default_value_t = 200)]
    max_stages: usize,
}

#[derive(Args, Debug)]
struct EfficiencyArgs {
    #[command(flatten)]
    common: Common,
    /// Methods as integrator-coupling-pressure-cpX names.
    #[arg(long, value_delimiter = ',', default_value = "rock2-dae-ap1-cp0,rock2-pm1-p2-cp0,rkc-pm1-p2-cp0")]
    methods: Vec<String>,
    /// Exponents k of the tolerances 10^-k.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8")]
    tolerances: Vec<i32>,
    /// Step of the compensated RK4 reference.
    #[arg(long, default_value_t = 1e-4)]
    reference_dt: f64,
}

#[derive(Args, Debug)]
struct ReynoldsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    res: Vec<f64>,
}

#[derive(Args, Debug)]
struct GhiaArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with rows `profile,coord,value` (profile u or v).
    #[arg(long)]
    reference: PathBuf,
}

fn apply_method(cfg: &RunConfig, name: &str) -> Result<RunConfig> {
    let parts: Vec<&str> = name.split('-').collect();
    if parts.len() != 4 || !parts[3].starts_with("cp") {
        return Err(Error::Config(format!("method '{name}' is not integrator-coupling-pressure-cpX")));
    }
    let mut c = cfg.clone();
    c.set("integrator", parts[0])?;
    c.set("coupling", parts[1])?;
    c.set("pressure", parts[2])?;
    c.set("cp", &parts[3][2..])?;
    Ok(c)
}

fn emit(table: &Table, out: Option<&Path>, name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            table.write(&path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let cfg = a.common.resolve()?;
            let rep = run_simulation(&cfg)?;
            print!("{}", rep.summary());
        }
        Command::Convergence(a) => {
            let mut cfg = a.common.resolve()?;
            let out = cfg.out.take();
            let rows = match a.axis {
                Axis::Time => {
                    let dts: Vec<f64> = a.levels.iter().map(|&m| 2f64.powi(-m)).collect();
                    convergence_time(&cfg, &dts, 2f64.powi(-a.reference_level))?
                }
                Axis::Space => convergence_space(&cfg, &a.grids, a.reference_grid)?,
            };
            let name = match a.axis {
                Axis::Time => "convergence_time.csv",
                Axis::Space => "convergence_space.csv",
            };
            emit(&convergence_table(&rows), out.as_deref(), name)?;
        }
        Command::Stability(a) => {
            let mut cfg = a.common.resolve()?;
            let out = cfg.out.take();
            match a.mode {
                StabilityMode::MaxDtGivenS => {
                    emit(&stability_max_dt(&cfg, &a.stage_list, a.rel)?, out.as_deref(), "stability_max_dt.csv")?
                }
                StabilityMode::MinSGivenDt => {
                    let dt = match cfg.step {
                        StepPolicy::Fixed { dt } => dt,
                        StepPolicy::Adaptive { dt0, .. } => dt0,
                    };
                    emit(&stability_min_s(&cfg, dt, &a.res, a.max_stages)?, out.as_deref(), "stability_min_s.csv")?
                }
            }
        }
        Command::Efficiency(a) => {
            let mut cfg = a.common.resolve()?;
            let out = cfg.out.take();
            let reference = run_simulation(&reference_config(&cfg, a.reference_dt))?;
            let methods = a.methods.iter().map(|m| apply_method(&cfg, m)).collect::<Result<Vec<_>>>()?;
            let tols: Vec<f64> = a.tolerances.iter().map(|&k| 10f64.powi(-k)).collect();
            emit(&efficiency_study(&methods, &tols, &reference)?, out.as_deref(), "efficiency.csv")?;
        }
        Command::Reynolds(a) => {
            let mut cfg = a.common.resolve()?;
            let out = cfg.out.take();
            emit(&reynolds_study(&cfg, &a.res)?, out.as_deref(), "reynolds.csv")?;
        }
        Command::Ghia(a) => {
            let mut cfg = a.common.resolve()?;
            if a.common.problem.is_none() {
                cfg.set("problem", "cavity")?;
            }
            let rep = run_simulation(&cfg)?;
            print!("{}", rep.summary());
            let spec = GridSpec::new(cfg.n, cfg.re)?;
            if let Some(d) = ghia_compare_file(&spec, &rep.velocity, &a.reference)? {
                println!("u_rms={}\nu_max={}\nv_rms={}\nv_max={}", d.u_rms, d.u_max, d.v_rms, d.v_max);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
