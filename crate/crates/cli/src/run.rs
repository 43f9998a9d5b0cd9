//! Command dispatch.

use std::fmt::Write as _;

use distorted_lattice::checks::run_all;
use distorted_lattice::closedform::{gbm_call, gbm_upin_digital_reflection, GbmSpec};
use distorted_lattice::coupling::{couple_subordinators, marginal_check, Component};
use distorted_lattice::lattice::{choose_a, GridSpec};
use distorted_lattice::levy::LevyModel;
use distorted_lattice::valuation::{
    convergence_sweep, distorted_value, Payoff, Reference, ValuationOptions,
};
use distorted_lattice::Error;

use crate::config::{Command, ModelConfig, ReferenceConfig, RunConfig};

pub const PRICE_HEADER: &str = "n,delta,h,a,value,truncated_mass,runtime_ms";
pub const CONVERGE_HEADER: &str = "n,delta,h,a,value,reference,gap,truncated_mass,runtime_ms";
pub const COUPLE_HEADER: &str =
    "component,paths,domination_rate,mean,mean_target,mean_z,variance,variance_target,variance_z,passed";
pub const CHECK_HEADER: &str = "module,property,passed";

/// A failed run with its exit status.
#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Infeasible(String),
    Numerical(String),
    ChecksFailed(usize),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Numerical(_) => 4,
            Self::ChecksFailed(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Schema(m) => write!(f, "configuration error: {m}"),
            Self::Infeasible(m) => write!(f, "infeasible model: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::ChecksFailed(n) => write!(f, "{n} properties failed"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { condition, detail } => {
                Self::Infeasible(format!("{condition} violated ({detail})"))
            }
            Error::NonConvergence(_) | Error::TooLarge(_) | Error::Numerical(_) => {
                Self::Numerical(e.to_string())
            }
            other => Self::Schema(other.to_string()),
        }
    }
}

/// What a run produced: CSV text and a console summary.
#[derive(Debug, Default)]
pub struct Report {
    pub csv: String,
    pub console: String,
}

pub struct RunFlags {
    pub seed: Option<u64>,
    pub timing: bool,
}

fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    field
        .as_ref()
        .ok_or_else(|| Failure::Schema(format!("missing field `{name}`")))
}

fn options(cfg: &RunConfig) -> ValuationOptions {
    let mut o = ValuationOptions::default();
    if let Some(opt) = &cfg.options {
        o.width_sd = opt.width_sd;
        o.state_bound = opt.state_bound;
    }
    o
}

fn grid_for(cfg: &RunConfig, model: &LevyModel, n: usize) -> Result<GridSpec, Failure> {
    let g = require(&cfg.grid, "grid")?;
    Ok(match g.h {
        Some(h) => {
            let a = g.a_override.unwrap_or_else(|| choose_a(model, h));
            GridSpec::explicit(model, g.horizon, n, h, a, g.eps_trunc)?
        }
        None => GridSpec::build(model, g.horizon, n, g.eps_trunc, g.a_override)?,
    })
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn runtime(ms: f64, flags: &RunFlags) -> f64 {
    if flags.timing {
        ms
    } else {
        0.0
    }
}

fn price(cfg: &RunConfig, flags: &RunFlags) -> Result<Report, Failure> {
    let model = require(&cfg.model, "model")?.build()?;
    let choice = require(&cfg.distortion, "distortion")?.build()?;
    let payoff = require(&cfg.payoff, "payoff")?.build()?;
    let n = *require(&require(&cfg.grid, "grid")?.n_steps, "grid.n_steps")?;
    let grid = grid_for(cfg, &model, n)?;
    let r = distorted_value(&model, &choice, &payoff, &grid, &options(cfg))?;
    let csv = format!(
        "{PRICE_HEADER}\n{},{},{},{},{},{},{}\n",
        n,
        num(grid.delta),
        num(grid.h),
        grid.a,
        num(r.value),
        num(r.truncated_mass),
        num(runtime(r.runtime_ms, flags))
    );
    Ok(Report {
        console: format!(
            "value {} (n = {n}, h = {}, a = {})\n",
            r.value, grid.h, grid.a
        ),
        csv,
    })
}

fn closed_form(
    model: &ModelConfig,
    payoff: &Payoff,
    horizon: f64,
    shift: f64,
) -> Result<f64, Failure> {
    let (mu, sigma) = model
        .gbm_params()
        .ok_or_else(|| Failure::Schema("closed-form reference needs a gbm model".into()))?;
    let unsupported =
        || Failure::Schema("closed-form reference needs a call or up-and-in digital payoff".into());
    match payoff {
        Payoff::TerminalCall { s0, strike } => Ok(gbm_call(
            &GbmSpec::new(*s0, mu, sigma, horizon, shift)?,
            *strike,
        )?),
        Payoff::UpInDigital { s0, barrier } => Ok(gbm_upin_digital_reflection(
            &GbmSpec::new(*s0, mu, sigma, horizon, shift)?,
            *barrier,
        )),
        _ => Err(unsupported()),
    }
}

fn converge(cfg: &RunConfig, flags: &RunFlags) -> Result<Report, Failure> {
    let model_cfg = require(&cfg.model, "model")?;
    let model = model_cfg.build()?;
    let choice = require(&cfg.distortion, "distortion")?.build()?;
    let payoff = require(&cfg.payoff, "payoff")?.build()?;
    let grid = require(&cfg.grid, "grid")?;
    let n_list = require(&grid.n_list, "grid.n_list")?;
    if grid.h.is_some() {
        return Err(Failure::Schema(
            "grid.h cannot be combined with n_list".into(),
        ));
    }
    let reference = match cfg.reference.as_ref().unwrap_or(&ReferenceConfig::Finest) {
        ReferenceConfig::Value { value } => Reference::Value(*value),
        ReferenceConfig::ClosedForm { drift_shift } => {
            Reference::Value(closed_form(model_cfg, &payoff, grid.horizon, *drift_shift)?)
        }
        ReferenceConfig::Finest => Reference::Finest,
    };
    let rows = convergence_sweep(
        &model,
        &choice,
        &payoff,
        grid.horizon,
        n_list,
        grid.eps_trunc,
        reference,
        &options(cfg),
    )?;
    let mut csv = format!("{CONVERGE_HEADER}\n");
    let mut console = String::new();
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            num(r.delta),
            num(r.h),
            r.a,
            num(r.value),
            num(r.reference),
            num(r.gap),
            num(r.truncated_mass),
            num(runtime(r.runtime_ms, flags))
        );
        let _ = writeln!(
            console,
            "n = {:>6}  value {:.10}  gap {:.3e}",
            r.n, r.value, r.gap
        );
    }
    Ok(Report { csv, console })
}

fn check() -> Result<Report, Failure> {
    let outcomes = run_all();
    let mut csv = format!("{CHECK_HEADER}\n");
    let mut console = String::new();
    for o in &outcomes {
        let _ = writeln!(
            csv,
            "{},{},{}",
            o.module,
            o.property.replace(',', ";"),
            o.passed
        );
        let status = if o.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            console,
            "{status}  {}: {} ({})",
            o.module, o.property, o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        eprint!("{console}");
        return Err(Failure::ChecksFailed(failed));
    }
    Ok(Report { csv, console })
}

fn couple(cfg: &RunConfig, flags: &RunFlags) -> Result<Report, Failure> {
    let c = require(&cfg.coupling, "coupling")?;
    let first = c.first.build()?;
    let second = c.second.build()?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(0);
    let paths = couple_subordinators(&first, &second, c.horizon, c.n_paths, seed)?;
    let rate = paths.domination_rate();
    let mut csv = format!("{COUPLE_HEADER}\n");
    let mut console = format!(
        "paths {}, clock rate {}, domination {}\n",
        paths.len(),
        paths.clock_rate,
        rate
    );
    for (name, comp, spec) in [
        ("first", Component::First, &first),
        ("second", Component::Second, &second),
    ] {
        let r = marginal_check(&paths, comp, spec);
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{},{}",
            r.paths,
            num(rate),
            num(r.mean),
            num(r.mean_target),
            num(r.mean_z),
            num(r.variance),
            num(r.variance_target),
            num(r.variance_z),
            r.passed
        );
        let _ = writeln!(
            console,
            "{name}: mean {} (target {}, z {:.2}), variance {} (target {}, z {:.2}) {}",
            r.mean,
            r.mean_target,
            r.mean_z,
            r.variance,
            r.variance_target,
            r.variance_z,
            if r.passed { "ok" } else { "REJECTED" }
        );
    }
    Ok(Report { csv, console })
}

pub fn run(command: Command, cfg: &RunConfig, flags: &RunFlags) -> Result<Report, Failure> {
    if let Some(declared) = cfg.command {
        if declared != command {
            return Err(Failure::Schema(format!(
                "config declares command {declared:?} but {command:?} was requested"
            )));
        }
    }
    match command {
        Command::Price => price(cfg, flags),
        Command::Converge => converge(cfg, flags),
        Command::Check => check(),
        Command::Couple => couple(cfg, flags),
    }
}
