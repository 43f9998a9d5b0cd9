//! JSON run configuration.

use std::collections::BTreeMap;

use distorted_lattice::coupling::SubordinatorSpec;
use distorted_lattice::distortion::{GeneralExample, ProbabilityDistortion, ScalingFamily};
use distorted_lattice::levy::{Jumps, LevyModel, TabulatedTails};
use distorted_lattice::valuation::{DistortionChoice, Payoff};
use distorted_lattice::Result;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Price,
    Converge,
    Check,
    Couple,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub model: Option<ModelConfig>,
    pub distortion: Option<DistortionConfig>,
    pub payoff: Option<PayoffConfig>,
    pub grid: Option<GridConfig>,
    pub reference: Option<ReferenceConfig>,
    pub coupling: Option<CouplingConfig>,
    pub output: Option<OutputConfig>,
    pub options: Option<OptionsConfig>,
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `S = S₀ exp((μ - σ²/2)t + σW_t)`
    Gbm { mu: f64, sigma: f64 },
    /// Exponential Lévy model with tail-CGMY jumps and optional Brownian part.
    Tailcgmy {
        mu: f64,
        #[serde(default)]
        sigma: f64,
        c: f64,
        g: f64,
        m: f64,
        y: f64,
        #[serde(default = "one")]
        q: f64,
    },
    /// Jump tails given as `[x, tail(x)]` knots on each side.
    Tabulated {
        mu: f64,
        #[serde(default)]
        sigma: f64,
        right: Vec<(f64, f64)>,
        left: Vec<(f64, f64)>,
        sigma2_total: Option<f64>,
        #[serde(default = "one")]
        q: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<LevyModel> {
        match self {
            Self::Gbm { mu, sigma } => LevyModel::gbm(*mu, *sigma),
            Self::Tailcgmy {
                mu,
                sigma,
                c,
                g,
                m,
                y,
                q,
            } => LevyModel::exponential(*mu, sigma * sigma, Jumps::tail_cgmy(*c, *g, *m, *y), *q),
            Self::Tabulated {
                mu,
                sigma,
                right,
                left,
                sigma2_total,
                q,
            } => {
                let tails = TabulatedTails::new(right.clone(), left.clone(), *sigma2_total)?;
                LevyModel::exponential(*mu, sigma * sigma, Jumps::Tabulated(tails), *q)
            }
        }
    }

    /// `(μ, σ)` when the model is a GBM.
    pub fn gbm_params(&self) -> Option<(f64, f64)> {
        match self {
            Self::Gbm { mu, sigma } => Some((*mu, *sigma)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseDistortion {
    Linear,
    Minmaxvar { gamma: f64 },
    Exponential { alpha: f64 },
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl BaseDistortion {
    pub fn build(&self) -> Result<ProbabilityDistortion> {
        match self {
            Self::Linear => Ok(ProbabilityDistortion::Linear),
            Self::Minmaxvar { gamma } => ProbabilityDistortion::minmaxvar(*gamma),
            Self::Exponential { alpha } => ProbabilityDistortion::exponential(*alpha),
            Self::PiecewiseLinear { knots } => {
                ProbabilityDistortion::piecewise_linear(knots.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionConfig {
    Linear,
    Minmaxvar {
        gamma: f64,
    },
    Exponential {
        alpha: f64,
    },
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    SqrtBrownian {
        base: BaseDistortion,
        sigma: f64,
    },
    ConvexCgmy {
        gamma: f64,
    },
    GeneralExample {
        psi1: BaseDistortion,
        psi2: BaseDistortion,
        psi3: BaseDistortion,
        psi3_weight: f64,
        sigma: f64,
    },
}

impl DistortionConfig {
    pub fn build(&self) -> Result<DistortionChoice> {
        let fixed = |b: BaseDistortion| b.build().map(DistortionChoice::Fixed);
        match self {
            Self::Linear => fixed(BaseDistortion::Linear),
            Self::Minmaxvar { gamma } => fixed(BaseDistortion::Minmaxvar { gamma: *gamma }),
            Self::Exponential { alpha } => fixed(BaseDistortion::Exponential { alpha: *alpha }),
            Self::PiecewiseLinear { knots } => fixed(BaseDistortion::PiecewiseLinear {
                knots: knots.clone(),
            }),
            Self::SqrtBrownian { base, sigma } => Ok(DistortionChoice::Family(
                ScalingFamily::sqrt_brownian(base.build()?, *sigma)?,
            )),
            Self::ConvexCgmy { gamma } => Ok(DistortionChoice::Family(ScalingFamily::convex_cgmy(
                *gamma,
            )?)),
            Self::GeneralExample {
                psi1,
                psi2,
                psi3,
                psi3_weight,
                sigma,
            } => {
                let g = GeneralExample::new(
                    psi1.build()?,
                    psi2.build()?,
                    psi3.build()?,
                    *psi3_weight,
                    *sigma,
                )?;
                Ok(DistortionChoice::Family(ScalingFamily::GeneralExample(g)))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffConfig {
    Call { s0: f64, strike: f64 },
    Digital { s0: f64, strike: f64 },
    UpinDigital { s0: f64, barrier: f64 },
    UpinCall { s0: f64, barrier: f64, strike: f64 },
    Table { values: BTreeMap<i64, f64> },
    Constant { value: f64 },
}

impl PayoffConfig {
    pub fn build(&self) -> Result<Payoff> {
        let p = match self {
            Self::Call { s0, strike } => Payoff::TerminalCall {
                s0: *s0,
                strike: *strike,
            },
            Self::Digital { s0, strike } => Payoff::TerminalDigital {
                s0: *s0,
                strike: *strike,
            },
            Self::UpinDigital { s0, barrier } => Payoff::UpInDigital {
                s0: *s0,
                barrier: *barrier,
            },
            Self::UpinCall {
                s0,
                barrier,
                strike,
            } => Payoff::UpInCall {
                s0: *s0,
                barrier: *barrier,
                strike: *strike,
            },
            Self::Table { values } => Payoff::TerminalTable(values.clone()),
            Self::Constant { value } => Payoff::Constant(*value),
        };
        p.validate()?;
        Ok(p)
    }
}

fn default_eps() -> f64 {
    distorted_lattice::lattice::DEFAULT_EPS_TRUNC
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub horizon: f64,
    pub n_steps: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    #[serde(default = "default_eps")]
    pub eps_trunc: f64,
    pub a_override: Option<u64>,
    /// Fixes the tick instead of deriving it from the step count.
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    Value {
        value: f64,
    },
    /// Closed-form GBM value of the configured call or up-and-in digital.
    ClosedForm {
        #[serde(default)]
        drift_shift: f64,
    },
    Finest,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubordinatorConfig {
    Exponential { rate: f64, mass: f64 },
    Tabulated { knots: Vec<(f64, f64)> },
    Zero,
}

impl SubordinatorConfig {
    pub fn build(&self) -> Result<SubordinatorSpec> {
        match self {
            Self::Exponential { rate, mass } => SubordinatorSpec::exponential(*rate, *mass),
            Self::Tabulated { knots } => SubordinatorSpec::tabulated(knots.clone()),
            Self::Zero => Ok(SubordinatorSpec::zero()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub first: SubordinatorConfig,
    pub second: SubordinatorConfig,
    #[serde(default = "one")]
    pub horizon: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv_path: Option<String>,
}

fn default_width() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default = "default_width")]
    pub width_sd: f64,
    pub state_bound: Option<i64>,
}
