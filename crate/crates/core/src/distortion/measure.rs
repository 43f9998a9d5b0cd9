use super::probability::{Distortion, ProbabilityDistortion};
use crate::error::{invalid, Error, Result};
use crate::quad;

/// Power-law behaviour `D(y) ~ y^at_zero` near 0 and `D(y) ~ y^at_infinity` at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub at_zero: f64,
    pub at_infinity: f64,
}

/// A nondecreasing map of `[0, inf)` with `D(0) = 0`, applied to masses of a
/// (possibly infinite) measure.
pub trait MassDistortion {
    fn value(&self, y: f64) -> f64;
    fn growth(&self) -> Growth;
}

/// `y -> coef * y^exponent`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

impl MassDistortion for PowerLaw {
    fn value(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            self.coef * y.powf(self.exponent)
        }
    }
    fn growth(&self) -> Growth {
        Growth {
            at_zero: self.exponent,
            at_infinity: self.exponent,
        }
    }
}

/// `y -> min(y, cap)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capped {
    pub cap: f64,
}

impl MassDistortion for Capped {
    fn value(&self, y: f64) -> f64 {
        y.min(self.cap)
    }
    fn growth(&self) -> Growth {
        Growth {
            at_zero: 1.0,
            at_infinity: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Γ₊ with Γ₊ ≥ id
    Upper,
    /// Γ₋ with Γ₋ ≤ id
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureFamily {
    Identity,
    /// excess `γ λ^{1/(1+γ)}`
    PowerShift {
        gamma: f64,
    },
    /// excess `weight * Ψ(1 - e^{-λ})`
    ExpCap {
        psi: ProbabilityDistortion,
        weight: f64,
    },
    /// Piecewise-linear Γ through `(λ_i, Γ(λ_i))`, starting at the origin and
    /// continued with slope one past the last knot.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
}

/// A jump-rate distortion acting on one side: `Γ₊ = id + excess` or
/// `Γ₋ = id - excess`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDistortion {
    family: MeasureFamily,
    side: Side,
}

impl MeasureDistortion {
    pub fn identity(side: Side) -> Self {
        Self {
            family: MeasureFamily::Identity,
            side,
        }
    }

    pub fn new(family: MeasureFamily, side: Side) -> Result<Self> {
        match &family {
            MeasureFamily::PowerShift { gamma } if !(*gamma >= 0.0 && gamma.is_finite()) => {
                return Err(invalid(format!(
                    "power-shift gamma must be >= 0, got {gamma}"
                )));
            }
            MeasureFamily::ExpCap { weight, .. } if !(*weight >= 0.0 && weight.is_finite()) => {
                return Err(invalid(format!(
                    "exp-cap weight must be >= 0, got {weight}"
                )));
            }
            MeasureFamily::Tabulated { knots } => {
                if knots.first() != Some(&(0.0, 0.0)) {
                    return Err(invalid("tabulated measure distortion must start at (0,0)"));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(invalid(
                        "tabulated measure distortion needs increasing abscissae",
                    ));
                }
            }
            _ => {}
        }
        let d = Self { family, side };
        d.validate()?;
        Ok(d)
    }

    pub fn family(&self) -> &MeasureFamily {
        &self.family
    }

    pub fn side(&self) -> Side {
        self.side
    }

    fn tabulated(knots: &[(f64, f64)], lambda: f64) -> f64 {
        let i = knots.partition_point(|&(x, _)| x <= lambda);
        if i >= knots.len() {
            let (x, y) = knots[knots.len() - 1];
            return y + (lambda - x);
        }
        let (x0, y0) = knots[i - 1];
        let (x1, y1) = knots[i];
        y0 + (y1 - y0) * (lambda - x0) / (x1 - x0)
    }

    /// `Γ₊(λ) - λ` for the upper side, `λ - Γ₋(λ)` for the lower side.
    pub fn excess(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        match &self.family {
            MeasureFamily::Identity => 0.0,
            MeasureFamily::PowerShift { gamma } => gamma * lambda.powf(1.0 / (1.0 + gamma)),
            MeasureFamily::ExpCap { psi, weight } => weight * psi.value(-(-lambda).exp_m1()),
            MeasureFamily::Tabulated { knots } => {
                let g = Self::tabulated(knots, lambda);
                match self.side {
                    Side::Upper => g - lambda,
                    Side::Lower => lambda - g,
                }
            }
        }
    }

    /// `Γ(λ)`
    pub fn eval(&self, lambda: f64) -> f64 {
        if let MeasureFamily::Tabulated { knots } = &self.family {
            return Self::tabulated(knots, lambda.max(0.0));
        }
        match self.side {
            Side::Upper => lambda + self.excess(lambda),
            Side::Lower => lambda - self.excess(lambda),
        }
    }

    pub fn is_identity(&self) -> bool {
        match &self.family {
            MeasureFamily::Identity => true,
            MeasureFamily::PowerShift { gamma } => *gamma == 0.0,
            MeasureFamily::ExpCap { weight, .. } => *weight == 0.0,
            MeasureFamily::Tabulated { knots } => knots.iter().all(|(x, y)| x == y),
        }
    }

    /// Growth exponents of the excess map.
    pub fn excess_growth(&self) -> Growth {
        match &self.family {
            MeasureFamily::Identity => Growth {
                at_zero: f64::INFINITY,
                at_infinity: 0.0,
            },
            MeasureFamily::PowerShift { gamma } => {
                let e = 1.0 / (1.0 + gamma);
                Growth {
                    at_zero: e,
                    at_infinity: e,
                }
            }
            MeasureFamily::ExpCap { psi, .. } => Growth {
                at_zero: psi.small_p_exponent(),
                at_infinity: 0.0,
            },
            MeasureFamily::Tabulated { .. } => Growth {
                at_zero: 1.0,
                at_infinity: 0.0,
            },
        }
    }

    /// Checks `Γ(0) = 0`, monotonicity of Γ and of its excess, the ordering
    /// against the identity and, on the upper side, concavity of the excess.
    pub fn validate(&self) -> Result<()> {
        let fail = |what: String| Err(Error::InvalidDistortion(format!("{:?}: {what}", self)));
        if self.eval(0.0).abs() > 1e-15 {
            return fail("Γ(0) != 0".into());
        }
        let mut grid = vec![0.0];
        grid.extend((0..=240).map(|i| 10f64.powf(-8.0 + i as f64 * 0.05)));
        let mut prev_g = 0.0;
        let mut prev_e = 0.0;
        for &x in &grid[1..] {
            let g = self.eval(x);
            let e = self.excess(x);
            if g < prev_g - 1e-12 || e < prev_e - 1e-12 {
                return fail(format!("not nondecreasing near λ={x}"));
            }
            if e < -1e-12 || g < -1e-12 {
                return fail(format!("negative value near λ={x}"));
            }
            prev_g = g;
            prev_e = e;
        }
        if self.side == Side::Upper {
            // midpoint concavity of the excess on a uniform grid
            let h = 0.05;
            for i in 1..400 {
                let x = i as f64 * h;
                let mid = self.excess(x);
                if mid < 0.5 * (self.excess(x - h) + self.excess(x + h)) - 1e-12 {
                    return fail(format!("excess not concave near λ={x}"));
                }
            }
        }
        Ok(())
    }
}

impl MassDistortion for MeasureDistortion {
    fn value(&self, y: f64) -> f64 {
        self.eval(y)
    }
    fn growth(&self) -> Growth {
        let ex = self.excess_growth();
        Growth {
            at_zero: ex.at_zero.min(1.0),
            at_infinity: ex.at_infinity.max(1.0),
        }
    }
}

/// The excess `Γ₊ - id` (upper) or `id - Γ₋` (lower) as a mass distortion.
#[derive(Debug, Clone, Copy)]
pub struct Excess<'a>(pub &'a MeasureDistortion);

impl MassDistortion for Excess<'_> {
    fn value(&self, y: f64) -> f64 {
        self.0.excess(y)
    }
    fn growth(&self) -> Growth {
        self.0.excess_growth()
    }
}

/// Pair (Γ₊, Γ₋) with Γ₊ ≥ id ≥ Γ₋.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRateDistortion {
    pub plus: MeasureDistortion,
    pub minus: MeasureDistortion,
}

impl JumpRateDistortion {
    pub fn new(plus: MeasureDistortion, minus: MeasureDistortion) -> Result<Self> {
        if plus.side != Side::Upper || minus.side != Side::Lower {
            return Err(invalid(
                "jump-rate distortion needs an upper Γ₊ and a lower Γ₋",
            ));
        }
        Ok(Self { plus, minus })
    }

    pub fn identity() -> Self {
        Self {
            plus: MeasureDistortion::identity(Side::Upper),
            minus: MeasureDistortion::identity(Side::Lower),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.plus.is_identity() && self.minus.is_identity()
    }
}

/// Drift shift (Δ₊, Δ₋), both nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftShift {
    pub plus: f64,
    pub minus: f64,
}

impl DriftShift {
    pub fn new(plus: f64, minus: f64) -> Result<Self> {
        if !(plus >= 0.0 && minus >= 0.0) || !plus.is_finite() || !minus.is_finite() {
            return Err(invalid(format!(
                "drift shift must be nonnegative, got ({plus}, {minus})"
            )));
        }
        Ok(Self { plus, minus })
    }
}

/// `K_D = integral_0^inf D(y) y^{-3/2} dy`; infinite when the growth exponents
/// make either end divergent (`<= 1/2` at zero or `>= 1/2` at infinity).
pub fn kd_measure<D: MassDistortion + ?Sized>(d: &D) -> f64 {
    let g = d.growth();
    if g.at_zero <= 0.5 || g.at_infinity >= 0.5 {
        return f64::INFINITY;
    }
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        d.value(y) * y.powf(-1.5)
    };
    quad::integrate_half_line(f, 1e-12, 1e-11).value
}
