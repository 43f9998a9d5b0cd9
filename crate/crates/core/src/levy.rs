//! Lévy triplets `(d, σ², Λ)` with tail and second-moment queries, and the
//! tilted model Q#.

use libm::tgamma as gamma_fn;

use crate::distortion::{JumpRateDistortion, MeasureFamily, Side};
use crate::error::{invalid, Error, Result};
use crate::quad;

const ABS_TOL: f64 = 1e-14;
const REL_TOL: f64 = 1e-13;

/// Tails given on grids, interpolated linearly in `log Λ̄`. Below the first
/// knot the tail is flat (no mass there); past the last knot it is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedTails {
    right: Vec<(f64, f64)>,
    left: Vec<(f64, f64)>,
    sigma2_total: Option<f64>,
}

impl TabulatedTails {
    /// `right` holds `(x, Λ̄(x))`, `left` holds `(x, Λ̲(-x))`, both for
    /// increasing `x > 0` with positive nonincreasing tails. `sigma2_total`
    /// optionally declares `Σ²(ℝ)`; otherwise it is integrated from the tables.
    pub fn new(
        right: Vec<(f64, f64)>,
        left: Vec<(f64, f64)>,
        sigma2_total: Option<f64>,
    ) -> Result<Self> {
        for (name, side) in [("right", &right), ("left", &left)] {
            for w in side.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(invalid(format!(
                        "{name} tail grid must be strictly increasing"
                    )));
                }
                if w[1].1 > w[0].1 {
                    return Err(invalid(format!("{name} tail must be nonincreasing")));
                }
            }
            if side
                .iter()
                .any(|&(x, t)| !(x > 0.0 && x.is_finite() && t > 0.0 && t.is_finite()))
            {
                return Err(invalid(format!(
                    "{name} tail knots need x > 0 and finite positive tails"
                )));
            }
        }
        if let Some(s) = sigma2_total {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid(format!(
                    "declared Σ²(ℝ) must be finite and >= 0, got {s}"
                )));
            }
        }
        Ok(Self {
            right,
            left,
            sigma2_total,
        })
    }

    /// Samples the tails of `model` on the given grids and declares its `Σ²(ℝ)`.
    pub fn sample(model: &LevyModel, right: &[f64], left: &[f64]) -> Result<Self> {
        let r = right
            .iter()
            .map(|&x| Ok((x, model.tail_plus(x)?)))
            .collect::<Result<Vec<_>>>()?;
        let l = left
            .iter()
            .map(|&x| Ok((x, model.tail_minus(x)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(r, l, Some(model.sigma2_total()))
    }

    fn lookup(knots: &[(f64, f64)], x: f64) -> f64 {
        let Some(&(first, t0)) = knots.first() else {
            return 0.0;
        };
        let last = knots[knots.len() - 1].0;
        if x <= first {
            return t0;
        }
        if x > last {
            return 0.0;
        }
        let i = knots.partition_point(|k| k.0 < x);
        let (x0, y0) = knots[i - 1];
        let (x1, y1) = knots[i];
        if x == x1 {
            return y1;
        }
        let w = (x - x0) / (x1 - x0);
        (y0.ln() * (1.0 - w) + y1.ln() * w).exp()
    }

    /// True when `x` lies outside the right grid.
    pub fn right_extrapolated(&self, x: f64) -> bool {
        Self::outside(&self.right, x)
    }

    /// True when `x` lies outside the left grid (in `|x|`).
    pub fn left_extrapolated(&self, x: f64) -> bool {
        Self::outside(&self.left, x)
    }

    fn outside(knots: &[(f64, f64)], x: f64) -> bool {
        match (knots.first(), knots.last()) {
            (Some(a), Some(b)) => x < a.0 || x > b.0,
            _ => true,
        }
    }

    fn support_end(knots: &[(f64, f64)]) -> f64 {
        knots.last().map_or(0.0, |k| k.0)
    }
}

/// Jump part of a Lévy model.
#[derive(Debug, Clone, PartialEq)]
pub enum Jumps {
    None,
    /// Tails `C e^{-Mx} x^{-Y}` on the right and `C e^{-G|x|} |x|^{-Y}` on the left.
    TailCgmy {
        c: f64,
        g: f64,
        m: f64,
        y: f64,
    },
    Tabulated(TabulatedTails),
    /// Tails `Γ₊ ∘ Λ̄` and `Γ₋ ∘ Λ̲` of a base jump measure.
    Distorted {
        base: Box<Jumps>,
        gamma: JumpRateDistortion,
    },
}

impl Jumps {
    pub fn tail_cgmy(c: f64, g: f64, m: f64, y: f64) -> Self {
        Self::TailCgmy { c, g, m, y }
    }

    fn tail_plus(&self, x: f64) -> f64 {
        match self {
            Self::None => 0.0,
            Self::TailCgmy { c, m, y, .. } => c * (-m * x).exp() * x.powf(-y),
            Self::Tabulated(t) => TabulatedTails::lookup(&t.right, x),
            Self::Distorted { base, gamma } => gamma.plus.eval(base.tail_plus(x)),
        }
    }

    fn tail_minus(&self, x: f64) -> f64 {
        match self {
            Self::None => 0.0,
            Self::TailCgmy { c, g, y, .. } => c * (-g * x).exp() * x.powf(-y),
            Self::Tabulated(t) => TabulatedTails::lookup(&t.left, x),
            Self::Distorted { base, gamma } => gamma.minus.eval(base.tail_minus(x)),
        }
    }

    fn is_none(&self) -> bool {
        match self {
            Self::None => true,
            Self::Tabulated(t) => t.right.is_empty() && t.left.is_empty(),
            Self::Distorted { base, .. } => base.is_none(),
            _ => false,
        }
    }

    /// Right end of the support on each side, infinite for unbounded tails.
    fn support(&self) -> (f64, f64) {
        match self {
            Self::None => (0.0, 0.0),
            Self::TailCgmy { .. } => (f64::INFINITY, f64::INFINITY),
            Self::Tabulated(t) => (
                TabulatedTails::support_end(&t.right),
                TabulatedTails::support_end(&t.left),
            ),
            Self::Distorted { base, .. } => base.support(),
        }
    }

    fn validate(&self, q: f64) -> Result<()> {
        match self {
            Self::None => Ok(()),
            Self::TailCgmy { c, g, m, y } => {
                let ok = *c > 0.0 && *g > 0.0 && *m > 1.0 && *y > 0.0 && *y <= 1.0;
                if !ok || ![c, g, m, y].iter().all(|v| v.is_finite()) {
                    return Err(invalid(format!(
                        "tail-CGMY needs C > 0, G > 0, M > 1, Y in (0, 1]; got C={c}, G={g}, M={m}, Y={y}"
                    )));
                }
                if *m <= 2.0 * q {
                    return Err(Error::Infeasible {
                        condition: "exponential moment of order 2q on the right tail",
                        detail: format!("tail-CGMY needs M > 2q, got M={m}, q={q}"),
                    });
                }
                Ok(())
            }
            Self::Tabulated(_) => Ok(()),
            Self::Distorted { base, gamma } => {
                if gamma.plus.side() != Side::Upper || gamma.minus.side() != Side::Lower {
                    return Err(invalid(
                        "jump-rate distortion needs an upper Γ₊ and a lower Γ₋",
                    ));
                }
                gamma.plus.validate()?;
                gamma.minus.validate()?;
                base.validate(q)
            }
        }
    }
}

/// One side of a jump measure, reflected onto `(0, ∞)`.
#[derive(Clone, Copy)]
struct HalfLine<'a> {
    jumps: &'a Jumps,
    right: bool,
}

impl HalfLine<'_> {
    fn tail(&self, x: f64) -> f64 {
        if self.right {
            self.jumps.tail_plus(x)
        } else {
            self.jumps.tail_minus(x)
        }
    }

    fn end(&self) -> f64 {
        let (r, l) = self.jumps.support();
        if self.right {
            r
        } else {
            l
        }
    }

    /// Density for tail-CGMY, `C e^{-Mx} x^{-1-Y} (Y + Mx)`.
    fn cgmy_density(&self, x: f64) -> Option<f64> {
        match self.jumps {
            Jumps::TailCgmy { c, g, m, y } => {
                let rate = if self.right { *m } else { *g };
                Some(c * (-rate * x).exp() * x.powf(-1.0 - y) * (y + rate * x))
            }
            _ => None,
        }
    }

    /// `∫_{(lo, hi)} f dΛ` for `f(0) = 0`, by parts: `f(lo)Λ̄(lo) - f(hi)Λ̄(hi) + ∫ f' Λ̄`.
    fn integrate_by_parts(
        &self,
        lo: f64,
        hi: f64,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> f64 {
        let hi = hi.min(self.end());
        if !(hi > lo) {
            return 0.0;
        }
        let boundary_lo = if lo > 0.0 { f(lo) * self.tail(lo) } else { 0.0 };
        let boundary_hi = if hi.is_finite() {
            f(hi) * self.tail_just_below(hi)
        } else {
            0.0
        };
        let integrand = |x: f64| df(x) * self.tail(x);
        let body = if lo == 0.0 && hi.is_infinite() {
            quad::integrate_half_line(integrand, ABS_TOL, REL_TOL).value
        } else if lo == 0.0 {
            quad::integrate_from_origin(integrand, hi, ABS_TOL, REL_TOL).value
        } else if hi.is_infinite() {
            quad::integrate_to_infinity(integrand, lo, ABS_TOL, REL_TOL).value
        } else {
            quad::integrate(integrand, lo, hi, ABS_TOL, REL_TOL, 2000).value
        };
        boundary_lo - boundary_hi + body
    }

    /// Mass strictly above `x` seen from below; differs from `tail` only at
    /// the support end of a table.
    fn tail_just_below(&self, x: f64) -> f64 {
        if x >= self.end() {
            0.0
        } else {
            self.tail(x)
        }
    }

    fn sigma2(&self, lo: f64, hi: f64) -> f64 {
        if self.cgmy_density(1.0).is_some() {
            let f = |x: f64| x * x * self.cgmy_density(x).unwrap();
            return if lo == 0.0 && hi.is_infinite() {
                quad::integrate_half_line(f, ABS_TOL, REL_TOL).value
            } else if lo == 0.0 {
                quad::integrate_from_origin(f, hi, ABS_TOL, REL_TOL).value
            } else if hi.is_infinite() {
                quad::integrate_to_infinity(f, lo, ABS_TOL, REL_TOL).value
            } else {
                quad::integrate(f, lo, hi, ABS_TOL, REL_TOL, 2000).value
            };
        }
        self.integrate_by_parts(lo, hi, |x| x * x, |x| 2.0 * x)
    }
}

/// Closed-form `Σ²(ℝ) = 2CΓ(2-Y)[M^{Y-2} + G^{Y-2}]` for tail-CGMY.
pub fn tail_cgmy_sigma2(c: f64, g: f64, m: f64, y: f64) -> f64 {
    2.0 * c * gamma_fn(2.0 - y) * (m.powf(y - 2.0) + g.powf(y - 2.0))
}

/// `Λ̄(x) + γ C^{1/(1+γ)} e^{-Mx/(1+γ)} x^{-Y/(1+γ)}`: the tail-CGMY right
/// tail after the MINMAXVAR jump-rate distortion `λ + γλ^{1/(1+γ)}`.
pub fn tail_cgmy_tilted_tail(c: f64, m: f64, y: f64, gamma_: f64, x: f64) -> f64 {
    let s = 1.0 / (1.0 + gamma_);
    c * (-m * x).exp() * x.powf(-y) + gamma_ * c.powf(s) * (-m * x * s).exp() * x.powf(-y * s)
}

/// `Γ(u)(M/(1+γ))^{-u}` with `u = (1+γ-Y)/(1+γ)`, the value of
/// `∫_0^∞ e^{-Mx/(1+γ)} x^{-Y/(1+γ)} dx`.
pub fn tail_cgmy_tilt_integral(m: f64, y: f64, gamma_: f64) -> f64 {
    let u = (1.0 + gamma_ - y) / (1.0 + gamma_);
    gamma_fn(u) * (m / (1.0 + gamma_)).powf(-u)
}

/// Extra jump mean `∫ x (Λ# - Λ)(dx) = γ C^{1/(1+γ)} Γ(u)(M/(1+γ))^{-u}`
/// created by the MINMAXVAR jump-rate distortion on tail-CGMY.
pub fn tail_cgmy_tilt_mean(c: f64, m: f64, y: f64, gamma_: f64) -> f64 {
    gamma_ * c.powf(1.0 / (1.0 + gamma_)) * tail_cgmy_tilt_integral(m, y, gamma_)
}

/// Lévy model with mean drift `d = E[X_1]`, Gaussian variance rate `σ²`,
/// a jump measure and the exponential-moment order `q >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    drift: f64,
    sigma2: f64,
    jumps: Jumps,
    q: f64,
}

impl LevyModel {
    pub fn new(drift: f64, sigma2: f64, jumps: Jumps, q: f64) -> Result<Self> {
        if !drift.is_finite() {
            return Err(invalid(format!("drift must be finite, got {drift}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(invalid(format!("σ² must be finite and >= 0, got {sigma2}")));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(invalid(format!(
                "exponential-moment order q must be >= 1, got {q}"
            )));
        }
        jumps.validate(q)?;
        let model = Self {
            drift,
            sigma2,
            jumps,
            q,
        };
        let total = model.sigma2_total();
        if !total.is_finite() {
            return Err(invalid("jump measure does not integrate x^2 ∧ 1"));
        }
        if sigma2 + total <= 0.0 {
            return Err(invalid("model has neither a Gaussian part nor jumps"));
        }
        Ok(model)
    }

    /// `X_t = (μ - σ²/2) t + σW_t`, so that `E[e^{X_t}] = e^{μt}`.
    pub fn gbm(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid(format!("σ must be > 0, got {sigma}")));
        }
        Self::new(mu - 0.5 * sigma * sigma, sigma * sigma, Jumps::None, 1.0)
    }

    /// Drift `μ - σ²/2 - κ`, `κ = ∫(e^x - 1 - x)Λ(dx)`, so that `E[e^{X_t}] = e^{μt}`.
    pub fn exponential(mu: f64, sigma2: f64, jumps: Jumps, q: f64) -> Result<Self> {
        let probe = Self::new(0.0, sigma2, jumps, q)?;
        let kappa = probe.kappa();
        Self::new(mu - 0.5 * sigma2 - kappa, sigma2, probe.jumps, q)
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn jumps(&self) -> &Jumps {
        &self.jumps
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn has_jumps(&self) -> bool {
        !self.jumps.is_none()
    }

    /// Same model with a different mean drift.
    pub fn with_drift(&self, drift: f64) -> Result<Self> {
        Self::new(drift, self.sigma2, self.jumps.clone(), self.q)
    }

    fn side(&self, right: bool) -> HalfLine<'_> {
        HalfLine {
            jumps: &self.jumps,
            right,
        }
    }

    /// `Λ̄(x) = Λ((x, ∞))`
    pub fn tail_plus(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(x));
        }
        Ok(self.jumps.tail_plus(x))
    }

    /// `Λ̲(-x) = Λ((-∞, -x))`
    pub fn tail_minus(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(x));
        }
        Ok(self.jumps.tail_minus(x))
    }

    /// `Λ([lo, hi))` for `0 < lo < hi`, from tail differences.
    pub fn mass_right(&self, lo: f64, hi: f64) -> f64 {
        (self.jumps.tail_plus(lo) - self.jumps.tail_plus(hi)).max(0.0)
    }

    /// `Λ((-hi, -lo])` for `0 < lo < hi`, from tail differences.
    pub fn mass_left(&self, lo: f64, hi: f64) -> f64 {
        (self.jumps.tail_minus(lo) - self.jumps.tail_minus(hi)).max(0.0)
    }

    /// `Σ²((a, b)) = ∫_{(a,b)} x² Λ(dx)`.
    pub fn sigma2_interval(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(invalid(format!("need a < b, got ({a}, {b})")));
        }
        if self.jumps.is_none() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if b > 0.0 {
            total += self.side(true).sigma2(a.max(0.0), b);
        }
        if a < 0.0 {
            total += self.side(false).sigma2((-b).max(0.0), -a);
        }
        Ok(total)
    }

    /// `Σ²(ℝ)`, in closed form where one is available.
    pub fn sigma2_total(&self) -> f64 {
        match &self.jumps {
            Jumps::None => 0.0,
            Jumps::TailCgmy { c, g, m, y } => tail_cgmy_sigma2(*c, *g, *m, *y),
            Jumps::Tabulated(TabulatedTails {
                sigma2_total: Some(s),
                ..
            }) => *s,
            Jumps::Distorted { base, gamma } => {
                if let (Jumps::TailCgmy { c, g, m, y }, MeasureFamily::PowerShift { gamma: gm }) =
                    (base.as_ref(), gamma.plus.family())
                {
                    if gamma.minus.is_identity() {
                        let s = 1.0 / (1.0 + gm);
                        let extra = gm
                            * c.powf(s)
                            * 2.0
                            * gamma_fn(2.0 - y * s)
                            * (m * s).powf(y * s - 2.0);
                        return tail_cgmy_sigma2(*c, *g, *m, *y) + extra;
                    }
                }
                self.side(true).sigma2(0.0, f64::INFINITY)
                    + self.side(false).sigma2(0.0, f64::INFINITY)
            }
            Jumps::Tabulated(_) => {
                self.side(true).sigma2(0.0, f64::INFINITY)
                    + self.side(false).sigma2(0.0, f64::INFINITY)
            }
        }
    }

    /// `κ = ∫(e^x - 1 - x)Λ(dx)`.
    pub fn kappa(&self) -> f64 {
        if self.jumps.is_none() {
            return 0.0;
        }
        let up = self.side(true).integrate_by_parts(
            0.0,
            f64::INFINITY,
            |x| x.exp_m1() - x,
            |x| x.exp_m1(),
        );
        let down = self.side(false).integrate_by_parts(
            0.0,
            f64::INFINITY,
            |x| (-x).exp_m1() + x,
            |x| -(-x).exp_m1(),
        );
        up + down
    }

    /// `∫ x Λ(dx)` over the right and left tails separately, as nonnegative numbers.
    fn abs_means(&self) -> (f64, f64) {
        let up = self
            .side(true)
            .integrate_by_parts(0.0, f64::INFINITY, |x| x, |_| 1.0);
        let down = self
            .side(false)
            .integrate_by_parts(0.0, f64::INFINITY, |x| x, |_| 1.0);
        (up, down)
    }
}

/// The tilted model: drift `d + σ²Δ₊ + ∫x(Λ# - Λ)(dx)`, same `σ²`, tails
/// `Γ₊ ∘ Λ̄` and `Γ₋ ∘ Λ̲`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSharpModel {
    pub base: LevyModel,
    pub drift_shift: f64,
    pub gamma: JumpRateDistortion,
    pub tilted: LevyModel,
    /// `∫ x (Λ# - Λ)(dx)`
    pub jump_mean_shift: f64,
}

pub fn tilt_qsharp(
    model: &LevyModel,
    drift_shift: f64,
    gamma: &JumpRateDistortion,
) -> Result<QSharpModel> {
    if !(drift_shift.is_finite()) {
        return Err(invalid(format!(
            "drift shift must be finite, got {drift_shift}"
        )));
    }
    if gamma.plus.side() != Side::Upper || gamma.minus.side() != Side::Lower {
        return Err(invalid(
            "jump-rate distortion needs an upper Γ₊ and a lower Γ₋",
        ));
    }
    gamma.plus.validate()?;
    gamma.minus.validate()?;
    if gamma.is_identity() || !model.has_jumps() {
        let tilted = model.with_drift(model.drift + model.sigma2 * drift_shift)?;
        return Ok(QSharpModel {
            base: model.clone(),
            drift_shift,
            gamma: gamma.clone(),
            tilted,
            jump_mean_shift: 0.0,
        });
    }
    let jumps = Jumps::Distorted {
        base: Box::new(model.jumps.clone()),
        gamma: gamma.clone(),
    };
    let probe = LevyModel::new(0.0, model.sigma2, jumps, model.q)?;
    let jump_mean_shift = match (&model.jumps, gamma.plus.family()) {
        (Jumps::TailCgmy { c, m, y, .. }, MeasureFamily::PowerShift { gamma: gm })
            if gamma.minus.is_identity() =>
        {
            tail_cgmy_tilt_mean(*c, *m, *y, *gm)
        }
        _ => {
            let (bu, bd) = model.abs_means();
            let (tu, td) = probe.abs_means();
            (tu - bu) - (td - bd)
        }
    };
    let tilted = probe.with_drift(model.drift + model.sigma2 * drift_shift + jump_mean_shift)?;
    Ok(QSharpModel {
        base: model.clone(),
        drift_shift,
        gamma: gamma.clone(),
        tilted,
        jump_mean_shift,
    })
}
