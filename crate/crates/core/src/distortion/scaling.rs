use super::clamp_probability;
use super::measure::{JumpRateDistortion, MeasureDistortion, MeasureFamily, Side};
use super::probability::{check_shape, Distortion, ProbabilityDistortion};
use crate::error::{invalid, Error, Result};

/// The three-distortion family `Ψ(p, δ)` with square-root, jump-rate and
/// dual jump-rate components; `δ` is capped at `delta0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralExample {
    psi1: ProbabilityDistortion,
    psi2: ProbabilityDistortion,
    psi3: ProbabilityDistortion,
    psi3_weight: f64,
    sigma: f64,
    delta0: f64,
}

impl GeneralExample {
    /// Builds the family and fixes `delta0` as the largest `2^{-k}` for which
    /// `C0(δ) > 0` and `Ψ(·, δ)` passes the distortion shape checks.
    pub fn new(
        psi1: ProbabilityDistortion,
        psi2: ProbabilityDistortion,
        psi3: ProbabilityDistortion,
        psi3_weight: f64,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be > 0, got {sigma}")));
        }
        if !(0.0..1.0).contains(&psi3_weight) {
            return Err(invalid(format!(
                "psi3 weight must lie in [0, 1), got {psi3_weight}"
            )));
        }
        if !psi1.slope_at_zero().is_finite() || !psi3.slope_at_zero().is_finite() {
            return Err(invalid("Ψ1 and Ψ3 need finite right derivatives at zero"));
        }
        let s2 = psi2.slope_at_zero();
        let s3 = psi3_weight * psi3.slope_at_zero();
        if !(s2 > 1.0) || !(s3 < s2) || !(s3 < 1.0) {
            return Err(invalid(format!(
                "need weighted Ψ3'(0+) = {s3} < 1 and < Ψ2'(0+) = {s2}, with Ψ2'(0+) > 1"
            )));
        }
        let mut family = Self {
            psi1,
            psi2,
            psi3,
            psi3_weight,
            sigma,
            delta0: 1.0,
        };
        for k in 1..=48 {
            let delta = 0.5f64.powi(k);
            if family.c0(delta) <= 0.0 {
                continue;
            }
            family.delta0 = delta;
            let probe = |d: f64| check_shape(&Member(&family, d), "general example");
            if probe(delta).is_ok() && probe(delta / 16.0).is_ok() {
                return Ok(family);
            }
        }
        Err(Error::InvalidDistortion(
            "no δ0 = 2^-k yields a concave distortion for these components".into(),
        ))
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn c0(&self, delta: f64) -> f64 {
        let tail = -(-1.0 / delta).exp_m1();
        1.0 - delta * self.psi2.value(tail) + delta * self.psi3_weight * self.psi3.value(tail)
    }

    fn raw(&self, p: f64, delta: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let tail = -(-1.0 / delta).exp_m1();
        let up = -(-p / delta).exp_m1();
        let down = -(-(1.0 - p) / delta).exp_m1();
        self.c0(delta) * p
            + delta.sqrt() * self.sigma * (self.psi1.value(p) - p)
            + delta * self.psi2.value(up)
            + delta * self.psi3_weight * (self.psi3.value(down) - self.psi3.value(tail))
    }
}

struct Member<'a>(&'a GeneralExample, f64);

impl Distortion for Member<'_> {
    fn value(&self, p: f64) -> f64 {
        self.0.raw(p, self.1)
    }
}

/// δ-indexed families of concave distortions.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalingFamily {
    /// `Ψ(p, δ) = p + √δ (base(p) - p)` for `δ <= 1`; `sigma` is the model
    /// volatility entering the normalisation of the drift limit.
    SqrtBrownian {
        base: ProbabilityDistortion,
        sigma: f64,
    },
    GeneralExample(GeneralExample),
    /// `(1 - C(δ)) p + C(δ) MINMAXVAR_γ(p)`, `C(δ) = γ/(1+γ) δ^{γ/(1+γ)}`, `δ <= 1`.
    ConvexCgmy {
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSide {
    Plus,
    Minus,
}

impl ScalingFamily {
    pub fn sqrt_brownian(base: ProbabilityDistortion, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be > 0, got {sigma}")));
        }
        base.validate()?;
        Ok(Self::SqrtBrownian { base, sigma })
    }

    pub fn convex_cgmy(gamma: f64) -> Result<Self> {
        ProbabilityDistortion::minmaxvar(gamma)?;
        Ok(Self::ConvexCgmy { gamma })
    }

    /// Largest δ used; larger steps are evaluated at this value.
    pub fn delta_cap(&self) -> f64 {
        match self {
            Self::GeneralExample(g) => g.delta0,
            _ => 1.0,
        }
    }

    fn weight(gamma: f64, delta: f64) -> f64 {
        gamma / (1.0 + gamma) * delta.powf(gamma / (1.0 + gamma))
    }

    /// Unchecked `Ψ(p, δ ∧ δ0)`.
    pub fn value(&self, p: f64, delta: f64) -> f64 {
        let delta = delta.min(self.delta_cap());
        match self {
            Self::SqrtBrownian { base, .. } => p + delta.sqrt() * (base.value(p) - p),
            Self::GeneralExample(g) => g.raw(p, delta),
            Self::ConvexCgmy { gamma } => {
                let c = Self::weight(*gamma, delta);
                let psi = ProbabilityDistortion::MinMaxVar { gamma: *gamma };
                (1.0 - c) * p + c * psi.value(p)
            }
        }
    }

    pub fn scaled_eval(&self, p: f64, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(invalid(format!("time step must be > 0, got {delta}")));
        }
        Ok(self.value(clamp_probability(p)?, delta))
    }

    /// The member `Ψ(·, δ)` as a distortion.
    pub fn at(&self, delta: f64) -> Scaled<'_> {
        Scaled {
            family: self,
            delta: delta.min(self.delta_cap()),
        }
    }

    /// Closed-form drift limit ξ(p) under the normalisation `σ* = σ / (2√3)`,
    /// when the limit exists.
    pub fn xi_closed_form(&self, p: f64, sigma: f64) -> Option<f64> {
        let norm = 2.0 * 3f64.sqrt() / sigma;
        match self {
            Self::SqrtBrownian { base, .. } => Some(norm * (base.value(p) - p)),
            Self::GeneralExample(g) => Some(2.0 * 3f64.sqrt() * (g.psi1.value(p) - p)),
            Self::ConvexCgmy { gamma } => {
                if *gamma > 1.0 {
                    Some(0.0)
                } else if *gamma == 1.0 {
                    let psi = ProbabilityDistortion::MinMaxVar { gamma: 1.0 };
                    Some(0.5 * norm * (psi.value(p) - p))
                } else {
                    None
                }
            }
        }
    }

    /// Closed-form jump-rate limits Γ₊(λ) / Γ₋(λ).
    pub fn gamma_closed_form(&self, lambda: f64, side: GammaSide) -> f64 {
        let jr = self.jump_rate_distortion();
        match side {
            GammaSide::Plus => jr.plus.eval(lambda),
            GammaSide::Minus => jr.minus.eval(lambda),
        }
    }

    /// Jump-rate distortion (Γ₊, Γ₋) reached in the small-step limit.
    pub fn jump_rate_distortion(&self) -> JumpRateDistortion {
        match self {
            Self::SqrtBrownian { .. } => JumpRateDistortion::identity(),
            Self::GeneralExample(g) => JumpRateDistortion {
                plus: MeasureDistortion::new(
                    MeasureFamily::ExpCap {
                        psi: g.psi2.clone(),
                        weight: 1.0,
                    },
                    Side::Upper,
                )
                .expect("Ψ2 excess is a concave measure distortion"),
                minus: MeasureDistortion::new(
                    MeasureFamily::ExpCap {
                        psi: g.psi3.clone(),
                        weight: g.psi3_weight,
                    },
                    Side::Lower,
                )
                .expect("weighted Ψ3 keeps Γ₋ increasing"),
            },
            Self::ConvexCgmy { gamma } => JumpRateDistortion {
                plus: MeasureDistortion::new(
                    MeasureFamily::PowerShift { gamma: *gamma },
                    Side::Upper,
                )
                .expect("power shift with γ >= 0 is valid"),
                minus: MeasureDistortion::identity(Side::Lower),
            },
        }
    }
}

/// A member `Ψ(·, δ)` of a scaling family.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<'a> {
    family: &'a ScalingFamily,
    delta: f64,
}

impl Scaled<'_> {
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Distortion for Scaled<'_> {
    fn value(&self, p: f64) -> f64 {
        self.family.value(p, self.delta)
    }

    fn is_linear(&self) -> bool {
        match self.family {
            ScalingFamily::SqrtBrownian { base, .. } => base.is_linear(),
            ScalingFamily::ConvexCgmy { gamma } => *gamma == 0.0,
            ScalingFamily::GeneralExample(_) => false,
        }
    }
}

const FIRST_LEVEL: i32 = 4;
const LEVELS: usize = 9;
const AGREEMENT_TOL: f64 = 1e-4;

fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let den = d2 - d1;
    if den == 0.0 || !den.is_finite() || den.abs() <= 1e-15 * x2.abs().max(1e-300) {
        return x2;
    }
    x2 - d2 * d2 / den
}

/// Extrapolates `lim f_k` from values on a geometric step grid with two
/// levels of Richardson extrapolation at estimated order (Aitken's Δ²).
/// Fails when the raw differences do not contract or the two finest
/// extrapolants differ by more than `1e-4`.
pub fn extrapolate_limit(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 5 {
        return Err(invalid("need at least five levels to extrapolate"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence(
            "non-finite value in the sequence".into(),
        ));
    }
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let d_prev = values[n - 2] - values[n - 3];
    let d_last = values[n - 1] - values[n - 2];
    if d_last.abs() > 1e-13 * scale && (d_prev == 0.0 || (d_last / d_prev).abs() >= 1.0 - 1e-9) {
        return Err(Error::NonConvergence(format!(
            "successive differences do not contract ({d_prev:e} -> {d_last:e})"
        )));
    }
    let level1: Vec<f64> = values
        .windows(3)
        .map(|w| aitken(w[0], w[1], w[2]))
        .collect();
    let level2: Vec<f64> = level1
        .windows(3)
        .map(|w| aitken(w[0], w[1], w[2]))
        .collect();
    let last = level2[level2.len() - 1];
    let prev = level2[level2.len() - 2];
    if (last - prev).abs() > AGREEMENT_TOL {
        return Err(Error::NonConvergence(format!(
            "extrapolants disagree: {prev} vs {last}"
        )));
    }
    Ok(last)
}

fn delta_levels(max_delta: f64) -> Vec<f64> {
    let mut k = FIRST_LEVEL;
    while 0.25f64.powi(k) > max_delta {
        k += 1;
    }
    (0..LEVELS as i32).map(|i| 0.25f64.powi(k + i)).collect()
}

/// Limit of `(Ψ(p, δ) - p) / (√δ σ*)`, `σ* = σ / (2√3)`, as δ → 0.
pub fn estimate_xi(family: &ScalingFamily, p: f64, sigma: f64) -> Result<f64> {
    let p = clamp_probability(p)?;
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let sigma_star = sigma / (2.0 * 3f64.sqrt());
    let values: Vec<f64> = delta_levels(family.delta_cap())
        .into_iter()
        .map(|d| (family.value(p, d) - p) / (d.sqrt() * sigma_star))
        .collect();
    extrapolate_limit(&values)
}

/// Limit of `Ψ(δλ, δ)/δ` (plus) or `Ψ^(δλ, δ)/δ` (minus) as δ → 0.
pub fn estimate_gamma(family: &ScalingFamily, lambda: f64, side: GammaSide) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("jump rate must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let cap = family.delta_cap().min(1.0 / lambda);
    let values: Vec<f64> = delta_levels(cap)
        .into_iter()
        .map(|d| {
            let x = d * lambda;
            match side {
                GammaSide::Plus => family.value(x, d) / d,
                GammaSide::Minus => (1.0 - family.value(1.0 - x, d)) / d,
            }
        })
        .collect();
    extrapolate_limit(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp09() -> ProbabilityDistortion {
        ProbabilityDistortion::exponential(0.9).unwrap()
    }

    #[test]
    fn sqrt_brownian_scaled_value() {
        let f = ScalingFamily::sqrt_brownian(exp09(), 1.0).unwrap();
        let v = f.scaled_eval(0.5, 0.01).unwrap();
        assert!((v - (0.5 + 0.1 * (0.610_639_233_949_222 - 0.5))).abs() < 1e-15);
        assert!((f.scaled_eval(0.3, 1e-30).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn convex_cgmy_fixes_one() {
        let f = ScalingFamily::convex_cgmy(0.5).unwrap();
        for d in [1e-6, 0.01, 0.5, 3.0] {
            assert_eq!(f.scaled_eval(1.0, d).unwrap(), 1.0);
        }
    }

    #[test]
    fn scaled_eval_rejects_bad_inputs() {
        let f = ScalingFamily::convex_cgmy(0.5).unwrap();
        assert!(f.scaled_eval(0.5, 0.0).is_err());
        assert!(f.scaled_eval(1.5, 0.1).is_err());
    }

    #[test]
    fn xi_sqrt_brownian_matches_closed_form() {
        let f = ScalingFamily::sqrt_brownian(exp09(), 0.2).unwrap();
        let xi = estimate_xi(&f, 1.0 / 6.0, 0.2).unwrap();
        assert!((xi - 1.178_778_263_060_765).abs() < 1e-9, "{xi}");
    }

    #[test]
    fn xi_convex_cgmy_large_gamma_vanishes() {
        let f = ScalingFamily::convex_cgmy(3.0).unwrap();
        let xi = estimate_xi(&f, 0.3, 0.2).unwrap();
        assert!(xi.abs() < 1e-5, "{xi}");
    }

    #[test]
    fn xi_convex_cgmy_small_gamma_diverges() {
        let f = ScalingFamily::convex_cgmy(0.5).unwrap();
        assert!(matches!(
            estimate_xi(&f, 0.3, 0.2),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn gamma_convex_cgmy() {
        let f = ScalingFamily::convex_cgmy(0.5).unwrap();
        let plus = estimate_gamma(&f, 4.0, GammaSide::Plus).unwrap();
        assert!((plus - 5.259_921_049_894_873).abs() < 1e-5, "{plus}");
        let minus = estimate_gamma(&f, 4.0, GammaSide::Minus).unwrap();
        assert!((minus - 4.0).abs() < 1e-5, "{minus}");
        assert_eq!(estimate_gamma(&f, 0.0, GammaSide::Plus).unwrap(), 0.0);
    }

    #[test]
    fn general_example_limits() {
        let g = GeneralExample::new(
            exp09(),
            ProbabilityDistortion::minmaxvar(0.5).unwrap(),
            ProbabilityDistortion::exponential(0.5).unwrap(),
            0.5,
            0.2,
        )
        .unwrap();
        let f = ScalingFamily::GeneralExample(g);
        for p in [0.1, 1.0 / 6.0, 0.5, 5.0 / 6.0] {
            let xi = estimate_xi(&f, p, 0.2).unwrap();
            let target = f.xi_closed_form(p, 0.2).unwrap();
            assert!((xi - target).abs() < 1e-5, "p={p}: {xi} vs {target}");
        }
        for lambda in [0.5, 2.0, 4.0] {
            for side in [GammaSide::Plus, GammaSide::Minus] {
                let est = estimate_gamma(&f, lambda, side).unwrap();
                let target = f.gamma_closed_form(lambda, side);
                assert!(
                    (est - target).abs() < 1e-5,
                    "{lambda} {side:?}: {est} vs {target}"
                );
            }
        }
    }

    #[test]
    fn general_example_rejects_unit_slope_psi3() {
        let r = GeneralExample::new(
            exp09(),
            ProbabilityDistortion::minmaxvar(0.5).unwrap(),
            ProbabilityDistortion::exponential(0.5).unwrap(),
            0.99,
            0.2,
        );
        assert!(r.is_err());
    }
}
