use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clamp_probability;
use crate::error::{invalid, Error, Result};
use crate::quad;

/// A map of `[0, 1]` into itself used to distort survival probabilities.
pub trait Distortion: Send + Sync {
    /// Evaluates the distortion at `p`, which the caller guarantees lies in `[0, 1]`.
    fn value(&self, p: f64) -> f64;

    /// `true` when the distortion is the identity, which lets callers skip sorting.
    fn is_linear(&self) -> bool {
        false
    }

    /// Dual distortion `1 - D(1 - p)`.
    fn dual_value(&self, p: f64) -> f64 {
        1.0 - self.value(1.0 - p)
    }
}

impl<D: Distortion + ?Sized> Distortion for &D {
    fn value(&self, p: f64) -> f64 {
        (**self).value(p)
    }
    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }
}

/// Concave probability distortions from a fixed set of parametric families.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbabilityDistortion {
    Linear,
    /// `1 - (1 - p^{1/(1+γ)})^{1+γ}`
    MinMaxVar {
        gamma: f64,
    },
    /// `(1 - e^{-αp}) / (1 - e^{-α})`
    Exponential {
        alpha: f64,
    },
    /// Concave polygon through `(0,0)` and `(1,1)`.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    /// Convex combination of distortions.
    Composite {
        components: Vec<(f64, ProbabilityDistortion)>,
    },
}

impl ProbabilityDistortion {
    pub fn minmaxvar(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid(format!(
                "MINMAXVAR gamma must be >= 0, got {gamma}"
            )));
        }
        Ok(Self::MinMaxVar { gamma })
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!(
                "exponential alpha must be > 0, got {alpha}"
            )));
        }
        Ok(Self::Exponential { alpha })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid(
                "piecewise-linear distortion needs at least two knots",
            ));
        }
        if knots[0] != (0.0, 0.0) || knots[knots.len() - 1] != (1.0, 1.0) {
            return Err(invalid(
                "piecewise-linear distortion must start at (0,0) and end at (1,1)",
            ));
        }
        let mut last_slope = f64::INFINITY;
        for w in knots.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if !(x1 > x0) {
                return Err(invalid(
                    "piecewise-linear knots must have increasing abscissae",
                ));
            }
            let slope = (y1 - y0) / (x1 - x0);
            if slope < 0.0 {
                return Err(invalid("piecewise-linear distortion must be nondecreasing"));
            }
            if slope > last_slope + 1e-12 {
                return Err(invalid("piecewise-linear distortion must be concave"));
            }
            last_slope = slope;
        }
        Ok(Self::PiecewiseLinear { knots })
    }

    pub fn composite(components: Vec<(f64, ProbabilityDistortion)>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("composite distortion needs at least one component"));
        }
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.iter().any(|(w, _)| !(*w > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(invalid("composite weights must be positive and sum to 1"));
        }
        Ok(Self::Composite { components })
    }

    /// Checked evaluation: rejects `p` outside `[0, 1]` beyond rounding.
    pub fn eval(&self, p: f64) -> Result<f64> {
        Ok(self.value(clamp_probability(p)?))
    }

    /// Checked dual `1 - D(1 - p)`.
    pub fn dual(&self, p: f64) -> Result<f64> {
        let p = clamp_probability(p)?;
        Ok(1.0 - self.value(1.0 - p))
    }

    /// Exponent `e` with `D(p) ~ c p^e` as `p -> 0`.
    pub fn small_p_exponent(&self) -> f64 {
        match self {
            Self::MinMaxVar { gamma } => 1.0 / (1.0 + gamma),
            Self::Composite { components } => components
                .iter()
                .map(|(_, d)| d.small_p_exponent())
                .fold(1.0, f64::min),
            _ => 1.0,
        }
    }

    /// Right derivative at zero, possibly infinite.
    pub fn slope_at_zero(&self) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::MinMaxVar { gamma } => {
                if *gamma == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Exponential { alpha } => alpha / (-(-alpha).exp_m1()),
            Self::PiecewiseLinear { knots } => {
                (knots[1].1 - knots[0].1) / (knots[1].0 - knots[0].0)
            }
            Self::Composite { components } => {
                components.iter().map(|(w, d)| w * d.slope_at_zero()).sum()
            }
        }
    }

    /// Runs the grid-based shape checks (endpoints, monotonicity, concavity).
    pub fn validate(&self) -> Result<()> {
        check_shape(self, &format!("{self:?}"))
    }
}

impl Distortion for ProbabilityDistortion {
    fn value(&self, p: f64) -> f64 {
        match self {
            Self::Linear => p,
            Self::MinMaxVar { gamma } => {
                if *gamma == 0.0 {
                    return p;
                }
                let e = 1.0 + gamma;
                1.0 - (1.0 - p.powf(1.0 / e)).powf(e)
            }
            Self::Exponential { alpha } => (-alpha * p).exp_m1() / (-alpha).exp_m1(),
            Self::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|&(x, _)| x <= p);
                if i == 0 {
                    return knots[0].1;
                }
                if i >= knots.len() {
                    return knots[knots.len() - 1].1;
                }
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                y0 + (y1 - y0) * (p - x0) / (x1 - x0)
            }
            Self::Composite { components } => components.iter().map(|(w, d)| w * d.value(p)).sum(),
        }
    }

    fn is_linear(&self) -> bool {
        matches!(self, Self::Linear)
    }
}

const SHAPE_TOL: f64 = 1e-12;
const SHAPE_GRID: usize = 1025;
const SHAPE_RANDOM: usize = 1000;

/// Checks `D(0) = 0`, `D(1) = 1`, monotonicity and midpoint concavity on a
/// 1025-point uniform grid and 1000 seeded random pairs.
pub fn check_shape<D: Distortion + ?Sized>(d: &D, label: &str) -> Result<()> {
    let fail = |what: String| Err(Error::InvalidDistortion(format!("{label}: {what}")));
    let d0 = d.value(0.0);
    let d1 = d.value(1.0);
    if d0.abs() > SHAPE_TOL || (d1 - 1.0).abs() > SHAPE_TOL {
        return fail(format!("endpoints D(0)={d0}, D(1)={d1}"));
    }
    let step = 1.0 / (SHAPE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..SHAPE_GRID).map(|i| d.value(i as f64 * step)).collect();
    for i in 1..SHAPE_GRID {
        if grid[i] < grid[i - 1] - SHAPE_TOL {
            return fail(format!("decreasing near p={}", i as f64 * step));
        }
        if !(-SHAPE_TOL..=1.0 + SHAPE_TOL).contains(&grid[i]) {
            return fail(format!("value {} outside [0,1]", grid[i]));
        }
    }
    for i in 1..SHAPE_GRID - 1 {
        if grid[i] < 0.5 * (grid[i - 1] + grid[i + 1]) - SHAPE_TOL {
            return fail(format!("not concave near p={}", i as f64 * step));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d157);
    for _ in 0..SHAPE_RANDOM {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let (p, q) = if a <= b { (a, b) } else { (b, a) };
        let (dp, dq) = (d.value(p), d.value(q));
        if dp > dq + SHAPE_TOL {
            return fail(format!("decreasing between {p} and {q}"));
        }
        if d.value(0.5 * (p + q)) < 0.5 * (dp + dq) - SHAPE_TOL {
            return fail(format!("midpoint concavity fails on ({p}, {q})"));
        }
    }
    Ok(())
}

/// `K_D = integral_0^1 [D(y) + D^(y)] y^{-3/2} dy`, infinite when `D(y) ~ y^e`
/// with `e <= 1/2` at the origin.
pub fn kd_probability(d: &ProbabilityDistortion) -> f64 {
    if d.small_p_exponent() <= 0.5 {
        return f64::INFINITY;
    }
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        (d.value(y) + d.dual_value(y)) * y.powf(-1.5)
    };
    quad::integrate_from_origin(f, 1.0, 1e-12, 1e-11).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmaxvar_values() {
        let d = ProbabilityDistortion::minmaxvar(0.4).unwrap();
        assert_eq!(d.eval(0.0).unwrap(), 0.0);
        assert_eq!(d.eval(1.0).unwrap(), 1.0);
        let d = ProbabilityDistortion::minmaxvar(1.0).unwrap();
        // 1 - (1 - 2^{-1/2})^2
        assert!((d.eval(0.5).unwrap() - 0.914_213_562_373_095_1).abs() < 1e-15);
        assert!((d.dual(0.5).unwrap() - 0.085_786_437_626_904_95).abs() < 1e-15);
    }

    #[test]
    fn exponential_value() {
        let d = ProbabilityDistortion::exponential(0.9).unwrap();
        assert!((d.eval(0.5).unwrap() - 0.610_639_233_949_222).abs() < 1e-15);
        assert_eq!(d.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        let d = ProbabilityDistortion::Linear;
        assert!(matches!(d.eval(1.1), Err(Error::Domain(_))));
        assert!(matches!(d.eval(-1e-6), Err(Error::Domain(_))));
        assert_eq!(d.eval(1.0 + 1e-13).unwrap(), 1.0);
        assert!(d.eval(f64::NAN).is_err());
    }

    #[test]
    fn dual_edge_cases() {
        for d in [
            ProbabilityDistortion::Linear,
            ProbabilityDistortion::minmaxvar(0.7).unwrap(),
            ProbabilityDistortion::exponential(2.0).unwrap(),
        ] {
            assert_eq!(d.dual(1.0).unwrap(), 1.0);
        }
        assert!((ProbabilityDistortion::Linear.dual(0.3).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(ProbabilityDistortion::minmaxvar(-0.1).is_err());
        assert!(ProbabilityDistortion::exponential(0.0).is_err());
        assert!(
            ProbabilityDistortion::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)])
                .is_err()
        );
        assert!(
            ProbabilityDistortion::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)])
                .is_ok()
        );
        assert!(
            ProbabilityDistortion::composite(vec![(0.5, ProbabilityDistortion::Linear)]).is_err()
        );
    }

    #[test]
    fn shape_check_rejects_convex_map() {
        struct Square;
        impl Distortion for Square {
            fn value(&self, p: f64) -> f64 {
                p * p
            }
        }
        assert!(check_shape(&Square, "square").is_err());
    }

    #[test]
    fn kd_linear_is_four() {
        let k = kd_probability(&ProbabilityDistortion::Linear);
        assert!((k - 4.0).abs() < 1e-10, "{k}");
    }

    #[test]
    fn kd_minmaxvar_diverges_for_large_gamma() {
        assert!(kd_probability(&ProbabilityDistortion::minmaxvar(1.0).unwrap()).is_infinite());
        assert!(kd_probability(&ProbabilityDistortion::minmaxvar(0.5).unwrap()).is_finite());
    }
}
