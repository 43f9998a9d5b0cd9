//! Reference values for geometric Brownian motion.

use libm::erfc;

use crate::error::{invalid, Result};

/// `Φ(x)`
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ̄(x) = 1 - Φ(x)`, accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `S = S₀ e^{X}` with `E[S_T] = S₀ e^{c# T}`, `c# = μ + σ²Δ₊`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmSpec {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub drift_shift: f64,
}

impl GbmSpec {
    pub fn new(s0: f64, mu: f64, sigma: f64, horizon: f64, drift_shift: f64) -> Result<Self> {
        if !(s0 > 0.0 && sigma > 0.0 && horizon > 0.0) {
            return Err(invalid(format!(
                "need S0, σ, T > 0; got S0={s0}, σ={sigma}, T={horizon}"
            )));
        }
        if !(mu.is_finite() && drift_shift.is_finite()) {
            return Err(invalid("μ and Δ₊ must be finite"));
        }
        Ok(Self {
            s0,
            mu,
            sigma,
            horizon,
            drift_shift,
        })
    }

    /// `c# = Δ₊σ² + μ`
    pub fn c_sharp(&self) -> f64 {
        self.drift_shift * self.sigma * self.sigma + self.mu
    }

    fn vol(&self) -> f64 {
        self.sigma * self.horizon.sqrt()
    }
}

/// `S₀ e^{c#T} Φ(d₊) - K Φ(d₋)`, `d₊ = (log(S₀/K) + (c# + σ²/2)T)/(σ√T)`, `d₋ = d₊ - σ√T`.
pub fn gbm_call(spec: &GbmSpec, strike: f64) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(invalid(format!("strike must be > 0, got {strike}")));
    }
    let c = spec.c_sharp();
    let a = c + 0.5 * spec.sigma * spec.sigma;
    let d_plus = ((spec.s0 / strike).ln() + a * spec.horizon) / spec.vol();
    let d_minus = d_plus - spec.vol();
    Ok(spec.s0 * (c * spec.horizon).exp() * normal_cdf(d_plus) - strike * normal_cdf(d_minus))
}

/// Probability that `sup_{t<=T} S_t >= H` by the reflection principle:
/// `Φ̄((b - νT)/(σ√T)) + e^{2νb/σ²} Φ̄((b + νT)/(σ√T))`, `ν = c# - σ²/2`, `b = log(H/S₀)`.
pub fn gbm_upin_digital_reflection(spec: &GbmSpec, barrier: f64) -> f64 {
    if barrier <= spec.s0 {
        return 1.0;
    }
    let nu = spec.c_sharp() - 0.5 * spec.sigma * spec.sigma;
    let b = (barrier / spec.s0).ln();
    let t = spec.horizon;
    let first = normal_sf((b - nu * t) / spec.vol());
    let tail = normal_sf((b + nu * t) / spec.vol());
    let second = if tail == 0.0 {
        0.0
    } else {
        (2.0 * nu * b / (spec.sigma * spec.sigma)).exp() * tail
    };
    (first + second).clamp(0.0, 1.0)
}

/// The barrier digital as printed alongside the call formula:
/// `(H/S₀)^{2a} Φ̄(e₊) + Φ̄(e₋)`, `a = c# + σ²/2`, `e₊ = (log(H/S₀) + aT)/(σ√T)`,
/// `e₋ = e₊ - 2a√T/σ`. Kept for comparison with the reflection value.
pub fn gbm_upin_digital_paper(spec: &GbmSpec, barrier: f64) -> f64 {
    let a = spec.c_sharp() + 0.5 * spec.sigma * spec.sigma;
    let b = (barrier / spec.s0).ln();
    let e_plus = (b + a * spec.horizon) / spec.vol();
    let e_minus = e_plus - 2.0 * a * spec.horizon.sqrt() / spec.sigma;
    let tail = normal_sf(e_plus);
    let first = if tail == 0.0 {
        0.0
    } else {
        (2.0 * a * b).exp() * tail
    };
    first + normal_sf(e_minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atm(shift: f64) -> GbmSpec {
        GbmSpec::new(100.0, 0.0, 0.2, 1.0, shift).unwrap()
    }

    #[test]
    fn normal_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(0.1) - 0.539_827_837_277_029).abs() < 1e-15);
        for x in [0.3, 1.7, 4.0] {
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn call_values() {
        assert!((gbm_call(&atm(0.0), 100.0).unwrap() - 7.965_567_455_405_796).abs() < 1e-12);
        assert!((gbm_call(&atm(0.5), 100.0).unwrap() - 9.096_153_179_328_212).abs() < 1e-12);
        assert!((gbm_call(&atm(0.0), 1e-12).unwrap() - 100.0).abs() < 1e-9);
        assert!(gbm_call(&atm(0.0), 0.0).is_err());
    }

    #[test]
    fn digital_values() {
        let s = atm(0.0);
        let r = gbm_upin_digital_reflection(&s, 120.0);
        assert!((r - 0.329_619_779_385_206_8).abs() < 1e-13, "{r}");
        assert!((gbm_upin_digital_paper(&s, 120.0) - 0.365_512_013_957_032_1).abs() < 1e-13);
        assert_eq!(gbm_upin_digital_reflection(&s, 100.0), 1.0);
        assert!((gbm_upin_digital_reflection(&s, 100.0 * (1.0 + 1e-12)) - 1.0).abs() < 1e-9);
        assert_eq!(gbm_upin_digital_reflection(&s, 1e12), 0.0);
        assert_eq!(gbm_upin_digital_paper(&s, 1e12), 0.0);
        assert!(
            gbm_upin_digital_paper(&GbmSpec::new(100.0, 0.0, 1e-8, 1e-8, 0.0).unwrap(), 101.0)
                .is_finite()
        );
    }

    proptest! {
        #[test]
        fn call_monotonicity(s0 in 50.0f64..150.0, k in 50.0f64..150.0, shift in 0.0f64..2.0) {
            let spec = GbmSpec::new(s0, 0.0, 0.2, 1.0, shift).unwrap();
            let v = gbm_call(&spec, k).unwrap();
            let up_s = gbm_call(&GbmSpec { s0: s0 + 0.5, ..spec }, k).unwrap();
            let up_shift = gbm_call(&GbmSpec { drift_shift: shift + 0.1, ..spec }, k).unwrap();
            let up_k = gbm_call(&spec, k + 0.5).unwrap();
            prop_assert!(up_s > v && up_shift > v && up_k < v);
        }

        #[test]
        fn no_arbitrage_bounds(s0 in 50.0f64..150.0, k in 50.0f64..150.0) {
            let v = gbm_call(&GbmSpec::new(s0, 0.0, 0.2, 1.0, 0.0).unwrap(), k).unwrap();
            prop_assert!(v >= (s0 - k).max(0.0) - 1e-12 && v <= s0);
        }

        #[test]
        fn reflection_digital_in_unit_interval(h in 100.5f64..400.0, dh in 0.1f64..20.0) {
            let s = GbmSpec::new(100.0, 0.0, 0.2, 1.0, 0.3).unwrap();
            let p = gbm_upin_digital_reflection(&s, h);
            let q = gbm_upin_digital_reflection(&s, h + dh);
            prop_assert!((0.0..=1.0).contains(&p) && q <= p);
        }
    }
}
