//! Moment-matched multinomial step distributions on the grid `d·t + hℤ`.

use crate::error::{invalid, Error, Result};
use crate::levy::{Jumps, LevyModel};
use crate::quad;

/// Default bound on the jump mass dropped beyond `k_max` (per step, times δ).
pub const DEFAULT_EPS_TRUNC: f64 = 1e-10;
/// Largest admissible truncation index.
pub const MAX_KMAX: i64 = 20_000_000;
const CHAIN_TOL: f64 = 1e-14;
const TICK_TOL: f64 = 1e-12;

/// `Σ̃²(a) = σ² + Σ²(ℝ)/a` when `σ > 0`, else `Σ²(ℝ)`.
pub fn sigma_tilde2(model: &LevyModel, a: u64) -> f64 {
    let total = model.sigma2_total();
    if model.sigma2() > 0.0 {
        model.sigma2() + total / a as f64
    } else {
        total
    }
}

fn log_rule(h: f64) -> f64 {
    h.powf(-0.5) * h.ln().abs()
}

/// Cutoff `a(h)`. Tail-CGMY uses `max((Σ²(2-Y)/(2CY))^{1/(3-Y)} h^{(Y-2)/(3-Y)}, h^{-1/2}|log h|)`;
/// other jump measures use the smallest `a` meeting the small-jump variance
/// lower bound, or `h^{-1/2}|log h|` if larger; jump-free models use 2.
/// The result is at least 2 and at most `1/h`.
pub fn choose_a(model: &LevyModel, h: f64) -> u64 {
    let cap = (1.0 / h).floor().max(2.0);
    let raw = match model.jumps() {
        _ if !model.has_jumps() => 2.0,
        Jumps::TailCgmy { c, y, .. } => {
            let s2 = model.sigma2_total();
            let power = (s2 * (2.0 - y) / (2.0 * c * y)).powf(1.0 / (3.0 - y))
                * h.powf((y - 2.0) / (3.0 - y));
            power.max(log_rule(h))
        }
        _ => (lower_bound_a(model, h, cap as u64) as f64).max(log_rule(h)),
    };
    (raw.ceil().max(2.0)).min(cap) as u64
}

fn lower_bound_slack(model: &LevyModel, h: f64, a: u64) -> f64 {
    let x = a as f64 * h;
    let small = model.sigma2_interval(-x, x).unwrap_or(0.0);
    small - (model.sigma2_total() / a as f64 - model.sigma2())
}

fn lower_bound_a(model: &LevyModel, h: f64, cap: u64) -> u64 {
    if lower_bound_slack(model, h, 2) >= 0.0 {
        return 2;
    }
    if lower_bound_slack(model, h, cap) < 0.0 {
        return cap;
    }
    let (mut lo, mut hi) = (2u64, cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lower_bound_slack(model, h, mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Lattice parameters: horizon, step count, time step, tick, cutoff and truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub n_steps: usize,
    pub delta: f64,
    pub h: f64,
    pub a: u64,
    pub eps_trunc: f64,
    pub k_max: i64,
}

impl GridSpec {
    /// Grid with `δ = T/n`, `h² = 3δΣ̃²(a)` and `a = a(h)` (or `a_override`).
    pub fn build(
        model: &LevyModel,
        horizon: f64,
        n_steps: usize,
        eps_trunc: f64,
        a_override: Option<u64>,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(invalid(format!(
                "need T > 0 and n >= 1, got T={horizon}, n={n_steps}"
            )));
        }
        let delta = horizon / n_steps as f64;
        let tick = |a: u64| (3.0 * delta * sigma_tilde2(model, a)).sqrt();
        let a = match a_override {
            Some(a) => {
                if a < 2 {
                    return Err(invalid(format!("cutoff a must be >= 2, got {a}")));
                }
                a
            }
            None => {
                let mut a = 2u64;
                let mut seen = Vec::new();
                loop {
                    let next = choose_a(model, tick(a));
                    if next == a || seen.contains(&next) {
                        break a.max(next);
                    }
                    seen.push(a);
                    a = next;
                }
            }
        };
        let mut grid = Self {
            horizon,
            n_steps,
            delta,
            h: tick(a),
            a,
            eps_trunc,
            k_max: a as i64,
        };
        grid.k_max = truncation_index(model, &grid)?;
        Ok(grid)
    }

    /// Grid with a caller-chosen tick and cutoff; the tick relation is not enforced here.
    pub fn explicit(
        model: &LevyModel,
        horizon: f64,
        n_steps: usize,
        h: f64,
        a: u64,
        eps_trunc: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || n_steps == 0 || !(h > 0.0) || a < 2 {
            return Err(invalid(
                "explicit grid needs T > 0, n >= 1, h > 0 and a >= 2",
            ));
        }
        let mut grid = Self {
            horizon,
            n_steps,
            delta: horizon / n_steps as f64,
            h,
            a,
            eps_trunc,
            k_max: a as i64,
        };
        grid.k_max = truncation_index(model, &grid)?;
        Ok(grid)
    }

    /// A single-step grid with tick `h`: `δ = h²/(3Σ̃²(a))` with `a = a(h)`.
    pub fn from_tick(model: &LevyModel, h: f64, eps_trunc: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(invalid(format!("tick must lie in (0, 1), got {h}")));
        }
        let a = choose_a(model, h);
        let delta = h * h / (3.0 * sigma_tilde2(model, a));
        let mut grid = Self {
            horizon: delta,
            n_steps: 1,
            delta,
            h,
            a,
            eps_trunc,
            k_max: a as i64,
        };
        grid.k_max = truncation_index(model, &grid)?;
        Ok(grid)
    }

    /// The first `k` steps of this grid.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_steps {
            return Err(invalid(format!(
                "prefix length {k} outside 1..={}",
                self.n_steps
            )));
        }
        Ok(Self {
            horizon: self.delta * k as f64,
            n_steps: k,
            ..self.clone()
        })
    }

    /// Time of slice `m`.
    pub fn time(&self, m: usize) -> f64 {
        if m == self.n_steps {
            self.horizon
        } else {
            self.delta * m as f64
        }
    }
}

/// Smallest `k >= a` with `δ(Λ̄(kh) + Λ̲(-kh)) < ε` and
/// `δΣ²(|x| >= kh)/h² < ε`, so that both the folded mass and its effect on
/// `p_{±1}` stay below `ε`.
fn truncation_index(model: &LevyModel, grid: &GridSpec) -> Result<i64> {
    let a = grid.a as i64;
    if !model.has_jumps() {
        return Ok(a);
    }
    let eps = grid.eps_trunc;
    let small_enough = |k: i64| {
        let x = k as f64 * grid.h;
        let mass =
            grid.delta * (model.tail_plus(x).unwrap_or(0.0) + model.tail_minus(x).unwrap_or(0.0));
        if mass >= eps {
            return false;
        }
        let far = model.sigma2_interval(x, f64::INFINITY).unwrap_or(0.0)
            + model.sigma2_interval(f64::NEG_INFINITY, -x).unwrap_or(0.0);
        grid.delta * far / (grid.h * grid.h) < eps
    };
    if small_enough(a) {
        return Ok(a);
    }
    let mut hi = a.max(1);
    while !small_enough(hi) {
        if hi > MAX_KMAX {
            return Err(Error::TooLarge(format!(
                "jump support beyond {MAX_KMAX} ticks for eps_trunc = {eps}"
            )));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if small_enough(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.max(a))
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// One-step law of `Z` on `{-k_max, ..., k_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    probs: Vec<f64>,
    k_max: i64,
    pub h: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Jump mass `δΛ(|x| >= (k_max+1)h)` folded into `p_{±k_max}`.
    pub residual_mass: f64,
    /// Second moment of the folded mass lost by placing it at `±k_max h`.
    pub variance_error: f64,
}

impl StepDistribution {
    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn prob(&self, k: i64) -> f64 {
        if k.abs() > self.k_max {
            0.0
        } else {
            self.probs[(k + self.k_max) as usize]
        }
    }

    /// Dense probabilities indexed by `k + k_max`.
    pub fn dense(&self) -> &[f64] {
        &self.probs
    }

    /// Nonzero atoms `(k, p_k)` in increasing `k`.
    pub fn atoms(&self) -> Vec<(i64, f64)> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (i as i64 - self.k_max, *p))
            .collect()
    }

    pub fn total(&self) -> f64 {
        let mut s = Kahan::default();
        for p in &self.probs {
            s.add(*p);
        }
        s.sum
    }

    /// `E[Z]` in ticks.
    pub fn mean(&self) -> f64 {
        let mut s = Kahan::default();
        for (k, p) in self.atoms() {
            s.add(k as f64 * p);
        }
        s.sum
    }

    /// `E[Z²]` in ticks.
    pub fn second_moment(&self) -> f64 {
        let mut s = Kahan::default();
        for (k, p) in self.atoms() {
            s.add((k * k) as f64 * p);
        }
        s.sum
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }
}

/// One checked hypothesis with its slack (negative when violated).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const TICK_RELATION: &str = "tick relation h^2 = 3 delta sigma_tilde^2(a)";
pub const CUTOFF_BOUND: &str = "cutoff bound a*h <= 1";
pub const SMALL_JUMP_LOWER: &str = "small-jump variance lower bound";
pub const SMALL_JUMP_UPPER: &str = "small-jump variance upper bound";
pub const DRIFT_CHAIN: &str = "moment chain |beta|/h <= gamma/h^2";
pub const VARIANCE_CHAIN: &str = "moment chain gamma/h^2 <= alpha";
pub const MASS_CHAIN: &str = "moment chain alpha <= 1";

struct Moments {
    probs: Vec<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    residual: f64,
    variance_error: f64,
}

fn big_jumps(model: &LevyModel, grid: &GridSpec) -> Moments {
    let k_max = grid.k_max;
    let (h, delta) = (grid.h, grid.delta);
    let mut probs = vec![0.0; (2 * k_max + 1) as usize];
    let mut mass = Kahan::default();
    let mut first = Kahan::default();
    let mut second = Kahan::default();
    let mut residual = 0.0;
    let mut variance_error = 0.0;
    if model.has_jumps() {
        let a = grid.a as i64;
        for (sign, tail) in [
            (
                1i64,
                &(|x: f64| model.tail_plus(x).unwrap_or(0.0)) as &dyn Fn(f64) -> f64,
            ),
            (
                -1i64,
                &(|x: f64| model.tail_minus(x).unwrap_or(0.0)) as &dyn Fn(f64) -> f64,
            ),
        ] {
            let mut upper = tail(a as f64 * h);
            for k in a..=k_max {
                let lower = upper;
                let p = if k == k_max {
                    delta * lower
                } else {
                    upper = tail((k + 1) as f64 * h);
                    delta * (lower - upper).max(0.0)
                };
                probs[(sign * k + k_max) as usize] = p;
                let x = (sign * k) as f64 * h;
                mass.add(p);
                first.add(x * p);
                second.add(x * x * p);
            }
            let beyond = delta * tail((k_max + 1) as f64 * h);
            residual += beyond;
            let edge = (k_max + 1) as f64 * h;
            let far = if sign > 0 {
                model.sigma2_interval(edge, f64::INFINITY)
            } else {
                model.sigma2_interval(f64::NEG_INFINITY, -edge)
            }
            .unwrap_or(0.0);
            variance_error += (delta * far - (k_max as f64 * h).powi(2) * beyond).max(0.0);
        }
    }
    Moments {
        probs,
        alpha: 1.0 - mass.sum,
        beta: -first.sum,
        gamma: delta * (model.sigma2() + model.sigma2_total()) - second.sum,
        residual,
        variance_error,
    }
}

fn check(name: &'static str, slack: f64, tol: f64) -> ConditionCheck {
    ConditionCheck {
        name,
        slack,
        passed: slack >= -tol,
    }
}

fn conditions_from(model: &LevyModel, grid: &GridSpec, m: &Moments) -> ConditionReport {
    let (h, delta, a) = (grid.h, grid.delta, grid.a as f64);
    let s2 = model.sigma2();
    let total = model.sigma2_total();
    let target = 3.0 * delta * sigma_tilde2(model, grid.a);
    let small = model.sigma2_interval(-a * h, a * h).unwrap_or(0.0);
    let pure = if s2 == 0.0 {
        3.0 * (1.0 - 1.0 / a)
    } else {
        0.0
    };
    let upper = 2.0 * s2 + total * (pure + 1.0 / a - 2.0 / (a * a));
    let scale = 1e-12 * (s2 + total);
    ConditionReport {
        checks: vec![
            check(
                TICK_RELATION,
                TICK_TOL * target - (h * h - target).abs(),
                0.0,
            ),
            check(
                CUTOFF_BOUND,
                if model.has_jumps() {
                    1.0 - a * h
                } else {
                    f64::INFINITY
                },
                0.0,
            ),
            check(SMALL_JUMP_LOWER, small - (total / a - s2), scale),
            check(SMALL_JUMP_UPPER, upper - small, scale),
            check(DRIFT_CHAIN, m.gamma / (h * h) - m.beta.abs() / h, CHAIN_TOL),
            check(VARIANCE_CHAIN, m.alpha - m.gamma / (h * h), CHAIN_TOL),
            check(MASS_CHAIN, 1.0 - m.alpha, CHAIN_TOL),
        ],
    }
}

/// Checks the tick relation, `a·h <= 1`, the two-sided small-jump variance
/// bound and the chain `|β|/h <= γ/h² <= α <= 1`.
pub fn validate_conditions(model: &LevyModel, grid: &GridSpec) -> ConditionReport {
    conditions_from(model, grid, &big_jumps(model, grid))
}

/// Big jumps `p_k = δΛ([kh, (k+1)h))` for `a <= |k| <= k_max` (mass beyond
/// `k_max` folded into `p_{±k_max}`), zero for `2 <= |k| < a`, and
/// `p_{±1} = (γ ± βh)/(2h²)`, `p_0 = α - p_1 - p_{-1}`.
pub fn build_step_distribution(model: &LevyModel, grid: &GridSpec) -> Result<StepDistribution> {
    let m = big_jumps(model, grid);
    let report = conditions_from(model, grid, &m);
    if let Some(fail) = report.first_failure() {
        return Err(Error::Infeasible {
            condition: fail.name,
            detail: format!(
                "slack {:e} (h = {}, delta = {}, a = {})",
                fail.slack, grid.h, grid.delta, grid.a
            ),
        });
    }
    let h = grid.h;
    let k_max = grid.k_max;
    let mut probs = m.probs;
    // r = 3γ/h². On a tick-consistent grid h² = 3δσ̃², and dividing by δσ̃²
    // directly keeps the Brownian case at r = 1 with no rounding.
    let tick = grid.delta * sigma_tilde2(model, grid.a);
    let r = if ((h * h) / (3.0 * tick) - 1.0).abs() < 1e-14 {
        m.gamma / tick
    } else {
        3.0 * m.gamma / (h * h)
    };
    let drift = 0.5 * m.beta / h;
    let p_up = r / 6.0 + drift;
    let p_down = r / 6.0 - drift;
    let p_mid = (3.0 * m.alpha - r) / 3.0;
    let centre = k_max as usize;
    probs[centre] = p_mid;
    probs[centre + 1] += p_up;
    probs[centre - 1] += p_down;
    if let Some(bad) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Infeasible {
            condition: "step probabilities in [0, 1]",
            detail: format!("p_{} = {}", bad as i64 - k_max, probs[bad]),
        });
    }
    Ok(StepDistribution {
        probs,
        k_max,
        h,
        delta: grid.delta,
        alpha: m.alpha,
        beta: m.beta,
        gamma: m.gamma,
        residual_mass: m.residual,
        variance_error: m.variance_error,
    })
}

/// `(1/6 - c* √h / 2) σ²/Σ̃²(a)` with `c* = (a²h)^{-1/2} Σ²(ℝ)/(3σ²)`; zero without a Gaussian part.
pub fn trinomial_lower_bound(model: &LevyModel, grid: &GridSpec) -> f64 {
    let s2 = model.sigma2();
    if s2 == 0.0 {
        return 0.0;
    }
    let a = grid.a as f64;
    let c_sigma = model.sigma2_total() / (3.0 * s2);
    let c_star = c_sigma / (a * a * grid.h).sqrt();
    (1.0 / 6.0 - 0.5 * c_star * grid.h.sqrt()) * s2 / sigma_tilde2(model, grid.a)
}

/// Gaps between the random-walk characteristics at time `t` and their Lévy targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicsReport {
    pub steps: usize,
    pub drift_gap: f64,
    pub variance: f64,
    pub variance_target: f64,
    pub variance_gap: f64,
    pub jump_integral: f64,
    pub jump_target: f64,
    pub jump_gap: f64,
}

/// Compares `B^δ_t`, `C̃^δ_t` and `∫g dν^δ_t` with `0`, `t(σ² + Σ²(ℝ))` and
/// `t∫g dΛ`. `g` should be bounded and vanish near the origin.
pub fn characteristics_check(
    model: &LevyModel,
    grid: &GridSpec,
    step: &StepDistribution,
    t: f64,
    g: impl Fn(f64) -> f64,
) -> Result<CharacteristicsReport> {
    if !(t > 0.0 && t <= grid.horizon * (1.0 + 1e-12)) {
        return Err(invalid(format!("t must lie in (0, T], got {t}")));
    }
    let steps = ((t / grid.delta) * (1.0 + 1e-12)).floor() as usize;
    let m = steps as f64;
    let h = grid.h;
    let drift_gap = (m * h * step.mean()).abs();
    let variance = m * h * h * step.second_moment();
    let variance_target = t * (model.sigma2() + model.sigma2_total());
    let mut s = Kahan::default();
    for (k, p) in step.atoms() {
        s.add(g(k as f64 * h) * p);
    }
    let jump_integral = m * s.sum;
    let jump_target = t * jump_integral_target(model, &g);
    Ok(CharacteristicsReport {
        steps,
        drift_gap,
        variance,
        variance_target,
        variance_gap: (variance - variance_target).abs(),
        jump_integral,
        jump_target,
        jump_gap: (jump_integral - jump_target).abs(),
    })
}

/// `∫ g dΛ`, by density quadrature for tail-CGMY and by a fine Stieltjes sum otherwise.
fn jump_integral_target(model: &LevyModel, g: &dyn Fn(f64) -> f64) -> f64 {
    if !model.has_jumps() {
        return 0.0;
    }
    if let Jumps::TailCgmy { c, g: gl, m, y } = model.jumps() {
        let density = |x: f64, rate: f64| c * (-rate * x).exp() * x.powf(-1.0 - y) * (y + rate * x);
        let up = quad::integrate_half_line(|x| g(x) * density(x, *m), 1e-13, 1e-11).value;
        let down = quad::integrate_half_line(|x| g(-x) * density(x, *gl), 1e-13, 1e-11).value;
        return up + down;
    }
    let width = 1e-5;
    let mut total = Kahan::default();
    for sign in [1.0, -1.0] {
        let tail = |x: f64| {
            if sign > 0.0 {
                model.tail_plus(x).unwrap_or(0.0)
            } else {
                model.tail_minus(x).unwrap_or(0.0)
            }
        };
        let mut x = width;
        let mut upper = tail(x);
        while upper > 1e-16 && x < 1e3 {
            let lower = upper;
            upper = tail(x + width);
            total.add(g(sign * (x + 0.5 * width)) * (lower - upper));
            x += width;
        }
    }
    total.sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::TabulatedTails;
    use proptest::prelude::*;

    fn gbm() -> LevyModel {
        LevyModel::gbm(0.0, 0.2).unwrap()
    }

    fn jump_diffusion() -> LevyModel {
        LevyModel::exponential(0.0, 0.04, Jumps::tail_cgmy(0.01, 5.0, 5.0, 0.5), 1.0).unwrap()
    }

    fn pure_jump() -> LevyModel {
        LevyModel::exponential(0.0, 0.0, Jumps::tail_cgmy(1.0, 5.0, 5.0, 0.5), 1.0).unwrap()
    }

    #[test]
    fn gbm_is_exact_trinomial() {
        for n in [1, 7, 100, 1000] {
            let g = GridSpec::build(&gbm(), 1.0, n, DEFAULT_EPS_TRUNC, None).unwrap();
            let s = build_step_distribution(&gbm(), &g).unwrap();
            assert_eq!(s.k_max(), 2);
            assert_eq!(s.prob(1), 1.0 / 6.0);
            assert_eq!(s.prob(-1), 1.0 / 6.0);
            assert_eq!(s.prob(0), 2.0 / 3.0);
            assert_eq!(s.prob(2), 0.0);
        }
    }

    #[test]
    fn choose_a_examples() {
        assert_eq!(choose_a(&gbm(), 0.01), 2);
        let m = LevyModel::new(0.0, 0.0, Jumps::tail_cgmy(1.0, 5.0, 5.0, 0.5), 1.0).unwrap();
        assert_eq!(choose_a(&m, 1e-3), 219);
        for j in 8..=20 {
            let h = 0.5f64.powi(j);
            let a = choose_a(&m, h) as f64;
            assert!(a * h <= 1.0);
            if j > 8 {
                let prev = 0.5f64.powi(j - 1);
                let ap = choose_a(&m, prev) as f64;
                assert!(a * h < ap * prev && a * a * h > ap * ap * prev);
            }
        }
    }

    #[test]
    fn gbm_conditions_and_slack() {
        let g = GridSpec::build(&gbm(), 1.0, 100, DEFAULT_EPS_TRUNC, None).unwrap();
        let r = validate_conditions(&gbm(), &g);
        assert!(r.all_passed());
        assert!((r.get(SMALL_JUMP_UPPER).unwrap().slack - 0.08).abs() < 1e-15);
    }

    #[test]
    fn tick_violation_is_reported() {
        let g = GridSpec::explicit(&gbm(), 1.0, 100, 0.05, 2, DEFAULT_EPS_TRUNC).unwrap();
        let r = validate_conditions(&gbm(), &g);
        assert_eq!(r.first_failure().unwrap().name, TICK_RELATION);
        match build_step_distribution(&gbm(), &g) {
            Err(Error::Infeasible { condition, .. }) => assert_eq!(condition, TICK_RELATION),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cgmy_grid_passes_at_2_pow_minus_10() {
        let m = pure_jump();
        let g = GridSpec::from_tick(&m, 2f64.powi(-10), DEFAULT_EPS_TRUNC).unwrap();
        assert!(validate_conditions(&m, &g).all_passed());
        let s = build_step_distribution(&m, &g).unwrap();
        assert!(s.mean().abs() * g.h < 1e-12);
        let target = g.delta * m.sigma2_total();
        assert!((g.h * g.h * s.variance() - target).abs() < 1e-12 * target.max(1e-12) + 1e-15);
    }

    #[test]
    fn pure_jump_trinomial_vanishes() {
        let m = pure_jump();
        let mut last = f64::INFINITY;
        for j in [8, 11, 14] {
            let g = GridSpec::from_tick(&m, 2f64.powi(-j), DEFAULT_EPS_TRUNC).unwrap();
            let s = build_step_distribution(&m, &g).unwrap();
            let side = s.prob(1) + s.prob(-1);
            assert!(side < last);
            last = side;
        }
        assert!(last < 0.05, "{last}");
    }

    #[test]
    fn jump_diffusion_converges_to_trinomial() {
        let m = jump_diffusion();
        let g = GridSpec::from_tick(&m, 2f64.powi(-14), DEFAULT_EPS_TRUNC).unwrap();
        let s = build_step_distribution(&m, &g).unwrap();
        assert!((s.prob(1) - 1.0 / 6.0).abs() <= 1e-3, "{}", s.prob(1));
        assert!((s.prob(-1) - 1.0 / 6.0).abs() <= 1e-3, "{}", s.prob(-1));
        assert!(s.prob(1).min(s.prob(-1)) >= trinomial_lower_bound(&m, &g));
    }

    #[test]
    fn characteristics() {
        let m = jump_diffusion();
        let g = GridSpec::build(&m, 1.0, 64, DEFAULT_EPS_TRUNC, None).unwrap();
        let s = build_step_distribution(&m, &g).unwrap();
        let t = 0.3;
        let r = characteristics_check(&m, &g, &s, t, |x| if x.abs() > 1.0 { 1.0 } else { 0.0 })
            .unwrap();
        let expected = (t - g.delta * r.steps as f64) * (m.sigma2() + m.sigma2_total());
        assert!((r.variance_gap - expected).abs() < 1e-12);
        let gr = characteristics_check(
            &gbm(),
            &g,
            &build_step_distribution(
                &gbm(),
                &GridSpec::build(&gbm(), 1.0, 64, 1e-10, None).unwrap(),
            )
            .unwrap(),
            t,
            |x| if x.abs() >= 1.0 { 1.0 } else { 0.0 },
        )
        .unwrap();
        assert_eq!(gr.jump_integral, 0.0);
        assert_eq!(gr.jump_target, 0.0);
    }

    #[test]
    fn tabulated_equivalent_probabilities() {
        let m = pure_jump();
        let g = GridSpec::build(&m, 1.0, 50, DEFAULT_EPS_TRUNC, None).unwrap();
        let knots: Vec<f64> = (g.a as i64..=g.k_max + 1).map(|k| k as f64 * g.h).collect();
        let tab = TabulatedTails::sample(&m, &knots, &knots).unwrap();
        let mt = LevyModel::new(m.drift(), 0.0, Jumps::Tabulated(tab), 1.0).unwrap();
        let gt = GridSpec { ..g.clone() };
        let a = build_step_distribution(&m, &g).unwrap();
        let mut b_model_grid = gt;
        b_model_grid.k_max = g.k_max;
        let m_big = big_jumps(&mt, &b_model_grid);
        for k in g.a as i64..=g.k_max {
            assert!((a.prob(k) - m_big.probs[(k + g.k_max) as usize]).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn exact_gbm_moments(n in 1usize..2000, sigma in 0.05f64..1.0) {
            let m = LevyModel::gbm(0.0, sigma).unwrap();
            let g = GridSpec::build(&m, 1.0, n, DEFAULT_EPS_TRUNC, None).unwrap();
            let s = build_step_distribution(&m, &g).unwrap();
            prop_assert!(s.mean().abs() < 1e-15);
            prop_assert!((g.h * g.h * s.variance() - g.delta * sigma * sigma).abs() < 1e-14 * g.delta);
        }

        #[test]
        fn bound_chain_holds(n in 4usize..400, c in 0.01f64..2.0, s in 0.0f64..0.4) {
            let m = LevyModel::exponential(0.0, s * s, Jumps::tail_cgmy(c, 4.0, 6.0, 0.5), 1.0).unwrap();
            let g = GridSpec::build(&m, 1.0, n, DEFAULT_EPS_TRUNC, None).unwrap();
            let r = validate_conditions(&m, &g);
            let hypotheses = [TICK_RELATION, CUTOFF_BOUND, SMALL_JUMP_LOWER, SMALL_JUMP_UPPER];
            if hypotheses.iter().all(|n| r.get(n).unwrap().passed) {
                for name in [DRIFT_CHAIN, VARIANCE_CHAIN, MASS_CHAIN] {
                    prop_assert!(r.get(name).unwrap().passed, "{name}: {:?}", r);
                }
            }
            if let Ok(s) = build_step_distribution(&m, &g) {
                prop_assert!(s.dense().iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }
}
