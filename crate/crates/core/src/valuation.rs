//! Backward recursion `Π_m = 𝒞^Ψ[Π_{m+1} | F_m]` on the recombining lattice.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::choquet::{choquet_probability, DiscreteDistribution};
use crate::distortion::{Distortion, ProbabilityDistortion, Scaled, ScalingFamily};
use crate::error::{invalid, Error, Result};
use crate::lattice::{build_step_distribution, GridSpec, StepDistribution};
use crate::levy::LevyModel;

/// Claims on `S = S₀ e^{X}`, with `X = d·t + h·k` at lattice position `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    TerminalCall {
        s0: f64,
        strike: f64,
    },
    /// `1{S_T >= K}`
    TerminalDigital {
        s0: f64,
        strike: f64,
    },
    /// Value per terminal position; positions between keys take the value of
    /// the nearest key below, positions outside take the nearest end value.
    TerminalTable(BTreeMap<i64, f64>),
    /// `1{max_m S_{t_m} >= H}` paid at `T`.
    UpInDigital {
        s0: f64,
        barrier: f64,
    },
    /// `(S_T - K)⁺ 1{max_m S_{t_m} >= H}`
    UpInCall {
        s0: f64,
        barrier: f64,
        strike: f64,
    },
    Constant(f64),
    /// `scale · inner + shift`
    Affine {
        inner: Box<Payoff>,
        scale: f64,
        shift: f64,
    },
}

impl Payoff {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match self {
            Self::TerminalCall { s0, strike } | Self::TerminalDigital { s0, strike } => {
                positive("S0", *s0)?;
                positive("strike", *strike)
            }
            Self::TerminalTable(t) => {
                if t.is_empty() || t.values().any(|v| !v.is_finite()) {
                    return Err(invalid(
                        "terminal table must be non-empty with finite values",
                    ));
                }
                Ok(())
            }
            Self::UpInDigital { s0, barrier } => {
                positive("S0", *s0)?;
                if !(barrier > s0 && barrier.is_finite()) {
                    return Err(invalid(format!("barrier {barrier} must exceed S0 = {s0}")));
                }
                Ok(())
            }
            Self::UpInCall {
                s0,
                barrier,
                strike,
            } => {
                Self::UpInDigital {
                    s0: *s0,
                    barrier: *barrier,
                }
                .validate()?;
                positive("strike", *strike)
            }
            Self::Constant(c) => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("constant payoff must be finite"))
                }
            }
            Self::Affine {
                inner,
                scale,
                shift,
            } => {
                if !(scale.is_finite() && shift.is_finite()) {
                    return Err(invalid("affine payoff needs finite scale and shift"));
                }
                inner.validate()
            }
        }
    }

    /// The up-and-in barrier and spot, if any.
    pub fn barrier(&self) -> Option<(f64, f64)> {
        match self {
            Self::UpInDigital { s0, barrier } | Self::UpInCall { s0, barrier, .. } => {
                Some((*s0, *barrier))
            }
            Self::Affine { inner, .. } => inner.barrier(),
            _ => None,
        }
    }

    fn spot(&self) -> f64 {
        match self {
            Self::TerminalCall { s0, .. }
            | Self::TerminalDigital { s0, .. }
            | Self::UpInDigital { s0, .. }
            | Self::UpInCall { s0, .. } => *s0,
            Self::Affine { inner, .. } => inner.spot(),
            _ => 1.0,
        }
    }

    /// Terminal value at position `k`, log-price `x`, with barrier flag `hit`.
    pub fn terminal(&self, k: i64, x: f64, hit: bool) -> f64 {
        match self {
            Self::TerminalCall { s0, strike } => (s0 * x.exp() - strike).max(0.0),
            Self::TerminalDigital { s0, strike } => {
                if s0 * x.exp() >= *strike {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TerminalTable(t) => match t.range(..=k).next_back() {
                Some((_, v)) => *v,
                None => *t.values().next().unwrap(),
            },
            Self::UpInDigital { .. } => {
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            Self::UpInCall { s0, strike, .. } => {
                if hit {
                    (s0 * x.exp() - strike).max(0.0)
                } else {
                    0.0
                }
            }
            Self::Constant(c) => *c,
            Self::Affine {
                inner,
                scale,
                shift,
            } => scale * inner.terminal(k, x, hit) + shift,
        }
    }
}

/// A fixed distortion or a scaling family evaluated at the grid's δ.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionChoice {
    Fixed(ProbabilityDistortion),
    Family(ScalingFamily),
}

pub enum Member<'a> {
    Fixed(&'a ProbabilityDistortion),
    Scaled(Scaled<'a>),
}

impl Distortion for Member<'_> {
    fn value(&self, p: f64) -> f64 {
        match self {
            Self::Fixed(d) => d.value(p),
            Self::Scaled(s) => s.value(p),
        }
    }
    fn is_linear(&self) -> bool {
        match self {
            Self::Fixed(d) => d.is_linear(),
            Self::Scaled(s) => s.is_linear(),
        }
    }
}

impl DistortionChoice {
    pub fn member(&self, delta: f64) -> Member<'_> {
        match self {
            Self::Fixed(d) => Member::Fixed(d),
            Self::Family(f) => Member::Scaled(f.at(delta)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuationOptions {
    /// State half-width in standard deviations of `X_T` when `state_bound` is unset.
    pub width_sd: f64,
    /// State half-width in ticks; positions beyond it are clamped (flat extension).
    pub state_bound: Option<i64>,
    /// Keep the node values of this slice in the result.
    pub keep_slice: Option<usize>,
    pub parallel: bool,
}

impl Default for ValuationOptions {
    fn default() -> Self {
        Self {
            width_sd: 10.0,
            state_bound: None,
            keep_slice: None,
            parallel: true,
        }
    }
}

impl ValuationOptions {
    /// No clamping: every reachable position is kept.
    pub fn unbounded() -> Self {
        Self {
            state_bound: Some(i64::MAX / 4),
            ..Self::default()
        }
    }
}

/// Node values of one slice, for positions `-half..=half`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceValues {
    pub slice: usize,
    pub half: i64,
    pub values: Vec<f64>,
}

impl SliceValues {
    pub fn to_table(&self) -> BTreeMap<i64, f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (i as i64 - self.half, *v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuationResult {
    /// `Π_0`
    pub value: f64,
    pub slice_max: Vec<f64>,
    pub slice_min: Vec<f64>,
    /// Per-step folded jump mass times the number of steps.
    pub truncated_mass: f64,
    pub variance_error: f64,
    pub runtime_ms: f64,
    pub n_steps: usize,
    pub delta: f64,
    pub h: f64,
    pub a: u64,
    pub k_max: i64,
    pub state_bound: i64,
    pub kept: Option<SliceValues>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Order {
    Up,
    Down,
    Mixed,
}

fn order_of(values: &[f64]) -> Order {
    let up = values.windows(2).all(|w| w[1] >= w[0]);
    if up {
        return Order::Up;
    }
    if values.windows(2).all(|w| w[1] <= w[0]) {
        Order::Down
    } else {
        Order::Mixed
    }
}

/// One-step operator: steps `j_i` ascending with probabilities `p_i`, and
/// `Ψ(P(Z >= j_i))`, `Ψ(P(Z <= j_i))` precomputed.
struct Kernel<'a, D: Distortion + ?Sized> {
    psi: &'a D,
    steps: Vec<i64>,
    probs: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    linear: bool,
}

impl<'a, D: Distortion + ?Sized> Kernel<'a, D> {
    fn new(step: &StepDistribution, psi: &'a D) -> Self {
        let atoms = step.atoms();
        let steps: Vec<i64> = atoms.iter().map(|a| a.0).collect();
        let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let m = probs.len();
        let linear = psi.is_linear();
        let eval = |p: f64| {
            if linear {
                p
            } else {
                psi.value(p.clamp(0.0, 1.0))
            }
        };
        let mut upper = vec![0.0; m];
        let mut acc = 0.0;
        for i in (0..m).rev() {
            acc += probs[i];
            upper[i] = eval(acc);
        }
        let mut lower = vec![0.0; m];
        acc = 0.0;
        for i in 0..m {
            acc += probs[i];
            lower[i] = eval(acc);
        }
        Self {
            psi,
            steps,
            probs,
            upper,
            lower,
            linear,
        }
    }

    /// `v_0 + Σ_{i>=1} (v_i - v_{i-1}) Ψ(P(Z >= j_i))` for values nondecreasing in `i`.
    fn rising(&self, v: impl Fn(usize) -> f64) -> f64 {
        let mut acc = v(0);
        let mut prev = acc;
        for i in 1..self.steps.len() {
            let cur = v(i);
            acc += (cur - prev) * self.upper[i];
            prev = cur;
        }
        acc
    }

    /// `v_last + Σ_{i<last} (v_i - v_{i+1}) Ψ(P(Z <= j_i))` for values nonincreasing in `i`.
    fn falling(&self, v: impl Fn(usize) -> f64) -> f64 {
        let m = self.steps.len();
        let mut acc = v(m - 1);
        let mut next = acc;
        for i in (0..m - 1).rev() {
            let cur = v(i);
            acc += (cur - next) * self.lower[i];
            next = cur;
        }
        acc
    }

    fn general(&self, v: impl Fn(usize) -> f64) -> f64 {
        let mut pairs: Vec<(f64, f64)> = (0..self.steps.len())
            .map(|i| (v(i), self.probs[i]))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = pairs[pairs.len() - 1].0;
        let mut mass = 0.0;
        for w in pairs.windows(2) {
            mass += w[0].1;
            acc += (w[0].0 - w[1].0) * self.psi.value(mass.min(1.0));
        }
        acc
    }

    /// Values at positions `-half..=half` from next-slice values on `-next_half..=next_half`.
    fn apply(&self, next: &[f64], next_half: i64, half: i64, parallel: bool) -> Vec<f64> {
        let order = if self.linear {
            Order::Up
        } else {
            order_of(next)
        };
        let node = |k: i64| {
            let at = |i: usize| {
                let pos = (k + self.steps[i]).clamp(-next_half, next_half);
                next[(pos + next_half) as usize]
            };
            match order {
                Order::Up => self.rising(at),
                Order::Down => self.falling(at),
                Order::Mixed => {
                    let window: Vec<f64> = (0..self.steps.len()).map(at).collect();
                    match order_of(&window) {
                        Order::Up => self.rising(|i| window[i]),
                        Order::Down => self.falling(|i| window[i]),
                        Order::Mixed => self.general(|i| window[i]),
                    }
                }
            }
        };
        let count = (2 * half + 1) as usize;
        if parallel && count * self.steps.len() > 1 << 14 {
            (0..count)
                .into_par_iter()
                .map(|i| node(i as i64 - half))
                .collect()
        } else {
            (0..count).map(|i| node(i as i64 - half)).collect()
        }
    }
}

fn default_bound(model: &LevyModel, grid: &GridSpec, width_sd: f64) -> i64 {
    let sd = (grid.horizon * (model.sigma2() + model.sigma2_total())).sqrt();
    ((width_sd * sd / grid.h).ceil() as i64).max(1)
}

fn log_price(model: &LevyModel, grid: &GridSpec, m: usize, k: i64) -> f64 {
    model.drift() * grid.time(m) + grid.h * k as f64
}

fn is_hit(
    model: &LevyModel,
    grid: &GridSpec,
    spot_barrier: Option<(f64, f64)>,
    m: usize,
    k: i64,
) -> bool {
    match spot_barrier {
        Some((s0, barrier)) => s0 * log_price(model, grid, m, k).exp() >= barrier,
        None => false,
    }
}

/// Runs the recursion with a prebuilt step distribution.
pub fn value_with_step<D: Distortion + ?Sized>(
    model: &LevyModel,
    psi: &D,
    payoff: &Payoff,
    grid: &GridSpec,
    step: &StepDistribution,
    options: &ValuationOptions,
) -> Result<ValuationResult> {
    payoff.validate()?;
    let start = Instant::now();
    let n = grid.n_steps;
    let kernel = Kernel::new(step, psi);
    let reach = kernel
        .steps
        .iter()
        .map(|j| j.abs())
        .max()
        .unwrap_or(0)
        .max(1);
    let bound = options
        .state_bound
        .unwrap_or_else(|| default_bound(model, grid, options.width_sd))
        .max(1);
    let half = |m: usize| (reach.saturating_mul(m as i64)).min(bound);
    let barrier = payoff.barrier();
    let spot = payoff.spot();

    let terminal_half = half(n);
    let mut hit_layer: Vec<f64> = Vec::new();
    let mut main: Vec<f64> = Vec::with_capacity((2 * terminal_half + 1) as usize);
    for k in -terminal_half..=terminal_half {
        let x = log_price(model, grid, n, k);
        if !(spot * x.exp()).is_finite() {
            return Err(Error::Numerical(format!(
                "price overflow at terminal position {k}"
            )));
        }
        let hit = is_hit(model, grid, barrier, n, k);
        main.push(payoff.terminal(k, x, hit));
        if barrier.is_some() {
            hit_layer.push(payoff.terminal(k, x, true));
        }
    }
    let mut slice_max = vec![0.0; n + 1];
    let mut slice_min = vec![0.0; n + 1];
    let extrema = |v: &[f64]| {
        v.iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), x| {
                (a.max(*x), b.min(*x))
            })
    };
    (slice_max[n], slice_min[n]) = extrema(&main);
    let mut kept = None;
    if options.keep_slice == Some(n) {
        kept = Some(SliceValues {
            slice: n,
            half: terminal_half,
            values: main.clone(),
        });
    }
    let mut next_half = terminal_half;
    for m in (0..n).rev() {
        let cur_half = half(m);
        let effective: Vec<f64> = if barrier.is_some() {
            (0..main.len())
                .map(|i| {
                    let k = i as i64 - next_half;
                    if is_hit(model, grid, barrier, m + 1, k) {
                        hit_layer[i]
                    } else {
                        main[i]
                    }
                })
                .collect()
        } else {
            main
        };
        main = kernel.apply(&effective, next_half, cur_half, options.parallel);
        if barrier.is_some() {
            hit_layer = kernel.apply(&hit_layer, next_half, cur_half, options.parallel);
        }
        if main.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite node value at slice {m}"
            )));
        }
        (slice_max[m], slice_min[m]) = extrema(&main);
        if options.keep_slice == Some(m) {
            kept = Some(SliceValues {
                slice: m,
                half: cur_half,
                values: main.clone(),
            });
        }
        next_half = cur_half;
    }
    let value = if barrier.is_some() && is_hit(model, grid, barrier, 0, 0) {
        hit_layer[0]
    } else {
        main[0]
    };
    Ok(ValuationResult {
        value,
        slice_max,
        slice_min,
        truncated_mass: step.residual_mass * n as f64,
        variance_error: step.variance_error * n as f64,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        n_steps: n,
        delta: grid.delta,
        h: grid.h,
        a: grid.a,
        k_max: grid.k_max,
        state_bound: bound,
        kept,
    })
}

/// `Π_0` of the distorted recursion with `Ψ(·, δ)` of the choice at the grid's δ.
pub fn distorted_value(
    model: &LevyModel,
    choice: &DistortionChoice,
    payoff: &Payoff,
    grid: &GridSpec,
    options: &ValuationOptions,
) -> Result<ValuationResult> {
    let step = build_step_distribution(model, grid)?;
    value_with_step(
        model,
        &choice.member(grid.delta),
        payoff,
        grid,
        &step,
        options,
    )
}

/// Plain expectation by the same recursion (pass the tilted model for Q#).
pub fn linear_value(
    model: &LevyModel,
    payoff: &Payoff,
    grid: &GridSpec,
    options: &ValuationOptions,
) -> Result<ValuationResult> {
    let step = build_step_distribution(model, grid)?;
    value_with_step(
        model,
        &ProbabilityDistortion::Linear,
        payoff,
        grid,
        &step,
        options,
    )
}

/// Largest instance accepted by [`enumerate_paths_value`].
pub const MAX_ENUMERATION_STEPS: usize = 4;
pub const MAX_ENUMERATION_SUPPORT: usize = 7;

/// Expands the full (non-recombining) path tree and applies the one-step
/// Choquet integral at every node.
pub fn enumerate_paths_value<D: Distortion + ?Sized>(
    model: &LevyModel,
    psi: &D,
    payoff: &Payoff,
    grid: &GridSpec,
) -> Result<f64> {
    payoff.validate()?;
    let step = build_step_distribution(model, grid)?;
    let atoms = step.atoms();
    if grid.n_steps > MAX_ENUMERATION_STEPS || atoms.len() > MAX_ENUMERATION_SUPPORT {
        return Err(Error::TooLarge(format!(
            "path enumeration needs n <= {MAX_ENUMERATION_STEPS} and support <= {MAX_ENUMERATION_SUPPORT}, got n = {}, support = {}",
            grid.n_steps,
            atoms.len()
        )));
    }
    let barrier = payoff.barrier();
    struct Tree<'a, D: ?Sized> {
        model: &'a LevyModel,
        grid: &'a GridSpec,
        barrier: Option<(f64, f64)>,
        payoff: &'a Payoff,
        atoms: &'a [(i64, f64)],
        psi: &'a D,
    }
    fn node<D: Distortion + ?Sized>(m: usize, k: i64, hit: bool, ctx: &Tree<'_, D>) -> Result<f64> {
        let Tree {
            model,
            grid,
            barrier,
            payoff,
            atoms,
            psi,
        } = *ctx;
        if m == grid.n_steps {
            return Ok(payoff.terminal(k, log_price(model, grid, m, k), hit));
        }
        let mut outcomes = Vec::with_capacity(atoms.len());
        for &(j, p) in atoms {
            let next = k + j;
            let next_hit = hit || is_hit(model, grid, barrier, m + 1, next);
            outcomes.push((node(m + 1, next, next_hit, ctx)?, p));
        }
        let total: f64 = outcomes.iter().map(|o| o.1).sum();
        let dist = DiscreteDistribution::new(outcomes.into_iter().map(|(v, p)| (v, p / total)))?;
        Ok(choquet_probability(&dist, psi))
    }
    let hit0 = is_hit(model, grid, barrier, 0, 0);
    node(
        0,
        0,
        hit0,
        &Tree {
            model,
            grid,
            barrier,
            payoff,
            atoms: &atoms,
            psi,
        },
    )
}

/// One row of a convergence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub delta: f64,
    pub h: f64,
    pub a: u64,
    pub value: f64,
    pub reference: f64,
    pub gap: f64,
    pub truncated_mass: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Value(f64),
    /// The value at the largest `n` of the sweep.
    Finest,
}

/// Values over increasing step counts with gaps `|value - reference|`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep(
    model: &LevyModel,
    choice: &DistortionChoice,
    payoff: &Payoff,
    horizon: f64,
    n_list: &[usize],
    eps_trunc: f64,
    reference: Reference,
    options: &ValuationOptions,
) -> Result<Vec<SweepRow>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_list must be non-empty and strictly increasing"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let grid = GridSpec::build(model, horizon, n, eps_trunc, None)?;
        let r = distorted_value(model, choice, payoff, &grid, options)?;
        rows.push(SweepRow {
            n,
            delta: grid.delta,
            h: grid.h,
            a: grid.a,
            value: r.value,
            reference: f64::NAN,
            gap: f64::NAN,
            truncated_mass: r.truncated_mass,
            runtime_ms: r.runtime_ms,
        });
    }
    let target = match reference {
        Reference::Value(v) => v,
        Reference::Finest => rows[rows.len() - 1].value,
    };
    for row in &mut rows {
        row.reference = target;
        row.gap = (row.value - target).abs();
    }
    Ok(rows)
}

/// Candidate drift shift Δ₊ with the closed-form value it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCandidate {
    pub name: String,
    pub drift_shift: f64,
    pub closed_form: f64,
    pub relative_gap: f64,
    pub within: bool,
}

/// Which candidate Δ₊ the lattice limit supports.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftResolution {
    pub lattice_value: f64,
    pub tolerance: f64,
    pub candidates: Vec<DriftCandidate>,
}

impl DriftResolution {
    /// `candidates` holds `(name, Δ₊, closed-form value)`.
    pub fn resolve(lattice_value: f64, candidates: &[(&str, f64, f64)], tolerance: f64) -> Self {
        let candidates = candidates
            .iter()
            .map(|&(name, shift, closed)| {
                let relative_gap = (lattice_value - closed).abs() / closed.abs();
                DriftCandidate {
                    name: name.to_string(),
                    drift_shift: shift,
                    closed_form: closed,
                    relative_gap,
                    within: relative_gap <= tolerance,
                }
            })
            .collect();
        Self {
            lattice_value,
            tolerance,
            candidates,
        }
    }

    /// The unique candidate within tolerance, if exactly one is.
    pub fn chosen(&self) -> Option<&DriftCandidate> {
        let mut within = self.candidates.iter().filter(|c| c.within);
        match (within.next(), within.next()) {
            (Some(c), None) => Some(c),
            _ => None,
        }
    }

    /// The candidate with the smallest relative gap.
    pub fn closest(&self) -> Option<&DriftCandidate> {
        self.candidates
            .iter()
            .min_by(|a, b| a.relative_gap.total_cmp(&b.relative_gap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_EPS_TRUNC;
    use crate::levy::Jumps;
    use proptest::prelude::*;

    fn gbm() -> LevyModel {
        LevyModel::gbm(0.0, 0.2).unwrap()
    }

    fn mmv() -> DistortionChoice {
        DistortionChoice::Fixed(ProbabilityDistortion::minmaxvar(0.3).unwrap())
    }

    fn small_jump_model() -> LevyModel {
        LevyModel::exponential(0.0, 0.04, Jumps::tail_cgmy(0.01, 5.0, 5.0, 0.5), 1.0).unwrap()
    }

    /// A grid whose step law has five atoms: trinomial plus ±a with a = 2.
    fn five_point_grid(model: &LevyModel, n: usize) -> GridSpec {
        let mut g = GridSpec::build(model, 0.25, n, 1e-3, Some(2)).unwrap();
        g.k_max = 2;
        g
    }

    #[test]
    fn constant_payoff_is_exact() {
        let g = GridSpec::build(&gbm(), 1.0, 50, DEFAULT_EPS_TRUNC, None).unwrap();
        let r = distorted_value(
            &gbm(),
            &mmv(),
            &Payoff::Constant(3.7),
            &g,
            &ValuationOptions::default(),
        )
        .unwrap();
        assert_eq!(r.value, 3.7);
    }

    #[test]
    fn linear_call_near_closed_form() {
        let g = GridSpec::build(&gbm(), 1.0, 1000, DEFAULT_EPS_TRUNC, None).unwrap();
        let choice = DistortionChoice::Fixed(ProbabilityDistortion::Linear);
        let p = Payoff::TerminalCall {
            s0: 100.0,
            strike: 100.0,
        };
        let r = distorted_value(&gbm(), &choice, &p, &g, &ValuationOptions::default()).unwrap();
        assert!(
            (r.value - 7.965_567_455_405_796).abs() <= 0.03,
            "{}",
            r.value
        );
        let l = linear_value(&gbm(), &p, &g, &ValuationOptions::default()).unwrap();
        assert_eq!(l.value.to_bits(), r.value.to_bits());
    }

    #[test]
    fn single_step_is_choquet_of_terminal_law() {
        let m = small_jump_model();
        let g = five_point_grid(&m, 1);
        let step = build_step_distribution(&m, &g).unwrap();
        let p = Payoff::TerminalCall {
            s0: 100.0,
            strike: 95.0,
        };
        let psi = ProbabilityDistortion::minmaxvar(0.3).unwrap();
        let atoms = step.atoms();
        assert_eq!(atoms.len(), 5);
        let dist = DiscreteDistribution::new(
            atoms
                .iter()
                .map(|&(k, q)| (p.terminal(k, log_price(&m, &g, 1, k), false), q)),
        )
        .unwrap();
        let direct = choquet_probability(&dist, &psi);
        let r = value_with_step(&m, &psi, &p, &g, &step, &ValuationOptions::unbounded()).unwrap();
        assert!((r.value - direct).abs() < 1e-12);
    }

    #[test]
    fn enumeration_matches_recursion() {
        let m = small_jump_model();
        let family = DistortionChoice::Family(ScalingFamily::convex_cgmy(0.5).unwrap());
        let payoffs = [
            Payoff::TerminalCall {
                s0: 100.0,
                strike: 100.0,
            },
            Payoff::UpInDigital {
                s0: 100.0,
                barrier: 104.0,
            },
            Payoff::UpInCall {
                s0: 100.0,
                barrier: 103.0,
                strike: 98.0,
            },
            Payoff::TerminalTable([(-3, 1.0), (0, -2.0), (2, 4.0)].into_iter().collect()),
        ];
        for n in 1..=3 {
            let g = five_point_grid(&m, n);
            for p in &payoffs {
                let psi = family.member(g.delta);
                let exact = enumerate_paths_value(&m, &psi, p, &g).unwrap();
                let r =
                    distorted_value(&m, &family, p, &g, &ValuationOptions::unbounded()).unwrap();
                assert!(
                    (exact - r.value).abs() < 1e-12,
                    "n={n} {p:?}: {exact} vs {}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn enumeration_rejects_large_instances() {
        let g = GridSpec::build(&gbm(), 1.0, 5, DEFAULT_EPS_TRUNC, None).unwrap();
        let r = enumerate_paths_value(
            &gbm(),
            &ProbabilityDistortion::Linear,
            &Payoff::Constant(1.0),
            &g,
        );
        assert!(matches!(r, Err(Error::TooLarge(_))));
    }

    #[test]
    fn splice_reproduces_value() {
        let m = small_jump_model();
        let g = GridSpec::build(&m, 1.0, 40, DEFAULT_EPS_TRUNC, None).unwrap();
        let p = Payoff::TerminalCall {
            s0: 100.0,
            strike: 105.0,
        };
        let opts = ValuationOptions {
            state_bound: Some(150),
            keep_slice: Some(15),
            ..Default::default()
        };
        let full = distorted_value(&m, &mmv(), &p, &g, &opts).unwrap();
        let table = Payoff::TerminalTable(full.kept.as_ref().unwrap().to_table());
        let prefix = g.prefix(15).unwrap();
        let opts = ValuationOptions {
            state_bound: Some(150),
            ..Default::default()
        };
        let spliced = distorted_value(&m, &mmv(), &table, &prefix, &opts).unwrap();
        assert!(
            (spliced.value - full.value).abs() < 1e-12,
            "{} vs {}",
            spliced.value,
            full.value
        );
    }

    #[test]
    fn drift_resolution_picks_unique_candidate() {
        let r = DriftResolution::resolve(10.0, &[("a", 1.0, 10.02), ("b", 2.0, 11.0)], 0.005);
        assert_eq!(r.chosen().unwrap().name, "a");
        let r = DriftResolution::resolve(10.0, &[("a", 1.0, 10.02), ("b", 2.0, 9.99)], 0.005);
        assert!(r.chosen().is_none());
        assert_eq!(r.closest().unwrap().name, "b");
    }

    #[test]
    fn sweep_with_constant_payoff_has_zero_gaps() {
        let rows = convergence_sweep(
            &gbm(),
            &mmv(),
            &Payoff::Constant(2.0),
            1.0,
            &[10, 20, 40],
            DEFAULT_EPS_TRUNC,
            Reference::Value(2.0),
            &ValuationOptions::default(),
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let m = small_jump_model();
        let g = GridSpec::build(&m, 1.0, 60, DEFAULT_EPS_TRUNC, None).unwrap();
        let p = Payoff::UpInCall {
            s0: 100.0,
            barrier: 115.0,
            strike: 100.0,
        };
        let par = distorted_value(&m, &mmv(), &p, &g, &ValuationOptions::default()).unwrap();
        let ser = distorted_value(
            &m,
            &mmv(),
            &p,
            &g,
            &ValuationOptions {
                parallel: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(par.value.to_bits(), ser.value.to_bits());
    }

    fn table_payoff() -> impl Strategy<Value = Payoff> {
        prop::collection::vec(-5.0f64..5.0, 9).prop_map(|v| {
            Payoff::TerminalTable(
                v.into_iter()
                    .enumerate()
                    .map(|(i, x)| (i as i64 * 3 - 12, x))
                    .collect(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn translation_and_homogeneity(p in table_payoff(), c in 0.0f64..3.0, d in -2.0f64..2.0) {
            let m = small_jump_model();
            let g = GridSpec::build(&m, 1.0, 12, DEFAULT_EPS_TRUNC, None).unwrap();
            let o = ValuationOptions::default();
            let base = distorted_value(&m, &mmv(), &p, &g, &o).unwrap().value;
            let moved = Payoff::Affine { inner: Box::new(p), scale: c, shift: d };
            let v = distorted_value(&m, &mmv(), &moved, &g, &o).unwrap().value;
            prop_assert!((v - (c * base + d)).abs() < 1e-12);
        }

        #[test]
        fn distorted_dominates_linear_and_is_monotone(p in table_payoff(), bump in 0.0f64..1.0) {
            let m = small_jump_model();
            let g = GridSpec::build(&m, 1.0, 12, DEFAULT_EPS_TRUNC, None).unwrap();
            let o = ValuationOptions::default();
            let dist = distorted_value(&m, &mmv(), &p, &g, &o).unwrap().value;
            let lin = linear_value(&m, &p, &g, &o).unwrap().value;
            prop_assert!(dist >= lin - 1e-12);
            let higher = Payoff::Affine { inner: Box::new(p), scale: 1.0, shift: bump };
            prop_assert!(distorted_value(&m, &mmv(), &higher, &g, &o).unwrap().value >= dist);
        }
    }
}
