//! Two finite-activity subordinators driven by one Poisson clock.
//!
//! With `C = max(ν¹(ℝ₊), ν²(ℝ₊))`, every arrival draws one uniform `U` and
//! process `i` jumps by `inf{x >= 0 : ν̄ⁱ(x) <= C(1 - U)}`. The gap
//! `C - νⁱ(ℝ₊)` becomes an atom at zero. Ordered tails give ordered jumps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Finite jump measure on `(0, ∞)`, described by its tail `ν̄(x) = ν((x, ∞))`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMeasure {
    /// `ν̄(x) = mass · e^{-rate·x}`
    ScaledExponential { rate: f64, mass: f64 },
    /// Knots `(x, ν̄(x))` starting at `x = 0`, nonincreasing in `ν̄`,
    /// linear in between and zero past the last knot.
    Tabulated { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorSpec {
    pub measure: JumpMeasure,
}

const INVERSE_TOL: f64 = 1e-12;

impl SubordinatorSpec {
    pub fn exponential(rate: f64, mass: f64) -> Result<Self> {
        let s = Self {
            measure: JumpMeasure::ScaledExponential { rate, mass },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        let s = Self {
            measure: JumpMeasure::Tabulated { knots },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn zero() -> Self {
        Self {
            measure: JumpMeasure::ScaledExponential {
                rate: 1.0,
                mass: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.measure {
            JumpMeasure::ScaledExponential { rate, mass } => {
                if !(*rate > 0.0 && rate.is_finite() && *mass >= 0.0 && mass.is_finite()) {
                    return Err(invalid(format!("exponential jump measure needs rate > 0 and finite mass >= 0, got {rate}, {mass}")));
                }
            }
            JumpMeasure::Tabulated { knots } => {
                if knots.is_empty() || knots[0].0 != 0.0 {
                    return Err(invalid("tabulated jump tail must start at x = 0"));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) || w[1].1 > w[0].1 {
                        return Err(invalid(
                            "tabulated jump tail needs increasing x and nonincreasing tail",
                        ));
                    }
                }
                if knots
                    .iter()
                    .any(|k| !(k.0.is_finite() && k.1.is_finite() && k.1 >= 0.0))
                {
                    return Err(invalid(
                        "tabulated jump tail needs finite, nonnegative values",
                    ));
                }
            }
        }
        Ok(())
    }

    /// `ν(ℝ₊)`
    pub fn total_mass(&self) -> f64 {
        match &self.measure {
            JumpMeasure::ScaledExponential { mass, .. } => *mass,
            JumpMeasure::Tabulated { knots } => knots[0].1,
        }
    }

    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.total_mass();
        }
        match &self.measure {
            JumpMeasure::ScaledExponential { rate, mass } => mass * (-rate * x).exp(),
            JumpMeasure::Tabulated { knots } => {
                let i = knots.partition_point(|k| k.0 <= x);
                if i == knots.len() {
                    return 0.0;
                }
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// `∫ x^k ν(dx)` for `k = 1, 2`, i.e. `∫ k x^{k-1} ν̄(x) dx`.
    fn moment(&self, k: u32) -> f64 {
        match &self.measure {
            JumpMeasure::ScaledExponential { rate, mass } => {
                if k == 1 {
                    mass / rate
                } else {
                    2.0 * mass / (rate * rate)
                }
            }
            JumpMeasure::Tabulated { knots } => {
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let (x0, y0) = w[0];
                    let (x1, y1) = w[1];
                    let slope = (y1 - y0) / (x1 - x0);
                    // antiderivative of k x^{k-1} (y0 + slope (x - x0))
                    let f = |x: f64| {
                        let lin = y0 - slope * x0;
                        if k == 1 {
                            lin * x + 0.5 * slope * x * x
                        } else {
                            lin * x * x + 2.0 / 3.0 * slope * x * x * x
                        }
                    };
                    acc += f(x1) - f(x0);
                }
                acc
            }
        }
    }

    /// `E[Z_T] = T ∫ x ν(dx)`
    pub fn mean(&self, horizon: f64) -> f64 {
        horizon * self.moment(1)
    }

    /// `Var[Z_T] = T ∫ x² ν(dx)`
    pub fn variance(&self, horizon: f64) -> f64 {
        horizon * self.moment(2)
    }

    /// Right-inverse of `F(x) = (C - ν̄(x)) / C` on `[0, ∞)`.
    pub fn inverse(&self, u: f64, clock: f64) -> f64 {
        let level = clock * (1.0 - u);
        if level >= self.total_mass() {
            return 0.0;
        }
        match &self.measure {
            JumpMeasure::ScaledExponential { rate, mass } => {
                if level <= 0.0 {
                    return f64::INFINITY;
                }
                (mass / level).ln() / rate
            }
            JumpMeasure::Tabulated { knots } => {
                let (mut lo, mut hi) = (0.0, knots[knots.len() - 1].0);
                if self.tail(hi) > level {
                    return hi;
                }
                while hi - lo > INVERSE_TOL * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if self.tail(mid) <= level {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    fn support_scale(&self) -> f64 {
        match &self.measure {
            JumpMeasure::ScaledExponential { rate, .. } => 50.0 / rate,
            JumpMeasure::Tabulated { knots } => knots[knots.len() - 1].0,
        }
    }
}

/// Checks `ν̄¹ >= ν̄²` on a grid covering both supports and all knots.
pub fn check_domination(first: &SubordinatorSpec, second: &SubordinatorSpec) -> Result<()> {
    let top = first.support_scale().max(second.support_scale());
    let mut xs: Vec<f64> = (0..=2000).map(|i| top * i as f64 / 2000.0).collect();
    for s in [first, second] {
        if let JumpMeasure::Tabulated { knots } = &s.measure {
            for k in knots {
                xs.extend([k.0, k.0 * (1.0 + 1e-9) + 1e-12]);
            }
        }
    }
    for x in xs {
        let (a, b) = (first.tail(x), second.tail(x));
        if a < b * (1.0 - 1e-12) - 1e-15 {
            return Err(Error::Infeasible {
                condition: "tail domination",
                detail: format!("first tail {a} < second tail {b} at x = {x}"),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    pub horizon: f64,
    pub clock_rate: f64,
    /// `(Z¹_T, Z²_T)` per path.
    pub terminal: Vec<(f64, f64)>,
    /// `Z¹_t >= Z²_t` at every arrival of the path.
    pub dominated: Vec<bool>,
    pub jump_counts: Vec<u64>,
}

impl CoupledPaths {
    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }

    pub fn domination_rate(&self) -> f64 {
        self.dominated.iter().filter(|d| **d).count() as f64 / self.len().max(1) as f64
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

pub fn couple_subordinators(
    first: &SubordinatorSpec,
    second: &SubordinatorSpec,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CoupledPaths> {
    first.validate()?;
    second.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) || n_paths == 0 {
        return Err(invalid(
            "coupling needs a positive horizon and at least one path",
        ));
    }
    check_domination(first, second)?;
    let clock = first.total_mass().max(second.total_mass());
    let intensity = clock * horizon;
    let poisson = if intensity > 0.0 {
        Some(Poisson::new(intensity).map_err(|e| Error::Numerical(e.to_string()))?)
    } else {
        None
    };
    let rows: Vec<((f64, f64), bool, u64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let count = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
            let (mut z1, mut z2, mut ordered) = (0.0, 0.0, true);
            for _ in 0..count {
                let u: f64 = rng.random();
                z1 += first.inverse(u, clock);
                z2 += second.inverse(u, clock);
                ordered &= z1 >= z2;
            }
            ((z1, z2), ordered, count)
        })
        .collect();
    let mut out = CoupledPaths {
        horizon,
        clock_rate: clock,
        terminal: Vec::with_capacity(n_paths),
        dominated: Vec::with_capacity(n_paths),
        jump_counts: Vec::with_capacity(n_paths),
    };
    for (t, d, c) in rows {
        out.terminal.push(t);
        out.dominated.push(d);
        out.jump_counts.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalReport {
    pub paths: usize,
    pub mean: f64,
    pub mean_target: f64,
    pub mean_z: f64,
    pub variance: f64,
    pub variance_target: f64,
    pub variance_z: f64,
    pub passed: bool,
}

/// Two-sided 3σ z-tests of the sample mean and variance of one component.
pub fn marginal_check(
    paths: &CoupledPaths,
    component: Component,
    spec: &SubordinatorSpec,
) -> MarginalReport {
    let xs: Vec<f64> = paths
        .terminal
        .iter()
        .map(|t| {
            if component == Component::First {
                t.0
            } else {
                t.1
            }
        })
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0).max(1.0);
    let mean_target = spec.mean(paths.horizon);
    let variance_target = spec.variance(paths.horizon);
    let z = |gap: f64, se: f64| {
        if se > 0.0 {
            gap / se
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let mean_z = z(mean - mean_target, (variance / n).sqrt());
    let variance_z = z(
        variance - variance_target,
        ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    );
    MarginalReport {
        paths: xs.len(),
        mean,
        mean_target,
        mean_z,
        variance,
        variance_target,
        variance_z,
        passed: mean_z.abs() <= 3.0 && variance_z.abs() <= 3.0,
    }
}
