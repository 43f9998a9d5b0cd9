//! Self-check suite: one fast instance of each module invariant.
#![allow(clippy::redundant_closure_call)]

use crate::choquet::{
    bruteforce_sup, choquet_probability, maximizing_density, DiscreteDistribution,
};
use crate::closedform::{gbm_call, gbm_upin_digital_reflection, GbmSpec};
use crate::coupling::{couple_subordinators, SubordinatorSpec};
use crate::distortion::{check_shape, Distortion, ProbabilityDistortion, ScalingFamily};
use crate::lattice::{build_step_distribution, validate_conditions, GridSpec, DEFAULT_EPS_TRUNC};
use crate::levy::{tail_cgmy_sigma2, tail_cgmy_tilted_tail, Jumps, LevyModel};
use crate::quad::integrate_to_infinity;
use crate::valuation::{
    distorted_value, enumerate_paths_value, linear_value, DistortionChoice, Payoff,
    ValuationOptions,
};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub property: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(
    module: &'static str,
    property: &'static str,
    r: Result<(bool, String)>,
) -> CheckOutcome {
    let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        module,
        property,
        passed,
        detail,
    }
}

fn families() -> Result<Vec<ProbabilityDistortion>> {
    Ok(vec![
        ProbabilityDistortion::minmaxvar(0.4)?,
        ProbabilityDistortion::exponential(0.9)?,
        ProbabilityDistortion::piecewise_linear(vec![(0.0, 0.0), (0.3, 0.6), (1.0, 1.0)])?,
    ])
}

fn distribution(seed: u64) -> Result<DiscreteDistribution> {
    // small deterministic generator; the suite must not depend on a seed flag
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64)
    };
    let n = 2 + (seed % 5) as usize;
    let atoms: Vec<(f64, f64)> = (0..n)
        .map(|_| (4.0 * next() - 2.0, 0.05 + next()))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    DiscreteDistribution::new(atoms.into_iter().map(|(v, p)| (v, p / total)))
}

fn jump_model() -> Result<LevyModel> {
    LevyModel::exponential(0.0, 0.04, Jumps::tail_cgmy(0.01, 5.0, 5.0, 0.5), 1.0)
}

pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    out.push(outcome(
        "distortion",
        "shape of standard distortions",
        (|| {
            for d in families()? {
                check_shape(&d, "family")?;
            }
            check_shape(&ScalingFamily::convex_cgmy(0.5)?.at(0.01), "convex cgmy")?;
            Ok((true, "concave, increasing, fixes 0 and 1".into()))
        })(),
    ));

    out.push(outcome(
        "distortion",
        "dual is an involution",
        (|| {
            let d = ProbabilityDistortion::minmaxvar(1.0)?;
            let worst = (0..=100)
                .map(|i| i as f64 / 100.0)
                .map(|p| {
                    (1.0 - d.dual_value(1.0 - p) - d.value(p))
                        .abs()
                        .max((d.dual_value(p) - 1.0 + d.value(1.0 - p)).abs())
                })
                .fold(0.0, f64::max);
            Ok((worst < 1e-12, format!("max deviation {worst:e}")))
        })(),
    ));

    out.push(outcome(
        "choquet",
        "representation as supremum",
        (|| {
            let mut worst = 0.0f64;
            for (i, psi) in families()?.iter().enumerate() {
                for seed in 0..5 {
                    let dist = distribution(seed + 10 * i as u64)?;
                    let c = choquet_probability(&dist, psi);
                    let r = bruteforce_sup(&dist, psi, 2000, seed)?;
                    if r.best_sample > c + 1e-10 {
                        return Ok((false, format!("sample {} exceeds {c}", r.best_sample)));
                    }
                    worst = worst.max((r.value - c).abs());
                    worst =
                        worst.max((maximizing_density(&dist, psi).expectation(&dist) - c).abs());
                }
            }
            Ok((worst < 1e-9, format!("max gap {worst:e}")))
        })(),
    ));

    out.push(outcome(
        "choquet",
        "linear distortion gives the mean",
        (|| {
            let dist = distribution(3)?;
            let gap =
                (choquet_probability(&dist, &ProbabilityDistortion::Linear) - dist.mean()).abs();
            Ok((gap < 1e-14, format!("gap {gap:e}")))
        })(),
    ));

    out.push(outcome(
        "levy",
        "tail-CGMY total variance closed form",
        (|| {
            let (c, g, m, y) = (1.0, 5.0, 5.0, 0.5);
            let density = |x: f64| x * x * c * ((y + m * x) / x.powf(1.0 + y)) * (-m * x).exp();
            let q = 2.0 * integrate_to_infinity(density, 0.0, 1e-13, 1e-13).value;
            let gap = (q - tail_cgmy_sigma2(c, g, m, y)).abs();
            Ok((gap < 1e-8, format!("gap {gap:e}")))
        })(),
    ));

    out.push(outcome(
        "levy",
        "tilted tail formula",
        (|| {
            let (c, m, y, gm) = (1.0, 5.0, 0.5, 0.5);
            let worst = (1..=500)
                .map(|i| i as f64 * 0.01)
                .map(|x| {
                    let base = c * (-m * x).exp() / x.powf(y);
                    let composed = base + gm * base.powf(1.0 / (1.0 + gm));
                    (composed - tail_cgmy_tilted_tail(c, m, y, gm, x)).abs()
                })
                .fold(0.0, f64::max);
            Ok((worst < 1e-12, format!("max gap {worst:e}")))
        })(),
    ));

    out.push(outcome(
        "lattice",
        "Brownian trinomial probabilities",
        (|| {
            let m = LevyModel::gbm(0.0, 0.2)?;
            let g = GridSpec::build(&m, 1.0, 100, DEFAULT_EPS_TRUNC, None)?;
            let s = build_step_distribution(&m, &g)?;
            let ok = s.prob(1) == 1.0 / 6.0 && s.prob(-1) == 1.0 / 6.0 && s.prob(0) == 2.0 / 3.0;
            Ok((
                ok,
                format!(
                    "p(-1), p(0), p(1) = {}, {}, {}",
                    s.prob(-1),
                    s.prob(0),
                    s.prob(1)
                ),
            ))
        })(),
    ));

    out.push(outcome(
        "lattice",
        "bound chain |beta|/h <= gamma/h^2 <= alpha <= 1",
        (|| {
            let m = jump_model()?;
            for n in [100, 400, 1600] {
                let g = GridSpec::build(&m, 1.0, n, DEFAULT_EPS_TRUNC, None)?;
                let s = build_step_distribution(&m, &g)?;
                let (b, gm) = (s.beta.abs() / s.h, s.gamma / (s.h * s.h));
                if !(b <= gm + 1e-15 && gm <= s.alpha + 1e-15 && s.alpha <= 1.0) {
                    return Ok((false, format!("n = {n}: {b}, {gm}, {}", s.alpha)));
                }
                if !validate_conditions(&m, &g).all_passed() {
                    return Ok((false, format!("n = {n}: conditions fail")));
                }
            }
            Ok((true, "n = 100, 400, 1600".into()))
        })(),
    ));

    out.push(outcome(
        "closedform",
        "call bounds and digital range",
        (|| {
            let spec = GbmSpec::new(100.0, 0.0, 0.2, 1.0, 0.5)?;
            let c = gbm_call(&spec, 100.0)?;
            let d = gbm_upin_digital_reflection(&spec, 120.0);
            let ok = c > 0.0 && c < 100.0 && (0.0..=1.0).contains(&d);
            Ok((ok, format!("call {c}, digital {d}")))
        })(),
    ));

    out.push(outcome(
        "valuation",
        "path enumeration equals recursion",
        (|| {
            let m = jump_model()?;
            let mut g = GridSpec::build(&m, 0.25, 3, 1e-3, Some(2))?;
            g.k_max = 2;
            let fam = DistortionChoice::Family(ScalingFamily::convex_cgmy(0.5)?);
            let p = Payoff::UpInCall {
                s0: 100.0,
                barrier: 103.0,
                strike: 98.0,
            };
            let exact = enumerate_paths_value(&m, &fam.member(g.delta), &p, &g)?;
            let r = distorted_value(&m, &fam, &p, &g, &ValuationOptions::unbounded())?;
            let gap = (exact - r.value).abs();
            Ok((gap < 1e-12, format!("gap {gap:e}")))
        })(),
    ));

    out.push(outcome(
        "valuation",
        "constants, translation and dominance over linear",
        (|| {
            let m = jump_model()?;
            let g = GridSpec::build(&m, 1.0, 50, DEFAULT_EPS_TRUNC, None)?;
            let fam = DistortionChoice::Fixed(ProbabilityDistortion::minmaxvar(0.3)?);
            let o = ValuationOptions::default();
            let c = distorted_value(&m, &fam, &Payoff::Constant(2.5), &g, &o)?.value;
            let call = Payoff::TerminalCall {
                s0: 100.0,
                strike: 100.0,
            };
            let base = distorted_value(&m, &fam, &call, &g, &o)?.value;
            let moved = Payoff::Affine {
                inner: Box::new(call.clone()),
                scale: 2.0,
                shift: -1.0,
            };
            let shifted = distorted_value(&m, &fam, &moved, &g, &o)?.value;
            let lin = linear_value(&m, &call, &g, &o)?.value;
            let ok = c == 2.5 && (shifted - (2.0 * base - 1.0)).abs() < 1e-12 && base >= lin;
            Ok((ok, format!("constant {c}, distorted {base}, linear {lin}")))
        })(),
    ));

    out.push(outcome(
        "coupling",
        "pathwise domination and determinism",
        (|| {
            let a = SubordinatorSpec::exponential(1.0, 2.0)?;
            let b = SubordinatorSpec::exponential(2.0, 1.0)?;
            let x = couple_subordinators(&a, &b, 1.0, 2000, 42)?;
            let y = couple_subordinators(&a, &b, 1.0, 2000, 42)?;
            let ok = x.domination_rate() == 1.0 && x == y;
            Ok((ok, format!("domination rate {}", x.domination_rate())))
        })(),
    ));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all() {
            assert!(c.passed, "{} / {}: {}", c.module, c.property, c.detail);
        }
    }
}
