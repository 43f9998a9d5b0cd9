//! Choquet integrals for discrete laws and simple functions on a measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::distortion::{Distortion, DriftShift, Excess, JumpRateDistortion, MassDistortion};
use crate::error::{invalid, Error, Result};

const PROB_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-12;
/// Largest atom count accepted by [`bruteforce_sup`].
pub const MAX_BRUTEFORCE_ATOMS: usize = 12;

/// A finitely supported law with distinct values sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates, sorts and merges atoms with equal values.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!("non-finite value {v}")));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "atom probability {p} is not positive"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values = Vec::with_capacity(atoms.len());
        let mut probs: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            if values.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                values.push(v);
                probs.push(p);
            }
        }
        Ok(Self { values, probs })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new([(c, 1.0)])
    }

    /// Distinct values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * v * p)
            .sum()
    }

    /// Law of `c X + d`.
    pub fn affine(&self, c: f64, d: f64) -> Result<Self> {
        Self::new(
            self.values
                .iter()
                .zip(&self.probs)
                .map(|(v, p)| (c * v + d, *p)),
        )
    }
}

/// Choquet integral over distinct values sorted in descending order:
/// `v_n + Σ_{j<n} (v_j - v_{j+1}) Ψ(P(X >= v_j))`. The survival level of the
/// smallest value is 1 by construction.
pub fn choquet_descending<D: Distortion + ?Sized>(values: &[f64], probs: &[f64], psi: &D) -> f64 {
    let n = values.len();
    debug_assert_eq!(n, probs.len());
    if n == 0 {
        return 0.0;
    }
    if psi.is_linear() {
        return values.iter().zip(probs).map(|(v, p)| v * p).sum();
    }
    let mut acc = values[n - 1];
    let mut mass = 0.0;
    for j in 0..n - 1 {
        mass += probs[j];
        acc += (values[j] - values[j + 1]) * psi.value(mass.min(1.0));
    }
    acc
}

/// `𝒞^Ψ[X]` for a discrete law.
pub fn choquet_probability<D: Distortion + ?Sized>(dist: &DiscreteDistribution, psi: &D) -> f64 {
    let values: Vec<f64> = dist.values.iter().rev().copied().collect();
    let probs: Vec<f64> = dist.probs.iter().rev().copied().collect();
    choquet_descending(&values, &probs, psi)
}

/// A simple function given by the measure of each of its level sets.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunctionOnMeasure {
    pieces: Vec<(f64, f64)>,
}

impl StepFunctionOnMeasure {
    /// Pieces are `(mass, level)`; masses must be finite and positive.
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self> {
        for &(m, l) in &pieces {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid(format!(
                    "piece mass {m} must be finite and positive"
                )));
            }
            if !l.is_finite() {
                return Err(invalid(format!("piece level {l} is not finite")));
            }
        }
        Ok(Self { pieces })
    }

    pub fn zero() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn total_mass(&self) -> f64 {
        self.pieces.iter().map(|p| p.0).sum()
    }

    /// `u⁺`
    pub fn positive_part(&self) -> Self {
        Self {
            pieces: self.pieces.iter().copied().filter(|p| p.1 > 0.0).collect(),
        }
    }

    /// `u⁻ = max(-u, 0)`
    pub fn negative_part(&self) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .filter(|p| p.1 < 0.0)
                .map(|&(m, l)| (m, -l))
                .collect(),
        }
    }
}

/// `∫_0^∞ D(μ(u > x)) dx` for a nonnegative simple function.
pub fn choquet_measure<D: MassDistortion + ?Sized>(
    u: &StepFunctionOnMeasure,
    d: &D,
) -> Result<f64> {
    if let Some(&(_, l)) = u.pieces.iter().find(|p| p.1 < 0.0) {
        return Err(invalid(format!(
            "negative level {l} in a measure Choquet integral"
        )));
    }
    let mut pieces: Vec<(f64, f64)> = u.pieces.iter().copied().filter(|p| p.1 > 0.0).collect();
    pieces.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut acc = 0.0;
    let mut mass = 0.0;
    let mut i = 0;
    while i < pieces.len() {
        let level = pieces[i].1;
        while i < pieces.len() && pieces[i].1 == level {
            mass += pieces[i].0;
            i += 1;
        }
        let next = if i < pieces.len() { pieces[i].1 } else { 0.0 };
        acc += (level - next) * d.value(mass);
    }
    Ok(acc)
}

/// Density `φ = dm_X/dP` of the comonotone maximizer, one weight per atom
/// (atoms in ascending value order).
#[derive(Debug, Clone, PartialEq)]
pub struct MaximizingDensity {
    pub weights: Vec<f64>,
}

impl MaximizingDensity {
    /// `m_X` as a probability vector aligned with the atoms.
    pub fn measure(&self, dist: &DiscreteDistribution) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&dist.probs)
            .map(|(w, p)| w * p)
            .collect()
    }

    /// `m_X[X]`
    pub fn expectation(&self, dist: &DiscreteDistribution) -> f64 {
        self.measure(dist)
            .iter()
            .zip(&dist.values)
            .map(|(q, v)| q * v)
            .sum()
    }

    pub fn total_mass(&self, dist: &DiscreteDistribution) -> f64 {
        self.measure(dist).iter().sum()
    }
}

/// `φ(x) = [Ψ(P(X >= x)) - Ψ(P(X > x))] / P(X = x)` on each atom.
pub fn maximizing_density<D: Distortion + ?Sized>(
    dist: &DiscreteDistribution,
    psi: &D,
) -> MaximizingDensity {
    let n = dist.len();
    let mut weights = vec![0.0; n];
    let mut above = 0.0;
    let mut psi_above = 0.0;
    for i in (0..n).rev() {
        let at_or_above = if i == 0 {
            1.0
        } else {
            (above + dist.probs[i]).min(1.0)
        };
        let psi_at = if i == 0 { 1.0 } else { psi.value(at_or_above) };
        weights[i] = (psi_at - psi_above) / dist.probs[i];
        above = at_or_above;
        psi_above = psi_at;
    }
    MaximizingDensity { weights }
}

/// Outcome of the brute-force supremum search.
#[derive(Debug, Clone, PartialEq)]
pub struct SupReport {
    /// Best value over all feasible candidates, the comonotone one included.
    pub value: f64,
    /// Value at the comonotone maximizer.
    pub comonotone: f64,
    /// Best value among random feasible candidates.
    pub best_sample: f64,
    /// Number of random candidates evaluated.
    pub samples: usize,
}

struct Capacity {
    n: usize,
    bound: Vec<f64>,
}

impl Capacity {
    fn new<D: Distortion + ?Sized>(dist: &DiscreteDistribution, psi: &D) -> Self {
        let n = dist.len();
        let mut mass = vec![0.0; 1 << n];
        for mask in 1usize..1 << n {
            let low = mask.trailing_zeros() as usize;
            mass[mask] = mass[mask & (mask - 1)] + dist.probs[low];
        }
        let full = (1 << n) - 1;
        let bound = (0..1usize << n)
            .map(|m| {
                if m == full {
                    1.0
                } else {
                    psi.value(mass[m].min(1.0))
                }
            })
            .collect();
        Self { n, bound }
    }

    fn feasible(&self, q: &[f64]) -> bool {
        let mut sums = vec![0.0; 1 << self.n];
        for mask in 1usize..1 << self.n {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + q[low];
            if sums[mask] > self.bound[mask] + FEASIBILITY_TOL {
                return false;
            }
        }
        true
    }
}

fn mix(q: &[f64], target: &[f64], t: f64) -> Vec<f64> {
    q.iter()
        .zip(target)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect()
}

/// Shrinks `q` toward the feasible point `target` until every subset
/// constraint holds (bisection on the mixing weight).
fn project(cap: &Capacity, q: Vec<f64>, target: &[f64]) -> Vec<f64> {
    if cap.feasible(&q) {
        return q;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cap.feasible(&mix(&q, target, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    mix(&q, target, hi)
}

/// Maximises `Σ q_i v_i` over sampled probability vectors with
/// `q(A) <= Ψ(P(A))` for every union of atoms `A`. Candidates are the
/// comonotone maximizer, Dirichlet draws and perturbations of the maximizer,
/// each shrunk toward the maximizer until feasible.
pub fn bruteforce_sup<D: Distortion + ?Sized>(
    dist: &DiscreteDistribution,
    psi: &D,
    trials: usize,
    seed: u64,
) -> Result<SupReport> {
    let n = dist.len();
    if n > MAX_BRUTEFORCE_ATOMS {
        return Err(Error::TooLarge(format!(
            "bruteforce_sup needs at most {MAX_BRUTEFORCE_ATOMS} atoms, got {n}"
        )));
    }
    let cap = Capacity::new(dist, psi);
    let star = maximizing_density(dist, psi).measure(dist);
    let score = |q: &[f64]| q.iter().zip(&dist.values).map(|(a, v)| a * v).sum::<f64>();
    let comonotone = score(&star);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_sample = f64::NEG_INFINITY;
    for trial in 0..trials {
        let raw: Vec<f64> = if trial % 2 == 0 {
            (0..n).map(|_| Exp1.sample(&mut rng)).collect()
        } else {
            let scale: f64 = rng.random_range(1e-4..0.5);
            star.iter()
                .map(|s| (s + scale * (rng.random::<f64>() - 0.5)).max(0.0))
                .collect()
        };
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let q = project(&cap, q, &star);
        best_sample = best_sample.max(score(&q));
    }
    Ok(SupReport {
        value: comonotone.max(best_sample),
        comonotone,
        best_sample,
        samples: trials,
    })
}

/// Checks `m(A) <= Ψ(P(A))` for every union of atoms (`n <= 12`).
pub fn is_feasible<D: Distortion + ?Sized>(
    dist: &DiscreteDistribution,
    psi: &D,
    q: &[f64],
) -> Result<bool> {
    if dist.len() > MAX_BRUTEFORCE_ATOMS {
        return Err(Error::TooLarge(format!(
            "subset check needs at most {MAX_BRUTEFORCE_ATOMS} atoms"
        )));
    }
    if q.len() != dist.len() {
        return Err(invalid("measure and distribution sizes differ"));
    }
    Ok(Capacity::new(dist, psi).feasible(q))
}

/// `g(h, u) = h⁺Δ₊σ² + h⁻Δ₋σ² + 𝒞^{Γ₊-id}(u⁺) + 𝒞^{id-Γ₋}(u⁻)`.
pub fn driver_g(
    h: f64,
    u: &StepFunctionOnMeasure,
    drift: &DriftShift,
    gamma: &JumpRateDistortion,
    sigma2: f64,
) -> Result<f64> {
    gamma.plus.validate()?;
    gamma.minus.validate()?;
    if !(sigma2 >= 0.0) {
        return Err(invalid(format!("variance rate must be >= 0, got {sigma2}")));
    }
    let drift_term = h.max(0.0) * drift.plus * sigma2 + (-h).max(0.0) * drift.minus * sigma2;
    let up = choquet_measure(&u.positive_part(), &Excess(&gamma.plus))?;
    let down = choquet_measure(&u.negative_part(), &Excess(&gamma.minus))?;
    Ok(drift_term + up + down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::{
        kd_probability, MeasureDistortion, PowerLaw, ProbabilityDistortion, Side,
    };
    use proptest::prelude::*;

    const PSI_HALF: f64 = 0.914_213_562_373_095_1;

    fn mmv1() -> ProbabilityDistortion {
        ProbabilityDistortion::minmaxvar(1.0).unwrap()
    }

    #[test]
    fn constants_and_linear() {
        let c = DiscreteDistribution::constant(3.25).unwrap();
        assert_eq!(choquet_probability(&c, &mmv1()), 3.25);
        let d = DiscreteDistribution::new([(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)])
            .unwrap();
        let v = choquet_probability(&d, &ProbabilityDistortion::Linear);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_minmaxvar() {
        let d = DiscreteDistribution::new([(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!((choquet_probability(&d, &mmv1()) - PSI_HALF).abs() < 1e-15);
        let phi = maximizing_density(&d, &mmv1());
        assert!((phi.weights[1] - 2.0 * PSI_HALF).abs() < 1e-14);
        assert!((phi.weights[0] - 2.0 * (1.0 - PSI_HALF)).abs() < 1e-14);
        let sup = bruteforce_sup(&d, &mmv1(), 10_000, 7).unwrap();
        assert!((sup.value - PSI_HALF).abs() < 1e-9);
        assert!(sup.best_sample <= PSI_HALF + 1e-12);
    }

    #[test]
    fn merging_and_validation() {
        let d = DiscreteDistribution::new([(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(d.values(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
        assert!(DiscreteDistribution::new([(0.0, 0.5)]).is_err());
        assert!(DiscreteDistribution::new([(0.0, 1.5), (1.0, -0.5)]).is_err());
        assert!(DiscreteDistribution::new([(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn measure_choquet_examples() {
        let d = PowerLaw {
            coef: 0.5,
            exponent: 2.0 / 3.0,
        };
        assert_eq!(
            choquet_measure(&StepFunctionOnMeasure::zero(), &d).unwrap(),
            0.0
        );
        let u = StepFunctionOnMeasure::new(vec![(2.0, 3.0)]).unwrap();
        assert!((choquet_measure(&u, &d).unwrap() - 2.381_101_577_952_299).abs() < 1e-12);
        let id = MeasureDistortion::identity(Side::Upper);
        let u = StepFunctionOnMeasure::new(vec![(1.0, 2.0), (3.0, 1.0)]).unwrap();
        assert!((choquet_measure(&u, &id).unwrap() - 5.0).abs() < 1e-15);
        let neg = StepFunctionOnMeasure::new(vec![(1.0, -1.0)]).unwrap();
        assert!(choquet_measure(&neg, &id).is_err());
    }

    #[test]
    fn driver_examples() {
        let drift = DriftShift::new(2.0, 3.0).unwrap();
        let gamma = JumpRateDistortion::identity();
        let zero = StepFunctionOnMeasure::zero();
        assert_eq!(driver_g(0.0, &zero, &drift, &gamma, 0.04).unwrap(), 0.0);
        assert!((driver_g(1.0, &zero, &drift, &gamma, 0.04).unwrap() - 0.08).abs() < 1e-15);
        let u = StepFunctionOnMeasure::new(vec![(1.0, -1.0)]).unwrap();
        assert!((driver_g(-1.0, &u, &drift, &gamma, 0.04).unwrap() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn bruteforce_rejects_large_instances() {
        let atoms: Vec<(f64, f64)> = (0..13).map(|i| (i as f64, 1.0 / 13.0)).collect();
        let d = DiscreteDistribution::new(atoms).unwrap();
        assert!(matches!(
            bruteforce_sup(&d, &mmv1(), 1, 0),
            Err(Error::TooLarge(_))
        ));
    }

    fn families() -> Vec<ProbabilityDistortion> {
        vec![
            ProbabilityDistortion::minmaxvar(0.7).unwrap(),
            ProbabilityDistortion::exponential(0.9).unwrap(),
            ProbabilityDistortion::piecewise_linear(vec![(0.0, 0.0), (0.2, 0.5), (1.0, 1.0)])
                .unwrap(),
        ]
    }

    fn dist_strategy() -> impl Strategy<Value = DiscreteDistribution> {
        prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..7).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let mut atoms: Vec<(f64, f64)> =
                atoms.into_iter().map(|(v, p)| (v, p / total)).collect();
            let head: f64 = atoms[1..].iter().map(|a| a.1).sum();
            atoms[0].1 = 1.0 - head;
            DiscreteDistribution::new(atoms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn maximizer_attains_and_is_feasible(d in dist_strategy()) {
            for psi in families() {
                let phi = maximizing_density(&d, &psi);
                prop_assert!((phi.expectation(&d) - choquet_probability(&d, &psi)).abs() < 1e-12);
                prop_assert!((phi.total_mass(&d) - 1.0).abs() < 1e-12);
                prop_assert!(is_feasible(&d, &psi, &phi.measure(&d)).unwrap());
            }
        }

        #[test]
        fn translation_and_homogeneity(d in dist_strategy(), c in 0.0f64..4.0, s in -3.0f64..3.0) {
            for psi in families() {
                let base = choquet_probability(&d, &psi);
                let moved = choquet_probability(&d.affine(c, s).unwrap(), &psi);
                prop_assert!((moved - (c * base + s)).abs() < 1e-12);
            }
        }

        #[test]
        fn linear_is_expectation(d in dist_strategy()) {
            prop_assert!((choquet_probability(&d, &ProbabilityDistortion::Linear) - d.mean()).abs() < 1e-14);
        }

        #[test]
        fn lipschitz_bound(d in dist_strategy()) {
            let d = d.affine(1.0, 5.0).unwrap();
            for psi in families() {
                let k = kd_probability(&psi);
                if k.is_finite() {
                    prop_assert!(choquet_probability(&d, &psi) <= k * d.second_moment().sqrt());
                }
            }
        }

        #[test]
        fn dominates_expectation(d in dist_strategy()) {
            for psi in families() {
                prop_assert!(choquet_probability(&d, &psi) >= d.mean() - 1e-12);
            }
        }
    }
}
