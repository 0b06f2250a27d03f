//! a_theta-valued twisted transverse cycles on finite laminations.
//!
//! On a finite multicurve a twisted cycle is exactly one a_theta weight per
//! curve (for its chosen orientation); crossing against the orientation
//! contributes the opposition involution of the weight.  Supplied leaf
//! prefixes of infinite laminations carry explicit per-leaf weights with the
//! same twist rule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lamination::{ChainCrossing, MultiCurve, SeparationChain};
use crate::liealg::{CartanVector, RootSubset};
use crate::{Error, Result};

/// Membership tolerance for a_theta.
pub const A_THETA_TOL: f64 = 1e-12;

/// An a_theta-valued twisted transverse cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwistedCycle {
    pub theta: RootSubset,
    /// Weight per curve id, for the curve's chosen orientation.
    pub weights: BTreeMap<String, CartanVector>,
    /// Weights for explicitly supplied leaves (spiraling prefixes), indexed
    /// by position in the supplied leaf list.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leaf_weights: Vec<CartanVector>,
}

impl TwistedCycle {
    pub fn new(theta: RootSubset, weights: BTreeMap<String, CartanVector>) -> Result<Self> {
        let cycle = Self {
            theta,
            weights,
            leaf_weights: Vec::new(),
        };
        cycle.validate()?;
        Ok(cycle)
    }

    pub fn zero(theta: RootSubset) -> Self {
        Self {
            theta,
            weights: BTreeMap::new(),
            leaf_weights: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.weights.values().chain(self.leaf_weights.iter()) {
            if w.dim() != self.theta.n() {
                return Err(Error::Invalid("weight dimension mismatch".into()));
            }
            let violation = (1..w.dim())
                .filter(|i| !self.theta.contains(*i))
                .map(|i| w.simple_root(i).abs())
                .fold(0.0, f64::max);
            if violation > A_THETA_TOL {
                return Err(Error::WeightOutsideATheta(violation));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.weights.values().all(|w| w.is_zero())
            && self.leaf_weights.iter().all(|w| w.is_zero())
    }

    /// Weight contributed by one crossing: the curve weight when the arc
    /// induces the chosen orientation, its opposition image otherwise.
    pub fn crossing_value(
        &self,
        crossing: &ChainCrossing,
        curves: &MultiCurve,
    ) -> Result<CartanVector> {
        let id = &curves.curves[crossing.leaf.curve].id;
        let w = self
            .weights
            .get(id)
            .ok_or_else(|| Error::MissingWeight(id.clone()))?;
        Ok(if crossing.sign >= 0 {
            w.clone()
        } else {
            w.opposition()
        })
    }

    /// Value on the oriented arc underlying a chain.
    pub fn evaluate_arc(
        &self,
        chain: &SeparationChain,
        curves: &MultiCurve,
    ) -> Result<CartanVector> {
        let mut total = CartanVector::zero(self.theta.n());
        for c in &chain.crossings {
            total = total.add(&self.crossing_value(c, curves)?);
        }
        Ok(total)
    }

    /// Prefix values `eps(P, R_i)` for i = 1..=M; the final entry is
    /// `eps(P, Q)`.  Empty for an empty chain.
    pub fn prefix_values(
        &self,
        chain: &SeparationChain,
        curves: &MultiCurve,
    ) -> Result<Vec<CartanVector>> {
        let mut out = Vec::with_capacity(chain.len());
        let mut acc = CartanVector::zero(self.theta.n());
        for c in &chain.crossings {
            acc = acc.add(&self.crossing_value(c, curves)?);
            out.push(acc.clone());
        }
        Ok(out)
    }

    /// Sup norm over curves and both orientations of the a-norm of the
    /// weights.
    pub fn norm(&self) -> f64 {
        self.weights
            .values()
            .chain(self.leaf_weights.iter())
            .map(|w| w.a_norm().max(w.opposition().a_norm()))
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            theta: self.theta.clone(),
            weights: self
                .weights
                .iter()
                .map(|(k, w)| (k.clone(), w.scale(t)))
                .collect(),
            leaf_weights: self.leaf_weights.iter().map(|w| w.scale(t)).collect(),
        }
    }

    /// Weight-wise sum; both cycles must have the same type.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.theta != other.theta {
            return Err(Error::Invalid("cycle theta mismatch".into()));
        }
        let mut weights = self.weights.clone();
        for (k, w) in &other.weights {
            let entry = weights
                .entry(k.clone())
                .or_insert_with(|| CartanVector::zero(w.dim()));
            *entry = entry.add(w);
        }
        Ok(Self {
            theta: self.theta.clone(),
            weights,
            leaf_weights: Vec::new(),
        })
    }

    /// Linear image under a map of Cartan vectors, e.g. the a-level map of a
    /// group homomorphism.
    pub fn map_weights(
        &self,
        theta: RootSubset,
        f: impl Fn(&CartanVector) -> CartanVector,
    ) -> Result<Self> {
        Self::new(
            theta,
            self.weights
                .iter()
                .map(|(k, w)| (k.clone(), f(w)))
                .collect(),
        )
    }
}

/// Dimension of the space of twisted cycles:
/// `|theta| (-chi + n_o) + |theta'| (n - n_o)`.
pub fn dim_twisted(
    chi: i64,
    n_components: usize,
    n_orientable: usize,
    theta: &RootSubset,
) -> Result<i64> {
    if chi > 0 {
        return Err(Error::Invalid(
            "lamination Euler characteristic must be <= 0".into(),
        ));
    }
    if n_orientable > n_components {
        return Err(Error::Invalid(
            "orientable component count exceeds component count".into(),
        ));
    }
    let t = theta.len() as i64;
    let tp = theta.theta_prime().len() as i64;
    Ok(t * (-chi + n_orientable as i64) + tp * (n_components as i64 - n_orientable as i64))
}

/// Normalized generator of the anti-invariant line a' for the (n,k) block
/// splitting: diag(1_k, -2k/(n-2k) 1_{n-2k}, 1_k).
pub fn a_prime_generator(n: usize, k: usize) -> Result<CartanVector> {
    if k == 0 || 2 * k >= n {
        return Err(Error::Invalid(format!(
            "need 1 <= k and 2k < n, got ({n},{k})"
        )));
    }
    let mid = -2.0 * k as f64 / (n - 2 * k) as f64;
    let mut entries = vec![1.0; n];
    for h in entries.iter_mut().take(n - k).skip(k) {
        *h = mid;
    }
    CartanVector::new(entries)
}

/// Checks that every weight is a multiple of the a' generator.
pub fn is_a_prime_valued(cycle: &TwistedCycle, n: usize, k: usize) -> Result<()> {
    let gen = a_prime_generator(n, k)?;
    let gnorm2: f64 = gen.entries().iter().map(|x| x * x).sum();
    for w in cycle.weights.values() {
        let dot: f64 = w
            .entries()
            .iter()
            .zip(gen.entries())
            .map(|(a, b)| a * b)
            .sum();
        let coeff = dot / gnorm2;
        let residual = w
            .entries()
            .iter()
            .zip(gen.entries())
            .map(|(a, b)| (a - coeff * b).abs())
            .fold(0.0, f64::max);
        if residual > 1e-9 {
            return Err(Error::WeightOutsideAPrime(residual));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lamination::LiftedLamination;
    use crate::surface::{fuchsian_octagon, SurfaceGroupPresentation, Word};

    fn cycle_on(curves: &[(&str, &[f64])], theta: RootSubset) -> TwistedCycle {
        let weights = curves
            .iter()
            .map(|(id, w)| (id.to_string(), CartanVector::new(w.to_vec()).unwrap()))
            .collect();
        TwistedCycle::new(theta, weights).unwrap()
    }

    #[test]
    fn weight_validation() {
        // h = (1, 0, -1) is not in a_theta for theta = {2}
        let theta = RootSubset::new(3, [2]).unwrap();
        let res = TwistedCycle::new(
            theta,
            [(
                "c".to_string(),
                CartanVector::new(vec![1.0, 0.0, -1.0]).unwrap(),
            )]
            .into(),
        );
        assert!(matches!(res, Err(Error::WeightOutsideATheta(_))));
    }

    #[test]
    fn dim_twisted_examples() {
        // finite lamination of m closed curves: |theta| * m
        let theta = RootSubset::full(3);
        assert_eq!(dim_twisted(0, 3, 3, &theta).unwrap(), 6);
        // maximal connected lamination, genus 2, SL(3), theta = Delta: 13
        assert_eq!(dim_twisted(-6, 1, 0, &theta).unwrap(), 13);
        // SL(2): 6g - 6
        let theta2 = RootSubset::full(2);
        assert_eq!(dim_twisted(-6, 1, 0, &theta2).unwrap(), 6);
    }

    #[test]
    fn norm_homogeneity() {
        let theta = RootSubset::full(3);
        let eps = cycle_on(&[("c", &[0.5, 0.1, -0.6])], theta.clone());
        assert!(TwistedCycle::zero(theta).norm() == 0.0);
        let n1 = eps.norm();
        assert!((eps.scale(-3.0).norm() - 3.0 * n1).abs() < 1e-12);
        assert!((n1 - 1.1).abs() < 1e-12);
    }

    #[test]
    fn arc_evaluation_and_twist() {
        let rep = fuchsian_octagon(2).unwrap();
        let pres = SurfaceGroupPresentation::new(2).unwrap();
        let curves = MultiCurve::new(vec![
            ("x".into(), Word::parse("a1", &pres).unwrap(), 1),
            ("y".into(), Word::parse("a2", &pres).unwrap(), 1),
        ]);
        let lam = LiftedLamination::new(rep, curves, 8).unwrap();
        let theta = RootSubset::full(3);
        let eps = cycle_on(
            &[("x", &[0.4, -0.1, -0.3]), ("y", &[0.2, 0.2, -0.4])],
            theta,
        );

        // empty chain -> 0
        let chain = lam.chain_to(&Word::empty()).unwrap();
        assert!(eps.evaluate_arc(&chain, lam.curves()).unwrap().is_zero());

        // arc and its reverse: iota-related values
        let gamma = Word::parse("b1 b2", &pres).unwrap();
        let fwd = lam.chain_to(&gamma).unwrap();
        assert!(fwd.len() >= 2);
        let bwd = lam.chain(lam.translated_base(&gamma), lam.base()).unwrap();
        let v_fwd = eps.evaluate_arc(&fwd, lam.curves()).unwrap();
        let v_bwd = eps.evaluate_arc(&bwd, lam.curves()).unwrap();
        assert!(v_bwd.max_diff(&v_fwd.opposition()) < 1e-12);

        // finite additivity at every split point
        let prefixes = eps.prefix_values(&fwd, lam.curves()).unwrap();
        let total = prefixes.last().unwrap();
        for i in 0..fwd.len() - 1 {
            let mut tail = CartanVector::zero(3);
            for c in &fwd.crossings[i + 1..] {
                tail = tail.add(&eps.crossing_value(c, lam.curves()).unwrap());
            }
            assert!(prefixes[i].add(&tail).max_diff(total) < 1e-12);
        }
    }

    #[test]
    fn a_prime_generator_examples() {
        let g = a_prime_generator(3, 1).unwrap();
        assert_eq!(g.entries(), &[1.0, -2.0, 1.0]);
        // anti-invariant under opposition
        assert!(g.opposition().max_diff(&g.neg()) < 1e-15);
        let g = a_prime_generator(5, 2).unwrap();
        assert_eq!(g.entries(), &[1.0, 1.0, -4.0, 1.0, 1.0]);
    }
}
