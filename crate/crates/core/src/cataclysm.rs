//! The deformation engine: stretching maps along oriented leaves, shearing
//! maps over separation chains, the cataclysm itself, deformed boundary
//! flags, slithering maps over wedge prefixes, Busemann recovery of the
//! shearing parameter, and the triviality criterion for horocyclic
//! representations.
//!
//! Finite multicurve laminations get exact finite products; supplied
//! infinite leaf prefixes are truncated with Cauchy-increment reports.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::anosov::{BoundaryOracle, Provenance, Representation};
use crate::cycles::{is_a_prime_valued, TwistedCycle};
use crate::flags::{adapted_frame, unipotent_transporter, Flag};
use crate::hypgeom::axis;
use crate::lamination::{ChainCrossing, Leaf, LiftedLamination, SeparationChain};
use crate::liealg::{busemann, d_g, CartanVector, GroupElement, RootSubset};
use crate::surface::Word;
use crate::{Error, Result};

/// Absolute relator tolerance for deformed representations.
pub const DEFORMED_RELATOR_TOL: f64 = 1e-7;

/// Adapted frame for the flag pair at the endpoints of an oriented leaf;
/// stretching amounts conjugate through it.
#[derive(Debug, Clone)]
pub struct StretchContext {
    pub f_plus: Flag,
    pub f_minus: Flag,
    pub frame: GroupElement,
}

impl StretchContext {
    pub fn new(f_plus: Flag, f_minus: Flag) -> Result<Self> {
        let frame = adapted_frame(&f_plus, &f_minus)?;
        Ok(Self {
            f_plus,
            f_minus,
            frame,
        })
    }

    /// The stretching map `m exp(H) m^{-1}`; `H` must lie in a_theta.
    pub fn stretch(&self, h: &CartanVector) -> Result<GroupElement> {
        if !h.in_a_theta(self.f_plus.theta(), 1e-10) {
            let violation = (1..h.dim())
                .filter(|i| !self.f_plus.theta().contains(*i))
                .map(|i| h.simple_root(i).abs())
                .fold(0.0, f64::max);
            return Err(Error::WeightOutsideATheta(violation));
        }
        crate::flags::conjugated_exp(&self.frame, h)
    }
}

/// A shearing map between two complementary regions, with the tail
/// diagnostic `psi = phi * (final stretch)^{-1}`.
#[derive(Debug, Clone)]
pub struct ShearingMap {
    pub value: GroupElement,
    /// Distance of the interior product psi from the identity.
    pub psi_residual: f64,
    /// Crossing count of the underlying chain.
    pub chain_length: usize,
    /// Set when the chain was truncated (supplied infinite prefixes).
    pub truncated: bool,
}

/// Per-region shearing data along a chain, sufficient to recover the cycle
/// through the Busemann cocycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShearFamilyEntry {
    /// phi_{P R_i}.
    pub value: GroupElement,
    /// Boundary flag at the positive endpoint of g_{R_i}^0 (arc-oriented).
    pub flag0: Flag,
    /// Boundary flag at the positive endpoint of g_{R_i}^1; absent for the
    /// final region Q.
    pub flag1: Option<Flag>,
}

/// The family `phi_{P R_1}, ..., phi_{P R_{M-1}}, phi_{P Q}` along a chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShearFamily {
    pub theta: RootSubset,
    pub entries: Vec<ShearFamilyEntry>,
}

/// Result of a cataclysm deformation.
#[derive(Debug, Clone)]
pub struct DeformationResult {
    pub deformed: Representation,
    pub relator_residual: f64,
    /// Shearing map per generator name.
    pub shearing: BTreeMap<String, ShearingMap>,
}

/// The engine binds a lifted lamination to a representation whose boundary
/// flags it consumes; chains and adapted frames are cached.
pub struct ShearEngine<'a> {
    lam: &'a LiftedLamination,
    rep: &'a Representation,
    oracle: BoundaryOracle<'a>,
    chains: Mutex<HashMap<Word, SeparationChain>>,
    contexts: Mutex<HashMap<(Word, i8), StretchContext>>,
}

impl<'a> ShearEngine<'a> {
    pub fn new(lam: &'a LiftedLamination, rep: &'a Representation) -> Self {
        Self {
            lam,
            rep,
            oracle: BoundaryOracle::new(rep),
            chains: Mutex::new(HashMap::new()),
            contexts: Mutex::new(HashMap::new()),
        }
    }

    pub fn lamination(&self) -> &LiftedLamination {
        self.lam
    }

    pub fn rep(&self) -> &Representation {
        self.rep
    }

    pub fn oracle(&self) -> &BoundaryOracle<'a> {
        &self.oracle
    }

    /// Chain from the reference region to its gamma-translate, cached.
    pub fn chain_to(&self, gamma: &Word) -> Result<SeparationChain> {
        if let Some(c) = self.chains.lock().unwrap().get(gamma) {
            return Ok(c.clone());
        }
        let chain = self.lam.chain_to(gamma)?;
        self.chains
            .lock()
            .unwrap()
            .insert(gamma.clone(), chain.clone());
        Ok(chain)
    }

    /// Stretch context of a leaf in its arc-induced orientation.
    pub fn context_for(&self, leaf: &Leaf, sign: i8) -> Result<StretchContext> {
        let w = leaf.deck_word(self.lam.curves());
        let key = (w.clone(), sign);
        if let Some(ctx) = self.contexts.lock().unwrap().get(&key) {
            return Ok(ctx.clone());
        }
        let (f_plus, f_minus) = if sign >= 0 {
            (self.oracle.flag_at(&w)?, self.oracle.flag_at_repelling(&w)?)
        } else {
            (self.oracle.flag_at_repelling(&w)?, self.oracle.flag_at(&w)?)
        };
        let ctx = StretchContext::new(f_plus, f_minus)?;
        self.contexts.lock().unwrap().insert(key, ctx.clone());
        Ok(ctx)
    }

    /// Stretching map along a leaf in its stored (curve) orientation.
    pub fn stretching_map(&self, leaf: &Leaf, h: &CartanVector) -> Result<GroupElement> {
        self.context_for(leaf, 1)?.stretch(h)
    }

    fn crossing_stretch(
        &self,
        crossing: &ChainCrossing,
        h: &CartanVector,
    ) -> Result<GroupElement> {
        self.context_for(&crossing.leaf, crossing.sign)?.stretch(h)
    }

    /// Shearing map over a finite chain: the product
    /// `(T_{g_1^0}^{e_1} T_{g_1^1}^{-e_1}) ... T_{g_Q^0}^{e(P,Q)}`
    /// with `e_i = eps(P, R_i)`.
    pub fn shearing_map(
        &self,
        cycle: &TwistedCycle,
        chain: &SeparationChain,
    ) -> Result<ShearingMap> {
        let n = self.rep.n();
        if chain.is_empty() || cycle.is_zero() {
            return Ok(ShearingMap {
                value: GroupElement::identity(n),
                psi_residual: 0.0,
                chain_length: chain.len(),
                truncated: false,
            });
        }
        let eps = cycle.prefix_values(chain, self.lam.curves())?;
        let m = chain.len();
        let mut psi = GroupElement::identity(n);
        for i in 0..m - 1 {
            let t0 = self.crossing_stretch(&chain.crossings[i], &eps[i])?;
            let t1 = self.crossing_stretch(&chain.crossings[i + 1], &eps[i].neg())?;
            psi = psi.mul(&t0).mul(&t1);
        }
        let final_stretch = self.crossing_stretch(&chain.crossings[m - 1], &eps[m - 1])?;
        let value = psi.mul(&final_stretch);
        let psi_residual = d_g(&GroupElement::identity(n), &psi);
        Ok(ShearingMap {
            value,
            psi_residual,
            chain_length: m,
            truncated: false,
        })
    }

    /// Shearing map between two region sample points.
    pub fn shearing_between(
        &self,
        cycle: &TwistedCycle,
        from: crate::hypgeom::PlanePoint,
        to: crate::hypgeom::PlanePoint,
    ) -> Result<ShearingMap> {
        let chain = self.lam.chain(from, to)?;
        self.shearing_map(cycle, &chain)
    }

    /// The prefix family `phi_{P R_i}` for every region of the chain,
    /// bundled with the flags the Busemann recovery needs.
    pub fn shearing_family(
        &self,
        cycle: &TwistedCycle,
        chain: &SeparationChain,
    ) -> Result<ShearFamily> {
        let n = self.rep.n();
        let m = chain.len();
        let eps = cycle.prefix_values(chain, self.lam.curves())?;
        let mut entries = Vec::with_capacity(m);
        let mut psi = GroupElement::identity(n);
        for i in 0..m {
            let final_stretch = self.crossing_stretch(&chain.crossings[i], &eps[i])?;
            let value = psi.mul(&final_stretch);
            let flag0 = self
                .context_for(&chain.crossings[i].leaf, chain.crossings[i].sign)?
                .f_plus;
            let flag1 = if i + 1 < m {
                Some(
                    self.context_for(&chain.crossings[i + 1].leaf, chain.crossings[i + 1].sign)?
                        .f_plus,
                )
            } else {
                None
            };
            entries.push(ShearFamilyEntry {
                value,
                flag0,
                flag1,
            });
            if i + 1 < m {
                let t1 = self.crossing_stretch(&chain.crossings[i + 1], &eps[i].neg())?;
                psi = psi.mul(&final_stretch).mul(&t1);
            }
        }
        Ok(ShearFamily {
            theta: self.rep.theta().clone(),
            entries,
        })
    }

    /// The cataclysm deformation: generator images `phi_{P(gamma P)} rho(gamma)`.
    pub fn cataclysm(&self, cycle: &TwistedCycle) -> Result<DeformationResult> {
        cycle.validate()?;
        if cycle.theta != *self.rep.theta() {
            return Err(Error::Invalid(
                "cycle type does not match the representation".into(),
            ));
        }
        let pres = self.rep.presentation().clone();
        let mut images = Vec::with_capacity(pres.rank());
        let mut shearing = BTreeMap::new();
        for idx in 1..=pres.rank() {
            let gamma = Word::generator(idx);
            let chain = self.chain_to(&gamma)?;
            let shear = self.shearing_map(cycle, &chain)?;
            images.push(shear.value.mul(self.rep.generator_image(idx)));
            shearing.insert(pres.generator_name(idx), shear);
        }
        let deformed = Representation::with_relator_floor(
            pres,
            self.rep.theta().clone(),
            Provenance::Deformed,
            images,
            DEFORMED_RELATOR_TOL,
        )?;
        let relator_residual = deformed.relator_residual();
        if relator_residual > DEFORMED_RELATOR_TOL {
            return Err(Error::RelatorResidual {
                residual: relator_residual,
                limit: DEFORMED_RELATOR_TOL,
            });
        }
        Ok(DeformationResult {
            deformed,
            relator_residual,
            shearing,
        })
    }

    /// Deformed boundary flag at an endpoint of a crossed leaf, per
    /// `zeta'(x) = phi_{P Q_x} . zeta(x)` with `Q_x` the region on the near
    /// side of the crossing.
    pub fn deformed_flag(
        &self,
        cycle: &TwistedCycle,
        chain: &SeparationChain,
        crossing_index: usize,
        positive_end: bool,
    ) -> Result<Flag> {
        if crossing_index >= chain.len() {
            return Err(Error::Invalid(
                "crossing index outside the chain".into(),
            ));
        }
        let eps = cycle.prefix_values(chain, self.lam.curves())?;
        let n = self.rep.n();
        // phi_{P R_i} with R_i the region entered after crossing i-1;
        // for the region before the first crossing this is the identity
        let mut psi = GroupElement::identity(n);
        let mut phi = GroupElement::identity(n);
        for i in 0..crossing_index {
            let t0 = self.crossing_stretch(&chain.crossings[i], &eps[i])?;
            if i == crossing_index - 1 {
                phi = psi.mul(&t0);
            } else {
                let t1 = self.crossing_stretch(&chain.crossings[i + 1], &eps[i].neg())?;
                psi = psi.mul(&t0).mul(&t1);
            }
        }
        let w = chain.crossings[crossing_index]
            .leaf
            .deck_word(self.lam.curves());
        let base = if positive_end {
            self.oracle.flag_at(&w)?
        } else {
            self.oracle.flag_at_repelling(&w)?
        };
        Ok(base.translate(&phi))
    }

    /// `eps(P, gamma P)` for each generator; all zero iff the deformation of
    /// an (n,k)-horocyclic representation with a'-valued weights is trivial.
    pub fn h_trivial_check(&self, cycle: &TwistedCycle) -> Result<HTrivialReport> {
        let (n, k) = match self.rep.provenance() {
            Provenance::Horocyclic { n, k } => (*n, *k),
            _ => {
                return Err(Error::Invalid(
                    "triviality criterion needs a horocyclic representation".into(),
                ))
            }
        };
        is_a_prime_valued(cycle, n, k)?;
        let pres = self.rep.presentation();
        let mut values = Vec::new();
        let mut witness = None;
        let tol = 1e-9 * cycle.norm().max(1.0);
        for idx in 1..=pres.rank() {
            let gamma = Word::generator(idx);
            let chain = self.chain_to(&gamma)?;
            let value = cycle.evaluate_arc(&chain, self.lam.curves())?;
            let name = pres.generator_name(idx);
            if value.a_norm() > tol && witness.is_none() {
                witness = Some(name.clone());
            }
            values.push((name, value));
        }
        Ok(HTrivialReport {
            trivial: witness.is_none(),
            witness,
            values,
        })
    }
}

/// Outcome of the horocyclic triviality criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HTrivialReport {
    pub trivial: bool,
    /// First generator with a nonzero holonomy pairing, if any.
    pub witness: Option<String>,
    pub values: Vec<(String, CartanVector)>,
}

/// Busemann recovery: the finite sum
/// `delta = sum_R (sigma(phi_R, P^+_{g_R^0}) - sigma(phi_R, P^+_{g_R^1}))
///          + sigma(phi_Q, P^+_{g_Q^0})`,
/// which equals `eps(P, Q)` for the cycle that produced the family.
pub fn busemann_recover(family: &ShearFamily) -> Result<CartanVector> {
    let theta = &family.theta;
    let mut delta = CartanVector::zero(theta.n());
    for entry in &family.entries {
        let s0 = busemann(&entry.value, entry.flag0.frame(), theta)?;
        delta = delta.add(&s0);
        if let Some(flag1) = &entry.flag1 {
            let s1 = busemann(&entry.value, flag1.frame(), theta)?;
            delta = delta.sub(&s1);
        }
    }
    Ok(delta)
}

/// A leaf supplied by endpoint words: each endpoint is the attracting fixed
/// point of the given deck element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuppliedLeaf {
    pub pos: Word,
    pub neg: Word,
}

impl SuppliedLeaf {
    fn boundary_points(
        &self,
        lam: &LiftedLamination,
    ) -> Result<(crate::hypgeom::BoundaryPoint, crate::hypgeom::BoundaryPoint)> {
        let gp = lam.fuchsian().evaluate(&self.pos);
        let gn = lam.fuchsian().evaluate(&self.neg);
        Ok((axis(&gp)?.pos, axis(&gn)?.pos))
    }
}

/// Slithering map between two leaves sharing their positive endpoint: the
/// unique element of the unipotent radical of the stabilizer of
/// `zeta(g^+)` carrying `zeta(h^-)` to `zeta(g^-)`.
pub fn slithering_adjacent(
    engine: &ShearEngine<'_>,
    g: &SuppliedLeaf,
    h: &SuppliedLeaf,
) -> Result<GroupElement> {
    let (gp, gn) = g.boundary_points(engine.lamination())?;
    let (hp, hn) = h.boundary_points(engine.lamination())?;
    if !gp.approx_eq(&hp, 1e-9) {
        return Err(Error::EndpointsNotShared);
    }
    if gn.approx_eq(&hn, 1e-9) {
        return Ok(GroupElement::identity(engine.rep().n()));
    }
    let f_g_plus = engine.oracle().flag_at(&g.pos)?;
    let f_g_minus = engine.oracle().flag_at(&g.neg)?;
    let f_h_minus = engine.oracle().flag_at(&h.neg)?;
    unipotent_transporter(&f_g_plus, &f_h_minus, &f_g_minus)
}

/// Convergence diagnostics for a truncated slithering composition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlitheringReport {
    /// d_G between consecutive truncations.
    pub increments: Vec<f64>,
    /// Least-squares slope of log-increments against the step index, over
    /// the increments above the float floor.
    pub fitted_slope: f64,
    pub fitted_r2: f64,
    /// Number of increments used in the fit.
    pub fit_len: usize,
}

/// Composition of adjacent slithering maps over an ordered wedge prefix
/// `leaves[0], leaves[1], ...`; consecutive leaves must share their positive
/// endpoint.
pub fn slithering_chain(
    engine: &ShearEngine<'_>,
    leaves: &[SuppliedLeaf],
) -> Result<(GroupElement, SlitheringReport)> {
    let n = engine.rep().n();
    let mut product = GroupElement::identity(n);
    let mut increments = Vec::new();
    for pair in leaves.windows(2) {
        let step = slithering_adjacent(engine, &pair[0], &pair[1])?;
        let next = product.mul(&step);
        increments.push(d_g(&product, &next));
        product = next;
    }
    let floor = 1e-13;
    let usable: Vec<(f64, f64)> = increments
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > floor)
        .map(|(i, v)| (i as f64, v.ln()))
        .collect();
    let (slope, r2) = linear_fit(&usable);
    Ok((
        product,
        SlitheringReport {
            increments,
            fitted_slope: slope,
            fitted_r2: r2,
            fit_len: usable.len(),
        },
    ))
}

/// Least-squares line through (x, y) pairs; returns (slope, R^2).
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (0.0, 0.0);
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    (slope, r2)
}

/// Witness that the exterior square does not carry a_theta (theta =
/// {alpha_2, alpha_3} in SL(5)) into a'_theta' (theta' = {alpha_1, alpha_9}
/// in SL(10)): returns H and the deviation of the middle eight coordinates
/// of its wedge image from their mean.
pub fn exterior_square_violation() -> (CartanVector, f64) {
    let h = CartanVector::new(vec![1.0, 1.0, 0.0, -1.0, -1.0]).expect("traceless");
    let image = crate::anosov::wedge2_cartan(&h);
    let mid = &image.entries()[1..9];
    let mean: f64 = mid.iter().sum::<f64>() / mid.len() as f64;
    let residual = mid
        .iter()
        .map(|x| (x - mean).abs())
        .fold(0.0, f64::max);
    (h, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anosov::{hitchin, horocyclic};
    use crate::cycles::a_prime_generator;
    use crate::lamination::MultiCurve;
    use crate::liealg::RootSubset;
    use crate::surface::{fuchsian_octagon, SurfaceGroupPresentation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standard_lamination() -> LiftedLamination {
        let rep = fuchsian_octagon(2).unwrap();
        let pres = SurfaceGroupPresentation::new(2).unwrap();
        let curves = MultiCurve::new(vec![
            ("a".into(), Word::parse("a1", &pres).unwrap(), 1),
            ("c".into(), Word::parse("a2", &pres).unwrap(), 1),
            (
                "s".into(),
                Word::parse("a1 b1 a1^-1 b1^-1", &pres).unwrap(),
                1,
            ),
        ]);
        LiftedLamination::new(rep, curves, 8).unwrap()
    }

    fn random_cycle(rng: &mut ChaCha8Rng, theta: &RootSubset, scale: f64) -> TwistedCycle {
        let n = theta.n();
        let weights = ["a", "c", "s"]
            .iter()
            .map(|id| {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
                let h = CartanVector::traceless(raw).project_theta(theta);
                (id.to_string(), h)
            })
            .collect();
        TwistedCycle::new(theta.clone(), weights).unwrap()
    }

    #[test]
    fn stretch_identities_along_one_leaf() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let pres = rep.presentation().clone();
        let chain = engine
            .chain_to(&Word::parse("b1", &pres).unwrap())
            .unwrap();
        let leaf = &chain.crossings[0].leaf;

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = rep.theta().clone();
        for _ in 0..20 {
            let h1 = CartanVector::traceless((0..3).map(|_| rng.gen_range(-0.5..0.5)).collect());
            let h2 = CartanVector::traceless((0..3).map(|_| rng.gen_range(-0.5..0.5)).collect());
            let t1 = engine.stretching_map(leaf, &h1).unwrap();
            let t2 = engine.stretching_map(leaf, &h2).unwrap();
            let t12 = engine.stretching_map(leaf, &h1.add(&h2)).unwrap();
            assert!(t1.mul(&t2).max_diff(&t12) < 1e-10);
            let tinv = engine.stretching_map(leaf, &h1.neg()).unwrap();
            assert!(t1.mul(&tinv).dist_to_identity(false) < 1e-10);
            let _ = theta;
        }
    }

    #[test]
    fn stretch_zero_is_exact_identity() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let chain = engine
            .chain_to(&Word::parse("b1", &rep.presentation().clone()).unwrap())
            .unwrap();
        let t = engine
            .stretching_map(&chain.crossings[0].leaf, &CartanVector::zero(3))
            .unwrap();
        assert_eq!(t.max_diff(&GroupElement::identity(3)), 0.0);
    }

    #[test]
    fn single_leaf_shear_is_one_stretch() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let pres = rep.presentation().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cycle = random_cycle(&mut rng, rep.theta(), 0.2);
        // the b1-arc crosses only the a1-curve leaf
        let gamma = Word::parse("b1", &pres).unwrap();
        let chain = engine.chain_to(&gamma).unwrap();
        assert_eq!(chain.len(), 1);
        let shear = engine.shearing_map(&cycle, &chain).unwrap();
        let eps = cycle
            .evaluate_arc(&chain, engine.lamination().curves())
            .unwrap();
        let direct = engine
            .context_for(&chain.crossings[0].leaf, chain.crossings[0].sign)
            .unwrap()
            .stretch(&eps)
            .unwrap();
        assert!(shear.value.max_diff(&direct) < 1e-12);
        assert_eq!(shear.psi_residual, 0.0);
    }

    #[test]
    fn zero_cycle_deforms_to_the_same_representation() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let zero = TwistedCycle::zero(rep.theta().clone());
        let result = engine.cataclysm(&zero).unwrap();
        assert_eq!(result.deformed.dist(&rep, false), 0.0);
        assert_eq!(result.relator_residual, rep.relator_residual());
    }

    #[test]
    fn cataclysm_preserves_relator() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let cycle = random_cycle(&mut rng, rep.theta(), 0.1);
            let result = engine.cataclysm(&cycle).unwrap();
            assert!(
                result.relator_residual < DEFORMED_RELATOR_TOL,
                "residual {}",
                result.relator_residual
            );
        }
    }

    #[test]
    fn shearing_inverse_and_composition() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let pres = rep.presentation().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cycle = random_cycle(&mut rng, rep.theta(), 0.15);

        let gamma = Word::parse("b2 b1", &pres).unwrap();
        let p = lam.base();
        let q = lam.translated_base(&gamma);
        let fwd = engine.shearing_between(&cycle, p, q).unwrap();
        let bwd = engine.shearing_between(&cycle, q, p).unwrap();
        assert!(
            fwd.value.mul(&bwd.value).dist_to_identity(false) < 1e-8,
            "inverse property failed: {}",
            fwd.value.mul(&bwd.value).dist_to_identity(false)
        );

        // composition through an interior region sample point
        let chain = lam.chain(p, q).unwrap();
        if chain.len() >= 2 {
            let r = chain.regions[1].sample;
            let pr = engine.shearing_between(&cycle, p, r).unwrap();
            let rq = engine.shearing_between(&cycle, r, q).unwrap();
            let composed = pr.value.mul(&rq.value);
            assert!(
                composed.max_diff(&fwd.value) < 1e-8,
                "composition failed: {}",
                composed.max_diff(&fwd.value)
            );
        }
    }

    #[test]
    fn busemann_recovers_the_cycle_value() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let pres = rep.presentation().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for gamma_txt in ["b1", "b2", "b1 a2"] {
            let cycle = random_cycle(&mut rng, rep.theta(), 0.2);
            let gamma = Word::parse(gamma_txt, &pres).unwrap();
            let chain = engine.chain_to(&gamma).unwrap();
            if chain.is_empty() {
                continue;
            }
            let family = engine.shearing_family(&cycle, &chain).unwrap();
            let delta = busemann_recover(&family).unwrap();
            let expected = cycle.evaluate_arc(&chain, lam.curves()).unwrap();
            assert!(
                delta.max_diff(&expected) < 1e-8,
                "delta {:?} vs eps {:?}",
                delta.entries(),
                expected.entries()
            );
        }
    }

    #[test]
    fn h_trivial_on_separating_and_nonseparating() {
        let octagon = fuchsian_octagon(2).unwrap();
        let pres = SurfaceGroupPresentation::new(2).unwrap();
        let rep = horocyclic(&octagon, 3, 1).unwrap();
        let gen = a_prime_generator(3, 1).unwrap();

        // separating curve: trivial
        let curves = MultiCurve::new(vec![(
            "s".into(),
            Word::parse("a1 b1 a1^-1 b1^-1", &pres).unwrap(),
            1,
        )]);
        let lam = LiftedLamination::new(octagon.clone(), curves, 8).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let cycle = TwistedCycle::new(
            rep.theta().clone(),
            [("s".to_string(), gen.scale(0.3))].into(),
        )
        .unwrap();
        let report = engine.h_trivial_check(&cycle).unwrap();
        assert!(report.trivial, "report: {report:?}");

        // non-separating curve a1: witness b1
        let curves = MultiCurve::new(vec![("a".into(), Word::parse("a1", &pres).unwrap(), 1)]);
        let lam = LiftedLamination::new(octagon, curves, 8).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let cycle = TwistedCycle::new(
            rep.theta().clone(),
            [("a".to_string(), gen.scale(0.3))].into(),
        )
        .unwrap();
        let report = engine.h_trivial_check(&cycle).unwrap();
        assert!(!report.trivial);
        assert_eq!(report.witness.as_deref(), Some("b1"));
    }

    #[test]
    fn exterior_square_violation_witness() {
        let (h, residual) = exterior_square_violation();
        // H really lies in a_theta for theta = {2, 3}
        let theta = RootSubset::new(5, [2, 3]).unwrap();
        assert!(h.in_a_theta(&theta, 1e-12));
        assert!(residual >= 1e-3, "residual {residual}");
    }

    #[test]
    fn slithering_wedge_identities() {
        let lam = standard_lamination();
        let rep = hitchin(lam.fuchsian(), 3).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let pres = rep.presentation().clone();
        // a fan of leaves sharing the attracting point of a1
        let c = Word::parse("a1", &pres).unwrap();
        let mk = |i: i32| SuppliedLeaf {
            pos: c.clone(),
            neg: Word::parse("b1", &pres).unwrap().conjugated_by(&c.pow(-i)),
        };
        let (g, h, hp) = (mk(0), mk(1), mk(2));
        let id = slithering_adjacent(&engine, &g, &g).unwrap();
        assert!(id.dist_to_identity(false) < 1e-12);

        let s_gh = slithering_adjacent(&engine, &g, &h).unwrap();
        let s_hg = slithering_adjacent(&engine, &h, &g).unwrap();
        assert!(s_gh.mul(&s_hg).dist_to_identity(false) < 1e-9);

        let s_hhp = slithering_adjacent(&engine, &h, &hp).unwrap();
        let s_ghp = slithering_adjacent(&engine, &g, &hp).unwrap();
        assert!(
            s_gh.mul(&s_hhp).max_diff(&s_ghp) < 1e-9,
            "composition: {}",
            s_gh.mul(&s_hhp).max_diff(&s_ghp)
        );

        // the composition carries the flag pair of hp to the pair of g
        let fp = engine.oracle().flag_at(&hp.neg).unwrap();
        let moved = fp.translate(&s_ghp);
        let target = engine.oracle().flag_at(&g.neg).unwrap();
        assert!(moved.approx_eq(&target, 1e-8));
    }

    #[test]
    fn slithering_increments_decay_on_spiraling_prefix() {
        let lam = standard_lamination();
        let rep = crate::anosov::Representation::from_fuchsian(lam.fuchsian()).unwrap();
        let engine = ShearEngine::new(&lam, &rep);
        let pres = rep.presentation().clone();
        let c = Word::parse("a1", &pres).unwrap();
        let leaves: Vec<SuppliedLeaf> = (0..21)
            .map(|i| SuppliedLeaf {
                pos: c.clone(),
                neg: Word::parse("b1", &pres)
                    .unwrap()
                    .conjugated_by(&c.pow(-i)),
            })
            .collect();
        let (_, report) = slithering_chain(&engine, &leaves).unwrap();
        assert_eq!(report.increments.len(), 20);
        assert!(report.fitted_slope < 0.0, "slope {}", report.fitted_slope);
        assert!(report.fitted_r2 > 0.9, "r2 {}", report.fitted_r2);
        for w in report.increments[..report.fit_len.saturating_sub(1)].windows(2) {
            assert!(w[1] < w[0], "increments not monotone: {:?}", report.increments);
        }
    }
}
