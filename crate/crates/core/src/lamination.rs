//! Finite geodesic laminations from multicurves, their lifts to the
//! universal cover and separation chains along transverse geodesic arcs.
//!
//! A chain records, in crossing order, the lifted leaves met by an arc
//! together with crossing parameters and signs, the complementary regions
//! the arc traverses, and a divergence-radius proxy per interior region.
//! Leaf enumeration walks the tiling of the universal cover with a geometric
//! prune and is validated by re-running at a larger word depth.

use serde::{Deserialize, Serialize};

use crate::hypgeom::{
    distance, distance_to_line, moebius_line, moebius_point, GeodesicLine, Mat2, PlanePoint,
    Segment,
};
use crate::surface::{base_point, FuchsianRep, Word};
use crate::{Error, Result};

/// Default conjugator word depth for lifting.
pub const DEFAULT_DEPTH: usize = 8;

/// Dedup tolerance on projective endpoints of leaves.
const LEAF_TOL: f64 = 1e-9;

/// A simple closed curve with a chosen orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSpec {
    pub id: String,
    pub word: Word,
    pub orientation: i8,
}

impl CurveSpec {
    /// The word whose axis carries the chosen orientation.
    pub fn oriented_word(&self) -> Word {
        if self.orientation >= 0 {
            self.word.clone()
        } else {
            self.word.inverse()
        }
    }
}

/// A finite multicurve: disjoint simple closed geodesics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiCurve {
    pub curves: Vec<CurveSpec>,
}

impl MultiCurve {
    pub fn new(curves: Vec<(String, Word, i8)>) -> Self {
        Self {
            curves: curves
                .into_iter()
                .map(|(id, word, orientation)| CurveSpec {
                    id,
                    word,
                    orientation,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curve_index(&self, id: &str) -> Result<usize> {
        self.curves
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::MissingWeight(id.to_string()))
    }
}

/// A lifted leaf: a conjugate of a curve axis, oriented by the curve's
/// chosen orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Leaf {
    pub curve: usize,
    pub conjugator: Word,
    pub line: GeodesicLine,
}

impl Leaf {
    /// Deck element whose axis is this leaf, with matching orientation.
    pub fn deck_word(&self, curves: &MultiCurve) -> Word {
        curves.curves[self.curve]
            .oriented_word()
            .conjugated_by(&self.conjugator)
    }
}

/// One transverse crossing of the arc with a leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainCrossing {
    pub leaf: Leaf,
    /// Arclength fraction along the arc.
    pub t: f64,
    /// +1 when the arc orientation induces the leaf's stored orientation.
    pub sign: i8,
}

/// A complementary region met by the arc, identified locally by its side
/// signature against the chain's leaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub signature: Vec<i8>,
    pub sample: PlanePoint,
}

/// The separation data of a tightly transverse arc: ordered crossings,
/// regions and divergence-radius proxies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationChain {
    pub start: PlanePoint,
    pub end: PlanePoint,
    pub crossings: Vec<ChainCrossing>,
    /// Regions R_0 = P, ..., R_M = Q; one more than the crossing count.
    pub regions: Vec<Region>,
    /// Divergence-radius proxy per interior region (empty when M <= 1).
    pub radii: Vec<u32>,
}

impl SeparationChain {
    pub fn len(&self) -> usize {
        self.crossings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    pub fn segment(&self) -> Result<Segment> {
        Segment::new(self.start, self.end)
    }
}

/// Divergence-radius proxy `r(R) = max(0, ceil(-log length(arc ∩ R)))` per
/// interior region.
pub fn divergence_radius_proxy(chain: &SeparationChain) -> &[u32] {
    &chain.radii
}

#[derive(Debug, Clone)]
struct LocalLeaf {
    curve: usize,
    conjugator: Word,
    line: GeodesicLine,
}

/// The lift of a finite lamination: the Fuchsian holonomy, the multicurve,
/// and cached local leaf sets at the working depth and the stability depth.
#[derive(Debug, Clone)]
pub struct LiftedLamination {
    fuchsian: FuchsianRep,
    curves: MultiCurve,
    depth: usize,
    base: PlanePoint,
    local: Vec<LocalLeaf>,
    local_deeper: Vec<LocalLeaf>,
    circumradius: f64,
}

impl LiftedLamination {
    pub fn new(fuchsian: FuchsianRep, curves: MultiCurve, depth: usize) -> Result<Self> {
        validate_multicurve(&fuchsian, &curves)?;
        let circumradius = polygon_circumradius(fuchsian.genus());
        let center = PlanePoint::new(0.0, 1.0)?;

        // radius within which a leaf through a tile meeting an arc appears in
        // the tile's local coordinates
        let r_loc = circumradius + 0.1;
        let d_loc = local_enumeration_radius(&fuchsian, &curves, r_loc, circumradius, &center)?;

        let local = enumerate_local_leaves(&fuchsian, &curves, depth, r_loc, d_loc, &center)?;
        let local_deeper =
            enumerate_local_leaves(&fuchsian, &curves, depth + 2, r_loc, d_loc, &center)?;
        Ok(Self {
            fuchsian,
            curves,
            depth,
            base: base_point(),
            local,
            local_deeper,
            circumradius,
        })
    }

    pub fn fuchsian(&self) -> &FuchsianRep {
        &self.fuchsian
    }

    pub fn curves(&self) -> &MultiCurve {
        &self.curves
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Base point of the reference region.
    pub fn base(&self) -> PlanePoint {
        self.base
    }

    /// Translate of the base point under a deck word.
    pub fn translated_base(&self, gamma: &Word) -> PlanePoint {
        moebius_point(&self.fuchsian.evaluate(gamma), &self.base)
    }

    /// Chain along the oriented geodesic arc between two points in the
    /// complement of the lamination.
    ///
    /// The crossing set is recomputed at depth+2 and must agree, otherwise
    /// the lift is reported unstable.
    pub fn chain(&self, from: PlanePoint, to: PlanePoint) -> Result<SeparationChain> {
        if distance(&from, &to) < 1e-12 {
            return Ok(SeparationChain {
                start: from,
                end: to,
                crossings: Vec::new(),
                regions: vec![Region {
                    signature: Vec::new(),
                    sample: from,
                }],
                radii: Vec::new(),
            });
        }
        let seg = Segment::new(from, to)?;
        let crossings = self.collect_crossings(&seg, self.depth, &self.local)?;
        let deeper = self.collect_crossings(&seg, self.depth + 2, &self.local_deeper)?;
        if crossings.len() != deeper.len()
            || crossings
                .iter()
                .zip(&deeper)
                .any(|(a, b)| !a.leaf.line.same_unoriented(&b.leaf.line, 1e-7))
        {
            return Err(Error::DepthInsufficient { depth: self.depth });
        }
        self.assemble_chain(seg, crossings)
    }

    /// Chain from the base region P to gamma.P, along the arc from the base
    /// point to its deck translate.
    pub fn chain_to(&self, gamma: &Word) -> Result<SeparationChain> {
        self.chain(self.base, self.translated_base(gamma))
    }

    fn collect_crossings(
        &self,
        seg: &Segment,
        depth: usize,
        local: &[LocalLeaf],
    ) -> Result<Vec<ChainCrossing>> {
        let r_collect = self.circumradius + 0.05;
        let r_expand = r_collect + 2.0 * self.circumradius + 0.3;
        let center = PlanePoint::new(0.0, 1.0).unwrap();
        let tiles = tile_bfs(&self.fuchsian, depth, |m| {
            seg.coarse_distance(&moebius_point(m, &center), 12) <= r_expand
        });
        let mut crossings: Vec<ChainCrossing> = Vec::new();
        for (word, mat) in &tiles {
            let tile_center = moebius_point(mat, &center);
            if seg.coarse_distance(&tile_center, 12) > r_collect {
                continue;
            }
            for ll in local {
                let line = moebius_line(mat, &ll.line);
                let Some(hit) = seg.crossing(&line)? else {
                    continue;
                };
                if crossings
                    .iter()
                    .any(|c| c.leaf.line.same_unoriented(&line, LEAF_TOL))
                {
                    continue;
                }
                let conjugator = word.concat(&ll.conjugator);
                crossings.push(ChainCrossing {
                    leaf: Leaf {
                        curve: ll.curve,
                        conjugator,
                        line,
                    },
                    t: hit.t,
                    sign: hit.sign,
                });
            }
        }
        crossings.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        for i in 1..crossings.len() {
            if crossings[i].t - crossings[i - 1].t < 1e-12 {
                return Err(Error::Tangent {
                    margin: crossings[i].t - crossings[i - 1].t,
                });
            }
            if crossings[i]
                .leaf
                .line
                .same_unoriented(&crossings[i - 1].leaf.line, LEAF_TOL)
            {
                return Err(Error::NotTightlyTransverse { index: i });
            }
        }
        Ok(crossings)
    }

    fn assemble_chain(
        &self,
        seg: Segment,
        crossings: Vec<ChainCrossing>,
    ) -> Result<SeparationChain> {
        let m = crossings.len();
        let mut samples = Vec::with_capacity(m + 1);
        samples.push(seg.start);
        for i in 1..m {
            let t_mid = (crossings[i - 1].t + crossings[i].t) / 2.0;
            samples.push(seg.point_at(t_mid));
        }
        if m > 0 {
            samples.push(seg.end);
        }
        let regions = samples
            .into_iter()
            .map(|sample| {
                let signature = crossings
                    .iter()
                    .map(|c| side_sign(&sample, &c.leaf.line))
                    .collect();
                Region { sample, signature }
            })
            .collect();
        let mut radii = Vec::new();
        for i in 1..m {
            let len = seg.arc_distance(crossings[i - 1].t, crossings[i].t);
            let r = (-len.ln()).ceil().max(0.0);
            radii.push(r as u32);
        }
        Ok(SeparationChain {
            start: seg.start,
            end: seg.end,
            crossings,
            regions,
            radii,
        })
    }
}

fn polygon_circumradius(genus: usize) -> f64 {
    let half = std::f64::consts::PI / (4.0 * genus as f64);
    let cot = 1.0 / half.tan();
    (cot * cot).acosh()
}

/// Completeness radius for the local leaf enumeration: a leaf passing within
/// `r_loc` of the center has a conjugator representative whose orbit point
/// stays within axis-distance plus half the translation length; extra slack
/// keeps the pruned word tree connected.
fn local_enumeration_radius(
    fuchsian: &FuchsianRep,
    curves: &MultiCurve,
    r_loc: f64,
    circumradius: f64,
    center: &PlanePoint,
) -> Result<f64> {
    let mut d_loc = 0.0f64;
    for c in &curves.curves {
        let m = fuchsian.evaluate(&c.word);
        let ax = crate::hypgeom::axis(&m)?;
        let len = crate::hypgeom::translation_length(&m)?;
        d_loc = d_loc.max(distance_to_line(center, &ax) + len / 2.0);
    }
    Ok(d_loc + r_loc + 2.0 * circumradius + 0.3)
}

/// Which side of an oriented geodesic a point lies on.
pub fn side_sign(p: &PlanePoint, line: &GeodesicLine) -> i8 {
    let e = line.polar();
    let z = p.minkowski();
    let s = -z[0] * e[0] + z[1] * e[1] + z[2] * e[2];
    if s >= 0.0 {
        1
    } else {
        -1
    }
}

/// Breadth-first walk of the tiling's word tree with a geometric prune;
/// returns all visited (word, matrix) pairs including the identity.
fn tile_bfs(
    fuchsian: &FuchsianRep,
    max_len: usize,
    keep: impl Fn(&Mat2) -> bool,
) -> Vec<(Word, Mat2)> {
    let rank = fuchsian.presentation().rank() as i32;
    let step: Vec<(i32, Mat2)> = (1..=rank)
        .flat_map(|idx| {
            let w = Word::generator(idx as usize);
            let g = fuchsian.evaluate(&w);
            let g_inv = fuchsian.evaluate(&w.inverse());
            [(idx, g), (-idx, g_inv)]
        })
        .collect();
    let mut out = vec![(Word::empty(), Mat2::identity())];
    let mut frontier = vec![(Word::empty(), Mat2::identity())];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (w, m) in &frontier {
            let last = w.letters().last().copied().unwrap_or(0);
            for (l, g) in &step {
                if *l == -last {
                    continue;
                }
                let m2 = m * g;
                if !keep(&m2) {
                    continue;
                }
                let mut letters = w.letters().to_vec();
                letters.push(*l);
                let w2 = Word::new(letters);
                next.push((w2.clone(), m2));
                out.push((w2, m2));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    out
}

fn enumerate_local_leaves(
    fuchsian: &FuchsianRep,
    curves: &MultiCurve,
    depth: usize,
    r_loc: f64,
    d_loc: f64,
    center: &PlanePoint,
) -> Result<Vec<LocalLeaf>> {
    let mut base_axes = Vec::with_capacity(curves.len());
    for c in &curves.curves {
        let m = fuchsian.evaluate(&c.oriented_word());
        base_axes.push(crate::hypgeom::axis(&m)?);
    }
    let tiles = tile_bfs(fuchsian, depth, |m| {
        distance(&moebius_point(m, center), center) <= d_loc
    });
    let mut leaves: Vec<LocalLeaf> = Vec::new();
    for (word, mat) in &tiles {
        for (curve, ax) in base_axes.iter().enumerate() {
            let line = moebius_line(mat, ax);
            if distance_to_line(center, &line) > r_loc {
                continue;
            }
            if leaves
                .iter()
                .any(|l| l.curve == curve && l.line.same_unoriented(&line, LEAF_TOL))
            {
                continue;
            }
            leaves.push(LocalLeaf {
                curve,
                conjugator: word.clone(),
                line,
            });
        }
    }
    Ok(leaves)
}

/// Multicurve validity: cyclically reduced non-power hyperbolic words whose
/// geodesic representatives are simple and pairwise disjoint, checked on all
/// lifts near the fundamental domain.
pub fn validate_multicurve(fuchsian: &FuchsianRep, curves: &MultiCurve) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::Invalid("empty multicurve".into()));
    }
    let center = PlanePoint::new(0.0, 1.0)?;
    for c in &curves.curves {
        if c.word.is_empty() {
            return Err(Error::Invalid(format!("curve `{}` has empty word", c.id)));
        }
        if !c.word.is_cyclically_reduced() {
            return Err(Error::Invalid(format!(
                "curve `{}` is not cyclically reduced",
                c.id
            )));
        }
        if c.word.is_proper_power(4) {
            return Err(Error::Invalid(format!(
                "curve `{}` is a proper power",
                c.id
            )));
        }
        let m = fuchsian.evaluate(&c.word);
        if m.trace().abs() <= 2.0 {
            return Err(Error::NotHyperbolic { trace: m.trace() });
        }
    }
    // disjointness of all lifts near the base polygon
    let circumradius = polygon_circumradius(fuchsian.genus());
    let r_loc = circumradius + 1.0;
    let d_loc = local_enumeration_radius(fuchsian, curves, r_loc, circumradius, &center)?;
    let local = enumerate_local_leaves(fuchsian, curves, 6, r_loc, d_loc, &center)?;
    for i in 0..local.len() {
        for j in (i + 1)..local.len() {
            let (a, b) = (&local[i].line, &local[j].line);
            if a.same_unoriented(b, LEAF_TOL) {
                continue;
            }
            if lines_linked(a, b) {
                return Err(Error::Invalid(format!(
                    "curves `{}` and `{}` have intersecting geodesic lifts",
                    curves.curves[local[i].curve].id, curves.curves[local[j].curve].id
                )));
            }
        }
    }
    Ok(())
}

/// Two complete geodesics cross iff their endpoint pairs interleave on the
/// boundary circle.
pub fn lines_linked(a: &GeodesicLine, b: &GeodesicLine) -> bool {
    let (p, q) = (a.neg.circle_angle(), a.pos.circle_angle());
    let (r, s) = (b.neg.circle_angle(), b.pos.circle_angle());
    let tau = std::f64::consts::TAU;
    let span = (q - p).rem_euclid(tau);
    let in_arc = |x: f64| (x - p).rem_euclid(tau) < span;
    in_arc(r) != in_arc(s)
}
