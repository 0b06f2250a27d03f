//! Representations into SL(n,R) with eigenflag boundary oracles.
//!
//! Builders: the Hitchin family through the irreducible SL(2) -> SL(n), the
//! reducible (n,k)-horocyclic family, and the exterior square.  The boundary
//! map is evaluated at fixed points of group elements only, as attracting
//! eigenflags of the holonomy; every point the deformation engine touches is
//! of this kind.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flags::{attracting_flag, Flag};
use crate::hypgeom::Mat2;
use crate::liealg::{cartan_projection, CartanVector, GroupElement, RootSubset};
use crate::surface::{FuchsianRep, SurfaceGroupPresentation, Word};
use crate::{Error, Result};

/// Where a representation came from; fixes its natural Anosov type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fuchsian,
    Hitchin { n: usize },
    Horocyclic { n: usize, k: usize },
    Exterior,
    Deformed,
}

/// A surface-group representation into SL(n,R), stored by generator images.
#[derive(Debug, Clone)]
pub struct Representation {
    presentation: SurfaceGroupPresentation,
    n: usize,
    theta: RootSubset,
    provenance: Provenance,
    images: Vec<GroupElement>,
    inverses: Vec<GroupElement>,
}

/// Relator tolerance for representation constructors.
pub const RELATOR_TOL: f64 = 1e-8;

impl Representation {
    pub fn new(
        presentation: SurfaceGroupPresentation,
        theta: RootSubset,
        provenance: Provenance,
        images: Vec<GroupElement>,
    ) -> Result<Self> {
        Self::with_relator_floor(presentation, theta, provenance, images, 0.0)
    }

    /// Constructor with an explicit absolute floor on the admissible relator
    /// residual, for callers whose contract states an absolute tolerance.
    pub fn with_relator_floor(
        presentation: SurfaceGroupPresentation,
        theta: RootSubset,
        provenance: Provenance,
        images: Vec<GroupElement>,
        floor: f64,
    ) -> Result<Self> {
        if images.len() != presentation.rank() {
            return Err(Error::Invalid("one image per generator required".into()));
        }
        let n = theta.n();
        if images.iter().any(|g| g.n() != n) {
            return Err(Error::Invalid("image dimension mismatch".into()));
        }
        let inverses = images
            .iter()
            .map(|g| g.refined_inverse())
            .collect::<Result<Vec<_>>>()?;
        let rep = Self {
            presentation,
            n,
            theta,
            provenance,
            images,
            inverses,
        };
        // the admissible residual scales with the largest partial product of
        // the relator evaluation: that is the magnitude the rounding of a
        // float product chain is relative to
        let (residual, scale) = rep.relator_residual_scaled();
        let limit = (RELATOR_TOL * scale.max(1.0)).max(floor);
        if residual > limit {
            return Err(Error::RelatorResidual { residual, limit });
        }
        Ok(rep)
    }

    /// The Fuchsian representation itself, as 2x2 matrices.
    pub fn from_fuchsian(f: &FuchsianRep) -> Result<Self> {
        let images = f_images(f);
        Self::new(
            f.presentation().clone(),
            RootSubset::full(2),
            Provenance::Fuchsian,
            images,
        )
    }

    pub fn presentation(&self) -> &SurfaceGroupPresentation {
        &self.presentation
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> &RootSubset {
        &self.theta
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn generator_image(&self, index: usize) -> &GroupElement {
        &self.images[index - 1]
    }

    pub fn images(&self) -> &[GroupElement] {
        &self.images
    }

    /// Same presentation and type, new generator images.
    pub fn with_images(&self, provenance: Provenance, images: Vec<GroupElement>) -> Result<Self> {
        Self::new(
            self.presentation.clone(),
            self.theta.clone(),
            provenance,
            images,
        )
    }

    pub fn evaluate(&self, w: &Word) -> GroupElement {
        let mut out = DMatrix::identity(self.n, self.n);
        for &l in w.letters() {
            let idx = l.unsigned_abs() as usize;
            let m = if l > 0 {
                &self.images[idx - 1]
            } else {
                &self.inverses[idx - 1]
            };
            out *= m.matrix();
        }
        GroupElement::new_unchecked(out)
    }

    /// Word evaluation through a compensated product chain.  Intermediate
    /// magnitudes of long words dwarf the final matrix; the double-double
    /// carry keeps the result accurate to the last f64 digit, which the
    /// eigenflag oracle depends on.
    pub fn evaluate_accurate(&self, w: &Word) -> GroupElement {
        let factors: Vec<&DMatrix<f64>> = w
            .letters()
            .iter()
            .map(|&l| {
                let idx = l.unsigned_abs() as usize;
                if l > 0 {
                    self.images[idx - 1].matrix()
                } else {
                    self.inverses[idx - 1].matrix()
                }
            })
            .collect();
        GroupElement::new_unchecked(crate::liealg::dd::matrix_chain_product(
            &factors, self.n,
        ))
    }

    /// Relator image distance from ±Id.
    pub fn relator_residual(&self) -> f64 {
        self.evaluate(&self.presentation.relator())
            .dist_to_identity(true)
    }

    /// Relator residual together with the largest partial-product magnitude
    /// encountered while evaluating it.
    pub fn relator_residual_scaled(&self) -> (f64, f64) {
        let relator = self.presentation.relator();
        let mut out = DMatrix::identity(self.n, self.n);
        let mut scale = 1.0f64;
        for &l in relator.letters() {
            let idx = l.unsigned_abs() as usize;
            let m = if l > 0 {
                &self.images[idx - 1]
            } else {
                &self.inverses[idx - 1]
            };
            out *= m.matrix();
            scale = scale.max(out.amax());
        }
        let residual = GroupElement::new_unchecked(out).dist_to_identity(true);
        (residual, scale)
    }

    /// Generator-wise distance, up to global sign per generator when `psl`.
    pub fn dist(&self, other: &Self, psl: bool) -> f64 {
        self.images
            .iter()
            .zip(&other.images)
            .map(|(a, b)| a.dist(b, psl))
            .fold(0.0, f64::max)
    }
}

impl Serialize for Representation {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("Representation", 5)?;
        st.serialize_field("genus", &self.presentation.genus())?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("theta", &self.theta)?;
        st.serialize_field("provenance", &self.provenance)?;
        let images: BTreeMap<String, &GroupElement> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, g)| (self.presentation.generator_name(i + 1), g))
            .collect();
        st.serialize_field("images", &images)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Representation {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            genus: usize,
            n: usize,
            theta: RootSubset,
            provenance: Provenance,
            images: BTreeMap<String, GroupElement>,
        }
        let raw = Raw::deserialize(de)?;
        let pres = SurfaceGroupPresentation::new(raw.genus).map_err(serde::de::Error::custom)?;
        if raw.theta.n() != raw.n {
            return Err(serde::de::Error::custom("theta dimension mismatch"));
        }
        let mut images = Vec::with_capacity(pres.rank());
        for i in 1..=pres.rank() {
            let name = pres.generator_name(i);
            let g = raw
                .images
                .get(&name)
                .ok_or_else(|| serde::de::Error::custom(format!("missing image for {name}")))?;
            images.push(g.clone());
        }
        Representation::new(pres, raw.theta, raw.provenance, images)
            .map_err(serde::de::Error::custom)
    }
}

fn f_images(f: &FuchsianRep) -> Vec<GroupElement> {
    (1..=f.presentation().rank())
        .map(|i| {
            let m = f.generator_image(i);
            GroupElement::new_unchecked(DMatrix::from_fn(2, 2, |r, c| m[(r, c)]))
        })
        .collect()
}

/// The symmetric-power lift SL(2) -> SL(n): the action on binary forms of
/// degree n-1 in the monomial basis X^{n-1}, X^{n-2} Y, ..., Y^{n-1}.
pub fn sym_power(m: &Mat2, n: usize) -> DMatrix<f64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let deg = n - 1;
    let mut out = DMatrix::zeros(n, n);
    // column i: expand (a X + c Y)^(deg - i) (b X + d Y)^i
    for i in 0..n {
        let p1 = binomial_expand(a, c, deg - i);
        let p2 = binomial_expand(b, d, i);
        // convolve: coefficient of X^{deg-j} Y^j
        for (j1, c1) in p1.iter().enumerate() {
            for (j2, c2) in p2.iter().enumerate() {
                out[(j1 + j2, i)] += c1 * c2;
            }
        }
    }
    out
}

/// Coefficients of (x X + y Y)^k by increasing Y-degree.
fn binomial_expand(x: f64, y: f64, k: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; k + 1];
    let mut binom = 1.0f64;
    for (j, c) in coeffs.iter_mut().enumerate() {
        *c = binom * x.powi((k - j) as i32) * y.powi(j as i32);
        binom *= (k - j) as f64 / (j + 1) as f64;
    }
    coeffs
}

/// The irreducible (Hitchin) lift of a Fuchsian representation into SL(n,R).
pub fn hitchin(f: &FuchsianRep, n: usize) -> Result<Representation> {
    if n < 2 {
        return Err(Error::Invalid("need n >= 2".into()));
    }
    let images = (1..=f.presentation().rank())
        .map(|i| GroupElement::new_unchecked(sym_power(f.generator_image(i), n)))
        .collect();
    Representation::new(
        f.presentation().clone(),
        RootSubset::full(n),
        Provenance::Hitchin { n },
        images,
    )
}

/// The reducible block embedding SL(2) -> SL(n) stabilizing a k-plane:
/// [[a Id_k, 0, b Id_k], [0, Id_{n-2k}, 0], [c Id_k, 0, d Id_k]].
pub fn iota_nk(m: &Mat2, n: usize, k: usize) -> DMatrix<f64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mut out = DMatrix::identity(n, n);
    for i in 0..k {
        out[(i, i)] = a;
        out[(i, n - k + i)] = b;
        out[(n - k + i, i)] = c;
        out[(n - k + i, n - k + i)] = d;
    }
    out
}

/// Induced map on Cartan vectors: diag(t, -t) -> diag(t 1_k, 0, -t 1_k).
pub fn iota_nk_cartan(h: &CartanVector, n: usize, k: usize) -> CartanVector {
    let t = h.entries()[0];
    let mut entries = vec![0.0; n];
    for i in 0..k {
        entries[i] = t;
        entries[n - k + i] = -t;
    }
    CartanVector::new(entries).expect("traceless by construction")
}

/// The (n,k)-horocyclic representation, Anosov of type {alpha_k, alpha_{n-k}}.
pub fn horocyclic(f: &FuchsianRep, n: usize, k: usize) -> Result<Representation> {
    if k == 0 || 2 * k >= n {
        return Err(Error::Invalid(format!(
            "need 1 <= k and 2k < n, got ({n},{k})"
        )));
    }
    let images = (1..=f.presentation().rank())
        .map(|i| GroupElement::new_unchecked(iota_nk(f.generator_image(i), n, k)))
        .collect();
    let theta = RootSubset::new(n, [k, n - k])?;
    Representation::new(
        f.presentation().clone(),
        theta,
        Provenance::Horocyclic { n, k },
        images,
    )
}

/// Exterior square on the lexicographic wedge basis e_i ∧ e_j, i < j.
pub fn wedge2_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let nn = pairs.len();
    let mut out = DMatrix::zeros(nn, nn);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for (col, &(k, l)) in pairs.iter().enumerate() {
            out[(row, col)] = m[(i, k)] * m[(j, l)] - m[(i, l)] * m[(j, k)];
        }
    }
    out
}

/// Induced map on Cartan vectors: entries h_i + h_j in lexicographic order.
pub fn wedge2_cartan(h: &CartanVector) -> CartanVector {
    let n = h.dim();
    let mut entries = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            entries.push(h.entries()[i] + h.entries()[j]);
        }
    }
    CartanVector::new(entries).expect("traceless by construction")
}

/// The exterior-square representation; for SL(5) it lands in SL(10) with
/// proximal positions {1, 9}.
pub fn exterior_square(rep: &Representation) -> Result<Representation> {
    let n = rep.n();
    let nn = n * (n - 1) / 2;
    let images = rep
        .images()
        .iter()
        .map(|g| GroupElement::new_unchecked(wedge2_matrix(g.matrix())))
        .collect();
    let theta = RootSubset::new(nn, [1, nn - 1])?;
    Representation::new(
        rep.presentation().clone(),
        theta,
        Provenance::Exterior,
        images,
    )
}

/// Eigenflag boundary oracle: the boundary map evaluated at fixed points of
/// deck elements, cached by the reduced word.
///
/// Concurrent `flag_at` calls return identical values; the cache is behind a
/// mutex and recomputation is idempotent.
pub struct BoundaryOracle<'a> {
    rep: &'a Representation,
    cache: Mutex<HashMap<Word, Flag>>,
}

impl<'a> BoundaryOracle<'a> {
    pub fn new(rep: &'a Representation) -> Self {
        Self {
            rep,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn rep(&self) -> &Representation {
        self.rep
    }

    /// Boundary flag at the attracting fixed point of `w`.
    pub fn flag_at(&self, w: &Word) -> Result<Flag> {
        if w.is_empty() {
            return Err(Error::Invalid(
                "boundary flag needs a nontrivial deck element".into(),
            ));
        }
        if let Some(f) = self.cache.lock().unwrap().get(w) {
            return Ok(f.clone());
        }
        let g = self.rep.evaluate_accurate(w);
        let f = attracting_flag(&g, self.rep.theta())?;
        self.cache
            .lock()
            .unwrap()
            .insert(w.clone(), f.clone());
        Ok(f)
    }

    /// Boundary flag at the repelling fixed point of `w`.
    pub fn flag_at_repelling(&self, w: &Word) -> Result<Flag> {
        self.flag_at(&w.inverse())
    }
}

/// One row of the divergence diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub length: usize,
    /// min over cyclically reduced words of that length of
    /// min_{alpha in theta} alpha(mu(rho(gamma))).
    pub min_root_gap: f64,
}

/// Divergence diagnostic over word lengths 1..=max_len.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub rows: Vec<DivergenceRow>,
    /// Strictly increasing minima across lengths.
    pub increasing: bool,
    /// All minima bounded away from zero.
    pub divergent: bool,
}

/// Samples `min_{alpha in theta} alpha(mu)` over all cyclically reduced
/// words of each length up to `max_len` (cost guard: at most 10).
pub fn divergence_report(
    rep: &Representation,
    theta: &RootSubset,
    max_len: usize,
) -> Result<DivergenceReport> {
    if max_len > 10 {
        return Err(Error::Invalid("divergence word length capped at 10".into()));
    }
    let rank = rep.presentation().rank();
    let pool = thread_pool()?;
    let rows: Vec<DivergenceRow> = pool.install(|| {
        (1..=max_len)
            .map(|len| {
                let letters: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
                let min = letters
                    .par_iter()
                    .map(|&first| {
                        let mut local_min = f64::INFINITY;
                        let head = Word::new(vec![first]);
                        let base = rep.evaluate(&head);
                        min_gap_over_suffixes(
                            rep,
                            theta,
                            first,
                            base.matrix().clone(),
                            len - 1,
                            first,
                            &mut local_min,
                        );
                        local_min
                    })
                    .reduce(|| f64::INFINITY, f64::min);
                DivergenceRow {
                    length: len,
                    min_root_gap: min,
                }
            })
            .collect()
    });
    let increasing = rows.windows(2).all(|w| w[1].min_root_gap > w[0].min_root_gap);
    let divergent = increasing && rows.iter().all(|r| r.min_root_gap > 1e-9);
    Ok(DivergenceReport {
        rows,
        increasing,
        divergent,
    })
}

fn min_gap_over_suffixes(
    rep: &Representation,
    theta: &RootSubset,
    first: i32,
    prefix: DMatrix<f64>,
    remaining: usize,
    last: i32,
    min: &mut f64,
) {
    if remaining == 0 {
        // cyclically reduced: first letter is not the inverse of the last
        if first != -last {
            let mu = cartan_projection(&GroupElement::new_unchecked(prefix));
            let gap = theta
                .indices()
                .map(|i| mu.simple_root(i))
                .fold(f64::INFINITY, f64::min);
            *min = min.min(gap);
        }
        return;
    }
    let rank = rep.presentation().rank() as i32;
    for idx in 1..=rank {
        for l in [idx, -idx] {
            if l == -last {
                continue;
            }
            let g = if l > 0 {
                rep.generator_image(l as usize)
            } else {
                &rep.inverses[(-l) as usize - 1]
            };
            min_gap_over_suffixes(
                rep,
                theta,
                first,
                &prefix * g.matrix(),
                remaining - 1,
                l,
                min,
            );
        }
    }
}

/// Rayon pool honoring the CATACLYSM_THREADS cap.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CATACLYSM_THREADS") {
        let k: usize = v
            .parse()
            .map_err(|_| Error::Invalid(format!("bad CATACLYSM_THREADS value `{v}`")))?;
        builder = builder.num_threads(k.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}
