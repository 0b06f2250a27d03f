//! Partial flags in R^n, transversality, adapted frames and unipotent
//! transporters.
//!
//! A flag of type `theta` is the nested family of subspaces with dimensions
//! in `theta`, stored as the leading column spans of an orthonormal frame.
//! Frames are canonicalized on construction so equal flags have close
//! projectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::liealg::{
    eigenvalue_moduli, orthonormalize_frame, CartanVector, GroupElement, RootSubset,
};
use crate::{Error, Result};

/// Angular tolerance for flag equality.
pub const FLAG_TOL: f64 = 1e-8;
/// Eigenvalue gap ratio below which attracting flags are rejected.
pub const PROXIMALITY_GAP: f64 = 1e-8;

const SQUARINGS: usize = 32;
const POLISH_MAX_ITERS: usize = 800;

/// A partial flag of type `theta`, stored as a canonicalized orthonormal
/// frame.
#[derive(Debug, Clone)]
pub struct Flag {
    frame: DMatrix<f64>,
    theta: RootSubset,
}

impl Flag {
    /// Builds a flag from an arbitrary invertible frame; the frame is
    /// orthonormalized in column order (preserving the leading spans) and
    /// sign-fixed.
    pub fn new(frame: DMatrix<f64>, theta: RootSubset) -> Result<Self> {
        if frame.nrows() != theta.n() || frame.ncols() != theta.n() {
            return Err(Error::FlagTypeMismatch);
        }
        let mut q = orthonormalize_frame(&frame)?;
        fix_column_signs(&mut q);
        Ok(Self { frame: q, theta })
    }

    /// Standard flag: leading coordinate subspaces.
    pub fn standard(theta: &RootSubset) -> Self {
        Self {
            frame: DMatrix::identity(theta.n(), theta.n()),
            theta: theta.clone(),
        }
    }

    /// Opposite standard flag: trailing coordinate subspaces.
    pub fn opposite_standard(theta: &RootSubset) -> Self {
        let n = theta.n();
        let mut frame = DMatrix::zeros(n, n);
        for j in 0..n {
            frame[(n - 1 - j, j)] = 1.0;
        }
        Self {
            frame,
            theta: theta.clone(),
        }
    }

    pub fn theta(&self) -> &RootSubset {
        &self.theta
    }

    pub fn n(&self) -> usize {
        self.theta.n()
    }

    /// The orthonormal frame whose leading column spans define the flag.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// Orthogonal projector onto the dimension-`d` subspace.
    pub fn projector(&self, d: usize) -> DMatrix<f64> {
        let v = self.frame.columns(0, d);
        &v * v.transpose()
    }

    /// Left action of a group element.
    pub fn translate(&self, g: &GroupElement) -> Self {
        let mut q = orthonormalize_frame(&(g.matrix() * &self.frame))
            .expect("translated frame stays invertible");
        fix_column_signs(&mut q);
        Self {
            frame: q,
            theta: self.theta.clone(),
        }
    }

    /// Maximal projector distance over the subspaces of the flag type.
    pub fn dist(&self, other: &Self) -> f64 {
        assert_eq!(self.theta, other.theta, "flag type mismatch");
        self.theta
            .indices()
            .map(|d| (self.projector(d) - other.projector(d)).amax())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dist(other) <= tol
    }
}

impl Serialize for Flag {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("Flag", 2)?;
        st.serialize_field("type", &self.theta)?;
        let rows: Vec<Vec<f64>> = (0..self.frame.nrows())
            .map(|i| self.frame.row(i).iter().copied().collect())
            .collect();
        st.serialize_field("frame", &rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Flag {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "type")]
            theta: RootSubset,
            frame: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(de)?;
        let n = raw.theta.n();
        if raw.frame.len() != n || raw.frame.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("frame shape mismatch"));
        }
        let frame = DMatrix::from_fn(n, n, |i, j| raw.frame[i][j]);
        Flag::new(frame, raw.theta).map_err(serde::de::Error::custom)
    }
}

fn fix_column_signs(q: &mut DMatrix<f64>) {
    for j in 0..q.ncols() {
        let mut best = 0;
        let mut best_abs = 0.0;
        for i in 0..q.nrows() {
            if q[(i, j)].abs() > best_abs {
                best_abs = q[(i, j)].abs();
                best = i;
            }
        }
        if q[(best, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
}

/// Transversality of a pair of flags of the same (iota-invariant) type:
/// every pair of complementary-dimension subspaces must span R^n.
pub fn is_transverse(f_plus: &Flag, f_minus: &Flag) -> Result<bool> {
    if f_plus.theta() != f_minus.theta() {
        return Err(Error::FlagTypeMismatch);
    }
    Ok(pairing_det(f_plus, f_minus) > FLAG_TOL)
}

/// Minimal pairing determinant over complementary dimensions; both frames
/// are orthonormal, so the value lies in [0, 1].
pub fn pairing_det(f_plus: &Flag, f_minus: &Flag) -> f64 {
    let n = f_plus.n();
    let mut min_det = f64::INFINITY;
    for d in f_plus.theta().indices() {
        let mut m = DMatrix::zeros(n, n);
        m.columns_mut(0, d).copy_from(&f_plus.frame().columns(0, d));
        m.columns_mut(d, n - d)
            .copy_from(&f_minus.frame().columns(0, n - d));
        min_det = min_det.min(m.determinant().abs());
    }
    min_det
}

/// Attracting flag of a theta-proximal element: the subspaces spanned by the
/// eigenvectors of largest modulus.
///
/// Computed by repeated squaring followed by an orthogonal-iteration polish;
/// the result is invariant under `g` and attracting under iteration.
pub fn attracting_flag(g: &GroupElement, theta: &RootSubset) -> Result<Flag> {
    let n = g.n();
    assert_eq!(n, theta.n(), "dimension mismatch");
    let moduli = eigenvalue_moduli(g);
    for d in theta.indices() {
        let ratio = moduli[d - 1] / moduli[d];
        if !(ratio >= 1.0 + PROXIMALITY_GAP) {
            return Err(Error::NotProximal { dim: d, ratio });
        }
    }

    // direction of g^(2^SQUARINGS), renormalized against overflow
    let mut m = g.matrix() / g.matrix().amax();
    for _ in 0..SQUARINGS {
        m = &m * &m;
        let scale = m.amax();
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Singular { pivot: scale });
        }
        m /= scale;
    }
    let svd = m.svd(true, false);
    let mut q = svd.u.expect("svd with u");

    // polish: orthogonal iteration with the exact matrix
    let mut prev: Vec<DMatrix<f64>> = theta
        .indices()
        .map(|d| {
            let v = q.columns(0, d);
            &v * v.transpose()
        })
        .collect();
    for _ in 0..POLISH_MAX_ITERS {
        let gq = g.matrix() * &q;
        q = orthonormalize_frame(&gq)?;
        let projs: Vec<DMatrix<f64>> = theta
            .indices()
            .map(|d| {
                let v = q.columns(0, d);
                &v * v.transpose()
            })
            .collect();
        let delta = projs
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        prev = projs;
        if delta < 1e-14 {
            break;
        }
    }

    // invariance residual: g must map each subspace into itself
    let g_norm = g.matrix().amax();
    for d in theta.indices() {
        let v = q.columns(0, d);
        let p = &v * v.transpose();
        let gv = g.matrix() * &v;
        let residual = (&gv - &p * &gv).amax() / g_norm;
        if residual > 1e-7 {
            return Err(Error::NotProximal {
                dim: d,
                ratio: 1.0 + residual,
            });
        }
    }
    Flag::new(q, theta.clone())
}

/// An adapted frame `m` for a transverse pair: `m . standard = f_plus` and
/// `m . opposite_standard = f_minus`, unique up to the Levi subgroup.
///
/// The frame is assembled from orthonormal bases of the block intersections
/// `V+_{d_j} ∩ V-_{n-d_{j-1}}`, which keeps its condition number as small as
/// the flag pair allows.
pub fn adapted_frame(f_plus: &Flag, f_minus: &Flag) -> Result<GroupElement> {
    if f_plus.theta() != f_minus.theta() {
        return Err(Error::FlagTypeMismatch);
    }
    let det = pairing_det(f_plus, f_minus);
    if det <= FLAG_TOL {
        return Err(Error::NotTransverse { det });
    }
    let n = f_plus.n();
    let blocks = f_plus.theta().blocks();
    let mut m = DMatrix::zeros(n, n);
    let mut col = 0;
    for &(lo, hi) in &blocks {
        let size = hi - lo;
        let basis = if lo == 0 {
            f_plus.frame().columns(0, hi).into_owned()
        } else if hi == n {
            f_minus.frame().columns(0, n - lo).into_owned()
        } else {
            let u1 = f_plus.frame().columns(0, hi).into_owned();
            let u2 = f_minus.frame().columns(0, n - lo).into_owned();
            subspace_intersection(&u1, &u2, size)?
        };
        m.columns_mut(col, size).copy_from(&basis);
        col += size;
    }
    // normalize into SL(n, R); sign flip of a single column stays in the
    // same Levi coset
    let det = m.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::NotTransverse { det });
    }
    if det < 0.0 {
        for i in 0..n {
            m[(i, 0)] = -m[(i, 0)];
        }
    }
    let scale = det.abs().powf(1.0 / n as f64);
    Ok(GroupElement::new_unchecked(m / scale))
}

/// Orthonormal basis of the intersection of two column spans with known
/// expected dimension, via principal angles: the intersection directions are
/// the singular vectors of `u1^T u2` with singular value 1.
fn subspace_intersection(
    u1: &DMatrix<f64>,
    u2: &DMatrix<f64>,
    expected_dim: usize,
) -> Result<DMatrix<f64>> {
    let m = u1.transpose() * u2;
    let q = u2.ncols();
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("svd with v_t");
    let sv = &svd.singular_values;
    for k in 0..expected_dim {
        if sv[k] < 1.0 - 1e-7 {
            return Err(Error::NotTransverse { det: sv[k] });
        }
    }
    if sv.len() > expected_dim && sv[expected_dim] > 1.0 - 1e-7 {
        return Err(Error::NotTransverse {
            det: sv[expected_dim],
        });
    }
    let mut basis = DMatrix::zeros(u1.nrows(), expected_dim);
    for k in 0..expected_dim {
        let y = DVector::from_fn(q, |i, _| v_t[(k, i)]);
        let vec = u2 * y;
        basis.column_mut(k).copy_from(&vec);
    }
    orthonormalize_frame_rect(&basis)
}

fn orthonormalize_frame_rect(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    for i in 0..m.ncols() {
        if r[(i, i)].abs() < 1e-10 {
            return Err(Error::Singular { pivot: r[(i, i)] });
        }
    }
    Ok(q.columns(0, m.ncols()).into_owned())
}

/// The unique unipotent element of the radical of the stabilizer of
/// `f_g_plus` sending `f_h_minus` to `f_g_minus`.
pub fn unipotent_transporter(
    f_g_plus: &Flag,
    f_h_minus: &Flag,
    f_g_minus: &Flag,
) -> Result<GroupElement> {
    let m = adapted_frame(f_g_plus, f_h_minus)?;
    let m_inv = m.inverse()?;
    let n = f_g_plus.n();
    // target flag in adapted coordinates
    let y = m_inv.matrix() * f_g_minus.frame();
    let theta = f_g_plus.theta();

    let mut u = DMatrix::identity(n, n);
    for d in theta.indices() {
        // columns of Id + N at trailing positions paired with dimension d:
        // those in the reversed block [n-d+1 ..= n-d_prev]
        let d_prev = theta
            .indices()
            .filter(|x| *x < d)
            .max()
            .unwrap_or(0);
        let w = orthonormalize_frame_rect(&y.columns(0, d).into_owned())?;
        let free = n - d;
        // residual projector applied to the first `free` coordinate vectors
        let mut a = DMatrix::zeros(n, free);
        for r in 0..free {
            let wr = w.row(r).transpose();
            let col = -(&w * &wr);
            a.column_mut(r).copy_from(&col);
            a[(r, r)] += 1.0;
        }
        let svd = a.clone().svd(true, true);
        for i in (n - d + 1)..=(n - d_prev) {
            let idx = i - 1;
            let mut rhs = DVector::zeros(n);
            let wi = w.row(idx).transpose();
            let proj = &w * &wi;
            for r in 0..n {
                rhs[r] = proj[r];
            }
            rhs[idx] -= 1.0;
            // solve a * nu = rhs in the least-squares sense
            let nu = svd
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Invalid(e.to_string()))?;
            let residual = (&a * &nu - &rhs).amax();
            if residual > 1e-6 {
                return Err(Error::IllConditioned { residual });
            }
            for r in 0..free {
                u[(r, idx)] = nu[r];
            }
        }
    }
    let out = m.matrix() * u * m_inv.matrix();
    Ok(GroupElement::new_unchecked(out))
}

/// Stretch amount conjugated into position: `m exp(H) m^{-1}`.
pub fn conjugated_exp(m: &GroupElement, h: &CartanVector) -> Result<GroupElement> {
    if h.is_zero() {
        return Ok(GroupElement::identity(m.n()));
    }
    let m_inv = m.inverse()?;
    Ok(m.mul(&h.exp()).mul(&m_inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sl(rng: &mut ChaCha8Rng, n: usize) -> GroupElement {
        loop {
            let mat = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0f64..1.0));
            let det = mat.determinant();
            if det.abs() > 1e-2 {
                let scale = det.abs().powf(1.0 / n as f64);
                let mut m = mat / scale;
                if det < 0.0 {
                    for i in 0..n {
                        m[(i, 0)] = -m[(i, 0)];
                    }
                }
                return GroupElement::new_unchecked(m);
            }
        }
    }

    fn random_levi(rng: &mut ChaCha8Rng, theta: &RootSubset) -> GroupElement {
        let n = theta.n();
        let mut m = DMatrix::zeros(n, n);
        for (lo, hi) in theta.blocks() {
            loop {
                let size = hi - lo;
                let b = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-1.0f64..1.0));
                if b.determinant().abs() > 1e-2 {
                    m.view_mut((lo, lo), (size, size)).copy_from(&b);
                    break;
                }
            }
        }
        let det = m.determinant();
        if det < 0.0 {
            for i in 0..n {
                m[(i, 0)] = -m[(i, 0)];
            }
        }
        let scale = m.determinant().abs().powf(1.0 / n as f64);
        GroupElement::new_unchecked(m / scale)
    }

    #[test]
    fn standard_flags_are_transverse() {
        let theta = RootSubset::full(4);
        let s = Flag::standard(&theta);
        let o = Flag::opposite_standard(&theta);
        assert!(is_transverse(&s, &o).unwrap());
        assert!(!is_transverse(&s, &s).unwrap());
    }

    #[test]
    fn transversality_is_orbit_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = RootSubset::new(4, [1, 2, 3]).unwrap();
        for _ in 0..20 {
            let g = random_sl(&mut rng, 4);
            let s = Flag::standard(&theta).translate(&g);
            let o = Flag::opposite_standard(&theta).translate(&g);
            assert!(is_transverse(&s, &o).unwrap());
        }
    }

    #[test]
    fn attracting_flag_of_diagonal() {
        let theta = RootSubset::full(3);
        let h = CartanVector::new(vec![2.0f64.ln(), 0.0, -(2.0f64.ln())]).unwrap();
        let g = h.exp();
        let f = attracting_flag(&g, &theta).unwrap();
        assert!(f.approx_eq(&Flag::standard(&theta), 1e-10));
    }

    #[test]
    fn attracting_flag_requires_gap() {
        let theta = RootSubset::full(3);
        let g = GroupElement::identity(3);
        assert!(matches!(
            attracting_flag(&g, &theta),
            Err(Error::NotProximal { .. })
        ));
    }

    #[test]
    fn attracting_flag_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = RootSubset::full(3);
        let h = CartanVector::new(vec![1.1, 0.2, -1.3]).unwrap();
        let g = h.exp();
        for _ in 0..20 {
            let c = random_sl(&mut rng, 3);
            let conj = c.mul(&g).mul(&c.inverse().unwrap());
            let f = attracting_flag(&conj, &theta).unwrap();
            let expected = attracting_flag(&g, &theta).unwrap().translate(&c);
            assert!(
                f.approx_eq(&expected, 1e-8),
                "equivariance failed: {}",
                f.dist(&expected)
            );
        }
    }

    #[test]
    fn attracting_flag_power_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = RootSubset::full(3);
        let h = CartanVector::new(vec![0.9, -0.1, -0.8]).unwrap();
        let c = random_sl(&mut rng, 3);
        let g = c.mul(&h.exp()).mul(&c.inverse().unwrap());
        let f1 = attracting_flag(&g, &theta).unwrap();
        let f3 = attracting_flag(&g.mul(&g).mul(&g), &theta).unwrap();
        assert!(f1.approx_eq(&f3, 1e-9));
    }

    #[test]
    fn adapted_frame_of_standard_pair_is_levi() {
        let theta = RootSubset::new(4, [1, 3]).unwrap();
        let s = Flag::standard(&theta);
        let o = Flag::opposite_standard(&theta);
        let m = adapted_frame(&s, &o).unwrap();
        // must map the standard pair to itself: block diagonal
        let blocks = theta.blocks();
        for (bi, &(lo, hi)) in blocks.iter().enumerate() {
            for (bj, &(lo2, hi2)) in blocks.iter().enumerate() {
                if bi != bj {
                    for i in lo..hi {
                        for j in lo2..hi2 {
                            assert!(m.matrix()[(i, j)].abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn adapted_frame_reproduces_double_flag_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = RootSubset::new(4, [1, 2, 3]).unwrap();
        for _ in 0..20 {
            let g = random_sl(&mut rng, 4);
            let fp = Flag::standard(&theta).translate(&g);
            let fm = Flag::opposite_standard(&theta).translate(&g);
            let m = adapted_frame(&fp, &fm).unwrap();
            assert!(Flag::standard(&theta).translate(&m).approx_eq(&fp, 1e-8));
            assert!(Flag::opposite_standard(&theta)
                .translate(&m)
                .approx_eq(&fm, 1e-8));
        }
    }

    #[test]
    fn levi_ambiguity_leaves_stretch_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = RootSubset::new(3, [1, 2]).unwrap();
        let g = random_sl(&mut rng, 3);
        let fp = Flag::standard(&theta).translate(&g);
        let fm = Flag::opposite_standard(&theta).translate(&g);
        let m = adapted_frame(&fp, &fm).unwrap();
        let h = CartanVector::new(vec![0.3, 0.1, -0.4]).unwrap();
        let t = conjugated_exp(&m, &h).unwrap();
        for _ in 0..10 {
            let l = random_levi(&mut rng, &theta);
            let ml = m.mul(&l);
            let tl = conjugated_exp(&ml, &h).unwrap();
            assert!(t.max_diff(&tl) < 1e-9, "diff {}", t.max_diff(&tl));
        }
    }

    #[test]
    fn transporter_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let theta = RootSubset::full(3);
        let g = random_sl(&mut rng, 3);
        let fp = Flag::standard(&theta).translate(&g);
        let fm = Flag::opposite_standard(&theta).translate(&g);
        let u = unipotent_transporter(&fp, &fm, &fm).unwrap();
        assert!(u.dist_to_identity(false) < 1e-9);
    }

    #[test]
    fn transporter_recovers_known_unipotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let theta = RootSubset::new(4, [2]).unwrap();
        for _ in 0..10 {
            let c = random_sl(&mut rng, 4);
            let fp = Flag::standard(&theta).translate(&c);
            let fm_g = Flag::opposite_standard(&theta).translate(&c);
            // build a known element of the unipotent radical of Stab(fp)
            let mut n = DMatrix::identity(4, 4);
            n[(0, 2)] = rng.gen_range(-0.5..0.5);
            n[(0, 3)] = rng.gen_range(-0.5..0.5);
            n[(1, 2)] = rng.gen_range(-0.5..0.5);
            n[(1, 3)] = rng.gen_range(-0.5..0.5);
            let v = c
                .mul(&GroupElement::new_unchecked(n))
                .mul(&c.inverse().unwrap());
            let fm_h = fm_g.translate(&v.inverse().unwrap());
            let u = unipotent_transporter(&fp, &fm_h, &fm_g).unwrap();
            assert!(u.max_diff(&v) < 1e-8, "diff {}", u.max_diff(&v));
            // unipotent: (u - I)^2 vanishes for this two-block type; the
            // eigenvalues themselves are defective and only accurate to
            // roughly the square root of machine precision
            let nil = u.matrix() - DMatrix::identity(4, 4);
            assert!((&nil * &nil).amax() < 1e-10);
            for m in eigenvalue_moduli(&u) {
                assert!((m - 1.0).abs() < 1e-4);
            }
            // fixes fp
            assert!(fp.translate(&u).approx_eq(&fp, 1e-8));
            assert!(fm_h.translate(&u).approx_eq(&fm_g, 1e-8));
        }
    }

    #[test]
    fn transporter_sl2_closed_form() {
        // flags sharing the fixed point at infinity: transporter is the
        // horocyclic translation z -> z + (g_minus - h_minus)
        let theta = RootSubset::full(2);
        let inf_flag = Flag::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]), theta.clone())
            .unwrap();
        let minus = |x: f64| {
            Flag::new(
                DMatrix::from_row_slice(2, 2, &[x, 1.0, 1.0, 0.0]),
                theta.clone(),
            )
            .unwrap()
        };
        let (a, b) = (0.7, -0.4);
        let u = unipotent_transporter(&inf_flag, &minus(a), &minus(b)).unwrap();
        let expected =
            DMatrix::from_row_slice(2, 2, &[1.0, b - a, 0.0, 1.0]);
        assert!((u.matrix() - expected).amax() < 1e-9);
    }
}
