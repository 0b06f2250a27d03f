//! Lie-theoretic structure of SL(n,R).
//!
//! The Cartan subspace `a` is the space of traceless diagonal n-tuples, the
//! simple roots are `alpha_i(H) = h_i - h_{i+1}`, and a subset `theta` of
//! `{1, ..., n-1}` singles out the subspace `a_theta` on which the roots
//! outside `theta` vanish.  Everything here is a pure function of its inputs.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Trace-zero tolerance enforced on construction and deserialization.
pub const TRACE_TOL: f64 = 1e-12;
/// Determinant tolerance for SL(n,R) elements.
pub const DET_TOL: f64 = 1e-9;

/// An element of the Cartan subspace: the diagonal of a traceless matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanVector {
    entries: Vec<f64>,
}

impl CartanVector {
    /// Builds a Cartan vector, checking the trace-zero invariant.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Invalid("CartanVector needs n >= 2".into()));
        }
        let trace: f64 = entries.iter().sum();
        let scale = entries.iter().map(|h| h.abs()).fold(1.0, f64::max);
        if trace.abs() > TRACE_TOL * scale.max(1.0) * 10.0 {
            return Err(Error::Invalid(format!(
                "CartanVector has nonzero trace {trace:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    /// Builds a Cartan vector from arbitrary entries by removing the mean.
    pub fn traceless(mut entries: Vec<f64>) -> Self {
        let mean: f64 = entries.iter().sum::<f64>() / entries.len() as f64;
        for h in &mut entries {
            *h -= mean;
        }
        Self { entries }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            entries: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|h| *h == 0.0)
    }

    /// The opposition involution: reverse the entries and negate them.
    pub fn opposition(&self) -> Self {
        let entries = self.entries.iter().rev().map(|h| -h).collect();
        Self { entries }
    }

    /// Value of the simple root `alpha_i`, `i` in `1..n`.
    pub fn simple_root(&self, i: usize) -> f64 {
        self.entries[i - 1] - self.entries[i]
    }

    /// Norm on `a`: the maximum of `|alpha(H)|` over all roots
    /// `alpha_{ij}(H) = h_i - h_j`, which is `max(H) - min(H)`.
    pub fn a_norm(&self) -> f64 {
        let max = self.entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.entries.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Projection to `a_theta`: averages the entries over every block of
    /// consecutive indices not separated by `theta`.
    pub fn project_theta(&self, theta: &RootSubset) -> Self {
        let mut entries = self.entries.clone();
        for (start, end) in theta.blocks() {
            let mean: f64 = entries[start..end].iter().sum::<f64>() / (end - start) as f64;
            for h in &mut entries[start..end] {
                *h = mean;
            }
        }
        Self { entries }
    }

    /// Checks membership in `a_theta` within `tol`.
    pub fn in_a_theta(&self, theta: &RootSubset, tol: f64) -> bool {
        (1..self.dim())
            .filter(|i| !theta.contains(*i))
            .all(|i| self.simple_root(i).abs() <= tol)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|h| t * h).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Exponential: the positive diagonal matrix `exp(H)`.
    pub fn exp(&self) -> GroupElement {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, h) in self.entries.iter().enumerate() {
            m[(i, i)] = h.exp();
        }
        GroupElement::new_unchecked(m)
    }

    /// Max-norm distance to another Cartan vector.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Serialize for CartanVector {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CartanVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<f64>::deserialize(de)?;
        CartanVector::new(entries).map_err(serde::de::Error::custom)
    }
}

/// A subset of the simple roots `{alpha_1, ..., alpha_{n-1}}`, stored by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSubset {
    n: usize,
    indices: BTreeSet<usize>,
}

impl RootSubset {
    pub fn new(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid("need n >= 2".into()));
        }
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if indices.iter().any(|i| *i == 0 || *i >= n) {
            return Err(Error::Invalid(format!(
                "root indices must lie in 1..{n}"
            )));
        }
        Ok(Self { n, indices })
    }

    /// The full set of simple roots.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (1..n).collect(),
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            indices: BTreeSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    /// Invariance under the opposition involution `alpha_i -> alpha_{n-i}`.
    pub fn is_iota_invariant(&self) -> bool {
        self.indices.iter().all(|i| self.indices.contains(&(self.n - i)))
    }

    /// Maximal subset `theta'` of `theta` with `iota(theta') ∩ theta' = ∅`:
    /// the indices `i` in `theta` with `i < n - i`.
    pub fn theta_prime(&self) -> Self {
        Self {
            n: self.n,
            indices: self.indices.iter().copied().filter(|i| 2 * i < self.n).collect(),
        }
    }

    /// Consecutive index blocks of `{0, ..., n-1}` not separated by `theta`,
    /// as half-open ranges.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut cuts: Vec<usize> = self.indices.iter().copied().collect();
        cuts.push(self.n);
        let mut blocks = Vec::with_capacity(cuts.len());
        let mut start = 0;
        for c in cuts {
            blocks.push((start, c));
            start = c;
        }
        blocks
    }
}

/// An element of SL(n,R) (or of GL with determinant ±1 in PSL mode).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    mat: DMatrix<f64>,
}

impl GroupElement {
    /// Builds an element, checking `|det - 1| <= DET_TOL`.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let det = mat.determinant();
        if (det - 1.0).abs() > DET_TOL {
            return Err(Error::Invalid(format!(
                "matrix determinant {det:.9} is not 1"
            )));
        }
        Ok(Self { mat })
    }

    /// Builds an element without the determinant check.  Used internally for
    /// matrices that are SL by construction.
    pub fn new_unchecked(mat: DMatrix<f64>) -> Self {
        Self { mat }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn det(&self) -> f64 {
        self.mat.determinant()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        self.mat
            .clone()
            .try_inverse()
            .map(|mat| Self { mat })
            .ok_or(Error::Singular { pivot: 0.0 })
    }

    /// Inverse sharpened by one Newton step with a compensated residual,
    /// accurate to the last f64 digit for moderately conditioned inputs.
    pub fn refined_inverse(&self) -> Result<Self> {
        let x0 = self.inverse()?;
        let e = dd::identity_residual(&self.mat, x0.matrix());
        let mat = x0.matrix() + x0.matrix() * e;
        Ok(Self { mat })
    }

    /// Max-norm distance to another element.
    pub fn max_diff(&self, other: &Self) -> f64 {
        (&self.mat - &other.mat).amax()
    }

    /// Max-norm distance up to global sign when `psl` is set.
    pub fn dist(&self, other: &Self, psl: bool) -> f64 {
        let plus = self.max_diff(other);
        if psl {
            let minus = (&self.mat + &other.mat).amax();
            plus.min(minus)
        } else {
            plus
        }
    }

    /// Max-norm distance to ±identity.
    pub fn dist_to_identity(&self, psl: bool) -> f64 {
        self.dist(&Self::identity(self.n()), psl)
    }
}

impl Serialize for GroupElement {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.mat.nrows())
            .map(|i| self.mat.row(i).iter().copied().collect())
            .collect();
        rows.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix must be square, n >= 2"));
        }
        let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        GroupElement::new(mat).map_err(serde::de::Error::custom)
    }
}

/// Iwasawa decomposition `g = k exp(a) u` with `k` orthogonal, `exp(a)`
/// positive diagonal and `u` upper unitriangular, via QR with the sign
/// convention forcing a positive diagonal.
pub fn iwasawa(g: &GroupElement) -> Result<(GroupElement, CartanVector, GroupElement)> {
    let n = g.n();
    let qr = g.matrix().clone().qr();
    let mut k = qr.q();
    let mut r = qr.r();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in 0..n {
                k[(j, i)] = -k[(j, i)];
                r[(i, j)] = -r[(i, j)];
            }
        }
    }
    let scale = r.amax();
    let mut a = Vec::with_capacity(n);
    for i in 0..n {
        let pivot = r[(i, i)];
        if pivot <= scale * 1e-13 {
            return Err(Error::Singular { pivot });
        }
        a.push(pivot.ln());
    }
    let mut u = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            u[(i, j)] = r[(i, j)] / r[(i, i)];
        }
    }
    Ok((
        GroupElement::new_unchecked(k),
        CartanVector::new_unnormalized(a),
        GroupElement::new_unchecked(u),
    ))
}

impl CartanVector {
    /// Internal constructor for Iwasawa output, which is traceless only up to
    /// the determinant tolerance of the input.
    fn new_unnormalized(entries: Vec<f64>) -> Self {
        Self { entries }
    }
}

/// Busemann cocycle `sigma_theta(g, F)` for a flag `F` given by a frame whose
/// orthonormalization refines it: decompose `g k = k' exp(a) u` and project
/// `a` to `a_theta`.
pub fn busemann(g: &GroupElement, frame: &DMatrix<f64>, theta: &RootSubset) -> Result<CartanVector> {
    let k = orthonormalize_frame(frame)?;
    let gk = GroupElement::new_unchecked(g.matrix() * k);
    let (_, a, _) = iwasawa(&gk)?;
    Ok(a.project_theta(theta))
}

/// Gram-Schmidt in column order; the leading column spans are preserved, so
/// the flag is unchanged.
pub fn orthonormalize_frame(frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = frame.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let scale = r.amax();
    for i in 0..frame.ncols() {
        if r[(i, i)].abs() <= scale * 1e-13 {
            return Err(Error::Singular { pivot: r[(i, i)] });
        }
        if r[(i, i)] < 0.0 {
            for j in 0..frame.nrows() {
                q[(j, i)] = -q[(j, i)];
            }
        }
    }
    Ok(q)
}

/// Cartan projection: the vector of logarithms of singular values, sorted in
/// descending order.
pub fn cartan_projection(g: &GroupElement) -> CartanVector {
    let svd = g.matrix().clone().svd(false, false);
    let mut logs: Vec<f64> = svd.singular_values.iter().map(|s| s.ln()).collect();
    logs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    CartanVector::new_unnormalized(logs)
}

/// Diagnostic bi-invariant-ish metric on G: the `a`-norm of the Cartan
/// projection of `a^{-1} b`.
pub fn d_g(a: &GroupElement, b: &GroupElement) -> f64 {
    let rel = a
        .inverse()
        .expect("group element is invertible")
        .mul(b);
    cartan_projection(&rel).a_norm()
}

/// Eigenvalue moduli of `g`, sorted in descending order.
pub fn eigenvalue_moduli(g: &GroupElement) -> Vec<f64> {
    let eig = g.matrix().clone().complex_eigenvalues();
    let mut moduli: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    moduli
}

/// Double-double compensated arithmetic for long matrix product chains.
///
/// Word evaluation multiplies matrices whose intermediate magnitudes can
/// dwarf the final result; carrying an error term through the products keeps
/// the rounded result accurate to the last f64 digit.
pub mod dd {
    use nalgebra::DMatrix;

    /// An unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
    #[derive(Debug, Clone, Copy)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    impl Dd {
        pub fn from(x: f64) -> Self {
            Self { hi: x, lo: 0.0 }
        }

        pub fn round(self) -> f64 {
            self.hi + self.lo
        }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        let err = a.mul_add(b, -p);
        Dd { hi: p, lo: err }
    }

    pub fn add(a: Dd, b: Dd) -> Dd {
        let s = two_sum(a.hi, b.hi);
        let lo = s.lo + a.lo + b.lo;
        let hi = s.hi + lo;
        Dd {
            hi,
            lo: lo - (hi - s.hi),
        }
    }

    pub fn mul(a: Dd, b: Dd) -> Dd {
        let p = two_prod(a.hi, b.hi);
        let lo = p.lo + a.hi * b.lo + a.lo * b.hi;
        let hi = p.hi + lo;
        Dd {
            hi,
            lo: lo - (hi - p.hi),
        }
    }

    /// `I - a x` evaluated with a compensated product, so the residual of an
    /// approximate inverse survives the cancellation.
    pub fn identity_residual(a: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = Dd::from(if i == j { 1.0 } else { 0.0 });
            for k in 0..n {
                s = add(s, mul(Dd::from(-a[(i, k)]), Dd::from(x[(k, j)])));
            }
            s.round()
        })
    }

    /// Product chain of f64 matrices carried in double-double.
    pub fn matrix_chain_product(factors: &[&DMatrix<f64>], n: usize) -> DMatrix<f64> {
        let mut acc: Vec<Dd> = DMatrix::<f64>::identity(n, n)
            .iter()
            .map(|x| Dd::from(*x))
            .collect();
        for f in factors {
            // next = acc * f, column-major: entry (i, j) at [j * n + i]
            let mut next = vec![Dd::from(0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = Dd::from(0.0);
                    for k in 0..n {
                        let a = acc[k * n + i];
                        let b = Dd::from(f[(k, j)]);
                        s = add(s, mul(a, b));
                    }
                    next[j * n + i] = s;
                }
            }
            acc = next;
        }
        DMatrix::from_fn(n, n, |i, j| acc[j * n + i].round())
    }
}

/// Column vector of a matrix as a DVector.
