//! The genus-g surface group (g >= 2) with its canonical presentation and an
//! explicit discrete faithful SL(2,R) representation built from the regular
//! 4g-gon with vertex angle 2*pi/(4g).

use serde::{Deserialize, Serialize};

use crate::hypgeom::{
    moebius_point, rotation_about_i, segment_mapper, Mat2, PlanePoint,
};
use crate::{Error, Result};

/// The canonical presentation `< a1 b1 ... ag bg | [a1,b1]...[ag,bg] >`.
/// Generator index `2k-1` is `a_k`, index `2k` is `b_k`; negative letters are
/// inverses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceGroupPresentation {
    genus: usize,
}

impl SurfaceGroupPresentation {
    pub fn new(genus: usize) -> Result<Self> {
        if genus < 2 {
            return Err(Error::Invalid("genus must be at least 2".into()));
        }
        Ok(Self { genus })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn rank(&self) -> usize {
        2 * self.genus
    }

    pub fn generator_name(&self, index: usize) -> String {
        let k = (index + 1) / 2;
        if index % 2 == 1 {
            format!("a{k}")
        } else {
            format!("b{k}")
        }
    }

    pub fn generator_index(&self, name: &str) -> Result<usize> {
        let (kind, num) = name.split_at(1);
        let k: usize = num
            .parse()
            .map_err(|_| Error::Invalid(format!("bad generator name `{name}`")))?;
        if k == 0 || k > self.genus {
            return Err(Error::Invalid(format!("generator `{name}` out of range")));
        }
        match kind {
            "a" => Ok(2 * k - 1),
            "b" => Ok(2 * k),
            _ => Err(Error::Invalid(format!("bad generator name `{name}`"))),
        }
    }

    /// The surface relator `[a1,b1]...[ag,bg]`.
    pub fn relator(&self) -> Word {
        let mut letters = Vec::with_capacity(4 * self.genus);
        for k in 0..self.genus {
            let a = (2 * k + 1) as i32;
            let b = (2 * k + 2) as i32;
            letters.extend_from_slice(&[a, b, -a, -b]);
        }
        Word::new(letters)
    }
}

/// A freely reduced word in the surface group generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<i32>,
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.letters.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let letters = Vec::<i32>::deserialize(de)?;
        if letters.contains(&0) {
            return Err(serde::de::Error::custom("letter 0 is not a generator"));
        }
        Ok(Word::new(letters))
    }
}

impl Word {
    /// Builds a word, freely reducing it.
    pub fn new(letters: Vec<i32>) -> Self {
        let mut reduced: Vec<i32> = Vec::with_capacity(letters.len());
        for l in letters {
            assert!(l != 0, "letter 0 is not a generator");
            if reduced.last() == Some(&-l) {
                reduced.pop();
            } else {
                reduced.push(l);
            }
        }
        Self { letters: reduced }
    }

    pub fn empty() -> Self {
        Self { letters: Vec::new() }
    }

    pub fn generator(index: usize) -> Self {
        Self {
            letters: vec![index as i32],
        }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self::new(letters)
    }

    pub fn conjugated_by(&self, c: &Self) -> Self {
        c.concat(self).concat(&c.inverse())
    }

    pub fn pow(&self, k: i32) -> Self {
        let base = if k >= 0 { self.clone() } else { self.inverse() };
        let mut out = Self::empty();
        for _ in 0..k.abs() {
            out = out.concat(&base);
        }
        out
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(f), Some(l)) => *f != -*l,
            _ => true,
        }
    }

    /// All cyclic rotations of the word.
    pub fn cyclic_rotations(&self) -> Vec<Word> {
        let n = self.letters.len();
        (0..n.max(1))
            .map(|k| {
                let mut rotated = self.letters[k..].to_vec();
                rotated.extend_from_slice(&self.letters[..k]);
                Word::new(rotated)
            })
            .collect()
    }

    /// Detects `w = v^e` (as written) for some `2 <= e <= max_exp`.
    pub fn is_proper_power(&self, max_exp: usize) -> bool {
        let n = self.letters.len();
        for e in 2..=max_exp {
            if n % e == 0 && n > 0 {
                let period = n / e;
                if (period..n).all(|i| self.letters[i] == self.letters[i - period]) {
                    return true;
                }
            }
        }
        false
    }

    /// Parses a whitespace-separated word such as `a1 b1^-1 a2^2`.
    pub fn parse(s: &str, pres: &SurfaceGroupPresentation) -> Result<Self> {
        let mut letters = Vec::new();
        for token in s.split_whitespace() {
            let (name, exp) = match token.split_once('^') {
                Some((n, e)) => {
                    let exp: i32 = e
                        .parse()
                        .map_err(|_| Error::Invalid(format!("bad exponent in `{token}`")))?;
                    (n, exp)
                }
                None => (token, 1),
            };
            let idx = pres.generator_index(name)? as i32;
            let letter = if exp >= 0 { idx } else { -idx };
            for _ in 0..exp.abs() {
                letters.push(letter);
            }
        }
        Ok(Self::new(letters))
    }

    pub fn display(&self, pres: &SurfaceGroupPresentation) -> String {
        if self.letters.is_empty() {
            return "1".to_string();
        }
        self.letters
            .iter()
            .map(|l| {
                let name = pres.generator_name(l.unsigned_abs() as usize);
                if *l > 0 {
                    name
                } else {
                    format!("{name}^-1")
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A discrete faithful representation of the surface group into SL(2,R).
#[derive(Debug, Clone)]
pub struct FuchsianRep {
    presentation: SurfaceGroupPresentation,
    images: Vec<Mat2>,
    inverses: Vec<Mat2>,
}

impl FuchsianRep {
    pub fn new(presentation: SurfaceGroupPresentation, images: Vec<Mat2>) -> Result<Self> {
        if images.len() != presentation.rank() {
            return Err(Error::Invalid("one image per generator required".into()));
        }
        let inverses = images
            .iter()
            .map(|m| {
                // exact adjugate inverse for det 1
                Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
            })
            .collect();
        Ok(Self {
            presentation,
            images,
            inverses,
        })
    }

    pub fn presentation(&self) -> &SurfaceGroupPresentation {
        &self.presentation
    }

    pub fn genus(&self) -> usize {
        self.presentation.genus()
    }

    pub fn generator_image(&self, index: usize) -> &Mat2 {
        &self.images[index - 1]
    }

    /// Product of generator images along a word.
    pub fn evaluate(&self, w: &Word) -> Mat2 {
        let mut out = Mat2::identity();
        for &l in w.letters() {
            let idx = l.unsigned_abs() as usize;
            assert!(idx >= 1 && idx <= self.images.len(), "unknown generator");
            let m = if l > 0 {
                &self.images[idx - 1]
            } else {
                &self.inverses[idx - 1]
            };
            out *= *m;
        }
        out
    }

    /// Max-norm distance of the relator image from ±Id.
    pub fn relator_residual(&self) -> f64 {
        let r = self.evaluate(&self.presentation.relator());
        let id = Mat2::identity();
        ((r - id).amax()).min((r + id).amax())
    }
}

/// Reduces a word (the constructor already does; exposed for symmetry).
pub fn reduce(w: &Word) -> Word {
    Word::new(w.letters().to_vec())
}

/// Vertices of the regular 4g-gon with vertex angle `2 pi / (4g)`, centered
/// at `i`, listed counterclockwise.
pub fn polygon_vertices(genus: usize) -> Vec<PlanePoint> {
    let sides = 4 * genus;
    let half_angle = std::f64::consts::PI / sides as f64;
    // right triangle (center, edge midpoint, vertex) with angles
    // (pi/sides, pi/2, pi/sides): hypotenuse = circumradius
    let cot = 1.0 / half_angle.tan();
    let circumradius = (cot * cot).acosh();
    let apex = PlanePoint::new(0.0, circumradius.exp()).unwrap();
    (0..sides)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
            moebius_point(&rotation_about_i(phi), &apex)
        })
        .collect()
}

/// The side-pairing representation of the genus-g surface group coming from
/// the regular 4g-gon whose boundary reads `a1 b1 a1^-1 b1^-1 ...`
/// counterclockwise.
///
/// Generator `a_k` carries the side labeled `a_k^-1` onto the side labeled
/// `a_k` matching the direction of the identified arcs; the relator image is
/// ±Id up to floating point error, which is the construction certificate.
pub fn fuchsian_octagon(genus: usize) -> Result<FuchsianRep> {
    let presentation = SurfaceGroupPresentation::new(genus)?;
    let v = polygon_vertices(genus);
    let sides = 4 * genus;
    let mut images = Vec::with_capacity(2 * genus);
    for k in 0..genus {
        let base = 4 * k;
        // side `base` is a_k (v[base] -> v[base+1]); side `base+2` is a_k^-1,
        // so the a_k arrow there runs v[base+3] -> v[base+2]
        let a = segment_mapper(
            &v[(base + 3) % sides],
            &v[(base + 2) % sides],
            &v[base],
            &v[(base + 1) % sides],
        )?;
        // side `base+1` is b_k (v[base+1] -> v[base+2]); side `base+3` is
        // b_k^-1, arrow v[base+4] -> v[base+3]; the b-generator carries the
        // forward instance onto the reversed one so the vertex cycle closes
        // into the canonical relator
        let b = segment_mapper(
            &v[(base + 1) % sides],
            &v[(base + 2) % sides],
            &v[(base + 4) % sides],
            &v[(base + 3) % sides],
        )?;
        images.push(a);
        images.push(b);
    }
    let rep = FuchsianRep::new(presentation, images)?;
    let residual = rep.relator_residual();
    if residual > 1e-9 {
        return Err(Error::RelatorResidual {
            residual,
            limit: 1e-9,
        });
    }
    Ok(rep)
}

/// A generic interior point of the fundamental polygon, used as the base
/// point of transverse arcs.  It keeps hyperbolic distance ~0.95 from every
/// lift of the standard test curves (a1, a2, b1, b2 and the commutator
/// curve) and sits on the a1-handle side of the separating geodesic.
pub fn base_point() -> PlanePoint {
    PlanePoint::new(-0.06, 1.07).unwrap()
}

/// Enumerates freely reduced words of exactly `len` letters, invoking `f`
/// on each.
pub fn for_each_reduced_word(rank: usize, len: usize, f: &mut impl FnMut(&[i32])) {
    let mut stack: Vec<i32> = Vec::with_capacity(len);
    fn rec(rank: usize, len: usize, stack: &mut Vec<i32>, f: &mut impl FnMut(&[i32])) {
        if stack.len() == len {
            f(stack);
            return;
        }
        for idx in 1..=rank as i32 {
            for l in [idx, -idx] {
                if stack.last() == Some(&-l) {
                    continue;
                }
                stack.push(l);
                rec(rank, len, stack, f);
                stack.pop();
            }
        }
    }
    rec(rank, len, &mut stack, f);
}
