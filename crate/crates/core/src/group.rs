//! Elements of `Z^n` and `(Z/pZ)^ν`, signed combinations, and rank over `F_p`.

use std::fmt;
use std::hash::Hash;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{inv_mod, is_prime, mul_mod, reduce_signed};
use crate::error::{Error, Result};

/// Largest modulus accepted by [`FpVector`]; products are formed in `u128`.
pub const MAX_MODULUS: u64 = 1 << 62;

/// Operations a mesh needs from its ambient group.
pub trait GroupElement: Clone + Eq + Hash + Send + Sync + fmt::Debug {
    /// The neutral element of the group `self` lives in.
    fn zero_like(&self) -> Self;
    /// `self += n * other`.
    fn add_scaled(&mut self, other: &Self, n: i64);
    fn is_zero(&self) -> bool;
}

// ---------------------------------------------------------------------------
// LatticePoint

/// A point of `Z^n`, stored without trailing zeros so that equal points
/// compare equal whatever length they were built with.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LatticePoint {
    coords: Vec<BigInt>,
}

impl LatticePoint {
    pub fn new(coords: Vec<BigInt>) -> Self {
        let mut p = LatticePoint { coords };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        LatticePoint { coords: Vec::new() }
    }

    pub fn from_i64s(coords: &[i64]) -> Self {
        Self::new(coords.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// A point of `Z = Z^1`.
    pub fn scalar(v: impl Into<BigInt>) -> Self {
        Self::new(vec![v.into()])
    }

    fn trim(&mut self) {
        while self.coords.last().is_some_and(|c| c.is_zero()) {
            self.coords.pop();
        }
    }

    /// Canonical coordinates (no trailing zeros).
    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    /// Coordinate `i`, zero beyond the stored length.
    pub fn coord(&self, i: usize) -> BigInt {
        self.coords.get(i).cloned().unwrap_or_default()
    }

    /// The single coordinate of a point of `Z`, `None` if the point has
    /// more than one nonzero coordinate.
    pub fn as_scalar(&self) -> Option<BigInt> {
        match self.coords.len() {
            0 => Some(BigInt::zero()),
            1 => Some(self.coords[0].clone()),
            _ => None,
        }
    }

    pub fn is_origin(&self) -> bool {
        self.coords.is_empty()
    }

    /// `|x_1| + ... + |x_n|`.
    pub fn l1_norm(&self) -> BigInt {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    pub fn scaled(&self, n: &BigInt) -> Self {
        Self::new(self.coords.iter().map(|c| c * n).collect())
    }

    fn add_assign_scaled_big(&mut self, other: &Self, n: &BigInt) {
        if n.is_zero() {
            return;
        }
        if self.coords.len() < other.coords.len() {
            self.coords.resize(other.coords.len(), BigInt::zero());
        }
        for (a, b) in self.coords.iter_mut().zip(&other.coords) {
            *a += b * n;
        }
        self.trim();
    }
}

impl GroupElement for LatticePoint {
    fn zero_like(&self) -> Self {
        LatticePoint::zero()
    }

    fn add_scaled(&mut self, other: &Self, n: i64) {
        match n {
            0 => {}
            1 => {
                if self.coords.len() < other.coords.len() {
                    self.coords.resize(other.coords.len(), BigInt::zero());
                }
                for (a, b) in self.coords.iter_mut().zip(&other.coords) {
                    *a += b;
                }
                self.trim();
            }
            -1 => {
                if self.coords.len() < other.coords.len() {
                    self.coords.resize(other.coords.len(), BigInt::zero());
                }
                for (a, b) in self.coords.iter_mut().zip(&other.coords) {
                    *a -= b;
                }
                self.trim();
            }
            _ => self.add_assign_scaled_big(other, &BigInt::from(n)),
        }
    }

    fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        let mut out = self.clone();
        out.add_scaled(rhs, 1);
        out
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        let mut out = self.clone();
        out.add_scaled(rhs, -1);
        out
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        if self.coords.is_empty() {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

/// Serialized as an array of decimal strings; values outgrow 64 bits fast.
impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        strs.serialize(s)
    }
}

/// Accepts an array whose entries are JSON integers or decimal strings.
impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Coord {
            Int(i64),
            Str(String),
        }
        let raw = Vec::<Coord>::deserialize(d)?;
        let mut coords = Vec::with_capacity(raw.len());
        for c in raw {
            coords.push(match c {
                Coord::Int(v) => BigInt::from(v),
                Coord::Str(s) => s
                    .trim()
                    .parse::<BigInt>()
                    .map_err(|e| serde::de::Error::custom(format!("bad integer {s:?}: {e}")))?,
            });
        }
        Ok(LatticePoint::new(coords))
    }
}

// ---------------------------------------------------------------------------
// SignVector

/// A coefficient vector over `{-1, 0, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector {
    signs: Vec<i8>,
}

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| !(-1..=1).contains(*s)) {
            return Err(Error::arg(format!("sign {bad} outside {{-1, 0, 1}}")));
        }
        Ok(SignVector { signs })
    }

    pub fn zeros(n: usize) -> Self {
        SignVector { signs: vec![0; n] }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.signs.iter().all(|&s| s == 0)
    }

    pub fn negated(&self) -> Self {
        SignVector {
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        SignVector::new(v)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(s: SignVector) -> Vec<i8> {
        s.signs
    }
}

/// `Σ eps_i · elements[i]` in `Z^n`, exactly. The empty sum is the origin.
pub fn signed_combination(elements: &[LatticePoint], eps: &SignVector) -> Result<LatticePoint> {
    signed_combination_in(&LatticePoint::zero(), elements, eps)
}

/// `Σ eps_i · elements[i]` starting from the group's neutral element `zero`.
pub fn signed_combination_in<G: GroupElement>(zero: &G, elements: &[G], eps: &SignVector) -> Result<G> {
    if elements.len() != eps.len() {
        return Err(Error::arg(format!(
            "{} elements but {} signs",
            elements.len(),
            eps.len()
        )));
    }
    let mut acc = zero.clone();
    for (e, &s) in elements.iter().zip(eps.signs()) {
        acc.add_scaled(e, s as i64);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// FpVector

/// An element of `(Z/pZ)^ν` with every coordinate reduced into `[0, p)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FpVector {
    p: u64,
    coords: Vec<u64>,
}

/// Checks that `p` is a prime this crate can work with.
pub fn check_modulus(p: u64) -> Result<()> {
    if p >= MAX_MODULUS {
        return Err(Error::arg(format!("modulus {p} exceeds 2^62")));
    }
    if !is_prime(p) {
        return Err(Error::arg(format!("modulus {p} is not prime")));
    }
    Ok(())
}

impl FpVector {
    /// Builds a vector from residues, reducing each one mod `p`.
    pub fn new(p: u64, coords: Vec<u64>) -> Result<Self> {
        check_modulus(p)?;
        if coords.is_empty() {
            return Err(Error::arg("dimension must be at least 1"));
        }
        Ok(Self::from_reduced(p, coords.into_iter().map(|c| c % p).collect()))
    }

    pub fn from_signed(p: u64, coords: &[i64]) -> Result<Self> {
        check_modulus(p)?;
        if coords.is_empty() {
            return Err(Error::arg("dimension must be at least 1"));
        }
        Ok(Self::from_reduced(
            p,
            coords.iter().map(|&c| reduce_signed(c, p)).collect(),
        ))
    }

    /// Caller guarantees `p` prime and every coordinate `< p`.
    pub(crate) fn from_reduced(p: u64, coords: Vec<u64>) -> Self {
        debug_assert!(coords.iter().all(|&c| c < p));
        FpVector { p, coords }
    }

    pub fn zero(p: u64, dim: usize) -> Result<Self> {
        Self::new(p, vec![0; dim.max(1)])
    }

    /// The standard basis vector `e_i` of `F_p^dim`.
    pub fn unit(p: u64, dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::arg(format!("unit index {i} >= dimension {dim}")));
        }
        let mut c = vec![0; dim];
        c[i] = 1;
        Self::new(p, c)
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn is_zero_vector(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn scaled(&self, s: u64) -> Self {
        let s = s % self.p;
        FpVector::from_reduced(
            self.p,
            self.coords.iter().map(|&c| mul_mod(c, s, self.p)).collect(),
        )
    }

    /// Embeds into a larger space, placing the coordinates at `offset`.
    pub fn embed(&self, total_dim: usize, offset: usize) -> Result<Self> {
        if offset + self.dim() > total_dim {
            return Err(Error::arg("embedding does not fit"));
        }
        let mut c = vec![0; total_dim];
        c[offset..offset + self.dim()].copy_from_slice(&self.coords);
        Ok(FpVector::from_reduced(self.p, c))
    }
}

impl GroupElement for FpVector {
    fn zero_like(&self) -> Self {
        FpVector::from_reduced(self.p, vec![0; self.coords.len()])
    }

    fn add_scaled(&mut self, other: &Self, n: i64) {
        assert_eq!(self.p, other.p, "mixed moduli");
        assert_eq!(self.dim(), other.dim(), "mixed dimensions");
        let s = reduce_signed(n, self.p);
        if s == 0 {
            return;
        }
        let p = self.p;
        for (a, &b) in self.coords.iter_mut().zip(&other.coords) {
            *a = ((*a as u128 + b as u128 * s as u128) % p as u128) as u64;
        }
    }

    fn is_zero(&self) -> bool {
        self.is_zero_vector()
    }
}

impl fmt::Debug for FpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} mod {}", self.coords, self.p)
    }
}

// ---------------------------------------------------------------------------
// rank over F_p

/// Row echelon form over `F_p`, grown one vector at a time.
///
/// Each stored row is normalized so its pivot entry is 1, and later rows have
/// zeros in every earlier pivot column.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    p: u64,
    dim: usize,
    rows: Vec<(usize, Vec<u64>)>,
}

impl EchelonBasis {
    pub fn new(p: u64, dim: usize) -> Self {
        EchelonBasis {
            p,
            dim,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the stored rows.
    pub fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let p = self.p;
        let mut w = v.to_vec();
        for (pivot, row) in &self.rows {
            let f = w[*pivot];
            if f == 0 {
                continue;
            }
            let neg = p - f;
            for (a, &b) in w.iter_mut().zip(row).skip(*pivot) {
                if b != 0 {
                    *a = ((*a as u128 + neg as u128 * b as u128) % p as u128) as u64;
                }
            }
        }
        w
    }

    /// Adds `v` if it is outside the current span; returns whether it was.
    pub fn insert(&mut self, v: &[u64]) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let mut w = self.reduce(v);
        let Some(pivot) = w.iter().position(|&c| c != 0) else {
            return false;
        };
        let inv = inv_mod(w[pivot], self.p);
        for c in w.iter_mut().skip(pivot) {
            *c = mul_mod(*c, inv, self.p);
        }
        self.rows.push((pivot, w));
        true
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        self.reduce(v).iter().all(|&c| c == 0)
    }

    /// Drops the most recently inserted row.
    pub fn pop(&mut self) {
        self.rows.pop();
    }
}

fn check_uniform(vectors: &[FpVector]) -> Result<Option<(u64, usize)>> {
    let Some(first) = vectors.first() else {
        return Ok(None);
    };
    let (p, dim) = (first.p, first.dim());
    for v in vectors {
        if v.p != p {
            return Err(Error::arg(format!("mixed moduli {} and {}", p, v.p)));
        }
        if v.dim() != dim {
            return Err(Error::arg(format!("mixed dimensions {} and {}", dim, v.dim())));
        }
    }
    Ok(Some((p, dim)))
}

/// Dimension of the `F_p`-span of `vectors` (0 for the empty list).
pub fn fp_rank(vectors: &[FpVector]) -> Result<usize> {
    let Some((p, dim)) = check_uniform(vectors)? else {
        return Ok(0);
    };
    let mut basis = EchelonBasis::new(p, dim);
    for v in vectors {
        basis.insert(&v.coords);
        if basis.rank() == dim {
            break;
        }
    }
    Ok(basis.rank())
}

/// Linear independence over `F_p`. The empty family is free.
pub fn is_free(vectors: &[FpVector]) -> Result<bool> {
    Ok(fp_rank(vectors)? == vectors.len())
}
