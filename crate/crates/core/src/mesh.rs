//! Meshes `M = Σ_j {n_j γ_j}`, `(n_j) ∈ E`, and intersection counts `|Λ ∩ M|`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::Signed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::construction::quarter_klog2k_ceil;
use crate::digits::{Digits, SuperIncreasing};
use crate::error::{Error, Result};
use crate::group::{EchelonBasis, FpVector, GroupElement, LatticePoint};
use crate::growth::GrowthFunction;
use crate::rng::{stream, Purpose};

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// The coefficient set `E ⊂ Z^k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientDomain {
    /// All `(n_j)` with `|n_j| <= h`: a mesh of height `h`.
    Box { h: u32 },
    Explicit(Vec<Vec<i64>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mesh<G> {
    basis: Vec<G>,
    domain: CoefficientDomain,
}

impl<G: GroupElement> Mesh<G> {
    pub fn new(basis: Vec<G>, domain: CoefficientDomain) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::arg("a mesh needs at least one generator"));
        }
        let domain = match domain {
            CoefficientDomain::Explicit(mut e) => {
                if e.is_empty() {
                    return Err(Error::arg("empty coefficient set"));
                }
                if e.iter().any(|n| n.len() != basis.len()) {
                    return Err(Error::arg("coefficient vectors must have length k"));
                }
                e.sort();
                e.dedup();
                CoefficientDomain::Explicit(e)
            }
            b => b,
        };
        Ok(Mesh { basis, domain })
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[G] {
        &self.basis
    }

    pub fn domain(&self) -> &CoefficientDomain {
        &self.domain
    }

    /// `h` for a box; `max |n_j|` over an explicit set.
    pub fn height(&self) -> u64 {
        match &self.domain {
            CoefficientDomain::Box { h } => *h as u64,
            CoefficientDomain::Explicit(e) => e
                .iter()
                .flat_map(|n| n.iter())
                .map(|v| v.unsigned_abs())
                .max()
                .unwrap_or(0),
        }
    }

    /// `sup_{(n_j) ∈ E} |n_1| + ... + |n_k|`.
    pub fn sup_l1(&self) -> u64 {
        match &self.domain {
            CoefficientDomain::Box { h } => self.k() as u64 * *h as u64,
            CoefficientDomain::Explicit(e) => e
                .iter()
                .map(|n| n.iter().map(|v| v.unsigned_abs()).sum())
                .max()
                .unwrap_or(0),
        }
    }

    /// `|E|` (saturating).
    pub fn domain_size(&self) -> u64 {
        match &self.domain {
            CoefficientDomain::Box { h } => {
                let side = 2 * *h as u64 + 1;
                (0..self.k()).try_fold(1u64, |acc, _| acc.checked_mul(side)).unwrap_or(u64::MAX)
            }
            CoefficientDomain::Explicit(e) => e.len() as u64,
        }
    }
}

/// All points `Σ n_j γ_j`, duplicates collapsed.
pub fn mesh_members<G: GroupElement>(mesh: &Mesh<G>, cap: u64) -> Result<HashSet<G>> {
    let size = mesh.domain_size();
    if size > cap {
        return Err(Error::resource("mesh enumeration", size, cap));
    }
    let mut out = HashSet::with_capacity(size as usize);
    let zero = mesh.basis[0].zero_like();
    match &mesh.domain {
        CoefficientDomain::Explicit(e) => {
            for n in e {
                let mut x = zero.clone();
                for (g, &c) in mesh.basis.iter().zip(n) {
                    x.add_scaled(g, c);
                }
                out.insert(x);
            }
        }
        CoefficientDomain::Box { h } => {
            let h = *h as i64;
            let k = mesh.k();
            let mut digits = vec![-h; k];
            let mut x = zero;
            for g in &mesh.basis {
                x.add_scaled(g, -h);
            }
            loop {
                out.insert(x.clone());
                let mut j = 0;
                loop {
                    if j == k {
                        return Ok(out);
                    }
                    if digits[j] < h {
                        digits[j] += 1;
                        x.add_scaled(&mesh.basis[j], 1);
                        break;
                    }
                    digits[j] = -h;
                    x.add_scaled(&mesh.basis[j], -2 * h);
                    j += 1;
                }
            }
        }
    }
    Ok(out)
}

/// `|Λ ∩ M|` by enumerating `M`.
pub fn mesh_count<G: GroupElement>(lambda: &[G], mesh: &Mesh<G>, cap: u64) -> Result<usize> {
    let members = mesh_members(mesh, cap)?;
    let distinct: HashSet<&G> = lambda.iter().collect();
    Ok(distinct.into_iter().filter(|x| members.contains(*x)).count())
}

/// `|Λ ∩ M|` in `F_p^d`. A box with `2h + 1 >= p` covers every residue in
/// each coordinate, so the mesh is the span of its generators and membership
/// is a rank test; smaller boxes are enumerated.
pub fn fp_mesh_count(lambda: &[FpVector], mesh: &Mesh<FpVector>, cap: u64) -> Result<usize> {
    let first = &mesh.basis()[0];
    let (p, dim) = (first.modulus(), first.dim());
    if mesh
        .basis()
        .iter()
        .chain(lambda)
        .any(|v| v.modulus() != p || v.dim() != dim)
    {
        return Err(Error::arg("mixed moduli or dimensions"));
    }
    match mesh.domain() {
        CoefficientDomain::Box { h } if 2 * *h as u64 + 1 >= p => {
            let mut span = EchelonBasis::new(p, dim);
            for g in mesh.basis() {
                span.insert(g.coords());
            }
            let distinct: HashSet<&FpVector> = lambda.iter().collect();
            Ok(distinct.into_iter().filter(|x| span.contains(x.coords())).count())
        }
        _ => mesh_count(lambda, mesh, cap),
    }
}

/// Membership in meshes generated by β's of a super-increasing system,
/// decided by digit extraction instead of enumeration.
///
/// Applies to box meshes whose generators are `±β_i` and whose height,
/// times the multiplicity of `β_i` among the generators, stays within the
/// system's bound for index `i`. Every such mesh point then has a unique
/// bounded digit vector, so a point of `Λ` lies in the mesh exactly when its
/// digits are supported on the generators and fit the height.
pub struct DigitIndex<'a> {
    system: &'a SuperIncreasing,
    position: HashMap<&'a BigInt, usize>,
    digits: Vec<Option<Digits>>,
}

impl<'a> DigitIndex<'a> {
    pub fn new(system: &'a SuperIncreasing, lambda: &[LatticePoint]) -> Self {
        let distinct: Vec<&LatticePoint> = {
            let mut seen = HashSet::new();
            lambda.iter().filter(|x| seen.insert(*x)).collect()
        };
        let digits = distinct
            .par_iter()
            .map(|x| x.as_scalar().and_then(|v| system.decompose(&v)))
            .collect();
        let position = system.betas().iter().enumerate().map(|(i, b)| (b, i)).collect();
        DigitIndex {
            system,
            position,
            digits,
        }
    }

    /// Per-index digit allowance of the mesh, or `None` if the fast path
    /// does not apply.
    fn allowances(&self, mesh: &Mesh<LatticePoint>) -> Option<HashMap<usize, BigInt>> {
        let CoefficientDomain::Box { h } = mesh.domain() else {
            return None;
        };
        let mut mult: HashMap<usize, u64> = HashMap::new();
        for g in mesh.basis() {
            let v = g.as_scalar()?.abs();
            let i = *self.position.get(&v)?;
            *mult.entry(i).or_default() += 1;
        }
        let mut out = HashMap::with_capacity(mult.len());
        for (i, m) in mult {
            let allow = BigInt::from(*h as u64 * m);
            if allow > self.system.bounds()[i] {
                return None;
            }
            out.insert(i, allow);
        }
        Some(out)
    }

    /// `|Λ ∩ M|`, or `None` when the mesh is not digit-addressable.
    pub fn count(&self, mesh: &Mesh<LatticePoint>) -> Option<usize> {
        let allow = self.allowances(mesh)?;
        Some(
            self.digits
                .iter()
                .flatten()
                .filter(|d| {
                    d.iter()
                        .all(|(i, n)| allow.get(i).is_some_and(|a| n.abs() <= *a))
                })
                .count(),
        )
    }
}

/// `C · k · ln(1 + sup_l1)`.
pub fn sidon_mesh_bound(k: u64, sup_l1: u64, c: f64) -> f64 {
    c * k as f64 * (sup_l1 as f64).ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `count <= bound` passes.
    Upper,
    /// `count >= bound` passes.
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeshBound {
    /// `k · w(k)`
    KwK { w: GrowthFunction },
    /// `k · w(k h)`
    KwKh { w: GrowthFunction },
    /// `C k ln(1 + sup ℓ¹)`
    Sidon { c: f64 },
    /// `⌈¼ k log₂ k⌉`, as a lower bound.
    QuarterKLog2K,
}

impl MeshBound {
    pub fn evaluate<G: GroupElement>(&self, mesh: &Mesh<G>) -> (f64, Side) {
        let k = mesh.k() as f64;
        match self {
            MeshBound::KwK { w } => (k * w.eval(k), Side::Upper),
            MeshBound::KwKh { w } => (k * w.eval(k * mesh.height() as f64), Side::Upper),
            MeshBound::Sidon { c } => (sidon_mesh_bound(mesh.k() as u64, mesh.sup_l1(), *c), Side::Upper),
            MeshBound::QuarterKLog2K => (quarter_klog2k_ceil(mesh.k() as u64) as f64, Side::Lower),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshReport {
    pub k: usize,
    pub h: u64,
    pub domain_size: u64,
    pub count: usize,
    pub bound: f64,
    pub side: Side,
    pub pass: bool,
}

impl MeshReport {
    pub fn new<G: GroupElement>(mesh: &Mesh<G>, count: usize, bound: &MeshBound) -> Self {
        let (value, side) = bound.evaluate(mesh);
        let pass = match side {
            Side::Upper => count as f64 <= value,
            Side::Lower => count as f64 >= value,
        };
        MeshReport {
            k: mesh.k(),
            h: mesh.height(),
            domain_size: mesh.domain_size(),
            count,
            bound: value,
            side,
            pass,
        }
    }
}

/// One report per mesh, counting with `count` (run in parallel, order kept).
pub fn check_mesh_condition<G, F>(meshes: &[Mesh<G>], bound: &MeshBound, count: F) -> Result<Vec<MeshReport>>
where
    G: GroupElement,
    F: Fn(&Mesh<G>) -> Result<usize> + Sync,
{
    meshes
        .par_iter()
        .map(|m| Ok(MeshReport::new(m, count(m)?, bound)))
        .collect()
}

/// [`check_mesh_condition`] counting by enumeration.
pub fn check_mesh_condition_enumerated<G: GroupElement>(
    lambda: &[G],
    meshes: &[Mesh<G>],
    bound: &MeshBound,
    cap: u64,
) -> Result<Vec<MeshReport>> {
    check_mesh_condition(meshes, bound, |m| mesh_count(lambda, m, cap))
}

/// `count` random box meshes with `1 <= k <= k_max`, `1 <= h <= h_max`;
/// mesh `i` uses its own stream so the family does not depend on order.
pub fn sample_box_meshes<G, F>(seed: u64, count: usize, k_max: usize, h_max: u32, draw: F) -> Result<Vec<Mesh<G>>>
where
    G: GroupElement,
    F: Fn(&mut ChaCha8Rng) -> G,
{
    if k_max == 0 || h_max == 0 {
        return Err(Error::arg("k_max and h_max must be positive"));
    }
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, Purpose::Meshes, i as u64);
            let k = rng.random_range(1..=k_max);
            let h = rng.random_range(1..=h_max);
            let basis = (0..k).map(|_| draw(&mut rng)).collect();
            Mesh::new(basis, CoefficientDomain::Box { h })
        })
        .collect()
}

/// `k,h,domain_size,count,bound,side,pass` rows.
pub fn reports_to_csv(reports: &[MeshReport]) -> String {
    let mut out = String::from("k,h,domain_size,count,bound,side,pass\n");
    for r in reports {
        let side = match r.side {
            Side::Upper => "upper",
            Side::Lower => "lower",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k, r.h, r.domain_size, r.count, r.bound, side, r.pass
        );
    }
    out
}
