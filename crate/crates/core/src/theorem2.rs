//! Finite prefixes of a union of random blocks `Λ_ℓ ⊂ (Z/pZ)^{ν_ℓ}` that
//! meets every k-mesh in at most `k w(k)` points without being Sidon.
//!
//! Block `ℓ` lives in its own coordinates and is a Lemma set: `ℓν_ℓ <=
//! |Λ_ℓ| <= 3ℓν_ℓ` with every subset of size `<= K_ℓ ν_ℓ` free. Its size over
//! its rank is at least `ℓ`, which is unbounded.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{fp_rank, EchelonBasis, FpVector};
use crate::growth::{GrowthFunction, Reach};
use crate::mesh::{mesh_members, sample_box_meshes, CoefficientDomain, Mesh, MeshBound, MeshReport, DEFAULT_ENUMERATION_CAP};
use crate::rng::{child_seed, Purpose};
use crate::selection::{k_ell, lemma_search, FreenessRatio, LemmaCertificate, SelectionConfig, DEFAULT_RETRIES};

pub const DEFAULT_NU_CAP: u32 = 24;
pub const MIN_NU: u64 = 16;

/// The least admissible `ν_ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuChoice {
    Exact(u64),
    /// Too large for a double-precision integer; natural log given.
    Astronomical { ln_nu: f64 },
}

impl NuChoice {
    /// The value clipped to `cap`, and whether the cap was binding.
    pub fn capped(self, cap: u32) -> (u32, bool) {
        match self {
            NuChoice::Exact(n) if n <= cap as u64 => (n as u32, false),
            _ => (cap, true),
        }
    }
}

const EXACT_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

/// The least `ν >= 16` with `3ℓ/K_ℓ <= w(K_ℓ ν)`, found by inverting `w`
/// in closed form and correcting the rounding by direct evaluation.
pub fn choose_nu(ell: u64, p: u64, w: &GrowthFunction) -> Result<NuChoice> {
    if ell == 0 {
        return Err(Error::arg("ell must be at least 1"));
    }
    let k = k_ell(p, ell);
    let target = 3.0 * ell as f64 / k;
    let holds = |nu: u64| w.eval(k * nu as f64) >= target;
    if holds(MIN_NU) {
        return Ok(NuChoice::Exact(MIN_NU));
    }
    let ln_x = match w.reach(target) {
        Reach::Ln(v) => v,
        Reach::Never => {
            return Err(Error::Config(format!(
                "growth function {w} never reaches 3 ell / K = {target}"
            )))
        }
    };
    let ln_nu = ln_x - k.ln();
    if ln_nu >= EXACT_LIMIT.ln() - 1.0 {
        return Ok(NuChoice::Astronomical { ln_nu });
    }
    let mut nu = (ln_nu.exp().ceil() as u64).max(MIN_NU);
    while nu > MIN_NU && holds(nu - 1) {
        nu -= 1;
    }
    while !holds(nu) {
        nu += 1;
    }
    Ok(NuChoice::Exact(nu))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    pub ell: u64,
    pub nu: u32,
    pub nu_required: NuChoice,
    pub capped: bool,
    /// `3ℓ/K_ℓ <= w(K_ℓ ν_ℓ)` at the built `ν_ℓ`.
    pub condition_holds: bool,
    /// First coordinate of the block in the ambient space.
    pub offset: usize,
    pub certificate: LemmaCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockConstruction {
    pub p: u64,
    pub w: GrowthFunction,
    pub dim: usize,
    pub blocks: Vec<Block>,
    /// `Λ = ⊔ Λ_ℓ` embedded in `F_p^dim`, block by block.
    #[serde(skip)]
    pub lambda: Vec<FpVector>,
    /// Block index of each element of `lambda`.
    #[serde(skip)]
    pub owner: Vec<usize>,
}

/// Blocks `ℓ = 2..=last_ell` with `ν_ℓ = min(choose_nu, nu_cap)`.
pub fn build_theorem2_prefix(
    p: u64,
    w: &GrowthFunction,
    last_ell: u64,
    seed: u64,
    nu_cap: u32,
) -> Result<BlockConstruction> {
    w.validate()?;
    if last_ell < 2 {
        return Err(Error::arg("blocks start at ell = 2"));
    }
    if (nu_cap as u64) < MIN_NU {
        return Err(Error::arg(format!("nu cap {nu_cap} is below {MIN_NU}")));
    }
    let partial: Vec<(u64, u32, NuChoice, bool, LemmaCertificate)> = (2..=last_ell)
        .into_par_iter()
        .map(|ell| {
            let required = choose_nu(ell, p, w)?;
            let (nu, capped) = required.capped(nu_cap);
            let cfg = SelectionConfig::new(p, nu, ell, child_seed(seed, Purpose::Theorem2, ell), 1)?;
            let cert = lemma_search(&cfg, FreenessRatio::Exact, DEFAULT_RETRIES)?;
            Ok((ell, nu, required, capped, cert))
        })
        .collect::<Result<_>>()?;
    let dim: usize = partial.iter().map(|b| b.1 as usize).sum();
    let mut blocks = Vec::with_capacity(partial.len());
    let mut lambda = Vec::new();
    let mut owner = Vec::new();
    let mut offset = 0;
    for (i, (ell, nu, required, capped, certificate)) in partial.into_iter().enumerate() {
        for v in &certificate.lambda {
            lambda.push(v.embed(dim, offset)?);
            owner.push(i);
        }
        let k = k_ell(p, ell);
        blocks.push(Block {
            ell,
            nu,
            nu_required: required,
            capped,
            condition_holds: 3.0 * ell as f64 / k <= w.eval(k * nu as f64),
            offset,
            certificate,
        });
        offset += nu as usize;
    }
    Ok(BlockConstruction {
        p,
        w: w.clone(),
        dim,
        blocks,
        lambda,
        owner,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PisierRatio {
    pub ell: u64,
    pub count: usize,
    pub rank: u32,
    pub value: f64,
}

/// `|Λ ∩ Γ_ℓ| / rank Γ_ℓ = |Λ_ℓ| / ν_ℓ`.
pub fn pisier_ratio(c: &BlockConstruction, ell: u64) -> Result<PisierRatio> {
    let b = c
        .blocks
        .iter()
        .find(|b| b.ell == ell)
        .ok_or_else(|| Error::arg(format!("no block for ell = {ell}")))?;
    let count = b.certificate.lambda.len();
    Ok(PisierRatio {
        ell,
        count,
        rank: b.nu,
        value: count as f64 / b.nu as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem2MeshCheck {
    pub report: MeshReport,
    pub rank: usize,
    pub block_rank_sum: usize,
    /// `rank A = Σ rank A_ℓ`
    pub rank_additive: bool,
    /// `k` if no block is large, else `k sup_W 3ℓ/K_ℓ`.
    pub rank_bound: f64,
    pub rank_bound_holds: bool,
}

impl Theorem2MeshCheck {
    pub fn pass(&self) -> bool {
        self.report.pass && self.rank_additive && self.rank_bound_holds
    }
}

fn members_of(c: &BlockConstruction, mesh: &Mesh<FpVector>) -> Result<Vec<usize>> {
    if mesh.basis().iter().any(|g| g.modulus() != c.p || g.dim() != c.dim) {
        return Err(Error::arg("mesh lives in a different space"));
    }
    Ok(match mesh.domain() {
        CoefficientDomain::Box { h } if 2 * *h as u64 + 1 >= c.p => {
            let mut span = EchelonBasis::new(c.p, c.dim);
            for g in mesh.basis() {
                span.insert(g.coords());
            }
            (0..c.lambda.len()).filter(|&i| span.contains(c.lambda[i].coords())).collect()
        }
        _ => {
            let m = mesh_members(mesh, DEFAULT_ENUMERATION_CAP)?;
            (0..c.lambda.len()).filter(|&i| m.contains(&c.lambda[i])).collect()
        }
    })
}

/// `|Λ ∩ M| <= k w(k)` plus the rank bookkeeping behind it, per mesh.
pub fn theorem2_mesh_checks(c: &BlockConstruction, meshes: &[Mesh<FpVector>]) -> Result<Vec<Theorem2MeshCheck>> {
    let bound = MeshBound::KwK { w: c.w.clone() };
    meshes
        .par_iter()
        .map(|mesh| {
            let hit = members_of(c, mesh)?;
            let all: Vec<FpVector> = hit.iter().map(|&i| c.lambda[i].clone()).collect();
            let rank = fp_rank(&all)?;
            let mut block_rank_sum = 0;
            let mut sup_w: Option<f64> = None;
            for (b, block) in c.blocks.iter().enumerate() {
                let part: Vec<FpVector> = hit
                    .iter()
                    .filter(|&&i| c.owner[i] == b)
                    .map(|&i| c.lambda[i].clone())
                    .collect();
                block_rank_sum += fp_rank(&part)?;
                let k = block.certificate.k;
                if part.len() as f64 >= k * block.nu as f64 {
                    let r = 3.0 * block.ell as f64 / k;
                    sup_w = Some(sup_w.map_or(r, |s: f64| s.max(r)));
                }
            }
            let kk = mesh.k() as f64;
            let rank_bound = kk * sup_w.unwrap_or(1.0).max(1.0);
            Ok(Theorem2MeshCheck {
                report: MeshReport::new(mesh, all.len(), &bound),
                rank,
                block_rank_sum,
                rank_additive: rank == block_rank_sum,
                rank_bound,
                rank_bound_holds: all.len() as f64 <= rank_bound,
            })
        })
        .collect()
}

/// Seeded box meshes whose generators are, with equal odds, an element of
/// `Λ`, a coordinate vector, or a sparse random `{-1,0,1}` vector.
pub fn sample_theorem2_meshes(
    c: &BlockConstruction,
    seed: u64,
    count: usize,
    k_max: usize,
    h_max: u32,
) -> Result<Vec<Mesh<FpVector>>> {
    if c.lambda.is_empty() {
        return Err(Error::arg("empty construction"));
    }
    let (p, dim) = (c.p, c.dim);
    sample_box_meshes(seed, count, k_max, h_max, |rng| match rng.random_range(0..3) {
        0 => c.lambda[rng.random_range(0..c.lambda.len())].clone(),
        1 => FpVector::unit(p, dim, rng.random_range(0..dim)).expect("index in range"),
        _ => {
            let coords: Vec<i64> = (0..dim)
                .map(|_| match rng.random_range(0..16) {
                    0 => 1,
                    1 => -1,
                    _ => 0,
                })
                .collect();
            FpVector::from_signed(p, &coords).expect("valid modulus")
        }
    })
}

/// Distinct elements overall (blocks occupy disjoint coordinates, so this
/// equals the sum of block sizes).
pub fn distinct_count(c: &BlockConstruction) -> usize {
    c.lambda.iter().collect::<HashSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::verify_certificate;

    #[test]
    fn large_constant_w_gives_minimum() {
        let w: GrowthFunction = "steps:0=1e9,1e12=2e9".parse().unwrap();
        assert_eq!(choose_nu(2, 3, &w).unwrap(), NuChoice::Exact(16));
    }

    #[test]
    fn log_growth_is_astronomical() {
        // K_2 at p = 2 is 1/16, target 96, x = e^96 - e, nu = 16 x
        let got = choose_nu(2, 2, &GrowthFunction::Log).unwrap();
        let NuChoice::Astronomical { ln_nu } = got else { panic!("{got:?}") };
        let expect = (96f64.exp() - std::f64::consts::E).ln() + 16f64.ln();
        assert!((ln_nu - expect).abs() < 1e-12, "{ln_nu} vs {expect}");
    }

    #[test]
    fn exact_choice_is_least() {
        let w = GrowthFunction::Power { eps: 0.5 };
        for (ell, p) in [(2, 3), (3, 5), (5, 101)] {
            let NuChoice::Exact(nu) = choose_nu(ell, p, &w).unwrap() else { panic!() };
            let k = k_ell(p, ell);
            let target = 3.0 * ell as f64 / k;
            assert!(w.eval(k * nu as f64) >= target);
            assert!(nu == 16 || w.eval(k * (nu - 1) as f64) < target);
        }
    }

    #[test]
    fn choice_is_monotone_in_ell() {
        let w = GrowthFunction::Power { eps: 0.5 };
        let nus: Vec<u64> = (1..8)
            .map(|ell| match choose_nu(ell, 7, &w).unwrap() {
                NuChoice::Exact(n) => n,
                NuChoice::Astronomical { .. } => u64::MAX,
            })
            .collect();
        assert!(nus.windows(2).all(|w| w[0] <= w[1]), "{nus:?}");
    }

    #[test]
    fn single_block_prefix() {
        let w = GrowthFunction::DoubleLog { c: 1.0 };
        let c = build_theorem2_prefix(3, &w, 2, 1, 16).unwrap();
        assert_eq!(c.blocks.len(), 1);
        let b = &c.blocks[0];
        assert!(b.capped && !b.condition_holds);
        let n = b.certificate.lambda.len() as u32;
        assert!((2 * b.nu..=6 * b.nu).contains(&n));
        assert!(verify_certificate(&b.certificate).unwrap());
        let r = pisier_ratio(&c, 2).unwrap();
        assert!(r.value >= 2.0 && r.value <= 6.0);
        assert!(pisier_ratio(&c, 3).is_err());
        assert_eq!(distinct_count(&c), c.lambda.len());
    }

    #[test]
    fn mesh_checks_on_two_blocks() {
        let w = GrowthFunction::DoubleLog { c: 1.0 };
        let c = build_theorem2_prefix(3, &w, 3, 5, 16).unwrap();
        let meshes = sample_theorem2_meshes(&c, 9, 100, 4, 2).unwrap();
        let checks = theorem2_mesh_checks(&c, &meshes).unwrap();
        assert!(checks.iter().all(|m| m.rank_additive && m.rank_bound_holds));
        // a mesh generated by a whole block contains all of it
        let basis: Vec<FpVector> = (0..16).map(|i| FpVector::unit(3, c.dim, i).unwrap()).collect();
        let m = Mesh::new(basis, CoefficientDomain::Box { h: 1 }).unwrap();
        let check = &theorem2_mesh_checks(&c, &[m]).unwrap()[0];
        assert_eq!(check.report.count, c.blocks[0].certificate.lambda.len());
        assert!(!check.report.pass);
        assert!(check.rank_additive && check.rank_bound_holds);
    }
}
