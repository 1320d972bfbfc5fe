//! Finite prefixes of a set `Λ ⊂ Z` that meets every k-mesh of height `h`
//! in at most `k w(kh)` points without being Sidon.
//!
//! Copies of `(Z/p_jZ)^{ν_j}` are spread in `Z` along blocks `B_j` of a
//! super-increasing sequence `β_i`, and `Λ_j` is the image of a Lemma set
//! in block `j`. The schedule `(p_j, ν_j, ℓ_j)` must satisfy `4ℓ_j < p_j`
//! and three growth conditions tying it to `w`, which are checked on a
//! finite `(h, k)` grid.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{centered, is_prime, nth_prime_above};
use crate::digits::SuperIncreasing;
use crate::error::{Error, Result};
use crate::group::{fp_rank, FpVector, GroupElement, LatticePoint};
use crate::growth::GrowthFunction;
use crate::mesh::{mesh_members, sample_box_meshes, CoefficientDomain, Mesh, MeshBound, MeshReport, DEFAULT_ENUMERATION_CAP};
use crate::rng::{child_seed, stream, Purpose};
use crate::selection::{lemma_search, FreenessRatio, LemmaCertificate, SelectionConfig, DEFAULT_RETRIES};

pub const DEFAULT_J_CAP: usize = 5;
pub const DEFAULT_GRID_H: u32 = 3;
pub const DEFAULT_GRID_K: u32 = 5;

/// Per-block parameters `p_j`, `ν_j`, `ℓ_j` for `j = 1..=J`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub p: Vec<u64>,
    pub nu: Vec<u32>,
    pub ell: Vec<u64>,
}

/// Replacement sequences; each must have length `J` when given.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleOverrides {
    pub p: Option<Vec<u64>>,
    pub nu: Option<Vec<u32>>,
    pub ell: Option<Vec<u64>>,
}

impl Schedule {
    /// `ℓ_j = 1 + ⌊log₂(1+j)⌋`, `ν_j = 16 + j`, and `p_j` the `j`-th prime
    /// above `4ℓ_j 2^{2^j}`.
    pub fn default_for(j_count: usize) -> Result<Self> {
        Self::with_overrides(j_count, &ScheduleOverrides::default())
    }

    pub fn with_overrides(j_count: usize, o: &ScheduleOverrides) -> Result<Self> {
        if j_count == 0 || j_count > DEFAULT_J_CAP {
            return Err(Error::arg(format!("block count {j_count} outside 1..={DEFAULT_J_CAP}")));
        }
        let pick = |name: &str, given: &Option<Vec<u64>>, default: &dyn Fn(usize) -> Result<u64>| -> Result<Vec<u64>> {
            match given {
                Some(v) if v.len() != j_count => Err(Error::Config(format!(
                    "{name} override has {} entries, expected {j_count}",
                    v.len()
                ))),
                Some(v) => Ok(v.clone()),
                None => (1..=j_count).map(default).collect(),
            }
        };
        let ell = pick("ell", &o.ell, &|j| Ok(1 + (1 + j as u64).ilog2() as u64))?;
        let nu: Vec<u32> = pick(
            "nu",
            &o.nu.as_ref().map(|v| v.iter().map(|&x| x as u64).collect()),
            &|j| Ok(16 + j as u64),
        )?
        .into_iter()
        .map(|x| x as u32)
        .collect();
        let p = pick("p", &o.p, &|j| {
            let base = 4u64
                .checked_mul(ell[j - 1])
                .and_then(|b| b.checked_mul(1u64.checked_shl(1 << j)?))
                .ok_or_else(|| Error::resource("default prime schedule", format!("4 ell 2^(2^{j})"), "2^64"))?;
            nth_prime_above(base, j).ok_or_else(|| Error::resource("default prime schedule", base, u64::MAX))
        })?;
        let s = Schedule { p, nu, ell };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Odd primes, `ν_j >= 16`, `ℓ_j >= 2`, all nondecreasing, and
    /// `4ℓ_j < p_j`.
    pub fn validate(&self) -> Result<()> {
        for j in 0..self.len() {
            let (p, nu, ell) = (self.p[j], self.nu[j], self.ell[j]);
            if p == 2 || !is_prime(p) {
                return Err(Error::Config(format!("p_{} = {p} is not an odd prime", j + 1)));
            }
            if nu < 16 {
                return Err(Error::Config(format!("nu_{} = {nu} is below 16", j + 1)));
            }
            if ell < 2 {
                return Err(Error::Config(format!("ell_{} = {ell} must exceed 1", j + 1)));
            }
            if 4 * ell as u128 >= p as u128 {
                return Err(Error::Config(format!(
                    "condition 4 ell_j < p_j fails at j = {}: 4 * {ell} >= {p}",
                    j + 1
                )));
            }
        }
        for (name, ok) in [
            ("p", self.p.windows(2).all(|w| w[0] <= w[1])),
            ("nu", self.nu.windows(2).all(|w| w[0] <= w[1])),
            ("ell", self.ell.windows(2).all(|w| w[0] <= w[1])),
        ] {
            if !ok {
                return Err(Error::Config(format!("{name}_j must be nondecreasing")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCheck {
    pub h: u32,
    pub k: u32,
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `k(1 + (k+1) ln(2h+1) / ln p)`.
pub fn independent_part_bound(k: u32, h: u32, p: u64) -> f64 {
    let k = k as f64;
    k * (1.0 + (k + 1.0) * (2.0 * h as f64 + 1.0).ln() / (p as f64).ln())
}

/// The schedule conditions at every `1 <= h <= h_max`, `1 <= k <= k_max`:
///
/// * `k(1 + (k+1) ln(2h+1)/ln p_k) <= ½ k √w(hk)` (when block `k` exists),
/// * `Σ_{j<=k} ν_j <= ½ k √w(hk)`,
/// * `3 ℓ_k <= √w(hk)`,
/// * `X = max(1, max{ℓ_j : j > k, ν_j <= 8(2h+1)^k}) <= √w(hk)`.
///
/// Indices beyond the built prefix are clipped to its last block.
pub fn schedule_grid(s: &Schedule, w: &GrowthFunction, h_max: u32, k_max: u32) -> Vec<GridCheck> {
    let mut out = Vec::new();
    let j_count = s.len();
    for h in 1..=h_max {
        for k in 1..=k_max {
            let kk = k as usize;
            let root = w.eval((h * k) as f64).sqrt();
            let half = 0.5 * k as f64 * root;
            let last = kk.min(j_count) - 1;
            let mut push = |condition, lhs: f64, rhs: f64| {
                out.push(GridCheck {
                    h,
                    k,
                    condition,
                    lhs,
                    rhs,
                    holds: lhs <= rhs,
                })
            };
            if kk <= j_count {
                push("independent part: k(1+(k+1)ln(2h+1)/ln p_k) <= k sqrt(w(hk))/2", independent_part_bound(k, h, s.p[kk - 1]), half);
            }
            let nu_sum: u64 = s.nu[..=last].iter().map(|&v| v as u64).sum();
            push("sum_{j<=k} nu_j <= k sqrt(w(hk))/2", nu_sum as f64, half);
            push("3 ell_k <= sqrt(w(hk))", 3.0 * s.ell[last] as f64, root);
            let limit = 8.0 * (2.0 * h as f64 + 1.0).powi(k as i32);
            let x = (kk..j_count)
                .filter(|&j| s.nu[j] as f64 <= limit)
                .map(|j| s.ell[j])
                .max()
                .unwrap_or(1)
                .max(1);
            push("X <= sqrt(w(hk))", x as f64, root);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadBlock {
    pub j: usize,
    pub p: u64,
    pub nu: u32,
    pub ell: u64,
    /// Indices into the β sequence (0-based).
    pub range: Range<usize>,
    /// `q = 2ν((p-1)/2)² + 1`, shared by every index of the block.
    #[serde(serialize_with = "decimal")]
    pub q: BigInt,
    pub certificate: LemmaCertificate,
    /// Image of each certificate vector: `Σ centered(n_i) β_i`.
    #[serde(serialize_with = "decimals")]
    pub lambda: Vec<BigInt>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadSystem {
    pub w: GrowthFunction,
    pub schedule: Schedule,
    #[serde(serialize_with = "system_decimals")]
    pub beta: SuperIncreasing,
    pub blocks: Vec<SpreadBlock>,
    pub grid: Vec<GridCheck>,
}

impl SpreadSystem {
    pub fn lambda(&self) -> Vec<LatticePoint> {
        self.blocks
            .iter()
            .flat_map(|b| b.lambda.iter().map(|v| LatticePoint::scalar(v.clone())))
            .collect()
    }

    pub fn block_basis(&self, j: usize) -> Vec<LatticePoint> {
        self.beta.betas()[self.blocks[j].range.clone()]
            .iter()
            .map(|b| LatticePoint::scalar(b.clone()))
            .collect()
    }

    pub fn betas_decimal(&self) -> Vec<String> {
        self.beta.betas().iter().map(|b| b.to_string()).collect()
    }
}

fn decimal<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn decimals<S: serde::Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn system_decimals<S: serde::Serializer>(v: &SuperIncreasing, s: S) -> std::result::Result<S::Ok, S::Error> {
    decimals(v.betas(), s)
}

/// Builds `J` blocks. Fails with a configuration error naming the first
/// violated schedule condition on the `(h, k)` grid.
pub fn build_theorem3_prefix(
    w: &GrowthFunction,
    j_count: usize,
    overrides: &ScheduleOverrides,
    seed: u64,
    grid: (u32, u32),
) -> Result<SpreadSystem> {
    w.validate()?;
    let schedule = Schedule::with_overrides(j_count, overrides)?;
    let checks = schedule_grid(&schedule, w, grid.0, grid.1);
    if let Some(bad) = checks.iter().find(|c| !c.holds) {
        return Err(Error::Config(format!(
            "schedule infeasible at h = {}, k = {}: {} ({} > {})",
            bad.h, bad.k, bad.condition, bad.lhs, bad.rhs
        )));
    }

    let mut bounds = Vec::new();
    let mut ranges = Vec::new();
    let mut qs = Vec::new();
    for j in 0..j_count {
        let half = BigInt::from((schedule.p[j] - 1) / 2);
        let b = &half * &half * schedule.nu[j];
        qs.push(&b * 2u32 + 1u32);
        let start = bounds.len();
        bounds.extend(std::iter::repeat_n(b, schedule.nu[j] as usize));
        ranges.push(start..bounds.len());
    }
    let beta = SuperIncreasing::scaled(&bounds);

    let certs: Vec<LemmaCertificate> = (0..j_count)
        .into_par_iter()
        .map(|j| {
            let cfg = SelectionConfig::new(
                schedule.p[j],
                schedule.nu[j],
                schedule.ell[j],
                child_seed(seed, Purpose::Theorem3, j as u64),
                1,
            )?;
            lemma_search(&cfg, FreenessRatio::OneEighth, DEFAULT_RETRIES)
        })
        .collect::<Result<_>>()?;

    let blocks = certs
        .into_iter()
        .enumerate()
        .map(|(j, certificate)| {
            let range = ranges[j].clone();
            let p = schedule.p[j];
            let lambda = certificate
                .lambda
                .iter()
                .map(|v| image(&beta, &range, v))
                .collect();
            SpreadBlock {
                j: j + 1,
                p,
                nu: schedule.nu[j],
                ell: schedule.ell[j],
                range,
                q: qs[j].clone(),
                certificate,
                lambda,
            }
        })
        .collect();
    Ok(SpreadSystem {
        w: w.clone(),
        schedule,
        beta,
        blocks,
        grid: checks,
    })
}

fn image(beta: &SuperIncreasing, range: &Range<usize>, v: &FpVector) -> BigInt {
    v.coords()
        .iter()
        .zip(&beta.betas()[range.clone()])
        .map(|(&c, b)| b * centered(c, v.modulus()))
        .sum()
}

const FP_MOD: u64 = (1 << 61) - 1;
const FP_BASE: u64 = 0x1d8e_4e27_c47d_124f % FP_MOD;

fn mulmod61(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % FP_MOD as u128) as u64
}

/// A homomorphism `Z^n → Z/(2^61-1)`, so equal points have equal prints.
fn fingerprint(x: &LatticePoint) -> u64 {
    let m = BigInt::from(FP_MOD);
    let mut acc = 0u64;
    let mut power = 1u64;
    for c in x.coords() {
        let r = c.mod_floor(&m).to_u64().expect("reduced");
        acc = (acc + mulmod61(r, power)) % FP_MOD;
        power = mulmod61(power, FP_BASE);
    }
    acc
}

fn scaled_print(f: u64, m: i64) -> u64 {
    mulmod61(f, (m as i128).rem_euclid(FP_MOD as i128) as u64)
}

/// True iff the `q^|B|` combinations `Σ m_i β_i`, `|m_i| <= (q-1)/2`, are
/// pairwise distinct. Combinations are compared through a linear
/// fingerprint and every fingerprint collision is rechecked exactly.
pub fn well_spread_check(basis: &[LatticePoint], q: u64) -> Result<bool> {
    well_spread_check_capped(basis, q, DEFAULT_ENUMERATION_CAP)
}

pub fn well_spread_check_capped(basis: &[LatticePoint], q: u64, cap: u64) -> Result<bool> {
    if q.is_multiple_of(2) {
        return Err(Error::arg(format!("q = {q} must be odd")));
    }
    let total = (0..basis.len()).try_fold(1u64, |acc, _| acc.checked_mul(q)).unwrap_or(u64::MAX);
    if total > cap {
        return Err(Error::resource("well-spread enumeration", total, cap));
    }
    let h = ((q - 1) / 2) as i64;
    let prints: Vec<u64> = basis.iter().map(fingerprint).collect();
    let walk = |visit: &mut dyn FnMut(u64, &[i64])| {
        let mut m = vec![-h; basis.len()];
        let mut acc = prints.iter().fold(0u64, |a, &f| (a + scaled_print(f, -h)) % FP_MOD);
        loop {
            visit(acc, &m);
            let mut i = 0;
            loop {
                if i == m.len() {
                    return;
                }
                if m[i] < h {
                    m[i] += 1;
                    acc = (acc + prints[i]) % FP_MOD;
                    break;
                }
                m[i] = -h;
                acc = (acc + scaled_print(prints[i], -2 * h)) % FP_MOD;
                i += 1;
            }
        }
    };
    let mut all = Vec::with_capacity(total as usize);
    walk(&mut |f, _| all.push(f));
    all.par_sort_unstable();
    let repeated: HashSet<u64> = all.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
    drop(all);
    if repeated.is_empty() {
        return Ok(true);
    }
    let mut seen: HashMap<LatticePoint, ()> = HashMap::new();
    let mut distinct = true;
    walk(&mut |f, m| {
        if distinct && repeated.contains(&f) {
            let mut x = LatticePoint::zero();
            for (g, &c) in basis.iter().zip(m) {
                x.add_scaled(g, c);
            }
            distinct = seen.insert(x, ()).is_none();
        }
    });
    Ok(distinct)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WellSpreadReport {
    pub j: usize,
    pub q: u64,
    /// Super-increase with bound `(q-1)/2` over the whole block.
    pub certified: bool,
    /// Length of the longest prefix enumerated within the cap.
    pub enumerated_prefix: usize,
    pub enumerated_distinct: bool,
}

impl WellSpreadReport {
    pub fn pass(&self) -> bool {
        self.certified && self.enumerated_distinct
    }
}

/// `V_{p_j}(B_j)` well spread: certified by super-increase for the whole
/// block and confirmed by enumeration on the longest prefix within `cap`.
pub fn well_spread_reports(s: &SpreadSystem, cap: u64) -> Result<Vec<WellSpreadReport>> {
    s.blocks
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let q = b.p;
            let certified = s.beta.certify_range(b.range.clone(), &BigInt::from((q - 1) / 2));
            let basis = s.block_basis(j);
            let mut len = 0;
            let mut size = 1u64;
            while len < basis.len() && size.saturating_mul(q) <= cap {
                size *= q;
                len += 1;
            }
            Ok(WellSpreadReport {
                j: b.j,
                q,
                certified,
                enumerated_prefix: len,
                enumerated_distinct: well_spread_check_capped(&basis[..len], q, cap)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependentSpanCheck {
    pub p: u64,
    /// `(block, element index)` pairs making up `A'`.
    pub members: Vec<(usize, usize)>,
    pub distinct: usize,
    pub expected: u64,
    pub pass: bool,
}

/// `|V_p(A')| = p^{|A'|}` by enumeration, for seeded unions `A'` of
/// independent parts of blocks with `p_j >= p`, `1 <= |A'| <= max_size`.
pub fn independent_span_checks(
    s: &SpreadSystem,
    primes: &[u64],
    max_size: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<IndependentSpanCheck>> {
    let mut out = Vec::new();
    for &p in primes {
        if p % 2 == 0 || !is_prime(p) {
            return Err(Error::arg(format!("{p} is not an odd prime")));
        }
        let eligible: Vec<usize> = (0..s.blocks.len()).filter(|&j| s.blocks[j].p >= p).collect();
        if eligible.is_empty() {
            continue;
        }
        for t in 0..trials {
            let mut rng = stream(seed, Purpose::Subsets, (p << 32) ^ t as u64);
            let size = rng.random_range(1..=max_size);
            let mut members: Vec<(usize, usize)> = Vec::new();
            let mut guard = 0;
            while members.len() < size && guard < 1000 {
                guard += 1;
                let j = eligible[rng.random_range(0..eligible.len())];
                let n = s.blocks[j].lambda.len();
                let i = sample(&mut rng, n, 1).index(0);
                if members.contains(&(j, i)) {
                    continue;
                }
                members.push((j, i));
                if !parts_independent(s, &members)? {
                    members.pop();
                }
            }
            let basis: Vec<LatticePoint> = members
                .iter()
                .map(|&(j, i)| LatticePoint::scalar(s.blocks[j].lambda[i].clone()))
                .collect();
            let mesh = Mesh::new(basis, CoefficientDomain::Box { h: ((p - 1) / 2) as u32 })?;
            let distinct = mesh_members(&mesh, DEFAULT_ENUMERATION_CAP)?.len();
            let expected = p.pow(members.len() as u32);
            out.push(IndependentSpanCheck {
                p,
                members,
                distinct,
                expected,
                pass: distinct as u64 == expected,
            });
        }
    }
    Ok(out)
}

/// Each block's share of `members` is the image of a free family.
fn parts_independent(s: &SpreadSystem, members: &[(usize, usize)]) -> Result<bool> {
    for j in members.iter().map(|m| m.0).collect::<HashSet<_>>() {
        let pre: Vec<FpVector> = members
            .iter()
            .filter(|m| m.0 == j)
            .map(|&(_, i)| s.blocks[j].certificate.lambda[i].clone())
            .collect();
        if fp_rank(&pre)? != pre.len() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem3MeshCheck {
    pub report: MeshReport,
    pub block_counts: Vec<usize>,
    /// `Σ_{j<=k} |A_j|` against `3 ℓ_k Σ_{j<=k} ν_j`.
    pub low_sum: usize,
    pub low_bound: f64,
    /// `|A'|` (ranks of the parts with `j > k`) against the
    /// independent-part bound at `p = p_k`.
    pub independent_part: usize,
    pub independent_bound: Option<f64>,
    pub pass_low: bool,
    pub pass_independent: bool,
}

impl Theorem3MeshCheck {
    pub fn pass(&self) -> bool {
        self.report.pass && self.pass_low && self.pass_independent
    }
}

/// `|Λ ∩ M| <= k w(kh)` together with the two partial-sum bounds, per mesh.
pub fn theorem3_mesh_checks(s: &SpreadSystem, meshes: &[Mesh<LatticePoint>]) -> Result<Vec<Theorem3MeshCheck>> {
    let bound = MeshBound::KwKh { w: s.w.clone() };
    let j_count = s.blocks.len();
    meshes
        .par_iter()
        .map(|mesh| {
            let members = mesh_members(mesh, DEFAULT_ENUMERATION_CAP)?;
            let hits: Vec<Vec<usize>> = s
                .blocks
                .iter()
                .map(|b| {
                    (0..b.lambda.len())
                        .filter(|&i| members.contains(&LatticePoint::scalar(b.lambda[i].clone())))
                        .collect()
                })
                .collect();
            let block_counts: Vec<usize> = hits.iter().map(|h| h.len()).collect();
            let total = block_counts.iter().sum();
            let k = mesh.k();
            let last = k.min(j_count);
            let low_sum: usize = block_counts[..last].iter().sum();
            let nu_sum: u64 = s.schedule.nu[..last].iter().map(|&v| v as u64).sum();
            let low_bound = 3.0 * s.schedule.ell[last - 1] as f64 * nu_sum as f64;
            let mut independent_part = 0;
            for (j, hit) in hits.iter().enumerate().skip(last) {
                let pre: Vec<FpVector> = hit
                    .iter()
                    .map(|&i| s.blocks[j].certificate.lambda[i].clone())
                    .collect();
                independent_part += fp_rank(&pre)?;
            }
            let independent_bound =
                (k <= j_count).then(|| independent_part_bound(k as u32, mesh.height() as u32, s.schedule.p[k - 1]));
            Ok(Theorem3MeshCheck {
                report: MeshReport::new(mesh, total, &bound),
                block_counts,
                low_sum,
                low_bound,
                independent_part,
                independent_bound,
                pass_low: low_sum as f64 <= low_bound,
                pass_independent: independent_bound.is_none_or(|b| independent_part as f64 <= b),
            })
        })
        .collect()
}

/// Seeded box meshes with generators drawn from `Λ`, the `β`'s, or small
/// random integers.
pub fn sample_theorem3_meshes(
    s: &SpreadSystem,
    seed: u64,
    count: usize,
    k_max: usize,
    h_max: u32,
) -> Result<Vec<Mesh<LatticePoint>>> {
    let lambda = s.lambda();
    if lambda.is_empty() {
        return Err(Error::arg("empty construction"));
    }
    let betas = s.beta.betas();
    sample_box_meshes(seed, count, k_max, h_max, |rng| match rng.random_range(0..3) {
        0 => lambda[rng.random_range(0..lambda.len())].clone(),
        1 => LatticePoint::scalar(betas[rng.random_range(0..betas.len())].clone()),
        _ => LatticePoint::scalar(rng.random_range(1..=50i64) * if rng.random_bool(0.5) { 1 } else { -1 }),
    })
}
