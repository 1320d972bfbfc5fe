//! The recursive matrices `A_ν` and their embedding into `Z`.
//!
//! `A_1` has columns `(1,1), (1,-1), (1,0)` and
//!
//! ```text
//! A_{ν+1} = | A_ν   A_ν   I |
//!           | A_ν  -A_ν   0 |
//! ```
//!
//! so `A_ν` is `2^ν × N_ν` with `N_ν = 2^{ν-1}(ν+2)`. Its columns lie in the
//! height-1 mesh `{-1,0,1}^{2^ν}` and are quasi-independent.

use std::fmt::Write as _;
use std::ops::Range;

use num_bigint::{BigInt, BigUint};
use serde::Serialize;

use crate::digits::SuperIncreasing;
use crate::error::{Error, Result};
use crate::group::LatticePoint;
use crate::mesh::{CoefficientDomain, DigitIndex, Mesh};

/// Default largest level built (4096 × 28672 entries).
pub const DEFAULT_MATRIX_CAP: u32 = 12;

/// Column count `N_ν = 2^{ν-1}(ν+2)`, with `N_0 = 1`.
pub fn n_nu(nu: u32) -> u64 {
    if nu == 0 {
        1
    } else {
        (1u64 << (nu - 1)) * (nu as u64 + 2)
    }
}

/// `N_ν` through the recurrence `N_ν = 2 N_{ν-1} + 2^{ν-1}` from `N_0 = 1`.
pub fn n_nu_recurrence(nu: u32) -> u64 {
    (1..=nu).fold(1, |n, v| 2 * n + (1u64 << (v - 1)))
}

/// A dense `{-1,0,1}` matrix, stored column-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QiMatrix {
    nu: u32,
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl QiMatrix {
    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> i8 {
        self.entries[c * self.rows + r]
    }

    pub fn column(&self, c: usize) -> &[i8] {
        &self.entries[c * self.rows..(c + 1) * self.rows]
    }

    /// Builds a matrix from explicit columns, claiming level `nu`.
    ///
    /// Only entry values and rectangularity are checked here; the level's
    /// dimensions are checked by the verifiers.
    pub fn from_columns(nu: u32, columns: &[Vec<i8>]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        let mut entries = Vec::with_capacity(rows * columns.len());
        for col in columns {
            if col.len() != rows {
                return Err(Error::arg("ragged columns"));
            }
            if col.iter().any(|v| !(-1..=1).contains(v)) {
                return Err(Error::arg("entries must lie in {-1, 0, 1}"));
            }
            entries.extend_from_slice(col);
        }
        Ok(QiMatrix {
            nu,
            rows,
            cols: columns.len(),
            entries,
        })
    }

    /// A copy with one entry replaced.
    pub fn with_entry(&self, r: usize, c: usize, v: i8) -> Result<Self> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::arg("entry out of range"));
        }
        if !(-1..=1).contains(&v) {
            return Err(Error::arg("entries must lie in {-1, 0, 1}"));
        }
        let mut m = self.clone();
        m.entries[c * self.rows + r] = v;
        Ok(m)
    }

    /// The columns as points of `Z^{2^ν}`.
    pub fn column_points(&self) -> Vec<LatticePoint> {
        (0..self.cols)
            .map(|c| LatticePoint::from_i64s(&self.column(c).iter().map(|&v| v as i64).collect::<Vec<_>>()))
            .collect()
    }

    /// Row-major CSV of the entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows * self.cols * 3);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.entry(r, c));
            }
            out.push('\n');
        }
        out
    }

    /// Dimensions match the level and every entry is in `{-1,0,1}`.
    pub fn has_level_shape(&self) -> bool {
        self.nu >= 1
            && self.rows == 1usize << self.nu
            && self.cols as u64 == n_nu(self.nu)
            && self.entries.iter().all(|v| (-1..=1).contains(v))
    }
}

fn base_matrix() -> QiMatrix {
    QiMatrix {
        nu: 1,
        rows: 2,
        cols: 3,
        entries: vec![1, 1, 1, -1, 1, 0],
    }
}

fn next_level(a: &QiMatrix) -> QiMatrix {
    let n = a.rows;
    let rows = 2 * n;
    let cols = 2 * a.cols + n;
    let mut entries = Vec::with_capacity(rows * cols);
    for c in 0..a.cols {
        let col = a.column(c);
        entries.extend_from_slice(col);
        entries.extend_from_slice(col);
    }
    for c in 0..a.cols {
        let col = a.column(c);
        entries.extend_from_slice(col);
        entries.extend(col.iter().map(|v| -v));
    }
    for i in 0..n {
        let start = entries.len();
        entries.resize(start + rows, 0);
        entries[start + i] = 1;
    }
    QiMatrix {
        nu: a.nu + 1,
        rows,
        cols,
        entries,
    }
}

/// `A_ν` for `1 <= nu <= DEFAULT_MATRIX_CAP`.
pub fn build_matrix(nu: u32) -> Result<QiMatrix> {
    build_matrix_capped(nu, DEFAULT_MATRIX_CAP)
}

pub fn build_matrix_capped(nu: u32, cap: u32) -> Result<QiMatrix> {
    if nu == 0 || nu > cap {
        return Err(Error::arg(format!("level {nu} outside 1..={cap}")));
    }
    let mut a = base_matrix();
    while a.nu < nu {
        a = next_level(&a);
    }
    Ok(a)
}

/// `β_j` for `j >= 1`, super-increasing with respect to the coefficient
/// bound `N_ν` on the level-ν index block `[2^ν, 2^{ν+1})`.
///
/// Indices from `fresh_start()` on are padding generators with bound 1;
/// they never occur in the constructed set and only pad witness meshes.
#[derive(Clone, Debug)]
pub struct DissociatedBasis {
    nu_max: u32,
    system: SuperIncreasing,
}

impl DissociatedBasis {
    pub fn new(nu_max: u32) -> Self {
        let used = (1usize << (nu_max + 1)) - 1;
        let padding = (1usize << nu_max) - 1;
        let bounds: Vec<u64> = (1..=used + padding)
            .map(|j| {
                if j > used {
                    1
                } else {
                    n_nu(usize::BITS - 1 - j.leading_zeros())
                }
            })
            .collect();
        DissociatedBasis {
            nu_max,
            system: SuperIncreasing::tight(&bounds),
        }
    }

    pub fn nu_max(&self) -> u32 {
        self.nu_max
    }

    /// `β_j`, 1-based.
    pub fn beta(&self, j: usize) -> &BigInt {
        &self.system.betas()[j - 1]
    }

    pub fn len(&self) -> usize {
        self.system.len()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }

    /// First 1-based index not used by the constructed set.
    pub fn fresh_start(&self) -> usize {
        1usize << (self.nu_max + 1)
    }

    pub fn system(&self) -> &SuperIncreasing {
        &self.system
    }

    /// The β's as decimal strings, 1-based order.
    pub fn to_decimal_strings(&self) -> Vec<String> {
        self.system.betas().iter().map(|b| b.to_string()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Theorem1Block {
    pub nu: u32,
    /// 1-based β indices `[2^ν, 2^{ν+1})`.
    pub beta_indices: Range<usize>,
    /// Positions of this block's points in the concatenated set.
    pub lambda_range: Range<usize>,
    pub matrix: QiMatrix,
}

#[derive(Clone, Debug)]
pub struct Theorem1Construction {
    pub lambda: Vec<LatticePoint>,
    pub basis: DissociatedBasis,
    pub blocks: Vec<Theorem1Block>,
}

/// Concatenates `(β_{2^ν}, ..., β_{2^{ν+1}-1}) A_ν` for `ν = 1..=nu_max`.
pub fn embed_theorem1(nu_max: u32) -> Result<Theorem1Construction> {
    embed_theorem1_capped(nu_max, DEFAULT_MATRIX_CAP)
}

pub fn embed_theorem1_capped(nu_max: u32, cap: u32) -> Result<Theorem1Construction> {
    if nu_max == 0 || nu_max > cap {
        return Err(Error::arg(format!("nu_max {nu_max} outside 1..={cap}")));
    }
    let basis = DissociatedBasis::new(nu_max);
    let mut lambda = Vec::new();
    let mut blocks = Vec::new();
    let mut matrix = base_matrix();
    for nu in 1..=nu_max {
        if nu > 1 {
            matrix = next_level(&matrix);
        }
        let first = 1usize << nu;
        let start = lambda.len();
        for c in 0..matrix.cols() {
            let mut gamma = BigInt::from(0);
            for (r, &a) in matrix.column(c).iter().enumerate() {
                match a {
                    1 => gamma += basis.beta(first + r),
                    -1 => gamma -= basis.beta(first + r),
                    _ => {}
                }
            }
            lambda.push(LatticePoint::scalar(gamma));
        }
        blocks.push(Theorem1Block {
            nu,
            beta_indices: first..2 * first,
            lambda_range: start..lambda.len(),
            matrix: matrix.clone(),
        });
    }
    Ok(Theorem1Construction {
        lambda,
        basis,
        blocks,
    })
}

/// Smallest integer `m` with `2^{m·d} >= k^k`, i.e. `⌈(1/d) k log₂ k⌉`.
fn ceil_klogk_over(k: u64, d: u64) -> u64 {
    if k <= 1 {
        return 0;
    }
    let kk = BigUint::from(k).pow(k as u32);
    // ceil(log2(k^k)) = bit length of k^k - 1
    let e = (kk - 1u32).bits();
    e.div_ceil(d)
}

/// `⌈¼ k log₂ k⌉`, exactly.
pub fn quarter_klog2k_ceil(k: u64) -> u64 {
    ceil_klogk_over(k, 4)
}

/// `⌈½ k log₂ k⌉`, exactly.
pub fn half_klog2k_ceil(k: u64) -> u64 {
    ceil_klogk_over(k, 2)
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Witness {
    pub k: u64,
    pub nu: u32,
    /// 1-based β indices of the mesh generators.
    pub basis_indices: Vec<usize>,
    #[serde(skip)]
    pub mesh: Mesh<LatticePoint>,
    /// `|Λ ∩ M|`, counted by digit extraction.
    pub count: usize,
    pub quarter_bound: u64,
}

/// The height-1 `k`-mesh on `β_{2^ν}, ..., β_{2^{ν+1}-1}` (padded with fresh
/// generators up to `k`), where `2^ν <= k < 2^{ν+1}`.
pub fn theorem1_witness(k: u64, construction: &Theorem1Construction) -> Result<Theorem1Witness> {
    let index = DigitIndex::new(construction.basis.system(), &construction.lambda);
    theorem1_witness_indexed(k, construction, &index)
}

/// [`theorem1_witness`] with a prebuilt digit index over the set.
pub fn theorem1_witness_indexed(
    k: u64,
    construction: &Theorem1Construction,
    index: &DigitIndex,
) -> Result<Theorem1Witness> {
    let nu_max = construction.basis.nu_max();
    let upper = 1u64 << (nu_max + 1);
    if k < 2 || k >= upper {
        return Err(Error::arg(format!("k = {k} outside [2, {upper})")));
    }
    let nu = 63 - k.leading_zeros();
    let first = 1usize << nu;
    let mut basis_indices: Vec<usize> = (first..2 * first).collect();
    let pad = k as usize - first;
    let fresh = construction.basis.fresh_start();
    basis_indices.extend(fresh..fresh + pad);
    let basis = basis_indices
        .iter()
        .map(|&j| LatticePoint::scalar(construction.basis.beta(j).clone()))
        .collect();
    let mesh = Mesh::new(basis, CoefficientDomain::Box { h: 1 })?;
    let count = index
        .count(&mesh)
        .ok_or_else(|| Error::arg("witness mesh is not digit-addressable"))?;
    Ok(Theorem1Witness {
        k,
        nu,
        basis_indices,
        mesh,
        count,
        quarter_bound: quarter_klog2k_ceil(k),
    })
}
