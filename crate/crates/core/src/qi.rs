//! Quasi-independence: no relation `Σ ε_γ γ = 0` with `ε ∈ {-1,0,1}` other
//! than the trivial one.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::construction::{n_nu, QiMatrix};
use crate::error::{Error, Result};
use crate::group::{signed_combination, GroupElement, LatticePoint, SignVector};

/// Largest input size for the meet-in-the-middle search (halves of at most
/// 12 elements, so the left table holds at most `3^12` sums).
pub const DEFAULT_QI_MAX: usize = 24;

/// A nontrivial sign vector annihilating the input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependencyWitness {
    pub eps: SignVector,
}

impl DependencyWitness {
    /// Nontrivial and `Σ ε_i x_i = 0` exactly.
    pub fn validates(&self, elements: &[LatticePoint]) -> bool {
        !self.eps.is_trivial()
            && signed_combination(elements, &self.eps).is_ok_and(|s| s.is_origin())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QiOutcome {
    pub qi: bool,
    pub witness: Option<DependencyWitness>,
}

/// Walks `{-1,0,1}^n` in base-3 order (digit `d` means `ε = d - 1`),
/// keeping the signed sum current with one or two updates per step.
struct SignOdometer<'a> {
    elements: &'a [LatticePoint],
    digits: Vec<u8>,
    sum: LatticePoint,
}

impl<'a> SignOdometer<'a> {
    fn at(elements: &'a [LatticePoint], mut index: u64) -> Self {
        let mut digits = Vec::with_capacity(elements.len());
        let mut sum = LatticePoint::zero();
        for g in elements {
            let d = (index % 3) as u8;
            index /= 3;
            sum.add_scaled(g, d as i64 - 1);
            digits.push(d);
        }
        SignOdometer { elements, digits, sum }
    }

    fn advance(&mut self) {
        for (d, g) in self.digits.iter_mut().zip(self.elements) {
            if *d < 2 {
                *d += 1;
                self.sum.add_scaled(g, 1);
                return;
            }
            *d = 0;
            self.sum.add_scaled(g, -2);
        }
    }

    fn signs(&self) -> impl Iterator<Item = i8> + '_ {
        self.digits.iter().map(|&d| d as i8 - 1)
    }

    fn is_trivial(&self) -> bool {
        self.digits.iter().all(|&d| d == 1)
    }
}

fn pow3(n: usize) -> u64 {
    3u64.pow(n as u32)
}

/// Witness with its first nonzero sign made positive.
fn normalized(signs: Vec<i8>) -> DependencyWitness {
    let eps = SignVector::new(signs).expect("signs lie in {-1,0,1}");
    let eps = match eps.signs().iter().find(|&&s| s != 0) {
        Some(-1) => eps.negated(),
        _ => eps,
    };
    DependencyWitness { eps }
}

/// Exhaustive meet-in-the-middle decision for at most [`DEFAULT_QI_MAX`]
/// elements.
pub fn verify_qi_exhaustive(elements: &[LatticePoint]) -> Result<QiOutcome> {
    verify_qi_exhaustive_capped(elements, DEFAULT_QI_MAX)
}

pub fn verify_qi_exhaustive_capped(elements: &[LatticePoint], max: usize) -> Result<QiOutcome> {
    let n = elements.len();
    if n > max {
        return Err(Error::resource("quasi-independence search size", n, max));
    }
    let (left, right) = elements.split_at(n / 2);

    // Left table: signed sum -> first sign index producing it. A nonzero
    // left vector with zero sum is a relation on its own, which the join
    // below cannot see because the zero sum is keyed by the trivial vector.
    let mut table: HashMap<LatticePoint, u64> = HashMap::with_capacity(pow3(left.len()) as usize);
    let mut left_relation = None;
    let mut odo = SignOdometer::at(left, 0);
    for idx in 0..pow3(left.len()) {
        if left_relation.is_none() && odo.sum.is_origin() && !odo.is_trivial() {
            left_relation = Some(idx);
        }
        table.entry(odo.sum.clone()).or_insert(idx);
        odo.advance();
    }
    if let Some(idx) = left_relation {
        let mut signs: Vec<i8> = SignOdometer::at(left, idx).signs().collect();
        signs.resize(n, 0);
        return Ok(QiOutcome {
            qi: false,
            witness: Some(normalized(signs)),
        });
    }

    // Join: a nontrivial right vector with sum b pairs with any left vector
    // of sum -b.
    let total = pow3(right.len());
    let chunk = pow3(right.len().min(6));
    let hit = (0..total.div_ceil(chunk)).into_par_iter().find_map_first(|c| {
        let start = c * chunk;
        let mut odo = SignOdometer::at(right, start);
        for idx in start..(start + chunk).min(total) {
            if !odo.is_trivial() {
                if let Some(&l) = table.get(&-&odo.sum) {
                    return Some((l, idx));
                }
            }
            odo.advance();
        }
        None
    });
    Ok(match hit {
        Some((l, r)) => {
            let mut signs: Vec<i8> = SignOdometer::at(left, l).signs().collect();
            signs.extend(SignOdometer::at(right, r).signs());
            QiOutcome {
                qi: false,
                witness: Some(normalized(signs)),
            }
        }
        None => QiOutcome { qi: true, witness: None },
    })
}

/// Decides quasi-independence of the columns of a level-shaped matrix by the
/// inductive argument.
///
/// Writing `ε = (a, b, c)` against the blocks `[[A,A,I],[A,-A,0]]`, the two
/// row groups give `Aa + Ab + c = 0` and `Aa - Ab = 0`. Adding them gives
/// `c ≡ 0 (mod 2)`, so `c = 0`; then `Aa = Ab` and `2Aa = 0`, so `a = b = 0`
/// once the columns of `A` are quasi-independent. The procedure checks this
/// block shape at every level and decides the base level exhaustively.
pub fn verify_qi_structural(m: &QiMatrix) -> Result<bool> {
    if !m.has_level_shape() {
        return Err(Error::arg(format!(
            "matrix is {}x{}, expected {}x{} with entries in {{-1,0,1}} for level {}",
            m.rows(),
            m.cols(),
            1u64 << m.nu().min(63),
            n_nu(m.nu()),
            m.nu()
        )));
    }
    let mut columns: Vec<Vec<i8>> = (0..m.cols()).map(|c| m.column(c).to_vec()).collect();
    let mut nu = m.nu();
    while nu > 1 {
        let half = columns[0].len() / 2;
        let inner = n_nu(nu - 1) as usize;
        let (first, rest) = columns.split_at(inner);
        let (second, ident) = rest.split_at(inner);
        for (x, y) in first.iter().zip(second) {
            let (xt, xb) = x.split_at(half);
            let (yt, yb) = y.split_at(half);
            if xt != xb || xt != yt || yb.iter().zip(yt).any(|(b, t)| *b != -*t) {
                return Ok(false);
            }
        }
        for (i, col) in ident.iter().enumerate() {
            if col.iter().enumerate().any(|(r, &v)| v != (r == i) as i8) {
                return Ok(false);
            }
        }
        columns = first.iter().map(|c| c[..half].to_vec()).collect();
        nu -= 1;
    }
    let base: Vec<LatticePoint> = columns
        .iter()
        .map(|c| LatticePoint::from_i64s(&c.iter().map(|&v| v as i64).collect::<Vec<_>>()))
        .collect();
    Ok(verify_qi_exhaustive(&base)?.qi)
}
