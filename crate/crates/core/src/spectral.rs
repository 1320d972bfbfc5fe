//! Walsh spectra on `X = (Z/2Z)^ν` and the analyticity witness.
//!
//! Points and characters are both `ν`-bit masks, with
//! `y(x) = (-1)^{popcount(x & y)}`. For a random `Λ ⊂ X` whose spectrum is
//! flat away from the trivial character, `v = exp(iπ f / 4)` with
//! `f = y_1 + ... + y_ρ` has `‖f‖_{A(Λ)} <= ρ` but `‖v‖_{A(Λ)} >= ½ 2^{ρ/2}`.

use std::ops::{Add, Sub};

use num_complex::Complex64;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Largest dimension for spectra held in memory.
pub const MAX_SPECTRAL_NU: u32 = 26;

/// Stage width above which a single butterfly stage is split across threads.
const PAR_STAGE: usize = 1 << 14;

/// Unnormalized Walsh-Hadamard transform in place:
/// `out[y] = Σ_x in[x] (-1)^{popcount(x & y)}`. Applying it twice multiplies
/// by the length.
pub fn fwht<T>(data: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Send + Sync,
{
    let n = data.len();
    if !n.is_power_of_two() {
        return Err(Error::arg(format!("transform length {n} is not a power of two")));
    }
    let mut h = 1;
    while h < n {
        data.par_chunks_mut(2 * h).for_each(|block| {
            let (a, b) = block.split_at_mut(h);
            let step = |(x, y): (&mut T, &mut T)| {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            };
            if h >= PAR_STAGE {
                a.par_iter_mut().zip(b.par_iter_mut()).for_each(step);
            } else {
                a.iter_mut().zip(b.iter_mut()).for_each(step);
            }
        });
        h *= 2;
    }
    Ok(())
}

fn check_nu(nu: u32) -> Result<usize> {
    if nu > MAX_SPECTRAL_NU {
        return Err(Error::resource("spectral dimension", nu, MAX_SPECTRAL_NU));
    }
    Ok(1usize << nu)
}

fn indicator(nu: u32, lambda: &[u64]) -> Result<Vec<bool>> {
    let n = check_nu(nu)?;
    let mut ind = vec![false; n];
    for &x in lambda {
        if x >= n as u64 {
            return Err(Error::arg(format!("point {x:#x} has more than {nu} bits")));
        }
        ind[x as usize] = true;
    }
    Ok(ind)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralTable {
    pub nu: u32,
    /// `σ̂(y)` indexed by the mask `y`.
    #[serde(skip)]
    pub values: Vec<f64>,
    /// `|Λ|` (distinct points).
    pub support: usize,
}

impl SpectralTable {
    /// `σ̂(1) = |Λ|`.
    pub fn trivial(&self) -> f64 {
        self.values[0]
    }

    /// `sup_{y ≠ 1} |σ̂(y)|`.
    pub fn sup_nontrivial(&self) -> f64 {
        self.values[1..].par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
    }

    /// Relative gap in `Σ_y σ̂(y)² = 2^ν Σ_x σ(x)²`.
    pub fn parseval_error(&self) -> f64 {
        let lhs: f64 = self.values.par_iter().map(|v| v * v).sum();
        let rhs = self.values.len() as f64 * self.support as f64;
        if rhs == 0.0 {
            lhs
        } else {
            (lhs - rhs).abs() / rhs
        }
    }

    /// The `count` largest `|σ̂(y)|`, `y ≠ 1`, by decreasing magnitude.
    pub fn top_nontrivial(&self, count: usize) -> Vec<(u64, f64)> {
        let mut idx: Vec<(u64, f64)> = self.values[1..]
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u64 + 1, v))
            .collect();
        idx.par_sort_unstable_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        idx.truncate(count);
        idx
    }
}

/// `σ̂(y) = Σ_{x ∈ Λ} y(x)`.
pub fn sigma_hat(nu: u32, lambda: &[u64]) -> Result<SpectralTable> {
    let ind = indicator(nu, lambda)?;
    let support = ind.iter().filter(|&&b| b).count();
    let mut values: Vec<f64> = ind.into_par_iter().map(|b| b as u8 as f64).collect();
    fwht(&mut values)?;
    Ok(SpectralTable { nu, values, support })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatSample {
    pub nu: u32,
    pub ell: u64,
    pub alpha: f64,
    /// Attempts used, the accepted one included.
    pub attempts: u64,
    #[serde(skip)]
    pub lambda: Vec<u64>,
    #[serde(skip)]
    pub spectrum: SpectralTable,
    pub sigma_one: f64,
    pub sup_nontrivial: f64,
    /// `(20/√ℓ) σ̂(1)`
    pub flatness_threshold: f64,
    /// `10 √ν`
    pub deviation_lambda: f64,
    /// `2 λ (2^ν α)^{1/2}`, the level exceeded with probability at most
    /// `2^{ν+1} e^{-λ²/2}`.
    pub sup_level: f64,
}

/// Bernoulli(α) subsets of `(Z/2Z)^ν`, `α = 2ℓν 2^{-ν}`, resampled until
/// `σ̂(1) >= ℓν` and `sup_{y≠1} |σ̂(y)| <= (20/√ℓ) σ̂(1)`.
pub fn sample_flat_lambda(nu: u32, ell: u64, seed: u64, max_retries: u64) -> Result<FlatSample> {
    let n = check_nu(nu)?;
    if ell <= 400 {
        return Err(Error::arg(format!("ell = {ell} must exceed 400")));
    }
    let alpha = 2.0 * ell as f64 * nu as f64 / n as f64;
    if alpha >= 1.0 {
        return Err(Error::arg(format!("alpha = {alpha} must be below 1")));
    }
    let skip = Geometric::new(alpha).map_err(|e| Error::Domain(e.to_string()))?;
    for attempt in 0..max_retries {
        let mut rng = stream(seed, Purpose::Spectral, attempt);
        let mut lambda = Vec::with_capacity((1.2 * alpha * n as f64) as usize);
        let mut x: u64 = 0;
        loop {
            x = match x.checked_add(skip.sample(&mut rng)) {
                Some(v) if v < n as u64 => v,
                _ => break,
            };
            lambda.push(x);
            x += 1;
        }
        let spectrum = sigma_hat(nu, &lambda)?;
        let sigma_one = spectrum.trivial();
        let sup = spectrum.sup_nontrivial();
        let threshold = 20.0 / (ell as f64).sqrt() * sigma_one;
        if sigma_one >= (ell * nu as u64) as f64 && sup <= threshold {
            let deviation_lambda = 10.0 * (nu as f64).sqrt();
            return Ok(FlatSample {
                nu,
                ell,
                alpha,
                attempts: attempt + 1,
                lambda,
                spectrum,
                sigma_one,
                sup_nontrivial: sup,
                flatness_threshold: threshold,
                deviation_lambda,
                sup_level: 2.0 * deviation_lambda * (n as f64 * alpha).sqrt(),
            });
        }
    }
    Err(Error::SearchFailed(format!(
        "no flat sample for nu = {nu}, ell = {ell} in {max_retries} attempts"
    )))
}

/// `round(log₂(√ℓ / 20))`, clamped at 0.
pub fn default_rho(ell: u64) -> u32 {
    rho_exact(ell).round().max(0.0) as u32
}

/// `log₂(√ℓ / 20)`.
pub fn rho_exact(ell: u64) -> f64 {
    ((ell as f64).sqrt() / 20.0).log2()
}

/// `(2^{-ρ/2} + r 2^{ρ/2})^{-1}`; with `r = 20/√ℓ` this is the analytic
/// lower bound on `‖v‖_{A(Λ)}`.
pub fn chain_bound(rho: u32, r: f64) -> f64 {
    let s = 2f64.powf(rho as f64 / 2.0);
    1.0 / (1.0 / s + r * s)
}

/// Rank of masks over `F_2`.
fn mask_rank(masks: &[u64]) -> usize {
    let mut rows: Vec<u64> = Vec::new();
    for &m in masks {
        let mut v = m;
        for &r in &rows {
            v = v.min(v ^ r);
        }
        if v != 0 {
            rows.push(v);
            rows.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    rows.len()
}

/// `f(x) = Σ_j y_j(x)`.
fn f_values(nu: u32, masks: &[u64]) -> Vec<i64> {
    (0..1u64 << nu)
        .into_par_iter()
        .map(|x| masks.iter().map(|&y| 1 - 2 * ((x & y).count_ones() as i64 & 1)).sum())
        .collect()
}

/// `v(x) = exp(iπ f(x) / 4)`.
pub fn v_values(nu: u32, masks: &[u64]) -> Vec<Complex64> {
    f_values(nu, masks)
        .into_par_iter()
        .map(|f| Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * f as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub nu: u32,
    pub ell: u64,
    pub rho: u32,
    pub rho_exact: f64,
    pub masks: Vec<u64>,
    pub sigma_one: f64,
    pub sup_sigma_nontrivial: f64,
    pub sup_mu: f64,
    /// `σ̂(1) / sup_y |μ̂(y)|`, a lower bound on `‖v‖_{A(Λ)}`.
    pub lower_bound: f64,
    /// `½ 2^{ρ/2}`
    pub target: f64,
    /// `(2^{-ρ/2} + (20/√ℓ) 2^{ρ/2})^{-1}`
    pub analytic_chain: f64,
    /// The same chain with the observed ratio `sup |σ̂| / σ̂(1)`.
    pub observed_chain: f64,
    /// `Σ_y |f̂(y)|`, equal to `ρ`.
    pub f_norm: f64,
    /// `sup_{y≠1} |σ̂| <= (20/√ℓ) σ̂(1)`.
    pub flat: bool,
    /// `lower_bound >= target`.
    pub pass: bool,
    /// `lower_bound >= analytic_chain - 1e-9` (required whenever `flat`).
    pub chain_pass: bool,
}

/// The duality certificate: `μ = vσ`, and `σ̂(1) <= sup|μ̂| ‖v^{-1}‖_{A(Λ)}`.
pub fn analyticity_witness(
    nu: u32,
    ell: u64,
    lambda: &[u64],
    rho: u32,
    masks: Option<Vec<u64>>,
) -> Result<WitnessReport> {
    let n = check_nu(nu)?;
    let masks = masks.unwrap_or_else(|| (0..rho.min(nu)).map(|j| 1u64 << j).collect());
    if masks.len() != rho as usize {
        return Err(Error::arg(format!("{} masks given for rho = {rho}", masks.len())));
    }
    if rho >= nu.max(1) && rho > 0 {
        return Err(Error::arg(format!("rho = {rho} must be below nu = {nu}")));
    }
    if masks.iter().any(|&m| m >= n as u64) {
        return Err(Error::arg("mask wider than nu bits"));
    }
    if mask_rank(&masks) != masks.len() {
        return Err(Error::arg("characters are not independent over F_2"));
    }
    let ind = indicator(nu, lambda)?;
    let spectrum = sigma_hat(nu, lambda)?;
    let sigma_one = spectrum.trivial();
    let sup_sigma = spectrum.sup_nontrivial();

    let f = f_values(nu, &masks);
    let mut mu: Vec<Complex64> = f
        .par_iter()
        .zip(ind.par_iter())
        .map(|(&fx, &inside)| {
            if inside {
                Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * fx as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    fwht(&mut mu)?;
    let sup_mu = mu.par_iter().map(|z| z.norm()).reduce(|| 0.0, f64::max);
    drop(mu);

    let mut fh = f;
    fwht(&mut fh)?;
    let f_norm = fh.par_iter().map(|v| v.unsigned_abs() as f64).sum::<f64>() / n as f64;

    let lower_bound = if sup_mu > 0.0 { sigma_one / sup_mu } else { 0.0 };
    let target = 0.5 * 2f64.powf(rho as f64 / 2.0);
    let analytic_chain = chain_bound(rho, 20.0 / (ell as f64).sqrt());
    let observed_chain = if sigma_one > 0.0 {
        chain_bound(rho, sup_sigma / sigma_one)
    } else {
        0.0
    };
    Ok(WitnessReport {
        nu,
        ell,
        rho,
        rho_exact: rho_exact(ell),
        masks,
        sigma_one,
        sup_sigma_nontrivial: sup_sigma,
        sup_mu,
        lower_bound,
        target,
        analytic_chain,
        observed_chain,
        f_norm,
        flat: sup_sigma <= 20.0 / (ell as f64).sqrt() * sigma_one,
        pass: lower_bound >= target,
        chain_pass: lower_bound >= analytic_chain - 1e-9,
    })
}

/// `Σ_y |ĝ(y)|` with `ĝ = 2^{-ν} H g`.
fn a_norm(g: &[Complex64]) -> Result<(f64, Vec<Complex64>)> {
    let mut h = g.to_vec();
    fwht(&mut h)?;
    let scale = 1.0 / g.len() as f64;
    h.iter_mut().for_each(|z| *z *= scale);
    Ok((h.iter().map(|z| z.norm()).sum(), h))
}

/// Upper bound on `‖v‖_{A(Λ)}` for `ν <= 8`: projected subgradient descent
/// on `‖ĝ‖₁` over extensions `g` of `v|_Λ`, returning the best value seen.
pub fn restriction_norm_upper(nu: u32, lambda: &[u64], masks: &[u64], iterations: usize) -> Result<f64> {
    if nu > 8 {
        return Err(Error::resource("subgradient restriction norm dimension", nu, 8));
    }
    let ind = indicator(nu, lambda)?;
    let v = v_values(nu, masks);
    let mut g = v.clone();
    let (mut best, mut hat) = a_norm(&g)?;
    let n = g.len() as f64;
    for t in 0..iterations {
        // subgradient of Σ|ĝ| in g: 2^{-ν} H (ĝ / |ĝ|)
        let mut s: Vec<Complex64> = hat
            .iter()
            .map(|z| if z.norm() > 1e-15 { z / z.norm() } else { Complex64::new(0.0, 0.0) })
            .collect();
        fwht(&mut s)?;
        let norm2: f64 = s
            .iter()
            .zip(&ind)
            .filter(|(_, &inside)| !inside)
            .map(|(z, _)| (z / n).norm_sqr())
            .sum();
        if norm2 == 0.0 {
            break;
        }
        let step = 0.5 / ((t + 1) as f64).sqrt() / norm2.sqrt();
        for ((gx, sx), &inside) in g.iter_mut().zip(&s).zip(&ind) {
            if !inside {
                *gx -= sx / n * step;
            }
        }
        let (value, h) = a_norm(&g)?;
        hat = h;
        best = best.min(value);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive<T>(input: &[T]) -> Vec<T>
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Default,
    {
        (0..input.len())
            .map(|y| {
                input.iter().enumerate().fold(T::default(), |acc, (x, &v)| {
                    if (x & y).count_ones() % 2 == 0 {
                        acc + v
                    } else {
                        acc - v
                    }
                })
            })
            .collect()
    }

    #[test]
    fn delta_and_ones() {
        let mut d = vec![0i64; 16];
        d[0] = 1;
        fwht(&mut d).unwrap();
        assert!(d.iter().all(|&v| v == 1));
        fwht(&mut d).unwrap();
        assert_eq!(d[0], 16);
        assert!(d[1..].iter().all(|&v| v == 0));
        assert!(fwht(&mut [0.0; 12]).is_err());
    }

    #[test]
    fn sigma_of_full_space_and_cosets() {
        let t = sigma_hat(4, &(0..16).collect::<Vec<_>>()).unwrap();
        assert_eq!(t.trivial(), 16.0);
        assert_eq!(t.sup_nontrivial(), 0.0);
        // coset 0b0001 + <0b0010, 0b0100>
        let coset: Vec<u64> = [0u64, 2, 4, 6].iter().map(|x| x ^ 1).collect();
        let t = sigma_hat(4, &coset).unwrap();
        for y in 0..16usize {
            // annihilator of <2, 4> is {0, 1, 8, 9}
            let expect = if y & 0b0110 == 0 { 4.0 } else { 0.0 };
            assert_eq!(t.values[y].abs(), expect, "y = {y}");
        }
        assert!(t.parseval_error() < 1e-12);
        assert_eq!(t.top_nontrivial(1)[0], (1, -4.0));
    }

    #[test]
    fn v_hat_lives_on_the_generated_subgroup() {
        for rho in 0..=3u32 {
            let nu = 6;
            let masks = vec![0b000011, 0b010100, 0b100000][..rho as usize].to_vec();
            let (norm, hat) = a_norm(&v_values(nu, &masks)).unwrap();
            let mut span = vec![0u64];
            for &m in &masks {
                let more: Vec<u64> = span.iter().map(|s| s ^ m).collect();
                span.extend(more);
            }
            for (y, z) in hat.iter().enumerate() {
                let expect = if span.contains(&(y as u64)) { 2f64.powf(-(rho as f64) / 2.0) } else { 0.0 };
                assert!((z.norm() - expect).abs() < 1e-12, "rho {rho} y {y}");
            }
            assert!((norm - 2f64.powf(rho as f64 / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_zero_witness() {
        let lambda: Vec<u64> = (0..64).filter(|x| x % 3 != 0).collect();
        let r = analyticity_witness(6, 401, &lambda, 0, None).unwrap();
        assert_eq!(r.sup_mu, r.sigma_one);
        assert_eq!(r.lower_bound, 1.0);
        assert_eq!(r.target, 0.5);
        assert!(r.pass);
        assert_eq!(r.f_norm, 0.0);
    }

    #[test]
    fn dependent_masks_rejected() {
        let lambda = vec![1, 2, 3];
        assert!(analyticity_witness(4, 401, &lambda, 2, Some(vec![3, 3])).is_err());
        assert!(analyticity_witness(4, 401, &lambda, 3, Some(vec![1, 2, 3])).is_err());
        assert!(analyticity_witness(4, 401, &lambda, 2, Some(vec![1, 6])).is_ok());
    }

    #[test]
    fn rho_defaults() {
        assert_eq!(default_rho(40_000), 3);
        assert!((rho_exact(40_000) - 10f64.log2()).abs() < 1e-12);
        assert_eq!(default_rho(100), 0);
        let c = chain_bound(3, 0.1);
        assert!((c - 1.0 / (2f64.powf(-1.5) + 0.1 * 2f64.powf(1.5))).abs() < 1e-15);
        assert!(c > 1.5710 && c < 1.5714);
    }

    #[test]
    fn flat_sampler_small() {
        let s = sample_flat_lambda(16, 401, 7, 20).unwrap();
        assert_eq!(s.sigma_one, s.lambda.len() as f64);
        assert!(s.sigma_one >= 401.0 * 16.0);
        assert!(s.sup_nontrivial <= s.flatness_threshold);
        let again = sample_flat_lambda(16, 401, 7, 20).unwrap();
        assert_eq!(s.lambda, again.lambda);
        assert!(sample_flat_lambda(16, 400, 7, 20).is_err());
        assert!(sample_flat_lambda(12, 500, 7, 20).is_err());
    }

    #[test]
    fn subgradient_sandwich() {
        // random Λ in (Z/2Z)^6 with the witness for rho = 2
        let lambda: Vec<u64> = (0..64u64).filter(|x| (x.wrapping_mul(0x9e37_79b9) >> 5) % 3 != 0).collect();
        let masks = vec![1, 2];
        let r = analyticity_witness(6, 401, &lambda, 2, Some(masks.clone())).unwrap();
        let upper = restriction_norm_upper(6, &lambda, &masks, 300).unwrap();
        assert!(r.lower_bound <= upper + 1e-9, "{} > {upper}", r.lower_bound);
        assert!(upper <= 2.0 + 1e-12);
        // on the full space there is nothing to optimise
        let all: Vec<u64> = (0..64).collect();
        let upper = restriction_norm_upper(6, &all, &masks, 10).unwrap();
        assert!((upper - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fwht_matches_naive(nu in 0u32..=4, seed in any::<u64>()) {
            let n = 1usize << nu;
            let x: Vec<i64> = (0..n).map(|i| ((seed.rotate_left(i as u32 * 7) % 19) as i64) - 9).collect();
            let mut fast = x.clone();
            fwht(&mut fast).unwrap();
            prop_assert_eq!(&fast, &naive(&x));
            fwht(&mut fast).unwrap();
            prop_assert!(fast.iter().zip(&x).all(|(a, b)| *a == b * n as i64));
        }

        #[test]
        fn fwht_involution_float(v in prop::collection::vec(-1e3f64..1e3, 32)) {
            let mut w = v.clone();
            fwht(&mut w).unwrap();
            fwht(&mut w).unwrap();
            for (a, b) in w.iter().zip(&v) {
                prop_assert!((a / 32.0 - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn product_transform_is_scaled_convolution(
            a in prop::collection::vec(-5i64..=5, 16),
            b in prop::collection::vec(-5i64..=5, 16),
        ) {
            let prod: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
            let mut lhs = prod;
            fwht(&mut lhs).unwrap();
            let (ha, hb) = (naive(&a), naive(&b));
            for y in 0..16usize {
                let conv: i64 = (0..16usize).map(|z| ha[z] * hb[y ^ z]).sum();
                prop_assert_eq!(16 * lhs[y], conv);
            }
        }

        #[test]
        fn parseval_and_trivial_value(raw in prop::collection::vec(0u64..256, 0..80)) {
            let t = sigma_hat(8, &raw).unwrap();
            let distinct = raw.iter().collect::<std::collections::HashSet<_>>().len();
            prop_assert_eq!(t.trivial(), distinct as f64);
            prop_assert!(t.parseval_error() <= 1e-9);
        }
    }
}
