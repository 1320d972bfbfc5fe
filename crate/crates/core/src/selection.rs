//! Two-stage Bernoulli selection in `(Z/pZ)^ν` and the certified search for
//! large sets all of whose small subsets are free.
//!
//! Stage one keeps each point with probability `α = 2ℓν p^{-ν}`, stage two
//! thins the result with probability `β = 1/(4pℓ)`.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::binomial;
use crate::error::{Error, Result};
use crate::group::{check_modulus, fp_rank, is_free, EchelonBasis, FpVector};
use crate::rng::{stream, Purpose};

/// Largest `p^ν` sampled point by point; bigger spaces use the
/// Poissonized sampler (see [`SamplingMode`]).
pub const EXACT_SAMPLING_CAP: u64 = 1 << 62;

pub const DEFAULT_RETRIES: u64 = 10_000;

/// Largest number of subsets the freeness check may visit.
pub const DEFAULT_SUBSET_BUDGET: u128 = 100_000_000;

/// `K_ℓ = ¼ ln p / ln(4pℓ)`.
pub fn k_ell(p: u64, ell: u64) -> f64 {
    0.25 * (p as f64).ln() / (4.0 * p as f64 * ell as f64).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Every point of `X` decided by its own Bernoulli(α) draw (realized by
    /// geometric skips over the index space).
    Exact,
    /// `|Λ| ~ Poisson(p^ν α)` followed by that many distinct uniform points.
    /// Its law is within total variation `α` of the exact one.
    Poissonized,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub p: u64,
    pub nu: u32,
    pub ell: u64,
    pub seed: u64,
    pub trials: u64,
}

impl SelectionConfig {
    pub fn new(p: u64, nu: u32, ell: u64, seed: u64, trials: u64) -> Result<Self> {
        let cfg = SelectionConfig {
            p,
            nu,
            ell,
            seed,
            trials,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `p` prime, `ν >= 1`, `1 <= ℓ <= p^ν / (2ν)`.
    pub fn validate(&self) -> Result<()> {
        check_modulus(self.p)?;
        if self.nu == 0 {
            return Err(Error::arg("nu must be at least 1"));
        }
        if self.ell == 0 {
            return Err(Error::arg("ell must be at least 1"));
        }
        let too_dense = match self.space_size() {
            Some(n) => 2 * self.ell as u128 * self.nu as u128 > n as u128,
            None => self.ln_alpha() > 0.0,
        };
        if too_dense {
            return Err(Error::arg(format!(
                "ell = {} exceeds p^nu / (2 nu) for p = {}, nu = {}",
                self.ell, self.p, self.nu
            )));
        }
        Ok(())
    }

    /// Additionally `ν >= 16`.
    pub fn validate_lemma(&self) -> Result<()> {
        self.validate()?;
        if self.nu < 16 {
            return Err(Error::arg(format!("lemma mode needs nu >= 16, got {}", self.nu)));
        }
        Ok(())
    }

    fn ln_alpha(&self) -> f64 {
        (2.0 * self.ell as f64 * self.nu as f64).ln() - self.nu as f64 * (self.p as f64).ln()
    }

    /// `α = 2ℓν p^{-ν}`.
    pub fn alpha(&self) -> f64 {
        self.ln_alpha().exp()
    }

    /// `β = 1/(4pℓ)`.
    pub fn beta(&self) -> f64 {
        1.0 / (4.0 * self.p as f64 * self.ell as f64)
    }

    /// `p^ν α = 2ℓν`, the expected size of `Λ`.
    pub fn expected_size(&self) -> f64 {
        2.0 * self.ell as f64 * self.nu as f64
    }

    /// `p^ν` if it fits in a `u64`.
    pub fn space_size(&self) -> Option<u64> {
        self.p.checked_pow(self.nu)
    }

    pub fn sampling_mode(&self) -> SamplingMode {
        match self.space_size() {
            Some(n) if n <= EXACT_SAMPLING_CAP => SamplingMode::Exact,
            _ => SamplingMode::Poissonized,
        }
    }
}

fn decode(p: u64, nu: u32, mut idx: u64) -> FpVector {
    let coords = (0..nu)
        .map(|_| {
            let c = idx % p;
            idx /= p;
            c
        })
        .collect();
    FpVector::from_reduced(p, coords)
}

fn sorted(mut v: Vec<FpVector>) -> Vec<FpVector> {
    v.sort_unstable();
    v
}

fn sample_with(cfg: &SelectionConfig, rng: &mut ChaCha8Rng) -> Result<Vec<FpVector>> {
    let alpha = cfg.alpha();
    match (cfg.sampling_mode(), cfg.space_size()) {
        (SamplingMode::Exact, Some(n)) => {
            let skip = Geometric::new(alpha).map_err(|e| Error::Domain(e.to_string()))?;
            let mut out = Vec::new();
            let mut idx: u64 = 0;
            loop {
                idx = match idx.checked_add(skip.sample(rng)) {
                    Some(i) if i < n => i,
                    _ => break,
                };
                out.push(decode(cfg.p, cfg.nu, idx));
                idx += 1;
            }
            Ok(out)
        }
        _ => {
            let count = Poisson::new(cfg.expected_size())
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng) as usize;
            let mut seen = HashSet::with_capacity(count);
            while seen.len() < count {
                let coords = (0..cfg.nu).map(|_| rng.random_range(0..cfg.p)).collect();
                seen.insert(FpVector::from_reduced(cfg.p, coords));
            }
            Ok(sorted(seen.into_iter().collect()))
        }
    }
}

/// `Λ(ω)` for trial `trial`: each point of `(Z/pZ)^ν` kept with probability `α`.
pub fn sample_lambda(cfg: &SelectionConfig, trial: u64) -> Result<Vec<FpVector>> {
    cfg.validate()?;
    sample_with(cfg, &mut stream(cfg.seed, Purpose::Selection, trial))
}

/// `λ(ω) ⊆ Λ(ω)`: each element kept with probability `β`.
pub fn sample_sub_lambda(lambda: &[FpVector], cfg: &SelectionConfig, trial: u64) -> Vec<FpVector> {
    thin(lambda, cfg.beta(), &mut stream(cfg.seed, Purpose::Thinning, trial))
}

fn thin(lambda: &[FpVector], beta: f64, rng: &mut ChaCha8Rng) -> Vec<FpVector> {
    lambda.iter().filter(|_| rng.random_bool(beta)).cloned().collect()
}

/// Binomial standard error of a frequency around probability `q`.
pub fn binomial_sigma(q: f64, trials: u64) -> f64 {
    (q.clamp(0.0, 1.0) * (1.0 - q.clamp(0.0, 1.0)) / trials as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowStats {
    pub trials: u64,
    pub lower: f64,
    pub upper: f64,
    pub hits: u64,
    pub frequency: f64,
    /// Lower bound on the probability of landing in the window.
    pub bound: f64,
    pub sigma: f64,
    /// `frequency >= bound - 3σ`.
    pub pass: bool,
    pub mean_size: f64,
    pub expected_size: f64,
    /// `|mean - expected|` in standard errors of the mean.
    pub mean_z: f64,
}

/// Frequency of `lower <= |Λ| <= upper` over `cfg.trials` seeded trials.
pub fn size_window_stats(cfg: &SelectionConfig, lower: f64, upper: f64, bound: f64) -> Result<WindowStats> {
    cfg.validate()?;
    if cfg.trials == 0 {
        return Err(Error::arg("trials must be positive"));
    }
    let sizes: Vec<usize> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| sample_lambda(cfg, t).map(|l| l.len()))
        .collect::<Result<_>>()?;
    let hits = sizes
        .iter()
        .filter(|&&s| lower <= s as f64 && s as f64 <= upper)
        .count() as u64;
    let n = cfg.trials as f64;
    let frequency = hits as f64 / n;
    let sigma = binomial_sigma(bound, cfg.trials);
    let mean_size = sizes.iter().sum::<usize>() as f64 / n;
    let expected_size = cfg.expected_size();
    let variance = expected_size * (1.0 - cfg.alpha());
    Ok(WindowStats {
        trials: cfg.trials,
        lower,
        upper,
        hits,
        frequency,
        bound,
        sigma,
        pass: frequency >= bound - 3.0 * sigma,
        mean_size,
        expected_size,
        mean_z: (mean_size - expected_size).abs() / (variance / n).sqrt(),
    })
}

/// `P(½ p^ν α <= |Λ| <= (3/2) p^ν α) > 1 - 2 exp(-p^ν α / 32)`; at the
/// selection's `α` this is the window `[ℓν, 3ℓν]` with bound
/// `1 - 2 exp(-ℓν/16)`.
pub fn lemma_window_stats(cfg: &SelectionConfig) -> Result<WindowStats> {
    let m = cfg.expected_size();
    size_window_stats(cfg, 0.5 * m, 1.5 * m, 1.0 - 2.0 * (-m / 32.0).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiedEstimate {
    pub trials: u64,
    pub dependent: u64,
    pub estimate: f64,
    /// `p^{-ν/2}`
    pub bound: f64,
    /// `p^{-ν} exp(αβ(p-1)p^ν)`
    pub chain_bound: f64,
    pub sigma: f64,
    /// `estimate <= bound + 3σ`
    pub pass: bool,
}

/// Monte-Carlo frequency of "`λ(ω)` is linearly dependent".
pub fn estimate_tied_probability(cfg: &SelectionConfig) -> Result<TiedEstimate> {
    estimate_tied_with_beta(cfg, cfg.beta())
}

/// As [`estimate_tied_probability`] with an explicit thinning probability.
pub fn estimate_tied_with_beta(cfg: &SelectionConfig, beta: f64) -> Result<TiedEstimate> {
    cfg.validate()?;
    if cfg.trials < 100 {
        return Err(Error::arg("at least 100 trials are needed"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::arg("thinning probability outside [0, 1]"));
    }
    let dependent = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let lambda = sample_lambda(cfg, t)?;
            let sub = thin(&lambda, beta, &mut stream(cfg.seed, Purpose::Thinning, t));
            Ok(!is_free(&sub)?)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&d| d)
        .count() as u64;
    let (p, nu) = (cfg.p as f64, cfg.nu as f64);
    let bound = p.powf(-nu / 2.0);
    let estimate = dependent as f64 / cfg.trials as f64;
    let sigma = binomial_sigma(bound, cfg.trials);
    Ok(TiedEstimate {
        trials: cfg.trials,
        dependent,
        estimate,
        bound,
        chain_bound: (-nu * p.ln() + cfg.expected_size() * beta * (p - 1.0)).exp(),
        sigma,
        pass: estimate <= bound + 3.0 * sigma,
    })
}

/// `P(k distinct uniform points are dependent) = 1 - Π_{j<k} (p^ν - p^j)/(p^ν - j)`.
pub fn conditional_dependence_exact(p: u64, nu: u32, k: u32) -> f64 {
    let n = (p as f64).powi(nu as i32);
    let indep: f64 = (0..k)
        .map(|j| (n - (p as f64).powi(j as i32)) / (n - j as f64))
        .product();
    1.0 - indep.max(0.0)
}

/// `p^{-ν}(1 + p + ... + p^{k-1})`, which is below `p^{k-ν}`.
pub fn conditional_dependence_union_bound(p: u64, nu: u32, k: u32) -> f64 {
    let p = p as f64;
    (0..k).map(|j| p.powi(j as i32)).sum::<f64>() / p.powi(nu as i32)
}

/// Which subset sizes a certificate covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreenessRatio {
    /// `K_ℓ` itself.
    Exact,
    /// `1/8`, allowed when `4ℓ < p`.
    OneEighth,
}

impl FreenessRatio {
    pub fn value(self, p: u64, ell: u64) -> Result<f64> {
        match self {
            FreenessRatio::Exact => Ok(k_ell(p, ell)),
            FreenessRatio::OneEighth if 4 * ell < p => Ok(0.125),
            FreenessRatio::OneEighth => Err(Error::arg(format!(
                "the 1/8 ratio needs 4 ell < p, got ell = {ell}, p = {p}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCertificate {
    pub p: u64,
    pub nu: u32,
    pub ell: u64,
    pub lambda: Vec<FpVector>,
    pub ratio: FreenessRatio,
    pub k: f64,
    /// `⌊K ν⌋`
    pub checked_subset_size: usize,
    pub exhaustive: bool,
    pub mode: SamplingMode,
    /// Trial index of the accepted draw.
    pub trial: u64,
    pub attempts: u64,
}

impl LemmaCertificate {
    pub fn size_window(&self) -> (u64, u64) {
        let m = self.ell * self.nu as u64;
        (m, 3 * m)
    }
}

/// `⌊K ν⌋`, computed so that exact products like `0.0625 · 16` are not
/// rounded down.
fn checked_size(k: f64, nu: u32) -> usize {
    (k * nu as f64 * (1.0 + 1e-12)).floor() as usize
}

/// Every subset of size `min(s, |Λ|)`, hence every subset of size `<= s`,
/// is free. Depth-first over index-ordered subsets with an incremental
/// echelon form; a dependent prefix ends the search.
pub fn small_subsets_free(lambda: &[FpVector], s: usize, budget: u128) -> Result<bool> {
    let s = s.min(lambda.len());
    if s == 0 {
        return Ok(true);
    }
    let count = binomial(lambda.len() as u64, s as u64).unwrap_or(u128::MAX);
    if count > budget {
        return Err(Error::resource("subset freeness checks", count, budget));
    }
    let (p, dim) = (lambda[0].modulus(), lambda[0].dim());
    if lambda.iter().any(|v| v.modulus() != p || v.dim() != dim) {
        return Err(Error::arg("mixed moduli or dimensions"));
    }
    fn walk(lambda: &[FpVector], start: usize, left: usize, basis: &mut EchelonBasis) -> bool {
        for i in start..=lambda.len() - left {
            if !basis.insert(lambda[i].coords()) {
                return false;
            }
            let ok = left == 1 || walk(lambda, i + 1, left - 1, basis);
            basis.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    Ok(walk(lambda, 0, s, &mut EchelonBasis::new(p, dim)))
}

/// Resamples `Λ` until `ℓν <= |Λ| <= 3ℓν` and all subsets of size
/// `<= ⌊Kν⌋` are free.
pub fn lemma_search(cfg: &SelectionConfig, ratio: FreenessRatio, retries: u64) -> Result<LemmaCertificate> {
    cfg.validate_lemma()?;
    let k = ratio.value(cfg.p, cfg.ell)?;
    let s = checked_size(k, cfg.nu);
    let (lo, hi) = (cfg.ell * cfg.nu as u64, 3 * cfg.ell * cfg.nu as u64);
    for attempt in 0..retries {
        let lambda = sample_with(cfg, &mut stream(cfg.seed, Purpose::LemmaSearch, attempt))?;
        let n = lambda.len() as u64;
        if n < lo || n > hi {
            continue;
        }
        if small_subsets_free(&lambda, s, DEFAULT_SUBSET_BUDGET)? {
            return Ok(LemmaCertificate {
                p: cfg.p,
                nu: cfg.nu,
                ell: cfg.ell,
                lambda,
                ratio,
                k,
                checked_subset_size: s,
                exhaustive: true,
                mode: cfg.sampling_mode(),
                trial: attempt,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::SearchFailed(format!(
        "no admissible set for p = {}, nu = {}, ell = {} in {retries} attempts",
        cfg.p, cfg.nu, cfg.ell
    )))
}

/// Independent re-check of a certificate: recomputes `K` and the subset
/// size, the size window, distinctness, and the rank of every subset of the
/// checked size from scratch.
pub fn verify_certificate(cert: &LemmaCertificate) -> Result<bool> {
    let k = cert.ratio.value(cert.p, cert.ell)?;
    if k != cert.k || checked_size(k, cert.nu) != cert.checked_subset_size {
        return Ok(false);
    }
    let (lo, hi) = cert.size_window();
    let n = cert.lambda.len();
    if (n as u64) < lo || n as u64 > hi {
        return Ok(false);
    }
    if cert
        .lambda
        .iter()
        .any(|v| v.modulus() != cert.p || v.dim() != cert.nu as usize)
    {
        return Ok(false);
    }
    if cert.lambda.iter().collect::<HashSet<_>>().len() != n {
        return Ok(false);
    }
    let s = cert.checked_subset_size.min(n);
    if s == 0 {
        return Ok(true);
    }
    let count = binomial(n as u64, s as u64).unwrap_or(u128::MAX);
    if count > DEFAULT_SUBSET_BUDGET {
        return Err(Error::resource("subset freeness checks", count, DEFAULT_SUBSET_BUDGET));
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let subset: Vec<FpVector> = idx.iter().map(|&i| cert.lambda[i].clone()).collect();
        if fp_rank(&subset)? != s {
            return Ok(false);
        }
        // next combination in lexicographic order
        let Some(pos) = (0..s).rev().find(|&i| idx[i] < n - s + i) else {
            return Ok(true);
        };
        idx[pos] += 1;
        for j in pos + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: u64, nu: u32, ell: u64, trials: u64) -> SelectionConfig {
        SelectionConfig::new(p, nu, ell, 0, trials).unwrap()
    }

    #[test]
    fn k_ell_values() {
        assert!((k_ell(2, 1) - 0.25 * 2f64.ln() / 8f64.ln()).abs() < 1e-15);
        assert!((k_ell(2, 1) - 0.083_333_333_333).abs() < 1e-9);
        assert!((k_ell(5, 1) - 0.134_3).abs() < 1e-4);
        assert!((k_ell(1_000_000_007, 1) - 0.25).abs() < 0.02);
        assert!(k_ell(1_000_000_007, 1) < k_ell(4_294_967_311, 1));
    }

    #[test]
    fn alpha_and_beta() {
        let c = cfg(2, 16, 4, 1);
        assert_eq!(c.alpha(), 2f64.powi(-9));
        assert_eq!(c.expected_size(), 128.0);
        assert_eq!(c.beta(), 1.0 / 32.0);
        assert!(SelectionConfig::new(2, 4, 2, 0, 1).is_ok());
        assert!(SelectionConfig::new(2, 4, 3, 0, 1).is_err());
        assert!(SelectionConfig::new(4, 16, 1, 0, 1).is_err());
        assert!(cfg(2, 8, 1, 1).validate_lemma().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = cfg(2, 16, 4, 1);
        assert_eq!(sample_lambda(&c, 5).unwrap(), sample_lambda(&c, 5).unwrap());
        assert_ne!(sample_lambda(&c, 5).unwrap(), sample_lambda(&c, 6).unwrap());
        let big = cfg(1_000_003, 16, 1, 1);
        assert_eq!(big.sampling_mode(), SamplingMode::Poissonized);
        assert_eq!(sample_lambda(&big, 1).unwrap(), sample_lambda(&big, 1).unwrap());
    }

    #[test]
    fn exact_sampler_mean() {
        let c = cfg(3, 8, 2, 2000);
        let stats = lemma_window_stats(&c).unwrap();
        assert!(stats.mean_z < 5.0, "{stats:?}");
        let big = cfg(1_000_003, 16, 2, 2000);
        let stats = lemma_window_stats(&big).unwrap();
        assert!(stats.mean_z < 5.0, "{stats:?}");
    }

    #[test]
    fn thinning_mean() {
        let c = cfg(2, 16, 4, 1);
        let lambda = sample_lambda(&c, 0).unwrap();
        let kept: usize = (0..400).map(|t| sample_sub_lambda(&lambda, &c, t).len()).sum();
        let mean = kept as f64 / 400.0;
        let expect = lambda.len() as f64 / 32.0;
        let se = (lambda.len() as f64 * (1.0 / 32.0) * (31.0 / 32.0) / 400.0).sqrt();
        assert!((mean - expect).abs() < 5.0 * se);
    }

    #[test]
    fn zero_thinning_is_never_tied() {
        let c = cfg(2, 16, 1, 100);
        let est = estimate_tied_with_beta(&c, 0.0).unwrap();
        assert_eq!(est.dependent, 0);
        assert!(est.pass);
    }

    #[test]
    fn lemma_examples() {
        let c = cfg(2, 16, 1, 1);
        let cert = lemma_search(&c, FreenessRatio::Exact, DEFAULT_RETRIES).unwrap();
        assert_eq!(cert.checked_subset_size, 1);
        assert!(cert.lambda.iter().all(|v| !v.is_zero_vector()));
        assert!(verify_certificate(&cert).unwrap());

        let c = cfg(101, 16, 1, 1);
        let cert = lemma_search(&c, FreenessRatio::Exact, DEFAULT_RETRIES).unwrap();
        assert_eq!(cert.k, 0.25 * 101f64.ln() / 404f64.ln());
        assert!((cert.k - 0.1924).abs() < 5e-4);
        assert_eq!(cert.checked_subset_size, 3);
        assert!(verify_certificate(&cert).unwrap());

        let mut forged = cert.clone();
        forged.lambda[1] = forged.lambda[0].scaled(2);
        assert!(!verify_certificate(&forged).unwrap());
    }

    #[test]
    fn one_eighth_needs_large_p() {
        assert!(FreenessRatio::OneEighth.value(3, 1).is_err());
        assert_eq!(FreenessRatio::OneEighth.value(5, 1).unwrap(), 0.125);
    }

    #[test]
    fn exact_floor_of_k_nu() {
        // K_2 at p = 2 is exactly 1/16
        assert_eq!(checked_size(k_ell(2, 2), 16), 1);
    }

    /// Independent `k`-subsets of `F_2^nu`, counted by walking index-ordered
    /// subsets and tracking the span as an explicit member list.
    fn gf2_independent_sets(nu: u32, k: usize) -> u64 {
        fn go(n: usize, start: usize, left: usize, members: &mut Vec<usize>, in_span: &mut [bool]) -> u64 {
            if left == 1 {
                return (start..n).filter(|&v| !in_span[v]).count() as u64;
            }
            let mut total = 0;
            for v in start..n {
                if in_span[v] {
                    continue;
                }
                let mark = members.len();
                for i in 0..mark {
                    let x = members[i] ^ v;
                    in_span[x] = true;
                    members.push(x);
                }
                total += go(n, v + 1, left - 1, members, in_span);
                for &x in &members[mark..] {
                    in_span[x] = false;
                }
                members.truncate(mark);
            }
            total
        }
        let n = 1usize << nu;
        let mut in_span = vec![false; n];
        in_span[0] = true;
        go(n, 0, k, &mut vec![0], &mut in_span)
    }

    #[test]
    fn conditional_bound_against_enumeration() {
        let (p, nu) = (2, 8);
        for k in 1..=4u32 {
            let total = binomial(1 << nu, k as u64).unwrap() as f64;
            let exact = 1.0 - gf2_independent_sets(nu, k as usize) as f64 / total;
            let formula = conditional_dependence_exact(p, nu, k);
            assert!((exact - formula).abs() < 1e-12, "k = {k}: {exact} vs {formula}");
            assert!(exact <= conditional_dependence_union_bound(p, nu, k) + 1e-15);
            assert!(exact < 2f64.powi(k as i32 - nu as i32));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dfs_freeness_matches_brute_force(
            raw in prop::collection::vec(prop::collection::vec(0u64..3, 3), 0..8),
            s in 0usize..4,
        ) {
            let lambda: Vec<FpVector> = raw.into_iter().map(|c| FpVector::new(3, c).unwrap()).collect();
            let fast = small_subsets_free(&lambda, s, u128::MAX).unwrap();
            let s = s.min(lambda.len());
            let mut brute = true;
            for mask in 0u32..(1 << lambda.len()) {
                if mask.count_ones() as usize == s && s > 0 {
                    let sub: Vec<FpVector> = (0..lambda.len())
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| lambda[i].clone())
                        .collect();
                    brute &= fp_rank(&sub).unwrap() == s;
                }
            }
            prop_assert_eq!(fast, brute);
        }
    }
}
