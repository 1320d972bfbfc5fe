//! Local sub-Gaussian bounds for Bernoulli sums, checked against exact
//! binomial tails.
//!
//! A centered variable is sub-Gaussian of type `τ // h` when
//! `E e^{uX} <= e^{u²τ²/2}` for `|u| <= h`; the Gaussian tail bounds then
//! hold for `0 < λ < τh`.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Finite stand-in for the unbounded window at `α = 1/2`.
pub const HALF_WINDOW_SURROGATE: f64 = 50.0;
pub const DEFAULT_ALPHA_STEPS: usize = 99;
pub const DEFAULT_U_STEPS: usize = 1001;
/// Largest `N` handled by exact convolution in [`difference_tail_check`].
pub const EXACT_DIFFERENCE_MAX: u64 = 2000;
pub const MAX_BINOMIAL_N: u64 = 1_000_000;
pub const MIN_TRIALS: u64 = 10_000;
pub const MGF_TOLERANCE: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.c
    }
}

/// `ln` of a sum of `exp(l_i)`, stable when every term underflows.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut acc = Compensated::default();
    for &l in terms {
        acc.add((l - m).exp());
    }
    m + acc.value().ln()
}

/// `α`-window half-width `1/|2 - 4α|`; `None` at `α = 1/2`.
pub fn bernoulli_window(alpha: f64) -> Option<f64> {
    let d = (2.0 - 4.0 * alpha).abs();
    (d > 0.0).then(|| 1.0 / d)
}

/// `LHS - RHS` of `α e^{(1-α)u} + (1-α) e^{-αu} <= e^{2α(1-α)u²}`, with both
/// sides shifted by 1 to keep precision near `u = 0`.
pub fn mgf_gap(alpha: f64, u: f64) -> f64 {
    let lhs = alpha * ((1.0 - alpha) * u).exp_m1() + (1.0 - alpha) * (-alpha * u).exp_m1();
    let rhs = (2.0 * alpha * (1.0 - alpha) * u * u).exp_m1();
    lhs - rhs
}

/// The concavity quadratic `((2-4α)u + 3)((2-4α)u - 1)`, which must be
/// `<= 0` on the window.
pub fn concavity_quadratic(alpha: f64, u: f64) -> f64 {
    let a = (2.0 - 4.0 * alpha) * u;
    (a + 3.0) * (a - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MgfReport {
    pub alpha_steps: usize,
    pub u_steps: usize,
    pub max_violation: f64,
    pub argmax_alpha: f64,
    pub argmax_u: f64,
    pub max_concavity: f64,
    pub pass: bool,
}

/// Evaluates the MGF inequality on `α = i/(alpha_steps+1)` and `u_steps`
/// evenly spaced points across each window.
pub fn check_mgf_inequality(alpha_steps: usize, u_steps: usize) -> MgfReport {
    let rows: Vec<(f64, f64, f64, f64)> = (1..=alpha_steps)
        .into_par_iter()
        .map(|i| {
            let alpha = i as f64 / (alpha_steps + 1) as f64;
            let h = bernoulli_window(alpha).unwrap_or(HALF_WINDOW_SURROGATE);
            let mut worst = (f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY);
            for j in 0..u_steps {
                let u = if u_steps == 1 {
                    0.0
                } else {
                    -h + 2.0 * h * j as f64 / (u_steps - 1) as f64
                };
                let g = mgf_gap(alpha, u);
                if g > worst.0 {
                    worst = (g, u, worst.2);
                }
                worst.2 = worst.2.max(concavity_quadratic(alpha, u));
            }
            (worst.0, alpha, worst.1, worst.2)
        })
        .collect();
    // sequential reduction keeps the argmax deterministic
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut concave = f64::NEG_INFINITY;
    for (g, a, u, q) in rows {
        if g > best.0 {
            best = (g, a, u);
        }
        concave = concave.max(q);
    }
    MgfReport {
        alpha_steps,
        u_steps,
        max_violation: best.0,
        argmax_alpha: best.1,
        argmax_u: best.2,
        max_concavity: concave,
        pass: best.0 <= MGF_TOLERANCE && concave <= MGF_TOLERANCE,
    }
}

#[allow(clippy::excessive_precision)]
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_29,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_09,
    0.016_644_691_189_821_19,
    0.013_876_128_823_070_75,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_09,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// `ln n! - ln(√(2πn) (n/e)^n)`.
fn stirlerr(n: u64) -> f64 {
    if n < 16 {
        return STIRLERR_TABLE[n as usize];
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m - x`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let v2 = v * v;
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln P(Y = k)` for `Y ~ B(n, α)` (saddle-point form, full relative
/// accuracy in the tails).
pub fn binomial_ln_pmf(n: u64, alpha: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - alpha;
    if alpha == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        return if alpha < 0.1 { -bd0(nf, nf * q) - nf * alpha } else { nf * q.ln() };
    }
    if k == n {
        return if q < 0.1 { -bd0(nf, nf * alpha) - nf * q } else { nf * alpha.ln() };
    }
    let kf = k as f64;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * alpha) - bd0(nf - kf, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

fn check_binomial(n: u64, alpha: f64) -> Result<()> {
    if n > MAX_BINOMIAL_N {
        return Err(Error::resource("binomial size", n, MAX_BINOMIAL_N));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

/// Splits `0..=n` into `|k - nα| > t` (tail) and the rest.
fn in_tail(n: u64, alpha: f64, t: f64, k: u64) -> bool {
    (k as f64 - n as f64 * alpha).abs() > t
}

/// `ln P(|Y - Nα| > t)`, `Y ~ B(N, α)`.
pub fn binomial_tail_ln(n: u64, alpha: f64, t: f64) -> Result<f64> {
    check_binomial(n, alpha)?;
    let terms: Vec<f64> = (0..=n)
        .filter(|&k| in_tail(n, alpha, t, k))
        .map(|k| binomial_ln_pmf(n, alpha, k))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// `P(|Y - Nα| > t)`, `Y ~ B(N, α)`, by summing masses.
pub fn binomial_tail_exact(n: u64, alpha: f64, t: f64) -> Result<f64> {
    Ok(binomial_tail_ln(n, alpha, t)?.exp())
}

/// `P(|Y - Nα| <= t)`, summed independently of the tail.
pub fn binomial_central_exact(n: u64, alpha: f64, t: f64) -> Result<f64> {
    check_binomial(n, alpha)?;
    let mut acc = Compensated::default();
    for k in (0..=n).filter(|&k| !in_tail(n, alpha, t, k)) {
        acc.add(binomial_ln_pmf(n, alpha, k).exp());
    }
    Ok(acc.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubGaussianSpec {
    pub tau: f64,
    /// `None` for an unbounded window.
    pub h: Option<f64>,
}

impl SubGaussianSpec {
    pub fn new(tau: f64, h: Option<f64>) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 || h.is_some_and(|h| h.is_nan() || h <= 0.0) {
            return Err(Error::arg(format!("need tau > 0 and h > 0, got {tau}, {h:?}")));
        }
        Ok(SubGaussianSpec { tau, h })
    }

    /// `Y - α`, `Y ~ B(1, α)`: type `2√(α(1-α)) // 1/|2-4α|`.
    pub fn bernoulli(alpha: f64) -> Result<Self> {
        check_binomial(1, alpha)?;
        Self::new(2.0 * (alpha * (1.0 - alpha)).sqrt(), bernoulli_window(alpha))
    }

    /// Independent sum: `τ² = Σ τ_j²`, window the smallest one.
    pub fn compose(parts: &[SubGaussianSpec]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::arg("empty sum"));
        }
        let tau = parts.iter().map(|s| s.tau * s.tau).sum::<f64>().sqrt();
        let h = parts.iter().filter_map(|s| s.h).reduce(f64::min);
        Self::new(tau, h)
    }

    /// `Y - Nα`, `Y ~ B(N, α)`.
    pub fn binomial(n: u64, alpha: f64) -> Result<Self> {
        let b = Self::bernoulli(alpha)?;
        Self::new(b.tau * (n as f64).sqrt(), b.h)
    }

    /// `Y - Y'` for independent `Y, Y' ~ B(N, α)`.
    pub fn difference(n: u64, alpha: f64) -> Result<Self> {
        let b = Self::bernoulli(alpha)?;
        Self::new(b.tau * (2.0 * n as f64).sqrt(), b.h)
    }

    /// `τh`, the end of the window in `λ`.
    pub fn lambda_window(&self) -> Option<f64> {
        self.h.map(|h| self.tau * h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBound {
    pub one_sided: f64,
    pub two_sided: f64,
    pub domain_ok: bool,
}

/// `e^{-λ²/2}` and `2e^{-λ²/2}`; the bounds are claimed only when
/// `0 < λ < τh`.
pub fn subgaussian_tail_bound(lambda: f64, spec: &SubGaussianSpec) -> TailBound {
    let one = (-0.5 * lambda * lambda).exp();
    TailBound {
        one_sided: one,
        two_sided: 2.0 * one,
        domain_ok: lambda > 0.0 && spec.lambda_window().is_none_or(|w| lambda < w),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailComparison {
    pub n: u64,
    pub alpha: f64,
    pub lambda: f64,
    /// Deviation `λτ`.
    pub threshold: f64,
    pub exact: f64,
    pub bound: f64,
    pub domain_ok: bool,
    /// `exact <= bound` where the bound is claimed; vacuous elsewhere.
    pub pass: bool,
}

/// `P(|Y - Nα| > 2λ√(Nα(1-α))) <= 2e^{-λ²/2}`.
pub fn binomial_tail_comparison(n: u64, alpha: f64, lambda: f64) -> Result<TailComparison> {
    let spec = SubGaussianSpec::binomial(n, alpha)?;
    let b = subgaussian_tail_bound(lambda, &spec);
    let threshold = lambda * spec.tau;
    let exact = binomial_tail_exact(n, alpha, threshold)?;
    Ok(TailComparison {
        n,
        alpha,
        lambda,
        threshold,
        exact,
        bound: b.two_sided,
        domain_ok: b.domain_ok,
        pass: !b.domain_ok || exact <= b.two_sided,
    })
}

/// `P(|Y - Nα| > Nα/2) <= 2e^{-Nα/32}` for `α < 1/2`.
pub fn half_deviation_comparison(n: u64, alpha: f64) -> Result<TailComparison> {
    if alpha >= 0.5 {
        return Err(Error::Domain(format!("alpha = {alpha} must be below 1/2")));
    }
    let threshold = 0.5 * n as f64 * alpha;
    let exact = binomial_tail_exact(n, alpha, threshold)?;
    let bound = 2.0 * (-(n as f64) * alpha / 32.0).exp();
    Ok(TailComparison {
        n,
        alpha,
        lambda: 0.25 * (n as f64 * alpha).sqrt(),
        threshold,
        exact,
        bound,
        domain_ok: true,
        pass: exact <= bound,
    })
}

/// Distribution of a sum of `n` independent Bernoulli(α) by repeated
/// convolution (independent of the closed-form masses).
pub fn bernoulli_sum_pmf(n: usize, alpha: f64) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &p) in pmf.iter().enumerate() {
            next[k] += p * (1.0 - alpha);
            next[k + 1] += p * alpha;
        }
        pmf = next;
    }
    pmf
}

/// Exact tails of centered Bernoulli sums (by convolution) against the
/// composed sub-Gaussian bound, for each `λ` inside the composed window.
pub fn composition_check(n: usize, alpha: f64, lambdas: &[f64]) -> Result<Vec<TailComparison>> {
    let parts = vec![SubGaussianSpec::bernoulli(alpha)?; n];
    let spec = SubGaussianSpec::compose(&parts)?;
    let pmf = bernoulli_sum_pmf(n, alpha);
    let mean = n as f64 * alpha;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let b = subgaussian_tail_bound(lambda, &spec);
            let threshold = lambda * spec.tau;
            let mut acc = Compensated::default();
            for (k, &p) in pmf.iter().enumerate() {
                if (k as f64 - mean).abs() > threshold {
                    acc.add(p);
                }
            }
            let exact = acc.value();
            TailComparison {
                n: n as u64,
                alpha,
                lambda,
                threshold,
                exact,
                bound: b.two_sided,
                domain_ok: b.domain_ok,
                pass: !b.domain_ok || exact <= b.two_sided,
            }
        })
        .collect())
}

/// Window for the difference bound: `λ < √(Nα(1-α)/|1-2α|)`, unbounded at
/// `α = 1/2`.
pub fn difference_window(n: u64, alpha: f64) -> Option<f64> {
    let d = (1.0 - 2.0 * alpha).abs();
    (d > 0.0).then(|| (n as f64 * alpha * (1.0 - alpha) / d).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailMethod {
    Exact,
    MonteCarlo { trials: u64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifferenceReport {
    pub n: u64,
    pub alpha: f64,
    pub lambda: f64,
    /// `2λ√(2Nα(1-α))`
    pub threshold: f64,
    pub tail: f64,
    pub bound: f64,
    pub method: TailMethod,
    pub pass: bool,
}

/// `P(|Y - Y'| > 2λ√(2Nα(1-α))) < 2e^{-λ²/2}`: exact for
/// `N <= 2000`, Monte Carlo with `3σ` slack above.
pub fn difference_tail_check(n: u64, alpha: f64, lambda: f64, trials: u64, seed: u64) -> Result<DifferenceReport> {
    check_binomial(n, alpha)?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::arg(format!("lambda = {lambda} must be positive")));
    }
    if let Some(w) = difference_window(n, alpha) {
        if lambda >= w {
            return Err(Error::Domain(format!(
                "lambda = {lambda} is not below sqrt(N alpha (1 - alpha) / |1 - 2 alpha|) = {w}"
            )));
        }
    }
    if trials < MIN_TRIALS {
        return Err(Error::arg(format!("trials = {trials} is below {MIN_TRIALS}")));
    }
    let spec = SubGaussianSpec::difference(n, alpha)?;
    let threshold = lambda * spec.tau;
    let bound = subgaussian_tail_bound(lambda, &spec).two_sided;

    if n <= EXACT_DIFFERENCE_MAX {
        let pmf: Vec<f64> = (0..=n).map(|k| binomial_ln_pmf(n, alpha, k).exp()).collect();
        let mut acc = Compensated::default();
        let nn = n as i64;
        for d in -nn..=nn {
            if (d as f64).abs() <= threshold {
                continue;
            }
            let lo = d.max(0);
            let hi = nn.min(nn + d);
            for k in lo..=hi {
                acc.add(pmf[k as usize] * pmf[(k - d) as usize]);
            }
        }
        let tail = acc.value();
        return Ok(DifferenceReport {
            n,
            alpha,
            lambda,
            threshold,
            tail,
            bound,
            method: TailMethod::Exact,
            pass: tail < bound,
        });
    }

    let dist = Binomial::new(n, alpha).map_err(|e| Error::Domain(e.to_string()))?;
    const CHUNK: u64 = 1024;
    let hits: u64 = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Purpose::Tails, c);
            let end = ((c + 1) * CHUNK).min(trials);
            (c * CHUNK..end)
                .filter(|_| {
                    let z = dist.sample(&mut rng) as f64 - dist.sample(&mut rng) as f64;
                    z.abs() > threshold
                })
                .count() as u64
        })
        .sum();
    let tail = hits as f64 / trials as f64;
    let b = bound.min(1.0);
    let sigma = (b * (1.0 - b) / trials as f64).sqrt();
    Ok(DifferenceReport {
        n,
        alpha,
        lambda,
        threshold,
        tail,
        bound,
        method: TailMethod::MonteCarlo { trials, sigma },
        pass: tail <= bound + 3.0 * sigma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixReport {
    pub mgf: MgfReport,
    pub half_deviation: Vec<TailComparison>,
    pub binomial: Vec<TailComparison>,
    pub composition: Vec<TailComparison>,
    pub difference: Vec<DifferenceReport>,
    pub pass: bool,
}

const GRID_LAMBDAS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0];

/// `λ` values for a window: the fixed grid inside it, plus the edge minus
/// a small margin.
fn lambdas_within(window: Option<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = GRID_LAMBDAS
        .iter()
        .copied()
        .filter(|&l| window.is_none_or(|w| l < w))
        .collect();
    if let Some(w) = window {
        out.push(w * (1.0 - 1e-9));
    }
    out
}

/// The default appendix grid.
pub fn appendix_check(trials: u64, seed: u64) -> Result<AppendixReport> {
    let mgf = check_mgf_inequality(DEFAULT_ALPHA_STEPS, DEFAULT_U_STEPS);
    let alphas = [0.1, 0.3, 0.5];

    let mut half_deviation = Vec::new();
    for &(n, a) in &[(1024, 0.25), (1000, 0.1), (4096, 0.05), (200, 0.3)] {
        half_deviation.push(half_deviation_comparison(n, a)?);
    }

    let mut binomial = Vec::new();
    for &n in &[10u64, 100, 1024, 10_000] {
        for &a in &alphas {
            let w = SubGaussianSpec::binomial(n, a)?.lambda_window();
            for l in lambdas_within(w) {
                binomial.push(binomial_tail_comparison(n, a, l)?);
            }
        }
    }

    let mut composition = Vec::new();
    for &n in &[10usize, 50, 200] {
        for &a in &alphas {
            let w = SubGaussianSpec::binomial(n as u64, a)?.lambda_window();
            composition.extend(composition_check(n, a, &lambdas_within(w))?);
        }
    }

    let mut difference = Vec::new();
    for &n in &[100u64, 400, 2000] {
        for &a in &alphas {
            for l in lambdas_within(difference_window(n, a)) {
                difference.push(difference_tail_check(n, a, l, trials, seed)?);
            }
        }
    }

    let pass = mgf.pass
        && half_deviation.iter().all(|c| c.pass)
        && binomial.iter().all(|c| c.pass)
        && composition.iter().all(|c| c.pass)
        && difference.iter().all(|c| c.pass);
    Ok(AppendixReport {
        mgf,
        half_deviation,
        binomial,
        composition,
        difference,
        pass,
    })
}
