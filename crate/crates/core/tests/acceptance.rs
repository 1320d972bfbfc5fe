//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the summary lines always print.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sidonlab::construction::{
    build_matrix, embed_theorem1, half_klog2k_ceil, n_nu, quarter_klog2k_ceil, theorem1_witness_indexed,
};
use sidonlab::group::{fp_rank, signed_combination, FpVector, LatticePoint, SignVector};
use sidonlab::growth::GrowthFunction;
use sidonlab::mesh::{mesh_count, CoefficientDomain, DigitIndex, Mesh, DEFAULT_ENUMERATION_CAP};
use sidonlab::qi::{verify_qi_exhaustive, verify_qi_structural};
use sidonlab::selection::{lemma_search, lemma_window_stats, verify_certificate, FreenessRatio, SelectionConfig};
use sidonlab::spectral::{analyticity_witness, fwht, sample_flat_lambda};
use sidonlab::tails::{
    appendix_check, binomial_tail_exact, check_mgf_inequality, DEFAULT_ALPHA_STEPS, DEFAULT_U_STEPS, MIN_TRIALS,
};
use sidonlab::theorem2::{build_theorem2_prefix, pisier_ratio, sample_theorem2_meshes, theorem2_mesh_checks};
use sidonlab::theorem3::{
    build_theorem3_prefix, independent_span_checks, sample_theorem3_meshes, theorem3_mesh_checks,
    well_spread_reports, ScheduleOverrides,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let expected = [3u64, 8, 20, 48, 112, 256, 576, 1280];
    for nu in 1..=8u32 {
        let m = build_matrix(nu).map_err(|e| e.to_string())?;
        ensure(n_nu(nu) == expected[nu as usize - 1], || format!("N_{nu} = {}", n_nu(nu)))?;
        ensure(m.rows() == 1 << nu && m.cols() as u64 == (1u64 << (nu - 1)) * (nu as u64 + 2), || {
            format!("level {nu} is {}x{}", m.rows(), m.cols())
        })?;
        ensure(verify_qi_structural(&m).map_err(|e| e.to_string())?, || format!("level {nu} structural"))?;
    }
    for nu in 1..=3 {
        let out = verify_qi_exhaustive(&build_matrix(nu).unwrap().column_points()).map_err(|e| e.to_string())?;
        ensure(out.qi, || format!("level {nu} exhaustive: {:?}", out.witness))?;
    }
    Ok("levels 1..8 structural, 1..3 exhaustive; N = 3,8,20,48,112,256,576,1280".into())
}

fn criterion_2() -> Outcome {
    let c = embed_theorem1(7).map_err(|e| e.to_string())?;
    let index = DigitIndex::new(c.basis.system(), &c.lambda);
    for k in 2..256u64 {
        let w = theorem1_witness_indexed(k, &c, &index).map_err(|e| e.to_string())?;
        ensure(w.mesh.k() as u64 == k && w.mesh.height() == 1, || format!("k = {k}: wrong mesh shape"))?;
        ensure(w.count as u64 == n_nu(w.nu), || format!("k = {k}: count {} != N_{}", w.count, w.nu))?;
        ensure(w.count as u64 >= quarter_klog2k_ceil(k), || format!("k = {k}: below quarter bound"))?;
        if k >= 4 && k.is_power_of_two() && k <= 128 {
            ensure(w.count as u64 >= half_klog2k_ceil(k), || format!("k = {k}: below half bound"))?;
        }
    }
    Ok("k in [2,256): count = N_nu >= ceil(k log2 k / 4); half bound at k = 4..128".into())
}

fn criterion_3() -> Outcome {
    let cfg = SelectionConfig::new(2, 16, 4, 0, 1000).map_err(|e| e.to_string())?;
    let stats = lemma_window_stats(&cfg).map_err(|e| e.to_string())?;
    ensure(stats.pass, || format!("window frequency {} < {} - 3 sigma", stats.frequency, stats.bound))?;
    let mut attempts = Vec::new();
    for (p, nu, ell) in [(2u64, 16u32, 1u64), (2, 16, 4), (101, 16, 1)] {
        let cfg = SelectionConfig::new(p, nu, ell, 0, 1).map_err(|e| e.to_string())?;
        let cert = lemma_search(&cfg, FreenessRatio::Exact, 10_000).map_err(|e| e.to_string())?;
        ensure(verify_certificate(&cert).map_err(|e| e.to_string())?, || format!("({p},{nu},{ell}) reverify"))?;
        attempts.push(format!("({p},{nu},{ell}):{}", cert.attempts));
    }
    Ok(format!(
        "window frequency {:.3} >= {:.3} - 3 sigma; certificates {}",
        stats.frequency,
        stats.bound,
        attempts.join(" ")
    ))
}

fn criterion_4() -> Outcome {
    let w = GrowthFunction::DoubleLog { c: 1.0 };
    let c = build_theorem2_prefix(3, &w, 6, 0, 24).map_err(|e| e.to_string())?;
    for ell in 2..=6 {
        let r = pisier_ratio(&c, ell).map_err(|e| e.to_string())?;
        ensure(r.value >= ell as f64, || format!("ratio {} < {ell}", r.value))?;
    }
    let meshes = sample_theorem2_meshes(&c, 0, 500, 6, 2).map_err(|e| e.to_string())?;
    let checks = theorem2_mesh_checks(&c, &meshes).map_err(|e| e.to_string())?;
    let bad = checks.iter().filter(|m| !m.report.pass).count();
    ensure(bad == 0, || format!("{bad} of 500 meshes exceed k w(k)"))?;
    let capped = c.blocks.iter().filter(|b| b.capped).count();
    Ok(format!(
        "Pisier ratios >= ell for ell = 2..6 ({capped} blocks at nu cap 24); 500 meshes within k w(k)"
    ))
}

fn criterion_5() -> Outcome {
    let w = GrowthFunction::DoubleLog { c: 3000.0 };
    let s = build_theorem3_prefix(&w, 4, &ScheduleOverrides::default(), 0, (3, 5)).map_err(|e| e.to_string())?;
    ensure(s.grid.iter().all(|g| g.holds), || "schedule grid".into())?;
    let spread = well_spread_reports(&s, DEFAULT_ENUMERATION_CAP).map_err(|e| e.to_string())?;
    ensure(spread.iter().all(|r| r.pass()), || format!("well spread: {spread:?}"))?;
    let spans = independent_span_checks(&s, &[3, 5], 4, 25, 0).map_err(|e| e.to_string())?;
    ensure(spans.iter().all(|c| c.pass), || "independent span".into())?;
    let meshes = sample_theorem3_meshes(&s, 0, 500, 5, 3).map_err(|e| e.to_string())?;
    let checks = theorem3_mesh_checks(&s, &meshes).map_err(|e| e.to_string())?;
    let bad = checks.iter().filter(|m| !m.pass()).count();
    ensure(bad == 0, || format!("{bad} of 500 meshes fail"))?;
    Ok(format!(
        "J = 4 (double-log c = 3000): {} grid conditions, {} well-spread blocks, {} span checks, 500 meshes",
        s.grid.len(),
        spread.len(),
        spans.len()
    ))
}

fn criterion_6() -> Outcome {
    let (nu, ell, rho) = (22u32, 40_000u64, 3u32);
    let mut x: Vec<f64> = (0..1u64 << nu).map(|i| (i % 7) as f64).collect();
    let t = Instant::now();
    fwht(&mut x).map_err(|e| e.to_string())?;
    let ft = t.elapsed();
    ensure(ft < Duration::from_secs(5), || format!("transform took {ft:?}"))?;
    let target = 0.5 * 2f64.powf(1.5);
    let chain = 1.0 / (2f64.powf(-1.5) + 0.1 * 2f64.powf(1.5));
    let mut lows = Vec::new();
    for seed in 0..5 {
        let s = sample_flat_lambda(nu, ell, seed, 20).map_err(|e| e.to_string())?;
        let r = analyticity_witness(nu, ell, &s.lambda, rho, None).map_err(|e| e.to_string())?;
        ensure(r.lower_bound >= target, || format!("seed {seed}: {} < {target}", r.lower_bound))?;
        ensure(r.lower_bound >= chain - 1e-9, || format!("seed {seed}: {} < chain {chain}", r.lower_bound))?;
        lows.push(format!("{:.3}", r.lower_bound));
    }
    Ok(format!("transform {ft:.2?}; lower bounds [{}] >= {chain:.4}", lows.join(", ")))
}

fn criterion_7() -> Outcome {
    let mgf = check_mgf_inequality(DEFAULT_ALPHA_STEPS, DEFAULT_U_STEPS);
    ensure(mgf.max_violation <= 1e-12, || format!("mgf violation {}", mgf.max_violation))?;
    let t = binomial_tail_exact(1024, 0.25, 128.0).map_err(|e| e.to_string())?;
    ensure(t <= 2.0 * (-8.0f64).exp(), || format!("tail {t}"))?;
    let r = appendix_check(MIN_TRIALS, 0).map_err(|e| e.to_string())?;
    ensure(r.difference.iter().all(|d| d.pass), || "difference tail".into())?;
    ensure(r.pass, || "appendix grid".into())?;
    Ok(format!(
        "mgf max violation {:.2e}; tail(1024, 1/4, 128) = {t:.3e}; {} difference checks exact",
        mgf.max_violation,
        r.difference.len()
    ))
}

fn naive_walsh(x: &[i64]) -> Vec<i64> {
    (0..x.len())
        .map(|y| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| if (i & y).count_ones() % 2 == 0 { v } else { -v })
                .sum()
        })
        .collect()
}

fn naive_qi(x: &[LatticePoint]) -> bool {
    let n = x.len();
    (0..3u64.pow(n as u32)).all(|mut idx| {
        let signs: Vec<i8> = (0..n)
            .map(|_| {
                let d = (idx % 3) as i8;
                idx /= 3;
                d - 1
            })
            .collect();
        let eps = SignVector::new(signs).unwrap();
        eps.is_trivial() || !signed_combination(x, &eps).unwrap().is_origin()
    })
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for nu in 0..=4u32 {
        for _ in 0..50 {
            let x: Vec<i64> = (0..1 << nu).map(|_| rng.random_range(-20..=20)).collect();
            let mut f = x.clone();
            fwht(&mut f).unwrap();
            ensure(f == naive_walsh(&x), || format!("fwht nu = {nu}"))?;
        }
    }
    for n in 0..=12usize {
        for _ in 0..4 {
            let x: Vec<LatticePoint> = (0..n)
                .map(|_| LatticePoint::from_i64s(&[rng.random_range(-6..=6), rng.random_range(-6..=6)]))
                .collect();
            ensure(verify_qi_exhaustive(&x).unwrap().qi == naive_qi(&x), || format!("mitm n = {n}"))?;
        }
    }
    let c = embed_theorem1(4).unwrap();
    let index = DigitIndex::new(c.basis.system(), &c.lambda);
    let mut compared = 0;
    for _ in 0..200 {
        let k = rng.random_range(1..=5);
        let h = rng.random_range(1..=2u32);
        let basis: Vec<LatticePoint> = (0..k)
            .map(|_| LatticePoint::scalar(c.basis.beta(rng.random_range(1..=c.basis.len())).clone()))
            .collect();
        let mesh = Mesh::new(basis, CoefficientDomain::Box { h }).unwrap();
        if let Some(fast) = index.count(&mesh) {
            let slow = mesh_count(&c.lambda, &mesh, DEFAULT_ENUMERATION_CAP).unwrap();
            ensure(fast == slow, || format!("mesh fast {fast} vs enumeration {slow}"))?;
            compared += 1;
        }
    }
    ensure(compared >= 100, || format!("only {compared} meshes took the fast path"))?;
    for p in [2u64, 3, 5, 7] {
        for nu in 1..=4usize {
            for _ in 0..20 {
                let m = rng.random_range(0..=5usize);
                let vs: Vec<FpVector> = (0..m)
                    .map(|_| FpVector::new(p, (0..nu).map(|_| rng.random_range(0..p)).collect()).unwrap())
                    .collect();
                let mut span: HashSet<Vec<u64>> = HashSet::new();
                for idx in 0..p.pow(m as u32) {
                    let mut acc = vec![0u64; nu];
                    let mut r = idx;
                    for v in &vs {
                        let c = r % p;
                        r /= p;
                        for (a, b) in acc.iter_mut().zip(v.coords()) {
                            *a = (*a + c * b) % p;
                        }
                    }
                    span.insert(acc);
                }
                let rank = fp_rank(&vs).unwrap();
                ensure(span.len() as u64 == p.pow(rank as u32), || format!("rank p = {p} nu = {nu}"))?;
            }
        }
    }
    Ok(format!("fwht, mitm, {compared} fast-path meshes, fp_rank all agree"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 construction", criterion_1),
        ("2 theorem 1 witnesses", criterion_2),
        ("3 random selection", criterion_3),
        ("4 theorem 2 prefix", criterion_4),
        ("5 theorem 3 prefix", criterion_5),
        ("6 analyticity witness", criterion_6),
        ("7 appendix bounds", criterion_7),
        ("8 oracle equivalences", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
