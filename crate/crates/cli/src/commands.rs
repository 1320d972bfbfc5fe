use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use sidonlab::construction::{
    build_matrix, embed_theorem1, half_klog2k_ceil, n_nu, theorem1_witness_indexed,
};
use sidonlab::group::LatticePoint;
use sidonlab::mesh::{
    mesh_count, reports_to_csv, sample_box_meshes, CoefficientDomain, DigitIndex, Mesh, MeshBound, MeshReport,
};
use sidonlab::qi::{verify_qi_exhaustive_capped, verify_qi_structural};
use sidonlab::selection::{
    conditional_dependence_exact, conditional_dependence_union_bound, estimate_tied_probability, lemma_search,
    lemma_window_stats, verify_certificate, FreenessRatio, SelectionConfig,
};
use sidonlab::spectral::{analyticity_witness, default_rho, restriction_norm_upper, sample_flat_lambda};
use sidonlab::tails::{appendix_check, TailComparison};
use sidonlab::theorem2::{build_theorem2_prefix, pisier_ratio, sample_theorem2_meshes, theorem2_mesh_checks};
use sidonlab::theorem3::{
    build_theorem3_prefix, independent_span_checks, sample_theorem3_meshes, theorem3_mesh_checks,
    well_spread_reports, ScheduleOverrides,
};

use crate::report::{Check, Outcome};
use crate::{
    AnalyticityArgs, AppendixArgs, BoundKind, Cli, Command, MeshReportArgs, RatioArg, SelectArgs, Theorem1Args,
    Theorem2Args, Theorem3Args, UsageError, VerifyQiArgs,
};

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::VerifyQi(a) => verify_qi(a),
        Command::Theorem1(a) => theorem1(a),
        Command::MeshReport(a) => mesh_report(a, seed),
        Command::Select(a) => select(a, seed),
        Command::Theorem2(a) => theorem2(a, seed),
        Command::Theorem3(a) => theorem3(a, seed),
        Command::AnalyticityDemo(a) => analyticity(a, seed),
        Command::AppendixCheck(a) => appendix(a, seed),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointIn {
    Coords(LatticePoint),
    Int(i64),
    Str(String),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))
        .map_err(Into::into)
}

fn read_points(path: &Path) -> Result<Vec<LatticePoint>> {
    let raw: Vec<PointIn> = read_json(path)?;
    raw.into_iter().map(point).collect()
}

fn verify_qi(a: &VerifyQiArgs) -> Result<Outcome> {
    let mut checks = Vec::new();
    let (points, structural) = match (&a.source.input, a.source.level) {
        (Some(path), _) => (read_points(path)?, None),
        (None, Some(nu)) => {
            let m = build_matrix(nu)?;
            let s = verify_qi_structural(&m)?;
            checks.push(Check::new("structural quasi-independence", s, true, s));
            (m.column_points(), Some(s))
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let mut data = json!({ "n": points.len(), "structural": structural });
    if structural.is_none() || points.len() <= a.max_size {
        let out = verify_qi_exhaustive_capped(&points, a.max_size)?;
        checks.push(Check::new("quasi-independent", out.qi, true, out.qi));
        if let Some(w) = &out.witness {
            let ok = w.validates(&points);
            checks.push(Check::new("witness sums to zero", ok, true, ok));
        }
        data["qi"] = json!(out.qi);
        data["witness"] = json!(out.witness.map(|w| w.eps));
    }
    Ok(Outcome { checks, data, csv: None })
}

fn theorem1(a: &Theorem1Args) -> Result<Outcome> {
    let mut rows = Vec::new();
    let (mut bad_dims, mut bad_structural, mut bad_exhaustive) = (0, 0, 0);
    for nu in 1..=a.nu_max {
        let m = build_matrix(nu)?;
        let dims_ok = m.rows() == 1 << nu && m.cols() as u64 == n_nu(nu);
        let structural = verify_qi_structural(&m)?;
        let exhaustive = if m.cols() <= sidonlab::qi::DEFAULT_QI_MAX {
            Some(verify_qi_exhaustive_capped(&m.column_points(), sidonlab::qi::DEFAULT_QI_MAX)?.qi)
        } else {
            None
        };
        bad_dims += !dims_ok as usize;
        bad_structural += !structural as usize;
        bad_exhaustive += (exhaustive == Some(false)) as usize;
        rows.push(json!({
            "nu": nu, "n_nu": n_nu(nu), "rows": m.rows(), "cols": m.cols(),
            "structural": structural, "exhaustive": exhaustive,
        }));
    }

    let c = embed_theorem1(a.nu_max)?;
    let index = DigitIndex::new(c.basis.system(), &c.lambda);
    let mut witnesses = Vec::new();
    let mut csv = String::from("k,nu,count,quarter_bound,half_bound\n");
    let (mut bad_count, mut bad_quarter, mut bad_half, mut halves) = (0, 0, 0, 0);
    for k in 2..1u64 << (a.nu_max + 1) {
        let w = theorem1_witness_indexed(k, &c, &index)?;
        let half = (k >= 4 && k.is_power_of_two()).then(|| half_klog2k_ceil(k));
        bad_count += (w.count as u64 != n_nu(w.nu)) as usize;
        bad_quarter += ((w.count as u64) < w.quarter_bound) as usize;
        if let Some(hb) = half {
            halves += 1;
            bad_half += ((w.count as u64) < hb) as usize;
        }
        csv.push_str(&format!(
            "{k},{},{},{},{}\n",
            w.nu,
            w.count,
            w.quarter_bound,
            half.map_or(String::new(), |h| h.to_string())
        ));
        witnesses.push(json!({
            "k": k, "nu": w.nu, "count": w.count, "quarter_bound": w.quarter_bound, "half_bound": half,
        }));
    }
    let levels = a.nu_max as usize;
    let nk = witnesses.len();
    Ok(Outcome {
        checks: vec![
            Check::tally("matrix dimensions 2^nu x 2^(nu-1)(nu+2)", bad_dims, levels),
            Check::tally("structural quasi-independence", bad_structural, levels),
            Check::tally("exhaustive quasi-independence (small levels)", bad_exhaustive, levels),
            Check::tally("witness count equals N_nu", bad_count, nk),
            Check::tally("count >= ceil(k log2 k / 4)", bad_quarter, nk),
            Check::tally("count >= ceil(k log2 k / 2) at powers of two", bad_half, halves),
        ],
        data: json!({
            "levels": rows,
            "witnesses": witnesses,
            "betas": c.basis.to_decimal_strings(),
        }),
        csv: Some(csv),
    })
}

#[derive(Deserialize)]
struct MeshIn {
    basis: Vec<PointIn>,
    h: Option<u32>,
    coefficients: Option<Vec<Vec<i64>>>,
}

fn point(p: PointIn) -> Result<LatticePoint> {
    Ok(match p {
        PointIn::Coords(c) => c,
        PointIn::Int(v) => LatticePoint::scalar(v),
        PointIn::Str(s) => LatticePoint::scalar(
            s.trim()
                .parse::<BigInt>()
                .map_err(|e| UsageError(format!("bad integer {s:?}: {e}")))?,
        ),
    })
}

fn mesh_report(a: &MeshReportArgs, seed: u64) -> Result<Outcome> {
    let construction = match &a.input {
        Some(_) => None,
        None => Some(embed_theorem1(a.nu_max)?),
    };
    let lambda = match (&a.input, &construction) {
        (Some(path), _) => read_points(path)?,
        (None, Some(c)) => c.lambda.clone(),
        _ => unreachable!(),
    };
    if lambda.is_empty() {
        return Err(UsageError("empty point set".into()).into());
    }
    let meshes: Vec<Mesh<LatticePoint>> = match &a.meshes {
        Some(path) => {
            let raw: Vec<MeshIn> = read_json(path)?;
            raw.into_iter()
                .map(|m| {
                    let basis = m.basis.into_iter().map(point).collect::<Result<Vec<_>>>()?;
                    let domain = match (m.h, m.coefficients) {
                        (Some(h), None) => CoefficientDomain::Box { h },
                        (None, Some(c)) => CoefficientDomain::Explicit(c),
                        _ => return Err(UsageError("each mesh needs exactly one of h, coefficients".into()).into()),
                    };
                    Ok(Mesh::new(basis, domain)?)
                })
                .collect::<Result<_>>()?
        }
        None => {
            let betas: Vec<LatticePoint> = construction
                .as_ref()
                .map(|c| (1..=c.basis.len()).map(|j| LatticePoint::scalar(c.basis.beta(j).clone())).collect())
                .unwrap_or_default();
            let dim = lambda.iter().map(|p| p.coords().len()).max().unwrap_or(1).max(1);
            sample_box_meshes(seed, a.count, a.k_max, a.h_max, |rng| pick(rng, &lambda, &betas, dim))?
        }
    };
    let bound = match a.bound {
        BoundKind::Sidon => MeshBound::Sidon { c: a.c },
        BoundKind::Kwk => MeshBound::KwK { w: a.w.clone() },
        BoundKind::Kwkh => MeshBound::KwKh { w: a.w.clone() },
        BoundKind::Quarter => MeshBound::QuarterKLog2K,
    };
    if matches!(a.bound, BoundKind::Kwk | BoundKind::Kwkh) {
        a.w.validate()?;
    }
    let index = construction.as_ref().map(|c| DigitIndex::new(c.basis.system(), &c.lambda));
    let mut reports: Vec<MeshReport> = Vec::with_capacity(meshes.len());
    let mut fast = 0;
    for m in &meshes {
        let count = match index.as_ref().and_then(|ix| ix.count(m)) {
            Some(n) => {
                fast += 1;
                n
            }
            None => mesh_count(&lambda, m, a.cap)?,
        };
        reports.push(MeshReport::new(m, count, &bound));
    }
    let bad = reports.iter().filter(|r| !r.pass).count();
    Ok(Outcome {
        checks: vec![Check::tally("mesh bound", bad, reports.len())],
        data: json!({
            "set_size": lambda.len(),
            "bound": bound,
            "digit_path_meshes": fast,
            "reports": reports,
        }),
        csv: Some(reports_to_csv(&reports)),
    })
}

/// A set element, a `β` (when there are any), or a small random vector.
fn pick(rng: &mut ChaCha8Rng, lambda: &[LatticePoint], betas: &[LatticePoint], dim: usize) -> LatticePoint {
    match rng.random_range(0..3) {
        0 => lambda[rng.random_range(0..lambda.len())].clone(),
        1 if !betas.is_empty() => betas[rng.random_range(0..betas.len())].clone(),
        _ => {
            let c: Vec<i64> = (0..dim).map(|_| rng.random_range(-3..=3)).collect();
            LatticePoint::from_i64s(&c)
        }
    }
}

fn select(a: &SelectArgs, seed: u64) -> Result<Outcome> {
    let cfg = SelectionConfig::new(a.p, a.nu, a.ell, seed, a.trials)?;
    let window = lemma_window_stats(&cfg)?;
    let mut checks = vec![Check::new(
        "P(ell nu <= |Lambda| <= 3 ell nu) >= 1 - 2exp(-ell nu/16), 3 sigma",
        window.frequency,
        window.bound - 3.0 * window.sigma,
        window.pass,
    )];
    let tied = if a.trials >= 100 {
        let t = estimate_tied_probability(&cfg)?;
        checks.push(Check::new("P(dependent) <= p^(-nu/2), 3 sigma", t.estimate, t.bound + 3.0 * t.sigma, t.pass));
        Some(t)
    } else {
        None
    };
    let mut table = Vec::new();
    let mut csv = String::from("k,exact,union_bound\n");
    let mut bad = 0;
    for k in 1..=a.nu.min(24) {
        let exact = conditional_dependence_exact(a.p, a.nu, k);
        let union = conditional_dependence_union_bound(a.p, a.nu, k);
        bad += (exact > union * (1.0 + 1e-9)) as usize;
        csv.push_str(&format!("{k},{exact:e},{union:e}\n"));
        table.push(json!({ "k": k, "exact": exact, "union_bound": union }));
    }
    checks.push(Check::tally("conditional dependence <= union bound", bad, table.len()));
    let certificate = if a.lemma {
        let ratio = match a.ratio {
            RatioArg::Exact => FreenessRatio::Exact,
            RatioArg::OneEighth => FreenessRatio::OneEighth,
        };
        let cert = lemma_search(&cfg, ratio, a.retries)?;
        let ok = verify_certificate(&cert)?;
        checks.push(Check::new("certificate re-verified", ok, true, ok));
        Some(cert)
    } else {
        None
    };
    Ok(Outcome {
        checks,
        data: json!({
            "alpha": cfg.alpha(),
            "beta": cfg.beta(),
            "sampling_mode": cfg.sampling_mode(),
            "window": window,
            "tied": tied,
            "conditional_dependence": table,
            "certificate": certificate,
        }),
        csv: Some(csv),
    })
}

fn theorem2(a: &Theorem2Args, seed: u64) -> Result<Outcome> {
    let c = build_theorem2_prefix(a.p, &a.w, a.ell_max, seed, a.nu_cap)?;
    let mut ratios = Vec::new();
    let mut bad_ratio = 0;
    let mut bad_cert = 0;
    for b in &c.blocks {
        let r = pisier_ratio(&c, b.ell)?;
        bad_ratio += (r.value < b.ell as f64) as usize;
        bad_cert += !verify_certificate(&b.certificate)? as usize;
        ratios.push(r);
    }
    let meshes = sample_theorem2_meshes(&c, seed, a.meshes, a.k_max, a.h_max)?;
    let mc = theorem2_mesh_checks(&c, &meshes)?;
    let reports: Vec<MeshReport> = mc.iter().map(|m| m.report.clone()).collect();
    let bad_mesh = mc.iter().filter(|m| !m.report.pass).count();
    let bad_rank = mc.iter().filter(|m| !(m.rank_additive && m.rank_bound_holds)).count();
    let blocks: Vec<Value> = c
        .blocks
        .iter()
        .map(|b| {
            json!({
                "ell": b.ell, "nu": b.nu, "nu_required": b.nu_required, "capped": b.capped,
                "condition_holds": b.condition_holds, "offset": b.offset, "size": b.certificate.lambda.len(),
                "certificate": b.certificate,
            })
        })
        .collect();
    let nb = c.blocks.len();
    Ok(Outcome {
        checks: vec![
            Check::tally("Pisier ratio >= ell", bad_ratio, nb),
            Check::tally("block certificates re-verified", bad_cert, nb),
            Check::tally("|Lambda cap M| <= k w(k)", bad_mesh, mc.len()),
            Check::tally("rank additivity and rank bound", bad_rank, mc.len()),
        ],
        data: json!({
            "p": c.p, "dim": c.dim, "w": c.w.to_string(),
            "blocks": blocks, "pisier_ratios": ratios, "meshes": mc,
        }),
        csv: Some(reports_to_csv(&reports)),
    })
}

fn theorem3(a: &Theorem3Args, seed: u64) -> Result<Outcome> {
    let overrides = ScheduleOverrides {
        p: a.p.clone(),
        nu: a.nu.clone(),
        ell: a.ell.clone(),
    };
    let s = build_theorem3_prefix(&a.w, a.j, &overrides, seed, (a.grid_h, a.grid_k))?;
    let bad_grid = s.grid.iter().filter(|g| !g.holds).count();
    let spread = well_spread_reports(&s, a.spread_cap)?;
    let bad_spread = spread.iter().filter(|r| !r.pass()).count();
    let spans = independent_span_checks(&s, &a.span_primes, a.span_max, a.span_trials, seed)?;
    let bad_span = spans.iter().filter(|c| !c.pass).count();
    let meshes = sample_theorem3_meshes(&s, seed, a.meshes, a.k_max, a.h_max)?;
    let mc = theorem3_mesh_checks(&s, &meshes)?;
    let bad_mesh = mc.iter().filter(|m| !m.report.pass).count();
    let bad_parts = mc.iter().filter(|m| !(m.pass_low && m.pass_independent)).count();
    let reports: Vec<MeshReport> = mc.iter().map(|m| m.report.clone()).collect();
    Ok(Outcome {
        checks: vec![
            Check::tally("schedule conditions on the (h, k) grid", bad_grid, s.grid.len()),
            Check::tally("blocks well spread", bad_spread, spread.len()),
            Check::tally("|V_p(A')| = p^|A'|", bad_span, spans.len()),
            Check::tally("|Lambda cap M| <= k w(kh)", bad_mesh, mc.len()),
            Check::tally("partial-sum bounds", bad_parts, mc.len()),
        ],
        data: json!({
            "system": s,
            "well_spread": spread,
            "spans": spans,
            "meshes": mc,
        }),
        csv: Some(reports_to_csv(&reports)),
    })
}

fn analyticity(a: &AnalyticityArgs, seed: u64) -> Result<Outcome> {
    let rho = a.rho.unwrap_or_else(|| default_rho(a.ell));
    if a.cross_check && a.nu > 8 {
        return Err(UsageError("--cross-check needs nu <= 8".into()).into());
    }
    if a.sweep == 0 {
        return Err(UsageError("--sweep must be positive".into()).into());
    }
    let mut runs = Vec::new();
    let (mut bad_target, mut bad_chain, mut bad_cross) = (0, 0, 0);
    let mut csv = None;
    for s in seed..seed + a.sweep {
        let sample = sample_flat_lambda(a.nu, a.ell, s, a.retries)?;
        let r = analyticity_witness(a.nu, a.ell, &sample.lambda, rho, a.masks.clone())?;
        bad_target += !r.pass as usize;
        bad_chain += (r.flat && !r.chain_pass) as usize;
        let upper = if a.cross_check {
            let u = restriction_norm_upper(a.nu, &sample.lambda, &r.masks, 500)?;
            bad_cross += (r.lower_bound > u + 1e-9) as usize;
            Some(u)
        } else {
            None
        };
        if csv.is_none() {
            let mut t = String::from("mask,sigma_hat\n");
            for (m, v) in sample.spectrum.top_nontrivial(a.top) {
                t.push_str(&format!("{m},{v}\n"));
            }
            csv = Some(t);
        }
        runs.push(json!({ "seed": s, "sample": sample, "witness": r, "restriction_upper": upper }));
    }
    let n = runs.len();
    let mut checks = vec![
        Check::tally("duality lower bound >= 2^(rho/2) / 2", bad_target, n),
        Check::tally("duality lower bound >= chain value", bad_chain, n),
    ];
    if a.cross_check {
        checks.push(Check::tally("lower bound <= descent upper bound", bad_cross, n));
    }
    Ok(Outcome {
        checks,
        data: json!({ "rho": rho, "runs": runs }),
        csv,
    })
}

fn appendix(a: &AppendixArgs, seed: u64) -> Result<Outcome> {
    let r = appendix_check(a.trials, seed)?;
    let fails = |v: &[TailComparison]| v.iter().filter(|c| !c.pass).count();
    let mut csv = String::from("family,n,alpha,lambda,threshold,exact,bound,domain_ok,pass\n");
    for (family, rows) in [
        ("half_deviation", &r.half_deviation),
        ("binomial", &r.binomial),
        ("composition", &r.composition),
    ] {
        for c in rows.iter() {
            csv.push_str(&format!(
                "{family},{},{},{},{},{:e},{:e},{},{}\n",
                c.n, c.alpha, c.lambda, c.threshold, c.exact, c.bound, c.domain_ok, c.pass
            ));
        }
    }
    for d in &r.difference {
        csv.push_str(&format!(
            "difference,{},{},{},{},{:e},{:e},true,{}\n",
            d.n, d.alpha, d.lambda, d.threshold, d.tail, d.bound, d.pass
        ));
    }
    let checks = vec![
        Check::new("MGF inequality, max violation", r.mgf.max_violation, 1e-12, r.mgf.max_violation <= 1e-12),
        Check::new("concavity quadratic <= 0", r.mgf.max_concavity, 1e-12, r.mgf.max_concavity <= 1e-12),
        Check::tally("P(|Y-N alpha| > N alpha/2) <= 2exp(-N alpha/32)", fails(&r.half_deviation), r.half_deviation.len()),
        Check::tally("binomial tails <= 2exp(-lambda^2/2)", fails(&r.binomial), r.binomial.len()),
        Check::tally("composed Bernoulli tails <= 2exp(-lambda^2/2)", fails(&r.composition), r.composition.len()),
        Check::tally(
            "difference tails < 2exp(-lambda^2/2)",
            r.difference.iter().filter(|d| !d.pass).count(),
            r.difference.len(),
        ),
    ];
    Ok(Outcome {
        checks,
        data: serde_json::to_value(&r)?,
        csv: Some(csv),
    })
}
