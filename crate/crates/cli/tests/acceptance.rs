// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! `ACCEPTANCE_ONLY=4,8` restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use finsler_cli::{corpus, output, run, CorpusConfig, RunConfig, Status};
use finsler_core::analysis::{
    dirichlet_gradient_bound_check, gradient_comparison_check, identity_sweep, inequality_sweep,
    neumann_gradient_bound_check, sweep_families,
};
use finsler_core::domain::{diameter, triangulate, ConvexPolygon, TriMesh};
use finsler_core::dual::numerical_dual;
use finsler_core::eigen::{
    refine_and_solve, BoundaryCondition, EigenProblem, EigenResult, SolverOptions,
};
use finsler_core::model1d::{solve_model, OneDModel};
use finsler_core::{Norm, NormSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Results reused by later criteria.
#[derive(Default)]
struct Shared {
    square: Option<[(TriMesh, Vec<EigenResult>); 2]>,
    corpus_csv: Option<Vec<u8>>,
}

fn parallelism() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn lp(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn c1(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_bi) = (0.0f64, 0.0f64);
    for p in [1.5, 2.0, 3.0, 4.0] {
        let norm = Norm::new(&NormSpec::pnorm(p)).map_err(err)?;
        let dual = Norm::new(&norm.dual_spec().ok_or("p-norm without a dual")?).map_err(err)?;
        let q = p / (p - 1.0);
        for i in 0..1000 {
            let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
            let x = [
                scale * rng.gen_range(-1.0..1.0),
                scale * rng.gen_range(-1.0..1.0),
            ];
            let exact = lp(&x, q);
            let d = numerical_dual(&norm, &x, i).value;
            worst = worst.max((d - exact).abs() / exact);
            let bi = numerical_dual(&dual, &x, i).value;
            worst_bi = worst_bi.max((bi - lp(&x, p)).abs() / lp(&x, p));
        }
    }
    let detail = format!("max rel error F0 {worst:.2e}, (F0)0 {worst_bi:.2e} over 4x1000 vectors");
    if worst <= 1e-6 && worst_bi <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sweep(kind: &str, count: usize) -> Outcome {
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for spec in sweep_families() {
        let reports = match kind {
            "identity" => identity_sweep(&spec, count, 2024).map(|r| r.to_vec()),
            _ => inequality_sweep(&spec, count, 2024).map(|r| r.to_vec()),
        }
        .map_err(|e| format!("{}: {e}", spec.label()))?;
        for r in reports {
            lines.push(r.worst_violation / r.threshold);
            if !r.pass {
                failed.push(format!(
                    "{} on {} worst {:.3e} > {:.1e}",
                    r.name,
                    spec.label(),
                    r.worst_violation,
                    r.threshold
                ));
            }
        }
    }
    let worst = lines.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if failed.is_empty() {
        Ok(format!(
            "{} families x {count} samples, worst violation/threshold {worst:.3e}",
            sweep_families().len()
        ))
    } else {
        Err(failed.join("; "))
    }
}

fn c2(_: &mut Shared) -> Outcome {
    sweep("identity", 100)
}

fn c3(_: &mut Shared) -> Outcome {
    sweep("inequality", 200)
}

fn solve_chain(
    poly: &ConvexPolygon,
    spec: &NormSpec,
    bc: BoundaryCondition,
    levels: &[usize],
) -> Result<Vec<EigenResult>, String> {
    let problem = EigenProblem {
        mesh: triangulate(poly, levels[0]).map_err(err)?,
        spec: spec.clone(),
        bc,
        solver: SolverOptions::default(),
    };
    refine_and_solve(&problem, levels).map_err(err)
}

/// Unit square level 3 to 6 chains, Neumann then Dirichlet, with the level 6 mesh.
fn square_solves(shared: &mut Shared) -> Result<&[(TriMesh, Vec<EigenResult>); 2], String> {
    if shared.square.is_none() {
        let poly = ConvexPolygon::unit_square();
        let mesh = triangulate(&poly, 6).map_err(err)?;
        let n = solve_chain(
            &poly,
            &NormSpec::Euclidean,
            BoundaryCondition::Neumann,
            &[3, 4, 5, 6],
        )?;
        let d = solve_chain(
            &poly,
            &NormSpec::Euclidean,
            BoundaryCondition::Dirichlet,
            &[3, 4, 5, 6],
        )?;
        shared.square = Some([(mesh.clone(), n), (mesh, d)]);
    }
    Ok(shared.square.as_ref().expect("just filled"))
}

fn c4(shared: &mut Shared) -> Outcome {
    let [(_, neumann), (_, dirichlet)] = square_solves(shared)?;
    let mut detail = Vec::new();
    let mut ok = true;
    for (chain, base, name) in [
        (neumann, PI * PI, "neumann"),
        (dirichlet, 2.0 * PI * PI, "dirichlet"),
    ] {
        let lambdas: Vec<f64> = chain.iter().map(|r| r.lambda).collect();
        let last = *lambdas.last().unwrap();
        let monotone = lambdas.windows(2).all(|w| w[1] <= w[0]);
        let in_range = (base..=1.01 * base).contains(&last);
        ok &= monotone && in_range && chain.iter().all(|r| r.converged);
        detail.push(format!(
            "{name} L3..6 = {} (L6/{}={:.6}, monotone {monotone})",
            lambdas
                .iter()
                .map(|l| format!("{l:.6}"))
                .collect::<Vec<_>>()
                .join(" "),
            if name == "neumann" { "pi^2" } else { "2pi^2" },
            last / base
        ));
    }
    if ok {
        Ok(detail.join("; "))
    } else {
        Err(detail.join("; "))
    }
}

fn corpus_config(bc: &str) -> CorpusConfig {
    let text = format!(
        r#"{{"generate": {{"count": 20, "seed": 1000, "max_vertices": 8,
            "norms": [{{"family": "euclidean"}}, {{"family": "pnorm", "p": 1.5}}, {{"family": "pnorm", "p": 3}},
                      {{"family": "pnorm", "p": 4}}, {{"family": "quadratic", "A": [[2, 0.5], [0.5, 1]]}}],
            "solver": {{"bc": "{bc}", "levels": [3, 4, 5], "restarts": 2}},
            "checks": [{{"name": "poincare_bound"}}]}}}}"#
    );
    serde_json::from_str(&text).expect("corpus config parses")
}

/// Runs the corpus and checks every row: status, finest level and ratio.
/// The summary CSV comes back whatever the verdict.
fn run_corpus(bc: &str) -> Result<(Vec<u8>, Outcome), String> {
    let configs = corpus_config(bc).expand();
    let out = corpus(&configs, parallelism()).map_err(err)?;
    let mut bad = Vec::new();
    let mut min_ratio = f64::INFINITY;
    let mut unconverged = 0;
    for row in &out.rows {
        let ratio = row.ratio.unwrap_or(f64::NAN);
        min_ratio = min_ratio.min(ratio);
        unconverged += usize::from(row.converged != Some(true));
        if row.status != Status::Pass || row.level != Some(5) || !(ratio >= 1.0 - 1e-9) {
            bad.push(format!("{} ({:?}, ratio {ratio})", row.id, row.status));
        }
    }
    if out.rows.len() != 100 {
        bad.push(format!("{} rows instead of 100", out.rows.len()));
    }
    let detail = format!(
        "{} runs, min ratio {min_ratio:.6}, {unconverged} not converged",
        out.rows.len()
    );
    let verdict = if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", bad.join(", ")))
    };
    Ok((output::summary_csv(&out.rows), verdict))
}

fn c5(shared: &mut Shared) -> Outcome {
    let (csv, verdict) = run_corpus("neumann")?;
    shared.corpus_csv = Some(csv);
    verdict
}

fn c6(_: &mut Shared) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    let mut previous = f64::INFINITY;
    for h in [0.5, 0.2, 0.1, 0.05] {
        let poly = ConvexPolygon::rectangle(1.0, h);
        let chain = solve_chain(
            &poly,
            &NormSpec::Euclidean,
            BoundaryCondition::Neumann,
            &[3, 4, 5, 6, 7, 8],
        )?;
        let d = diameter(&poly, &NormSpec::Euclidean).map_err(err)?;
        let ratio = |r: &EigenResult| r.lambda * d * d / (PI * PI);
        let n = chain.len();
        let (coarse, fine) = (ratio(&chain[n - 2]), ratio(&chain[n - 1]));
        let target = 1.0 + h * h;
        // the remaining discretization error must not exceed the change
        // over the last refinement; the quotient is also an upper bound
        let tol = (coarse - fine).abs();
        let within = (fine - target).abs() <= tol && fine >= target * (1.0 - 1e-9);
        let decreasing = fine < previous;
        ok &= within && decreasing && chain.iter().all(|r| r.converged);
        previous = fine;
        detail.push(format!("h={h}: {fine:.6} vs {target} (tol {tol:.1e})"));
    }
    if ok {
        Ok(detail.join(", "))
    } else {
        Err(detail.join(", "))
    }
}

/// First zero of `J0` from its power series, by bisection on [2, 3].
fn j01() -> f64 {
    let j0 = |x: f64| {
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..60 {
            term *= -(x * x / 4.0) / (k * k) as f64;
            sum += term;
        }
        sum
    };
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if j0(a) * j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn c7(_: &mut Shared) -> Outcome {
    let (_, verdict) = run_corpus("dirichlet")?;
    let disk: RunConfig = serde_json::from_str(
        r#"{"norm": {"family": "euclidean"}, "polygon": {"regular": {"sides": 64, "radius": 1}},
            "solver": {"bc": "dirichlet", "levels": [3, 4, 5]}, "checks": [{"name": "poincare_bound"}]}"#,
    )
    .map_err(err)?;
    let report = run(&disk).report;
    let ratio = report
        .ratio()
        .ok_or_else(|| format!("64-gon run failed: {:?}", report.error))?;
    let target = 4.0 * j01().powi(2) / (PI * PI);
    let rel = (ratio / target - 1.0).abs();
    let disk = format!(
        "64-gon ratio {ratio:.5} vs {target:.5} ({:.2}%)",
        100.0 * rel
    );
    let disk_ok = rel <= 0.02 && report.status == Status::Pass;
    match verdict {
        Ok(d) if disk_ok => Ok(format!("{d}; {disk}")),
        Ok(d) | Err(d) => Err(format!("{d}; {disk}")),
    }
}

fn c8(_: &mut Shared) -> Outcome {
    let solve = |a: f64| solve_model(&OneDModel::radial(2, 1.0, a)).map_err(err);
    let zero = solve(0.0)?;
    let mut failed = Vec::new();
    if (zero.b - 3.831706).abs() > 1e-6 {
        failed.push(format!("b(0) = {:.9}", zero.b));
    }
    if (zero.m - 0.402759).abs() > 1e-6 {
        failed.push(format!("m(0) = {:.9}", zero.m));
    }
    for a in [0.0, 0.1, 1.0, 10.0, 100.0] {
        let d = solve(a)?.delta;
        if d <= PI {
            failed.push(format!("delta({a}) = {d} <= pi"));
        }
    }
    let d100 = solve(100.0)?.delta / PI - 1.0;
    if d100 >= 0.01 {
        failed.push(format!("delta(100)/pi - 1 = {d100:.3e}"));
    }
    let m1000 = solve(1000.0)?.m;
    if m1000 <= 0.999 {
        failed.push(format!("m(1000) = {m1000:.6} <= 0.999"));
    }
    let detail = format!(
        "b(0) = {:.9}, m(0) = {:.9}, delta(100)/pi - 1 = {d100:.3e}, m(1000) = {m1000:.6}",
        zero.b, zero.m
    );
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", failed.join(", ")))
    }
}

fn c9(_: &mut Shared) -> Outcome {
    let cases = [
        ("square", ConvexPolygon::unit_square(), NormSpec::Euclidean),
        ("square", ConvexPolygon::unit_square(), NormSpec::pnorm(4.0)),
        (
            "rect 1x0.1",
            ConvexPolygon::rectangle(1.0, 0.1),
            NormSpec::Euclidean,
        ),
        (
            "rect 1x0.1",
            ConvexPolygon::rectangle(1.0, 0.1),
            NormSpec::pnorm(4.0),
        ),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, poly, spec) in cases {
        let chain = solve_chain(&poly, &spec, BoundaryCondition::Neumann, &[3, 4, 5, 6])?;
        let mut v = Vec::new();
        for (level, eig) in [(5, &chain[2]), (6, &chain[3])] {
            let mesh = triangulate(&poly, level).map_err(err)?;
            let c = gradient_comparison_check(&mesh, &spec, eig).map_err(err)?;
            ok &= !c.report.metadata.contains_key("failure");
            v.push(c.report.worst_violation);
        }
        // a negative worst violation means the bound holds everywhere
        let decreasing = if v[0] > 0.0 { v[1] < v[0] } else { v[1] <= 0.0 };
        ok &= v[1] <= 0.05 && decreasing;
        detail.push(format!(
            "{name} {}: {:+.3e} -> {:+.3e}",
            spec.label(),
            v[0],
            v[1]
        ));
    }
    if ok {
        Ok(detail.join(", "))
    } else {
        Err(detail.join(", "))
    }
}

fn c10(shared: &mut Shared) -> Outcome {
    let [(mn, n), (md, d)] = square_solves(shared)?;
    let (en, ed) = (
        n.last().expect("four levels"),
        d.last().expect("four levels"),
    );
    let spec = NormSpec::Euclidean;
    let mut reports = vec![neumann_gradient_bound_check(mn, &spec, en).map_err(err)?];
    for alpha in [0.01, 0.1, 1.0] {
        reports.push(dirichlet_gradient_bound_check(md, &spec, ed, alpha).map_err(err)?);
    }
    let detail: Vec<String> = reports
        .iter()
        .map(|r| {
            let alpha = r
                .metadata
                .get("alpha")
                .map(|a| format!("(alpha {a})"))
                .unwrap_or_default();
            format!(
                "{}{alpha} {:+.3e}/lambda",
                r.name,
                r.worst_violation / r.metadata["lambda"].parse::<f64>().unwrap_or(f64::NAN)
            )
        })
        .collect();
    if reports.iter().all(|r| r.pass) {
        Ok(format!("unit square L6: {}", detail.join(", ")))
    } else {
        Err(detail.join(", "))
    }
}

fn c11(shared: &mut Shared) -> Outcome {
    let first = match shared.corpus_csv.take() {
        Some(csv) => csv,
        None => run_corpus("neumann")?.0,
    };
    let second = run_corpus("neumann")?.0;
    if first == second {
        Ok(format!("summary CSVs identical ({} bytes)", first.len()))
    } else {
        let line = first
            .split(|&b| b == b'\n')
            .zip(second.split(|&b| b == b'\n'))
            .position(|(a, b)| a != b);
        Err(format!("summary CSVs differ at line {line:?}"))
    }
}

type Criterion = (u8, &'static str, u64, fn(&mut Shared) -> Outcome);

const CRITERIA: [Criterion; 11] = [
    (1, "duality suite", 5, c1),
    (2, "identity suite", 10, c2),
    (3, "inequality suite", 10, c3),
    (4, "eigensolver calibration", 300, c4),
    (5, "neumann diameter bound corpus", 7200, c5),
    (6, "rectangle tightness", 1200, c6),
    (7, "dirichlet inradius bound corpus", 7200, c7),
    (8, "1-D model", 5, c8),
    (9, "gradient comparison", 1800, c9),
    (10, "gradient bounds", 600, c10),
    (11, "reproducibility", 7200, c11),
];

fn main() -> ExitCode {
    let only: Option<Vec<u8>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut shared = Shared::default();
    let mut failures = 0;
    for (n, name, limit, f) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f(&mut shared);
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > Duration::from_secs(limit) => Err(format!(
                "{d}; took {:.1} s, limit {limit} s",
                took.as_secs_f64()
            )),
            o => o,
        };
        match outcome {
            Ok(d) => println!(
                "PASS criterion {n} ({name}): {d} [{:.1} s]",
                took.as_secs_f64()
            ),
            Err(d) => {
                failures += 1;
                println!(
                    "FAIL criterion {n} ({name}): {d} [{:.1} s]",
                    took.as_secs_f64()
                );
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
