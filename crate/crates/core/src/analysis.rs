//! Pointwise identities and inequalities for the Finsler-Laplacian on smooth
//! probe functions, and bound checks on computed eigenfunctions.
//!
//! Notation: `G = ½F²`, `g = ∇G = F·F_ξ`, `a = ∇²G`, `a3 = ∇³G`, all evaluated
//! at `ξ = ∇u(x)`, and `Qu = a_ij u_ij`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::check::CheckReport;
use crate::domain::{f_mean_curvature_at, CurveSample, TriMesh};
use crate::dual::cs_gap;
use crate::eigen::{Assembly, BoundaryCondition, EigenResult};
use crate::error::{Error, Result};
use crate::model1d::{match_model, solve_model, ModelMatch, OneDSolution};
use crate::norms::{Norm, NormSpec, NormTensors};

/// Value and partial derivatives up to order three at one point of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: [f64; 2],
    pub d2: [[f64; 2]; 2],
    pub d3: [[[f64; 2]; 2]; 2],
}

/// Smooth probe function on the plane with closed-form derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `Σ c·x^i·y^j` over `(i, j, c)` with `i + j ≤ 4`.
    Polynomial { terms: Vec<(u32, u32, f64)> },
    /// `amp · sin(kx·x + px) · cos(ky·y + py)`.
    TrigProduct {
        amp: f64,
        kx: f64,
        ky: f64,
        px: f64,
        py: f64,
    },
    /// `Σ c_k r^k` in `r = √((x−c)ᵀ M (x−c))` for a symmetric positive definite `M`.
    Radial {
        center: [f64; 2],
        metric: [[f64; 2]; 2],
        coeffs: Vec<f64>,
    },
}

impl TestFunction {
    pub fn polynomial(terms: Vec<(u32, u32, f64)>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.0 + t.1 > 4) {
            return Err(Error::config(format!(
                "polynomial probe degree {} exceeds 4",
                t.0 + t.1
            )));
        }
        Ok(TestFunction::Polynomial { terms })
    }

    /// `Σ c_k |x − center|^k`.
    pub fn radial(center: [f64; 2], coeffs: Vec<f64>) -> Self {
        TestFunction::Radial {
            center,
            metric: [[1.0, 0.0], [0.0, 1.0]],
            coeffs,
        }
    }

    /// Random polynomial of the given degree (at most 4) with coefficients in [−1, 1].
    pub fn random_polynomial<R: Rng + ?Sized>(rng: &mut R, degree: u32) -> Self {
        let degree = degree.min(4);
        let mut terms = Vec::new();
        for d in 1..=degree {
            for i in 0..=d {
                terms.push((i, d - i, rng.gen_range(-1.0..1.0)));
            }
        }
        TestFunction::Polynomial { terms }
    }

    pub fn random_trig<R: Rng + ?Sized>(rng: &mut R) -> Self {
        TestFunction::TrigProduct {
            amp: rng.gen_range(0.5..2.0),
            kx: rng.gen_range(0.5..3.0),
            ky: rng.gen_range(0.5..3.0),
            px: rng.gen_range(0.0..std::f64::consts::TAU),
            py: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }

    pub fn random_radial<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let (l1, l2, th) = (
            rng.gen_range(0.3..2.0),
            rng.gen_range(0.3..2.0),
            rng.gen_range(0.0..std::f64::consts::PI),
        );
        let (c, s) = (th.cos(), th.sin());
        let metric = [
            [l1 * c * c + l2 * s * s, (l1 - l2) * c * s],
            [(l1 - l2) * c * s, l1 * s * s + l2 * c * c],
        ];
        TestFunction::Radial {
            center: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            metric,
            coeffs: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        match self {
            TestFunction::Polynomial { terms } => poly_jet(terms, x),
            TestFunction::TrigProduct {
                amp,
                kx,
                ky,
                px,
                py,
            } => {
                let (a, b) = (kx * x[0] + px, ky * x[1] + py);
                // f(a)g(b) with f = sin, g = cos; derivatives cycle with period 4
                let f = [a.sin(), a.cos(), -a.sin(), -a.cos()];
                let g = [b.cos(), -b.sin(), -b.cos(), b.sin()];
                let k = [*kx, *ky];
                let mut j = Jet {
                    value: amp * f[0] * g[0],
                    ..Jet::default()
                };
                let term = |idx: &[usize]| {
                    let nx = idx.iter().filter(|&&i| i == 0).count();
                    let ny = idx.len() - nx;
                    amp * k[0].powi(nx as i32) * k[1].powi(ny as i32) * f[nx] * g[ny]
                };
                for i in 0..2 {
                    j.d1[i] = term(&[i]);
                    for l in 0..2 {
                        j.d2[i][l] = term(&[i, l]);
                        for m in 0..2 {
                            j.d3[i][l][m] = term(&[i, l, m]);
                        }
                    }
                }
                j
            }
            TestFunction::Radial {
                center,
                metric,
                coeffs,
            } => radial_jet(*center, metric, coeffs, x),
        }
    }
}

fn poly_jet(terms: &[(u32, u32, f64)], x: [f64; 2]) -> Jet {
    // ∂^k x^i = i!/(i−k)! x^(i−k)
    let d = |x: f64, i: u32, k: u32| -> f64 {
        if k > i {
            return 0.0;
        }
        ((i - k + 1)..=i).map(f64::from).product::<f64>() * x.powi((i - k) as i32)
    };
    let mut j = Jet::default();
    for &(i, e, c) in terms {
        let part = |kx: u32, ky: u32| c * d(x[0], i, kx) * d(x[1], e, ky);
        j.value += part(0, 0);
        for a in 0..2 {
            j.d1[a] += part(u32::from(a == 0), u32::from(a == 1));
            for b in 0..2 {
                let nx = u32::from(a == 0) + u32::from(b == 0);
                j.d2[a][b] += part(nx, 2 - nx);
                for m in 0..2 {
                    let nx = nx + u32::from(m == 0);
                    j.d3[a][b][m] += part(nx, 3 - nx);
                }
            }
        }
    }
    j
}

fn radial_jet(center: [f64; 2], m: &[[f64; 2]; 2], coeffs: &[f64], x: [f64; 2]) -> Jet {
    let y = [x[0] - center[0], x[1] - center[1]];
    let my = [
        m[0][0] * y[0] + m[0][1] * y[1],
        m[1][0] * y[0] + m[1][1] * y[1],
    ];
    let r = (y[0] * my[0] + y[1] * my[1]).sqrt();
    let mut g = [0.0; 4];
    for (k, &c) in coeffs.iter().enumerate() {
        for (order, slot) in g.iter_mut().enumerate() {
            if order <= k {
                let falling: f64 = ((k - order + 1)..=k).map(|v| v as f64).product();
                *slot += c * falling * r.powi((k - order) as i32);
            }
        }
    }
    let r1 = [my[0] / r, my[1] / r];
    let mut r2 = [[0.0; 2]; 2];
    for i in 0..2 {
        for l in 0..2 {
            r2[i][l] = (m[i][l] - r1[i] * r1[l]) / r;
        }
    }
    let mut jet = Jet {
        value: g[0],
        ..Jet::default()
    };
    for i in 0..2 {
        jet.d1[i] = g[1] * r1[i];
        for l in 0..2 {
            jet.d2[i][l] = g[2] * r1[i] * r1[l] + g[1] * r2[i][l];
            for k in 0..2 {
                let r3 = -(r1[k] * r2[i][l] + r2[i][k] * r1[l] + r1[i] * r2[l][k]) / r;
                let sym = r2[i][k] * r1[l] + r1[i] * r2[l][k] + r2[i][l] * r1[k];
                jet.d3[i][l][k] = g[3] * r1[i] * r1[l] * r1[k] + g[2] * sym + g[1] * r3;
            }
        }
    }
    jet
}

/// Norm tensors at `∇u(x)`; fails on a vanishing gradient.
fn tensors_at(norm: &Norm, jet: &Jet, want_a3: bool) -> Result<NormTensors> {
    if jet.d1 == [0.0, 0.0] {
        return Err(Error::domain(
            "probe gradient vanishes at the evaluation point",
        ));
    }
    norm.tensors(&jet.d1, want_a3)
}

/// Both sides of the Bochner formula
/// `a_ij ∂_ij G(∇u) = a_ij a_kl u_ik u_jl + (Qu)_k g_k − a_ijl ∂_l G(∇u) u_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BochnerSides {
    pub lhs: f64,
    pub rhs: f64,
    /// `max_ij |a_ijk u_k|`.
    pub homogeneity: f64,
}

pub fn bochner_sides(norm: &Norm, u: &TestFunction, x: [f64; 2]) -> Result<BochnerSides> {
    let j = u.jet(x);
    let t = tensors_at(norm, &j, true)?;
    let a3 = t.a3.as_ref().expect("third derivatives requested");
    let g = [t.value * t.grad[0], t.value * t.grad[1]];
    let (a, u2, u3) = (&t.a, &j.d2, &j.d3);
    let r = 0..2;
    // ∂_ij G(∇u) = a_kl u_ki u_lj + g_k u_kij
    let mut hess_g = [[0.0; 2]; 2];
    for i in r.clone() {
        for jj in r.clone() {
            let mut s = 0.0;
            for k in r.clone() {
                s += g[k] * u3[k][i][jj];
                for l in r.clone() {
                    s += a[(k, l)] * u2[k][i] * u2[l][jj];
                }
            }
            hess_g[i][jj] = s;
        }
    }
    let lhs: f64 = (0..4)
        .map(|q| a[(q / 2, q % 2)] * hess_g[q / 2][q % 2])
        .sum();
    // ∂_l G(∇u) = g_m u_ml
    let grad_g = [
        g[0] * u2[0][0] + g[1] * u2[1][0],
        g[0] * u2[0][1] + g[1] * u2[1][1],
    ];
    // (Qu)_k = a_ijk' u_k'k u_ij + a_ij u_ijk
    let mut dq = [0.0; 2];
    for (k, dqk) in dq.iter_mut().enumerate() {
        for i in r.clone() {
            for jj in r.clone() {
                *dqk += a[(i, jj)] * u3[i][jj][k];
                for l in r.clone() {
                    *dqk += a3.get(i, jj, l) * u2[l][k] * u2[i][jj];
                }
            }
        }
    }
    let mut rhs = dq[0] * g[0] + dq[1] * g[1];
    let mut homogeneity = 0.0f64;
    for i in r.clone() {
        for jj in r.clone() {
            for k in r.clone() {
                for l in r.clone() {
                    rhs += a[(i, jj)] * a[(k, l)] * u2[i][k] * u2[jj][l];
                }
                rhs -= a3.get(i, jj, k) * grad_g[k] * u2[i][jj];
            }
            homogeneity =
                homogeneity.max((a3.get(i, jj, 0) * j.d1[0] + a3.get(i, jj, 1) * j.d1[1]).abs());
        }
    }
    Ok(BochnerSides {
        lhs,
        rhs,
        homogeneity,
    })
}

/// `|LHS − RHS|` of the Bochner formula at `x`.
pub fn bochner_residual(spec: &NormSpec, u: &TestFunction, x: [f64; 2]) -> Result<f64> {
    let s = bochner_sides(&Norm::new(spec)?, u, x)?;
    Ok((s.lhs - s.rhs).abs())
}

/// Contractions shared by the Kato and curvature-dimension inequalities.
struct Quadratics {
    /// `a_ij a_kl u_ik u_jl`.
    aa: f64,
    /// `a_ij F_k F_l u_ik u_jl`.
    kato_rhs: f64,
    /// `Qu = a_ij u_ij`.
    qu: f64,
    /// `F_i F_j u_ij`.
    ffu: f64,
}

fn quadratics(norm: &Norm, u: &TestFunction, x: [f64; 2]) -> Result<Quadratics> {
    let j = u.jet(x);
    let t = tensors_at(norm, &j, false)?;
    let (a, h, f) = (&t.a, &j.d2, &t.grad);
    let mut au = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            au[i][k] = a[(i, 0)] * h[0][k] + a[(i, 1)] * h[1][k];
        }
    }
    let aa = au[0][0] * au[0][0] + 2.0 * au[0][1] * au[1][0] + au[1][1] * au[1][1];
    let uf = [
        h[0][0] * f[0] + h[0][1] * f[1],
        h[1][0] * f[0] + h[1][1] * f[1],
    ];
    let kato_rhs = (0..4)
        .map(|q| a[(q / 2, q % 2)] * uf[q / 2] * uf[q % 2])
        .sum();
    let qu = au[0][0] + au[1][1];
    let ffu = f[0] * uf[0] + f[1] * uf[1];
    Ok(Quadratics {
        aa,
        kato_rhs,
        qu,
        ffu,
    })
}

/// `a_ij a_kl u_ik u_jl − a_ij F_k F_l u_ik u_jl`, non-negative.
pub fn kato_gap(spec: &NormSpec, u: &TestFunction, x: [f64; 2]) -> Result<f64> {
    let q = quadratics(&Norm::new(spec)?, u, x)?;
    Ok(q.aa - q.kato_rhs)
}

/// `a_ij a_kl u_ik u_jl − (Qu)²/n − n/(n−1)·(Qu/n − F_iF_j u_ij)²` with
/// `n = 2`, non-negative.
pub fn extended_cd_gap(spec: &NormSpec, u: &TestFunction, x: [f64; 2]) -> Result<f64> {
    let q = quadratics(&Norm::new(spec)?, u, x)?;
    Ok(cd_gap_of(&q))
}

fn cd_gap_of(q: &Quadratics) -> f64 {
    let n = 2.0;
    q.aa - (q.qu * q.qu / n + n / (n - 1.0) * (q.qu / n - q.ffu).powi(2))
}

/// `|Qu + F·H_F − F_iF_j u_ij|` where `H_F` is the anisotropic curvature of the
/// level curve of `u` through `x`, oriented so that `u` increases inward.
pub fn levelset_identity_residual(spec: &NormSpec, u: &TestFunction, x: [f64; 2]) -> Result<f64> {
    let norm = Norm::new(spec)?;
    if !norm.is_strongly_convex() {
        return Err(Error::config(format!(
            "{} is not strongly convex (use `regularize`)",
            spec.label()
        )));
    }
    let j = u.jet(x);
    let q = quadratics(&norm, u, x)?;
    let f = norm.value(&j.d1);
    // the level curve as an integral curve of V = (u_y, −u_x), so R(γ') = −∇u
    let (d1, h) = (j.d1, j.d2);
    let v = [d1[1], -d1[0]];
    let dv = [[h[1][0], h[1][1]], [-h[0][0], -h[0][1]]];
    let acc = [
        dv[0][0] * v[0] + dv[0][1] * v[1],
        dv[1][0] * v[0] + dv[1][1] * v[1],
    ];
    let sample = CurveSample {
        s: 0.0,
        pos: x,
        d1: v,
        d2: acc,
    };
    let h_f = f_mean_curvature_at(&norm, &sample)?;
    Ok((q.qu + f * h_f - q.ffu).abs())
}

/// Per-triangle gradient norms and averaged values of a P1 field.
fn triangle_states(mesh: &TriMesh, norm: &Norm, u: &[f64]) -> Result<Vec<(f64, f64, [f64; 2])>> {
    let asm = Assembly::new(mesh)?;
    Ok((0..asm.triangle_count())
        .map(|t| {
            let [a, b, c] = asm.triangle(t);
            let g = asm.element_gradient(t, u);
            let bary = [
                (mesh.nodes[a][0] + mesh.nodes[b][0] + mesh.nodes[c][0]) / 3.0,
                (mesh.nodes[a][1] + mesh.nodes[b][1] + mesh.nodes[c][1]) / 3.0,
            ];
            (norm.value(&g), (u[a] + u[b] + u[c]) / 3.0, bary)
        })
        .collect())
}

fn check_field(mesh: &TriMesh, eig: &EigenResult) -> Result<()> {
    if eig.nodal_values.len() != mesh.nodes.len() {
        return Err(Error::domain(format!(
            "{} nodal values for a mesh with {} nodes",
            eig.nodal_values.len(),
            mesh.nodes.len()
        )));
    }
    Ok(())
}

fn minmax(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

const DISCRETE_ALLOWANCE: f64 = 0.05;

/// Result of a gradient comparison: the report and the matched model.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: CheckReport,
    pub matched: ModelMatch,
    pub model: OneDSolution,
}

/// `F(∇u) ≤ v'(v⁻¹(u))` per triangle for a Neumann eigenfunction with
/// `min u = −1`, against the radial model with `n = 2` matched to `max u`.
/// Violations are relative to `max v'`.
pub fn gradient_comparison_check(
    mesh: &TriMesh,
    spec: &NormSpec,
    eig: &EigenResult,
) -> Result<Comparison> {
    check_field(mesh, eig)?;
    let (lo, hi) = minmax(&eig.nodal_values);
    if (lo + 1.0).abs() > 1e-9 || hi > 1.0 + 1e-9 || hi <= 0.0 {
        return Err(Error::domain(format!(
            "eigenfunction range [{lo}, {hi}] is not normalized to min u = −1, 0 < max u ≤ 1"
        )));
    }
    let matched = match_model(2, eig.lambda, hi.min(1.0))?;
    let model = solve_model(&matched.model)?;
    let norm = Norm::new(spec)?;
    let scale = model.max_v_prime();
    let mut samples = Vec::with_capacity(mesh.triangles.len());
    for (f, ubar, x) in triangle_states(mesh, &norm, &eig.nodal_values)? {
        let bound = model.v_prime_of_u(ubar.clamp(model.v[0], model.m))?;
        samples.push(((f - bound) / scale, vec![x[0], x[1]]));
    }
    let mut report = CheckReport::from_samples("gradient_comparison", DISCRETE_ALLOWANCE, samples)
        .with_meta("norm", spec.label())
        .with_meta("model_a", matched.model.a)
        .with_meta("model_m", matched.m)
        .with_meta("clamped", matched.clamped)
        .with_meta("level", mesh.refinement_level);
    if !eig.converged {
        report = report.fail_with("eigensolver did not converge");
    }
    Ok(Comparison {
        report,
        matched,
        model,
    })
}

/// `F(∇u)² + λu² ≤ λ·max|u|²` per triangle for a Neumann eigenfunction
/// rescaled to `max|u| = 1`; threshold `0.05·λ`.
pub fn neumann_gradient_bound_check(
    mesh: &TriMesh,
    spec: &NormSpec,
    eig: &EigenResult,
) -> Result<CheckReport> {
    check_field(mesh, eig)?;
    let (lo, hi) = minmax(&eig.nodal_values);
    let s = lo.abs().max(hi.abs());
    if !(s > 0.0) {
        return Err(Error::domain("eigenfunction vanishes identically"));
    }
    let u: Vec<f64> = eig.nodal_values.iter().map(|v| v / s).collect();
    let norm = Norm::new(spec)?;
    let lambda = eig.lambda;
    let samples = triangle_states(mesh, &norm, &u)?
        .into_iter()
        .map(|(f, ubar, x)| (f * f + lambda * ubar * ubar - lambda, vec![x[0], x[1]]));
    // the bound is derived with min u = −1 and max u ≤ 1
    let normalized = lo.abs() >= hi.abs();
    let mut report = CheckReport::from_samples(
        "neumann_gradient_bound",
        DISCRETE_ALLOWANCE * lambda,
        samples,
    )
    .with_meta("norm", spec.label())
    .with_meta("lambda", lambda)
    .with_meta("within_normalization", normalized)
    .with_meta("level", mesh.refinement_level);
    if !eig.converged {
        report = report.fail_with("eigensolver did not converge");
    }
    Ok(report)
}

/// `F²(∇u) / ((α+1)² − (α+u)²) ≤ λ` per triangle for a Dirichlet
/// eigenfunction rescaled to `sup u = 1`; threshold `0.05·λ`.
pub fn dirichlet_gradient_bound_check(
    mesh: &TriMesh,
    spec: &NormSpec,
    eig: &EigenResult,
    alpha: f64,
) -> Result<CheckReport> {
    check_field(mesh, eig)?;
    if !(alpha > 0.0) {
        return Err(Error::domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let (lo, hi) = minmax(&eig.nodal_values);
    if !(hi > 0.0) {
        return Err(Error::domain("eigenfunction has no positive values"));
    }
    let mut negative = false;
    let u: Vec<f64> = eig
        .nodal_values
        .iter()
        .map(|v| {
            let w = v / hi;
            negative |= w < -1e-10;
            w.max(0.0)
        })
        .collect();
    let norm = Norm::new(spec)?;
    let lambda = eig.lambda;
    let top = (alpha + 1.0).powi(2);
    let mut samples = Vec::with_capacity(mesh.triangles.len());
    for (f, ubar, x) in triangle_states(mesh, &norm, &u)? {
        let den = top - (alpha + ubar).powi(2);
        assert!(den > 0.0, "denominator {den} at u = {ubar}");
        samples.push((f * f / den - lambda, vec![x[0], x[1]]));
    }
    let mut report = CheckReport::from_samples(
        "dirichlet_gradient_bound",
        DISCRETE_ALLOWANCE * lambda,
        samples,
    )
    .with_meta("norm", spec.label())
    .with_meta("alpha", alpha)
    .with_meta("lambda", lambda)
    .with_meta("level", mesh.refinement_level);
    if negative {
        report = report.fail_with(format!(
            "eigenfunction changes sign (min u / sup u = {})",
            lo / hi
        ));
    }
    if !eig.converged {
        report = report.fail_with("eigensolver did not converge");
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `λ ≥ π²/d_F²`.
    NeumannDiameter,
    /// `λ ≥ π²/(4 i_F²)`.
    DirichletInradius,
}

impl BoundKind {
    pub fn for_bc(bc: BoundaryCondition) -> Self {
        match bc {
            BoundaryCondition::Neumann => BoundKind::NeumannDiameter,
            BoundaryCondition::Dirichlet => BoundKind::DirichletInradius,
        }
    }

    /// `λ·d²/π²` or `λ·4i²/π²`.
    pub fn ratio(self, lambda: f64, geom: f64) -> f64 {
        let pi2 = std::f64::consts::PI.powi(2);
        match self {
            BoundKind::NeumannDiameter => lambda * geom * geom / pi2,
            BoundKind::DirichletInradius => lambda * 4.0 * geom * geom / pi2,
        }
    }
}

pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Passes when the eigenvalue ratio is at least `1 − 1e−9`; the violation
/// is `1 − ratio`.
pub fn poincare_bound_report(lambda: f64, geom: f64, kind: BoundKind) -> Result<CheckReport> {
    if !(lambda > 0.0 && geom > 0.0) {
        return Err(Error::domain(format!(
            "lambda and geometry must be positive, got {lambda} and {geom}"
        )));
    }
    let ratio = kind.ratio(lambda, geom);
    let name = match kind {
        BoundKind::NeumannDiameter => "neumann_diameter_bound",
        BoundKind::DirichletInradius => "dirichlet_inradius_bound",
    };
    Ok(
        CheckReport::from_samples(name, BOUND_TOLERANCE, [(1.0 - ratio, vec![lambda, geom])])
            .with_meta("ratio", ratio),
    )
}

/// Norm families swept by the identity and inequality checks.
pub fn sweep_families() -> Vec<NormSpec> {
    vec![
        NormSpec::Euclidean,
        NormSpec::pnorm(1.5),
        NormSpec::pnorm(3.0),
        NormSpec::pnorm(4.0),
        NormSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
        NormSpec::Regularized {
            base: Box::new(NormSpec::pnorm(4.0)),
            eps: 1e-2,
        },
    ]
}

/// Rotate between the three probe kinds.
fn random_probe(rng: &mut ChaCha8Rng, i: usize) -> TestFunction {
    match i % 3 {
        0 => {
            let degree = rng.gen_range(2..=4);
            TestFunction::random_polynomial(rng, degree)
        }
        1 => TestFunction::random_trig(rng),
        _ => TestFunction::random_radial(rng),
    }
}

/// Draw `(probe, point)` pairs whose gradient is bounded away from the
/// coordinate axes by 5% of its length, where p-norms with `p < 3` lose
/// their third derivatives.
fn safe_samples(count: usize, seed: u64) -> Vec<(TestFunction, [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    while out.len() < count {
        let u = random_probe(&mut rng, i);
        i += 1;
        for _ in 0..50 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let g = u.jet(x).d1;
            let len = g[0].hypot(g[1]);
            if len > 1e-2 && g[0].abs().min(g[1].abs()) > 0.05 * len {
                out.push((u, x));
                break;
            }
        }
    }
    out
}

fn location(x: [f64; 2], sample: usize) -> Vec<f64> {
    vec![x[0], x[1], sample as f64]
}

/// Bochner residual relative to `1 + |LHS|` (threshold 1e−8) and the
/// homogeneity identity `a_ijk u_k = 0` (threshold 1e−10).
pub fn identity_sweep(spec: &NormSpec, count: usize, seed: u64) -> Result<[CheckReport; 2]> {
    let norm = Norm::new(spec)?;
    let mut bochner = Vec::with_capacity(count);
    let mut homog = Vec::with_capacity(count);
    for (k, (u, x)) in safe_samples(count, seed).into_iter().enumerate() {
        let s = bochner_sides(&norm, &u, x)?;
        bochner.push(((s.lhs - s.rhs).abs() / (1.0 + s.lhs.abs()), location(x, k)));
        homog.push((s.homogeneity, location(x, k)));
    }
    Ok([
        CheckReport::from_samples("bochner_residual", 1e-8, bochner)
            .with_seed(seed)
            .with_meta("norm", spec.label()),
        CheckReport::from_samples("a3_homogeneity", 1e-10, homog)
            .with_seed(seed)
            .with_meta("norm", spec.label()),
    ])
}

/// Kato, curvature-dimension and Cauchy-Schwarz gaps, each negated and
/// divided by its scale so that the threshold is 1e−10.
pub fn inequality_sweep(spec: &NormSpec, count: usize, seed: u64) -> Result<[CheckReport; 3]> {
    let norm = Norm::new(spec)?;
    let mut kato = Vec::with_capacity(count);
    let mut cd = Vec::with_capacity(count);
    for (k, (u, x)) in safe_samples(count, seed).into_iter().enumerate() {
        let q = quadratics(&norm, &u, x)?;
        let scale = 1.0 + q.aa.abs();
        kato.push((-(q.aa - q.kato_rhs) / scale, location(x, k)));
        cd.push((-cd_gap_of(&q) / scale, location(x, k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut cs = Vec::with_capacity(count);
    for k in 0..count {
        let xi = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let eta = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let gap = cs_gap(&norm, &xi, &eta);
        let scale = 1.0 + xi[0].hypot(xi[1]) * eta[0].hypot(eta[1]);
        cs.push((-gap / scale, vec![xi[0], xi[1], eta[0], eta[1], k as f64]));
    }
    let label = spec.label();
    Ok([
        CheckReport::from_samples("kato_gap", 1e-10, kato)
            .with_seed(seed)
            .with_meta("norm", &label),
        CheckReport::from_samples("extended_cd_gap", 1e-10, cd)
            .with_seed(seed)
            .with_meta("norm", &label),
        CheckReport::from_samples("cauchy_schwarz_gap", 1e-10, cs)
            .with_seed(seed)
            .with_meta("norm", &label),
    ])
}
