//! First Dirichlet and Neumann eigenvalues of the Finsler-Laplacian by
//! minimizing the Rayleigh quotient `∫F²(∇u) / ∫u²` over conforming P1
//! functions.
//!
//! Both integrals are exact for piecewise-linear functions, so every returned
//! `lambda` is the quotient of an admissible continuum function and bounds the
//! true eigenvalue from above up to roundoff.
//!
//! The minimizer is a monotone first-order method: Polak-Ribière+ conjugate
//! directions built from the quotient gradient in the lumped-mass metric, a
//! line search that starts from the two-dimensional Ritz step and refines it
//! by secant iterations on the directional derivative, and acceptance only of
//! steps that do not increase the quotient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::TriMesh;
use crate::dual::standard_normal;
use crate::error::{Error, Result};
use crate::norms::{regularize, Norm, NormSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Iteration cap per stage.
    pub max_iters: usize,
    /// Stop when the projected quotient gradient, measured in the lumped-mass
    /// norm at unit mass, is at most `grad_tol · λ`.
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Decreasing regularization parameters solved before the base norm.
    pub eps_schedule: Vec<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 200_000,
            grad_tol: 1e-8,
            restarts: 4,
            seed: 7,
            eps_schedule: Vec::new(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::config(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        let mut prev = f64::INFINITY;
        for &e in &self.eps_schedule {
            if !(e > 0.0 && e < prev) {
                return Err(Error::config(format!(
                    "eps_schedule must be positive and strictly decreasing, got {:?}",
                    self.eps_schedule
                )));
            }
            prev = e;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EigenProblem {
    pub mesh: TriMesh,
    pub spec: NormSpec,
    pub bc: BoundaryCondition,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    /// The decrease still available along the search direction is below the
    /// resolution of the quotient in floating point.
    RoundoffFloor,
    MaxIters,
    /// No non-increasing step could be found, or neither the quotient nor the
    /// gradient improved over a long window; stationary to roundoff.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: usize,
    pub quotient: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// `energy / mass` of `nodal_values`.
    pub lambda: f64,
    pub nodal_values: Vec<f64>,
    pub energy: f64,
    pub mass: f64,
    /// `∫u`, reported for Neumann problems.
    pub mean: Option<f64>,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    /// Final relative projected gradient norm.
    pub grad_norm: f64,
    /// Area fraction of elements on which `F(∇u)` is below `1e−10 · max F(∇u)`.
    pub zero_gradient_fraction: f64,
    pub level: usize,
    /// Final quotient of every restart, in restart order.
    pub restart_lambdas: Vec<f64>,
}

/// Per-mesh data for exact P1 integrals.
#[derive(Debug, Clone)]
pub struct Assembly {
    triangles: Vec<[usize; 3]>,
    area: Vec<f64>,
    /// Gradients of the three hat functions on each triangle.
    shape: Vec<[[f64; 2]; 3]>,
    /// `∫φ_i`, the lumped mass.
    lumped: Vec<f64>,
    total_area: f64,
    boundary: Vec<bool>,
}

impl Assembly {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let n = mesh.nodes.len();
        let mut area = Vec::with_capacity(mesh.triangles.len());
        let mut shape = Vec::with_capacity(mesh.triangles.len());
        let mut lumped = vec![0.0; n];
        for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
            let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            if !(det > 0.0) {
                return Err(Error::config(format!(
                    "triangle {t} is degenerate or clockwise (2·area = {det:e})"
                )));
            }
            // ∇φ_a = R(p_c − p_b)/det with R(x, y) = (y, −x), and cyclically
            let g = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
            shape.push([g(pb, pc), g(pc, pa), g(pa, pb)]);
            let at = 0.5 * det;
            area.push(at);
            for v in [a, b, c] {
                lumped[v] += at / 3.0;
            }
        }
        let total_area = area.iter().sum();
        Ok(Assembly {
            triangles: mesh.triangles.clone(),
            area,
            shape,
            lumped,
            total_area,
            boundary: mesh.is_boundary_mask(),
        })
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    #[inline]
    pub fn element_gradient(&self, t: usize, u: &[f64]) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let s = &self.shape[t];
        [
            u[a] * s[0][0] + u[b] * s[1][0] + u[c] * s[2][0],
            u[a] * s[0][1] + u[b] * s[1][1] + u[c] * s[2][1],
        ]
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.area[t]
    }

    /// `∫F²(∇u)` and, when `grad` is given, its derivative in the nodal values.
    pub fn energy(&self, norm: &Norm, u: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut e = 0.0;
        let mut dg = [0.0; 2];
        for t in 0..self.triangles.len() {
            let xi = self.element_gradient(t, u);
            if xi == [0.0, 0.0] {
                continue;
            }
            let w = 2.0 * self.area[t];
            match grad.as_deref_mut() {
                Some(g) => {
                    e += w * norm.half_sq_grad(&xi, &mut dg);
                    let s = &self.shape[t];
                    for (k, &v) in self.triangles[t].iter().enumerate() {
                        g[v] += w * (dg[0] * s[k][0] + dg[1] * s[k][1]);
                    }
                }
                None => e += w * norm.half_sq(&xi),
            }
        }
        e
    }

    /// `(∫u², ∫u)` and, when `grad` is given, the derivative of `∫u²`.
    pub fn mass(&self, u: &[f64], mut grad: Option<&mut [f64]>) -> (f64, f64) {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let (mut m, mut mean) = (0.0, 0.0);
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let at = self.area[t];
            let (ua, ub, uc) = (u[a], u[b], u[c]);
            let s = ua + ub + uc;
            m += at / 12.0 * (s * s + ua * ua + ub * ub + uc * uc);
            mean += at / 3.0 * s;
            if let Some(g) = grad.as_deref_mut() {
                g[a] += at / 6.0 * (s + ua);
                g[b] += at / 6.0 * (s + ub);
                g[c] += at / 6.0 * (s + uc);
            }
        }
        (m, mean)
    }

    /// Impose the admissibility constraints on a nodal vector: zero boundary
    /// values, or zero mean via the lumped-mass projection onto constants.
    pub fn project(&self, bc: BoundaryCondition, v: &mut [f64]) {
        match bc {
            BoundaryCondition::Dirichlet => {
                for (x, &b) in v.iter_mut().zip(&self.boundary) {
                    if b {
                        *x = 0.0;
                    }
                }
            }
            BoundaryCondition::Neumann => {
                let c =
                    v.iter().zip(&self.lumped).map(|(x, m)| x * m).sum::<f64>() / self.total_area;
                for x in v.iter_mut() {
                    *x -= c;
                }
            }
        }
    }
}

/// `(∫F²(∇u), ∇_u ∫F²(∇u))`.
pub fn energy_and_gradient(
    mesh: &TriMesh,
    spec: &NormSpec,
    nodal: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let norm = Norm::new(spec)?;
    let asm = Assembly::new(mesh)?;
    check_len(mesh, nodal)?;
    let mut g = vec![0.0; nodal.len()];
    let e = asm.energy(&norm, nodal, Some(&mut g));
    Ok((e, g))
}

/// `(∫u², ∫u)`.
pub fn mass_integrals(mesh: &TriMesh, nodal: &[f64]) -> Result<(f64, f64)> {
    let asm = Assembly::new(mesh)?;
    check_len(mesh, nodal)?;
    Ok(asm.mass(nodal, None))
}

fn check_len(mesh: &TriMesh, nodal: &[f64]) -> Result<()> {
    if nodal.len() != mesh.nodes.len() {
        return Err(Error::domain(format!(
            "{} nodal values for a mesh with {} nodes",
            nodal.len(),
            mesh.nodes.len()
        )));
    }
    Ok(())
}

/// Energy, mass, their gradients and per-element contributions at one point.
///
/// Quotient changes between nearby points are formed from per-element
/// differences, which stay accurate long after `E/M` itself stops resolving
/// the decrease.
#[derive(Clone)]
struct Point {
    u: Vec<f64>,
    e: f64,
    m: f64,
    ge: Vec<f64>,
    gm: Vec<f64>,
    elem_e: Vec<f64>,
    elem_m: Vec<f64>,
}

impl Point {
    fn eval(asm: &Assembly, norm: &Norm, u: Vec<f64>) -> Self {
        let n = u.len();
        let nt = asm.triangles.len();
        let mut p = Point {
            u,
            e: 0.0,
            m: 0.0,
            ge: vec![0.0; n],
            gm: vec![0.0; n],
            elem_e: vec![0.0; nt],
            elem_m: vec![0.0; nt],
        };
        let mut dg = [0.0; 2];
        for t in 0..nt {
            let [a, b, c] = asm.triangles[t];
            let at = asm.area[t];
            let xi = asm.element_gradient(t, &p.u);
            if xi != [0.0, 0.0] {
                let w = 2.0 * at;
                let et = w * norm.half_sq_grad(&xi, &mut dg);
                p.elem_e[t] = et;
                p.e += et;
                let sh = &asm.shape[t];
                for (k, v) in [a, b, c].into_iter().enumerate() {
                    p.ge[v] += w * (dg[0] * sh[k][0] + dg[1] * sh[k][1]);
                }
            }
            let (ua, ub, uc) = (p.u[a], p.u[b], p.u[c]);
            let s = ua + ub + uc;
            let mt = at / 12.0 * (s * s + ua * ua + ub * ub + uc * uc);
            p.elem_m[t] = mt;
            p.m += mt;
            p.gm[a] += at / 6.0 * (s + ua);
            p.gm[b] += at / 6.0 * (s + ub);
            p.gm[c] += at / 6.0 * (s + uc);
        }
        p
    }

    fn quotient(&self) -> f64 {
        self.e / self.m
    }

    /// `R(other) − R(self)` from per-element differences.
    fn quotient_change(&self, other: &Point) -> f64 {
        let de: f64 = other
            .elem_e
            .iter()
            .zip(&self.elem_e)
            .map(|(a, b)| a - b)
            .sum();
        let dm: f64 = other
            .elem_m
            .iter()
            .zip(&self.elem_m)
            .map(|(a, b)| a - b)
            .sum();
        (de * self.m - self.e * dm) / (self.m * other.m)
    }

    /// `∇R = (∇E − R∇M)/M`.
    fn quotient_grad(&self, out: &mut [f64]) {
        let r = self.quotient();
        for ((o, ge), gm) in out.iter_mut().zip(&self.ge).zip(&self.gm) {
            *o = (ge - r * gm) / self.m;
        }
    }

    /// Rescale to unit mass; everything else follows by homogeneity.
    fn normalize(&mut self) {
        let s = self.m.sqrt();
        for x in self.u.iter_mut() {
            *x /= s;
        }
        for g in self.ge.iter_mut().chain(self.gm.iter_mut()) {
            *g /= s;
        }
        for v in self.elem_e.iter_mut().chain(self.elem_m.iter_mut()) {
            *v /= self.m;
        }
        self.e /= self.m;
        self.m = 1.0;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct StageOutcome {
    point: Point,
    iterations: usize,
    grad_norm: f64,
    stop: StopReason,
}

const ARMIJO_C1: f64 = 1e-4;
const CURVATURE_SIGMA: f64 = 0.1;
const MAX_LINE_STEPS: usize = 20;
const STALL_WINDOW: usize = 200;
/// Relative size below which a quotient decrease is not resolvable.
const RESOLUTION: f64 = 1e3 * f64::EPSILON;

struct Minimizer<'a> {
    asm: &'a Assembly,
    norm: &'a Norm,
    bc: BoundaryCondition,
    trace: &'a mut Vec<TraceEntry>,
    stage: usize,
}

impl Minimizer<'_> {
    /// Preconditioned, projected quotient gradient `h = P M_L⁻¹ ∇R` and its
    /// lumped-mass norm.
    fn search_gradient(&self, p: &Point, grad: &mut [f64], h: &mut [f64]) -> f64 {
        p.quotient_grad(grad);
        for ((hi, g), m) in h.iter_mut().zip(grad.iter()).zip(&self.asm.lumped) {
            *hi = g / m;
        }
        self.asm.project(self.bc, h);
        h.iter()
            .zip(&self.asm.lumped)
            .map(|(x, m)| m * x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Minimizer of the quotient on `span{u, d}` in the quadratic model built
    /// from `E(d)`; exact for quadratic energies.
    fn ritz_step(&self, p: &Point, d: &[f64]) -> Option<f64> {
        let ed = self.asm.energy(self.norm, d, None);
        let (md, _) = self.asm.mass(d, None);
        let (e0, m0) = (p.e, p.m);
        let b = 0.5 * dot(&p.ge, d);
        let mm = 0.5 * dot(&p.gm, d);
        // smallest root of det([[e0, b], [b, ed]] − μ[[m0, mm], [mm, md]]) = 0
        let qa = m0 * md - mm * mm;
        let qb = -(e0 * md + ed * m0 - 2.0 * b * mm);
        let qc = e0 * ed - b * b;
        if !(qa > 0.0) {
            return None;
        }
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        // numerically stable smaller root
        let mu = if qb < 0.0 {
            2.0 * qc / (-qb + disc)
        } else {
            (-qb - disc) / (2.0 * qa)
        };
        let (r1, r2) = ((e0 - mu * m0, b - mu * mm), (b - mu * mm, ed - mu * md));
        let t = if r1.1.abs() >= r2.1.abs() {
            -r1.0 / r1.1
        } else {
            -r2.0 / r2.1
        };
        (t.is_finite() && t > 0.0).then_some(t)
    }

    /// Returns the accepted point, its step and quotient change. When no
    /// non-increasing step exists, returns the decrease predicted at the first
    /// trial step.
    fn line_search(
        &self,
        p: &Point,
        d: &[f64],
        dphi0: f64,
        t_guess: f64,
    ) -> std::result::Result<(Point, f64, f64), f64> {
        let phi0 = p.quotient();
        let n = p.u.len();
        let mut grad = vec![0.0; n];
        let trial = |t: f64, grad: &mut [f64]| {
            let mut w: Vec<f64> = p.u.iter().zip(d).map(|(u, d)| u + t * d).collect();
            self.asm.project(self.bc, &mut w);
            let q = Point::eval(self.asm, self.norm, w);
            q.quotient_grad(grad);
            let dphi = dot(grad, d);
            (q, dphi)
        };
        let mut t = self.ritz_step(p, d).unwrap_or(t_guess);
        let predicted = -0.5 * t * dphi0;
        let (mut lo, mut dlo) = (0.0, dphi0);
        let mut hi: Option<(f64, f64)> = None;
        let mut best: Option<(Point, f64, f64)> = None;
        for _ in 0..MAX_LINE_STEPS {
            let (q, dphi) = trial(t, &mut grad);
            let change = p.quotient_change(&q);
            let decrease = change <= ARMIJO_C1 * t * dphi0;
            // a predicted decrease below roundoff only needs to be non-increasing
            let tiny = -t * dphi0 <= RESOLUTION * phi0.abs();
            let acceptable = change.is_finite() && change <= 0.0 && (decrease || tiny);
            if acceptable && dphi.abs() <= CURVATURE_SIGMA * dphi0.abs() {
                return Ok((q, t, change));
            }
            if acceptable && best.as_ref().is_none_or(|(_, _, c)| change < *c) {
                best = Some((q, t, change));
            }
            if !acceptable || dphi > 0.0 {
                hi = Some((t, dphi));
            } else {
                (lo, dlo) = (t, dphi);
            }
            t = match hi {
                Some((th, dh)) if dh > 0.0 => {
                    let s = lo - dlo * (th - lo) / (dh - dlo);
                    let w = th - lo;
                    if s.is_finite() {
                        s.clamp(lo + 0.05 * w, th - 0.05 * w)
                    } else {
                        0.5 * (lo + th)
                    }
                }
                Some((th, _)) => 0.5 * (lo + th),
                None => 4.0 * t,
            };
            if hi.is_some_and(|(th, _)| th - lo <= 1e-14 * th) {
                break;
            }
        }
        best.ok_or(predicted)
    }

    fn run(&mut self, start: Vec<f64>, max_iters: usize, grad_tol: f64) -> Result<StageOutcome> {
        let n = start.len();
        let mut u = start;
        self.asm.project(self.bc, &mut u);
        let mut p = Point::eval(self.asm, self.norm, u);
        if !(p.m > 0.0) || !p.e.is_finite() {
            return Err(Error::Numerical(
                "initial guess has zero mass or non-finite energy".into(),
            ));
        }
        p.normalize();
        let (mut grad, mut h, mut h_old, mut d) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut gnorm = self.search_gradient(&p, &mut grad, &mut h);
        let mut hh_old = 0.0;
        let mut t_prev = 1.0 / p.quotient().max(1e-300);
        let mut dphi_prev = 0.0;
        let mut iterations = 0;
        let mut steepest = true;
        // (iteration, quotient, gradient) at the last measurable improvement
        let mut progress = (0usize, p.quotient(), gnorm);
        // quotient advanced by the accurate per-step changes, so the trace is
        // monotone even when successive `E/M` values differ only by roundoff
        let mut tracked = p.quotient();
        let stop = loop {
            let lambda = tracked;
            self.trace.push(TraceEntry {
                stage: self.stage,
                quotient: lambda,
                grad_norm: gnorm / lambda,
            });
            if gnorm <= grad_tol * lambda {
                break StopReason::GradTol;
            }
            if iterations >= max_iters {
                break StopReason::MaxIters;
            }
            if lambda < progress.1 * (1.0 - 1e-14) || gnorm < 0.5 * progress.2 {
                progress = (iterations, lambda, gnorm);
            } else if iterations - progress.0 >= STALL_WINDOW {
                break StopReason::Stalled;
            }
            let hh = gnorm * gnorm;
            let beta = if steepest || hh_old == 0.0 {
                0.0
            } else {
                let cross: f64 = h
                    .iter()
                    .zip(&h_old)
                    .zip(&self.asm.lumped)
                    .map(|((a, b), m)| m * a * (a - b))
                    .sum();
                (cross / hh_old).max(0.0)
            };
            for (di, hi) in d.iter_mut().zip(&h) {
                *di = -hi + beta * *di;
            }
            let mut dphi0 = dot(&grad, &d);
            if !(dphi0 < 0.0) {
                for (di, hi) in d.iter_mut().zip(&h) {
                    *di = -hi;
                }
                dphi0 = dot(&grad, &d);
            }
            let guess = if dphi_prev != 0.0 {
                t_prev * (dphi_prev / dphi0).clamp(0.1, 10.0)
            } else {
                t_prev
            };
            let accepted = match self.line_search(&p, &d, dphi0, guess) {
                Ok(ok) => Ok(ok),
                Err(_) if beta != 0.0 => {
                    for (di, hi) in d.iter_mut().zip(&h) {
                        *di = -hi;
                    }
                    dphi0 = dot(&grad, &d);
                    self.line_search(&p, &d, dphi0, t_prev)
                }
                Err(e) => Err(e),
            };
            let (mut q, t, change) = match accepted {
                Ok(ok) => ok,
                Err(predicted) if predicted <= RESOLUTION * lambda => {
                    break StopReason::RoundoffFloor
                }
                Err(_) => break StopReason::Stalled,
            };
            tracked += change;
            // keep d consistent with the rescaled iterate for the next CG update
            let s = q.m.sqrt();
            q.normalize();
            for di in d.iter_mut() {
                *di /= s;
            }
            t_prev = t;
            dphi_prev = dphi0;
            p = q;
            std::mem::swap(&mut h, &mut h_old);
            hh_old = hh;
            gnorm = self.search_gradient(&p, &mut grad, &mut h);
            steepest = false;
            iterations += 1;
        };
        Ok(StageOutcome {
            point: p,
            iterations,
            grad_norm: gnorm,
            stop,
        })
    }
}

/// Smooth random starting function: a random cubic in bounding-box
/// coordinates, times the product of facet slacks for Dirichlet problems.
fn initial_guess(mesh: &TriMesh, bc: BoundaryCondition, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &mesh.nodes {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut coeffs = Vec::new();
    for deg in 0..=3usize {
        for i in 0..=deg {
            let c = standard_normal(rng) / (1.0 + deg as f64);
            coeffs.push((i, deg - i, c));
        }
    }
    if bc == BoundaryCondition::Dirichlet {
        // keep the profile positive so the start sits near the first mode
        coeffs[0].2 = 3.0 + rng.gen::<f64>();
    }
    let facets = mesh.domain.facets();
    let c = mesh.domain.centroid();
    let slack0: Vec<f64> = facets
        .iter()
        .map(|f| f.offset - f.normal[0] * c[0] - f.normal[1] * c[1])
        .collect();
    mesh.nodes
        .iter()
        .map(|p| {
            let x = 2.0 * (p[0] - lo[0]) / (hi[0] - lo[0]) - 1.0;
            let y = 2.0 * (p[1] - lo[1]) / (hi[1] - lo[1]) - 1.0;
            let poly: f64 = coeffs
                .iter()
                .map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32))
                .sum();
            match bc {
                BoundaryCondition::Neumann => poly,
                BoundaryCondition::Dirichlet => {
                    let bump: f64 = facets
                        .iter()
                        .zip(&slack0)
                        .map(|(f, s0)| {
                            ((f.offset - f.normal[0] * p[0] - f.normal[1] * p[1]) / s0).max(0.0)
                        })
                        .product();
                    poly * bump
                }
            }
        })
        .collect()
}

fn stage_norms(spec: &NormSpec, eps_schedule: &[f64]) -> Result<Vec<Norm>> {
    let mut norms = eps_schedule
        .iter()
        .map(|&e| Norm::new(&regularize(spec, e)?))
        .collect::<Result<Vec<_>>>()?;
    norms.push(Norm::new(spec)?);
    Ok(norms)
}

fn check_problem(problem: &EigenProblem) -> Result<()> {
    problem.solver.validate()?;
    problem.spec.validate()?;
    let free = match problem.bc {
        BoundaryCondition::Dirichlet => {
            problem.mesh.nodes.len() - problem.mesh.boundary_nodes.len()
        }
        BoundaryCondition::Neumann => problem.mesh.nodes.len().saturating_sub(1),
    };
    if free < 2 {
        return Err(Error::config(format!(
            "{} problem on this mesh has {free} free degrees of freedom; refine the mesh",
            problem.bc.as_str()
        )));
    }
    Ok(())
}

/// Best of `restarts` seeded runs, each going through the regularization
/// stages and a final stage with the base norm.
pub fn solve_first_eigen(problem: &EigenProblem) -> Result<EigenResult> {
    check_problem(problem)?;
    let asm = Assembly::new(&problem.mesh)?;
    let norms = stage_norms(&problem.spec, &problem.solver.eps_schedule)?;
    let mut best: Option<EigenResult> = None;
    let mut lambdas = Vec::with_capacity(problem.solver.restarts);
    for r in 0..problem.solver.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.solver.seed);
        rng.set_stream(r as u64);
        let start = initial_guess(&problem.mesh, problem.bc, &mut rng);
        let res = run_stages(problem, &asm, &norms, start)?;
        lambdas.push(res.lambda);
        if best.as_ref().is_none_or(|b| res.lambda < b.lambda) {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_lambdas = lambdas;
    Ok(best)
}

/// Single run from a given start through all stages.
pub fn solve_from(problem: &EigenProblem, start: Vec<f64>) -> Result<EigenResult> {
    check_problem(problem)?;
    check_len(&problem.mesh, &start)?;
    let asm = Assembly::new(&problem.mesh)?;
    let norms = stage_norms(&problem.spec, &problem.solver.eps_schedule)?;
    let mut res = run_stages(problem, &asm, &norms, start)?;
    res.restart_lambdas = vec![res.lambda];
    Ok(res)
}

fn run_stages(
    problem: &EigenProblem,
    asm: &Assembly,
    norms: &[Norm],
    start: Vec<f64>,
) -> Result<EigenResult> {
    let mut trace = Vec::new();
    let mut u = start;
    let mut outcome = None;
    let mut iterations = 0;
    for (stage, norm) in norms.iter().enumerate() {
        let mut m = Minimizer {
            asm,
            norm,
            bc: problem.bc,
            trace: &mut trace,
            stage,
        };
        let o = m.run(u, problem.solver.max_iters, problem.solver.grad_tol)?;
        iterations += o.iterations;
        u = o.point.u.clone();
        outcome = Some(o);
    }
    let o = outcome.expect("at least the base stage");
    let norm = norms.last().expect("base norm");
    finish(
        problem,
        asm,
        norm,
        o.point.u,
        trace,
        o.stop,
        iterations,
        o.grad_norm / o.point.e.max(1e-300),
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &EigenProblem,
    asm: &Assembly,
    norm: &Norm,
    mut u: Vec<f64>,
    trace: Vec<TraceEntry>,
    stop: StopReason,
    iterations: usize,
    grad_norm: f64,
) -> Result<EigenResult> {
    let (min, max) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let scale = match problem.bc {
        // min u = −1 with |min u| ≥ max u
        BoundaryCondition::Neumann => {
            if -min >= max {
                -min
            } else {
                -max
            }
        }
        // sup u = 1
        BoundaryCondition::Dirichlet => {
            if max >= -min {
                max
            } else {
                min
            }
        }
    };
    if !(scale.abs() > 0.0) {
        return Err(Error::Numerical("eigenfunction vanished".into()));
    }
    for x in u.iter_mut() {
        *x /= scale;
    }
    asm.project(problem.bc, &mut u);
    let energy = asm.energy(norm, &u, None);
    let (mass, mean) = asm.mass(&u, None);
    let lambda = energy / mass;
    if !lambda.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite Rayleigh quotient {lambda}"
        )));
    }
    let fmax = (0..asm.triangle_count())
        .map(|t| norm.value(&asm.element_gradient(t, &u)))
        .fold(0.0, f64::max);
    let zero_area = (0..asm.triangle_count())
        .filter(|&t| norm.value(&asm.element_gradient(t, &u)) <= 1e-10 * fmax)
        .fold(0.0, |acc, t| acc + asm.area(t));
    Ok(EigenResult {
        lambda,
        nodal_values: u,
        energy,
        mass,
        mean: (problem.bc == BoundaryCondition::Neumann).then_some(mean),
        trace,
        converged: matches!(stop, StopReason::GradTol | StopReason::RoundoffFloor),
        stop_reason: stop,
        iterations,
        grad_norm,
        zero_gradient_fraction: zero_area / asm.total_area(),
        level: problem.mesh.refinement_level,
        restart_lambdas: Vec::new(),
    })
}

/// Solve on the first requested level, then refine and warm-start each later
/// level from the prolonged previous eigenfunction. Spaces are nested, so the
/// returned quotients are nonincreasing.
pub fn refine_and_solve(problem: &EigenProblem, levels: &[usize]) -> Result<Vec<EigenResult>> {
    if levels.is_empty() {
        return Err(Error::config("no refinement levels requested"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(format!(
            "levels must be strictly increasing, got {levels:?}"
        )));
    }
    if levels[0] < problem.mesh.refinement_level {
        return Err(Error::config(format!(
            "level {} is coarser than the problem mesh (level {})",
            levels[0], problem.mesh.refinement_level
        )));
    }
    if *levels.last().expect("nonempty") > crate::domain::MAX_LEVELS {
        return Err(Error::config(format!(
            "refinement level above {}",
            crate::domain::MAX_LEVELS
        )));
    }
    let mut mesh = problem.mesh.clone();
    while mesh.refinement_level < levels[0] {
        mesh = mesh.refine();
    }
    let mut sub = EigenProblem {
        mesh,
        ..problem.clone()
    };
    let mut out: Vec<EigenResult> = vec![solve_first_eigen(&sub)?];
    for &level in &levels[1..] {
        let mut u = out.last().expect("previous level").nodal_values.clone();
        while sub.mesh.refinement_level < level {
            sub.mesh = sub.mesh.refine();
            u = sub.mesh.prolong(&u);
        }
        // the warm start already sits past the regularization stages
        let warm = EigenProblem {
            solver: SolverOptions {
                eps_schedule: Vec::new(),
                ..sub.solver.clone()
            },
            ..sub.clone()
        };
        out.push(solve_from(&warm, u)?);
    }
    Ok(out)
}

/// `(4λ_{k+1} − λ_k)/3` for consecutive levels; assumes second-order
/// convergence in the mesh size.
pub fn richardson(lambdas: &[f64]) -> Vec<f64> {
    lambdas
        .windows(2)
        .map(|w| (4.0 * w[1] - w[0]) / 3.0)
        .collect()
}
