//! Anisotropic norms `F` and the derivative tensors of `½F²`.
//!
//! Every family is handled through `G = ½F²`, which is smooth away from the
//! origin for all supported families. The coefficient matrix of the
//! Finsler-Laplacian is `a = ∇²G` and the third-order tensor is `a3 = ∇³G`;
//! `F_ξ = ∇G / F`. All derivatives are closed-form per family.
//!
//! Adding a family means supplying `G`, `∇G`, `∇²G` and `∇³G` in [`Kind`] and a
//! lower bound for `F` on the Euclidean unit sphere.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbolic description of an even, 1-homogeneous norm on `ℝⁿ`.
///
/// The dimension is implied by the argument vectors except for
/// [`NormSpec::Quadratic`], whose matrix fixes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "family",
    rename_all = "lowercase",
    deny_unknown_fields,
    from = "RawSpec"
)]
pub enum NormSpec {
    /// `F(ξ) = |ξ|`.
    Euclidean,
    /// `F(ξ) = (Σ|ξᵢ|^p)^{1/p}` with `p > 1`.
    #[serde(rename = "pnorm")]
    PNorm { p: f64 },
    /// `F(ξ) = √(ξᵀAξ)` with `A` symmetric positive definite.
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    /// `F(ξ) = √(base(ξ)² + eps·|ξ|²)`.
    Regularized { base: Box<NormSpec>, eps: f64 },
}

// Serde accepts stray keys on unit variants of internally tagged enums, so
// deserialization goes through a copy whose euclidean variant is a struct.
#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum RawSpec {
    Euclidean {},
    #[serde(rename = "pnorm")]
    PNorm {
        p: f64,
    },
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    Regularized {
        base: Box<NormSpec>,
        eps: f64,
    },
}

impl From<RawSpec> for NormSpec {
    fn from(raw: RawSpec) -> Self {
        match raw {
            RawSpec::Euclidean {} => NormSpec::Euclidean,
            RawSpec::PNorm { p } => NormSpec::PNorm { p },
            RawSpec::Quadratic { a } => NormSpec::Quadratic { a },
            RawSpec::Regularized { base, eps } => NormSpec::Regularized { base, eps },
        }
    }
}

impl NormSpec {
    pub fn pnorm(p: f64) -> Self {
        NormSpec::PNorm { p }
    }

    pub fn quadratic(a: Vec<Vec<f64>>) -> Self {
        NormSpec::Quadratic { a }
    }

    /// Short human-readable label used in tables and reports.
    pub fn label(&self) -> String {
        match self {
            NormSpec::Euclidean => "euclidean".to_string(),
            NormSpec::PNorm { p } => format!("pnorm(p={p})"),
            NormSpec::Quadratic { a } => {
                let rows: Vec<String> = a
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|v| format!("{v}"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .collect();
                format!("quadratic([{}])", rows.join("; "))
            }
            NormSpec::Regularized { base, eps } => {
                format!("regularized({}, eps={eps})", base.label())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        Norm::new(self).map(|_| ())
    }
}

/// `F(ξ)`, its gradient, `a = ∇²(½F²)` and optionally `a3 = ∇³(½F²)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTensors {
    pub value: f64,
    pub grad: Vec<f64>,
    pub a: DMatrix<f64>,
    pub a3: Option<Tensor3>,
}

impl NormTensors {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// `F_ξξ = (a − F_ξ F_ξᵀ) / F`.
    pub fn hess_f(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            (self.a[(i, j)] - self.grad[i] * self.grad[j]) / self.value
        })
    }
}

/// Dense symmetric 3-tensor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] += v;
    }

    /// Contraction in the last slot, `Σ_k T_ijk v_k`.
    pub fn contract_last(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| self.get(i, j, k) * v[k]).sum())
    }
}

/// A validated norm ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Norm {
    spec: NormSpec,
    kind: Kind,
    dual: OnceLock<Option<Box<Norm>>>,
}

#[derive(Debug, Clone)]
enum Kind {
    Euclidean,
    PNorm { p: f64, int_p: Option<i32> },
    Quadratic { a: DMatrix<f64>, min_eig: f64 },
    Regularized { base: Box<Kind>, eps: f64 },
}

impl Norm {
    pub fn new(spec: &NormSpec) -> Result<Self> {
        Ok(Norm {
            spec: spec.clone(),
            kind: Kind::compile(spec)?,
            dual: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }

    /// Dimension fixed by the specification, if any.
    pub fn dim(&self) -> Option<usize> {
        self.kind.dim()
    }

    /// `Hess(F²)` is positive definite away from the origin.
    pub fn is_strongly_convex(&self) -> bool {
        self.kind.is_strongly_convex()
    }

    /// `F(ξ)`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        (2.0 * self.kind.half_sq(xi)).sqrt()
    }

    /// `½F(ξ)²`.
    #[inline]
    pub fn half_sq(&self, xi: &[f64]) -> f64 {
        self.kind.half_sq(xi)
    }

    /// Returns `½F(ξ)²` and writes `∇(½F²)(ξ) = F·F_ξ` into `out`.
    /// At `ξ = 0` the gradient is the continuous extension `0`.
    #[inline]
    pub fn half_sq_grad(&self, xi: &[f64], out: &mut [f64]) -> f64 {
        self.kind.half_sq_grad(xi, out)
    }

    /// `F(ξ)` together with `F_ξ(ξ)`; requires `ξ ≠ 0`.
    pub fn value_grad(&self, xi: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; xi.len()];
        let half = self.kind.half_sq_grad(xi, &mut g);
        let f = (2.0 * half).sqrt();
        if f == 0.0 {
            return Err(Error::domain("gradient undefined at origin"));
        }
        g.iter_mut().for_each(|v| *v /= f);
        Ok((f, g))
    }

    pub fn tensors(&self, xi: &[f64], want_a3: bool) -> Result<NormTensors> {
        self.check_dim(xi)?;
        if xi.iter().all(|v| *v == 0.0) {
            return Err(Error::domain("tensors undefined at origin"));
        }
        self.kind.check_singular(xi, want_a3)?;
        let n = xi.len();
        let mut g = vec![0.0; n];
        let half = self.kind.half_sq_grad(xi, &mut g);
        let value = (2.0 * half).sqrt();
        let grad: Vec<f64> = g.iter().map(|v| v / value).collect();
        let mut a = DMatrix::zeros(n, n);
        self.kind.add_hess(xi, &mut a);
        let a3 = if want_a3 {
            let mut t = Tensor3::zeros(n);
            self.kind.add_third(xi, &mut t);
            Some(t)
        } else {
            None
        };
        Ok(NormTensors { value, grad, a, a3 })
    }

    /// A certified lower bound `m ≤ min_{|ξ|=1} F(ξ)` in dimension `n`.
    pub fn unit_sphere_lower_bound(&self, n: usize) -> f64 {
        self.kind.sphere_min(n)
    }

    /// Closed-form dual, when the family admits one.
    pub fn dual_spec(&self) -> Option<NormSpec> {
        match &self.spec {
            NormSpec::Euclidean => Some(NormSpec::Euclidean),
            NormSpec::PNorm { p } => Some(NormSpec::PNorm { p: p / (p - 1.0) }),
            NormSpec::Quadratic { .. } => {
                let Kind::Quadratic { a, .. } = &self.kind else {
                    unreachable!()
                };
                let inv = a.clone().try_inverse()?;
                let n = inv.nrows();
                // symmetrize against roundoff so the result validates
                let rows = (0..n)
                    .map(|i| (0..n).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)])).collect())
                    .collect();
                Some(NormSpec::Quadratic { a: rows })
            }
            NormSpec::Regularized { .. } => None,
        }
    }

    /// Compiled closed-form dual, built on first use.
    pub fn dual_norm(&self) -> Option<&Norm> {
        self.dual
            .get_or_init(|| {
                self.dual_spec()
                    .and_then(|d| Norm::new(&d).ok())
                    .map(Box::new)
            })
            .as_deref()
    }

    fn check_dim(&self, xi: &[f64]) -> Result<()> {
        match self.dim() {
            Some(n) if n != xi.len() => Err(Error::domain(format!(
                "vector of length {} passed to a norm on R^{n}",
                xi.len()
            ))),
            _ if xi.is_empty() => Err(Error::domain("empty vector")),
            _ => Ok(()),
        }
    }
}

/// `F(ξ)` for a specification; validates the specification first.
pub fn eval_norm(spec: &NormSpec, xi: &[f64]) -> Result<f64> {
    let norm = Norm::new(spec)?;
    norm.check_dim(xi)?;
    Ok(norm.value(xi))
}

pub fn eval_tensors(spec: &NormSpec, xi: &[f64], want_a3: bool) -> Result<NormTensors> {
    Norm::new(spec)?.tensors(xi, want_a3)
}

/// `√(F² + eps·|ξ|²)`, a strongly convex norm converging to `F` as `eps → 0`.
pub fn regularize(spec: &NormSpec, eps: f64) -> Result<NormSpec> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!(
            "regularization eps must be positive, got {eps}"
        )));
    }
    spec.validate()?;
    Ok(NormSpec::Regularized {
        base: Box::new(spec.clone()),
        eps,
    })
}

#[inline]
fn pow_abs(x: f64, p: f64, int_p: Option<i32>) -> f64 {
    match int_p {
        Some(k) => x.abs().powi(k),
        None => x.abs().powf(p),
    }
}

/// Scale-normalized p-norm pieces at `η = ξ/m`, `m = max|ξᵢ|`.
/// Returns `(m, S = Σ|ηᵢ|^p, t = S^{1/p})`.
#[inline]
fn pnorm_scaled(xi: &[f64], p: f64, int_p: Option<i32>) -> (f64, f64, f64) {
    let m = xi.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let s: f64 = xi.iter().map(|v| pow_abs(v / m, p, int_p)).sum();
    let t = if int_p == Some(2) {
        s.sqrt()
    } else {
        s.powf(1.0 / p)
    };
    (m, s, t)
}

/// `sgn(x)|x|^{p-1}`.
#[inline]
fn signed_pow(x: f64, p: f64, int_p: Option<i32>) -> f64 {
    let mag = match int_p {
        Some(k) => x.abs().powi(k - 1),
        None => x.abs().powf(p - 1.0),
    };
    if x < 0.0 {
        -mag
    } else if x > 0.0 {
        mag
    } else {
        0.0
    }
}

impl Kind {
    fn compile(spec: &NormSpec) -> Result<Kind> {
        match spec {
            NormSpec::Euclidean => Ok(Kind::Euclidean),
            NormSpec::PNorm { p } => {
                let p = *p;
                if !(p.is_finite() && p > 1.0) {
                    return Err(Error::config(format!("pnorm requires p > 1, got {p}")));
                }
                if p == 2.0 {
                    return Ok(Kind::Euclidean);
                }
                let int_p = (p.fract() == 0.0 && p <= 64.0).then_some(p as i32);
                Ok(Kind::PNorm { p, int_p })
            }
            NormSpec::Quadratic { a } => {
                let n = a.len();
                if n == 0 || a.iter().any(|r| r.len() != n) {
                    return Err(Error::config(
                        "quadratic norm matrix A must be square and nonempty",
                    ));
                }
                if a.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::config(
                        "quadratic norm matrix A has non-finite entries",
                    ));
                }
                let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
                let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                for i in 0..n {
                    for j in 0..i {
                        if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                            return Err(Error::config(format!(
                                "quadratic norm matrix A is not symmetric at ({i},{j})"
                            )));
                        }
                    }
                }
                let eig = SymmetricEigen::new(m.clone());
                let min_eig = eig
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if !(min_eig > 0.0) {
                    return Err(Error::config(format!(
                        "quadratic norm matrix A is not positive definite (smallest eigenvalue {min_eig})"
                    )));
                }
                Ok(Kind::Quadratic { a: m, min_eig })
            }
            NormSpec::Regularized { base, eps } => {
                let eps = *eps;
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::config(format!(
                        "regularization eps must be positive, got {eps}"
                    )));
                }
                Ok(Kind::Regularized {
                    base: Box::new(Kind::compile(base)?),
                    eps,
                })
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Kind::Quadratic { a, .. } => Some(a.nrows()),
            Kind::Regularized { base, .. } => base.dim(),
            _ => None,
        }
    }

    fn is_strongly_convex(&self) -> bool {
        !matches!(self, Kind::PNorm { .. })
    }

    fn sphere_min(&self, n: usize) -> f64 {
        match self {
            Kind::Euclidean => 1.0,
            Kind::PNorm { p, .. } => {
                if *p >= 2.0 {
                    (n as f64).powf(1.0 / p - 0.5)
                } else {
                    1.0
                }
            }
            Kind::Quadratic { min_eig, .. } => min_eig.sqrt(),
            Kind::Regularized { base, eps } => {
                let m = base.sphere_min(n);
                (m * m + eps).sqrt()
            }
        }
    }

    fn half_sq(&self, xi: &[f64]) -> f64 {
        match self {
            Kind::Euclidean => 0.5 * xi.iter().map(|v| v * v).sum::<f64>(),
            Kind::PNorm { p, int_p } => {
                let (m, _, t) = pnorm_scaled(xi, *p, *int_p);
                0.5 * (m * t) * (m * t)
            }
            Kind::Quadratic { a, .. } => {
                let n = xi.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += a[(i, j)] * xi[j];
                    }
                    acc += xi[i] * row;
                }
                0.5 * acc
            }
            Kind::Regularized { base, eps } => {
                base.half_sq(xi) + 0.5 * eps * xi.iter().map(|v| v * v).sum::<f64>()
            }
        }
    }

    fn half_sq_grad(&self, xi: &[f64], out: &mut [f64]) -> f64 {
        match self {
            Kind::Euclidean => {
                out.copy_from_slice(xi);
                0.5 * xi.iter().map(|v| v * v).sum::<f64>()
            }
            Kind::PNorm { p, int_p } => {
                let (m, s, t) = pnorm_scaled(xi, *p, *int_p);
                if m == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return 0.0;
                }
                // F^{2-p}(η) = t²/S; ∇G(ξ) = m·F^{2-p}(η)·sgn(ηᵢ)|ηᵢ|^{p-1}
                let coef = m * t * t / s;
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = coef * signed_pow(x / m, *p, *int_p);
                }
                0.5 * (m * t) * (m * t)
            }
            Kind::Quadratic { a, .. } => {
                let n = xi.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += a[(i, j)] * xi[j];
                    }
                    out[i] = row;
                    acc += xi[i] * row;
                }
                0.5 * acc
            }
            Kind::Regularized { base, eps } => {
                let g = base.half_sq_grad(xi, out);
                let mut sq = 0.0;
                for (o, x) in out.iter_mut().zip(xi) {
                    *o += eps * x;
                    sq += x * x;
                }
                g + 0.5 * eps * sq
            }
        }
    }

    fn check_singular(&self, xi: &[f64], want_a3: bool) -> Result<()> {
        match self {
            Kind::PNorm { p, .. } => {
                let has_zero = xi.contains(&0.0);
                if has_zero && *p < 2.0 {
                    return Err(Error::Singular(format!(
                        "pnorm with p = {p} < 2 has unbounded second derivatives at points with a zero coordinate; wrap the norm in `regularize`"
                    )));
                }
                if has_zero && want_a3 && *p < 3.0 {
                    return Err(Error::Singular(format!(
                        "pnorm with p = {p} < 3 has unbounded third derivatives at points with a zero coordinate; wrap the norm in `regularize`"
                    )));
                }
                Ok(())
            }
            Kind::Regularized { base, .. } => base.check_singular(xi, want_a3),
            _ => Ok(()),
        }
    }

    fn add_hess(&self, xi: &[f64], out: &mut DMatrix<f64>) {
        let n = xi.len();
        match self {
            Kind::Euclidean => {
                for i in 0..n {
                    out[(i, i)] += 1.0;
                }
            }
            Kind::PNorm { p, int_p } => {
                let (p, int_p) = (*p, *int_p);
                let (m, s, t) = pnorm_scaled(xi, p, int_p);
                let eta: Vec<f64> = xi.iter().map(|v| v / m).collect();
                let w: Vec<f64> = eta.iter().map(|v| signed_pow(*v, p, int_p)).collect();
                let f2mp = t * t / s; // F^{2-p}
                let f2m2p = t * t / (s * s); // F^{2-2p}
                for i in 0..n {
                    let d = if eta[i] == 0.0 {
                        0.0
                    } else {
                        eta[i].abs().powf(p - 2.0)
                    };
                    out[(i, i)] += (p - 1.0) * f2mp * d;
                    for j in 0..n {
                        out[(i, j)] += (2.0 - p) * f2m2p * w[i] * w[j];
                    }
                }
            }
            Kind::Quadratic { a, .. } => {
                *out += a;
            }
            Kind::Regularized { base, eps } => {
                base.add_hess(xi, out);
                for i in 0..n {
                    out[(i, i)] += eps;
                }
            }
        }
    }

    fn add_third(&self, xi: &[f64], out: &mut Tensor3) {
        let n = xi.len();
        match self {
            Kind::Euclidean | Kind::Quadratic { .. } => {}
            Kind::Regularized { base, .. } => base.add_third(xi, out),
            Kind::PNorm { p, int_p } => {
                let (p, int_p) = (*p, *int_p);
                let (m, s, t) = pnorm_scaled(xi, p, int_p);
                let eta: Vec<f64> = xi.iter().map(|v| v / m).collect();
                let w: Vec<f64> = eta.iter().map(|v| signed_pow(*v, p, int_p)).collect();
                let d: Vec<f64> = eta
                    .iter()
                    .map(|v| {
                        if *v == 0.0 {
                            0.0
                        } else {
                            v.abs().powf(p - 2.0)
                        }
                    })
                    .collect();
                // sgn(η)|η|^{p-3}; zero coordinates only reach here for p ≥ 3
                let e: Vec<f64> = eta
                    .iter()
                    .zip(&w)
                    .map(|(v, wi)| if *v == 0.0 { 0.0 } else { wi / (v * v) })
                    .collect();
                let fa = t * t / s;
                let fb = t * t / (s * s);
                let fc = t * t / (s * s * s);
                // a3 is (-1)-homogeneous: evaluate at η and divide by m
                let inv_m = 1.0 / m;
                let c_pair = (p - 1.0) * (2.0 - p) * fb * inv_m;
                let c_diag = (p - 1.0) * (p - 2.0) * fa * inv_m;
                let c_cube = (2.0 - p) * (2.0 - 2.0 * p) * fc * inv_m;
                for i in 0..n {
                    out.add(i, i, i, c_diag * e[i]);
                    for j in 0..n {
                        for k in 0..n {
                            let mut v = c_cube * w[i] * w[j] * w[k];
                            if i == j {
                                v += c_pair * w[k] * d[i];
                            }
                            if i == k {
                                v += c_pair * w[j] * d[i];
                            }
                            if j == k {
                                v += c_pair * w[i] * d[j];
                            }
                            out.add(i, j, k, v);
                        }
                    }
                }
            }
        }
    }
}
