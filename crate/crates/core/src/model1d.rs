//! The one-dimensional comparison problem
//!
//! ```text
//! v'' − T v' = −λ v,   v(a) = −1,  v'(a) = 0,   T ≡ 0  or  T(t) = −(n−1)/t,
//! ```
//!
//! integrated up to the first zero `b` of `v'`. Every solve runs at `λ = 1`
//! in `s = √λ·t` and is rescaled on output.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `T ≡ 0`.
    TZero,
    /// `T(t) = −(n−1)/t`.
    TRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneDModel {
    pub n: usize,
    pub lambda: f64,
    pub kind: ModelKind,
    /// Left endpoint; `f64::INFINITY` stands for the `T ≡ 0` limit and is
    /// written as the string `"infinity"`.
    #[serde(
        serialize_with = "finite_or_string",
        deserialize_with = "number_or_infinity"
    )]
    pub a: f64,
}

fn finite_or_string<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str("infinity")
    }
}

fn number_or_infinity<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Word(String),
    }
    match Repr::deserialize(d)? {
        Repr::Number(x) => Ok(x),
        Repr::Word(w) if w == "infinity" => Ok(f64::INFINITY),
        Repr::Word(w) => Err(serde::de::Error::custom(format!(
            "expected a number or \"infinity\", got {w:?}"
        ))),
    }
}

impl OneDModel {
    pub fn radial(n: usize, lambda: f64, a: f64) -> Self {
        OneDModel {
            n,
            lambda,
            kind: ModelKind::TRadial,
            a,
        }
    }

    pub fn flat(lambda: f64) -> Self {
        OneDModel {
            n: 1,
            lambda,
            kind: ModelKind::TZero,
            a: 0.0,
        }
    }

    pub fn at_infinity(n: usize, lambda: f64) -> Self {
        OneDModel {
            n,
            lambda,
            kind: ModelKind::TZero,
            a: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("model dimension n must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "model lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.a >= 0.0) {
            return Err(Error::config(format!(
                "model start a must be non-negative, got {}",
                self.a
            )));
        }
        if self.a.is_infinite() && self.kind == ModelKind::TRadial {
            return Err(Error::config(
                "a = infinity is only meaningful for the T = 0 model",
            ));
        }
        Ok(())
    }

    fn damping(&self) -> f64 {
        match self.kind {
            ModelKind::TZero => 0.0,
            ModelKind::TRadial => (self.n - 1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneDSolution {
    pub model: OneDModel,
    /// Increasing samples on `[a, b]`.
    pub t_grid: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    /// `v''` from the ODE, used as slopes when interpolating `v'`.
    pub v_second: Vec<f64>,
    /// First zero of `v'` after `a`.
    pub b: f64,
    pub delta: f64,
    /// `v(b)`.
    pub m: f64,
}

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-14;
const MAX_STEP: f64 = 0.02;
const SERIES_STEP: f64 = 1e-4;
const ROOT_TOL: f64 = 1e-13;
const MAX_STEPS: usize = 1_000_000;

// Dormand-Prince 5(4)
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `(v, v')` as functions of `r = s − s0`, with `s0` the start in the scaled
/// variable; offsetting keeps resolution when `s0` is huge.
struct Scaled {
    s0: f64,
    k: f64,
}

impl Scaled {
    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let s = self.s0 + r;
        let drag = if self.k == 0.0 {
            0.0
        } else {
            self.k / s * y[1]
        };
        [y[1], -drag - y[0]]
    }

    /// One Dormand-Prince step: the fifth-order update and an error estimate.
    fn step(&self, r: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
        let mut k = [[0.0; 2]; 7];
        k[0] = self.rhs(r, y);
        for i in 1..7 {
            let mut yi = y;
            for j in 0..i {
                for c in 0..2 {
                    yi[c] += h * A[i][j] * k[j][c];
                }
            }
            k[i] = self.rhs(r + C[i] * h, yi);
        }
        let mut out = y;
        let mut err = [0.0; 2];
        for j in 0..7 {
            for c in 0..2 {
                if j < 6 {
                    out[c] += h * A[6][j] * k[j][c];
                }
                err[c] += h * E[j] * k[j][c];
            }
        }
        (out, err)
    }
}

/// Integrate at `λ = 1` from `s0`; returns `(r, v, w)` samples ending at the
/// first zero of `w`.
fn integrate(s0: f64, k: f64, n: usize) -> Result<Vec<(f64, f64, f64)>> {
    let sys = Scaled { s0, k };
    let mut samples = vec![(0.0, -1.0, 0.0)];
    let (mut r, mut y) = (0.0, [-1.0, 0.0]);
    if s0 == 0.0 && k != 0.0 {
        // v = −1 + s²/(2n) − s⁴/(8n(n+2)) + O(s⁶) steps over the 1/s singularity
        let (nf, h) = (n as f64, SERIES_STEP);
        y = [
            -1.0 + h * h / (2.0 * nf) - h.powi(4) / (8.0 * nf * (nf + 2.0)),
            h / nf - h.powi(3) / (2.0 * nf * (nf + 2.0)),
        ];
        r = h;
        samples.push((r, y[0], y[1]));
    }
    let mut h = 1e-3;
    for _ in 0..MAX_STEPS {
        let (next, err) = sys.step(r, y, h);
        let scale = |c: usize| ATOL + RTOL * y[c].abs().max(next[c].abs());
        let e = ((err[0] / scale(0)).powi(2) + (err[1] / scale(1)).powi(2)).sqrt() / 2f64.sqrt();
        if !e.is_finite() {
            return Err(Error::Integration {
                t: s0 + r,
                step: h,
                detail: "non-finite error estimate".into(),
            });
        }
        if e > 1.0 {
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            if h < 1e-14 {
                return Err(Error::Integration {
                    t: s0 + r,
                    step: h,
                    detail: "step size underflow".into(),
                });
            }
            continue;
        }
        if y[1] > 0.0 && next[1] <= 0.0 {
            // bisect on the fraction of this step, restarting from the left end
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut end = next;
            while (hi - lo) * h > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                let (ym, _) = sys.step(r, y, mid * h);
                if ym[1] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    end = ym;
                }
            }
            samples.push((r + hi * h, end[0], 0.0));
            return Ok(samples);
        }
        r += h;
        y = next;
        samples.push((r, y[0], y[1]));
        h = (h * (0.9 * e.max(1e-10).powf(-0.2)).min(5.0)).min(MAX_STEP);
    }
    Err(Error::Integration {
        t: s0 + r,
        step: h,
        detail: format!("no zero of v' within {MAX_STEPS} steps"),
    })
}

/// Integrate the model. A `T ≡ 0` model is translation invariant, so the
/// `a = ∞` limit is represented by the solution started at `t = 0`.
pub fn solve_model(model: &OneDModel) -> Result<OneDSolution> {
    model.validate()?;
    let sl = model.lambda.sqrt();
    let a = if model.a.is_finite() { model.a } else { 0.0 };
    let k = model.damping();
    let samples = integrate(a * sl, k, model.n)?;
    let last = samples.len() - 1;
    let delta = samples[last].0 / sl;
    let mut sol = OneDSolution {
        model: *model,
        t_grid: Vec::with_capacity(samples.len()),
        v: Vec::with_capacity(samples.len()),
        v_prime: Vec::with_capacity(samples.len()),
        v_second: Vec::with_capacity(samples.len()),
        b: a + delta,
        delta,
        m: samples[last].1,
    };
    let s0 = a * sl;
    for (i, &(r, v, w)) in samples.iter().enumerate() {
        let s = s0 + r;
        // v'' at λ = 1; at s = 0 the radial limit is 1/n
        let acc = if k == 0.0 {
            -v
        } else if s == 0.0 {
            1.0 / model.n as f64
        } else {
            -k / s * w - v
        };
        sol.t_grid.push(if i == last { sol.b } else { a + r / sl });
        sol.v.push(v);
        sol.v_prime.push(sl * w);
        sol.v_second.push(model.lambda * acc);
    }
    Ok(sol)
}

/// `δ(a) = b(a) − a`; exactly `π/√λ` at `a = ∞`.
pub fn delta(model: &OneDModel) -> Result<f64> {
    model.validate()?;
    if model.a.is_infinite() {
        return Ok(std::f64::consts::PI / model.lambda.sqrt());
    }
    Ok(solve_model(model)?.delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMatch {
    pub model: OneDModel,
    /// `m(a)` of the returned model.
    pub m: f64,
    /// The target was below `m(0)` and `a = 0` was returned instead.
    pub clamped: bool,
}

/// Find the radial model whose maximum `m(a)` equals `umax`.
pub fn match_model(n: usize, lambda: f64, umax: f64) -> Result<ModelMatch> {
    if !(umax > 0.0 && umax <= 1.0) {
        return Err(Error::domain(format!(
            "umax must lie in (0, 1], got {umax}"
        )));
    }
    if umax >= 1.0 - 1e-9 {
        return Ok(ModelMatch {
            model: OneDModel::at_infinity(n, lambda),
            m: 1.0,
            clamped: false,
        });
    }
    let probe = OneDModel::radial(n, lambda, 0.0);
    probe.validate()?;
    let sl = lambda.sqrt();
    let m_at = |s: f64| -> Result<f64> {
        Ok(integrate(s, probe.damping(), n)?
            .last()
            .map_or(f64::NAN, |x| x.1))
    };
    let m0 = m_at(0.0)?;
    if umax <= m0 {
        return Ok(ModelMatch {
            model: probe,
            m: m0,
            clamped: umax < m0 - 1e-9,
        });
    }
    // a geometric grid in s = a·√λ, scanned for the first sign change
    let mut table = vec![(0.0, m0)];
    for k in -12..=48 {
        let s = 10f64.powf(k as f64 / 4.0);
        let m = m_at(s)?;
        let (s_prev, m_prev) = *table.last().unwrap();
        table.push((s, m));
        if (m_prev - umax) * (m - umax) <= 0.0 {
            let (mut lo, mut hi, mut m_lo) = (s_prev, s, m_prev);
            let (mut best_s, mut best_m) = if (m - umax).abs() < (m_prev - umax).abs() {
                (s, m)
            } else {
                (s_prev, m_prev)
            };
            while (best_m - umax).abs() > 1e-10 && hi - lo > 1e-15 * hi {
                let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
                let mm = m_at(mid)?;
                if (mm - umax).abs() < (best_m - umax).abs() {
                    (best_s, best_m) = (mid, mm);
                }
                if (m_lo - umax) * (mm - umax) <= 0.0 {
                    hi = mid;
                } else {
                    (lo, m_lo) = (mid, mm);
                }
            }
            return Ok(ModelMatch {
                model: OneDModel::radial(n, lambda, best_s / sl),
                m: best_m,
                clamped: false,
            });
        }
    }
    Err(Error::Bracketing {
        target: umax,
        table: table.into_iter().map(|(s, m)| (s / sl, m)).collect(),
    })
}

const CLAMP_TOL: f64 = 1e-12;

impl OneDSolution {
    /// `v'(v⁻¹(u))`.
    ///
    /// Both `v` and `v'` are interpolated as cubic Hermite functions of `t`
    /// with exact slopes `v'` and `v''`, which stays accurate at the ends
    /// where `v'` behaves like a square root of `u − v(a)`.
    pub fn v_prime_of_u(&self, u: f64) -> Result<f64> {
        let (lo, hi) = (self.v[0], self.m);
        if u < lo - CLAMP_TOL || u > hi + CLAMP_TOL || u.is_nan() {
            return Err(Error::domain(format!(
                "u = {u} outside the model range [{lo}, {hi}]"
            )));
        }
        if u <= lo || u >= hi {
            return Ok(0.0);
        }
        let i = self
            .v
            .partition_point(|&x| x <= u)
            .clamp(1, self.v.len() - 1)
            - 1;
        let (t0, t1) = (self.t_grid[i], self.t_grid[i + 1]);
        let h = t1 - t0;
        let v_at = |th: f64| {
            hermite(
                th,
                h,
                self.v[i],
                self.v[i + 1],
                self.v_prime[i],
                self.v_prime[i + 1],
            )
        };
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if v_at(mid) < u {
                a = mid;
            } else {
                b = mid;
            }
        }
        let th = 0.5 * (a + b);
        let w = hermite(
            th,
            h,
            self.v_prime[i],
            self.v_prime[i + 1],
            self.v_second[i],
            self.v_second[i + 1],
        );
        Ok(w.max(0.0))
    }

    /// `max v'`, attained at a grid sample up to interpolation error.
    pub fn max_v_prime(&self) -> f64 {
        self.v_prime.iter().copied().fold(0.0, f64::max)
    }
}

/// Cubic Hermite interpolant on `[0, h]` at fraction `th`.
fn hermite(th: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let (t2, t3) = (th * th, th * th * th);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + th) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}
