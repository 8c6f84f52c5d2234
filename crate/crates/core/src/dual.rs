//! Dual norm `F⁰(x) = sup ⟨x,ξ⟩ / F(ξ)`, anisotropic distance and Wulff balls.
//!
//! Families with a known conjugate (euclidean, p-norms, quadratic forms) are
//! evaluated in closed form. Everything else goes through a multistart
//! projected ascent on the `F`-unit sphere, which reports a certified bracket
//! `[lower, lower + certified_gap]` around the true value:
//!
//! * lower: `⟨x, ξ*⟩` at the best feasible iterate (`F(ξ*) = 1`);
//! * upper: with `g = F_ξ(ξ*)`, `F⁰(g) = 1`, so writing `x = c·g + r` gives
//!   `F⁰(x) ≤ |c| + |r| / m` where `m` bounds `F` from below on the Euclidean
//!   unit sphere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::norms::{Norm, NormSpec};

/// Seed used by the convenience wrappers that take no explicit seed.
pub const DEFAULT_DUAL_SEED: u64 = 0x5eed_d0a1;

const RANDOM_STARTS: usize = 16;
const MAX_ASCENT_ITERS: usize = 400;
/// Ascent budget per start before the best one is polished.
const SCOUT_ITERS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct DualEval {
    pub value: f64,
    /// A maximizer of `⟨x,ξ⟩/F(ξ)` normalized to `F(ξ) = 1`.
    pub maximizer: Vec<f64>,
    /// Upper bound on `F⁰(x) − value`; zero for closed forms.
    pub certified_gap: f64,
}

/// `F⁰(x)`; closed form when available, certified numerical sup otherwise.
pub fn dual_norm(spec: &NormSpec, x: &[f64]) -> Result<DualEval> {
    let norm = Norm::new(spec)?;
    Ok(dual_eval(&norm, x, DEFAULT_DUAL_SEED))
}

/// [`dual_norm`] on an already validated norm with a caller-chosen seed for the
/// numerical fallback.
pub fn dual_eval(norm: &Norm, x: &[f64], seed: u64) -> DualEval {
    match closed_form(norm, x) {
        Some(d) => d,
        None => numerical_dual(norm, x, seed),
    }
}

/// `F⁰(x)` value only.
#[inline]
pub fn dual_value(norm: &Norm, x: &[f64]) -> f64 {
    match closed_form_value(norm, x) {
        Some(v) => v,
        None => numerical_dual(norm, x, DEFAULT_DUAL_SEED).value,
    }
}

/// `d_F(x1, x2) = F⁰(x2 − x1)`.
pub fn f_distance(spec: &NormSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let norm = Norm::new(spec)?;
    check_same_len(x1, x2)?;
    Ok(distance(&norm, x1, x2))
}

pub fn distance(norm: &Norm, x1: &[f64], x2: &[f64]) -> f64 {
    let d: Vec<f64> = x2.iter().zip(x1).map(|(b, a)| b - a).collect();
    dual_value(norm, &d)
}

/// `F⁰(y − center) ≤ r`.
pub fn wulff_contains(spec: &NormSpec, center: &[f64], r: f64, y: &[f64]) -> Result<bool> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!(
            "Wulff ball radius must be nonnegative, got {r}"
        )));
    }
    let norm = Norm::new(spec)?;
    check_same_len(center, y)?;
    Ok(distance(&norm, center, y) <= r)
}

/// `F(ξ)F⁰(η) − ⟨ξ,η⟩`, nonnegative by the anisotropic Cauchy–Schwarz inequality.
pub fn cauchy_schwarz_gap(spec: &NormSpec, xi: &[f64], eta: &[f64]) -> Result<f64> {
    let norm = Norm::new(spec)?;
    check_same_len(xi, eta)?;
    Ok(cs_gap(&norm, xi, eta))
}

pub fn cs_gap(norm: &Norm, xi: &[f64], eta: &[f64]) -> f64 {
    norm.value(xi) * dual_value(norm, eta) - dot(xi, eta)
}

/// Numerical sup even for families that have a closed form; used to
/// cross-check the closed forms.
pub fn numerical_dual(norm: &Norm, x: &[f64], seed: u64) -> DualEval {
    let n = x.len();
    let xnorm = dot(x, x).sqrt();
    if xnorm == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let f = norm.value(&e);
        e[0] /= f;
        return DualEval {
            value: 0.0,
            maximizer: e,
            certified_gap: 0.0,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(2 * n + RANDOM_STARTS);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            starts.push(e);
        }
    }
    for _ in 0..RANDOM_STARTS {
        starts.push((0..n).map(|_| standard_normal(&mut rng)).collect());
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts {
        let (h, xi) = ascend(norm, x, s, SCOUT_ITERS);
        if best.as_ref().is_none_or(|(bh, _)| h > *bh) {
            best = Some((h, xi));
        }
    }
    let (mut lower, mut xi) = best.expect("at least one start");
    // Every candidate's quotient is a lower bound and the certificate holds at
    // any ξ, so the polished point is kept when it ties up to rounding: its
    // better-aligned gradient tightens the certificate.
    let polished = newton_polish(norm, x, &xi).filter(|(h, _)| *h >= lower * (1.0 - 1e-14));
    let (h, p) = match polished {
        Some(hp) => hp,
        None => ascend(norm, x, xi.clone(), MAX_ASCENT_ITERS),
    };
    if h >= lower * (1.0 - 1e-14) {
        lower = lower.max(h);
        xi = p;
    }

    let upper = certified_upper(norm, x, &xi);
    DualEval {
        value: lower,
        maximizer: xi,
        certified_gap: (upper - lower).max(0.0),
    }
}

fn closed_form_value(norm: &Norm, x: &[f64]) -> Option<f64> {
    match norm.spec() {
        NormSpec::Euclidean => Some(dot(x, x).sqrt()),
        NormSpec::PNorm { .. } | NormSpec::Quadratic { .. } => Some(norm.dual_norm()?.value(x)),
        NormSpec::Regularized { .. } => None,
    }
}

fn closed_form(norm: &Norm, x: &[f64]) -> Option<DualEval> {
    let value = closed_form_value(norm, x)?;
    let n = x.len();
    let raw: Vec<f64> = if value == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    } else {
        match norm.spec() {
            NormSpec::Euclidean => x.to_vec(),
            NormSpec::PNorm { p } => {
                let q = p / (p - 1.0);
                // ξᵢ = sgn(xᵢ)|xᵢ/F⁰(x)|^{q-1}
                x.iter()
                    .map(|v| (v / value).abs().powf(q - 1.0).copysign(*v))
                    .collect()
            }
            NormSpec::Quadratic { .. } => {
                let dual = norm.dual_norm()?;
                let mut g = vec![0.0; n];
                dual.half_sq_grad(x, &mut g);
                g
            }
            NormSpec::Regularized { .. } => unreachable!(),
        }
    };
    let f = norm.value(&raw);
    let maximizer = raw.iter().map(|v| v / f).collect();
    Some(DualEval {
        value,
        maximizer,
        certified_gap: 0.0,
    })
}

/// Projected gradient ascent of `h(ξ) = ⟨x,ξ⟩/F(ξ)` on `{F = 1}` with Armijo backtracking.
fn ascend(norm: &Norm, x: &[f64], start: Vec<f64>, iters: usize) -> (f64, Vec<f64>) {
    let n = x.len();
    let xnorm = dot(x, x).sqrt();
    let mut xi = project(norm, start);
    let mut h = dot(x, &xi);
    let mut step = 1.0 / xnorm;
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for _ in 0..iters {
        let Ok((_, fxi)) = norm.value_grad(&xi) else {
            break;
        };
        for i in 0..n {
            grad[i] = x[i] - h * fxi[i];
        }
        let g2 = dot(&grad, &grad);
        if g2.sqrt() <= 1e-15 * xnorm {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = xi[i] + step * grad[i];
            }
            let f = norm.value(&trial);
            if f > 0.0 {
                let ht = dot(x, &trial) / f;
                if ht >= h + 1e-4 * step * g2 {
                    trial.iter_mut().for_each(|v| *v /= f);
                    std::mem::swap(&mut xi, &mut trial);
                    h = ht;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
    }
    (h, xi)
}

/// Newton iterations on `∇(½F²)(ξ) = x`, whose solution is parallel to the maximizer.
fn newton_polish(norm: &Norm, x: &[f64], start: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = x.len();
    let scale = dot(x, start);
    if !(scale > 0.0) {
        return None;
    }
    let mut xi: Vec<f64> = start.iter().map(|v| v * scale).collect();
    let mut g = vec![0.0; n];
    for _ in 0..8 {
        norm.half_sq_grad(&xi, &mut g);
        let res = nalgebra::DVector::from_fn(n, |i, _| g[i] - x[i]);
        if res.norm() <= 1e-15 * dot(x, x).sqrt() {
            break;
        }
        let t = norm.tensors(&xi, false).ok()?;
        let delta = t.a.lu().solve(&res)?;
        for i in 0..n {
            xi[i] -= delta[i];
        }
    }
    let xi = project(norm, xi);
    Some((dot(x, &xi), xi))
}

fn certified_upper(norm: &Norm, x: &[f64], xi: &[f64]) -> f64 {
    let Ok((_, g)) = norm.value_grad(xi) else {
        return f64::INFINITY;
    };
    let c = dot(x, &g) / dot(&g, &g);
    let r: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - c * b).collect();
    let m = norm.unit_sphere_lower_bound(x.len());
    c.abs() + dot(&r, &r).sqrt() / m
}

fn project(norm: &Norm, mut v: Vec<f64>) -> Vec<f64> {
    let f = norm.value(&v);
    v.iter_mut().for_each(|c| *c /= f);
    v
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::domain(format!(
            "mismatched vector lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Box–Muller standard normal sample.
pub(crate) fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::regularize;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Brute-force sup over sampled directions in the plane.
    fn brute_dual(norm: &Norm, x: &[f64], samples: usize) -> f64 {
        (0..samples)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / samples as f64;
                let xi = [th.cos(), th.sin()];
                (dot(x, &xi) / norm.value(&xi)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_examples() {
        let d = dual_norm(&NormSpec::Euclidean, &[3.0, 4.0]).unwrap();
        assert_relative_eq!(d.value, 5.0);
        assert_eq!(d.certified_gap, 0.0);

        let d = dual_norm(&NormSpec::pnorm(4.0), &[1.0, 1.0]).unwrap();
        assert_relative_eq!(d.value, 2f64.powf(0.75), max_relative = 1e-12);
        assert!((d.value - 1.681793).abs() < 1e-6);
        let norm = Norm::new(&NormSpec::pnorm(4.0)).unwrap();
        let brute = brute_dual(&norm, &[1.0, 1.0], 1_000_000);
        assert!((brute - d.value).abs() < 1e-4);
        // maximizer attains the value
        let m = &d.maximizer;
        assert_relative_eq!(norm.value(m), 1.0, max_relative = 1e-14);
        assert_relative_eq!(dot(m, &[1.0, 1.0]), d.value, max_relative = 1e-12);
    }

    #[test]
    fn p2_is_self_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let a = dual_norm(&NormSpec::pnorm(2.0), &x).unwrap().value;
            let b = dual_norm(&NormSpec::Euclidean, &x).unwrap().value;
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn numerical_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for spec in [
            NormSpec::pnorm(1.5),
            NormSpec::pnorm(3.0),
            NormSpec::pnorm(4.0),
            NormSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
        ] {
            let norm = Norm::new(&spec).unwrap();
            for k in 0..50 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let exact = dual_eval(&norm, &x, 0).value;
                let num = numerical_dual(&norm, &x, k);
                assert!(
                    (num.value - exact).abs() <= 1e-9 * exact,
                    "{}: {} vs {exact}",
                    spec.label(),
                    num.value
                );
                assert!(num.value <= exact * (1.0 + 1e-12));
                assert!(num.value + num.certified_gap >= exact * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn regularized_dual_is_certified() {
        let spec = regularize(&NormSpec::pnorm(4.0), 1e-2).unwrap();
        let norm = Norm::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let d = dual_norm(&spec, &x).unwrap();
            assert!(d.certified_gap <= 1e-8 * d.value, "gap {}", d.certified_gap);
            let brute = brute_dual(&norm, &x, 200_000);
            assert!((brute - d.value).abs() <= 1e-6 * d.value);
        }
    }

    #[test]
    fn quadratic_dual_is_inverse_quadratic() {
        let a = vec![vec![3.0, -1.0], vec![-1.0, 2.0]];
        let spec = NormSpec::quadratic(a);
        let inv = NormSpec::quadratic(vec![vec![0.4, 0.2], vec![0.2, 0.6]]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let d = dual_norm(&spec, &x).unwrap().value;
            let e = crate::norms::eval_norm(&inv, &x).unwrap();
            assert!((d - e).abs() <= 1e-10 * e);
        }
    }

    #[test]
    fn distance_and_wulff_examples() {
        assert_relative_eq!(
            f_distance(&NormSpec::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            5.0
        );
        assert_eq!(
            f_distance(&NormSpec::pnorm(3.0), &[0.7, -0.2], &[0.7, -0.2]).unwrap(),
            0.0
        );
        assert_relative_eq!(
            f_distance(&NormSpec::pnorm(4.0), &[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            2f64.powf(0.75),
            max_relative = 1e-12
        );
        assert!(wulff_contains(&NormSpec::Euclidean, &[0.0, 0.0], 1.0, &[0.6, 0.8]).unwrap());
        assert!(wulff_contains(&NormSpec::pnorm(3.0), &[0.3, 0.1], 0.0, &[0.3, 0.1]).unwrap());
        assert!(!wulff_contains(&NormSpec::pnorm(4.0), &[0.0, 0.0], 1.0, &[0.9, 0.9]).unwrap());
        assert!(matches!(
            wulff_contains(&NormSpec::Euclidean, &[0.0, 0.0], -1.0, &[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cauchy_schwarz_examples() {
        assert_eq!(
            cauchy_schwarz_gap(&NormSpec::Euclidean, &[1.0, 0.0], &[1.0, 0.0]).unwrap(),
            0.0
        );
        assert_relative_eq!(
            cauchy_schwarz_gap(&NormSpec::Euclidean, &[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            1.0
        );
        // the dual maximizer for η makes the inequality tight
        let spec = NormSpec::pnorm(4.0);
        let eta = [1.0, 2.0];
        let d = dual_norm(&spec, &eta).unwrap();
        let gap = cauchy_schwarz_gap(&spec, &d.maximizer, &eta).unwrap();
        assert!(gap.abs() <= 1e-8, "{gap}");
    }

    #[test]
    fn triangle_inequality_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for spec in [
            NormSpec::pnorm(1.5),
            NormSpec::pnorm(4.0),
            NormSpec::Euclidean,
        ] {
            let norm = Norm::new(&spec).unwrap();
            for _ in 0..1000 {
                let p: Vec<[f64; 2]> = (0..3)
                    .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                    .collect();
                let ab = distance(&norm, &p[0], &p[1]);
                let bc = distance(&norm, &p[1], &p[2]);
                let ac = distance(&norm, &p[0], &p[2]);
                assert!(ac <= ab + bc + 1e-10);
                assert_eq!(ab, distance(&norm, &p[1], &p[0]));
            }
        }
    }
}
