use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::check::CheckReport;
use crate::error::{Error, Result};
use crate::norms::{Norm, NormSpec};

/// Position and first two derivatives of a curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub s: f64,
    pub pos: [f64; 2],
    pub d1: [f64; 2],
    pub d2: [f64; 2],
}

/// Closed-form curve families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveShape {
    /// `(a cos s, b sin s)`; a circle when `a = b`.
    Ellipse { a: f64, b: f64 },
    /// Star-shaped `r(s)(cos s, sin s)` with
    /// `r(s) = r0 + Σ_k (cos_k[k−1] cos ks + sin_k[k−1] sin ks)`.
    Radial {
        r0: f64,
        cos_k: Vec<f64>,
        sin_k: Vec<f64>,
    },
}

impl CurveShape {
    pub fn jet(&self, s: f64) -> CurveSample {
        match self {
            CurveShape::Ellipse { a, b } => {
                let (sn, cs) = s.sin_cos();
                CurveSample {
                    s,
                    pos: [a * cs, b * sn],
                    d1: [-a * sn, b * cs],
                    d2: [-a * cs, -b * sn],
                }
            }
            CurveShape::Radial { r0, cos_k, sin_k } => {
                let (mut r, mut r1, mut r2) = (*r0, 0.0, 0.0);
                for (k, (c, d)) in cos_k
                    .iter()
                    .zip(sin_k.iter().chain(std::iter::repeat(&0.0)))
                    .enumerate()
                {
                    let kf = (k + 1) as f64;
                    let (sn, cs) = (kf * s).sin_cos();
                    r += c * cs + d * sn;
                    r1 += kf * (-c * sn + d * cs);
                    r2 -= kf * kf * (c * cs + d * sn);
                }
                for (k, d) in sin_k.iter().enumerate().skip(cos_k.len()) {
                    let kf = (k + 1) as f64;
                    let (sn, cs) = (kf * s).sin_cos();
                    r += d * sn;
                    r1 += kf * d * cs;
                    r2 -= kf * kf * d * sn;
                }
                let (sn, cs) = s.sin_cos();
                CurveSample {
                    s,
                    pos: [r * cs, r * sn],
                    d1: [r1 * cs - r * sn, r1 * sn + r * cs],
                    d2: [(r2 - r) * cs - 2.0 * r1 * sn, (r2 - r) * sn + 2.0 * r1 * cs],
                }
            }
        }
    }
}

/// Counter-clockwise closed curve sampled on a uniform grid of `s ∈ [0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothBoundaryCurve {
    shape: Option<CurveShape>,
    samples: Vec<CurveSample>,
}

impl SmoothBoundaryCurve {
    pub fn circle(r: f64, samples: usize) -> Result<Self> {
        Self::from_shape(CurveShape::Ellipse { a: r, b: r }, samples)
    }

    pub fn ellipse(a: f64, b: f64, samples: usize) -> Result<Self> {
        Self::from_shape(CurveShape::Ellipse { a, b }, samples)
    }

    pub fn from_shape(shape: CurveShape, samples: usize) -> Result<Self> {
        let pts = (0..samples)
            .map(|i| shape.jet(TAU * i as f64 / samples as f64))
            .collect();
        let mut c = Self::from_samples(pts)?;
        c.shape = Some(shape);
        Ok(c)
    }

    /// Tabulated curve; only the sample parameters can be evaluated.
    pub fn from_samples(samples: Vec<CurveSample>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::config("curve needs at least 3 samples"));
        }
        let mut area2 = 0.0;
        for (i, p) in samples.iter().enumerate() {
            if p.d1[0].hypot(p.d1[1]) == 0.0
                || !p
                    .d1
                    .iter()
                    .chain(&p.d2)
                    .chain(&p.pos)
                    .all(|v| v.is_finite())
            {
                return Err(Error::config(format!(
                    "curve sample {i} (s = {}) has a vanishing or non-finite derivative",
                    p.s
                )));
            }
            let q = &samples[(i + 1) % samples.len()];
            let turn = (p.d1[0] * q.d1[1] - p.d1[1] * q.d1[0])
                .atan2(p.d1[0] * q.d1[0] + p.d1[1] * q.d1[1]);
            if turn.abs() >= 0.1 {
                return Err(Error::config(format!(
                    "tangent turns {turn:.3} rad between samples {i} and {}; sample more densely",
                    (i + 1) % samples.len()
                )));
            }
            area2 += p.pos[0] * q.pos[1] - q.pos[0] * p.pos[1];
        }
        if area2 <= 0.0 {
            return Err(Error::config("curve must be counter-clockwise"));
        }
        Ok(SmoothBoundaryCurve {
            shape: None,
            samples,
        })
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn shape(&self) -> Option<&CurveShape> {
        self.shape.as_ref()
    }

    pub fn jet(&self, s: f64) -> Result<CurveSample> {
        if let Some(shape) = &self.shape {
            return Ok(shape.jet(s));
        }
        self.samples
            .iter()
            .find(|p| (p.s - s).abs() <= 1e-12)
            .copied()
            .ok_or_else(|| {
                Error::domain(format!("s = {s} is not a sample of this tabulated curve"))
            })
    }
}

/// Outward unit normal `R(γ')/|γ'|` with `R(v) = (v_y, −v_x)`.
pub fn outward_normal(p: &CurveSample) -> [f64; 2] {
    let l = p.d1[0].hypot(p.d1[1]);
    [p.d1[1] / l, -p.d1[0] / l]
}

/// `H_F = ⟨F_ξξ(ν) ν', γ'⟩ / |γ'|²`, the anisotropic curvature of a plane
/// curve; equals the classical curvature for the Euclidean norm.
pub fn f_mean_curvature_at(norm: &Norm, p: &CurveSample) -> Result<f64> {
    let (t, a) = (p.d1, p.d2);
    let l2 = t[0] * t[0] + t[1] * t[1];
    let l = l2.sqrt();
    let nu = [t[1] / l, -t[0] / l];
    let td = t[0] * a[0] + t[1] * a[1];
    let dnu = [
        a[1] / l - t[1] * td / (l2 * l),
        -a[0] / l + t[0] * td / (l2 * l),
    ];
    let h = norm.tensors(&nu, false)?.hess_f();
    let w = [
        h[(0, 0)] * dnu[0] + h[(0, 1)] * dnu[1],
        h[(1, 0)] * dnu[0] + h[(1, 1)] * dnu[1],
    ];
    Ok((w[0] * t[0] + w[1] * t[1]) / l2)
}

fn strongly_convex(spec: &NormSpec) -> Result<Norm> {
    let norm = Norm::new(spec)?;
    if !norm.is_strongly_convex() {
        return Err(Error::config(format!(
            "F-mean curvature needs a strongly convex norm; {} is not (use `regularize`)",
            spec.label()
        )));
    }
    Ok(norm)
}

pub fn f_mean_curvature(curve: &SmoothBoundaryCurve, spec: &NormSpec, s: f64) -> Result<f64> {
    let norm = strongly_convex(spec)?;
    f_mean_curvature_at(&norm, &curve.jet(s)?)
}

/// Minimum of `H_F` over the samples; passes when it is ≥ −1e−8.
pub fn f_mean_convexity_check(curve: &SmoothBoundaryCurve, spec: &NormSpec) -> Result<CheckReport> {
    let norm = strongly_convex(spec)?;
    let mut samples = Vec::with_capacity(curve.samples().len());
    let mut min_h = f64::INFINITY;
    for p in curve.samples() {
        let h = f_mean_curvature_at(&norm, p)?;
        min_h = min_h.min(h);
        samples.push((-h, vec![p.s, p.pos[0], p.pos[1]]));
    }
    Ok(CheckReport::from_samples("f_mean_convexity", 1e-8, samples)
        .with_meta("norm", spec.label())
        .with_meta("min_h_f", min_h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn classical(a: f64, b: f64, s: f64) -> f64 {
        a * b / (a * a * s.sin().powi(2) + b * b * s.cos().powi(2)).powf(1.5)
    }

    /// H_F from the definition with ν' taken by central differences of ν(s).
    fn fd_h(norm: &Norm, shape: &CurveShape, s: f64) -> f64 {
        let h = 1e-5;
        let (np, nm) = (
            outward_normal(&shape.jet(s + h)),
            outward_normal(&shape.jet(s - h)),
        );
        let dnu = [(np[0] - nm[0]) / (2.0 * h), (np[1] - nm[1]) / (2.0 * h)];
        let p = shape.jet(s);
        let hf = norm.tensors(&outward_normal(&p), false).unwrap().hess_f();
        let w = [
            hf[(0, 0)] * dnu[0] + hf[(0, 1)] * dnu[1],
            hf[(1, 0)] * dnu[0] + hf[(1, 1)] * dnu[1],
        ];
        (w[0] * p.d1[0] + w[1] * p.d1[1]) / (p.d1[0].powi(2) + p.d1[1].powi(2))
    }

    #[test]
    fn circles_and_ellipses() {
        let c = SmoothBoundaryCurve::circle(2.0, 128).unwrap();
        for s in [0.0, 0.3, 2.0, 5.5] {
            assert_relative_eq!(
                f_mean_curvature(&c, &NormSpec::Euclidean, s).unwrap(),
                0.5,
                max_relative = 1e-12
            );
        }
        let r = SmoothBoundaryCurve::circle(3.0, 128).unwrap();
        let rep = f_mean_convexity_check(&r, &NormSpec::Euclidean).unwrap();
        assert!(rep.pass);
        assert_relative_eq!(-rep.worst_violation, 1.0 / 3.0, max_relative = 1e-12);

        let e = SmoothBoundaryCurve::ellipse(2.0, 1.0, 128).unwrap();
        assert_relative_eq!(
            f_mean_curvature(&e, &NormSpec::Euclidean, 0.0).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        for k in 0..50 {
            let s = 0.13 * k as f64;
            let h = f_mean_curvature(&e, &NormSpec::Euclidean, s).unwrap();
            assert!((h - classical(2.0, 1.0, s)).abs() < 1e-6);
        }
    }

    #[test]
    fn anisotropic_matches_finite_differences() {
        let q = NormSpec::quadratic(vec![vec![4.0, 0.0], vec![0.0, 1.0]]);
        let norm = Norm::new(&q).unwrap();
        let shape = CurveShape::Ellipse { a: 2.0, b: 1.0 };
        let e = SmoothBoundaryCurve::from_shape(shape.clone(), 256).unwrap();
        let rep = f_mean_convexity_check(&e, &q).unwrap();
        assert!(rep.pass);
        let fd_min = (0..4096)
            .map(|i| fd_h(&norm, &shape, TAU * i as f64 / 4096.0))
            .fold(f64::INFINITY, f64::min);
        let min_h: f64 = rep.metadata["min_h_f"].parse().unwrap();
        assert!(
            (min_h - fd_min).abs() < 1e-4 * fd_min.abs().max(1.0),
            "{min_h} {fd_min}"
        );
        for s in [0.1, 1.0, 2.5, 4.0] {
            assert!((f_mean_curvature(&e, &q, s).unwrap() - fd_h(&norm, &shape, s)).abs() < 1e-7);
        }
    }

    #[test]
    fn convex_radial_curve_passes() {
        let shape = CurveShape::Radial {
            r0: 1.0,
            cos_k: vec![0.0, 0.05],
            sin_k: vec![0.0, 0.0, 0.03],
        };
        let c = SmoothBoundaryCurve::from_shape(shape, 400).unwrap();
        assert!(
            f_mean_convexity_check(&c, &NormSpec::Euclidean)
                .unwrap()
                .pass
        );
        let reg = crate::norms::regularize(&NormSpec::pnorm(3.0), 1e-3).unwrap();
        assert!(f_mean_convexity_check(&c, &reg).unwrap().pass);
    }

    #[test]
    fn nonconvex_curve_fails() {
        let shape = CurveShape::Radial {
            r0: 1.0,
            cos_k: vec![0.0, 0.0, 0.3],
            sin_k: vec![],
        };
        let c = SmoothBoundaryCurve::from_shape(shape, 800).unwrap();
        assert!(
            !f_mean_convexity_check(&c, &NormSpec::Euclidean)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn rejects_weak_norms_and_sparse_samples() {
        let c = SmoothBoundaryCurve::circle(1.0, 128).unwrap();
        let e = f_mean_curvature(&c, &NormSpec::pnorm(3.0), 0.0).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("regularize")));
        assert!(SmoothBoundaryCurve::circle(1.0, 40).is_err());
        let tab = SmoothBoundaryCurve::from_samples(c.samples().to_vec()).unwrap();
        assert!(tab.jet(0.123).is_err());
        assert!(tab.jet(0.0).is_ok());
    }
}
