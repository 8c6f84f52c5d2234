use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dual::distance;
use crate::error::{Error, Result};
use crate::norms::{Norm, NormSpec};

/// Outward facet `{x : ⟨normal, x⟩ ≤ offset}` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: [f64; 2],
    pub offset: f64,
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
    facets: Vec<Facet>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::config(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("polygon has non-finite coordinates"));
        }
        let scale = bbox_scale(&vertices);
        if scale == 0.0 {
            return Err(Error::config(
                "polygon is degenerate (all vertices coincide)",
            ));
        }
        for i in 0..n {
            for j in i + 1..n {
                let d = sub(vertices[j], vertices[i]);
                if d[0].hypot(d[1]) <= 1e-12 * scale {
                    return Err(Error::config(format!("duplicate vertices {i} and {j}")));
                }
            }
        }
        let mut turning = 0.0;
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let e1 = sub(b, a);
            let e2 = sub(c, b);
            let cr = cross(e1, e2);
            if cr <= 1e-12 * scale * scale {
                return Err(Error::config(format!(
                    "vertices ({i}, {}, {}) are not strictly convex in counter-clockwise order (cross product {cr:e})",
                    (i + 1) % n,
                    (i + 2) % n
                )));
            }
            turning += cr.atan2(dot(e1, e2));
        }
        if (turning - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::config(format!(
                "vertex sequence winds {:.3} times around its interior; polygon must be simple",
                turning / std::f64::consts::TAU
            )));
        }
        let facets = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let e = sub(b, a);
                let len = e[0].hypot(e[1]);
                let normal = [e[1] / len, -e[0] / len];
                Facet {
                    normal,
                    offset: dot(normal, a),
                }
            })
            .collect();
        Ok(ConvexPolygon { vertices, facets })
    }

    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0)
    }

    /// `[0, w] × [0, h]`.
    pub fn rectangle(w: f64, h: f64) -> Self {
        Self::new(vec![[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]).expect("valid rectangle")
    }

    /// Regular `k`-gon inscribed in the circle of radius `r` about the origin.
    pub fn regular(k: usize, r: f64) -> Result<Self> {
        let verts = (0..k)
            .map(|i| {
                let th = std::f64::consts::TAU * i as f64 / k as f64;
                [r * th.cos(), r * th.sin()]
            })
            .collect();
        Self::new(verts)
    }

    /// Equilateral triangle with side `side` and one edge on the x-axis.
    pub fn equilateral(side: f64) -> Self {
        Self::new(vec![
            [0.0, 0.0],
            [side, 0.0],
            [0.5 * side, 0.5 * 3f64.sqrt() * side],
        ])
        .expect("valid triangle")
    }

    /// Random convex polygon with 3 to `max_vertices` vertices: points at sorted
    /// random angles on a randomly stretched and rotated circle, reduced to
    /// their strictly convex hull.
    pub fn random<R: Rng>(rng: &mut R, max_vertices: usize) -> Self {
        loop {
            let k = rng.gen_range(3..=max_vertices.max(3));
            let mut angles: Vec<f64> = (0..k)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            angles.sort_by(|a, b| a.total_cmp(b));
            let stretch = rng.gen_range(0.25..1.0);
            let rot: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (c, s) = (rot.cos(), rot.sin());
            let pts: Vec<[f64; 2]> = angles
                .iter()
                .map(|t| {
                    let rad = rng.gen_range(0.8..1.0);
                    let (x, y) = (rad * t.cos(), stretch * rad * t.sin());
                    [c * x - s * y, s * x + c * y]
                })
                .collect();
            let hull = convex_hull(pts);
            if hull.len() >= 3 {
                if let Ok(p) = Self::new(hull) {
                    // reject slivers
                    if p.area() > 0.05 {
                        return p;
                    }
                }
            }
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    /// Area centroid.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let w = cross(p, q);
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
            a2 += w;
        }
        [cx / (3.0 * a2), cy / (3.0 * a2)]
    }

    /// Largest bounding-box extent.
    pub fn scale(&self) -> f64 {
        bbox_scale(&self.vertices)
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.vertices.iter().map(|v| [t * v[0], t * v[1]]).collect())
    }

    /// Mirror image across the vertical line `x = axis`; vertex order is
    /// reversed to keep the orientation counter-clockwise.
    pub fn reflected_x(&self, axis: f64) -> Result<Self> {
        Self::new(
            self.vertices
                .iter()
                .rev()
                .map(|v| [2.0 * axis - v[0], v[1]])
                .collect(),
        )
    }

    /// `⟨n_k, x⟩ ≤ b_k + tol` for every facet.
    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        self.facets
            .iter()
            .all(|f| dot(f.normal, x) <= f.offset + tol)
    }
}

/// Anisotropic diameter `d_F = max F⁰(v_j − v_i)` over vertex pairs.
///
/// `F⁰` is convex, so `F⁰(x₂ − x₁)` is maximized over the product of two
/// polygons at a pair of extreme points.
pub fn diameter(poly: &ConvexPolygon, spec: &NormSpec) -> Result<f64> {
    let norm = Norm::new(spec)?;
    Ok(diameter_with(poly, &norm))
}

pub fn diameter_with(poly: &ConvexPolygon, norm: &Norm) -> f64 {
    let v = poly.vertices();
    let mut best = 0.0_f64;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            best = best.max(distance(norm, &v[i], &v[j]));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InscribedBall {
    pub radius: f64,
    pub center: [f64; 2],
    /// `|dual objective − radius|` for the optimality certificate.
    pub duality_gap: f64,
    /// False when several distinct centers attain the optimal radius.
    pub center_unique: bool,
}

/// Radius and center of the largest Wulff ball `{F⁰(y − x) ≤ r}` inside the polygon.
///
/// Since `sup_{F⁰(z) ≤ 1} ⟨n, z⟩ = F(n)`, the ball lies in the half-plane
/// `⟨n, y⟩ ≤ b` iff `⟨n, x⟩ + r·F(n) ≤ b`. This is a linear program in
/// `(x, r)`; with three unknowns it is solved exactly by enumerating the
/// vertices of the feasible region (every triple of tight facets).
pub fn inscribed_wulff_radius(poly: &ConvexPolygon, spec: &NormSpec) -> Result<InscribedBall> {
    let norm = Norm::new(spec)?;
    inscribed_with(poly, &norm)
}

pub fn inscribed_with(poly: &ConvexPolygon, norm: &Norm) -> Result<InscribedBall> {
    let facets = poly.facets();
    let rows: Vec<[f64; 3]> = facets
        .iter()
        .map(|f| [f.normal[0], f.normal[1], norm.value(&f.normal)])
        .collect();
    let rhs: Vec<f64> = facets.iter().map(|f| f.offset).collect();
    let scale = poly.scale();
    let feas_tol = 1e-12 * scale;
    let m = rows.len();

    let mut vertices: Vec<[f64; 3]> = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let Some(z) = solve3([rows[i], rows[j], rows[k]], [rhs[i], rhs[j], rhs[k]]) else {
                    continue;
                };
                if rows
                    .iter()
                    .zip(&rhs)
                    .all(|(r, b)| dot3(*r, z) <= b + feas_tol)
                {
                    vertices.push(z);
                }
            }
        }
    }
    let best = vertices
        .iter()
        .copied()
        .max_by(|a, b| a[2].total_cmp(&b[2]))
        .ok_or_else(|| Error::Internal("inscribed-ball LP has no feasible vertex".into()))?;
    if !(best[2] > 0.0) {
        return Err(Error::Internal(format!(
            "inscribed-ball LP returned radius {}",
            best[2]
        )));
    }

    let center_unique = vertices
        .iter()
        .filter(|z| z[2] >= best[2] - 1e-12 * scale)
        .all(|z| (z[0] - best[0]).hypot(z[1] - best[1]) <= 1e-9 * scale);

    // dual certificate: y ≥ 0 on tight rows with Σ y_k row_k = (0, 0, 1)
    let active: Vec<usize> = (0..m)
        .filter(|&i| rhs[i] - dot3(rows[i], best) <= 1e-10 * scale)
        .collect();
    let mut duality_gap = f64::INFINITY;
    for a in 0..active.len() {
        for b in a + 1..active.len() {
            for c in b + 1..active.len() {
                let idx = [active[a], active[b], active[c]];
                let cols = [
                    [rows[idx[0]][0], rows[idx[1]][0], rows[idx[2]][0]],
                    [rows[idx[0]][1], rows[idx[1]][1], rows[idx[2]][1]],
                    [rows[idx[0]][2], rows[idx[1]][2], rows[idx[2]][2]],
                ];
                let Some(y) = solve3(cols, [0.0, 0.0, 1.0]) else {
                    continue;
                };
                if y.iter().all(|v| *v >= -1e-12) {
                    let dual_obj: f64 = (0..3).map(|t| y[t] * rhs[idx[t]]).sum();
                    duality_gap = duality_gap.min((dual_obj - best[2]).abs());
                }
            }
        }
    }
    if !duality_gap.is_finite() {
        return Err(Error::Internal(
            "no dual certificate for the inscribed-ball LP optimum".into(),
        ));
    }
    Ok(InscribedBall {
        radius: best[2],
        center: [best[0], best[1]],
        duality_gap,
        center_unique,
    })
}

/// Andrew's monotone chain; returns the strictly convex hull counter-clockwise.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(
                sub(lower[lower.len() - 1], lower[lower.len() - 2]),
                sub(*p, lower[lower.len() - 1]),
            ) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(
                sub(upper[upper.len() - 1], upper[upper.len() - 2]),
                sub(*p, upper[upper.len() - 1]),
            ) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let norm: f64 = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if d.abs() <= 1e-13 * norm * norm * norm {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *o = det(mc) / d;
    }
    Some(out)
}

fn bbox_scale(v: &[[f64; 2]]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in v {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1])
}

#[inline]
pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::dual_value;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Largest Wulff ball by grid search over centers, with the F⁰-distance to
    /// the boundary measured on densely sampled edge points.
    fn grid_inradius(
        poly: &ConvexPolygon,
        spec: &NormSpec,
        grid: usize,
        edge_samples: usize,
    ) -> f64 {
        let norm = Norm::new(spec).unwrap();
        let v = poly.vertices();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in v {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let boundary: Vec<[f64; 2]> = (0..v.len())
            .flat_map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                (0..edge_samples).map(move |k| {
                    let t = k as f64 / edge_samples as f64;
                    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
                })
            })
            .collect();
        let radius_at = |c: [f64; 2]| {
            if !poly.contains(c, 0.0) {
                return 0.0;
            }
            boundary
                .iter()
                .map(|b| dual_value(&norm, &sub(*b, c)))
                .fold(f64::INFINITY, f64::min)
        };
        // coarse grid over the bounding box, then a fine grid around the best node
        let (mut best, mut at) = (0.0_f64, [0.0; 2]);
        let h = [(hi[0] - lo[0]) / grid as f64, (hi[1] - lo[1]) / grid as f64];
        for i in 0..=grid {
            for j in 0..=grid {
                let c = [lo[0] + h[0] * i as f64, lo[1] + h[1] * j as f64];
                let r = radius_at(c);
                if r > best {
                    (best, at) = (r, c);
                }
            }
        }
        let fine = 2 * grid;
        let base = at;
        for i in 0..=fine {
            for j in 0..=fine {
                let c = [
                    base[0] + h[0] * (2.0 * i as f64 / fine as f64 - 1.0),
                    base[1] + h[1] * (2.0 * j as f64 / fine as f64 - 1.0),
                ];
                best = best.max(radius_at(c));
            }
        }
        best
    }

    #[test]
    fn rejects_bad_polygons() {
        let e = ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        // clockwise
        let e =
            ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("vertices (")));
        // reflex vertex
        let e = ConvexPolygon::new(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 0.5],
            [2.0, 2.0],
            [0.0, 2.0],
        ])
        .unwrap_err();
        assert!(
            matches!(e, Error::Config(ref m) if m.contains("(1, 2, 3)")),
            "{e}"
        );
        // collinear
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0]]).is_err());
        // duplicate
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        // pentagram winds twice
        let star: Vec<[f64; 2]> = (0..5)
            .map(|i| {
                let t = std::f64::consts::TAU * (2 * i) as f64 / 5.0;
                [t.cos(), t.sin()]
            })
            .collect();
        assert!(ConvexPolygon::new(star).is_err());
    }

    #[test]
    fn facets_and_area() {
        let sq = ConvexPolygon::unit_square();
        assert_eq!(sq.area(), 1.0);
        assert_eq!(sq.centroid(), [0.5, 0.5]);
        assert_eq!(sq.facets()[0].normal, [0.0, -1.0]);
        assert_eq!(sq.facets()[1].normal, [1.0, 0.0]);
        assert_eq!(sq.facets()[1].offset, 1.0);
    }

    #[test]
    fn diameter_examples() {
        let sq = ConvexPolygon::unit_square();
        assert_relative_eq!(
            diameter(&sq, &NormSpec::Euclidean).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        let q = NormSpec::quadratic(vec![vec![1.0, 0.0], vec![0.0, 4.0]]);
        let d = diameter(&sq, &q).unwrap();
        assert_relative_eq!(d, 1.25f64.sqrt(), max_relative = 1e-14);
        assert!((d - 1.118034).abs() < 1e-6);
        let big = sq.scaled(3.0).unwrap();
        assert_relative_eq!(diameter(&big, &q).unwrap(), 3.0 * d, max_relative = 1e-14);
    }

    #[test]
    fn inscribed_examples() {
        let sq = ConvexPolygon::unit_square();
        let b = inscribed_wulff_radius(&sq, &NormSpec::Euclidean).unwrap();
        assert_relative_eq!(b.radius, 0.5, max_relative = 1e-14);
        assert_relative_eq!(b.center[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(b.center[1], 0.5, max_relative = 1e-14);
        assert!(b.center_unique);
        assert!(b.duality_gap <= 1e-10);

        let tri = ConvexPolygon::equilateral(1.0);
        let b = inscribed_wulff_radius(&tri, &NormSpec::Euclidean).unwrap();
        assert_relative_eq!(b.radius, 1.0 / (2.0 * 3f64.sqrt()), max_relative = 1e-13);
        let g = grid_inradius(&tri, &NormSpec::Euclidean, 40, 400);
        assert!((g - b.radius).abs() < 1e-3);

        // F(1,0) = 2, F(0,1) = 1: Wulff ball is the ellipse x²/4 + y² ≤ r²
        let q = NormSpec::quadratic(vec![vec![4.0, 0.0], vec![0.0, 1.0]]);
        let b = inscribed_wulff_radius(&sq, &q).unwrap();
        assert_relative_eq!(b.radius, 0.25, max_relative = 1e-13);
        assert_relative_eq!(b.center[0], 0.5, max_relative = 1e-13);
        // the center can slide vertically
        assert!(!b.center_unique);
        assert!(b.duality_gap <= 1e-10);
        let g = grid_inradius(&sq, &q, 40, 400);
        assert!((g - b.radius).abs() < 1e-3, "{g}");
    }

    #[test]
    fn inscribed_matches_grid_on_random_polygons() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for spec in [
            NormSpec::Euclidean,
            NormSpec::pnorm(3.0),
            NormSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
        ] {
            for _ in 0..3 {
                let p = ConvexPolygon::random(&mut rng, 7);
                let b = inscribed_wulff_radius(&p, &spec).unwrap();
                let g = grid_inradius(&p, &spec, 30, 300);
                assert!(g <= b.radius + 1e-9);
                assert!(
                    b.radius - g < 2e-2 * b.radius,
                    "{} {g} vs {}",
                    spec.label(),
                    b.radius
                );
            }
        }
    }

    #[test]
    fn wulff_ball_fits_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = ConvexPolygon::random(&mut rng, 8);
        let spec = NormSpec::pnorm(4.0);
        let norm = Norm::new(&spec).unwrap();
        let b = inscribed_wulff_radius(&p, &spec).unwrap();
        for k in 0..1000 {
            let th = std::f64::consts::TAU * k as f64 / 1000.0;
            let dir = [th.cos(), th.sin()];
            let s = b.radius / dual_value(&norm, &dir);
            let y = [b.center[0] + s * dir[0], b.center[1] + s * dir[1]];
            assert!(
                crate::dual::wulff_contains(&spec, &b.center, b.radius * (1.0 + 1e-12), &y)
                    .unwrap()
            );
            assert!(p.contains(y, 1e-12));
        }
    }

    #[test]
    fn dilation_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ConvexPolygon::random(&mut rng, 6);
        let spec = NormSpec::pnorm(3.0);
        let d = diameter(&p, &spec).unwrap();
        let r = inscribed_wulff_radius(&p, &spec).unwrap().radius;
        for t in [2.0, 5.0] {
            let q = p.scaled(t).unwrap();
            assert!((diameter(&q, &spec).unwrap() - t * d).abs() <= 1e-12 * t * d);
            assert!(
                (inscribed_wulff_radius(&q, &spec).unwrap().radius - t * r).abs() <= 1e-12 * t * r
            );
        }
    }

    #[test]
    fn hull_is_ccw() {
        let h = convex_hull(vec![
            [0.0, 0.0],
            [1.0, 1.0],
            [1.0, 0.0],
            [0.5, 0.2],
            [0.0, 1.0],
        ]);
        assert_eq!(h, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    }
}
