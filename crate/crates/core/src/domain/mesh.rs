use std::collections::HashMap;
use std::io::{self, Write};

use super::polygon::{cross, sub, ConvexPolygon};
use crate::error::{Error, Result};

pub const MAX_LEVELS: usize = 10;

/// Conforming P1 triangulation of a convex polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted indices of nodes on the polygon boundary.
    pub boundary_nodes: Vec<usize>,
    pub refinement_level: usize,
    /// For nodes created by the last refinement, the endpoints of the split
    /// edge. Nodes inherited from the coarser mesh keep their index and have
    /// `None`.
    pub parents: Vec<Option<[usize; 2]>>,
    /// The triangulated polygon.
    pub domain: ConvexPolygon,
}

/// Fan triangulation from the area centroid, refined `levels` times by
/// midpoint quadrisection.
pub fn triangulate(poly: &ConvexPolygon, levels: usize) -> Result<TriMesh> {
    if levels > MAX_LEVELS {
        return Err(Error::config(format!(
            "refinement level {levels} outside [0, {MAX_LEVELS}]"
        )));
    }
    let mut mesh = TriMesh::fan(poly);
    for _ in 0..levels {
        mesh = mesh.refine();
    }
    Ok(mesh)
}

impl TriMesh {
    fn fan(poly: &ConvexPolygon) -> Self {
        let v = poly.vertices();
        let k = v.len();
        let mut nodes = v.to_vec();
        nodes.push(poly.centroid());
        let triangles = (0..k).map(|i| [i, (i + 1) % k, k]).collect();
        TriMesh {
            nodes,
            triangles,
            boundary_nodes: (0..k).collect(),
            refinement_level: 0,
            parents: vec![None; k + 1],
            domain: poly.clone(),
        }
    }

    /// Split every triangle into four through its edge midpoints.
    pub fn refine(&self) -> TriMesh {
        let mut nodes = self.nodes.clone();
        let mut parents = vec![None; nodes.len()];
        let mut mid: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
        let mut edge_count: HashMap<(usize, usize), u8> = HashMap::new();
        let mut midpoint = |a: usize,
                            b: usize,
                            nodes: &mut Vec<[f64; 2]>,
                            parents: &mut Vec<Option<[usize; 2]>>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (nodes[key.0], nodes[key.1]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                parents.push(Some([key.0, key.1]));
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *edge_count.entry((p.min(q), p.max(q))).or_default() += 1;
            }
            let ab = midpoint(a, b, &mut nodes, &mut parents);
            let bc = midpoint(b, c, &mut nodes, &mut parents);
            let ca = midpoint(c, a, &mut nodes, &mut parents);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary: Vec<usize> = self.boundary_nodes.clone();
        for (edge, count) in &edge_count {
            if *count == 1 {
                boundary.push(mid[edge]);
            }
        }
        boundary.sort_unstable();
        TriMesh {
            nodes,
            triangles,
            boundary_nodes: boundary,
            refinement_level: self.refinement_level + 1,
            parents,
            domain: self.domain.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(
            sub(self.nodes[b], self.nodes[a]),
            sub(self.nodes[c], self.nodes[a]),
        )
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Longest edge over all triangles.
    pub fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(p, q)| {
                let d = sub(self.nodes[q], self.nodes[p]);
                d[0].hypot(d[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn is_boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for &i in &self.boundary_nodes {
            mask[i] = true;
        }
        mask
    }

    /// Linear interpolation of nodal values from the parent mesh.
    pub fn prolong(&self, coarse: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        out.extend_from_slice(&coarse[..coarse.len().min(self.nodes.len())]);
        for p in &self.parents[out.len()..] {
            let [a, b] = p.expect("refined node has parents");
            out.push(0.5 * (coarse[a] + coarse[b]));
        }
        out
    }

    /// Check orientation, conformity and that the mesh tiles `poly`.
    pub fn validate(&self, poly: &ConvexPolygon) -> Result<()> {
        let scale = poly.scale();
        for (t, _) in self.triangles.iter().enumerate() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::domain(format!("triangle {t} has non-positive area")));
            }
        }
        let mut edges: HashMap<(usize, usize), u8> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *edges.entry((p.min(q), p.max(q))).or_default() += 1;
            }
        }
        let mask = self.is_boundary_mask();
        for (&(p, q), &count) in &edges {
            match count {
                1 => {
                    if !(mask[p] && mask[q]) {
                        return Err(Error::domain(format!(
                            "boundary edge ({p}, {q}) has an interior endpoint"
                        )));
                    }
                }
                2 => {}
                _ => {
                    return Err(Error::domain(format!(
                        "edge ({p}, {q}) is shared by {count} triangles"
                    )))
                }
            }
        }
        for &i in &self.boundary_nodes {
            let x = self.nodes[i];
            let on_edge = poly.facets().iter().any(|f| {
                (f.normal[0] * x[0] + f.normal[1] * x[1] - f.offset).abs() <= 1e-12 * scale
            });
            if !on_edge || !poly.contains(x, 1e-12 * scale) {
                return Err(Error::domain(format!(
                    "boundary node {i} at {x:?} is off the polygon boundary"
                )));
            }
        }
        let area = poly.area();
        if (self.total_area() - area).abs() > 1e-12 * area.max(1.0) {
            return Err(Error::domain(format!(
                "mesh area {} differs from polygon area {area}",
                self.total_area()
            )));
        }
        Ok(())
    }

    /// Plain-text dump:
    ///
    /// ```text
    /// # trimesh level=<k> nodes=<N> triangles=<T>
    /// node <i> <x> <y> <boundary 0|1>
    /// tri <j> <a> <b> <c>
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# trimesh level={} nodes={} triangles={}",
            self.refinement_level,
            self.nodes.len(),
            self.triangles.len()
        )?;
        let mask = self.is_boundary_mask();
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(
                w,
                "node {i} {:.16e} {:.16e} {}",
                p[0],
                p[1],
                u8::from(mask[i])
            )?;
        }
        for (j, t) in self.triangles.iter().enumerate() {
            writeln!(w, "tri {j} {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shoelace(v: &[[f64; 2]]) -> f64 {
        let n = v.len();
        0.5 * (0..n)
            .map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1])
            .sum::<f64>()
    }

    #[test]
    fn square_fan() {
        let m = triangulate(&ConvexPolygon::unit_square(), 0).unwrap();
        assert_eq!(m.triangles.len(), 4);
        assert_eq!(m.nodes.len(), 5);
        assert_eq!(m.nodes[4], [0.5, 0.5]);
        assert_eq!(m.boundary_nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn level_out_of_range() {
        assert!(matches!(
            triangulate(&ConvexPolygon::unit_square(), 11),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn counts_area_and_validity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let p = ConvexPolygon::random(&mut rng, 9);
            for k in 0..5 {
                let m = triangulate(&p, k).unwrap();
                assert_eq!(m.triangles.len(), p.len() * 4usize.pow(k as u32));
                let a = shoelace(p.vertices());
                assert!((m.total_area() - a).abs() <= 1e-12 * a);
                m.validate(&p).unwrap();
                // Euler: V − E + F = 1 for a disk
                let e = (3 * m.triangles.len() + m.boundary_nodes.len()) / 2;
                assert_eq!(m.nodes.len() + m.triangles.len(), e + 1);
            }
        }
    }

    #[test]
    fn prolongation_reproduces_linears() {
        let p = ConvexPolygon::regular(6, 1.0).unwrap();
        let coarse = triangulate(&p, 2).unwrap();
        let fine = coarse.refine();
        let f = |x: [f64; 2]| 3.0 * x[0] - 2.0 * x[1] + 0.5;
        let u: Vec<f64> = coarse.nodes.iter().map(|x| f(*x)).collect();
        let v = fine.prolong(&u);
        for (x, val) in fine.nodes.iter().zip(&v) {
            assert!((f(*x) - val).abs() < 1e-14);
        }
    }

    #[test]
    fn deterministic_dump() {
        let m = triangulate(&ConvexPolygon::unit_square(), 1).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        m.write_text(&mut a).unwrap();
        triangulate(&ConvexPolygon::unit_square(), 1)
            .unwrap()
            .write_text(&mut b)
            .unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# trimesh level=1 nodes=13 triangles=16\n"));
    }
}
