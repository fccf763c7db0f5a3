//! Lifted meshes of the piecewise-affine potential and CSV tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::geometry::{Piece, Vec2};
use crate::laguerre::{potential, DualWeights, LaguerreDiagram};
use crate::sphere::c_exp2;

/// Chord angle used when flattening boundary arcs.
pub const ARC_STEP: f64 = std::f64::consts::PI / 90.0;
const SNAP: f64 = 1e-9;

/// Polygonal surface with one planar face per nonempty cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// Counterclockwise seen from above (`+z`).
    pub faces: Vec<Vec<usize>>,
    pub face_sites: Vec<usize>,
    /// Gauss map of each face: the downward unit normal `(p, -1) / sqrt(1 + |p|²)`.
    pub face_normals: Vec<[f64; 3]>,
}

impl Mesh {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Undirected edges with their use counts.
    fn edge_uses(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edges = BTreeMap::new();
        for f in &self.faces {
            for k in 0..f.len() {
                let (a, b) = (f[k], f[(k + 1) % f.len()]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used: std::collections::BTreeSet<usize> = self.faces.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_uses().len() as i64 + self.faces.len() as i64
    }

    /// Every edge lies on one face (boundary) or two faces with opposite
    /// orientations (interior), and the boundary edges form one closed loop.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..f.len() {
                *directed.entry((f[k], f[(k + 1) % f.len()])).or_insert(0) += 1;
            }
        }
        if directed.values().any(|&c| c > 1) {
            return false;
        }
        let mut boundary_next: HashMap<usize, usize> = HashMap::new();
        for (&(a, b), _) in directed.iter() {
            if !directed.contains_key(&(b, a)) && boundary_next.insert(a, b).is_some() {
                return false;
            }
        }
        let Some((&start, _)) = boundary_next.iter().min_by_key(|e| *e.0) else { return false };
        let mut cur = start;
        let mut steps = 0;
        loop {
            let Some(&next) = boundary_next.get(&cur) else { return false };
            cur = next;
            steps += 1;
            if cur == start {
                break;
            }
            if steps > boundary_next.len() {
                return false;
            }
        }
        steps == boundary_next.len()
    }

    /// Newell normal of face `k` (upward for counterclockwise faces).
    pub fn cross_product_normal(&self, k: usize) -> [f64; 3] {
        let f = &self.faces[k];
        let mut n = [0.0; 3];
        for i in 0..f.len() {
            let a = self.vertices[f[i]];
            let b = self.vertices[f[(i + 1) % f.len()]];
            n[0] += (a[1] - b[1]) * (a[2] + b[2]);
            n[1] += (a[2] - b[2]) * (a[0] + b[0]);
            n[2] += (a[0] - b[0]) * (a[1] + b[1]);
        }
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        n.map(|v| v / len)
    }

    /// Wavefront OBJ with per-face normals set to the Gauss map.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# piecewise-affine convex graph, {} faces", self.faces.len());
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
        }
        for n in &self.face_normals {
            let _ = writeln!(s, "vn {} {} {}", n[0], n[1], n[2]);
        }
        for (k, f) in self.faces.iter().enumerate() {
            s.push('f');
            for &v in f {
                let _ = write!(s, " {}//{}", v + 1, k + 1);
            }
            s.push('\n');
        }
        s
    }
}

/// Lifts every nonempty cell by its affine function. Shared vertices are
/// merged on a `1e-9` lattice and take the height `u_ψ` at the merged point.
pub fn export_mesh(diagram: &LaguerreDiagram, sites: &[Vec2], psi: &DualWeights) -> Mesh {
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_sites = Vec::new();
    let mut face_normals = Vec::new();
    for cell in diagram.cells.iter().filter(|c| !c.is_empty()) {
        let mut ring: Vec<Vec2> = Vec::new();
        for piece in &cell.shape.pieces {
            match *piece {
                Piece::Segment { a, .. } => ring.push(a),
                Piece::Arc { circle, start, sweep } => {
                    let steps = ((sweep / ARC_STEP).ceil() as usize).max(1);
                    for k in 0..steps {
                        ring.push(circle.point_at(start + sweep * k as f64 / steps as f64));
                    }
                }
            }
        }
        let mut face: Vec<usize> = Vec::with_capacity(ring.len());
        for x in ring {
            let key = ((x.x / SNAP).round() as i64, (x.y / SNAP).round() as i64);
            let id = *index.entry(key).or_insert_with(|| {
                let (z, _, _) = potential(sites, psi, &x);
                vertices.push([x.x, x.y, z]);
                vertices.len() - 1
            });
            if face.last() != Some(&id) && face.first() != Some(&id) {
                face.push(id);
            }
        }
        if face.len() >= 3 {
            let p = sites[cell.site_index];
            face_normals.push(c_exp2(&p));
            faces.push(face);
            face_sites.push(cell.site_index);
        }
    }
    Mesh { vertices, faces, face_sites, face_normals }
}

/// `i,p1,p2,nu,psi,mass` rows.
pub fn solution_csv(sites: &[Vec2], nu: &[f64], psi: &DualWeights, masses: &[f64]) -> String {
    let mut s = String::from("i,p1,p2,nu,psi,mass\n");
    for i in 0..sites.len() {
        let _ = writeln!(s, "{},{},{},{},{},{}", i, sites[i].x, sites[i].y, nu[i], psi.psi[i], masses[i]);
    }
    s
}

/// Sites and weights read back from [`solution_csv`] output; `Err` carries the
/// offending line number.
pub fn parse_solution_csv(text: &str) -> Result<(Vec<Vec2>, Vec<f64>, DualWeights), usize> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "i,p1,p2,nu,psi,mass" => {}
        _ => return Err(1),
    }
    let (mut sites, mut nu, mut psi) = (Vec::new(), Vec::new(), Vec::new());
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| k + 1)?;
        if vals.len() != 6 || vals[0] as usize != sites.len() {
            return Err(k + 1);
        }
        sites.push(Vec2::new(vals[1], vals[2]));
        nu.push(vals[3]);
        psi.push(vals[4]);
    }
    if sites.is_empty() {
        return Err(2);
    }
    Ok((sites, nu, DualWeights { psi }))
}

/// `cell,vertex,x1,x2,mass` rows; arcs are flattened.
pub fn diagram_csv(diagram: &LaguerreDiagram) -> String {
    let mut s = String::from("cell,vertex,x1,x2,mass\n");
    for cell in &diagram.cells {
        for (k, v) in cell.shape.polyline(ARC_STEP).iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", cell.site_index, k, v.x, v.y, cell.mass);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ConvexPolygonDomain, DiskDomain, Domain};
    use crate::laguerre::laguerre_diagram;

    #[test]
    fn single_facet() {
        let sq: Domain = ConvexPolygonDomain::unit_square().into();
        let sites = [Vec2::new(0.5, -0.25)];
        let psi = DualWeights::zeros(1);
        let m = export_mesh(&laguerre_diagram(&sq, &sites, &psi).unwrap(), &sites, &psi);
        assert_eq!(m.faces.len(), 1);
        assert_eq!(m.euler_characteristic(), 1);
        assert!(m.is_watertight());
        let n = m.cross_product_normal(0);
        let g = m.face_normals[0];
        for k in 0..3 {
            assert!((n[k] + g[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_mesh_topology() {
        let disk: Domain = DiskDomain::unit().into();
        let sites: Vec<Vec2> = (0..30).map(|k| {
            let a = k as f64 * 2.399;
            Vec2::new(a.cos(), a.sin()) * (0.1 + 0.03 * k as f64)
        }).collect();
        let psi = DualWeights::zeros(30);
        let dia = laguerre_diagram(&disk, &sites, &psi).unwrap();
        let m = export_mesh(&dia, &sites, &psi);
        assert_eq!(m.euler_characteristic(), 1);
        assert!(m.is_watertight());
        for k in 0..m.face_count() {
            let n = m.cross_product_normal(k);
            let g = m.face_normals[k];
            assert!((0..3).all(|i| (n[i] + g[i]).abs() < 1e-9), "{n:?} {g:?}");
        }
        let masses = dia.masses();
        let nu = vec![1.0; 30];
        let (s2, nu2, psi2) = parse_solution_csv(&solution_csv(&sites, &nu, &psi, &masses)).unwrap();
        assert_eq!((s2, nu2, psi2), (sites.clone(), nu, psi.clone()));
        let obj = m.to_obj();
        assert!(obj.lines().filter(|l| l.starts_with("f ")).count() == m.face_count());
    }
}
