//! Conforming 2D triangulations with boundary tags and adjacency.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

/// Geometric tolerance for on-boundary tests; domain coordinates are O(1).
pub const GEOM_TOL: f64 = 1e-12;

/// Relative area threshold below which a triangle counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    /// Lies on the given domain polygon segment.
    Segment(usize),
    /// Coincides with a polygon vertex; never moved by adaptation.
    Corner,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub pos: [f64; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Triangle {
    /// Counterclockwise vertex ids.
    pub v: [usize; 3],
    /// `neighbors[k]` is the triangle across the edge opposite `v[k]`.
    pub neighbors: [Option<usize>; 3],
}

/// Closed polygonal domain boundary. Segment `i` runs from `points[i]` to
/// `points[(i + 1) % n]`; the polygon is counterclockwise.
#[derive(Debug, Clone)]
pub struct Polygon {
    pub points: Vec<[f64; 2]>,
}

impl Polygon {
    /// The L-shaped domain (-1,1)^2 minus [0,1) x (-1,0].
    pub fn lshape() -> Polygon {
        Polygon {
            points: vec![
                [-1.0, -1.0],
                [0.0, -1.0],
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [-1.0, 1.0],
            ],
        }
    }

    pub fn num_segments(&self) -> usize {
        self.points.len()
    }

    pub fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.points.len();
        (self.points[i], self.points[(i + 1) % n])
    }

    /// Distance from `p` to segment `i`.
    pub fn distance_to_segment(&self, p: [f64; 2], i: usize) -> f64 {
        let (a, b) = self.segment(i);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
        let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    pub fn on_segment(&self, p: [f64; 2], i: usize) -> bool {
        self.distance_to_segment(p, i) <= GEOM_TOL
    }

    /// Segment containing `p`, if any.
    pub fn find_segment(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.num_segments()).find(|&i| self.on_segment(p, i))
    }

    pub fn is_corner(&self, p: [f64; 2]) -> bool {
        self.points
            .iter()
            .any(|q| (q[0] - p[0]).abs() <= GEOM_TOL && (q[1] - p[1]).abs() <= GEOM_TOL)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<Triangle>,
    pub domain: Polygon,
}

/// A single mesh invariant violation. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFiniteCoordinate { vertex: usize },
    BadVertexIndex { triangle: usize },
    RepeatedVertex { triangle: usize },
    Orientation { triangle: usize, signed_area: f64 },
    Degenerate { triangle: usize },
    NeighborAsymmetry { triangle: usize, neighbor: usize },
    OverusedEdge { edge: [usize; 2], count: usize },
    NonconformingEdge { edge: [usize; 2] },
    BoundaryEdgeOffDomain { edge: [usize; 2] },
    VertexOffSegment { vertex: usize, segment: usize },
    CornerMismatch { vertex: usize },
    InteriorVertexOnBoundary { vertex: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFiniteCoordinate { vertex } => {
                write!(f, "vertex {vertex}: non-finite coordinate")
            }
            Violation::BadVertexIndex { triangle } => {
                write!(f, "triangle {triangle}: vertex index out of range")
            }
            Violation::RepeatedVertex { triangle } => {
                write!(f, "triangle {triangle}: repeated vertex")
            }
            Violation::Orientation { triangle, signed_area } => {
                write!(f, "triangle {triangle}: not counterclockwise (signed area {signed_area:.3e})")
            }
            Violation::Degenerate { triangle } => write!(f, "triangle {triangle}: degenerate"),
            Violation::NeighborAsymmetry { triangle, neighbor } => {
                write!(f, "triangle {triangle}: neighbor {neighbor} does not point back")
            }
            Violation::OverusedEdge { edge, count } => {
                write!(f, "edge {}-{}: shared by {count} triangles", edge[0], edge[1])
            }
            Violation::NonconformingEdge { edge } => {
                write!(f, "edge {}-{}: single-sided but not on the domain boundary", edge[0], edge[1])
            }
            Violation::BoundaryEdgeOffDomain { edge } => {
                write!(f, "edge {}-{}: boundary edge off the domain polygon", edge[0], edge[1])
            }
            Violation::VertexOffSegment { vertex, segment } => {
                write!(f, "vertex {vertex}: not on its boundary segment {segment}")
            }
            Violation::CornerMismatch { vertex } => {
                write!(f, "vertex {vertex}: corner tag but no coincident polygon vertex")
            }
            Violation::InteriorVertexOnBoundary { vertex } => {
                write!(f, "vertex {vertex}: interior tag but lies on the domain boundary")
            }
        }
    }
}

pub fn signed_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    pub fn points(&self, t: usize) -> [[f64; 2]; 3] {
        let v = self.triangles[t].v;
        [self.vertices[v[0]].pos, self.vertices[v[1]].pos, self.vertices[v[2]].pos]
    }

    pub fn area(&self, t: usize) -> f64 {
        let p = self.points(t);
        signed_area(p[0], p[1], p[2])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn n_int(&self) -> usize {
        self.vertices.iter().filter(|v| v.tag == BoundaryTag::Interior).count()
    }

    /// Longest edge divided by the shortest altitude; >= 2/sqrt(3), with
    /// equality for the equilateral triangle.
    pub fn aspect_ratio(&self, t: usize) -> Result<f64> {
        let p = self.points(t);
        let mut longest2 = 0.0f64;
        for k in 0..3 {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let l2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
            longest2 = longest2.max(l2);
        }
        let area = signed_area(p[0], p[1], p[2]).abs();
        if area <= DEGENERACY_TOL * longest2 {
            return Err(Error::DegenerateElement { element: Some(t) });
        }
        // shortest altitude = 2*area/longest edge
        Ok(longest2 / (2.0 * area))
    }

    pub fn max_aspect_ratio(&self) -> Result<f64> {
        let mut max = 0.0f64;
        for t in 0..self.triangles.len() {
            max = max.max(self.aspect_ratio(t)?);
        }
        Ok(max)
    }

    /// Canonical edge table: sorted unordered vertex pairs with the ids of
    /// the one or two incident triangles.
    pub fn edges(&self) -> Vec<([usize; 2], [Option<usize>; 2])> {
        let mut map: HashMap<(usize, usize), [Option<usize>; 2]> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(tri.v[k], tri.v[(k + 1) % 3]);
                let slot = map.entry(key).or_insert([None, None]);
                if slot[0].is_none() {
                    slot[0] = Some(t);
                } else if slot[1].is_none() {
                    slot[1] = Some(t);
                }
            }
        }
        let mut edges: Vec<_> = map.into_iter().map(|((a, b), ts)| ([a, b], ts)).collect();
        edges.sort_unstable_by_key(|(e, _)| *e);
        edges
    }

    /// Recompute triangle neighbor links from shared edges.
    pub fn rebuild_neighbors(&mut self) {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]))
                    .or_default()
                    .push(t);
            }
        }
        for t in 0..self.triangles.len() {
            for k in 0..3 {
                let v = self.triangles[t].v;
                let key = edge_key(v[(k + 1) % 3], v[(k + 2) % 3]);
                let tris = &map[&key];
                self.triangles[t].neighbors[k] =
                    tris.iter().copied().find(|&other| other != t);
            }
        }
    }

    /// Full invariant check. Empty report iff all mesh invariants hold.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let nv = self.vertices.len();

        for (i, v) in self.vertices.iter().enumerate() {
            if !v.pos[0].is_finite() || !v.pos[1].is_finite() {
                out.push(Violation::NonFiniteCoordinate { vertex: i });
                continue;
            }
            match v.tag {
                BoundaryTag::Segment(s) => {
                    if s >= self.domain.num_segments() || !self.domain.on_segment(v.pos, s) {
                        out.push(Violation::VertexOffSegment { vertex: i, segment: s });
                    }
                }
                BoundaryTag::Corner => {
                    if !self.domain.is_corner(v.pos) {
                        out.push(Violation::CornerMismatch { vertex: i });
                    }
                }
                BoundaryTag::Interior => {
                    if self.domain.find_segment(v.pos).is_some() {
                        out.push(Violation::InteriorVertexOnBoundary { vertex: i });
                    }
                }
            }
        }

        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.v.iter().any(|&v| v >= nv) {
                out.push(Violation::BadVertexIndex { triangle: t });
                continue;
            }
            if tri.v[0] == tri.v[1] || tri.v[1] == tri.v[2] || tri.v[0] == tri.v[2] {
                out.push(Violation::RepeatedVertex { triangle: t });
                continue;
            }
            let a = self.area(t);
            if a <= 0.0 {
                out.push(Violation::Orientation { triangle: t, signed_area: a });
            } else if self.aspect_ratio(t).is_err() {
                out.push(Violation::Degenerate { triangle: t });
            }
            for &n in &tri.neighbors {
                if let Some(n) = n {
                    if n >= self.triangles.len()
                        || !self.triangles[n].neighbors.contains(&Some(t))
                    {
                        out.push(Violation::NeighborAsymmetry { triangle: t, neighbor: n });
                    }
                }
            }
        }

        let mut edge_counts: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *edge_counts
                    .entry(edge_key(tri.v[k], tri.v[(k + 1) % 3]))
                    .or_insert(0) += 1;
            }
        }
        let mut edge_list: Vec<_> = edge_counts.into_iter().collect();
        edge_list.sort_unstable_by_key(|(e, _)| *e);
        for ((a, b), count) in edge_list {
            let edge = [a, b];
            if count > 2 {
                out.push(Violation::OverusedEdge { edge, count });
                continue;
            }
            if count == 1 {
                let pa = self.vertices[edge[0]].pos;
                let pb = self.vertices[edge[1]].pos;
                let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                match self.domain.find_segment(mid) {
                    Some(s) => {
                        if !self.domain.on_segment(pa, s) || !self.domain.on_segment(pb, s) {
                            out.push(Violation::BoundaryEdgeOffDomain { edge });
                        }
                    }
                    None => out.push(Violation::NonconformingEdge { edge }),
                }
            }
        }
        out
    }

    /// Write the mesh text format: header `V T`, then `x y tag` lines, then
    /// `i j k` lines. Tags: -1 interior, -2 corner, s >= 0 segment id.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            let tag = match v.tag {
                BoundaryTag::Interior => -1i64,
                BoundaryTag::Corner => -2,
                BoundaryTag::Segment(s) => s as i64,
            };
            writeln!(w, "{:.16e} {:.16e} {}", v.pos[0], v.pos[1], tag)?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t.v[0], t.v[1], t.v[2])?;
        }
        Ok(())
    }

    /// Read the mesh text format; neighbor links are rebuilt.
    pub fn read_text<R: BufRead>(r: &mut R, domain: Polygon) -> Result<Mesh> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedMesh("empty file".into()))??;
        let mut it = header.split_whitespace();
        let nv: usize = parse_field(it.next(), "vertex count")?;
        let nt: usize = parse_field(it.next(), "triangle count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::MalformedMesh("truncated vertex list".into()))??;
            let mut it = line.split_whitespace();
            let x: f64 = parse_field(it.next(), "x")?;
            let y: f64 = parse_field(it.next(), "y")?;
            let tag: i64 = parse_field(it.next(), "tag")?;
            let tag = match tag {
                -1 => BoundaryTag::Interior,
                -2 => BoundaryTag::Corner,
                s if s >= 0 => BoundaryTag::Segment(s as usize),
                _ => return Err(Error::MalformedMesh(format!("bad tag {tag}"))),
            };
            vertices.push(Vertex { pos: [x, y], tag });
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = lines
                .next()
                .ok_or_else(|| Error::MalformedMesh("truncated triangle list".into()))??;
            let mut it = line.split_whitespace();
            let i: usize = parse_field(it.next(), "i")?;
            let j: usize = parse_field(it.next(), "j")?;
            let k: usize = parse_field(it.next(), "k")?;
            triangles.push(Triangle { v: [i, j, k], neighbors: [None; 3] });
        }
        let mut mesh = Mesh { vertices, triangles, domain };
        mesh.rebuild_neighbors();
        Ok(mesh)
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::MalformedMesh(format!("missing field {name}")))?
        .parse()
        .map_err(|_| Error::MalformedMesh(format!("unparsable field {name}")))
}

/// Coarse 6-triangle triangulation of the L-shaped domain: three unit
/// squares, each split along a diagonal.
pub fn initial_lshape_mesh() -> Mesh {
    let domain = Polygon::lshape();
    let verts = [
        ([-1.0, -1.0], BoundaryTag::Corner),
        ([0.0, -1.0], BoundaryTag::Corner),
        ([0.0, 0.0], BoundaryTag::Corner),
        ([1.0, 0.0], BoundaryTag::Corner),
        ([1.0, 1.0], BoundaryTag::Corner),
        ([-1.0, 1.0], BoundaryTag::Corner),
        ([-1.0, 0.0], BoundaryTag::Segment(5)),
        ([0.0, 1.0], BoundaryTag::Segment(4)),
    ];
    let vertices = verts
        .iter()
        .map(|&(pos, tag)| Vertex { pos, tag })
        .collect();
    let tris = [[0, 1, 2], [0, 2, 6], [6, 2, 7], [6, 7, 5], [2, 3, 4], [2, 4, 7]];
    let triangles = tris
        .iter()
        .map(|&v| Triangle { v, neighbors: [None; 3] })
        .collect();
    let mut mesh = Mesh { vertices, triangles, domain };
    mesh.rebuild_neighbors();
    mesh
}
