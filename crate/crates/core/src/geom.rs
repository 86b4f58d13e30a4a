//! Planar point patterns, their Delaunay triangulation and the alpha filtration built on it.
//!
//! The filtration used here enters every Delaunay edge at half its length and every
//! triangle at the smallest radius for which the three disks centred at its vertices
//! cover it. Vertices enter at 0. With this choice the 0-dimensional merge times are
//! exactly the connectivity times of the Gilbert graph, because the Euclidean minimum
//! spanning tree is a subgraph of the Delaunay triangulation.
//!
//! Delaunay construction is delegated to [`spade`], whose orientation and in-circle
//! predicates are exact. The resulting simplices are re-indexed in a canonical
//! (lexicographic) order so that everything downstream is independent of the
//! insertion order used by the triangulator.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation as _};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Lexicographic order: x-coordinate first, then y.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }

    fn midpoint(&self, other: &Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Axis-aligned observation window `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Window {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Window {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidWindow("coordinates must be finite".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidWindow(format!(
                "need x0 < x1 and y0 < y1, got {x0},{y0},{x1},{y1}"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// The square `[0, side]²`.
    pub fn square(side: f64) -> Result<Self> {
        Self::new(0.0, 0.0, side, side)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// The window grown by `margin` on every side.
    pub fn dilate(&self, margin: f64) -> Result<Self> {
        Self::new(
            self.x0 - margin,
            self.y0 - margin,
            self.x1 + margin,
            self.y1 + margin,
        )
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

impl TryFrom<[f64; 4]> for Window {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Window::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Window> for [f64; 4] {
    fn from(w: Window) -> Self {
        w.to_array()
    }
}

impl FromStr for Window {
    type Err = Error;

    /// Parses `x0,y0,x1,y1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidWindow(format!(
                "expected 4 comma-separated numbers, got {s:?}"
            )));
        }
        let mut v = [0.0; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse::<f64>()
                .map_err(|_| Error::InvalidWindow(format!("not a number: {part:?}")))?;
        }
        Window::try_from(v)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.x1, self.y1)
    }
}

/// A finite set of distinct points inside an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
}

impl PointPattern {
    /// Validates that every point is finite, lies in the (closed) window and that no
    /// two points coincide.
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        let mut seen: HashMap<(u64, u64), usize> = HashMap::with_capacity(points.len());
        for (index, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if !window.contains(p) {
                return Err(Error::PointOutsideWindow {
                    index,
                    x: p.x,
                    y: p.y,
                });
            }
            // +0.0 and -0.0 are the same location
            let key = ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicatePoint { index, first });
            }
            seen.insert(key, index);
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            points: Vec::new(),
            window,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Diagonal of the bounding box of the points; an upper bound for the diameter of
    /// any subset.
    pub fn extent(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let (mut lo, mut hi) = (self.points[0], self.points[0]);
        for p in &self.points[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        lo.dist(&hi)
    }
}

/// Delaunay triangulation of a point pattern, indexed canonically.
///
/// Edges are stored as sorted vertex pairs and listed in lexicographic order;
/// triangles as sorted vertex triples, also in lexicographic order. `edge_faces[e]`
/// holds the (at most two) triangles bordering edge `e`, `None` marking the outer face.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    edge_faces: Vec<[Option<usize>; 2]>,
    triangle_edges: Vec<[usize; 3]>,
}

impl Triangulation {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edge_faces(&self) -> &[[Option<usize>; 2]] {
        &self.edge_faces
    }

    /// Edge indices of each triangle, in the order (v0v1, v0v2, v1v2).
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    /// Triangles sharing an edge with `t`, with `None` for the outer face.
    pub fn triangle_neighbors(&self, t: usize) -> [Option<usize>; 3] {
        self.triangle_edges[t].map(|e| {
            let [a, b] = self.edge_faces[e];
            if a == Some(t) {
                b
            } else {
                a
            }
        })
    }

    /// V − E + F over the bounded complex.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }
}

struct Site {
    position: Point2<f64>,
    index: usize,
}

impl HasPosition for Site {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.position
    }
}

/// Delaunay triangulation of all points of `pattern`.
///
/// Collinear inputs give a path of edges and no triangles. On cocircular
/// configurations the diagonal is whatever the triangulator settles on; all such
/// choices give the same persistence.
pub fn build_delaunay(pattern: &PointPattern) -> Result<Triangulation> {
    let n = pattern.len();
    let sites: Vec<Site> = pattern
        .points()
        .iter()
        .enumerate()
        .map(|(index, p)| Site {
            position: Point2::new(p.x, p.y),
            index,
        })
        .collect();
    let dt: DelaunayTriangulation<Site> = DelaunayTriangulation::bulk_load(sites)
        .map_err(|e| Error::Triangulation(format!("{e:?}")))?;
    if dt.num_vertices() != n {
        // spade silently merges coincident vertices
        return Err(Error::Triangulation(format!(
            "triangulator kept {} of {n} vertices",
            dt.num_vertices()
        )));
    }

    let mut triangles: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|f| {
            let mut t = f.vertices().map(|v| v.data().index);
            t.sort_unstable();
            t
        })
        .collect();
    triangles.sort_unstable();
    let tri_index: HashMap<[usize; 3], usize> =
        triangles.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    let mut edges: Vec<[usize; 2]> = dt
        .undirected_edges()
        .map(|e| {
            let [a, b] = e.vertices().map(|v| v.data().index);
            [a.min(b), a.max(b)]
        })
        .collect();
    edges.sort_unstable();
    let edge_index: HashMap<[usize; 2], usize> =
        edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    let mut edge_faces = vec![[None, None]; edges.len()];
    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for (ti, &[a, b, c]) in triangles.iter().enumerate() {
        let es = [[a, b], [a, c], [b, c]].map(|e| edge_index[&e]);
        for &e in &es {
            let slot = &mut edge_faces[e];
            if slot[0].is_none() {
                slot[0] = Some(ti);
            } else {
                slot[1] = Some(ti);
            }
        }
        triangle_edges.push(es);
    }
    debug_assert_eq!(tri_index.len(), triangles.len());

    Ok(Triangulation {
        n_vertices: n,
        edges,
        triangles,
        edge_faces,
        triangle_edges,
    })
}

/// Circumcentre and circumradius, or `None` for (numerically) collinear input.
/// The result does not depend on the order of the arguments.
pub fn circumcircle(a: Point, b: Point, c: Point) -> Option<(Point, f64)> {
    let mut v = [a, b, c];
    v.sort_by(|p, q| p.lex_cmp(q));
    let [a, b, c] = v;
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    if d == 0.0 {
        return None;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    if !ux.is_finite() || !uy.is_finite() {
        return None;
    }
    Some((Point::new(a.x + ux, a.y + uy), ux.hypot(uy)))
}

fn check_distinct(a: &Point, b: &Point, c: &Point) -> Result<()> {
    if a == b || a == c || b == c {
        Err(Error::CoincidentPoints)
    } else {
        Ok(())
    }
}

/// Index (0, 1, 2 for a, b, c) of the obtuse angle, if there is one.
fn obtuse_vertex(a: &Point, b: &Point, c: &Point) -> Option<usize> {
    let dot = |p: &Point, q: &Point, r: &Point| (q.x - p.x) * (r.x - p.x) + (q.y - p.y) * (r.y - p.y);
    if dot(a, b, c) < 0.0 {
        Some(0)
    } else if dot(b, a, c) < 0.0 {
        Some(1)
    } else if dot(c, a, b) < 0.0 {
        Some(2)
    } else {
        None
    }
}

/// True when no angle of the triangle exceeds 90°.
pub fn is_non_obtuse(a: Point, b: Point, c: Point) -> bool {
    obtuse_vertex(&a, &b, &c).is_none()
}

/// Smallest `r` at which the three closed `r`-disks at the vertices cover the
/// triangle and pairwise meet along its edges: the circumradius for acute and right
/// triangles, half the longest side for obtuse (and collinear) ones. This is the
/// radius of the smallest enclosing circle.
pub fn triangle_cover_radius(a: Point, b: Point, c: Point) -> Result<f64> {
    check_distinct(&a, &b, &c)?;
    let half_longest = 0.5 * a.dist(&b).max(a.dist(&c)).max(b.dist(&c));
    if obtuse_vertex(&a, &b, &c).is_some() {
        return Ok(half_longest);
    }
    match circumcircle(a, b, c) {
        Some((_, r)) => Ok(r.max(half_longest)),
        None => Ok(half_longest),
    }
}

/// The point of the triangle covered last by the growing disks: the circumcentre
/// for non-obtuse triangles, the midpoint of the longest side otherwise.
pub fn triangle_cover_point(a: Point, b: Point, c: Point) -> Result<Point> {
    check_distinct(&a, &b, &c)?;
    let longest_mid = || {
        let sides = [(a.dist2(&b), a, b), (a.dist2(&c), a, c), (b.dist2(&c), b, c)];
        let (_, p, q) = sides
            .into_iter()
            .max_by(|x, y| x.0.total_cmp(&y.0))
            .expect("three sides");
        p.midpoint(&q)
    };
    if obtuse_vertex(&a, &b, &c).is_some() {
        return Ok(longest_mid());
    }
    Ok(circumcircle(a, b, c).map(|(o, _)| o).unwrap_or_else(longest_mid))
}

/// One simplex of the filtration.
///
/// `index` points into the triangulation's vertex, edge or triangle list depending
/// on `dimension`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    pub dimension: u8,
    vertices: [usize; 3],
    pub value: f64,
    pub index: usize,
}

impl Simplex {
    pub fn vertices(&self) -> &[usize] {
        &self.vertices[..=self.dimension as usize]
    }

    fn order(&self, other: &Simplex) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.dimension.cmp(&other.dimension))
            .then_with(|| self.vertices().cmp(other.vertices()))
    }
}

/// Delaunay complex with a filtration value per simplex.
///
/// Simplices are totally ordered by (value, dimension, lexicographic vertex tuple).
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFiltration {
    triangulation: Triangulation,
    simplices: Vec<Simplex>,
    edge_values: Vec<f64>,
    triangle_values: Vec<f64>,
    edge_rank: Vec<usize>,
    triangle_rank: Vec<usize>,
}

impl AlphaFiltration {
    pub fn triangulation(&self) -> &Triangulation {
        &self.triangulation
    }

    /// All simplices in filtration order.
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn edge_value(&self, e: usize) -> f64 {
        self.edge_values[e]
    }

    pub fn triangle_value(&self, t: usize) -> f64 {
        self.triangle_values[t]
    }

    /// Position of edge `e` in the filtration order.
    pub fn edge_rank(&self, e: usize) -> usize {
        self.edge_rank[e]
    }

    /// Position of triangle `t` in the filtration order.
    pub fn triangle_rank(&self, t: usize) -> usize {
        self.triangle_rank[t]
    }

    /// Vertex, edge and triangle counts of the subcomplex at parameter `r`.
    pub fn counts_at(&self, r: f64) -> (usize, usize, usize) {
        let mut c = [0usize; 3];
        for s in self.simplices.iter().take_while(|s| s.value <= r) {
            c[s.dimension as usize] += 1;
        }
        (c[0], c[1], c[2])
    }
}

pub fn build_alpha_filtration(tri: Triangulation, pattern: &PointPattern) -> AlphaFiltration {
    let pts = pattern.points();
    let mut simplices = Vec::with_capacity(tri.n_vertices + tri.edges.len() + tri.triangles.len());
    for v in 0..tri.n_vertices {
        simplices.push(Simplex {
            dimension: 0,
            vertices: [v, 0, 0],
            value: 0.0,
            index: v,
        });
    }
    let edge_values: Vec<f64> = tri
        .edges
        .iter()
        .map(|&[a, b]| 0.5 * pts[a].dist(&pts[b]))
        .collect();
    for (i, &[a, b]) in tri.edges.iter().enumerate() {
        simplices.push(Simplex {
            dimension: 1,
            vertices: [a, b, 0],
            value: edge_values[i],
            index: i,
        });
    }
    let triangle_values: Vec<f64> = tri
        .triangles
        .iter()
        .zip(&tri.triangle_edges)
        .map(|(&[a, b, c], es)| {
            let r = triangle_cover_radius(pts[a], pts[b], pts[c])
                .expect("Delaunay triangle vertices are distinct");
            // keep faces no later than their cofaces despite rounding
            es.iter().map(|&e| edge_values[e]).fold(r, f64::max)
        })
        .collect();
    for (i, &[a, b, c]) in tri.triangles.iter().enumerate() {
        simplices.push(Simplex {
            dimension: 2,
            vertices: [a, b, c],
            value: triangle_values[i],
            index: i,
        });
    }
    simplices.sort_by(Simplex::order);

    let mut edge_rank = vec![0; tri.edges.len()];
    let mut triangle_rank = vec![0; tri.triangles.len()];
    for (pos, s) in simplices.iter().enumerate() {
        match s.dimension {
            1 => edge_rank[s.index] = pos,
            2 => triangle_rank[s.index] = pos,
            _ => {}
        }
    }

    AlphaFiltration {
        triangulation: tri,
        simplices,
        edge_values,
        triangle_values,
        edge_rank,
        triangle_rank,
    }
}

/// Convenience: triangulate and build the filtration in one go.
pub fn alpha_filtration(pattern: &PointPattern) -> Result<AlphaFiltration> {
    Ok(build_alpha_filtration(build_delaunay(pattern)?, pattern))
}
