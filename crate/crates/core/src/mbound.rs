//! M-bounded persistence diagrams of clusters (dimension 0) and loops (dimension 1).
//!
//! Clusters are tracked with a union-find over the points, processing Delaunay edges
//! in filtration order. When two live clusters meet, the union dies outright if its
//! diameter exceeds `M`; otherwise the cluster whose contact point is
//! lexicographically larger dies and is killed by the other contact point.
//!
//! Loops are tracked on the dual side. A hole at parameter `r` is a bounded connected
//! component of the plane minus the complex, i.e. a set of not-yet-inserted triangles
//! glued along not-yet-inserted edges. Sweeping the filtration backwards turns hole
//! splits into unions, so a second union-find over the triangles (plus one node for
//! the outer face) recovers the standard pairing: the edge whose insertion separates
//! two dual components gives birth to the younger one, which dies when its last
//! triangle (the one with the largest value) is inserted. The size of a hole at a
//! split is the diameter of its boundary vertices, which coincides with the diameter
//! of the vertices of its triangles; components keep the convex hull of those
//! vertices so the diameter is cheap to recompute.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{
    alpha_filtration, triangle_cover_point, AlphaFiltration, Point, PointPattern, Window,
};
use crate::unionfind::UnionFind;

/// What ended a feature: the killing point for a cluster, the vertex triple of the
/// last-covered triangle for a loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Killer {
    Point(usize),
    Triangle([usize; 3]),
}

impl Killer {
    pub fn indices(&self) -> &[usize] {
        match self {
            Killer::Point(i) => std::slice::from_ref(i),
            Killer::Triangle(t) => t,
        }
    }
}

impl fmt::Display for Killer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Killer::Point(i) => write!(f, "{i}"),
            Killer::Triangle([a, b, c]) => write!(f, "{a}:{b}:{c}"),
        }
    }
}

impl FromStr for Killer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts = s
            .split(':')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad killer {s:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        match parts.as_slice() {
            [i] => Ok(Killer::Point(*i)),
            [a, b, c] => Ok(Killer::Triangle([*a, *b, *c])),
            _ => Err(format!("bad killer {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub dimension: u8,
    pub birth: f64,
    pub death: f64,
    /// Creation time before size filtering. Equals `birth` for clusters.
    pub standard_birth: f64,
    pub killer: Killer,
    /// Loops only: the edge inserted at `birth`.
    pub creator: Option<[usize; 2]>,
}

impl Feature {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    fn order(&self, other: &Feature) -> Ordering {
        self.dimension
            .cmp(&other.dimension)
            .then(self.birth.total_cmp(&other.birth))
            .then(self.death.total_cmp(&other.death))
            .then_with(|| self.killer.indices().cmp(other.killer.indices()))
    }
}

/// The M-bounded diagrams in both dimensions, restricted to features dying by `r_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    features: Vec<Feature>,
    m: f64,
    r_f: f64,
    n_points: usize,
    window: Window,
}

impl PersistenceDiagram {
    /// Assembles a diagram from precomputed features, sorting them canonically.
    pub fn from_features(
        mut features: Vec<Feature>,
        m: f64,
        r_f: f64,
        n_points: usize,
        window: Window,
    ) -> Self {
        features.sort_by(Feature::order);
        Self {
            features,
            m,
            r_f,
            n_points,
            window,
        }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn of_dimension(&self, q: u8) -> impl Iterator<Item = &Feature> + '_ {
        self.features.iter().filter(move |f| f.dimension == q)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn r_f(&self) -> f64 {
        self.r_f
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }
}

struct Cluster {
    members: Vec<usize>,
    diameter: f64,
    alive: bool,
}

/// Cluster deaths (dimension-0 features) up to `r_f`.
pub fn h0_features(
    filtration: &AlphaFiltration,
    pattern: &PointPattern,
    m: f64,
    r_f: f64,
) -> Vec<Feature> {
    let pts = pattern.points();
    let n = pts.len();
    // no union of points can be wider than the bounding box
    let track_size = m < pattern.extent();
    let mut uf = UnionFind::new(n);
    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            members: if track_size { vec![i] } else { Vec::new() },
            diameter: 0.0,
            alive: true,
        })
        .collect();
    let mut features = Vec::new();
    let mut died = |death: f64, killer: usize| {
        features.push(Feature {
            dimension: 0,
            birth: 0.0,
            death,
            standard_birth: 0.0,
            killer: Killer::Point(killer),
            creator: None,
        })
    };

    for s in filtration.simplices().iter().filter(|s| s.dimension == 1) {
        if s.value > r_f {
            break;
        }
        let (u, v) = (s.vertices()[0], s.vertices()[1]);
        let (ru, rv) = (uf.find(u), uf.find(v));
        if ru == rv {
            continue;
        }
        let (alive_u, alive_v) = (clusters[ru].alive, clusters[rv].alive);
        let mut merged_alive = false;
        let mut merged_diameter = 0.0;
        match (alive_u, alive_v) {
            (false, false) => {}
            (true, false) => died(s.value, v),
            (false, true) => died(s.value, u),
            (true, true) => {
                let diameter = if track_size {
                    cross_diameter(pts, &clusters[ru], &clusters[rv])
                } else {
                    0.0
                };
                if diameter > m {
                    died(s.value, v);
                    died(s.value, u);
                } else {
                    if pts[u].lex_cmp(&pts[v]) == Ordering::Greater {
                        died(s.value, v);
                    } else {
                        died(s.value, u);
                    }
                    merged_alive = true;
                    merged_diameter = diameter;
                }
            }
        }
        let root = uf.union(ru, rv).expect("distinct roots");
        let other = if root == ru { rv } else { ru };
        let mut absorbed = std::mem::take(&mut clusters[other].members);
        let kept = &mut clusters[root];
        if merged_alive && track_size {
            kept.members.append(&mut absorbed);
        } else {
            kept.members = Vec::new();
        }
        kept.alive = merged_alive;
        kept.diameter = merged_diameter;
    }
    features
}

fn cross_diameter(pts: &[Point], a: &Cluster, b: &Cluster) -> f64 {
    let mut d2: f64 = 0.0;
    for &i in &a.members {
        for &j in &b.members {
            d2 = d2.max(pts[i].dist2(&pts[j]));
        }
    }
    a.diameter.max(b.diameter).max(d2.sqrt())
}

struct Hole {
    /// Forward filtration position of the oldest triangle; `usize::MAX` for the outer face.
    root_rank: usize,
    root_triangle: usize,
    hull: Vec<Point>,
    /// Earliest split time (with its edge) at which the size was below `M`.
    bounded: Option<(f64, [usize; 2])>,
}

impl Hole {
    fn is_outer(&self) -> bool {
        self.root_rank == usize::MAX
    }
}

/// Loop features (dimension 1) dying by `r_f` whose size drops below `m` at some
/// split before death.
pub fn h1_features(
    filtration: &AlphaFiltration,
    pattern: &PointPattern,
    m: f64,
    r_f: f64,
) -> Vec<Feature> {
    let pts = pattern.points();
    let tri = filtration.triangulation();
    let n_tri = tri.triangles().len();
    if n_tri == 0 {
        return Vec::new();
    }
    let track_size = m <= pattern.extent();
    let outer = n_tri;
    let mut uf = UnionFind::new(n_tri + 1);
    let mut holes: Vec<Hole> = tri
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, vs)| Hole {
            root_rank: filtration.triangle_rank(t),
            root_triangle: t,
            hull: if track_size {
                convex_hull(vs.iter().map(|&v| pts[v]).collect())
            } else {
                Vec::new()
            },
            bounded: None,
        })
        .collect();
    holes.push(Hole {
        root_rank: usize::MAX,
        root_triangle: usize::MAX,
        hull: Vec::new(),
        bounded: None,
    });

    let mut features = Vec::new();
    for s in filtration.simplices().iter().rev() {
        if s.dimension != 1 {
            continue;
        }
        let [fa, fb] = tri.edge_faces()[s.index];
        let (ra, rb) = (uf.find(fa.unwrap_or(outer)), uf.find(fb.unwrap_or(outer)));
        if ra == rb {
            continue;
        }
        let (young, elder) = if holes[ra].root_rank < holes[rb].root_rank {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let edge = tri.edges()[s.index];
        let death = filtration.triangle_value(holes[young].root_triangle);
        if s.value < death {
            // a genuine split: both sides get a fresh size
            for side in [young, elder] {
                let hole = &mut holes[side];
                if hole.is_outer() {
                    continue;
                }
                if !track_size || hull_diameter(&hole.hull) < m {
                    hole.bounded = Some((s.value, edge));
                }
            }
            let hole = &holes[young];
            if let Some((birth, creator)) = hole.bounded {
                if death <= r_f {
                    features.push(Feature {
                        dimension: 1,
                        birth,
                        death,
                        standard_birth: s.value,
                        killer: Killer::Triangle(tri.triangles()[hole.root_triangle]),
                        creator: Some(creator),
                    });
                }
            }
        }

        let root = uf.union(ra, rb).expect("distinct roots");
        let absorbed_hull = std::mem::take(&mut holes[young].hull);
        let mut elder_hole = std::mem::replace(
            &mut holes[elder],
            Hole {
                root_rank: 0,
                root_triangle: 0,
                hull: Vec::new(),
                bounded: None,
            },
        );
        if track_size && !elder_hole.is_outer() {
            let mut pts = std::mem::take(&mut elder_hole.hull);
            pts.extend(absorbed_hull);
            elder_hole.hull = convex_hull(pts);
        }
        holes[root] = elder_hole;
    }
    features
}

fn cross(o: &Point, a: &Point, b: &Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain. Collinear points are dropped; the farthest pair of the
/// input is always among the returned vertices.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.lex_cmp(b));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let half_hull = |iter: &mut dyn Iterator<Item = &Point>| {
        let mut chain: Vec<Point> = Vec::new();
        for p in iter {
            while chain.len() >= 2 && cross(&chain[chain.len() - 2], &chain[chain.len() - 1], p) <= 0.0 {
                chain.pop();
            }
            chain.push(*p);
        }
        chain.pop();
        chain
    };
    let mut hull = half_hull(&mut pts.iter());
    hull.extend(half_hull(&mut pts.iter().rev()));
    hull
}

fn hull_diameter(hull: &[Point]) -> f64 {
    let mut d2: f64 = 0.0;
    for (i, p) in hull.iter().enumerate() {
        for q in &hull[i + 1..] {
            d2 = d2.max(p.dist2(q));
        }
    }
    d2.sqrt()
}

fn check_params(m: f64, r_f: f64) -> Result<()> {
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("M must be positive, got {m}")));
    }
    if !(r_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "r_f must be positive, got {r_f}"
        )));
    }
    Ok(())
}

/// Both M-bounded diagrams of `pattern`.
pub fn persistence_diagram(pattern: &PointPattern, m: f64, r_f: f64) -> Result<PersistenceDiagram> {
    check_params(m, r_f)?;
    let filtration = alpha_filtration(pattern)?;
    Ok(diagram_from_filtration(&filtration, pattern, m, r_f))
}

pub fn diagram_from_filtration(
    filtration: &AlphaFiltration,
    pattern: &PointPattern,
    m: f64,
    r_f: f64,
) -> PersistenceDiagram {
    let mut features = h0_features(filtration, pattern, m, r_f);
    features.extend(h1_features(filtration, pattern, m, r_f));
    PersistenceDiagram::from_features(features, m, r_f, pattern.len(), *pattern.window())
}

/// Per-point totals of `f(0, death)` over the clusters each point kills.
pub fn attribute_h0(
    diagram: &PersistenceDiagram,
    pattern: &PointPattern,
    f: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let mut totals = vec![0.0; pattern.len()];
    for feat in diagram.of_dimension(0) {
        if let Killer::Point(i) = feat.killer {
            totals[i] += f(0.0, feat.death);
        }
    }
    totals
}

/// Per-point totals of `f(birth, death)` over the loops each point gives birth to.
///
/// A loop is credited to the lexicographically smaller endpoint of its creating
/// edge. When two loops share a creating edge and birth time, the smaller endpoint
/// goes to the loop whose last-covered point is lexicographically smaller and the
/// other endpoint to the other loop.
pub fn attribute_h1(
    diagram: &PersistenceDiagram,
    pattern: &PointPattern,
    f: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let pts = pattern.points();
    let mut totals = vec![0.0; pattern.len()];
    let loops: Vec<&Feature> = diagram.of_dimension(1).collect();
    let cover_point = |feat: &Feature| match feat.killer {
        Killer::Triangle([a, b, c]) => triangle_cover_point(pts[a], pts[b], pts[c]).ok(),
        Killer::Point(_) => None,
    };
    for (i, feat) in loops.iter().enumerate() {
        let Some([a, b]) = feat.creator else { continue };
        let (lo, hi) = if pts[a].lex_cmp(&pts[b]) == Ordering::Greater {
            (b, a)
        } else {
            (a, b)
        };
        let twin = loops.iter().enumerate().find(|(j, g)| {
            *j != i && g.creator.map(|[x, y]| [x.min(y), x.max(y)]) == Some([a.min(b), a.max(b)]) && g.birth == feat.birth
        });
        let owner = match twin {
            None => lo,
            Some((_, g)) => match (cover_point(feat), cover_point(g)) {
                (Some(p), Some(q)) if p.lex_cmp(&q) == Ordering::Greater => hi,
                _ => lo,
            },
        };
        totals[owner] += f(feat.birth, feat.death);
    }
    totals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Window;

    fn pattern(pts: &[(f64, f64)]) -> PointPattern {
        PointPattern::new(
            pts.iter().map(|&p| p.into()).collect(),
            Window::new(-5.0, -5.0, 5.0, 5.0).unwrap(),
        )
        .unwrap()
    }

    fn equilateral() -> PointPattern {
        pattern(&[(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)])
    }

    #[test]
    fn killer_text_round_trip() {
        for k in [Killer::Point(7), Killer::Triangle([1, 4, 9])] {
            assert_eq!(k.to_string().parse::<Killer>().unwrap(), k);
        }
        assert!("1:2".parse::<Killer>().is_err());
    }

    #[test]
    fn single_point_has_no_features() {
        let d = persistence_diagram(&pattern(&[(0.3, 0.3)]), 10.0, 1.0).unwrap();
        assert!(d.features().is_empty());
    }

    #[test]
    fn empty_pattern_has_no_features() {
        let d = persistence_diagram(&PointPattern::empty(Window::square(1.0).unwrap()), 1.0, 1.0).unwrap();
        assert!(d.features().is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(persistence_diagram(&equilateral(), 0.0, 1.0).is_err());
        assert!(persistence_diagram(&equilateral(), 1.0, -1.0).is_err());
    }

    #[test]
    fn two_points_lexicographically_larger_dies() {
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0)]);
        let d = persistence_diagram(&p, 10.0, 1.0).unwrap();
        assert_eq!(d.features().len(), 1);
        let f = &d.features()[0];
        assert_eq!((f.dimension, f.birth, f.death), (0, 0.0, 0.5));
        assert_eq!(f.killer, Killer::Point(0));
    }

    #[test]
    fn merge_beyond_r_f_is_ignored() {
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(persistence_diagram(&p, 10.0, 0.4).unwrap().features().is_empty());
    }

    #[test]
    fn oversized_merge_kills_both() {
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.9)]);
        let d = persistence_diagram(&p, 1.2, 1.0).unwrap();
        let deaths: Vec<f64> = d.of_dimension(0).map(|f| f.death).collect();
        assert_eq!(deaths.len(), 3);
        assert!((deaths[0] - 0.45).abs() < 1e-12);
        assert!((deaths[1] - 0.5).abs() < 1e-12);
        assert!((deaths[2] - 0.5).abs() < 1e-12);
        let mut killers: Vec<Killer> = d.of_dimension(0).map(|f| f.killer).collect();
        killers.sort();
        // (0,0.9) is killed by (0,0); at 0.5 the two clusters kill each other
        assert_eq!(killers, vec![Killer::Point(0), Killer::Point(0), Killer::Point(1)]);
    }

    #[test]
    fn alive_cluster_meeting_dead_cluster_dies() {
        // {0,1} dies as oversized at 0.5, then 2 joins at 0.6
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0), (2.2, 0.0)]);
        let d = persistence_diagram(&p, 0.9, 1.0).unwrap();
        let deaths: Vec<f64> = d.of_dimension(0).map(|f| f.death).collect();
        assert_eq!(deaths.len(), 3);
        assert!((deaths[2] - 0.6).abs() < 1e-12);
        assert_eq!(d.of_dimension(0).last().unwrap().killer, Killer::Point(1));
    }

    #[test]
    fn equilateral_loop() {
        let d = persistence_diagram(&equilateral(), 10.0, 1.0).unwrap();
        let h0: Vec<f64> = d.of_dimension(0).map(|f| f.death).collect();
        assert_eq!(h0.len(), 2);
        assert!(h0.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        let h1: Vec<&Feature> = d.of_dimension(1).collect();
        assert_eq!(h1.len(), 1);
        assert!((h1[0].birth - 0.5).abs() < 1e-12);
        assert!((h1[0].death - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(h1[0].standard_birth, h1[0].birth);
        assert_eq!(h1[0].killer, Killer::Triangle([0, 1, 2]));
    }

    #[test]
    fn equilateral_loop_too_large() {
        assert_eq!(persistence_diagram(&equilateral(), 0.9, 1.0).unwrap().of_dimension(1).count(), 0);
        // size 1 is not below M = 1
        assert_eq!(persistence_diagram(&equilateral(), 1.0, 1.0).unwrap().of_dimension(1).count(), 0);
        assert_eq!(persistence_diagram(&equilateral(), 1.01, 1.0).unwrap().of_dimension(1).count(), 1);
    }

    #[test]
    fn loop_dying_after_r_f_is_dropped() {
        assert_eq!(persistence_diagram(&equilateral(), 10.0, 0.55).unwrap().of_dimension(1).count(), 0);
    }

    #[test]
    fn unit_square_loop() {
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let d = persistence_diagram(&p, 10.0, 1.0).unwrap();
        let h1: Vec<&Feature> = d.of_dimension(1).collect();
        assert_eq!(h1.len(), 1);
        assert!((h1[0].birth - 0.5).abs() < 1e-12);
        assert!((h1[0].death - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn obtuse_triangle_has_no_loop() {
        let p = pattern(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.3)]);
        assert_eq!(persistence_diagram(&p, 10.0, 2.0).unwrap().of_dimension(1).count(), 0);
    }

    #[test]
    fn split_hole_gets_bounded_birth() {
        // A diamond whose perimeter closes at ~0.781 as one hole of size 2.4, later
        // split at 1.0 by the vertical diagonal into two acute halves of size 2.0
        // that are covered at ~1.0167.
        let p = pattern(&[(-1.2, 0.0), (0.0, -1.0), (0.0, 1.0), (1.2, 0.0)]);
        let side = 0.5 * 1.2f64.hypot(1.0);
        let unbounded = persistence_diagram(&p, 10.0, 2.0).unwrap();
        let h1: Vec<&Feature> = unbounded.of_dimension(1).collect();
        assert_eq!(h1.len(), 2);
        assert!((h1[0].birth - side).abs() < 1e-12);
        assert!((h1[1].birth - 1.0).abs() < 1e-12);
        assert!(h1.iter().all(|f| f.birth == f.standard_birth));

        // the ring (size 2.4) is never M-bounded, both halves are from the split on
        let bounded = persistence_diagram(&p, 2.2, 2.0).unwrap();
        let h1: Vec<&Feature> = bounded.of_dimension(1).collect();
        assert_eq!(h1.len(), 2, "{h1:?}");
        assert!(h1.iter().all(|f| (f.birth - 1.0).abs() < 1e-12));
        let mut std_births: Vec<f64> = h1.iter().map(|f| f.standard_birth).collect();
        std_births.sort_by(f64::total_cmp);
        assert!((std_births[0] - side).abs() < 1e-12);
        assert!((std_births[1] - 1.0).abs() < 1e-12);

        // below the half size nothing is bounded
        assert_eq!(persistence_diagram(&p, 2.0, 2.0).unwrap().of_dimension(1).count(), 0);

        // both holes born by one split: one creator endpoint each
        let xi = attribute_h1(&bounded, &p, |_, _| 1.0);
        assert_eq!(xi, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn attribution_sums() {
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0)]);
        let d = persistence_diagram(&p, 10.0, 1.0).unwrap();
        assert_eq!(attribute_h0(&d, &p, |_, _| 1.0), vec![1.0, 0.0]);

        let p = pattern(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.9)]);
        let d = persistence_diagram(&p, 1.2, 1.0).unwrap();
        let total: f64 = attribute_h0(&d, &p, |_, death| death).iter().sum();
        assert!((total - 1.45).abs() < 1e-12);

        let d = persistence_diagram(&equilateral(), 10.0, 1.0).unwrap();
        let xi = attribute_h1(&d, &equilateral(), |_, _| 1.0);
        assert_eq!(xi.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn hull_keeps_extreme_points() {
        let h = convex_hull(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 0.2),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 1.0),
        ]);
        assert_eq!(h.len(), 4);
        assert!((hull_diameter(&h) - 2f64.sqrt()).abs() < 1e-15);
    }
}
