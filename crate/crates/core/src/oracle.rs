//! Brute-force references for the topology pipeline.
//!
//! [`grid_betti`] rasterizes the union of closed disks and counts components
//! directly on the pixel grid; [`gilbert_components`] counts connected components of
//! the Gilbert graph by checking every pair. Neither shares code with the Delaunay
//! route, so agreement between them and the filtration is meaningful.

use crate::error::{Error, Result};
use crate::geom::PointPattern;
use crate::unionfind::UnionFind;

/// Raster resolution and the margin added around the observation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    pub margin: f64,
}

impl GridSpec {
    /// Grid with resolution `h` and a margin just large enough for radius `r`.
    pub fn for_radius(h: f64, r: f64) -> Self {
        Self {
            resolution: h,
            margin: r + 2.0 * h,
        }
    }
}

/// Betti numbers (β0, β1) of the union of closed `r`-disks, measured on a raster.
///
/// A cell is occupied when its centre is within `r` of some point. β0 counts
/// 4-connected occupied components, β1 counts 8-connected vacant components that
/// do not touch the raster border.
pub fn grid_betti(pattern: &PointPattern, r: f64, grid: GridSpec) -> Result<(usize, usize)> {
    let h = grid.resolution;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("grid resolution must be positive, got {h}")));
    }
    if !(grid.margin >= r) {
        return Err(Error::InvalidArgument(format!(
            "grid margin {} smaller than radius {r}",
            grid.margin
        )));
    }
    if pattern.is_empty() {
        return Ok((0, 0));
    }
    let area = pattern.window().dilate(grid.margin)?;
    let nx = (area.width() / h).ceil() as usize;
    let ny = (area.height() / h).ceil() as usize;
    let (ox, oy) = (area.x0(), area.y0());
    let centre = |i: usize, o: f64| o + (i as f64 + 0.5) * h;

    let mut occupied = vec![false; nx * ny];
    let r2 = r * r;
    for p in pattern.points() {
        let lo_x = (((p.x - r - ox) / h).floor().max(0.0)) as usize;
        let hi_x = ((((p.x + r - ox) / h).ceil()) as usize).min(nx - 1);
        let lo_y = (((p.y - r - oy) / h).floor().max(0.0)) as usize;
        let hi_y = ((((p.y + r - oy) / h).ceil()) as usize).min(ny - 1);
        for j in lo_y..=hi_y {
            let dy = centre(j, oy) - p.y;
            if dy * dy > r2 {
                continue;
            }
            let inside = |i: usize| {
                let dx = centre(i, ox) - p.x;
                dx * dx + dy * dy <= r2
            };
            // approximate span from the chord, then settle both ends with the exact test
            let half = (r2 - dy * dy).sqrt();
            let guess = |x: f64| (((x - ox) / h - 0.5).round().max(0.0) as usize).clamp(lo_x, hi_x);
            let (mut a, mut b) = (guess(p.x - half), guess(p.x + half));
            while a > lo_x && inside(a - 1) {
                a -= 1;
            }
            while a <= b && !inside(a) {
                a += 1;
            }
            while b < hi_x && inside(b + 1) {
                b += 1;
            }
            while b >= a && !inside(b) {
                if b == 0 {
                    break;
                }
                b -= 1;
            }
            if a <= b && inside(a) {
                let row = j * nx;
                occupied[row + a..=row + b].fill(true);
            }
        }
    }

    let mut seen = vec![false; nx * ny];
    let mut stack: Vec<usize> = Vec::new();
    let mut beta0 = 0;
    let mut beta1 = 0;
    for start in 0..nx * ny {
        if seen[start] {
            continue;
        }
        let filled = occupied[start];
        let mut touches_border = false;
        seen[start] = true;
        stack.push(start);
        while let Some(c) = stack.pop() {
            let (i, j) = ((c % nx) as isize, (c / nx) as isize);
            if i == 0 || j == 0 || i as usize == nx - 1 || j as usize == ny - 1 {
                touches_border = true;
            }
            let mut visit = |di: isize, dj: isize| {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a as usize >= nx || b as usize >= ny {
                    return;
                }
                let k = b as usize * nx + a as usize;
                if !seen[k] && occupied[k] == filled {
                    seen[k] = true;
                    stack.push(k);
                }
            };
            visit(1, 0);
            visit(-1, 0);
            visit(0, 1);
            visit(0, -1);
            if !filled {
                visit(1, 1);
                visit(1, -1);
                visit(-1, 1);
                visit(-1, -1);
            }
        }
        if filled {
            beta0 += 1;
        } else if !touches_border {
            beta1 += 1;
        }
    }
    Ok((beta0, beta1))
}

/// Number of connected components of the Gilbert graph joining points at distance
/// at most `2r`.
pub fn gilbert_components(pattern: &PointPattern, r: f64) -> usize {
    let pts = pattern.points();
    let reach2 = 4.0 * r * r;
    let mut uf = UnionFind::new(pts.len());
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[i].dist2(&pts[j]) <= reach2 {
                uf.union(i, j);
            }
        }
    }
    uf.components()
}
