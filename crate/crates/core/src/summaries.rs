//! Functional and scalar summaries of persistence diagrams and point patterns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PointPattern;
use crate::mbound::PersistenceDiagram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    DeathCount,
    PersistentBetti0,
    TCluster,
    Apf0,
    Apf1,
    RipleyL,
}

/// A function sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
    kind: CurveKind,
}

impl SummaryCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }
}

/// Counts on a (b, l) grid, stored row-major with `b` as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySurface {
    b_grid: Vec<f64>,
    l_grid: Vec<f64>,
    values: Vec<u64>,
}

impl SummarySurface {
    pub fn b_grid(&self) -> &[f64] {
        &self.b_grid
    }

    pub fn l_grid(&self) -> &[f64] {
        &self.l_grid
    }

    pub fn get(&self, bi: usize, li: usize) -> u64 {
        self.values[bi * self.l_grid.len() + li]
    }

    /// Row-major flattening used for ranking.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::GridMismatch("grid values must be finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Number of dimension-`q` features dead by each grid value.
pub fn death_count_curve(diagram: &PersistenceDiagram, q: u8, grid: &[f64]) -> Result<SummaryCurve> {
    let mut deaths: Vec<f64> = diagram.of_dimension(q).map(|f| f.death).collect();
    deaths.sort_by(f64::total_cmp);
    let values = grid
        .iter()
        .map(|&d| deaths.partition_point(|&x| x <= d) as f64)
        .collect();
    SummaryCurve::new(grid.to_vec(), values, CurveKind::DeathCount)
}

/// Dimension-`q` features born by `b` and still alive at `d`.
pub fn persistent_betti(diagram: &PersistenceDiagram, q: u8, b: f64, d: f64) -> usize {
    diagram
        .of_dimension(q)
        .filter(|f| f.birth <= b && f.death >= d)
        .count()
}

/// Loops born by `b` with lifetime at least `l`, for every `(b, l)` on the grids.
pub fn betti_life_surface(
    diagram: &PersistenceDiagram,
    b_grid: &[f64],
    l_grid: &[f64],
) -> Result<SummarySurface> {
    check_grid(b_grid)?;
    check_grid(l_grid)?;
    let loops: Vec<(f64, f64)> = diagram
        .of_dimension(1)
        .map(|f| (f.birth, f.lifetime()))
        .collect();
    let mut values = Vec::with_capacity(b_grid.len() * l_grid.len());
    for &b in b_grid {
        for &l in l_grid {
            values.push(loops.iter().filter(|&&(fb, fl)| fb <= b && fl >= l).count() as u64);
        }
    }
    Ok(SummarySurface {
        b_grid: b_grid.to_vec(),
        l_grid: l_grid.to_vec(),
        values,
    })
}

/// Integral over `[0, r_c]` of the number of cluster deaths up to each time.
pub fn t_cluster(diagram: &PersistenceDiagram, r_c: f64) -> f64 {
    diagram
        .of_dimension(0)
        .map(|f| (r_c - f.death).max(0.0))
        .sum()
}

/// Accumulated lifetimes of loops born by `r_l`.
pub fn t_loop(diagram: &PersistenceDiagram, r_l: f64) -> f64 {
    apf1(diagram, r_l)
}

/// Sum of cluster death times up to `r`.
pub fn apf0(diagram: &PersistenceDiagram, r: f64) -> f64 {
    diagram
        .of_dimension(0)
        .filter(|f| f.death <= r)
        .map(|f| f.death)
        .sum()
}

/// Sum of lifetimes of loops born by `r`.
pub fn apf1(diagram: &PersistenceDiagram, r: f64) -> f64 {
    diagram
        .of_dimension(1)
        .filter(|f| f.birth <= r)
        .map(|f| f.lifetime())
        .sum()
}

/// `apf1(r)` evaluated through persistent Betti numbers,
/// `∫₀^r β(b, 0) db + ∫₀^{r_f} β(r, t) dt − r β(r, 0)`,
/// with midpoint quadrature of step at most `h`. Each feature contributes an error
/// of at most `2h`.
pub fn apf1_via_betti(diagram: &PersistenceDiagram, r: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("quadrature step must be positive, got {h}")));
    }
    let beta = |b: f64, d: f64| persistent_betti(diagram, 1, b, d) as f64;
    let midpoint = |upper: f64, f: &dyn Fn(f64) -> f64| {
        if upper <= 0.0 {
            return 0.0;
        }
        let n = (upper / h).ceil().max(1.0) as usize;
        let step = upper / n as f64;
        (0..n).map(|i| f((i as f64 + 0.5) * step)).sum::<f64>() * step
    };
    let first = midpoint(r, &|b| beta(b, 0.0));
    let second = midpoint(diagram.r_f(), &|t| beta(r, t));
    Ok(first + second - r * beta(r, 0.0))
}

/// Translation-corrected estimate of Ripley's L-function.
///
/// `K(r) = Σ_{i≠j} 1{|x_i − x_j| ≤ r} / (λ² |W ∩ (W + x_j − x_i)|)` with `λ = n/|W|`
/// and `L(r) = sqrt(K(r)/π)`. Patterns with fewer than two points give zeros.
pub fn ripley_l(pattern: &PointPattern, r_grid: &[f64]) -> Result<SummaryCurve> {
    check_grid(r_grid)?;
    let n = pattern.len();
    if n < 2 {
        return SummaryCurve::new(r_grid.to_vec(), vec![0.0; r_grid.len()], CurveKind::RipleyL);
    }
    let w = pattern.window();
    let r_max = r_grid.last().copied().unwrap_or(0.0);
    let pts = pattern.points();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = pts[i].dist(&pts[j]);
            if d <= r_max {
                let dx = (pts[i].x - pts[j].x).abs();
                let dy = (pts[i].y - pts[j].y).abs();
                let overlap = (w.width() - dx) * (w.height() - dy);
                pairs.push((d, 1.0 / overlap));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cumulative = Vec::with_capacity(pairs.len());
    let mut acc = 0.0;
    for &(_, wt) in &pairs {
        acc += wt;
        cumulative.push(acc);
    }
    let lambda = n as f64 / w.area();
    let values = r_grid
        .iter()
        .map(|&r| {
            let k = pairs.partition_point(|p| p.0 <= r);
            let sum = if k == 0 { 0.0 } else { cumulative[k - 1] };
            // each unordered pair counts twice
            let big_k = 2.0 * sum / (lambda * lambda);
            (big_k / std::f64::consts::PI).sqrt()
        })
        .collect();
    SummaryCurve::new(r_grid.to_vec(), values, CurveKind::RipleyL)
}
