//! Seeded samplers for the null and alternative point-process models.
//!
//! Every sample is a pure function of the model and a [`SeedSpec`]: the master seed
//! keys a ChaCha8 generator and the stream id selects one of its independent streams,
//! so replications can be drawn in any order or in parallel.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, Window};

pub const DEFAULT_CHAIN: u64 = 100_000;
pub const DEFAULT_BURNIN: u64 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Poisson { intensity: f64 },
    MaternCluster { kappa: f64, radius: f64, mu: f64 },
    Strauss { beta: f64, gamma: f64, radius: f64, chain: u64, burnin: u64 },
}

/// A point-process model on a fixed window.
///
/// JSON form: `{"variant": "poisson"|"matern"|"strauss", "window": [x0, y0, x1, y1],
/// "params": {...}, "chain": n, "burnin": n}`; the last two only for Strauss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ModelSpec {
    model: Model,
    window: Window,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    variant: String,
    window: Window,
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chain: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    burnin: Option<u64>,
}

impl TryFrom<RawModel> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let get = |key: &str| {
            raw.params
                .get(key)
                .copied()
                .ok_or_else(|| Error::InvalidModel(format!("missing parameter '{key}'")))
        };
        let expect_keys = |keys: &[&str]| {
            match raw.params.keys().find(|k| !keys.contains(&k.as_str())) {
                Some(k) => Err(Error::InvalidModel(format!(
                    "unknown parameter '{k}' for variant '{}'",
                    raw.variant
                ))),
                None => Ok(()),
            }
        };
        let model = match raw.variant.as_str() {
            "poisson" => {
                expect_keys(&["intensity"])?;
                Model::Poisson { intensity: get("intensity")? }
            }
            "matern" => {
                expect_keys(&["kappa", "radius", "mu"])?;
                Model::MaternCluster {
                    kappa: get("kappa")?,
                    radius: get("radius")?,
                    mu: get("mu")?,
                }
            }
            "strauss" => {
                expect_keys(&["beta", "gamma", "radius"])?;
                Model::Strauss {
                    beta: get("beta")?,
                    gamma: get("gamma")?,
                    radius: get("radius")?,
                    chain: raw.chain.unwrap_or(DEFAULT_CHAIN),
                    burnin: raw.burnin.unwrap_or(DEFAULT_BURNIN),
                }
            }
            other => return Err(Error::InvalidModel(format!("unknown variant '{other}'"))),
        };
        if !matches!(model, Model::Strauss { .. }) && (raw.chain.is_some() || raw.burnin.is_some()) {
            return Err(Error::InvalidModel(
                "'chain' and 'burnin' apply only to the strauss variant".into(),
            ));
        }
        ModelSpec::new(model, raw.window)
    }
}

impl From<ModelSpec> for RawModel {
    fn from(spec: ModelSpec) -> Self {
        let mut params = BTreeMap::new();
        let (variant, chain, burnin) = match spec.model {
            Model::Poisson { intensity } => {
                params.insert("intensity".into(), intensity);
                ("poisson", None, None)
            }
            Model::MaternCluster { kappa, radius, mu } => {
                params.insert("kappa".into(), kappa);
                params.insert("radius".into(), radius);
                params.insert("mu".into(), mu);
                ("matern", None, None)
            }
            Model::Strauss { beta, gamma, radius, chain, burnin } => {
                params.insert("beta".into(), beta);
                params.insert("gamma".into(), gamma);
                params.insert("radius".into(), radius);
                ("strauss", Some(chain), Some(burnin))
            }
        };
        RawModel {
            variant: variant.into(),
            window: spec.window,
            params,
            chain,
            burnin,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidModel(msg()))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v >= 0.0, || format!("{name} must be finite and non-negative, got {v}"))
}

fn positive(name: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v > 0.0, || format!("{name} must be finite and positive, got {v}"))
}

impl ModelSpec {
    pub fn new(model: Model, window: Window) -> Result<Self> {
        match model {
            Model::Poisson { intensity } => non_negative("intensity", intensity)?,
            Model::MaternCluster { kappa, radius, mu } => {
                non_negative("kappa", kappa)?;
                positive("radius", radius)?;
                non_negative("mu", mu)?;
            }
            Model::Strauss { beta, gamma, radius, chain, burnin } => {
                non_negative("beta", beta)?;
                check((0.0..=1.0).contains(&gamma), || {
                    format!("interaction gamma must lie in [0, 1], got {gamma}")
                })?;
                positive("radius", radius)?;
                check(chain >= burnin, || {
                    format!("chain length {chain} shorter than burn-in {burnin}")
                })?;
            }
        }
        Ok(Self { model, window })
    }

    pub fn poisson(window: Window, intensity: f64) -> Result<Self> {
        Self::new(Model::Poisson { intensity }, window)
    }

    pub fn matern(window: Window, kappa: f64, radius: f64, mu: f64) -> Result<Self> {
        Self::new(Model::MaternCluster { kappa, radius, mu }, window)
    }

    pub fn strauss(window: Window, beta: f64, gamma: f64, radius: f64) -> Result<Self> {
        Self::new(
            Model::Strauss {
                beta,
                gamma,
                radius,
                chain: DEFAULT_CHAIN,
                burnin: DEFAULT_BURNIN,
            },
            window,
        )
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn sample(&self, seed: SeedSpec) -> Result<PointPattern> {
        match self.model {
            Model::Poisson { intensity } => sample_poisson(&self.window, intensity, seed),
            Model::MaternCluster { kappa, radius, mu } => {
                sample_matern_cluster(&self.window, kappa, radius, mu, seed)
            }
            Model::Strauss { beta, gamma, radius, chain, burnin } => {
                sample_strauss(&self.window, beta, gamma, radius, chain, burnin, seed)
            }
        }
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

fn uniform_in<R: Rng>(rng: &mut R, w: &Window) -> Point {
    Point::new(
        rng.random_range(w.x0()..w.x1()),
        rng.random_range(w.y0()..w.y1()),
    )
}

// Exact coordinate repeats have probability zero but would make the pattern invalid.
fn into_pattern(points: Vec<Point>, window: &Window) -> Result<PointPattern> {
    let mut seen = HashSet::with_capacity(points.len());
    let points = points
        .into_iter()
        .filter(|p| seen.insert((p.x.to_bits(), p.y.to_bits())))
        .collect();
    PointPattern::new(points, *window)
}

pub fn sample_poisson(window: &Window, intensity: f64, seed: SeedSpec) -> Result<PointPattern> {
    non_negative("intensity", intensity)?;
    let mut rng = seed.rng();
    let n = poisson_count(&mut rng, intensity * window.area());
    let points = (0..n).map(|_| uniform_in(&mut rng, window)).collect();
    into_pattern(points, window)
}

/// Matérn cluster process. Parents are drawn on the window dilated by `radius` so that
/// clusters centred just outside still contribute offspring.
pub fn sample_matern_cluster(
    window: &Window,
    kappa: f64,
    radius: f64,
    mu: f64,
    seed: SeedSpec,
) -> Result<PointPattern> {
    ModelSpec::new(Model::MaternCluster { kappa, radius, mu }, *window)?;
    let mut rng = seed.rng();
    let outer = window.dilate(radius)?;
    let n_parents = poisson_count(&mut rng, kappa * outer.area());
    let mut points = Vec::new();
    for _ in 0..n_parents {
        let parent = uniform_in(&mut rng, &outer);
        for _ in 0..poisson_count(&mut rng, mu) {
            let rho = radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            let p = Point::new(parent.x + rho * theta.cos(), parent.y + rho * theta.sin());
            if window.contains(&p) {
                points.push(p);
            }
        }
    }
    into_pattern(points, window)
}

/// Point set with a uniform cell grid for fixed-radius neighbour counts.
struct CellGrid {
    points: Vec<Point>,
    slot: Vec<(usize, usize)>,
    cells: Vec<Vec<usize>>,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    size: f64,
}

impl CellGrid {
    fn new(window: &Window, radius: f64) -> Self {
        // cap the cell count for tiny radii on large windows
        let size = radius.max((window.area() / 4e6).sqrt());
        let nx = ((window.width() / size).ceil() as usize).max(1);
        let ny = ((window.height() / size).ceil() as usize).max(1);
        Self {
            points: Vec::new(),
            slot: Vec::new(),
            cells: vec![Vec::new(); nx * ny],
            nx,
            ny,
            x0: window.x0(),
            y0: window.y0(),
            size,
        }
    }

    fn cell_of(&self, p: &Point) -> (usize, usize) {
        let i = (((p.x - self.x0) / self.size) as usize).min(self.nx - 1);
        let j = (((p.y - self.y0) / self.size) as usize).min(self.ny - 1);
        (i, j)
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn insert(&mut self, p: Point) {
        let (i, j) = self.cell_of(&p);
        let cell = j * self.nx + i;
        self.slot.push((cell, self.cells[cell].len()));
        self.cells[cell].push(self.points.len());
        self.points.push(p);
    }

    fn remove(&mut self, k: usize) {
        let (cell, pos) = self.slot[k];
        self.cells[cell].swap_remove(pos);
        if pos < self.cells[cell].len() {
            let moved = self.cells[cell][pos];
            self.slot[moved].1 = pos;
        }
        let last = self.points.len() - 1;
        if k != last {
            let (lc, lp) = self.slot[last];
            self.cells[lc][lp] = k;
        }
        self.points.swap_remove(k);
        self.slot.swap_remove(k);
    }

    /// Points within distance `radius` of `p`, excluding index `skip`.
    fn neighbours(&self, p: &Point, radius: f64, skip: Option<usize>) -> usize {
        let (ci, cj) = self.cell_of(p);
        let reach = (radius / self.size).ceil() as usize;
        let r2 = radius * radius;
        let mut count = 0;
        for j in cj.saturating_sub(reach)..=(cj + reach).min(self.ny - 1) {
            for i in ci.saturating_sub(reach)..=(ci + reach).min(self.nx - 1) {
                for &k in &self.cells[j * self.nx + i] {
                    if Some(k) != skip && self.points[k].dist2(p) <= r2 {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Strauss process with density proportional to `beta^n gamma^s`, `s` the number of
/// pairs closer than `radius`.
///
/// Approximate sampler: a birth–death Metropolis–Hastings chain run for
/// `burnin + chain` proposals, started from a Poisson pattern of intensity
/// `beta (1 + gamma) / 2`. With `gamma = 0` the start is thinned greedily so that the
/// chain never visits a state of zero density.
pub fn sample_strauss(
    window: &Window,
    beta: f64,
    gamma: f64,
    radius: f64,
    chain: u64,
    burnin: u64,
    seed: SeedSpec,
) -> Result<PointPattern> {
    ModelSpec::new(Model::Strauss { beta, gamma, radius, chain, burnin }, *window)?;
    let mut rng = seed.rng();
    let mut grid = CellGrid::new(window, radius);
    let n0 = poisson_count(&mut rng, beta * (1.0 + gamma) / 2.0 * window.area());
    for _ in 0..n0 {
        let p = uniform_in(&mut rng, window);
        if gamma > 0.0 || grid.neighbours(&p, radius, None) == 0 {
            grid.insert(p);
        }
    }

    let mass = beta * window.area();
    for _ in 0..burnin + chain {
        let n = grid.len() as f64;
        if rng.random::<bool>() {
            let p = uniform_in(&mut rng, window);
            let t = grid.neighbours(&p, radius, None);
            let ratio = mass * gamma.powi(t as i32) / (n + 1.0);
            if rng.random::<f64>() < ratio {
                grid.insert(p);
            }
        } else if grid.len() > 0 {
            let k = rng.random_range(0..grid.len());
            let p = grid.points[k];
            let t = grid.neighbours(&p, radius, Some(k));
            let weight = mass * gamma.powi(t as i32);
            // n / weight, written to stay finite when the removed point is in conflict
            if rng.random::<f64>() * weight < n {
                grid.remove(k);
            }
        }
    }
    into_pattern(grid.points, window)
}
