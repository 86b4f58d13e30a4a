//! Monte-Carlo calibration, Gaussian deviation tests and global envelope tests.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geom::PointPattern;
use crate::mbound::persistence_diagram;
use crate::simulate::{ModelSpec, SeedSpec};
use crate::summaries::{
    apf0, apf1, betti_life_surface, death_count_curve, ripley_l, t_cluster, t_loop, uniform_grid,
};

pub const DEFAULT_CURVE_POINTS: usize = 64;
pub const DEFAULT_SURFACE_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticId {
    TCluster,
    TLoop,
    Apf0,
    Apf1,
    L,
    DeathCurve,
    BettiSurface,
}

impl StatisticId {
    pub fn is_scalar(self) -> bool {
        matches!(self, Self::TCluster | Self::TLoop | Self::Apf0 | Self::Apf1)
    }

    fn name(self) -> &'static str {
        match self {
            Self::TCluster => "t-cluster",
            Self::TLoop => "t-loop",
            Self::Apf0 => "apf0",
            Self::Apf1 => "apf1",
            Self::L => "l",
            Self::DeathCurve => "death-curve",
            Self::BettiSurface => "betti-surface",
        }
    }
}

impl fmt::Display for StatisticId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Self::TCluster,
            Self::TLoop,
            Self::Apf0,
            Self::Apf1,
            Self::L,
            Self::DeathCurve,
            Self::BettiSurface,
        ]
        .into_iter()
        .find(|id| id.name() == s)
        .ok_or_else(|| Error::InvalidStatistic(format!("unknown statistic '{s}'")))
    }
}

/// A statistic together with every parameter needed to evaluate it on a pattern.
///
/// Scalars use `r` (r_C, r_L or the APF argument). Curves use `grid`; the Betti
/// surface uses `grid` for birth times and `l_grid` for lifetimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticSpec {
    pub id: StatisticId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    pub r_f: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub l_grid: Vec<f64>,
}

impl StatisticSpec {
    pub fn scalar(id: StatisticId, r: f64, m: f64, r_f: f64) -> Result<Self> {
        let spec = Self { id, r: Some(r), m, r_f, grid: Vec::new(), l_grid: Vec::new() };
        spec.validate()?;
        Ok(spec)
    }

    /// Functional statistic on the default grid: `n` points on `[0, r_f]` for the
    /// death curve, `n` points on `(0, min(r_f, side/4)]` for L, and `n × n` on
    /// `[0, r_f]²` for the surface.
    pub fn functional(id: StatisticId, m: f64, r_f: f64, n: usize, pattern_window_side: f64) -> Result<Self> {
        let (grid, l_grid) = match id {
            StatisticId::DeathCurve => (uniform_grid(0.0, r_f, n), Vec::new()),
            StatisticId::BettiSurface => (uniform_grid(0.0, r_f, n), uniform_grid(0.0, r_f, n)),
            StatisticId::L => {
                let top = r_f.min(pattern_window_side / 4.0);
                (uniform_grid(top / n as f64, top, n), Vec::new())
            }
            _ => {
                return Err(Error::InvalidStatistic(format!("{id} is not a functional statistic")))
            }
        };
        let spec = Self { id, r: None, m, r_f, grid, l_grid };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidStatistic(msg));
        if !(self.m > 0.0) || !(self.r_f > 0.0) {
            return bad(format!("M and r_f must be positive (got {}, {})", self.m, self.r_f));
        }
        if self.id.is_scalar() {
            match self.r {
                Some(r) if (0.0..=self.r_f).contains(&r) => {}
                Some(r) => return bad(format!("{} needs r in [0, r_f], got {r}", self.id)),
                None => return bad(format!("{} needs a radius r", self.id)),
            }
        } else {
            if self.grid.is_empty() {
                return bad(format!("{} needs a non-empty grid", self.id));
            }
            if self.grid.windows(2).any(|w| !(w[1] > w[0])) || self.grid.iter().any(|v| !v.is_finite()) {
                return bad("grid must be finite and strictly increasing".into());
            }
            if self.id == StatisticId::BettiSurface
                && (self.l_grid.is_empty() || self.l_grid.windows(2).any(|w| !(w[1] > w[0])))
            {
                return bad("betti-surface needs a strictly increasing l_grid".into());
            }
        }
        Ok(())
    }

    /// Evaluates a scalar statistic.
    pub fn evaluate_scalar(&self, pattern: &PointPattern) -> Result<f64> {
        let r = match (self.id.is_scalar(), self.r) {
            (true, Some(r)) => r,
            _ => return Err(Error::InvalidStatistic(format!("{} is not a scalar statistic", self.id))),
        };
        let d = persistence_diagram(pattern, self.m, self.r_f)?;
        Ok(match self.id {
            StatisticId::TCluster => t_cluster(&d, r),
            StatisticId::TLoop => t_loop(&d, r),
            StatisticId::Apf0 => apf0(&d, r),
            _ => apf1(&d, r),
        })
    }

    /// Evaluates a functional statistic, flattened row-major for surfaces.
    pub fn evaluate_curve(&self, pattern: &PointPattern) -> Result<Vec<f64>> {
        match self.id {
            StatisticId::L => Ok(ripley_l(pattern, &self.grid)?.values().to_vec()),
            StatisticId::DeathCurve => {
                let d = persistence_diagram(pattern, self.m, self.r_f)?;
                Ok(death_count_curve(&d, 0, &self.grid)?.values().to_vec())
            }
            StatisticId::BettiSurface => {
                let d = persistence_diagram(pattern, self.m, self.r_f)?;
                Ok(betti_life_surface(&d, &self.grid, &self.l_grid)?.flatten())
            }
            id => Err(Error::InvalidStatistic(format!("{id} is not a functional statistic"))),
        }
    }

    /// Number of values produced by [`Self::evaluate_curve`].
    pub fn curve_len(&self) -> usize {
        match self.id {
            StatisticId::BettiSurface => self.grid.len() * self.l_grid.len(),
            _ => self.grid.len(),
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluates `f` on streams `0..n` of `seed`, results in stream order.
pub fn replicate<T: Send>(
    model: &ModelSpec,
    n: u64,
    seed: u64,
    f: impl Fn(&PointPattern) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n)
        .into_par_iter()
        .map(|s| f(&model.sample(SeedSpec::new(seed, s))?))
        .collect()
}

/// Null distribution summary of a scalar statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub model: ModelSpec,
    pub statistic: StatisticSpec,
    pub n_sims: u64,
    pub seed: u64,
    pub mean: f64,
    pub variance: f64,
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

/// Simulates `n_sims` null patterns on streams `0..n_sims` and records the sample mean
/// and unbiased variance of the statistic. With `keep_values` the raw draws are stored.
pub fn calibrate(
    model: &ModelSpec,
    statistic: &StatisticSpec,
    n_sims: u64,
    seed: u64,
    keep_values: bool,
) -> Result<Calibration> {
    statistic.validate()?;
    if !statistic.id.is_scalar() {
        return Err(Error::InvalidStatistic(format!(
            "calibration needs a scalar statistic, got {}",
            statistic.id
        )));
    }
    if n_sims < 2 {
        return Err(Error::InvalidArgument(format!("n_sims must be at least 2, got {n_sims}")));
    }
    let values = replicate(model, n_sims, seed, |p| statistic.evaluate_scalar(p))?;
    let (mean, variance) = mean_variance(&values);
    Ok(Calibration {
        model: *model,
        statistic: statistic.clone(),
        n_sims,
        seed,
        mean,
        variance,
        degenerate: !(variance > 0.0),
        values: keep_values.then_some(values),
    })
}

/// Sample mean and unbiased sample variance, summed in index order.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, if values.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub statistic_spec: StatisticSpec,
    pub model: ModelSpec,
    pub calibration_sims: u64,
    pub calibration_seed: u64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Two-sided Gaussian test of the observed statistic against a calibration.
pub fn deviation_test(pattern: &PointPattern, calib: &Calibration, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    if calib.degenerate || !(calib.variance > 0.0) {
        return Err(Error::DegenerateCalibration);
    }
    if pattern.window() != calib.model.window() {
        return Err(Error::WindowMismatch {
            pattern: pattern.window().to_array(),
            calibration: calib.model.window().to_array(),
        });
    }
    let t = calib.statistic.evaluate_scalar(pattern)?;
    Ok(deviation_report(t, calib, alpha))
}

/// Report for an already evaluated statistic value.
pub fn deviation_report(t: f64, calib: &Calibration, alpha: f64) -> TestReport {
    let z = (t - calib.mean) / calib.variance.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0);
    TestReport {
        statistic: t,
        z,
        p_value: p,
        alpha,
        reject: p < alpha,
        statistic_spec: calib.statistic.clone(),
        model: calib.model,
        calibration_sims: calib.n_sims,
        calibration_seed: calib.seed,
    }
}

/// Extreme rank lengths: for each curve, its pointwise two-sided ranks sorted
/// ascending. Lexicographically smaller vectors are more extreme.
///
/// The two-sided rank at a grid point is `min(rank from below, rank from above)`;
/// tied values receive the mid-rank of their block, so a large block of equal values
/// at the edge of the sample is not treated as extreme.
pub fn erl_measure(curves: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(erl_keys(curves)?
        .into_iter()
        .map(|k| k.into_iter().map(|r| f64::from(r) / 2.0).collect())
        .collect())
}

// Same as `erl_measure` in units of half a rank, so ties compare exactly.
fn erl_keys(curves: &[Vec<f64>]) -> Result<Vec<Vec<u32>>> {
    if curves.len() < 2 {
        return Err(Error::TooFewCurves { need: 2, got: curves.len() });
    }
    let len = curves[0].len();
    if let Some(c) = curves.iter().find(|c| c.len() != len) {
        return Err(Error::GridMismatch(format!("curve lengths {len} and {}", c.len())));
    }
    let n = curves.len();
    let mut ranks = vec![Vec::with_capacity(len); n];
    let mut order: Vec<usize> = (0..n).collect();
    #[allow(clippy::needless_range_loop)]
    for k in 0..len {
        order.sort_by(|&a, &b| curves[a][k].total_cmp(&curves[b][k]));
        let mut start = 0;
        while start < n {
            let v = curves[order[start]][k];
            let mut end = start;
            while end < n && curves[order[end]][k].total_cmp(&v) == Ordering::Equal {
                end += 1;
            }
            // the block holds ranks start+1..=end from below; doubled mid-ranks
            let below = start + 1 + end;
            let above = 2 * (n + 1) - below;
            let rank = below.min(above) as u32;
            for &i in &order[start..end] {
                ranks[i].push(rank);
            }
            start = end;
        }
    }
    for r in &mut ranks {
        r.sort_unstable();
    }
    Ok(ranks)
}

/// Curve indices ordered from most to least extreme; ties keep index order.
pub fn erl_order(curves: &[Vec<f64>]) -> Result<Vec<usize>> {
    let erl = erl_keys(curves)?;
    let mut idx: Vec<usize> = (0..curves.len()).collect();
    idx.sort_by(|&a, &b| erl[a].cmp(&erl[b]));
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub args: Vec<f64>,
    pub observed: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub n_sims: usize,
}

/// Global extreme-rank-length envelope test from precomputed curves.
///
/// `p = (1 + #{null curves at least as extreme as the observed})/(s + 1)`. The
/// envelope spans all pooled curves whose own ERL p-value exceeds `alpha`.
pub fn envelope_from_curves(
    args: &[f64],
    observed: &[f64],
    nulls: &[Vec<f64>],
    alpha: f64,
) -> Result<EnvelopeReport> {
    check_alpha(alpha)?;
    if observed.len() != args.len() {
        return Err(Error::GridMismatch(format!(
            "observed curve has {} values for {} grid points",
            observed.len(),
            args.len()
        )));
    }
    let mut pool = Vec::with_capacity(nulls.len() + 1);
    pool.push(observed.to_vec());
    pool.extend(nulls.iter().cloned());
    let erl = erl_keys(&pool)?;
    let total = pool.len() as f64;

    let mut sorted = erl.clone();
    sorted.sort();
    // number of pooled curves at least as extreme as each curve, itself included
    let at_least = |e: &Vec<u32>| sorted.partition_point(|x| x <= e);
    let p = at_least(&erl[0]) as f64 / total;

    let len = args.len();
    let mut lower = vec![f64::INFINITY; len];
    let mut upper = vec![f64::NEG_INFINITY; len];
    let mut kept = 0;
    for (curve, e) in pool.iter().zip(&erl) {
        if at_least(e) as f64 > alpha * total {
            kept += 1;
            for k in 0..len {
                lower[k] = lower[k].min(curve[k]);
                upper[k] = upper[k].max(curve[k]);
            }
        }
    }
    if kept == 0 {
        return Err(Error::TooFewCurves { need: (alpha * total).ceil() as usize + 1, got: pool.len() });
    }
    Ok(EnvelopeReport {
        args: args.to_vec(),
        observed: observed.to_vec(),
        lower,
        upper,
        p_value: p,
        alpha,
        reject: p <= alpha,
        n_sims: nulls.len(),
    })
}

/// Simulates `s` null curves on streams `0..s` of `seed` and runs the envelope test.
pub fn envelope_test(
    pattern: &PointPattern,
    model: &ModelSpec,
    statistic: &StatisticSpec,
    s: u64,
    alpha: f64,
    seed: u64,
) -> Result<EnvelopeReport> {
    statistic.validate()?;
    if statistic.id.is_scalar() {
        return Err(Error::InvalidStatistic(format!(
            "envelope tests need a functional statistic, got {}",
            statistic.id
        )));
    }
    if pattern.window() != model.window() {
        return Err(Error::WindowMismatch {
            pattern: pattern.window().to_array(),
            calibration: model.window().to_array(),
        });
    }
    check_alpha(alpha)?;
    if ((s + 1) as f64) * alpha < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "{s} simulations cannot reach level {alpha}; need at least {}",
            (1.0 / alpha).ceil() as u64 - 1
        )));
    }
    let observed = statistic.evaluate_curve(pattern)?;
    let nulls = replicate(model, s, seed, |p| statistic.evaluate_curve(p))?;
    let args: Vec<f64> = match statistic.id {
        StatisticId::BettiSurface => (0..statistic.curve_len()).map(|i| i as f64).collect(),
        _ => statistic.grid.clone(),
    };
    envelope_from_curves(&args, &observed, &nulls, alpha)
}
