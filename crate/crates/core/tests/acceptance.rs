//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails. Set `ACCEPTANCE_ONLY=2,5` to run a subset.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use tdagof::geom::{alpha_filtration, PointPattern, Window};
use tdagof::gof::{calibrate, deviation_report, envelope_from_curves, StatisticId, StatisticSpec};
use tdagof::mbound::{diagram_from_filtration, persistence_diagram};
use tdagof::oracle::{gilbert_components, grid_betti, GridSpec};
use tdagof::simulate::{ModelSpec, SeedSpec};
use tdagof::summaries::{apf1, apf1_via_betti, death_count_curve, t_cluster, t_loop, uniform_grid};

const R_F: f64 = 1.5;
const R_C: f64 = 0.1;
const R_L: f64 = 0.5;

fn m_null() -> f64 {
    2f64.sqrt() * 10.0
}

fn square(side: f64) -> Window {
    Window::square(side).unwrap()
}

fn pattern(pts: &[(f64, f64)]) -> PointPattern {
    PointPattern::new(pts.iter().map(|&p| p.into()).collect(), Window::new(-1.0, -1.0, 2.0, 2.0).unwrap())
        .unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn pct(k: usize, n: usize) -> f64 {
    100.0 * k as f64 / n as f64
}

// ---------------------------------------------------------------------------------

fn analytic() -> Outcome {
    let mut failures = Vec::new();
    let s3 = 3f64.sqrt();

    let tri = persistence_diagram(&pattern(&[(0.0, 0.0), (1.0, 0.0), (0.5, s3 / 2.0)]), 10.0, 1.0).unwrap();
    let h1: Vec<_> = tri.of_dimension(1).collect();
    if !(h1.len() == 1 && close(h1[0].birth, 0.5) && close(h1[0].death, 1.0 / s3)) {
        failures.push(format!("equilateral H1 {:?}", h1.iter().map(|f| (f.birth, f.death)).collect::<Vec<_>>()));
    }

    let sq = persistence_diagram(&pattern(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]), 10.0, 1.0).unwrap();
    let h1: Vec<_> = sq.of_dimension(1).collect();
    if !(h1.len() == 1 && close(h1[0].birth, 0.5) && close(h1[0].death, 0.5f64.sqrt())) {
        failures.push(format!("square H1 {:?}", h1.iter().map(|f| (f.birth, f.death)).collect::<Vec<_>>()));
    }

    let two = persistence_diagram(&pattern(&[(0.0, 0.0), (1.0, 0.0)]), 10.0, 1.0).unwrap();
    let h0: Vec<f64> = two.of_dimension(0).map(|f| f.death).collect();
    if !(h0.len() == 1 && close(h0[0], 0.5)) {
        failures.push(format!("two-point H0 deaths {h0:?}"));
    }

    let three = persistence_diagram(&pattern(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.9)]), 1.2, 1.0).unwrap();
    let mut h0: Vec<f64> = three.of_dimension(0).map(|f| f.death).collect();
    h0.sort_by(f64::total_cmp);
    if !(h0.len() == 3 && close(h0[0], 0.45) && close(h0[1], 0.5) && close(h0[2], 0.5)) {
        failures.push(format!("three-point H0 deaths {h0:?}"));
    }

    if failures.is_empty() {
        outcome(true, "equilateral (0.5, 1/sqrt3), square (0.5, sqrt2/2), H0 traces {0.5} and {0.45, 0.5, 0.5} to 1e-9")
    } else {
        outcome(false, failures.join("; "))
    }
}

// ---------------------------------------------------------------------------------

/// `count` radii spread over `[lo, hi]` minus the `gap`-neighbourhoods of `values`.
fn radii_away_from(values: &[f64], lo: f64, hi: f64, gap: f64, count: usize) -> Vec<f64> {
    let mut cuts: Vec<f64> = values.to_vec();
    cuts.sort_by(f64::total_cmp);
    let mut intervals = Vec::new();
    let mut start = lo;
    for v in cuts {
        if v - gap > start {
            intervals.push((start, (v - gap).min(hi)));
        }
        start = start.max(v + gap);
        if start >= hi {
            break;
        }
    }
    if start < hi {
        intervals.push((start, hi));
    }
    intervals.retain(|(a, b)| b > a);
    let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    (0..count)
        .map(|k| {
            let mut target = total * (k as f64 + 0.5) / count as f64;
            for &(a, b) in &intervals {
                if target <= b - a {
                    return a + target;
                }
                target -= b - a;
            }
            intervals.last().unwrap().1
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let w = square(5.0);
    let h = 0.002;
    let null = ModelSpec::poisson(w, 2.0).unwrap();
    let results: Vec<Result<usize, String>> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let p = null.sample(SeedSpec::new(2002, i)).unwrap();
            let filt = alpha_filtration(&p).unwrap();
            let d = diagram_from_filtration(&filt, &p, w.diameter() + 1.0, 100.0);
            let values: Vec<f64> = filt.simplices().iter().map(|s| s.value).collect();
            let top = values.iter().copied().fold(0.0, f64::max);
            let radii = radii_away_from(&values, 10.0 * h, top, 10.0 * h, 10);
            for r in radii {
                if values.iter().any(|v| (v - r).abs() < 10.0 * h) {
                    return Err(format!("pattern {i}: radius {r} too close to a simplex value"));
                }
                let b0 = p.len() - d.of_dimension(0).filter(|f| f.death <= r).count();
                let b1 = d.of_dimension(1).filter(|f| f.birth <= r && f.death > r).count();
                let grid = grid_betti(&p, r, GridSpec::for_radius(h, r)).unwrap();
                let gilbert = gilbert_components(&p, r);
                if (b0, b1) != grid || b0 != gilbert {
                    return Err(format!(
                        "pattern {i}, r = {r}: pipeline ({b0}, {b1}), grid {grid:?}, gilbert {gilbert}"
                    ));
                }
            }
            Ok(10)
        })
        .collect();
    let errors: Vec<String> = results.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    let checked: usize = results.iter().filter_map(|r| r.as_ref().ok()).sum();
    if errors.is_empty() {
        outcome(true, format!("{checked} radii on 50 patterns: pipeline = grid_betti (h = 0.002) = gilbert"))
    } else {
        outcome(false, format!("{} mismatches, first: {}", errors.len(), errors[0]))
    }
}

// ---------------------------------------------------------------------------------

fn identities() -> Outcome {
    let w = square(10.0);
    let null = ModelSpec::poisson(w, 2.0).unwrap();
    let grid = uniform_grid(0.0, R_F, 64);
    let unbounded = w.diameter() + 1.0;

    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut bad = Vec::new();
            let p = null.sample(SeedSpec::new(3003, i)).unwrap();
            let filt = alpha_filtration(&p).unwrap();

            // Euler relation, sweeping the filtration once
            let d = diagram_from_filtration(&filt, &p, unbounded, 100.0);
            let mut deaths0: Vec<f64> = d.of_dimension(0).map(|f| f.death).collect();
            deaths0.sort_by(f64::total_cmp);
            let loops: Vec<(f64, f64)> = d.of_dimension(1).map(|f| (f.birth, f.death)).collect();
            let mut chi = 0i64;
            let simplices = filt.simplices();
            for (k, s) in simplices.iter().enumerate() {
                chi += if s.dimension == 1 { -1 } else { 1 };
                if k + 1 < simplices.len() && simplices[k + 1].value == s.value {
                    continue;
                }
                let r = s.value;
                let b0 = p.len() as i64 - deaths0.partition_point(|&x| x <= r) as i64;
                let b1 = loops.iter().filter(|&&(b, dd)| b <= r && dd > r).count() as i64;
                if b0 - b1 != chi {
                    bad.push(format!("Euler fails on pattern {i} at {r}"));
                    break;
                }
            }

            // APF identity at a radius spread over [0, r_f]
            let d = diagram_from_filtration(&filt, &p, m_null(), R_F);
            let r = R_F * i as f64 / 99.0;
            let h = 1e-4;
            let count = d.of_dimension(1).count() as f64;
            let via = apf1_via_betti(&d, r, h).unwrap();
            if (via - apf1(&d, r)).abs() > count * 2.0 * h {
                bad.push(format!("apf1 identity fails on pattern {i}: {via} vs {}", apf1(&d, r)));
            }

            // nested size bounds
            let curves: Vec<Vec<f64>> = [1.0, 2.0, 5.0, unbounded]
                .iter()
                .map(|&m| {
                    let dm = diagram_from_filtration(&filt, &p, m, R_F);
                    death_count_curve(&dm, 0, &grid).unwrap().values().to_vec()
                })
                .collect();
            for pair in curves.windows(2) {
                if pair[0].iter().zip(&pair[1]).any(|(a, b)| a < b) {
                    bad.push(format!("M-nesting fails on pattern {i}"));
                }
            }
            bad
        })
        .collect();
    if failures.is_empty() {
        outcome(true, "Euler at every simplex value, apf1 quadrature within count*2h (h = 1e-4), M-nesting for M in {1, 2, 5, inf}: 100 patterns each")
    } else {
        outcome(false, format!("{} failures, first: {}", failures.len(), failures[0]))
    }
}

// ---------------------------------------------------------------------------------

fn shape(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

struct Calibrations {
    cluster: tdagof::gof::Calibration,
    looped: tdagof::gof::Calibration,
}

fn null_calibrations() -> Calibrations {
    let null = ModelSpec::poisson(square(10.0), 2.0).unwrap();
    let tc = StatisticSpec::scalar(StatisticId::TCluster, R_C, m_null(), R_F).unwrap();
    let tl = StatisticSpec::scalar(StatisticId::TLoop, R_L, m_null(), R_F).unwrap();
    Calibrations {
        cluster: calibrate(&null, &tc, 2_000, 4004, true).unwrap(),
        looped: calibrate(&null, &tl, 2_000, 4004, true).unwrap(),
    }
}

fn clt(c: &Calibrations) -> Outcome {
    let (s_c, k_c) = shape(c.cluster.values.as_ref().unwrap());
    let (s_l, k_l) = shape(c.looped.values.as_ref().unwrap());
    let pass = s_c.abs() < 0.2 && k_c.abs() < 0.5 && s_l.abs() < 0.2 && k_l.abs() < 0.5;
    outcome(
        pass,
        format!("T_C skew {s_c:.3} ex.kurt {k_c:.3}; T_L skew {s_l:.3} ex.kurt {k_l:.3} (need |skew| < 0.2, |ex.kurt| < 0.5)"),
    )
}

// ---------------------------------------------------------------------------------

fn deviation_tests(c: &Calibrations) -> Outcome {
    let w = square(10.0);
    let models = [
        ("Poi(2)", ModelSpec::poisson(w, 2.0).unwrap(), 5001),
        ("MatC(2,0.1,1)", ModelSpec::matern(w, 2.0, 0.1, 1.0).unwrap(), 5002),
        ("Str(4.5,0.1,0.35)", ModelSpec::strauss(w, 4.5, 0.1, 0.35).unwrap(), 5003),
    ];
    let reps = 500u64;
    let mut rates = Vec::new();
    for (_, model, seed) in &models {
        let rejections: Vec<(bool, bool)> = (0..reps)
            .into_par_iter()
            .map(|s| {
                let p = model.sample(SeedSpec::new(*seed, s)).unwrap();
                let d = persistence_diagram(&p, m_null(), R_F).unwrap();
                (
                    deviation_report(t_cluster(&d, R_C), &c.cluster, 0.05).reject,
                    deviation_report(t_loop(&d, R_L), &c.looped, 0.05).reject,
                )
            })
            .collect();
        let tc = rejections.iter().filter(|r| r.0).count();
        let tl = rejections.iter().filter(|r| r.1).count();
        rates.push((pct(tc, reps as usize), pct(tl, reps as usize)));
    }
    let (null, mat, st) = (rates[0], rates[1], rates[2]);
    let pass = (3.0..=7.0).contains(&null.0)
        && (3.0..=7.0).contains(&null.1)
        && mat.0 >= 50.0
        && st.0 >= 50.0
        && mat.1 >= 85.0
        && st.1 >= 60.0;
    outcome(
        pass,
        format!(
            "T_C {:.1}/{:.1}/{:.1}%, T_L {:.1}/{:.1}/{:.1}% (Poi/MatC/Str; need null in [3,7], T_C >= 50/50, T_L >= 85/60)",
            null.0, mat.0, st.0, null.1, mat.1, st.1
        ),
    )
}

// ---------------------------------------------------------------------------------

fn functional_specs(window: &Window) -> [StatisticSpec; 3] {
    let side = window.width().min(window.height());
    [
        StatisticSpec::functional(StatisticId::L, m_null(), R_F, 64, side).unwrap(),
        StatisticSpec::functional(StatisticId::DeathCurve, m_null(), R_F, 64, side).unwrap(),
        StatisticSpec::functional(StatisticId::BettiSurface, m_null(), R_F, 32, side).unwrap(),
    ]
}

/// L, cluster-death and loop-surface curves of one pattern, sharing the diagram.
fn all_curves(p: &PointPattern, specs: &[StatisticSpec; 3]) -> [Vec<f64>; 3] {
    [
        specs[0].evaluate_curve(p).unwrap(),
        specs[1].evaluate_curve(p).unwrap(),
        specs[2].evaluate_curve(p).unwrap(),
    ]
}

/// Rejection counts of the three envelope tests for each observed model; every
/// replication draws its own `s` null patterns.
fn envelope_rejections(
    observed: &[(ModelSpec, u64)],
    reps: u64,
    s: u64,
    null_seed_base: u64,
) -> Vec<[usize; 3]> {
    let w = *observed[0].0.window();
    let null = ModelSpec::poisson(w, 2.0).unwrap();
    let specs = functional_specs(&w);
    let args: Vec<Vec<f64>> = specs.iter().map(|sp| (0..sp.curve_len()).map(|i| i as f64).collect()).collect();
    let mut counts = vec![[0usize; 3]; observed.len()];
    for rep in 0..reps {
        let nulls: Vec<[Vec<f64>; 3]> = (0..s)
            .into_par_iter()
            .map(|j| all_curves(&null.sample(SeedSpec::new(null_seed_base + rep, j)).unwrap(), &specs))
            .collect();
        let by_stat: Vec<Vec<Vec<f64>>> = (0..3).map(|k| nulls.iter().map(|c| c[k].clone()).collect()).collect();
        for (a, (model, seed)) in observed.iter().enumerate() {
            let obs = all_curves(&model.sample(SeedSpec::new(*seed, rep)).unwrap(), &specs);
            for k in 0..3 {
                let report = envelope_from_curves(&args[k], &obs[k], &by_stat[k], 0.05).unwrap();
                if report.reject {
                    counts[a][k] += 1;
                }
            }
        }
    }
    counts
}

fn envelope_power() -> Outcome {
    let w = square(10.0);
    let reps = 200u64;
    let counts = envelope_rejections(
        &[
            (ModelSpec::matern(w, 20.0, 0.1, 0.1).unwrap(), 6001),
            (ModelSpec::strauss(w, 2.1, 0.1, 0.1).unwrap(), 6002),
        ],
        reps,
        999,
        600_000,
    );
    // rows: L, Cluster, Loop; columns: MatC, Str
    let paper = [[42.6, 20.5], [41.5, 26.3], [27.0, 32.2]];
    let names = ["L", "Cluster", "Loop"];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut power = [[0.0; 2]; 3];
    for k in 0..3 {
        for a in 0..2 {
            power[k][a] = pct(counts[a][k], reps as usize);
            if (power[k][a] - paper[k][a]).abs() > 12.0 {
                pass = false;
            }
        }
        parts.push(format!(
            "{} {:.1}/{:.1} (paper {}/{})",
            names[k], power[k][0], power[k][1], paper[k][0], paper[k][1]
        ));
    }
    let loop_beats_l_on_strauss = power[2][1] > power[0][1];
    let l_beats_loop_on_matern = power[0][0] > power[2][0];
    pass &= loop_beats_l_on_strauss && l_beats_loop_on_matern;
    outcome(
        pass,
        format!(
            "MatC/Str power %: {}; need each within 12 points; Loop > L on Str: {}, L > Loop on MatC: {}",
            parts.join(", "),
            loop_beats_l_on_strauss,
            l_beats_loop_on_matern
        ),
    )
}

// ---------------------------------------------------------------------------------

fn envelope_size() -> Outcome {
    let w = square(10.0);
    let reps = 500u64;
    let counts = envelope_rejections(&[(ModelSpec::poisson(w, 2.0).unwrap(), 7001)], reps, 199, 700_000);
    let rates: Vec<f64> = counts[0].iter().map(|&c| c as f64 / reps as f64).collect();
    let pass = rates.iter().all(|r| (0.02..=0.08).contains(r));
    outcome(
        pass,
        format!(
            "P(p <= 0.05) under the null, s = 199: L {:.3}, Cluster {:.3}, Loop {:.3} (need each in [0.02, 0.08])",
            rates[0], rates[1], rates[2]
        ),
    )
}

// ---------------------------------------------------------------------------------

fn cli_pipeline(dir: &Path, threads: &str) -> Result<(), String> {
    let d = dir.to_str().unwrap();
    let runs: Vec<Vec<String>> = [
        "simulate --model strauss --beta 2.1 --gamma 0.1 --radius 0.1 --seed 11 --stream 3 --out {d}/s.csv",
        "simulate --seed 12 --out {d}/p.csv",
        "pd --in {d}/p.csv --out {d}/d.csv",
        "summary --diagram {d}/d.csv --stat death-curve --out {d}/dc.csv",
        "summary --diagram {d}/d.csv --stat betti-surface --out {d}/bs.csv",
        "summary --diagram {d}/d.csv --stat t-cluster --r 0.1 --out {d}/tc.csv",
        "ripley --in {d}/p.csv --out {d}/l.csv",
        "calibrate --stat t-cluster --n-sims 200 --seed 13 --out {d}/cc.json",
        "calibrate --stat t-loop --n-sims 200 --seed 13 --keep-values --out {d}/cl.json",
        "test-deviation --in {d}/p.csv --calib {d}/cc.json --out {d}/dev.json",
        "test-envelope --in {d}/s.csv --stat l --n-sims 99 --seed 14 --out {d}/el.csv --report {d}/el.json",
        "test-envelope --in {d}/s.csv --stat death-curve --n-sims 99 --seed 14 --out {d}/ed.csv --report {d}/ed.json",
        "test-envelope --in {d}/s.csv --stat betti-surface --n-sims 99 --seed 14 --out {d}/eb.csv --report {d}/eb.json",
    ]
    .iter()
    .map(|cmd| {
        let mut argv = vec!["tdagof".to_string(), "--threads".to_string(), threads.to_string()];
        argv.extend(cmd.replace("{d}", d).split_whitespace().map(String::from));
        argv
    })
    .collect();
    for argv in runs {
        let code = tdagof::cli::run(argv.clone());
        if code != 0 {
            return Err(format!("exit {code}: {}", argv.join(" ")));
        }
    }
    Ok(())
}

fn cli_determinism() -> Outcome {
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    for (dir, t) in [(one.path(), "1"), (four.path(), "4")] {
        if let Err(e) = cli_pipeline(dir, t) {
            return outcome(false, e);
        }
    }
    let mut names: Vec<String> = fs::read_dir(one.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(one.path().join(n)).ok() != fs::read(four.path().join(n)).ok())
        .collect();
    if differing.is_empty() {
        outcome(true, format!("{} output files byte-identical with --threads 1 and --threads 4", names.len()))
    } else {
        outcome(false, format!("files differ: {differing:?}"))
    }
}

// ---------------------------------------------------------------------------------

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|o| o.contains(&k));

    let mut all_pass = true;
    let mut report = |k: u32, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted(k) {
            return;
        }
        let start = Instant::now();
        let o = run();
        all_pass &= o.pass;
        println!(
            "{} criterion {k} ({name}): {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };

    report(1, "analytic suite", &mut analytic);
    report(2, "oracle equivalence", &mut oracle_equivalence);
    report(3, "identities", &mut identities);
    if wanted(4) || wanted(5) {
        let c = &null_calibrations();
        report(4, "empirical CLT", &mut || clt(c));
        report(5, "deviation tests", &mut || deviation_tests(c));
    }
    report(6, "envelope test power", &mut envelope_power);
    report(7, "envelope test size", &mut envelope_size);
    report(8, "CLI determinism", &mut cli_determinism);

    if all_pass {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: at least one criterion FAILED");
        ExitCode::FAILURE
    }
}
