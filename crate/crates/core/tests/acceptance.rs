//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::time::{Duration, Instant};

use emi_ace_core::alarm_scoring::{
    extract_alarms, match_alarms, rasterize, AlarmLabel, GroundTruthEntry, IgnoreReason,
    MetalClass, ObjectKind, Purpose, ScoringRules,
};
use emi_ace_core::detectors::{
    ace_statistic, detect_wace, omp, update_inverse_covariance, update_mean, BackgroundModel,
    UpdateMode, WaceConfig,
};
use emi_ace_core::dsrf::{default_dictionary, DEFAULT_ZETA_MAX, DEFAULT_ZETA_MIN};
use emi_ace_core::lane_sim::{generate_lane, preset};
use emi_ace_core::pipeline::{run_pipeline, PipelineConfig};
use emi_ace_core::preprocessing::{downtrack_filter, lane_features, sine_filter_taps};
use emi_ace_core::{detectors::Method, Position};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    let v = gaussian_vec(rng, dim);
    let n = v.norm();
    v / n
}

/// Well-conditioned random SPD matrix.
fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.5
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!(
            "took {:.2} s, limit {limit_s} s",
            elapsed.as_secs_f64()
        ))
    }
}

fn woodbury_oracle() -> Outcome {
    let start = Instant::now();
    let lambda = 0.005;
    let mut worst: f64 = 0.0;
    for (k, dim) in [2usize, 8, 42].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let mut cov = random_spd(&mut rng, dim);
        let inv = cov
            .clone()
            .try_inverse()
            .ok_or("initial covariance is singular")?;
        let mut bg = BackgroundModel::new(DVector::zeros(dim), inv).map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let d = unit_vec(&mut rng, dim);
            bg = update_inverse_covariance(&bg, &d, lambda, UpdateMode::Consistent)
                .map_err(|e| e.to_string())?;
            cov = &cov * (1.0 - lambda) + &d * d.transpose() * lambda;
            let direct = cov.clone().try_inverse().ok_or("direct inversion failed")?;
            worst = worst.max((&bg.inv_cov - &direct).norm() / direct.norm());
        }
    }
    within(start.elapsed(), 10.0)?;
    if worst <= 1e-8 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-8"))
    }
}

/// Inverse square root of an SPD matrix by eigendecomposition.
fn inv_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = cov.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn whitening_oracle() -> Outcome {
    let start = Instant::now();
    let dim = 42;
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cov = random_spd(&mut rng, dim);
        let mu = gaussian_vec(&mut rng, dim);
        let x = gaussian_vec(&mut rng, dim);
        let t = gaussian_vec(&mut rng, dim);
        let bg =
            BackgroundModel::from_covariance(mu.clone(), cov.clone()).map_err(|e| e.to_string())?;
        let ace = ace_statistic(x.as_slice(), t.as_slice(), &bg).map_err(|e| e.to_string())?;
        let w = inv_sqrt(&cov);
        let xw = &w * (&x - &mu);
        let tw = &w * (&t - &mu);
        let cos2 = xw.dot(&tw).powi(2) / (xw.norm_squared() * tw.norm_squared());
        worst = worst.max((ace - cos2).abs());
    }
    within(start.elapsed(), 5.0)?;
    if worst <= 1e-10 {
        Ok(format!("max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e} > 1e-10"))
    }
}

fn ace_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut violations = Vec::new();
    for i in 0..10_000 {
        let dim = rng.random_range(2..=42);
        let cov = random_spd(&mut rng, dim);
        let mu = gaussian_vec(&mut rng, dim);
        let x = gaussian_vec(&mut rng, dim);
        let t = gaussian_vec(&mut rng, dim);
        let bg = BackgroundModel::from_covariance(mu.clone(), cov).map_err(|e| e.to_string())?;
        let ace =
            |a: &DVector<f64>, b: &DVector<f64>| ace_statistic(a.as_slice(), b.as_slice(), &bg);
        let v = ace(&x, &t).map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&v) {
            violations.push(format!("instance {i}: value {v} outside [0, 1]"));
        }
        let self_v = ace(&x, &x).map_err(|e| e.to_string())?;
        if (self_v - 1.0).abs() > 1e-12 {
            violations.push(format!("instance {i}: ace(x, x) = {self_v}"));
        }
        let scale: f64 =
            if rng.random::<bool>() { 1.0 } else { -1.0 } * rng.random_range(0.1..10.0);
        let scaled = &mu + (&x - &mu) * scale;
        let sv = ace(&scaled, &t).map_err(|e| e.to_string())?;
        if (sv - v).abs() > 1e-10 {
            violations.push(format!(
                "instance {i}: scaling by {scale} moved {v} to {sv}"
            ));
        }
    }
    if violations.is_empty() {
        Ok("10000 instances, 0 violations".into())
    } else {
        Err(format!(
            "{} violations, first: {}",
            violations.len(),
            violations[0]
        ))
    }
}

fn omp_oracle() -> Outcome {
    let dict = default_dictionary();
    let atoms: Vec<&[f64]> = dict.atoms.iter().map(|a| a.feature.values()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut mismatches = 0;
    for i in 0..1000 {
        // Half pure noise, half a random atom mixture plus noise.
        let mut x = gaussian_vec(&mut rng, 42);
        if i % 2 == 1 {
            x *= 0.1;
            for _ in 0..3 {
                let a = rng.random_range(0..atoms.len());
                let w: f64 = rng.sample(StandardNormal);
                x += DVector::from_column_slice(atoms[a]) * w;
            }
        }
        let greedy = omp(x.as_slice(), &atoms, 1).map_err(|e| e.to_string())?;
        let exhaustive = atoms
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let a = DVector::from_column_slice(a);
                let c = x.dot(&a) / a.norm_squared();
                (j, (&x - a * c).norm_squared())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        if greedy.selected_atoms != [exhaustive] {
            mismatches += 1;
        }
    }
    if mismatches == 0 {
        Ok("1000 inputs, exact agreement".into())
    } else {
        Err(format!("{mismatches} of 1000 inputs disagree"))
    }
}

/// Printed update equations evaluated with plain loops.
fn hand_literal_step(mu: &[f64], inv: &[Vec<f64>], x: &[f64], l: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = mu.len();
    let d: Vec<f64> = (0..n).map(|i| x[i] - mu[i]).collect();
    let mut dtd = 0.0;
    for v in &d {
        dtd += v * v;
    }
    let denom = (1.0 - l) / l + dtd;
    let mut next = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            next[i][j] = (inv[i][j] - d[i] * d[j] / denom) / (1.0 - l);
        }
    }
    let mut sym = next.clone();
    for i in 0..n {
        for j in 0..n {
            sym[i][j] = 0.5 * (next[i][j] + next[j][i]);
        }
    }
    let mu_next: Vec<f64> = (0..n)
        .map(|i| (1.0 - l) * mu[i] + l * (x[i] - mu[i]))
        .collect();
    (mu_next, sym)
}

fn literal_fidelity() -> Outcome {
    let l = 0.005;
    let mu0 = vec![0.5, -1.0, 2.0];
    let inv0 = vec![
        vec![2.0, 0.3, -0.1],
        vec![0.3, 1.5, 0.2],
        vec![-0.1, 0.2, 1.0],
    ];
    let xs = [[1.0, 2.0, 3.0], [-0.5, 0.25, 4.0], [3.0, -2.0, 0.5]];

    let mut bg = BackgroundModel::new(
        DVector::from_vec(mu0.clone()),
        DMatrix::from_fn(3, 3, |i, j| inv0[i][j]),
    )
    .map_err(|e| e.to_string())?;
    let (mut mu, mut inv) = (mu0, inv0);
    let mut worst: f64 = 0.0;
    for x in xs {
        let xv = DVector::from_column_slice(&x);
        let mut next = update_inverse_covariance(&bg, &xv, l, UpdateMode::Literal)
            .map_err(|e| e.to_string())?;
        next.mean = update_mean(&bg.mean, &xv, l, UpdateMode::Literal);
        bg = next;
        (mu, inv) = hand_literal_step(&mu, &inv, &x, l);
        for i in 0..3 {
            worst = worst.max((bg.mean[i] - mu[i]).abs());
            for j in 0..3 {
                worst = worst.max((bg.inv_cov[(i, j)] - inv[i][j]).abs());
            }
        }
    }
    if worst <= 1e-12 {
        Ok(format!("3 steps, max entry deviation {worst:.2e}"))
    } else {
        Err(format!("max entry deviation {worst:.2e} > 1e-12"))
    }
}

fn alarm_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let halo = 0.5;
    let mut total_alarms = 0;
    for g in 0..100 {
        // A few parallel sweeps with jittered spacing and random confidences.
        let tracks = rng.random_range(1..=4);
        let mut positions = Vec::new();
        let mut conf = Vec::new();
        for tr in 0..tracks {
            let north = tr as f64 * rng.random_range(0.2..0.8);
            let mut east = 0.0;
            while east < 6.0 {
                positions.push(Position::new(east, north));
                conf.push(rng.random_range(0.0..1.0));
                east += rng.random_range(0.03..0.12);
            }
        }
        let grid = rasterize(&positions, &conf, 0.05).map_err(|e| e.to_string())?;
        let alarms = extract_alarms(&grid, halo).map_err(|e| e.to_string())?;
        total_alarms += alarms.len();
        if alarms.windows(2).any(|w| w[1].confidence > w[0].confidence) {
            return Err(format!("grid {g}: confidences increase"));
        }
        for (i, a) in alarms.iter().enumerate() {
            for b in &alarms[i + 1..] {
                if a.position().distance(&b.position()) <= halo {
                    return Err(format!("grid {g}: alarms closer than {halo} m"));
                }
            }
        }
        for row in 0..grid.rows {
            for col in 0..grid.cols {
                let idx = grid.index(row, col);
                if !grid.occupied[idx] || grid.cells[idx] <= 0.0 {
                    continue;
                }
                let c = grid.center(row, col);
                if !alarms
                    .iter()
                    .any(|a| a.position().distance(&c) <= halo + 1e-9)
                {
                    return Err(format!(
                        "grid {g}: cell ({row}, {col}) has no alarm within {halo} m"
                    ));
                }
            }
        }
    }
    Ok(format!("100 grids, {total_alarms} alarms"))
}

fn detector_ordering() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    let mut pd_ok = 0;
    for seed in 1..=5u64 {
        let cfg = PipelineConfig {
            preset: Some("easy".into()),
            seed: Some(seed),
            out_dir: dir.path().join(format!("seed{seed}")),
            ..Default::default()
        };
        let out = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let auc = |m: Method| out.report.row(m.name()).map_or(f64::NAN, |r| r.auc);
        let (ace, wace, energy) = (
            auc(Method::AceGlobal),
            auc(Method::Wace),
            auc(Method::Energy),
        );
        let pd = out
            .results
            .iter()
            .find(|r| r.method == Method::AceGlobal)
            .map_or(0.0, |r| r.roc.pd_at_far(0.05));
        if pd >= 0.9 {
            pd_ok += 1;
        }
        if !(ace > energy && wace > energy) {
            failures.push(format!("seed {seed}"));
        }
        lines.push(format!(
            "seed {seed}: auc ace-global {ace:.3} wace {wace:.3} jomp {:.3} energy {energy:.3}, ace-global pd@0.05 {pd:.2}",
            auc(Method::Jomp)
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    within(start.elapsed(), 60.0)?;
    if !failures.is_empty() {
        return Err(format!("energy not beaten on {}", failures.join(", ")));
    }
    if pd_ok < 4 {
        return Err(format!(
            "ace-global pd >= 0.9 at far 0.05 on only {pd_ok} of 5 seeds"
        ));
    }
    Ok(format!(
        "ordering holds on 5 seeds, pd target met on {pd_ok}"
    ))
}

fn wace_causality() -> Outcome {
    let dict = default_dictionary();
    let taps = sine_filter_taps(9).map_err(|e| e.to_string())?;
    let cfg = WaceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let names = [
        "lane1", "lane2", "lane3", "lane4", "lane5", "lane6", "easy", "hard",
    ];
    for i in 0..20 {
        let scenario = preset(names[i % names.len()])
            .map_err(|e| e.to_string())?
            .with_seed(rng.random());
        let (lane, _) = generate_lane(&scenario, &dict).map_err(|e| e.to_string())?;
        let filtered = downtrack_filter(&lane, &taps).map_err(|e| e.to_string())?;
        let features = lane_features(&filtered).features;
        let full = detect_wace(&features, &dict, &cfg).map_err(|e| e.to_string())?;
        let cut = rng.random_range(2 * cfg.init_window..features.len());
        let prefix = detect_wace(&features[..cut], &dict, &cfg).map_err(|e| e.to_string())?;
        if prefix.confidences[..] != full.confidences[..cut] {
            return Err(format!("lane {i}: prefix of length {cut} differs"));
        }
    }
    Ok("20 lanes, prefixes identical".into())
}

fn dictionary_contract() -> Outcome {
    let dict = default_dictionary();
    if dict.len() != 100 {
        return Err(format!("{} atoms", dict.len()));
    }
    let first = dict.atoms[0].relaxation_freq;
    let last = dict.atoms[99].relaxation_freq;
    if ((first - DEFAULT_ZETA_MIN) / DEFAULT_ZETA_MIN).abs() > 1e-12
        || ((last - DEFAULT_ZETA_MAX) / DEFAULT_ZETA_MAX).abs() > 1e-12
    {
        return Err(format!("endpoints {first}, {last}"));
    }
    for a in &dict.atoms {
        let f = a.feature.values();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let half = f.len() / 2;
        let mean = f[..half].iter().sum::<f64>() / half as f64;
        if (norm - 1.0).abs() > 1e-10 || mean.abs() > 1e-10 {
            return Err(format!("atom {}: norm {norm}, real mean {mean}", a.id));
        }
    }
    Ok("100 atoms, endpoints exact, unit norm, zero real mean".into())
}

fn scoring_rules() -> Outcome {
    let truth = [
        (2.0, ObjectKind::Target, MetalClass::Metal, 2.0),
        (5.0, ObjectKind::Target, MetalClass::LowMetal, 9.0),
        (8.0, ObjectKind::Clutter, MetalClass::Clutter, 3.0),
    ]
    .map(|(e, kind, metal, depth_in)| GroundTruthEntry {
        easting: e,
        northing: 0.0,
        kind,
        metal,
        depth_in,
        purpose: if kind == ObjectKind::Target {
            Purpose::AntiTank
        } else {
            Purpose::Other
        },
    });
    // A lane whose confidence is a narrow triangle over each object.
    let positions: Vec<Position> = (0..=200)
        .map(|i| Position::new(i as f64 * 0.05, 0.0))
        .collect();
    let conf: Vec<f64> = positions
        .iter()
        .map(|p| {
            truth
                .iter()
                .map(|t| (1.0 - (p.easting - t.easting).abs() / 0.3).max(0.0))
                .sum()
        })
        .collect();
    let grid = rasterize(&positions, &conf, 0.05).map_err(|e| e.to_string())?;
    let alarms = extract_alarms(&grid, 0.5).map_err(|e| e.to_string())?;
    if alarms.len() != 3 {
        return Err(format!("{} alarms extracted, expected 3", alarms.len()));
    }
    let outcome =
        match_alarms(&alarms, &truth, &ScoringRules::default()).map_err(|e| e.to_string())?;
    let counts = (
        outcome.count(AlarmLabel::Hit),
        outcome.count(AlarmLabel::Ignored(IgnoreReason::Clutter)),
        outcome.count(AlarmLabel::Ignored(IgnoreReason::Depth)),
        outcome.count(AlarmLabel::FalseAlarm),
    );
    if counts == (1, 1, 1, 0) {
        Ok("1 hit, 1 ignored clutter, 1 ignored depth, 0 false alarms".into())
    } else {
        Err(format!("hit/clutter/depth/false = {counts:?}"))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("woodbury oracle", woodbury_oracle),
        ("ace whitening oracle", whitening_oracle),
        ("ace bounds and invariances", ace_properties),
        ("omp oracle", omp_oracle),
        ("literal-mode fidelity", literal_fidelity),
        ("alarm invariants", alarm_invariants),
        ("detector ordering", detector_ordering),
        ("wace causality", wace_causality),
        ("dictionary contract", dictionary_contract),
        ("scoring rules", scoring_rules),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg}; {secs:.2} s)", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg}; {secs:.2} s)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
