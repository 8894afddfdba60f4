//! Shared fixtures and property checks for the integration targets.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use oddforge::geometry::{hull_contains, Bounds, Sense};
use oddforge::kernel::{
    affinity_gradient, estimate_sigma, global_affinity, superpose, DistanceMode,
};
use oddforge::rng::SampleRng;
use oddforge::validation::McConfig;
use oddforge::{
    build_convex_hull, derive, Dataset, DerivationConfig, GroundTruthOdd, KernelConfig, KernelOdd,
    OddPolytope, PolynomialInequality,
};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Box `[-5, 5]^n` cut by `x_n >= x_1 - 3`.
pub fn band_truth(n: usize) -> (GroundTruthOdd, Bounds) {
    let b = Bounds::new(vec![-5.0; n], vec![5.0; n]).unwrap();
    let mut coeffs = vec![0.0; n];
    coeffs[0] = -1.0;
    coeffs[n - 1] += 1.0;
    let r = PolynomialInequality::linear(&coeffs, 3.0, Sense::GreaterEq).unwrap();
    let gt = GroundTruthOdd::new(OddPolytope::new(vec![b.to_polytope()]).unwrap(), vec![r]).unwrap();
    (gt, b)
}

pub fn band_derivation() -> DerivationConfig {
    DerivationConfig::new(KernelConfig::new(1.0, 0.5, 0.05), 0.5, 0.1)
}

pub fn band_config(n: usize, counts: Vec<usize>, samples: usize, seed: u64) -> McConfig {
    let (gt, b) = band_truth(n);
    McConfig::new(gt, b, counts, samples, seed, band_derivation())
}

/// Uniform samples in `[0, spread]^dim`. OOD points keep a distance of at
/// least `spread / 50` from every ID point, so the constraint stays
/// satisfiable above the sigma floor.
pub fn random_dataset(rng: &mut SampleRng, dim: usize, n_id: usize, n_ood: usize, spread: f64) -> Dataset {
    let b = Bounds::new(vec![0.0; dim], vec![spread; dim]).unwrap();
    let id: Vec<Vec<f64>> = (0..n_id).map(|_| rng.point_in(&b)).collect();
    let gap2 = (spread / 50.0).powi(2);
    let mut ood = Vec::with_capacity(n_ood);
    while ood.len() < n_ood {
        let p = rng.point_in(&b);
        if id.iter().all(|q| q.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= gap2) {
            ood.push(p);
        }
    }
    Dataset::new(dim, id, ood).unwrap()
}

pub fn random_config(rng: &mut SampleRng) -> DerivationConfig {
    let kappa = rng.uniform(0.2, 3.0);
    let mut k = KernelConfig::new(kappa, rng.uniform(0.0, 2.0), kappa * rng.uniform(0.01, 1.0));
    if rng.next_f64() < 0.5 {
        k.distance_mode = DistanceMode::PerDimension;
    }
    k.normalize = rng.next_f64() < 0.5;
    DerivationConfig::new(k, 0.5, rng.uniform(0.05, 0.45))
}

/// A batch of random derived models with their datasets.
pub fn random_models(seed: u64, count: usize) -> Vec<(Dataset, DerivationConfig, KernelOdd)> {
    let mut rng = SampleRng::new(seed, 0);
    (0..count)
        .map(|_| {
            let dim = 1 + (rng.next_u64() % 4) as usize;
            let n_id = 1 + (rng.next_u64() % 30) as usize;
            let n_ood = (rng.next_u64() % 10) as usize;
            let spread = rng.uniform(1.0, 20.0);
            let ds = random_dataset(&mut rng, dim, n_id, n_ood, spread);
            let cfg = random_config(&mut rng);
            let (m, _) = derive(&ds, &cfg).expect("random instance derives");
            (ds, cfg, m)
        })
        .collect()
}

pub fn check_boundedness() -> Check {
    let models = random_models(101, 20);
    let mut rng = SampleRng::new(102, 0);
    let mut probes = 0;
    for (_, _, m) in &models {
        let dim = m.dimension();
        let b = Bounds::new(vec![-30.0; dim], vec![50.0; dim]).unwrap();
        let xs: Vec<Vec<f64>> = (0..5000).map(|_| rng.point_in(&b)).collect();
        for (x, a) in xs.iter().zip(m.affinities(&xs).map_err(|e| e.to_string())?) {
            ensure!((0.0..=1.0).contains(&a), "affinity {a} at {x:?}");
        }
        probes += xs.len();
    }
    Ok(format!("{probes} probes in [0, 1]"))
}

pub fn check_anchor_absorption() -> Check {
    let mut anchors = 0;
    for (_, _, m) in random_models(103, 60) {
        for k in m.kernels() {
            let a = m.affinity(&k.center).map_err(|e| e.to_string())?;
            ensure!(a == 1.0, "anchor {:?} has affinity {a}", k.center);
            anchors += 1;
        }
    }
    Ok(format!("{anchors} anchors at exactly 1.0"))
}

pub fn check_permutation_invariance() -> Check {
    let mut rng = SampleRng::new(104, 0);
    for case in 0..50 {
        let ds = random_dataset(&mut rng, 2, 25, 5, 10.0);
        let cfg = random_config(&mut rng);
        let mut shuffled = ds.clone();
        for set in [&mut shuffled.id_samples, &mut shuffled.ood_samples] {
            for i in (1..set.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                set.swap(i, j);
            }
        }
        let a = derive(&ds, &cfg).map_err(|e| e.to_string())?.0.to_json();
        let b = derive(&shuffled, &cfg).map_err(|e| e.to_string())?.0.to_json();
        ensure!(a == b, "case {case}: model files differ");
    }
    Ok("50 shuffled datasets, byte-identical model files".into())
}

pub fn check_ood_soundness() -> Check {
    let mut checked = 0;
    for (ds, cfg, m) in random_models(105, 80) {
        for o in &ds.ood_samples {
            let a = m.affinity(o).map_err(|e| e.to_string())?;
            ensure!(a <= cfg.xi, "OOD {o:?} has affinity {a} > xi {}", cfg.xi);
            checked += 1;
        }
    }
    Ok(format!("{checked} OOD samples at or below xi"))
}

pub fn check_sigma_rule() -> Check {
    let mut rng = SampleRng::new(106, 0);
    for _ in 0..1000 {
        let kappa = rng.uniform(0.01, 10.0);
        let cfg = KernelConfig::new(kappa, rng.uniform(0.0, 5.0), kappa * rng.uniform(0.0001, 1.0));
        let mut ds: Vec<f64> = (0..20).map(|_| rng.uniform(0.0, 10.0)).collect();
        ds.push(0.0);
        ds.sort_by(f64::total_cmp);
        let mut prev = f64::INFINITY;
        for d in ds {
            let s = estimate_sigma(d, &cfg).map_err(|e| e.to_string())?;
            ensure!(s >= cfg.lambda && s <= cfg.kappa, "sigma {s} outside [{}, {}]", cfg.lambda, cfg.kappa);
            ensure!(s <= prev, "sigma increased with d*");
            prev = s;
        }
    }
    Ok("1000 configurations in [lambda, kappa], non-increasing".into())
}

pub fn check_superpose_dominates() -> Check {
    let mut rng = SampleRng::new(107, 0);
    for _ in 0..10_000 {
        let len = 1 + (rng.next_u64() % 12) as usize;
        let l: Vec<f64> = (0..len).map(|_| rng.next_f64()).collect();
        let s = superpose(&l).map_err(|e| e.to_string())?;
        let max = l.iter().copied().fold(0.0, f64::max);
        ensure!(s >= max, "superpose {s} < max {max} for {l:?}");
    }
    Ok("10000 lists".into())
}

/// Central differences against the analytic gradient, relative error <= 1e-5.
pub fn check_gradient() -> Check {
    let mut rng = SampleRng::new(108, 0);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 100 {
        let dim = 1 + (rng.next_u64() % 4) as usize;
        let n_id = 1 + (rng.next_u64() % 8) as usize;
        let ds = random_dataset(&mut rng, dim, n_id, 0, 5.0);
        let cfg = random_config(&mut rng);
        let (m, _) = derive(&ds, &cfg).map_err(|e| e.to_string())?;
        let b = Bounds::new(vec![-1.0; dim], vec![6.0; dim]).unwrap();
        let x = rng.point_in(&b);
        let g = affinity_gradient(m.kernels(), m.normalizer(), &x).map_err(|e| e.to_string())?;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-4 {
            continue;
        }
        let mut err2 = 0.0;
        for k in 0..dim {
            let h = 1e-6 * x[k].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let f = |p: &[f64]| global_affinity(m.kernels(), m.normalizer(), p).unwrap();
            let fd = (f(&xp) - f(&xm)) / (xp[k] - xm[k]);
            err2 += (fd - g[k]).powi(2);
        }
        let rel = err2.sqrt() / gnorm;
        worst = worst.max(rel);
        ensure!(rel <= 1e-5, "relative gradient error {rel:e} at {x:?}");
        done += 1;
    }
    Ok(format!("100 configurations, worst relative error {worst:.2e}"))
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Membership by Caratheodory: `x` is in the hull iff it has non-negative
/// barycentric coordinates in some simplex of `n + 1` generators.
pub fn caratheodory_contains(points: &[Vec<f64>], x: &[f64]) -> bool {
    let n = x.len();
    subsets(points.len(), n + 1).iter().any(|s| {
        let base = &points[s[0]];
        let a: Vec<Vec<f64>> = (0..n)
            .map(|r| s[1..].iter().map(|&j| points[j][r] - base[r]).collect())
            .collect();
        let rhs: Vec<f64> = (0..n).map(|r| x[r] - base[r]).collect();
        match solve(a, rhs) {
            Some(l) => l.iter().all(|&v| v >= -1e-12) && l.iter().sum::<f64>() <= 1.0 + 1e-12,
            None => false,
        }
    })
}

pub fn check_hull_oracle() -> Check {
    let mut rng = SampleRng::new(109, 0);
    let mut probes = 0;
    let mut inside = 0;
    for n in 1..=3 {
        for _ in 0..4 {
            let count = n + 1 + (rng.next_u64() % (12 - n as u64)) as usize;
            let b = Bounds::new(vec![0.0; n], vec![1.0; n]).unwrap();
            let pts: Vec<Vec<f64>> = (0..count).map(|_| rng.point_in(&b)).collect();
            let hull = build_convex_hull(&pts).map_err(|e| e.to_string())?;
            let wide = b.scaled(1.4);
            for _ in 0..1000 {
                let x = rng.point_in(&wide);
                let got = hull_contains(&hull, &x).map_err(|e| e.to_string())?;
                let want = caratheodory_contains(&pts, &x);
                ensure!(got == want, "n={n}: hull says {got}, oracle says {want} at {x:?}");
                inside += got as usize;
                probes += 1;
            }
        }
    }
    Ok(format!("{probes} probes agree ({inside} inside)"))
}

pub fn check_serialization() -> Check {
    let mut rng = SampleRng::new(110, 0);
    for (_, _, m) in random_models(111, 10) {
        let back = KernelOdd::from_json(&m.to_json()).map_err(|e| e.to_string())?;
        ensure!(back == m, "round trip changed the model");
        ensure!(back.to_json() == m.to_json(), "re-serialization differs");
        let dim = m.dimension();
        let b = Bounds::new(vec![-5.0; dim], vec![25.0; dim]).unwrap();
        let xs: Vec<Vec<f64>> = (0..1000).map(|_| rng.point_in(&b)).collect();
        let a = m.affinities(&xs).map_err(|e| e.to_string())?;
        let c = back.affinities(&xs).map_err(|e| e.to_string())?;
        for (x, (p, q)) in xs.iter().zip(a.iter().zip(&c)) {
            ensure!(p.to_bits() == q.to_bits(), "affinity differs at {x:?}: {p} vs {q}");
        }
    }
    Ok("10 models, 1000 probes each, bitwise equal".into())
}

pub type PropertyCheck = (&'static str, fn() -> Check);

pub const PROPERTY_CHECKS: [PropertyCheck; 9] = [
    ("affinity boundedness", check_boundedness),
    ("anchor absorption", check_anchor_absorption),
    ("permutation invariance", check_permutation_invariance),
    ("OOD soundness", check_ood_soundness),
    ("sigma rule", check_sigma_rule),
    ("superposition dominance", check_superpose_dominates),
    ("gradient vs central differences", check_gradient),
    ("hull vs Caratheodory oracle", check_hull_oracle),
    ("serialization round trip", check_serialization),
];
