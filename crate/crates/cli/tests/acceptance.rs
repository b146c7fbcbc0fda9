//! End-to-end acceptance checks. Runs every criterion in sequence, prints one
//! PASS/FAIL line each and exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gripdecode::classify::mlp::{loss_and_gradient, MlpShape};
use gripdecode::classify::svm::{kkt_violation, solve};
use gripdecode::classify::{Kernel, ModelKind, ModelSpec, SvmModel};
use gripdecode::covariance::shrink;
use gripdecode::csp::csp_fit;
use gripdecode::eval::{
    evaluate_grid, fit_fold, prepare_pair, run_ablation, AugmentOrder, AugmentPlan, EvalConfig, PairId,
};
use gripdecode::layout::{LayoutFile, HEADSET16};
use gripdecode::preprocess::{self, AugmentConfig, PreprocessConfig};
use gripdecode::riemann::{logeuclid_mean, tangent_project, uvec_weighted, SpdMatrix};
use gripdecode::stats::{bootstrap_compare, chance_level, wilcoxon_signed_rank};
use gripdecode::synth::{generate, SynthSpec};
use gripdecode::wavelet::{dwt, idwt, WaveletFamily, WaveletSpec};
use gripdecode::{EpochSet, Handedness, Label};
use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_spd(e: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(e, e + 2, |_, _| normal(rng));
    &a * a.transpose() + DMatrix::identity(e, e) * 0.05
}

fn chance_constant() -> Outcome {
    // exact tail sums with integer binomial coefficients
    let n = 180usize;
    let mut coef = vec![BigUint::from(1u32)];
    for k in 1..=n {
        let prev = coef[k - 1].clone();
        coef.push(prev * BigUint::from((n - k + 1) as u64) / BigUint::from(k as u64));
    }
    let total = BigUint::from(1u32) << n;
    let mut tail = BigUint::from(0u32);
    let mut oracle = 1.0;
    for k in (0..=n).rev() {
        tail += &coef[k];
        // tail / 2^n <= 1/20  <=>  20 * tail <= 2^n
        if &tail * BigUint::from(20u32) > total {
            break;
        }
        oracle = k as f64 / n as f64;
    }
    let c = chance_level(n, 0.05).map_err(|e| e.to_string())?;
    ensure!(c == oracle, "chance_level {c} differs from exact oracle {oracle}");
    ensure!((0.555..=0.567).contains(&c), "chance level {c} outside [0.555, 0.567]");
    Ok(format!("chance_level(180, 0.05) = {c:.4}"))
}

fn csp_diagonalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for i in 0..200 {
        let e = 2 + i % 15;
        let ca = random_spd(e, &mut rng);
        let cb = random_spd(e, &mut rng);
        let f = e - e % 2;
        let m = csp_fit(&shrink(&ca, 0.0).unwrap(), &shrink(&cb, 0.0).unwrap(), f, (Label::TG, Label::PG))
            .map_err(|e| e.to_string())?;
        let w = &m.filters;
        let r = (w.transpose() * &ca * w + w.transpose() * &cb * w - DMatrix::identity(f, f)).norm();
        worst = worst.max(r);
    }
    ensure!(worst < 1e-8, "joint diagonalization residual {worst:e}");
    let ca = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let cb = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
    let m = csp_fit(&shrink(&ca, 0.0).unwrap(), &shrink(&cb, 0.0).unwrap(), 2, (Label::TG, Label::PG))
        .map_err(|e| e.to_string())?;
    let err = (m.eigenvalues[0] - 2.0 / 3.0).abs().max((m.eigenvalues[1] - 1.0 / 3.0).abs());
    ensure!(err < 1e-12, "analytic eigenvalues {:?}", m.eigenvalues);
    Ok(format!("max residual {worst:.1e}, analytic error {err:.1e}"))
}

fn riemann_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut t_worst, mut u_worst, mut m_worst) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..100 {
        let e = 2 + i % 11;
        let m = SpdMatrix::new(random_spd(e, &mut rng)).unwrap();
        t_worst = t_worst.max(tangent_project(&m, &m).unwrap().norm());

        let c = SpdMatrix::new(random_spd(e, &mut rng)).unwrap();
        let s = tangent_project(&c, &m).unwrap();
        let v = uvec_weighted(&s).unwrap();
        let sq: f64 = v.values.iter().map(|x| x * x).sum();
        u_worst = u_worst.max((sq - s.norm_squared()).abs());

        let mats: Vec<SpdMatrix> = (0..5).map(|_| SpdMatrix::new(random_spd(e, &mut rng)).unwrap()).collect();
        let inv: Vec<SpdMatrix> = mats.iter().map(|a| a.inverse()).collect();
        let lhs = logeuclid_mean(&inv).unwrap();
        let rhs = logeuclid_mean(&mats).unwrap().inverse();
        m_worst = m_worst.max((lhs.matrix() - rhs.matrix()).norm() / rhs.matrix().norm());
    }
    ensure!(t_worst < 1e-10, "tangent_project(M, M) norm {t_worst:e}");
    ensure!(u_worst < 1e-12, "uvec norm mismatch {u_worst:e}");
    ensure!(m_worst < 1e-9, "mean/inverse commutation {m_worst:e}");
    Ok(format!("{t_worst:.1e} / {u_worst:.1e} / {m_worst:.1e}"))
}

fn wavelet_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut rec, mut energy) = (0.0_f64, 0.0_f64);
    for len in [125, 250] {
        for level in [2, 3] {
            let spec = WaveletSpec::new(WaveletFamily::Db4, level).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
                let d = dwt(&x, spec).map_err(|e| e.to_string())?;
                let y = idwt(&d);
                ensure!(y.len() == len, "reconstructed length {} != {len}", y.len());
                rec = rec.max(x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                energy = energy.max((d.energy() - x.iter().map(|v| v * v).sum::<f64>()).abs());
            }
        }
    }
    ensure!(rec < 1e-10, "reconstruction error {rec:e}");
    ensure!(energy < 1e-9, "energy error {energy:e}");
    Ok(format!("reconstruction {rec:.1e}, energy {energy:.1e}"))
}

fn classifier_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut kkt = 0.0_f64;
    for i in 0..20 {
        let shift = if i % 2 == 0 { 4.0 } else { 0.2 };
        let kernel = if i % 4 < 2 { Kernel::Linear } else { Kernel::Rbf { gamma: 0.3 } };
        let mut x = Vec::new();
        let mut y = Vec::new();
        for j in 0..60 {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            x.push((0..3).map(|_| s * shift + normal(&mut rng)).collect::<Vec<f64>>());
            y.push(s);
        }
        let k = kernel.gram(&x);
        let sol = solve(&k, &y, 1.0, 1e-3, 1_000_000).map_err(|e| e.to_string())?;
        kkt = kkt.max(kkt_violation(&k, &y, &sol, 1.0));
    }
    ensure!(kkt <= 1e-3, "KKT residual {kkt:e}");

    let shape = MlpShape { inputs: 4, hidden: 15 };
    let x = DMatrix::from_fn(4, 30, |_, _| normal(&mut rng));
    let y: Vec<f64> = (0..30).map(|i| f64::from(u8::from(x[(0, i)] > 0.0))).collect();
    let theta: Vec<f64> = (0..shape.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, g) = loss_and_gradient(shape, &theta, &x, &y);
    let h = 1e-6;
    let num: Vec<f64> = (0..theta.len())
        .map(|k| {
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[k] += h;
            tm[k] -= h;
            (loss_and_gradient(shape, &tp, &x, &y).0 - loss_and_gradient(shape, &tm, &x, &y).0) / (2.0 * h)
        })
        .collect();
    let diff = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rel = diff / g.iter().map(|a| a * a).sum::<f64>().sqrt();
    ensure!(rel < 1e-5, "MLP gradient relative error {rel:e}");

    let px = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let py = vec![1.0, 1.0, -1.0, -1.0];
    let acc = |m: &SvmModel| px.iter().zip(&py).filter(|(p, t)| m.decision(p).signum() == **t).count() as f64 / 4.0;
    let rbf = SvmModel::fit(&px, &py, Kernel::Rbf { gamma: 1.0 }, 1.0, 1e-3, 1_000_000).map_err(|e| e.to_string())?;
    let lin = SvmModel::fit(&px, &py, Kernel::Linear, 1.0, 1e-3, 1_000_000).map_err(|e| e.to_string())?;
    let (ra, la) = (acc(&rbf), acc(&lin));
    ensure!(ra == 1.0, "RBF-SVM XOR train accuracy {ra}");
    ensure!(la <= 0.75, "linear SVM XOR train accuracy {la}");
    Ok(format!("KKT {kkt:.1e}, gradient {rel:.1e}, XOR rbf {ra} linear {la}"))
}

/// p-value by enumerating all 2ⁿ sign assignments of the ranked differences.
fn enumerated_wilcoxon(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    // doubled average ranks of |d|
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<u64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as u64;
            let equal = abs.iter().filter(|b| *b == a).count() as u64;
            2 * below + equal + 1
        })
        .collect();
    let observed: u64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let s: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        le += u64::from(s <= observed);
        ge += u64::from(s >= observed);
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for n in 1..=10 {
        for _ in 0..50 {
            // small integer grid so ties and zero differences occur
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
            let p = wilcoxon_signed_rank(&x, &y).map_err(|e| e.to_string())?;
            worst = worst.max((p - enumerated_wilcoxon(&x, &y)).abs());
        }
    }
    ensure!(worst < 1e-12, "Wilcoxon disagrees with enumeration by {worst:e}");

    let mut null = 0.0;
    for seed in 0..20 {
        let a: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
        null += bootstrap_compare(&a, &b, 1000, 3, seed).map_err(|e| e.to_string())?.fraction_significant;
    }
    null /= 20.0;
    ensure!(null <= 0.10, "null fraction significant {null}");
    let a: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
    let b: Vec<f64> = (0..20).map(|_| normal(&mut rng) + 10.0).collect();
    let power = bootstrap_compare(&a, &b, 1000, 3, 0).map_err(|e| e.to_string())?.fraction_significant;
    ensure!(power >= 0.9, "planted-shift fraction significant {power}");
    Ok(format!("enumeration {worst:.1e}, null {null:.3}, power {power:.3}"))
}

fn synthetic_session() -> Result<EpochSet, String> {
    let raw = generate(&SynthSpec::default_session(1)).map_err(|e| e.to_string())?;
    Ok(preprocess::run(&raw, &PreprocessConfig::default()).map_err(|e| e.to_string())?.set)
}

fn all_specs() -> Vec<ModelSpec> {
    ModelKind::ALL.into_iter().map(ModelSpec::new).collect()
}

fn end_to_end() -> Outcome {
    let set = synthetic_session()?;
    let reports = evaluate_grid(&set, &PairId::ALL, &all_specs(), &EvalConfig::default()).map_err(|e| e.to_string())?;
    let (mut rest_min, mut move_min, mut move_max) = (1.0_f64, 1.0_f64, 0.0_f64);
    for r in &reports {
        let acc = r.mean.accuracy;
        if r.pair.involves_rest() {
            ensure!(acc >= 0.95, "{} {}: accuracy {acc:.3} below 0.95", r.pair, r.model);
            rest_min = rest_min.min(acc);
        } else {
            ensure!((0.60..=0.95).contains(&acc), "{} {}: accuracy {acc:.3} outside [0.60, 0.95]", r.pair, r.model);
            move_min = move_min.min(acc);
            move_max = move_max.max(acc);
        }
    }
    ensure!(reports.len() == 36, "{} reports", reports.len());
    Ok(format!("vs Rest >= {rest_min:.3}, movement pairs {move_min:.3}..{move_max:.3}"))
}

fn ablation() -> Outcome {
    let set = synthetic_session()?;
    let file = LayoutFile::default_cap63();
    let combos = [file.get(0).unwrap().clone(), file.get(6).unwrap().clone()];
    let table = run_ablation(&set, &combos, Handedness::Right, &PairId::ALL, &all_specs(), &EvalConfig::default())
        .map_err(|e| e.to_string())?;
    for r in table.rows.iter().filter(|r| r.combination == 0) {
        ensure!(r.drop == 0.0, "combination 0 drop {} for {} {}", r.drop, r.pair, r.model);
    }
    let base = table.mean_accuracy(0).ok_or("no baseline rows")?;
    let occipital = table.mean_accuracy(6).ok_or("no combination 6 rows")?;
    ensure!(base - occipital >= 0.05, "baseline {base:.3} vs occipital {occipital:.3}");
    Ok(format!("combination 0 {base:.3}, combination 6 {occipital:.3}"))
}

fn leakage_guard() -> Outcome {
    let spec = SynthSpec::grasp_session(HEADSET16.iter().map(|s| s.to_string()).collect(), 125.0, 30, 0.3, 0.1, 0.2, 9)
        .map_err(|e| e.to_string())?;
    let set = preprocess::run(&generate(&spec).map_err(|e| e.to_string())?, &PreprocessConfig::default())
        .map_err(|e| e.to_string())?
        .set;
    let cfg = EvalConfig {
        augment: Some(AugmentPlan {
            order: AugmentOrder::InFold,
            config: AugmentConfig::new(40, 3),
        }),
        ..EvalConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for pair in [PairId::TgPg, PairId::PgRest] {
        let data = prepare_pair(&set, pair, &cfg).map_err(|e| e.to_string())?;
        let len = data.set.n_channels() * data.set.n_samples();
        for fold in 0..cfg.k {
            let mut values = data.set.data().to_vec();
            for &t in data.plan.test_indices(fold) {
                for v in &mut values[t * len..(t + 1) * len] {
                    *v = 50.0 * normal(&mut rng);
                }
            }
            let mutated = EpochSet::new(
                values,
                data.set.n_samples(),
                data.set.labels().to_vec(),
                data.set.sample_rate(),
                data.set.channels().to_vec(),
                data.set.meta().clone(),
            )
            .map_err(|e| e.to_string())?;
            let other = prepare_pair(&mutated, pair, &cfg).map_err(|e| e.to_string())?;
            for spec in all_specs() {
                let a = fit_fold(&data, fold, &spec, &cfg).map_err(|e| e.to_string())?;
                let b = fit_fold(&other, fold, &spec, &cfg).map_err(|e| e.to_string())?;
                ensure!(
                    a.fingerprint() == b.fingerprint(),
                    "{pair} fold {fold} {}: fitted parameters changed",
                    spec.kind
                );
                checked += 1;
            }
        }
        // the fingerprint does see training data
        let a = fit_fold(&data, 0, &ModelSpec::new(ModelKind::Lda), &cfg).map_err(|e| e.to_string())?;
        let b = fit_fold(&data, 1, &ModelSpec::new(ModelKind::Lda), &cfg).map_err(|e| e.to_string())?;
        ensure!(a.fingerprint() != b.fingerprint(), "fingerprint blind to training data");
    }
    Ok(format!("{checked} fitted folds unchanged (both pipelines)"))
}

fn evaluate_run(dir: &Path, workers: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gripdecode"))
        .env_remove("GRIPDECODE_OUT_DIR")
        .args(["--workers", workers, "--out-dir"])
        .arg(dir)
        .arg("evaluate")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "evaluate failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("one"), tmp.path().join("many"));
    evaluate_run(&a, "1")?;
    evaluate_run(&b, "4")?;
    for f in ["results.csv", "folds.csv", "summary.json"] {
        let x = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(f)).map_err(|e| e.to_string())?;
        ensure!(x == y, "{f} differs between 1 and 4 workers");
    }
    Ok("results.csv, folds.csv, summary.json identical for 1 and 4 workers".into())
}

type Check = fn() -> Outcome;

const CRITERIA: [(&str, u64, Check); 10] = [
    ("chance-level constant", 1, chance_constant),
    ("CSP joint diagonalization", 10, csp_diagonalization),
    ("Riemannian identities", 10, riemann_identities),
    ("wavelet reconstruction and energy", 5, wavelet_reconstruction),
    ("classifier soundness", 60, classifier_soundness),
    ("statistics", 60, statistics),
    ("end-to-end synthetic accuracy", 300, end_to_end),
    ("ablation mechanics", 300, ablation),
    ("leakage guard", 60, leakage_guard),
    ("determinism across worker counts", 600, determinism),
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| id.to_string() == *f || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("{detail}; took {elapsed:.1?}, budget {budget} s"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
