//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vmfbf::{
    assemble_product, fbf_solve, fbf_step, fejer_certificate, inverse_resolvent_scaled,
    kkt_residual, pd_solve, pd_step, resolvent_scaled, schedule_validate, summability_certificate,
    vi_solve, AffineMap, DiagonalMetric, DualBlock, ErrorSchedule, ErrorSequence, FbfConfig,
    FbfProblem, GammaRule, LinearMap, LipschitzMonotoneMap, MetricSchedule, PdConfig,
    Point, ProxCatalogEntry, RunStatus, ScalarMonotone, StructuredProblem,
};
use vmfbf_bench::{load_config, solve, BuiltRun, RunOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn p(c: &[f64]) -> Point {
    Point::from(c.to_vec())
}

fn fixtures() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn catalog() -> Vec<(&'static str, ProxCatalogEntry)> {
    vec![
        ("zero", ProxCatalogEntry::Zero),
        ("l1", ProxCatalogEntry::l1(1.3).unwrap()),
        ("box_normal_cone", ProxCatalogEntry::box_normal_cone(-0.5, 2.0).unwrap()),
        ("support_abs", ProxCatalogEntry::support_abs(0.7).unwrap()),
        (
            "custom_piecewise",
            ProxCatalogEntry::custom_separable(
                ScalarMonotone::piecewise_linear(vec![(-1.0, -2.0), (0.0, 0.0), (0.5, 0.0), (2.0, 3.0)]).unwrap(),
            ),
        ),
        ("custom_cubic", ProxCatalogEntry::custom_separable(ScalarMonotone::cubic(0.8).unwrap())),
    ]
}

fn random_quadratic(rng: &mut ChaCha8Rng, d: usize) -> ProxCatalogEntry {
    // Q = MᵀM + S with S skew: monotone, generally nonsymmetric.
    let m: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mtm: f64 = (0..d).map(|k| m[k * d + i] * m[k * d + j]).sum();
            q[i * d + j] = mtm + s[i * d + j] - s[j * d + i];
        }
    }
    let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ProxCatalogEntry::quadratic(LinearMap::new(d, d, q).unwrap(), Point::from(b)).unwrap()
}

/// 500 random triples per catalog entry: the reconstructed element lies in
/// the operator's graph, and the inverse resolvent obeys the scalar identity.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut entries = catalog();
    entries.push(("quadratic", random_quadratic(&mut rng, 3)));
    let mut worst_moreau: f64 = 0.0;
    for (name, entry) in &entries {
        let oracle = entry.clone().into_oracle();
        for k in 0..500 {
            let d = if *name == "quadratic" { 3 } else { rng.gen_range(1..=4) };
            let gamma = rng.gen_range(0.1..10.0);
            let u = DiagonalMetric::from_weights((0..d).map(|_| rng.gen_range(0.5..4.0)).collect()).unwrap();
            let y = Point::from((0..d).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let pt = resolvent_scaled(oracle.as_ref(), gamma, &u, &y).map_err(|e| e.to_string())?;
            let a = u.scaled(gamma).apply_inverse(&(&y - &pt));
            ensure(
                oracle.contains(&pt, &a, 1e-9) == Some(true),
                format!("{name} triple {k}: (y - p)/(gamma U) not in A(p)"),
            )?;

            let inv = inverse_resolvent_scaled(oracle.as_ref(), gamma, &u, &y).map_err(|e| e.to_string())?;
            let back = u.scaled(gamma).apply_inverse(&(&y - &inv));
            ensure(
                oracle.contains(&back, &inv, 1e-9) == Some(true),
                format!("{name} triple {k}: inverse resolvent contract fails"),
            )?;
            if *name != "quadratic" {
                // Scalar identity evaluated one component at a time.
                for j in 0..d {
                    let s = gamma * u.weights()[j];
                    let inner = DiagonalMetric::from_weights(vec![1.0 / s]).unwrap();
                    let q = oracle.resolve(1.0, &inner, &p(&[y[j] / s])).map_err(|e| e.to_string())?;
                    let expect = y[j] - s * q[0];
                    worst_moreau = worst_moreau.max((inv[j] - expect).abs());
                }
            }
        }
    }
    ensure(worst_moreau <= 1e-10, format!("scalar identity deviation {worst_moreau:e}"))?;
    Ok(format!("{} operators x 500 triples, identity deviation {worst_moreau:.1e}", entries.len()))
}

fn rotation_problem() -> FbfProblem {
    FbfProblem::new(ProxCatalogEntry::Zero.into_oracle(), Arc::new(AffineMap::rotation90()), 2)
        .unwrap()
        .with_known_zero(p(&[0.0, 0.0]))
        .unwrap()
}

fn criterion_2() -> Outcome {
    let problem = rotation_problem();
    let cfg = FbfConfig::new(MetricSchedule::identity(2), p(&[1.0, 0.0]))
        .with_epsilon(0.1)
        .with_gamma(GammaRule::Constant(0.45))
        .with_stop_tol(0.0)
        .with_max_iter(500);
    let trace = fbf_solve(&problem, &cfg).map_err(|e| e.to_string())?;
    let dist: Vec<f64> = trace.rows.iter().map(|r| r.metric_distance.unwrap()).collect();
    let hit = dist.iter().position(|d| *d <= 1e-8);
    ensure(hit.is_some(), format!("min distance {:e}", dist.iter().cloned().fold(f64::INFINITY, f64::min)))?;
    ensure(dist.windows(2).all(|w| w[1] <= w[0]), "distance to 0 increased")?;
    let fejer = fejer_certificate(&trace, &problem, &cfg).map_err(|e| e.to_string())?;
    ensure(fejer.passed(), "Fejér certificate failed")?;
    ensure(fejer.total_error_bound == 0.0 && fejer.total_eta == 0.0, "nonzero slack")?;
    Ok(format!("||x_n|| <= 1e-8 at n = {}", hit.unwrap()))
}

fn l1_affine() -> FbfProblem {
    let b = AffineMap::new(LinearMap::identity(2), p(&[-2.0, -2.0]), Some(1.0)).unwrap();
    FbfProblem::new(ProxCatalogEntry::l1(1.0).unwrap().into_oracle(), Arc::new(b), 2).unwrap()
}

/// Fixed point of t ↦ soft(t − γ(t − 2), γ) by direct scalar iteration.
fn scalar_soft_fixed_point() -> f64 {
    let gamma = 0.5;
    let soft = |v: f64, t: f64| v.signum() * (v.abs() - t).max(0.0);
    let mut t = 0.0;
    for _ in 0..200 {
        t = soft(t - gamma * (t - 2.0), gamma);
    }
    t
}

fn criterion_3() -> Outcome {
    let target = scalar_soft_fixed_point();
    let oracle = p(&[target, target]);
    let base = FbfConfig::new(MetricSchedule::identity(2), p(&[0.0, 0.0]))
        .with_epsilon(0.1)
        .with_stop_tol(1e-10);
    let mut msgs = Vec::new();
    let runs = [
        ("clean", base.clone(), 1e-6),
        (
            "errors 0.5^n",
            base.clone().with_errors(ErrorSchedule::uniform(ErrorSequence::Geometric {
                scale: p(&[1.0, 1.0]),
                ratio: 0.5,
            })),
            1e-5,
        ),
        (
            "geometric metric",
            FbfConfig {
                schedule: MetricSchedule::geometric(1.0, 0.5, vec![1.0, 0.5]).unwrap(),
                epsilon: 0.05,
                ..base.clone()
            },
            1e-5,
        ),
    ];
    for (label, cfg, tol) in runs {
        let start = Instant::now();
        let trace = fbf_solve(&l1_affine(), &cfg).map_err(|e| e.to_string())?;
        let err = trace.final_x.distance(&oracle);
        let elapsed = start.elapsed();
        ensure(err <= tol, format!("{label}: distance {err:e} > {tol:e}"))?;
        ensure(elapsed < Duration::from_secs(1), format!("{label}: {elapsed:?}"))?;
        msgs.push(format!("{label} {err:.1e}"));
    }
    Ok(msgs.join(", "))
}

fn criterion_4() -> Outcome {
    let shifted = |s: [f64; 2]| -> Arc<dyn LipschitzMonotoneMap> {
        Arc::new(AffineMap::new(LinearMap::identity(2), p(&[-s[0], -s[1]]), Some(1.0)).unwrap())
    };
    let cfg = FbfConfig::new(MetricSchedule::identity(2), p(&[0.0, 0.0]))
        .with_epsilon(0.1)
        .with_stop_tol(1e-12);
    let cases = [
        ("box", ProxCatalogEntry::box_normal_cone(0.0, 1.0).unwrap(), shifted([2.0, 2.0])),
        ("l1", ProxCatalogEntry::l1(1.0).unwrap(), shifted([0.5, 2.0])),
    ];
    let mut msgs = Vec::new();
    for (label, f, b) in cases {
        let out = vi_solve(&f, b, &cfg).map_err(|e| e.to_string())?;
        ensure(out.check.probes == 100, "probe count")?;
        ensure(
            out.check.max_violation <= 1e-6,
            format!("{label}: violation {:e}", out.check.max_violation),
        )?;
        msgs.push(format!("{label} max violation {:.1e}", out.check.max_violation.max(0.0)));
    }
    Ok(msgs.join(", "))
}

fn scalar_pd() -> StructuredProblem {
    StructuredProblem::new(
        p(&[5.0]),
        ProxCatalogEntry::Zero.into_oracle(),
        Arc::new(AffineMap::identity(1)),
        vec![DualBlock {
            r: p(&[0.0]),
            b: ProxCatalogEntry::quadratic(LinearMap::identity(1), p(&[0.0])).unwrap().into_oracle(),
            d_inv: Arc::new(AffineMap::zero(1, 1.0).unwrap()),
            l: LinearMap::diagonal(&[2.0]),
        }],
    )
    .unwrap()
}

fn criterion_5() -> Outcome {
    let prob = scalar_pd();
    let mut cfg = PdConfig::new(&prob);
    cfg.epsilon = 0.05;
    cfg.stop_tol = 1e-12;
    let out = pd_solve(&prob, &cfg).map_err(|e| e.to_string())?;
    let (x, v) = (out.state.x[0], out.state.v[0][0]);
    ensure((x - 1.0).abs() <= 1e-8, format!("x = {x}"))?;
    ensure((v - 2.0).abs() <= 1e-8, format!("v = {v}"))?;
    let kkt = kkt_residual(&prob, &out.state).map_err(|e| e.to_string())?;
    ensure(kkt <= 1e-7, format!("kkt {kkt:e}"))?;
    Ok(format!("x = {x:.12}, v = {v:.12}, kkt {kkt:.1e}"))
}

const QA: [f64; 9] = [2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.5];
const BA: [f64; 3] = [0.2, 0.0, -0.3];
const MC: [f64; 9] = [0.5, 1.0, 0.0, -1.0, 0.5, 0.2, 0.0, -0.2, 0.3];
const L1: [f64; 6] = [1.0, -1.0, 0.0, 0.0, 0.5, 1.0];
const L2: [f64; 3] = [0.2, 0.3, -0.4];
const QB1: [f64; 4] = [1.0, 0.0, 0.0, 2.0];
const B1: [f64; 2] = [0.1, 0.0];
const N1: [f64; 4] = [0.5, 0.0, 0.0, 0.25];
const R1: [f64; 2] = [0.3, -0.1];
const Z: [f64; 3] = [1.0, -2.0, 0.5];

fn two_block() -> StructuredProblem {
    let quad = |q: &[f64], d: usize, b: &[f64]| {
        ProxCatalogEntry::quadratic(LinearMap::new(d, d, q.to_vec()).unwrap(), p(b))
            .unwrap()
            .into_oracle()
    };
    let lin = |m: &[f64], d: usize| -> Arc<dyn LipschitzMonotoneMap> {
        Arc::new(AffineMap::linear(LinearMap::new(d, d, m.to_vec()).unwrap(), None).unwrap())
    };
    StructuredProblem::new(
        p(&Z),
        quad(&QA, 3, &BA),
        lin(&MC, 3),
        vec![
            DualBlock {
                r: p(&R1),
                b: quad(&QB1, 2, &B1),
                d_inv: lin(&N1, 2),
                l: LinearMap::new(2, 3, L1.to_vec()).unwrap(),
            },
            DualBlock {
                r: p(&[1.0]),
                b: quad(&[3.0], 1, &[-0.5]),
                d_inv: lin(&[1.0], 1),
                l: LinearMap::new(1, 3, L2.to_vec()).unwrap(),
            },
        ],
    )
    .unwrap()
}

/// Max absolute deviation between the primal–dual iterates and the direct
/// iteration on the assembled product problem.
fn product_deviation(prob: &StructuredProblem, cfg: &PdConfig, steps: usize) -> Result<f64, String> {
    let (fp, fc) = assemble_product(prob, cfg).map_err(|e| e.to_string())?;
    let bounds = fc.gamma_interval(fp.beta()).map_err(|e| e.to_string())?;
    let mut pd = cfg.initial.clone();
    let mut w = fc.initial.clone();
    let mut worst: f64 = 0.0;
    for n in 0..steps {
        let gamma = cfg.gamma_rule.gamma(n, bounds).map_err(|e| e.to_string())?;
        pd = pd_step(&pd, n, gamma, prob, cfg).map_err(|e| e.to_string())?.next;
        w = fbf_step(&w, n, &fp, &fc).map_err(|e| e.to_string())?.x_next;
        worst = worst.max(pd.to_product().distance(&w));
    }
    Ok(worst)
}

fn criterion_6() -> Outcome {
    let scalar = scalar_pd();
    let scalar_cfg = PdConfig::new(&scalar);
    let d1 = product_deviation(&scalar, &scalar_cfg, 200)?;

    let prob = two_block();
    let mut cfg = PdConfig::new(&prob);
    cfg.epsilon = 0.05;
    cfg.primal_schedule = MetricSchedule::geometric(0.5, 0.8, vec![1.0, 0.5, 0.2]).unwrap();
    cfg.dual_schedules[0] = MetricSchedule::constant(DiagonalMetric::from_weights(vec![1.5, 0.8]).unwrap());
    cfg.dual_schedules[1] = MetricSchedule::geometric(1.0, 0.5, vec![1.0]).unwrap();
    cfg.errors.primal = ErrorSchedule::uniform(ErrorSequence::Geometric {
        scale: p(&[0.1, -0.2, 0.3]),
        ratio: 0.6,
    });
    cfg.errors.dual[1] = ErrorSchedule::uniform(ErrorSequence::Geometric { scale: p(&[0.4]), ratio: 0.7 });
    let d2 = product_deviation(&prob, &cfg, 200)?;
    ensure(d1 <= 1e-10 && d2 <= 1e-10, format!("scalar {d1:e}, two-block {d2:e}"))?;
    Ok(format!("200 steps: scalar {d1:.1e}, two-block (variable metric, errors) {d2:.1e}"))
}

/// Dense solve of the stacked optimality system of the two-block instance:
/// (Q_A + M_C) x + Σ L_iᵀ v_i = z − b_A,
/// Q_{B_i} L_i x − (Q_{B_i} N_i + I) v_i = Q_{B_i} r_i − b_i.
fn dense_oracle() -> DVector<f64> {
    let qa = DMatrix::from_row_slice(3, 3, &QA);
    let mc = DMatrix::from_row_slice(3, 3, &MC);
    let l1 = DMatrix::from_row_slice(2, 3, &L1);
    let l2 = DMatrix::from_row_slice(1, 3, &L2);
    let qb1 = DMatrix::from_row_slice(2, 2, &QB1);
    let n1 = DMatrix::from_row_slice(2, 2, &N1);
    let qb2 = DMatrix::from_element(1, 1, 3.0);
    let n2 = DMatrix::from_element(1, 1, 1.0);
    let mut k = DMatrix::<f64>::zeros(6, 6);
    k.view_mut((0, 0), (3, 3)).copy_from(&(&qa + &mc));
    k.view_mut((0, 3), (3, 2)).copy_from(&l1.transpose());
    k.view_mut((0, 5), (3, 1)).copy_from(&l2.transpose());
    k.view_mut((3, 0), (2, 3)).copy_from(&(&qb1 * &l1));
    k.view_mut((3, 3), (2, 2)).copy_from(&(-(&qb1 * &n1 + DMatrix::identity(2, 2))));
    k.view_mut((5, 0), (1, 3)).copy_from(&(&qb2 * &l2));
    k.view_mut((5, 5), (1, 1)).copy_from(&(-(&qb2 * &n2 + DMatrix::identity(1, 1))));
    let rhs1 = &qb1 * DVector::from_row_slice(&R1) - DVector::from_row_slice(&B1);
    let rhs = DVector::from_vec(vec![
        Z[0] - BA[0],
        Z[1] - BA[1],
        Z[2] - BA[2],
        rhs1[0],
        rhs1[1],
        3.0 * 1.0 + 0.5,
    ]);
    k.lu().solve(&rhs).expect("nonsingular system")
}

fn criterion_7() -> Outcome {
    let prob = two_block();
    let mut cfg = PdConfig::new(&prob);
    cfg.epsilon = 0.05;
    cfg.stop_tol = 1e-12;
    cfg.max_iter = 100_000;
    let out = pd_solve(&prob, &cfg).map_err(|e| e.to_string())?;
    ensure(out.trace.status == RunStatus::Converged, "did not converge")?;
    let oracle = dense_oracle();
    let w = out.state.to_product();
    let primal = (0..3).map(|i| (w[i] - oracle[i]).abs()).fold(0.0, f64::max);
    let dual = (3..6).map(|i| (w[i] - oracle[i]).abs()).fold(0.0, f64::max);
    ensure(primal <= 1e-6 && dual <= 1e-6, format!("primal {primal:e}, dual {dual:e}"))?;
    Ok(format!("primal {primal:.1e}, dual {dual:.1e}"))
}

fn criterion_8() -> Outcome {
    let constant = MetricSchedule::constant(DiagonalMetric::from_weights(vec![1.0, 2.5, 0.7]).unwrap());
    let geometric = MetricSchedule::geometric(2.0, 0.9, vec![1.0, 0.3, 0.0]).unwrap();
    for (name, s) in [("constant", &constant), ("geometric", &geometric)] {
        let r = schedule_validate(s, 10_000);
        ensure(r.is_admissible(), format!("{name}: {:?}", r.violations.first()))?;
    }
    // U_n = 1 + 2^{-n} decreases; with η_n = 0 every step breaks the chain.
    let decreasing = MetricSchedule::from_fn(1, 1.0, 2.0, true, |n| vec![1.0 + 0.5f64.powi(n as i32)], |_| 0.0);
    let n_max = 40;
    let report = schedule_validate(&decreasing, n_max);
    let flagged: Vec<usize> = report.chain_violations().map(|v| v.n).collect();
    ensure(flagged == (0..n_max).collect::<Vec<_>>(), format!("flagged {flagged:?}"))?;
    Ok(format!("built-ins admissible to n = 10^4; counterexample rejected at all n < {n_max}"))
}

fn criterion_9() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for path in fixtures() {
        let cfg = load_config(&path).map_err(|e| e.to_string())?;
        let out = solve(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
        let Ok(trace) = out.result else { continue };
        if trace.status != RunStatus::Converged {
            continue;
        }
        let s = summability_certificate(&trace);
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        ensure(s.tail_fraction < 0.05, format!("{name}: tail fraction {}", s.tail_fraction))?;
        if matches!(cfg.build(), Ok(BuiltRun::Pd { .. })) {
            ensure(trace.rows.iter().all(|r| r.dual_residual.is_some()), format!("{name}: dual column"))?;
        }
        worst = worst.max(s.tail_fraction);
        checked += 1;
    }
    ensure(checked >= 8, format!("only {checked} converged fixtures"))?;
    Ok(format!("{checked} converged fixtures, worst tail fraction {worst:.1e}"))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = fixtures();
    for path in &files {
        let mut traces = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{}-{k}", path.file_stem().unwrap().to_string_lossy()));
            let status = Command::new(env!("CARGO_BIN_EXE_vmfbf"))
                .arg("--config")
                .arg(path)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.code().is_some(), "terminated by signal")?;
            traces.push(fs::read(out.join("trace.csv")).map_err(|e| e.to_string())?);
        }
        ensure(traces[0] == traces[1], format!("{} differs between runs", path.display()))?;
    }
    Ok(format!("{} fixtures, two runs each, identical traces", files.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 resolvent contract", criterion_1, Some(Duration::from_secs(5))),
        ("2 rotation", criterion_2, Some(Duration::from_secs(1))),
        ("3 l1 + affine", criterion_3, Some(Duration::from_secs(3))),
        ("4 variational inequalities", criterion_4, Some(Duration::from_secs(1))),
        ("5 primal-dual scalar", criterion_5, Some(Duration::from_secs(1))),
        ("6 product-space equivalence", criterion_6, Some(Duration::from_secs(2))),
        ("7 two-block dense oracle", criterion_7, Some(Duration::from_secs(2))),
        ("8 schedule validator", criterion_8, Some(Duration::from_secs(1))),
        ("9 summability", criterion_9, None),
        ("10 determinism", criterion_10, None),
    ];
    let mut failed = 0;
    for (name, f, limit) in criteria {
        let start = Instant::now();
        let mut result = f();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if elapsed > limit {
                result = Err(format!("runtime {elapsed:?} exceeds {limit:?}"));
            }
        }
        match result {
            Ok(msg) => println!("PASS  criterion {name}: {msg} [{:.3}s]", elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name}: {msg} [{:.3}s]", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
