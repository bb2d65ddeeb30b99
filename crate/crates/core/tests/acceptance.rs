//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cstar::algebra::sample_algebras;
use cstar::experiments::{
    run_algebra_check, run_convexity, run_equivariance, run_expressiveness, run_norm_comparison, ConvexityConfig,
    ExperimentReport,
};
use cstar::hilbert::ModuleVector;
use cstar::net::{
    build_tied_net, grad_check, Activation, AlphaMap, CStarLayer, CStarNet, ParameterMap, ProbabilityWeights, ScalarNet,
};
use cstar::rkhm::{fit_krr, AKernel, BaseKernel, KernelTerm, RkhmExpansion};
use cstar::{Algebra, Element};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Passes when every threshold selected by `keep` holds.
fn report_outcome(report: &ExperimentReport, keep: impl Fn(&str) -> bool) -> Outcome {
    let failed: Vec<String> = report
        .failures()
        .into_iter()
        .filter(|t| keep(&t.metric))
        .map(|t| {
            format!(
                "{}={:e}",
                t.metric,
                report.metrics.get(&t.metric).copied().unwrap_or(f64::NAN)
            )
        })
        .collect();
    let checked = report.thresholds.iter().filter(|t| keep(&t.metric)).count();
    if failed.is_empty() {
        Ok(format!("thresholds checked: {checked}"))
    } else {
        Err(failed.join(", "))
    }
}

fn random_points(r: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn random_positive(alg: &Algebra, r: &mut ChaCha8Rng) -> Element {
    let d = alg.random_element(r);
    d.star().mul(&d).unwrap()
}

fn random_complex(d: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..d)
        .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
        .collect()
}

fn random_vector(alg: &Algebra, d: usize, r: &mut ChaCha8Rng) -> ModuleVector {
    ModuleVector::new((0..d).map(|_| alg.random_element(r)).collect()).unwrap()
}

fn kernel_families(r: &mut ChaCha8Rng) -> Result<Vec<AKernel>, String> {
    let mut out = Vec::new();
    for alg in sample_algebras() {
        out.push(AKernel::gaussian(2, 0.7, alg.identity()).map_err(err)?);
        let terms = vec![
            KernelTerm {
                base: BaseKernel::Gaussian { gamma: 1.3 },
                coeff: random_positive(&alg, r),
            },
            KernelTerm {
                base: BaseKernel::Linear,
                coeff: random_positive(&alg, r),
            },
        ];
        out.push(AKernel::new(2, terms).map_err(err)?);
    }
    Ok(out)
}

fn c_star_identity() -> Outcome {
    let report = run_algebra_check(&sample_algebras(), 100, 1).map_err(err)?;
    report_outcome(&report, |m| !m.contains("module_"))
}

fn module_axioms() -> Outcome {
    let report = run_algebra_check(&sample_algebras(), 100, 2).map_err(err)?;
    report_outcome(&report, |m| m.contains("module_"))
}

fn kernel_positivity() -> Outcome {
    let mut r = rng(3);
    let families = kernel_families(&mut r)?;
    let mut sets = 0;
    for k in &families {
        for _ in 0..50 {
            let n = r.gen_range(1..=8);
            let g = k.gram(&random_points(&mut r, n, 2)).map_err(err)?;
            ensure(g.check_pd(1e-8).map_err(err)?, || {
                format!("{} not positive", k.algebra())
            })?;
            sets += 1;
        }
    }
    let alg = Algebra::dense(2).map_err(err)?;
    let bad = alg.element_real(&[1.0, 0.0, 0.0, -1.0]).map_err(err)?;
    let term = KernelTerm {
        base: BaseKernel::Gaussian { gamma: 1.0 },
        coeff: bad,
    };
    ensure(AKernel::new(2, vec![term.clone()]).is_err(), || {
        "non-positive coefficient accepted".into()
    })?;
    let k = AKernel::new_unchecked(2, vec![term]).map_err(err)?;
    let g = k.gram(&random_points(&mut r, 3, 2)).map_err(err)?;
    ensure(!g.check_pd(1e-8).map_err(err)?, || "violation not detected".into())?;
    Ok(format!(
        "{sets} point sets over {} kernels, violation detected",
        families.len()
    ))
}

/// Ordinary ridge regression with a Gauss-Jordan solve.
fn ordinary_krr(points: &[Vec<f64>], y: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = points.len();
    let kern = |a: &[f64], b: &[f64]| (-gamma * a.iter().zip(b).map(|(s, t)| (s - t).powi(2)).sum::<f64>()).exp();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| kern(&points[i], &points[j]) + if i == j { lambda } else { 0.0 })
                .collect();
            row.push(y[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        let pivot_row = m[col].clone();
        for (row, entries) in m.iter_mut().enumerate() {
            if row != col {
                let f = entries[col];
                entries.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    m.iter().map(|row| row[n]).collect()
}

fn reproducing_property() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0_f64;
    for k in kernel_families(&mut r)? {
        let alg = k.algebra().clone();
        let pts = random_points(&mut r, 5, 2);
        let cs: Vec<Element> = (0..5).map(|_| alg.random_element(&mut r)).collect();
        let v = RkhmExpansion::new(&alg, pts.clone(), cs.clone()).map_err(err)?;
        for xj in &pts {
            let lhs = RkhmExpansion::feature(&alg, xj).inner(&v, &k).map_err(err)?;
            let mut rhs = alg.zero();
            for (xi, ci) in pts.iter().zip(&cs) {
                rhs = rhs
                    .add(&k.eval(xj, xi).map_err(err)?.mul(ci).map_err(err)?)
                    .map_err(err)?;
            }
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    ensure(worst <= 1e-10, || format!("reproducing error {worst:e}"))?;

    let alg = Algebra::scalar();
    let mut krr_worst = 0.0_f64;
    for n in 1..=8 {
        let (gamma, lambda) = (0.9, 1e-2);
        let k = AKernel::gaussian(2, gamma, alg.identity()).map_err(err)?;
        let pts = random_points(&mut r, n, 2);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let targets: Vec<Element> = y.iter().map(|&v| alg.element_real(&[v]).unwrap()).collect();
        let model = fit_krr(&k, &pts, &targets, lambda).map_err(err)?;
        let oracle = ordinary_krr(&pts, &y, gamma, lambda);
        for (ci, oi) in model.coefficients.iter().zip(&oracle) {
            krr_worst = krr_worst.max((ci.coords()[0] - Complex64::new(*oi, 0.0)).norm());
        }
    }
    ensure(krr_worst <= 1e-8, || {
        format!("scalar ridge regression off by {krr_worst:e}")
    })?;
    Ok(format!("reproducing {worst:.1e}, ridge oracle {krr_worst:.1e}"))
}

fn polynomial_degree() -> Outcome {
    let mut runs = 0;
    for m in [2, 3] {
        for seed in [5, 6, 7] {
            let report = run_expressiveness(3, m, seed).map_err(err)?;
            report_outcome(&report, |_| true).map_err(|e| format!("m={m} seed={seed}: {e}"))?;
            for l in 1..=3 {
                let d = report.metrics[&format!("L{l}_degree")];
                ensure(d == l as f64, || format!("m={m} seed={seed}: degree {d} at L={l}"))?;
            }
            if m == 2 {
                let terms = report.metrics["expansion_terms"];
                ensure(terms == report.metrics["expansion_expected_terms"], || {
                    format!("expansion has {terms} terms")
                })?;
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, L in 1..=3"))
}

fn tied_round_trip() -> Outcome {
    let mut r = rng(8);
    let widths = [3, 4, 2];
    let acts = [Activation::Tanh, Activation::Identity];
    let mut worst = 0.0_f64;
    for alpha in [AlphaMap::Identity, AlphaMap::ScaledTanh] {
        let template = ScalarNet::random_real(&widths, &acts, 1.0, &mut r).map_err(err)?;
        let pm = ParameterMap::untied(&widths, alpha, ParameterMap::DEFAULT_BOUND).map_err(err)?;
        let target = ScalarNet::random_real(&widths, &acts, 9.0, &mut r).map_err(err)?;
        let z = pm.encode(&template, &target).map_err(err)?;
        let mut points = random_points(&mut r, 3, pm.k());
        points.insert(2, z.clone());
        let tied = build_tied_net(&pm, &template, points).map_err(err)?;
        let zi = tied.index_of(&z).ok_or("encoded point missing from the grid")?;
        for _ in 0..100 {
            let x = random_complex(3, &mut r);
            let want = target.forward(&x).map_err(err)?;
            let xv = ModuleVector::constant(tied.net.algebra(), &x).map_err(err)?;
            let got = tied.net.forward_at(&xv, zi).map_err(err)?;
            for (a, b) in want.iter().zip(&got) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("round trip error {worst:e}"))?;

    let alg = Algebra::grid(6).map_err(err)?;
    let net = CStarNet::random(&alg, &[2, 3, 2], &[Activation::Tanh, Activation::Identity], &mut r).map_err(err)?;
    let mut dirac = 0.0_f64;
    for _ in 0..20 {
        let x = random_vector(&alg, 2, &mut r);
        for z in 0..6 {
            let avg = net.average(&x, &ProbabilityWeights::dirac(z)).map_err(err)?;
            let slice = net.forward_at(&x, z).map_err(err)?;
            for (a, b) in avg.iter().zip(&slice) {
                dirac = dirac.max((a - b).norm());
            }
        }
    }
    ensure(dirac <= 1e-12, || format!("Dirac average off by {dirac:e}"))?;
    Ok(format!("round trip {worst:.1e}, Dirac {dirac:.1e}"))
}

fn convexity() -> Outcome {
    let cfg = ConvexityConfig {
        segments: 200,
        steps: 2000,
        ..ConvexityConfig::default()
    };
    let report = run_convexity(9, cfg).map_err(err)?;
    let summary = report_outcome(&report, |_| true)?;
    Ok(format!(
        "{summary}, chord {:.1e}, gap {:.1e}",
        report.metrics["max_chord_violation"], report.metrics["planted_gap"]
    ))
}

/// Smallest distance of a pre-activation coordinate from the relu kink.
fn kink_distance(net: &CStarNet, x: &ModuleVector) -> f64 {
    let mut u = x.entries().to_vec();
    let mut dist = f64::INFINITY;
    for layer in net.layers() {
        let pre = layer.pre_activation(&u).unwrap();
        for t in pre.iter().flat_map(|e| e.coords().to_vec()) {
            dist = dist.min(t.re.abs()).min(t.im.abs());
        }
        u = pre.iter().map(|e| e.map(|t| layer.activation.apply(t))).collect();
    }
    dist
}

/// Net with complex weights and biases. Real parameters would leave exact
/// zeros in the imaginary parts after a relu layer, which sit on the kink.
fn complex_net(alg: &Algebra, widths: &[usize], acts: &[Activation], r: &mut ChaCha8Rng) -> Result<CStarNet, String> {
    let layers = widths
        .windows(2)
        .zip(acts)
        .map(|(w, &act)| {
            let scale = Complex64::new(1.0 / ((w[0] * alg.coord_len()) as f64).sqrt(), 0.0);
            let mut draw = || alg.random_element(&mut *r).scale(scale);
            let weights = (0..w[1]).map(|_| (0..w[0]).map(|_| draw()).collect()).collect();
            let bias = (0..w[1]).map(|_| draw()).collect();
            CStarLayer::new(weights, bias, act)
        })
        .collect::<cstar::Result<Vec<_>>>()
        .map_err(err)?;
    CStarNet::new(layers).map_err(err)
}

fn gradient_checks() -> Outcome {
    let mut r = rng(10);
    let acts = [
        Activation::Identity,
        Activation::linear(0.8),
        Activation::Tanh,
        Activation::Relu,
    ];
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for alg in sample_algebras() {
        for depth in 1..=3 {
            for act in acts {
                let mut widths = vec![2];
                widths.extend(std::iter::repeat_n(3, depth - 1));
                widths.push(2);
                let mut done = false;
                for _ in 0..50 {
                    let net = complex_net(&alg, &widths, &vec![act; depth], &mut r)?;
                    let x = random_vector(&alg, 2, &mut r);
                    if act == Activation::Relu && kink_distance(&net, &x) < 1e-3 {
                        continue;
                    }
                    let e = grad_check(&net, &x, &random_vector(&alg, 2, &mut r)).map_err(err)?;
                    ensure(e <= 1e-5, || format!("{alg} depth {depth} {act}: {e:e}"))?;
                    worst = worst.max(e);
                    checked += 1;
                    done = true;
                    break;
                }
                ensure(done, || format!("{alg} depth {depth} {act}: no input away from kinks"))?;
            }
        }
    }
    Ok(format!("{checked} configurations, worst {worst:.1e}"))
}

fn equivariance() -> Outcome {
    let groups = vec![
        Algebra::cyclic_group(4).map_err(err)?,
        Algebra::symmetric_group(3).map_err(err)?,
    ];
    let report = run_equivariance(&groups, 10, 11).map_err(err)?;
    ensure(
        report.metrics.keys().any(|k| k.ends_with("_right_weights_error")),
        || "no adversarial net checked".into(),
    )?;
    report_outcome(&report, |_| true)
}

fn norm_comparison() -> Outcome {
    let report = run_norm_comparison(&[2, 4, 8, 16], 1000, 12).map_err(err)?;
    let v = report.metrics["violations"];
    ensure(v == 0.0, || format!("{v} violations"))?;
    report_outcome(&report, |_| true)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let f = common::write_fixtures(dir.path());
    common::train_models(&f, dir.path());
    let runs = common::subcommand_runs(&f, dir.path());
    for (id, args) in &runs {
        let mut reports = Vec::new();
        for (run, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
            let out = format!("det/{id}-{run}");
            let mut argv: Vec<&str> = args.iter().map(String::as_str).collect();
            argv.extend(["--seed", "13", "--out", &out, "--threads", threads]);
            let o = common::cstar(dir.path(), &argv);
            ensure(o.status.success(), || format!("{id} exited with {:?}", o.status.code()))?;
            reports.push(fs::read(dir.path().join(&out).join(format!("{id}.json"))).map_err(err)?);
        }
        ensure(reports.windows(2).all(|w| w[0] == w[1]), || {
            format!("{id} reports differ")
        })?;
    }
    Ok(format!("{} subcommands", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("C*-identity, submultiplicativity, involution", c_star_identity),
        ("Hilbert-module inner product axioms", module_axioms),
        ("kernel positivity", kernel_positivity),
        ("reproducing property and scalar ridge oracle", reproducing_property),
        ("polynomial degree and two-layer expansion", polynomial_degree),
        ("tied-net round trip and Dirac average", tied_round_trip),
        ("convexity and planted measure recovery", convexity),
        ("backprop against finite differences", gradient_checks),
        ("group equivariance and adversarial net", equivariance),
        ("operator against Hilbert-Schmidt norm", norm_comparison),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({detail}; {secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
