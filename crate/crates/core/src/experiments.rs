//! Seeded property experiments with machine-readable reports.
//!
//! A report holds the parameters, named metrics and the thresholds they are
//! judged against, so `passed` can be recomputed from the file alone.
//! Wall-clock time is written to a separate sidecar file and never enters the
//! report itself, which keeps reports byte-identical across reruns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::algebra::Algebra;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;
use crate::net::{
    chord_violation, equivariance_check, fit_polynomial, measure_objective, optimize_measure, poly_degree_check,
    random_group_net, Activation, Basis, BasisNet, CStarNet, MeasureSample, ProbabilityWeights, WeightSide,
    DEGREE_ACCEPT, DEGREE_REJECT,
};
use crate::rkhm::{fit_krr, AKernel, BaseKernel, KernelTerm, RkhmRegressor};

pub const MAX_SAMPLES: usize = 256;
pub const MAX_MATRIX_DIM: usize = 16;
pub const MAX_GRID_POINTS: usize = 64;
pub const MAX_DEPTH: usize = 5;
pub const MAX_BASIS_DIM: usize = 4;

/// Slack for rounding in the norm inequalities, relative to the larger side.
const NORM_SLACK: f64 = 1e-12;
/// Gram matrices with a smaller minimum eigenvalue are flagged singular.
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub metric: String,
    pub comparison: Comparison,
    pub bound: f64,
}

impl Threshold {
    /// NaN never satisfies a threshold.
    pub fn holds(&self, value: f64) -> bool {
        match self.comparison {
            Comparison::AtMost => value <= self.bound,
            Comparison::AtLeast => value >= self.bound,
            Comparison::Above => value > self.bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, Value>,
    /// Non-finite values are written as `null`.
    #[serde(deserialize_with = "nullable_metrics")]
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: Vec<Threshold>,
    pub passed: bool,
}

fn nullable_metrics<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, f64>, D::Error> {
    let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(raw.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

impl ExperimentReport {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        ExperimentReport {
            id: id.into(),
            seed,
            parameters: BTreeMap::new(),
            metrics: BTreeMap::new(),
            thresholds: Vec::new(),
            passed: false,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameters serialize to JSON");
        self.parameters.insert(key.to_string(), v);
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn require(&mut self, metric: &str, comparison: Comparison, bound: f64) {
        self.thresholds.push(Threshold {
            metric: metric.to_string(),
            comparison,
            bound,
        });
    }

    /// Thresholds that fail, including those naming a missing metric.
    pub fn failures(&self) -> Vec<&Threshold> {
        self.thresholds
            .iter()
            .filter(|t| !self.metrics.get(&t.metric).is_some_and(|&v| t.holds(v)))
            .collect()
    }

    pub fn evaluate(&self) -> bool {
        self.failures().is_empty()
    }

    /// Sets `passed` from the metrics and thresholds.
    pub fn finish(mut self) -> Self {
        self.passed = self.evaluate();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<dir>/<id>.json` and, given a duration, `<dir>/<id>.timing.json`.
    pub fn write(&self, dir: &Path, elapsed: Option<Duration>) -> Result<PathBuf> {
        let path = dir.join(format!("{}.json", self.id));
        write_file(&path, &self.to_json()?)?;
        if let Some(t) = elapsed {
            let timing = serde_json::json!({ "id": self.id, "wall_clock_seconds": t.as_secs_f64() });
            write_file(&dir.join(format!("{}.timing.json", self.id)), &format!("{timing:#}\n"))?;
        }
        Ok(path)
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Long-format summary: one row per metric with its threshold, if any.
pub fn write_summary_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record(["experiment", "seed", "metric", "value", "comparison", "bound", "holds"])
        .map_err(err)?;
    for r in reports {
        for (name, &value) in &r.metrics {
            let checks: Vec<&Threshold> = r.thresholds.iter().filter(|t| &t.metric == name).collect();
            if checks.is_empty() {
                w.write_record([
                    r.id.as_str(),
                    &r.seed.to_string(),
                    name,
                    &format!("{value:?}"),
                    "",
                    "",
                    "",
                ])
                .map_err(err)?;
            }
            for t in checks {
                let cmp = serde_json::to_value(t.comparison)?;
                w.write_record([
                    r.id.as_str(),
                    &r.seed.to_string(),
                    name,
                    &format!("{value:?}"),
                    cmp.as_str().unwrap_or_default(),
                    &format!("{:?}", t.bound),
                    &t.holds(value).to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_file(path, &String::from_utf8(bytes).expect("utf-8 csv"))
}

fn ceiling(what: &str, value: usize, low: usize, high: usize) -> Result<()> {
    if value < low || value > high {
        return Err(Error::invalid(format!("{what} must be in {low}..={high}, got {value}")));
    }
    Ok(())
}

/// `‖a‖_op ≤ ‖a‖_HS ≤ √d ‖a‖_op` on random complex `d × d` matrices.
pub fn run_norm_comparison(dims: &[usize], trials: usize, seed: u64) -> Result<ExperimentReport> {
    if dims.is_empty() {
        return Err(Error::invalid("no dimensions given"));
    }
    for &d in dims {
        ceiling("matrix dimension", d, 1, MAX_MATRIX_DIM)?;
    }
    ceiling("trials", trials, 1, 100_000)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new("norm-compare", seed);
    report.param("dims", dims);
    report.param("trials", trials);
    let mut total = 0usize;
    let mut means = Vec::with_capacity(dims.len());
    for &d in dims {
        let alg = Algebra::dense(d)?;
        let sqrt_d = (d as f64).sqrt();
        let (mut violations, mut sum, mut lo, mut hi) = (0usize, 0.0, f64::INFINITY, 0.0_f64);
        for _ in 0..trials {
            let a = alg.random_element(&mut r);
            let (op, hs) = (a.norm(), a.hilbert_schmidt_norm());
            if op > hs * (1.0 + NORM_SLACK) || hs > sqrt_d * op * (1.0 + NORM_SLACK) {
                violations += 1;
            }
            let ratio = hs / op;
            sum += ratio;
            lo = lo.min(ratio);
            hi = hi.max(ratio / sqrt_d);
        }
        let mean = sum / trials as f64;
        means.push(mean);
        report.metric(&format!("d{d}_violations"), violations as f64);
        report.metric(&format!("d{d}_mean_hs_over_op"), mean);
        report.metric(&format!("d{d}_min_hs_over_op"), lo);
        report.metric(&format!("d{d}_max_hs_over_sqrt_d_op"), hi);
        total += violations;
    }
    report.metric("violations", total as f64);
    report.require("violations", Comparison::AtMost, 0.0);
    let (first, last) = (dims[0], dims[dims.len() - 1]);
    report.metric("mean_ratio_growth", means[means.len() - 1] / means[0]);
    report.metric("sqrt_dim_growth", (last as f64 / first as f64).sqrt());
    Ok(report.finish())
}

/// Metric-key form of an algebra name, e.g. `block1-2-3`.
fn label(alg: &Algebra) -> String {
    alg.to_string().replace(':', "").replace(',', "-")
}

fn random_module_vector(alg: &Algebra, d: usize, r: &mut ChaCha8Rng) -> Result<ModuleVector> {
    ModuleVector::new((0..d).map(|_| alg.random_element(&mut *r)).collect())
}

/// C*-identity, involution, absolute value and representation checks on
/// random elements, and the inner-product axioms of `A^3`.
pub fn run_algebra_check(algebras: &[Algebra], trials: usize, seed: u64) -> Result<ExperimentReport> {
    if algebras.is_empty() {
        return Err(Error::invalid("no algebras given"));
    }
    ceiling("trials", trials, 1, 100_000)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new("algebra-check", seed);
    report.param("algebras", algebras.iter().map(ToString::to_string).collect::<Vec<_>>());
    report.param("trials", trials);
    report.param("module_dim", 3);
    for alg in algebras {
        let name = label(alg);
        let (mut cstar, mut submult, mut invol, mut abs_err, mut abs_neg, mut rep) =
            (0.0_f64, f64::NEG_INFINITY, 0.0_f64, 0.0_f64, 0usize, 0.0_f64);
        for _ in 0..trials {
            let a = alg.random_element(&mut r);
            let b = alg.random_element(&mut r);
            let (alpha, beta) = (random_complex(&mut r, 1)[0], random_complex(&mut r, 1)[0]);
            let na = a.norm();
            cstar = cstar.max((a.star().mul(&a)?.norm() - na * na).abs() / na.powi(2).max(1.0));
            submult = submult.max(a.mul(&b)?.norm() - na * b.norm());
            let lin = a.scale(alpha).add(&b.scale(beta))?.star();
            let lin_rhs = a.star().scale(alpha.conj()).add(&b.star().scale(beta.conj()))?;
            invol = invol
                .max(lin.max_abs_diff(&lin_rhs))
                .max(a.mul(&b)?.star().max_abs_diff(&b.star().mul(&a.star())?))
                .max(a.star().star().max_abs_diff(&a));
            let abs = a.abs()?;
            abs_err = abs_err.max(abs.mul(&abs)?.sub(&a.star().mul(&a)?)?.norm());
            if !abs.is_positive(crate::algebra::DEFAULT_POSITIVITY_TOL) {
                abs_neg += 1;
            }
            let (ra, rb) = (a.regular_representation(), b.regular_representation());
            let prod = a.mul(&b)?.regular_representation() - &ra * &rb;
            let adj = a.star().regular_representation() - ra.adjoint();
            rep = rep.max(prod.iter().chain(adj.iter()).fold(0.0, |m, z| m.max(z.norm())));
        }
        let key = |k: &str| format!("{name}_{k}");
        report.metric(&key("cstar_error"), cstar);
        report.metric(&key("submultiplicativity_excess"), submult);
        report.metric(&key("involution_error"), invol);
        report.metric(&key("abs_square_error"), abs_err);
        report.metric(&key("abs_not_positive"), abs_neg as f64);
        report.metric(&key("representation_error"), rep);
        report.require(&key("cstar_error"), Comparison::AtMost, 1e-10);
        report.require(&key("submultiplicativity_excess"), Comparison::AtMost, 1e-10);
        report.require(&key("involution_error"), Comparison::AtMost, 1e-12);
        report.require(&key("abs_square_error"), Comparison::AtMost, 1e-10);
        report.require(&key("abs_not_positive"), Comparison::AtMost, 0.0);
        report.require(&key("representation_error"), Comparison::AtMost, 1e-12);

        let (mut linear, mut symmetric, mut not_positive, mut abs_vec) = (0.0_f64, 0.0_f64, 0usize, 0.0_f64);
        for _ in 0..trials {
            let u = random_module_vector(alg, 3, &mut r)?;
            let v = random_module_vector(alg, 3, &mut r)?;
            let w = random_module_vector(alg, 3, &mut r)?;
            let (c, d) = (alg.random_element(&mut r), alg.random_element(&mut r));
            let lhs = u.inner(&v.right_mul(&c)?.add(&w.right_mul(&d)?)?)?;
            let rhs = u.inner(&v)?.mul(&c)?.add(&u.inner(&w)?.mul(&d)?)?;
            linear = linear.max(lhs.max_abs_diff(&rhs));
            symmetric = symmetric.max(v.inner(&u)?.max_abs_diff(&u.inner(&v)?.star()));
            let uu = u.inner(&u)?;
            if !uu.is_positive(crate::algebra::DEFAULT_POSITIVITY_TOL) {
                not_positive += 1;
            }
            let s = u.abs_vec()?;
            abs_vec = abs_vec.max(s.mul(&s)?.sub(&uu)?.norm());
        }
        // ⟨u, u⟩ = 0 only for u = 0: every single-coordinate vector has a
        // nonzero inner product, and the zero vector has a zero one.
        let mut definite = f64::INFINITY;
        for slot in 0..3 {
            for k in 0..alg.coord_len() {
                let mut entries = vec![alg.zero(); 3];
                entries[slot] = alg.basis_element(k)?;
                let u = ModuleVector::new(entries)?;
                definite = definite.min(u.inner(&u)?.norm());
            }
        }
        let zero = ModuleVector::zeros(alg, 3)?;
        report.metric(&key("module_linearity_error"), linear);
        report.metric(&key("module_symmetry_error"), symmetric);
        report.metric(&key("module_not_positive"), not_positive as f64);
        report.metric(&key("module_definiteness_min"), definite);
        report.metric(&key("module_zero_inner"), zero.inner(&zero)?.max_abs());
        report.metric(&key("module_abs_square_error"), abs_vec);
        report.require(&key("module_linearity_error"), Comparison::AtMost, 1e-12);
        report.require(&key("module_symmetry_error"), Comparison::AtMost, 1e-12);
        report.require(&key("module_not_positive"), Comparison::AtMost, 0.0);
        report.require(&key("module_definiteness_min"), Comparison::Above, 1e-10);
        report.require(&key("module_zero_inner"), Comparison::AtMost, 0.0);
        report.require(&key("module_abs_square_error"), Comparison::AtMost, 1e-10);
    }
    Ok(report.finish())
}

/// Right-translation equivariance of left-acting group nets with one and two
/// relu layers, and the power check with right-acting weights on
/// nonabelian groups.
pub fn run_equivariance(groups: &[Algebra], trials: usize, seed: u64) -> Result<ExperimentReport> {
    if groups.is_empty() {
        return Err(Error::invalid("no groups given"));
    }
    ceiling("trials", trials, 1, 10_000)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new("equivariance", seed);
    report.param("groups", groups.iter().map(ToString::to_string).collect::<Vec<_>>());
    report.param("trials", trials);
    let architectures: [(&[usize], &[Activation]); 2] = [
        (&[2, 2], &[Activation::Relu]),
        (&[2, 3, 2], &[Activation::Relu, Activation::Relu]),
    ];
    for alg in groups {
        let name = label(alg);
        if alg.group_table().is_none() {
            return Err(Error::invalid(format!("{alg} is not a group algebra")));
        }
        for (widths, acts) in architectures {
            let depth = acts.len();
            let net = random_group_net(alg, widths, acts, WeightSide::Left, &mut r)?;
            let key = format!("{name}_depth{depth}_error");
            report.metric(&key, equivariance_check(&net, trials, &mut r)?);
            report.require(&key, Comparison::AtMost, 1e-10);
        }
        if !alg.is_commutative() {
            let (widths, acts) = architectures[1];
            let net = random_group_net(alg, widths, acts, WeightSide::Right, &mut r)?;
            let key = format!("{name}_right_weights_error");
            report.metric(&key, equivariance_check(&net, trials, &mut r)?);
            report.require(&key, Comparison::Above, 1e-2);
        }
    }
    Ok(report.finish())
}

fn random_complex(r: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
        .collect()
}

/// Detected polynomial degree of `z ↦ f_z(x̂)` for basis networks with linear
/// activations and depths `1..=max_depth`, plus the term-by-term expansion
/// check at depth 2.
pub fn run_expressiveness(max_depth: usize, m: usize, seed: u64) -> Result<ExperimentReport> {
    ceiling("depth", max_depth, 1, MAX_DEPTH)?;
    ceiling("basis dimension", m, 1, MAX_BASIS_DIM)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new("prop-poly", seed);
    report.param("max_depth", max_depth);
    report.param("basis_dim", m);
    report.param("width", 2);
    for depth in 1..=max_depth {
        let basis = Basis::for_degree_check(m, depth)?;
        let net = BasisNet::random(
            basis,
            &vec![2; depth + 1],
            &vec![Activation::linear(1.0); depth],
            &mut r,
        )?;
        let x_hat = random_complex(&mut r, 2);
        let key = |name: &str| format!("L{depth}_{name}");
        match poly_degree_check(&net, &x_hat) {
            Ok(rep) => {
                report.metric(&key("degree"), rep.degree as f64);
                report.metric(&key("residual_at_depth"), rep.residuals[depth]);
                report.metric(&key("residual_below_depth"), rep.residuals[depth - 1]);
            }
            Err(Error::Numerical(msg)) => log::warn!("depth {depth}: {msg}"),
            Err(e) => return Err(e),
        }
        report.require(&key("degree"), Comparison::AtLeast, depth as f64);
        report.require(&key("degree"), Comparison::AtMost, depth as f64);
        report.require(&key("residual_at_depth"), Comparison::AtMost, DEGREE_ACCEPT);
        report.require(&key("residual_below_depth"), Comparison::Above, DEGREE_REJECT);
    }
    if max_depth >= 2 {
        let (eval_err, coeff_err, terms) = two_layer_expansion_errors(m, &mut r)?;
        report.metric("expansion_terms", terms as f64);
        report.metric("expansion_expected_terms", (m * m + m) as f64);
        report.metric("expansion_eval_error", eval_err);
        report.metric("expansion_coeff_error", coeff_err);
        report.require("expansion_eval_error", Comparison::AtMost, 1e-10);
        report.require("expansion_coeff_error", Comparison::AtMost, 1e-8);
    }
    Ok(report.finish())
}

/// Compares the explicit two-layer expansion with the grid outputs and with
/// the least-squares monomial coefficients.
fn two_layer_expansion_errors(m: usize, r: &mut ChaCha8Rng) -> Result<(f64, f64, usize)> {
    let basis = Basis::for_degree_check(m, 2)?;
    let net = BasisNet::random(
        basis,
        &[2, 3, 2],
        &[Activation::linear(0.7), Activation::linear(1.3)],
        r,
    )?;
    let x_hat = random_complex(r, 2);
    let expansion = net.linear_expansion(&x_hat)?;
    let values = net.slice_outputs(&x_hat)?;
    let mut eval_err = 0.0_f64;
    for (p, v) in net.basis().points().iter().zip(&values) {
        for (a, b) in expansion.eval(p).iter().zip(v) {
            eval_err = eval_err.max((a - b).norm());
        }
    }
    let fit = fit_polynomial(net.basis(), &values, 2)?;
    let coeffs = expansion.monomial_coefficients(m);
    let mut coeff_err = 0.0_f64;
    for (col, e) in fit.exponents.iter().enumerate() {
        let exact = coeffs.get(e);
        for (o, fitted) in fit.coefficients.iter().enumerate() {
            let want = exact.map_or(Complex64::new(0.0, 0.0), |c| c[o]);
            coeff_err = coeff_err.max((fitted[col] - want).norm());
        }
    }
    Ok((eval_err, coeff_err, expansion.terms.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvexityConfig {
    pub segments: usize,
    /// Grid points of `Z`.
    pub grid: usize,
    pub samples: usize,
    pub steps: usize,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        ConvexityConfig {
            segments: 200,
            grid: 6,
            samples: 20,
            steps: 2000,
        }
    }
}

fn random_simplex(r: &mut ChaCha8Rng, m: usize) -> Result<ProbabilityWeights> {
    let support = random_support(r, m);
    simplex_on(r, support)
}

fn simplex_on(r: &mut ChaCha8Rng, support: Vec<usize>) -> Result<ProbabilityWeights> {
    let masses = (0..support.len()).map(|_| r.gen_range(0.05..1.0)).collect();
    ProbabilityWeights::from_masses(support, masses)
}

fn random_support(r: &mut ChaCha8Rng, m: usize) -> Vec<usize> {
    let k = r.gen_range(1..=m);
    let mut all: Vec<usize> = (0..m).collect();
    rand::seq::SliceRandom::shuffle(all.as_mut_slice(), r);
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

/// Chord violations of `P ↦ L(A_P f)` on random segments and the
/// planted-measure recovery by mirror descent.
pub fn run_convexity(seed: u64, cfg: ConvexityConfig) -> Result<ExperimentReport> {
    ceiling("segments", cfg.segments, 1, 100_000)?;
    ceiling("grid points", cfg.grid, 1, MAX_GRID_POINTS)?;
    ceiling("samples", cfg.samples, 1, MAX_SAMPLES)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new("prop-convex", seed);
    report.param("segments", cfg.segments);
    report.param("grid", cfg.grid);
    report.param("samples", cfg.samples);
    report.param("steps", cfg.steps);
    let alg = Algebra::grid(cfg.grid)?;
    let net = CStarNet::random(&alg, &[2, 4, 2], &[Activation::Tanh, Activation::Identity], &mut r)?;
    let inputs: Vec<ModuleVector> = (0..cfg.samples)
        .map(|_| {
            let x: Vec<Complex64> = (0..2).map(|_| Complex64::new(r.gen_range(-2.0..2.0), 0.0)).collect();
            ModuleVector::constant(&alg, &x)
        })
        .collect::<Result<_>>()?;

    let samples: Vec<MeasureSample> = inputs
        .iter()
        .map(|x| MeasureSample {
            input: x.clone(),
            target: random_complex(&mut r, 2),
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut endpoint = 0.0_f64;
    for _ in 0..cfg.segments {
        let p = random_simplex(&mut r, cfg.grid)?;
        let q = random_simplex(&mut r, cfg.grid)?;
        let t = r.gen_range(0.0..=1.0);
        worst = worst.max(chord_violation(&net, &samples, &p, &q, t)?);
        endpoint = endpoint.max(chord_violation(&net, &samples, &p, &p, t)?.abs());
    }
    let p = random_simplex(&mut r, cfg.grid)?;
    let q = random_simplex(&mut r, cfg.grid)?;
    for t in [0.0, 1.0] {
        endpoint = endpoint.max(chord_violation(&net, &samples, &p, &q, t)?.abs());
    }
    report.metric("max_chord_violation", worst);
    report.metric("endpoint_violation", endpoint);
    report.require("max_chord_violation", Comparison::AtMost, 1e-10);
    report.require("endpoint_violation", Comparison::AtMost, 1e-10);

    let planted = simplex_on(&mut r, (0..cfg.grid).collect())?;
    let planted_samples: Vec<MeasureSample> = inputs
        .into_iter()
        .map(|x| {
            Ok(MeasureSample {
                target: net.average(&x, &planted)?,
                input: x,
            })
        })
        .collect::<Result<_>>()?;
    let planted_objective = measure_objective(&net, &planted_samples, &planted)?;
    let start = ProbabilityWeights::uniform((0..cfg.grid).collect())?;
    let out = optimize_measure(&net, &planted_samples, &start, cfg.steps)?;
    let defect = out.weights.simplex_defect();
    report.metric("planted_objective", planted_objective);
    report.metric("initial_objective", out.initial_objective);
    report.metric("optimized_objective", out.objective);
    report.metric("planted_gap", out.objective - planted_objective);
    report.metric("objective_decrease", out.initial_objective - out.objective);
    report.metric("simplex_defect", defect);
    report.metric("step_size", out.step_size);
    report.require("planted_gap", Comparison::AtMost, 1e-6);
    report.require("objective_decrease", Comparison::AtLeast, 0.0);
    report.require("simplex_defect", Comparison::AtMost, 1e-12);
    Ok(report.finish())
}

/// Kernel used by the regression experiment: Gaussian and/or linear terms
/// with identity coefficients, unless an explicit kernel is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub gaussian: Option<f64>,
    pub linear: bool,
    pub kernel: Option<AKernel>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            gaussian: Some(1.0),
            linear: false,
            kernel: None,
        }
    }
}

impl KernelConfig {
    pub fn build(&self, algebra: &Algebra, input_dim: usize) -> Result<AKernel> {
        if let Some(k) = &self.kernel {
            if k.algebra() != algebra || k.input_dim() != input_dim {
                return Err(Error::invalid(format!(
                    "kernel over {} with input dimension {} does not match data over {algebra} with {input_dim} inputs",
                    k.algebra(),
                    k.input_dim()
                )));
            }
            return Ok(k.clone());
        }
        let mut terms = Vec::new();
        if let Some(gamma) = self.gaussian {
            terms.push(KernelTerm {
                base: BaseKernel::Gaussian { gamma },
                coeff: algebra.identity(),
            });
        }
        if self.linear {
            terms.push(KernelTerm {
                base: BaseKernel::Linear,
                coeff: algebra.identity(),
            });
        }
        AKernel::new(input_dim, terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub kernel: KernelConfig,
    pub lambda: f64,
    /// Fraction of samples held out; zero trains on everything.
    pub test_fraction: f64,
    /// Ridge values whose training residuals must be nondecreasing.
    pub lambda_sweep: Vec<f64>,
    /// Optional bound on the largest test error.
    pub max_test_error: Option<f64>,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            kernel: KernelConfig::default(),
            lambda: 1e-3,
            test_fraction: 0.25,
            lambda_sweep: vec![1e-6, 1e-4, 1e-2, 1.0, 100.0],
            max_test_error: None,
        }
    }
}

/// A-norm errors `‖v(x_i) - y_i‖` of a fitted regressor.
fn errors(reg: &RkhmRegressor, data: &Dataset) -> Result<Vec<f64>> {
    data.inputs()
        .iter()
        .zip(data.single_targets()?)
        .map(|(x, y)| Ok(reg.predict(x)?.sub(&y)?.norm()))
        .collect()
}

/// `(Σ_i ‖R(v(x_i) - y_i)‖_F²)^{1/2}`, the data term of the ridge objective.
fn frobenius_residual(reg: &RkhmRegressor, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in data.inputs().iter().zip(data.single_targets()?) {
        let d = reg.predict(x)?.sub(&y)?.regular_representation();
        total += crate::linalg::frobenius_norm(&d).powi(2);
    }
    Ok(total.sqrt())
}

fn summarize(report: &mut ExperimentReport, prefix: &str, errs: &[f64]) {
    let max = errs.iter().copied().fold(0.0, f64::max);
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    report.metric(&format!("{prefix}_error_max"), max);
    report.metric(&format!("{prefix}_error_rms"), rms);
}

/// Kernel ridge regression on a seeded train/test split.
pub fn run_rkhm_regression(
    data: &Dataset,
    cfg: &RegressionConfig,
    seed: u64,
) -> Result<(ExperimentReport, RkhmRegressor)> {
    if data.len() > MAX_SAMPLES {
        return Err(Error::invalid(format!(
            "{} samples exceed the limit of {MAX_SAMPLES}",
            data.len()
        )));
    }
    let kernel = cfg.kernel.build(data.algebra(), data.input_dim())?;
    let (train, test) = if cfg.test_fraction == 0.0 {
        (data.clone(), None)
    } else {
        let (a, b) = data.split(cfg.test_fraction, seed)?;
        (a, Some(b))
    };
    let targets = train.single_targets()?;
    let reg = fit_krr(&kernel, train.inputs(), &targets, cfg.lambda)?;

    let mut report = ExperimentReport::new("rkhm-fit", seed);
    report.param("algebra", data.algebra().to_string());
    report.param("kernel", &kernel);
    report.param("lambda", cfg.lambda);
    report.param("test_fraction", cfg.test_fraction);
    report.param("lambda_sweep", &cfg.lambda_sweep);
    report.param("n_train", train.len());
    report.param("n_test", test.as_ref().map_or(0, Dataset::len));

    summarize(&mut report, "train", &errors(&reg, &train)?);
    report.metric("train_frobenius_residual", frobenius_residual(&reg, &train)?);
    report.metric("normal_equation_residual", reg.normal_equation_residual(&targets)?);
    let min_eig = reg.gram()?.min_eigenvalue()?;
    report.metric("gram_min_eigenvalue", min_eig);
    report.metric("gram_singular", if min_eig <= SINGULAR_TOL { 1.0 } else { 0.0 });
    if let Some(test) = &test {
        summarize(&mut report, "test", &errors(&reg, test)?);
        if let Some(bound) = cfg.max_test_error {
            report.require("test_error_max", Comparison::AtMost, bound);
        }
    }

    let mut sweep = cfg.lambda_sweep.clone();
    sweep.sort_by(f64::total_cmp);
    let mut previous: Option<f64> = None;
    let mut violations = 0usize;
    for (i, &lambda) in sweep.iter().enumerate() {
        let fitted = fit_krr(&kernel, train.inputs(), &targets, lambda)?;
        let res = frobenius_residual(&fitted, &train)?;
        report.metric(&format!("sweep{i}_train_residual"), res);
        if previous.is_some_and(|p| res < p * (1.0 - 1e-9) - 1e-12) {
            violations += 1;
        }
        previous = Some(res);
    }
    if !sweep.is_empty() {
        report.metric("sweep_violations", violations as f64);
        report.require("sweep_violations", Comparison::AtMost, 0.0);
    }
    Ok((report.finish(), reg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Element;

    #[test]
    fn norm_examples() {
        let a = Algebra::dense(2).unwrap();
        let i2 = a.identity();
        assert!((i2.norm() - 1.0).abs() < 1e-12);
        assert!((i2.hilbert_schmidt_norm() - 2f64.sqrt()).abs() < 1e-12);
        let d = a.element_real(&[3.0, 0.0, 0.0, 4.0]).unwrap();
        assert!((d.norm() - 4.0).abs() < 1e-12);
        assert!((d.hilbert_schmidt_norm() - 5.0).abs() < 1e-12);
        for n in [1, 3, 7] {
            let alg = Algebra::dense(n).unwrap();
            let e = alg.basis_element(0).unwrap();
            assert!((e.hilbert_schmidt_norm() / e.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_comparison_passes_and_is_deterministic() {
        let a = run_norm_comparison(&[2, 4, 8, 16], 50, 3).unwrap();
        assert!(a.passed, "{:?}", a.failures());
        assert_eq!(a.metrics["violations"], 0.0);
        // HS/op grows slower than √d on average.
        assert!(a.metrics["mean_ratio_growth"] < a.metrics["sqrt_dim_growth"]);
        let b = run_norm_comparison(&[2, 4, 8, 16], 50, 3).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(run_norm_comparison(&[17], 1, 0).is_err());
    }

    #[test]
    fn expressiveness_detects_depth() {
        let rep = run_expressiveness(3, 2, 5).unwrap();
        assert!(rep.passed, "{:?}", rep.failures());
        for l in 1..=3 {
            assert_eq!(rep.metrics[&format!("L{l}_degree")], l as f64);
        }
        assert_eq!(rep.metrics["expansion_terms"], 6.0);
        assert!(run_expressiveness(6, 2, 0).is_err());
        assert!(run_expressiveness(1, 5, 0).is_err());
    }

    #[test]
    fn convexity_report_passes() {
        let cfg = ConvexityConfig {
            segments: 40,
            steps: 2000,
            ..ConvexityConfig::default()
        };
        let rep = run_convexity(7, cfg).unwrap();
        assert!(rep.passed, "{:?} {:?}", rep.failures(), rep.metrics);
        assert_eq!(run_convexity(7, cfg).unwrap(), rep);
    }

    #[test]
    fn algebra_check_passes_on_every_kind() {
        let rep = run_algebra_check(&crate::algebra::sample_algebras(), 20, 1).unwrap();
        assert!(rep.passed, "{:?}", rep.failures());
        assert!(rep.metrics.contains_key("block1-2-3_cstar_error"));
        assert!(rep.metrics.contains_key("group6_module_linearity_error"));
    }

    #[test]
    fn equivariance_report_has_power() {
        let groups = [Algebra::cyclic_group(4).unwrap(), Algebra::symmetric_group(3).unwrap()];
        let rep = run_equivariance(&groups, 3, 2).unwrap();
        assert!(rep.passed, "{:?} {:?}", rep.failures(), rep.metrics);
        assert!(rep.metrics["group6_right_weights_error"] > 1e-2);
        assert!(!rep.metrics.contains_key("group4_right_weights_error"));
        assert!(run_equivariance(&[Algebra::grid(3).unwrap()], 1, 0).is_err());
    }

    #[test]
    fn report_round_trip_and_recomputed_verdict() {
        let mut rep = ExperimentReport::new("x", 1);
        rep.param("k", 3);
        rep.metric("a", 0.5);
        rep.metric("nan", f64::NAN);
        rep.require("a", Comparison::AtMost, 1.0);
        let rep = rep.finish();
        assert!(rep.passed);
        let back: ExperimentReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert!(back.metrics["nan"].is_nan());
        assert_eq!(back.evaluate(), back.passed);

        let mut failing = rep.clone();
        failing.require("nan", Comparison::AtLeast, 0.0);
        failing.require("missing", Comparison::AtMost, 0.0);
        assert_eq!(failing.failures().len(), 2);
        assert!(!failing.finish().passed);
    }

    #[test]
    fn reports_and_summary_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let rep = run_norm_comparison(&[2, 3], 5, 1).unwrap();
        let path = rep.write(dir.path(), Some(Duration::from_millis(5))).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(!text.contains("wall_clock"));
        assert!(dir.path().join("norm-compare.timing.json").exists());
        let csv_path = dir.path().join("summary.csv");
        write_summary_csv(&csv_path, &[rep]).unwrap();
        let csv = std::fs::read_to_string(csv_path).unwrap();
        assert!(csv.starts_with("experiment,seed,metric"));
        assert!(csv.contains("norm-compare,1,violations,0.0,<=,0.0,true"));
    }

    /// Targets `y = Σ_r x_r a_r`, in the span of the linear kernel's features.
    fn linear_dataset(alg: &Algebra, n: usize, seed: u64) -> (Dataset, Vec<Element>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Element> = (0..2).map(|_| alg.random_element(&mut r)).collect();
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
            .collect();
        let targets = inputs
            .iter()
            .map(|x| {
                vec![a[0]
                    .scale(Complex64::new(x[0], 0.0))
                    .add(&a[1].scale(Complex64::new(x[1], 0.0)))
                    .unwrap()]
            })
            .collect();
        (Dataset::new(alg.clone(), inputs, targets).unwrap(), a)
    }

    #[test]
    fn planted_linear_function_is_recovered() {
        for alg in [
            Algebra::circulant(3).unwrap(),
            Algebra::grid(4).unwrap(),
            Algebra::scalar(),
        ] {
            let (data, _) = linear_dataset(&alg, 16, 2);
            let cfg = RegressionConfig {
                kernel: KernelConfig {
                    gaussian: None,
                    linear: true,
                    kernel: None,
                },
                lambda: 1e-8,
                max_test_error: Some(1e-4),
                ..RegressionConfig::default()
            };
            let (rep, reg) = run_rkhm_regression(&data, &cfg, 11).unwrap();
            assert!(rep.passed, "{alg}: {:?}", rep.failures());
            assert!(rep.metrics["test_error_max"] <= 1e-4);
            // Linear Gram of 12 points in R^2 has rank 2.
            assert_eq!(rep.metrics["gram_singular"], 1.0);
            assert_eq!(reg.points.len(), 12);
        }
    }

    #[test]
    fn ridge_path_train_residual_is_monotone() {
        let alg = Algebra::symmetric_group(3).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let inputs: Vec<Vec<f64>> = (0..10).map(|_| vec![r.gen_range(-2.0..2.0)]).collect();
        let targets = (0..10).map(|_| vec![alg.random_element(&mut r)]).collect();
        let data = Dataset::new(alg, inputs, targets).unwrap();
        let cfg = RegressionConfig {
            lambda_sweep: vec![1e-8, 1e-5, 1e-3, 1e-1, 1.0, 10.0, 1e3],
            ..RegressionConfig::default()
        };
        let (rep, _) = run_rkhm_regression(&data, &cfg, 0).unwrap();
        assert!(rep.passed, "{:?}", rep.failures());
        let res: Vec<f64> = (0..7)
            .map(|i| rep.metrics[&format!("sweep{i}_train_residual")])
            .collect();
        assert!(res.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "{res:?}");
        assert!(res[6] > res[0]);
    }

    #[test]
    fn duplicated_points_are_flagged_singular() {
        let alg = Algebra::dense(2).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let mut inputs: Vec<Vec<f64>> = (0..5).map(|_| vec![r.gen_range(-1.0..1.0)]).collect();
        inputs.push(inputs[0].clone());
        let targets = (0..6).map(|_| vec![alg.random_element(&mut r)]).collect();
        let data = Dataset::new(alg, inputs, targets).unwrap();
        let cfg = RegressionConfig {
            test_fraction: 0.0,
            ..RegressionConfig::default()
        };
        let (rep, _) = run_rkhm_regression(&data, &cfg, 0).unwrap();
        assert_eq!(rep.metrics["gram_singular"], 1.0);
        assert!(!rep.metrics.contains_key("test_error_max"));
        assert_eq!(rep.parameters["n_test"], 0);
    }
}
