use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cstar::algebra::sample_algebras;
use cstar::data::Dataset;
use cstar::hilbert::ModuleVector;
use cstar::net::{chord_violation, optimize_measure, Activation, CStarNet, MeasureSample, ProbabilityWeights};
use cstar::rkhm::{fit_krr, mmd, AKernel, BaseKernel, DiscreteAMeasure, KernelTerm};
use cstar::{Algebra, Element};

fn points(r: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn positive(alg: &Algebra, r: &mut ChaCha8Rng) -> Element {
    let d = alg.random_element(r);
    d.star().mul(&d).unwrap()
}

fn algebra(i: usize) -> Algebra {
    let all = sample_algebras();
    all[i % all.len()].clone()
}

fn kernel(alg: &Algebra, r: &mut ChaCha8Rng) -> AKernel {
    AKernel::new(
        2,
        vec![
            KernelTerm {
                base: BaseKernel::Gaussian {
                    gamma: r.gen_range(0.2..2.0),
                },
                coeff: positive(alg, r),
            },
            KernelTerm {
                base: BaseKernel::Linear,
                coeff: positive(alg, r),
            },
        ],
    )
    .unwrap()
}

fn measure(alg: &Algebra, r: &mut ChaCha8Rng) -> DiscreteAMeasure {
    let n = r.gen_range(1..=4);
    DiscreteAMeasure::new(points(r, n, 2), (0..n).map(|_| positive(alg, r)).collect()).unwrap()
}

fn simplex(r: &mut ChaCha8Rng, m: usize) -> ProbabilityWeights {
    ProbabilityWeights::from_masses((0..m).collect(), (0..m).map(|_| r.gen_range(0.01..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gram_matrices_are_positive(seed in any::<u64>(), kind in 0usize..7, n in 1usize..=8) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alg = algebra(kind);
        let k = kernel(&alg, &mut r);
        prop_assert!(k.gram(&points(&mut r, n, 2)).unwrap().check_pd(1e-8).unwrap());
    }

    #[test]
    fn mmd_is_a_pseudometric(seed in any::<u64>(), kind in 0usize..7) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alg = algebra(kind);
        let k = kernel(&alg, &mut r);
        let (mu, nu) = (measure(&alg, &mut r), measure(&alg, &mut r));
        let d = mmd(&k, &mu, &nu).unwrap();
        prop_assert!(d.norm >= 0.0);
        prop_assert!(d.squared.is_positive(1e-8));
        let back = mmd(&k, &nu, &mu).unwrap();
        prop_assert!((d.norm - back.norm).abs() <= 1e-10 * (1.0 + d.norm));
        prop_assert!(mmd(&k, &mu, &mu).unwrap().norm <= 1e-6);
    }

    #[test]
    fn ridge_fit_is_stationary(seed in any::<u64>(), kind in 0usize..7, n in 1usize..=6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alg = algebra(kind);
        let k = kernel(&alg, &mut r);
        let pts = points(&mut r, n, 2);
        let ys: Vec<Element> = (0..n).map(|_| alg.random_element(&mut r)).collect();
        let model = fit_krr(&k, &pts, &ys, 0.1).unwrap();
        prop_assert!(model.normal_equation_residual(&ys).unwrap() <= 1e-8);
        let base = model.objective(&model.coefficients, &ys).unwrap();
        let step = alg.random_element(&mut r).scale(Complex64::new(1e-3, 0.0));
        let mut moved = model.coefficients.clone();
        moved[0] = moved[0].add(&step).unwrap();
        prop_assert!(model.objective(&moved, &ys).unwrap() >= base - 1e-12 * (1.0 + base));
    }

    #[test]
    fn grid_forward_matches_slices(seed in any::<u64>(), m in 1usize..=6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alg = Algebra::grid(m).unwrap();
        let net = CStarNet::random(&alg, &[2, 3, 2], &[Activation::Tanh, Activation::Identity], &mut r).unwrap();
        let x = ModuleVector::new(vec![alg.random_element(&mut r), alg.random_element(&mut r)]).unwrap();
        let out = net.forward(&x).unwrap();
        for z in 0..m {
            let slice = net.forward_at(&x, z).unwrap();
            for (o, v) in out.entries().iter().zip(&slice) {
                prop_assert_eq!(o.coords()[z], *v);
            }
        }
    }

    #[test]
    fn averaged_loss_is_convex_and_optimizer_stays_on_simplex(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alg = Algebra::grid(5).unwrap();
        let net = CStarNet::random(&alg, &[2, 3, 1], &[Activation::Tanh, Activation::Identity], &mut r).unwrap();
        let samples: Vec<MeasureSample> = (0..6)
            .map(|_| {
                let v: Vec<Complex64> = (0..2).map(|_| Complex64::new(r.gen_range(-1.0..1.0), 0.0)).collect();
                MeasureSample {
                    input: ModuleVector::constant(&alg, &v).unwrap(),
                    target: vec![Complex64::new(r.gen_range(-1.0..1.0), 0.0)],
                }
            })
            .collect();
        let (p, q) = (simplex(&mut r, 5), simplex(&mut r, 5));
        prop_assert!(chord_violation(&net, &samples, &p, &q, t).unwrap() <= 1e-10);
        let out = optimize_measure(&net, &samples, &p, 50).unwrap();
        prop_assert!(out.weights.simplex_defect() <= 1e-12);
        prop_assert!(out.objective <= out.initial_objective);
    }

    #[test]
    fn datasets_round_trip_through_both_formats(seed in any::<u64>(), kind in 0usize..7, n in 1usize..=5) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alg = algebra(kind);
        let inputs = points(&mut r, n, 2);
        let targets: Vec<Vec<Element>> = (0..n).map(|_| vec![alg.random_element(&mut r)]).collect();
        let data = Dataset::new(alg, inputs, targets).unwrap();
        let csv = Dataset::from_csv_str(&data.to_csv_string().unwrap(), None).unwrap();
        let json = Dataset::from_json_str(&data.to_json_string().unwrap(), None).unwrap();
        prop_assert_eq!(&csv, &data);
        prop_assert_eq!(&json, &data);
    }
}
