//! Fixture files and a runner for the `cstar` binary.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cstar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cstar"))
        .current_dir(dir)
        .args(args)
        .env_remove("CSTAR_LOG")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Datasets used by the subcommand runs, written into `dir`.
pub struct Fixtures {
    /// grid:4 targets, two inputs.
    pub grid: PathBuf,
    /// Scalar targets, two inputs.
    pub scalar: PathBuf,
    /// Unlabelled samples of two measures.
    pub first: PathBuf,
    pub second: PathBuf,
}

pub fn write_fixtures(dir: &Path) -> Fixtures {
    let mut r = ChaCha8Rng::seed_from_u64(99);
    let mut grid = String::from("# algebra: grid:4\nx0,x1,y0.0,y0.1,y0.2,y0.3\n");
    for _ in 0..24 {
        let (a, b): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        write!(grid, "{a},{b}").unwrap();
        for k in 0..4 {
            let z = k as f64 / 3.0;
            write!(grid, ",{}", (a + z).sin() * b).unwrap();
        }
        grid.push('\n');
    }
    let mut scalar = String::from("x0,x1,y0.0\n");
    for _ in 0..16 {
        let (a, b): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        writeln!(scalar, "{a},{b},{}", a.sin() * b).unwrap();
    }
    let mut cloud = |n: usize, shift: f64| {
        let mut s = String::from("x0,x1\n");
        for _ in 0..n {
            let (a, b): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            writeln!(s, "{},{}", a + shift, b).unwrap();
        }
        s
    };
    let first = cloud(10, 0.0);
    let second = cloud(12, 0.5);
    let put = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    Fixtures {
        grid: put("grid.csv", &grid),
        scalar: put("scalar.csv", &scalar),
        first: put("first.csv", &first),
        second: put("second.csv", &second),
    }
}

/// One invocation per subcommand at small sizes. Runs that read a model
/// use `model_dir`, which must hold the outputs of the `rkhm-fit` and
/// `net-train` entries.
pub fn subcommand_runs(f: &Fixtures, model_dir: &Path) -> Vec<(&'static str, Vec<String>)> {
    let s = |p: &Path| p.display().to_string();
    let rkhm_model = s(&model_dir.join("rkhm").join("model.json"));
    let net_model = s(&model_dir.join("net").join("model.json"));
    let v = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        ("algebra-check", v(&["algebra-check", "--trials", "20"])),
        ("rkhm-fit", v(&["rkhm-fit", "--data", &s(&f.grid)])),
        (
            "rkhm-predict",
            v(&["rkhm-predict", "--model", &rkhm_model, "--data", &s(&f.grid)]),
        ),
        ("mmd", v(&["mmd", "--first", &s(&f.first), "--second", &s(&f.second)])),
        ("net-train", v(&["net-train", "--data", &s(&f.grid), "--steps", "40"])),
        (
            "net-eval",
            v(&["net-eval", "--model", &net_model, "--data", &s(&f.grid)]),
        ),
        (
            "measure-opt",
            v(&[
                "measure-opt",
                "--model",
                &net_model,
                "--data",
                &s(&f.scalar),
                "--steps",
                "200",
            ]),
        ),
        ("prop-poly", v(&["prop-poly", "--depth", "3", "--basis-dim", "2"])),
        ("prop-convex", v(&["prop-convex", "--segments", "40", "--steps", "300"])),
        ("norm-compare", v(&["norm-compare", "--trials", "100"])),
        ("equivariance", v(&["equivariance", "--trials", "3"])),
    ]
}

/// Produces the models read by [`subcommand_runs`].
pub fn train_models(f: &Fixtures, model_dir: &Path) {
    let s = |p: &Path| p.display().to_string();
    for (sub, args) in [
        ("rkhm", vec!["rkhm-fit".to_string(), "--data".into(), s(&f.grid)]),
        (
            "net",
            vec![
                "net-train".to_string(),
                "--data".into(),
                s(&f.grid),
                "--steps".into(),
                "40".into(),
            ],
        ),
    ] {
        let out = s(&model_dir.join(sub));
        let mut argv: Vec<&str> = args.iter().map(String::as_str).collect();
        argv.extend(["--seed", "5", "--out", &out]);
        let o = cstar(model_dir, &argv);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}
