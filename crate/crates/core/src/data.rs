//! Labelled datasets with real inputs and algebra-valued targets, stored as
//! CSV or JSON.
//!
//! CSV layout: an optional first line `# algebra: <descriptor>`, then a
//! header with input columns `x0, x1, ..`, real parts of target coordinates
//! `y<j>.<k>` and optional imaginary parts `yi<j>.<k>`. Without the comment
//! line the algebra is `scalar` for one coordinate and `grid:<c>` for `c`
//! coordinates.
//!
//! JSON layout: `{"algebra": <descriptor>, "samples": [{"x": [..], "y": [{"re": [..], "im": [..]}, ..]}]}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, CoordsJson, Element};
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;
use crate::net::{MeasureSample, Sample};

const ALGEBRA_PREFIX: &str = "# algebra:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("csv") => Ok(DataFormat::Csv),
            Some("json") => Ok(DataFormat::Json),
            _ => Err(Error::Data {
                path: path.to_path_buf(),
                message: "cannot infer format from extension (expected .csv or .json)".into(),
            }),
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(Error::invalid(format!("unknown data format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    algebra: Algebra,
    inputs: Vec<Vec<f64>>,
    /// `targets[s]` has `output_dim` elements; may be empty for unlabelled data.
    targets: Vec<Vec<Element>>,
}

impl Dataset {
    pub fn new(algebra: Algebra, inputs: Vec<Vec<f64>>, targets: Vec<Vec<Element>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::shape(format!("{} target rows", inputs.len()), targets.len()));
        }
        let p = inputs[0].len();
        let q = targets[0].len();
        if p == 0 {
            return Err(Error::invalid("samples need at least one input column"));
        }
        for (x, y) in inputs.iter().zip(&targets) {
            if x.len() != p {
                return Err(Error::shape(format!("{p} inputs"), x.len()));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("inputs must be finite"));
            }
            if y.len() != q {
                return Err(Error::shape(format!("{q} targets"), y.len()));
            }
            if let Some(bad) = y.iter().find(|e| e.algebra() != &algebra) {
                return Err(Error::DescriptorMismatch {
                    left: algebra.to_string(),
                    right: bad.algebra().to_string(),
                });
            }
        }
        Ok(Dataset {
            algebra,
            inputs,
            targets,
        })
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<Element>] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.targets[0].len()
    }

    /// Single target per sample, as used by kernel regression.
    pub fn single_targets(&self) -> Result<Vec<Element>> {
        if self.output_dim() != 1 {
            return Err(Error::invalid(format!(
                "expected exactly one target per sample, found {}",
                self.output_dim()
            )));
        }
        Ok(self.targets.iter().map(|t| t[0].clone()).collect())
    }

    /// Network samples with the constant input `x̂ 1_A`.
    pub fn net_samples(&self) -> Result<Vec<Sample>> {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                Ok(Sample {
                    input: constant_input(&self.algebra, x)?,
                    target: ModuleVector::new(y.clone())?,
                })
            })
            .collect()
    }

    /// Samples for averaged grid networks: constant inputs over `grid` and
    /// scalar targets (each target element must have one coordinate).
    pub fn measure_samples(&self, grid: &Algebra) -> Result<Vec<MeasureSample>> {
        if self.algebra.coord_len() != 1 {
            return Err(Error::invalid(format!(
                "averaged-net targets must be scalars, found algebra {}",
                self.algebra
            )));
        }
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                Ok(MeasureSample {
                    input: constant_input(grid, x)?,
                    target: y.iter().map(|e| e.coords()[0]).collect(),
                })
            })
            .collect()
    }

    /// Seeded random split; the test part gets `round(fraction · n)` samples
    /// but both parts keep at least one sample when `n ≥ 2`.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) || self.len() < 2 {
            return Err(Error::invalid(format!(
                "cannot split {} samples with test fraction {test_fraction}",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((test_fraction * self.len() as f64).round() as usize).clamp(1, self.len() - 1);
        let pick = |ids: &[usize]| {
            Dataset::new(
                self.algebra.clone(),
                ids.iter().map(|&i| self.inputs[i].clone()).collect(),
                ids.iter().map(|&i| self.targets[i].clone()).collect(),
            )
        };
        Ok((pick(&idx[n_test..])?, pick(&idx[..n_test])?))
    }

    pub fn load(path: &Path, format: Option<DataFormat>, algebra: Option<&Algebra>) -> Result<Self> {
        let format = match format {
            Some(f) => f,
            None => DataFormat::from_path(path)?,
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let located = |e: Error| match e {
            Error::Data { .. } | Error::Io { .. } => e,
            other => Error::Data {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        };
        match format {
            DataFormat::Csv => Dataset::from_csv_str(&text, algebra),
            DataFormat::Json => Dataset::from_json_str(&text, algebra),
        }
        .map_err(located)
    }

    pub fn save(&self, path: &Path, format: Option<DataFormat>) -> Result<()> {
        let format = match format {
            Some(f) => f,
            None => DataFormat::from_path(path)?,
        };
        let text = match format {
            DataFormat::Csv => self.to_csv_string()?,
            DataFormat::Json => self.to_json_string()?,
        };
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Parses CSV text. `algebra` overrides the descriptor line.
    pub fn from_csv_str(text: &str, algebra: Option<&Algebra>) -> Result<Self> {
        let declared = match text.lines().next() {
            Some(first) if first.starts_with(ALGEBRA_PREFIX) => Some(first[ALGEBRA_PREFIX.len()..].parse::<Algebra>()?),
            _ => None,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(csv_error)?.clone();
        if header.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        let layout = CsvLayout::parse(&header)?;
        let algebra = match (algebra, declared) {
            (Some(a), _) => a.clone(),
            (None, Some(a)) => a,
            (None, None) if layout.coords <= 1 => Algebra::scalar(),
            (None, None) => Algebra::grid(layout.coords)?,
        };
        if layout.outputs > 0 && algebra.coord_len() != layout.coords {
            return Err(Error::invalid(format!(
                "algebra {algebra} has {} coordinates but the header has {}",
                algebra.coord_len(),
                layout.coords
            )));
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            let at = |msg: String| Error::invalid(format!("line {line}: {msg}"));
            if record.len() != header.len() {
                return Err(at(format!("expected {} fields, found {}", header.len(), record.len())));
            }
            let value = |col: usize| -> Result<f64> {
                let field = &record[col];
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| at(format!("column `{}`: `{field}` is not a finite number", &header[col])))
            };
            let x = layout.inputs.iter().map(|&c| value(c)).collect::<Result<Vec<_>>>()?;
            let mut y = Vec::with_capacity(layout.outputs);
            for j in 0..layout.outputs {
                let mut coords = Vec::with_capacity(layout.coords);
                for k in 0..layout.coords {
                    let re = value(layout.re[&(j, k)])?;
                    let im = match layout.im.get(&(j, k)) {
                        Some(&c) => value(c)?,
                        None => 0.0,
                    };
                    coords.push(Complex64::new(re, im));
                }
                y.push(algebra.element(coords)?);
            }
            inputs.push(x);
            targets.push(y);
        }
        Dataset::new(algebra, inputs, targets)
    }

    /// CSV text with a JSON descriptor line, so every algebra round-trips.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "{ALGEBRA_PREFIX} {}", serde_json::to_string(&self.algebra)?).expect("string write");
        let mut w = csv::Writer::from_writer(Vec::new());
        let c = self.algebra.coord_len();
        let mut header: Vec<String> = (0..self.input_dim()).map(|i| format!("x{i}")).collect();
        for prefix in ["y", "yi"] {
            for j in 0..self.output_dim() {
                header.extend((0..c).map(|k| format!("{prefix}{j}.{k}")));
            }
        }
        w.write_record(&header).map_err(csv_error)?;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let mut row: Vec<String> = x.iter().map(|v| format_float(*v)).collect();
            row.extend(y.iter().flat_map(|e| e.coords().iter().map(|z| format_float(z.re))));
            row.extend(y.iter().flat_map(|e| e.coords().iter().map(|z| format_float(z.im))));
            w.write_record(&row).map_err(csv_error)?;
        }
        let body = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("utf-8 csv"));
        Ok(out)
    }

    pub fn from_json_str(text: &str, algebra: Option<&Algebra>) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::invalid("no samples"));
        }
        let j: DatasetJson = serde_json::from_str(text)?;
        let algebra = algebra.cloned().unwrap_or(j.algebra);
        let (inputs, targets) = j
            .samples
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let y =
                    s.y.iter()
                        .map(|c| c.to_element(&algebra))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| Error::invalid(format!("sample {i}: {e}")))?;
                Ok((s.x, y))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Dataset::new(algebra, inputs, targets)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let j = DatasetJson {
            algebra: self.algebra.clone(),
            samples: self
                .inputs
                .iter()
                .zip(&self.targets)
                .map(|(x, y)| SampleJson {
                    x: x.clone(),
                    y: y.iter().map(CoordsJson::from_element).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }
}

fn constant_input(algebra: &Algebra, x: &[f64]) -> Result<ModuleVector> {
    let values: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    ModuleVector::constant(algebra, &values)
}

/// Shortest representation that parses back to the same `f64`.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
    Error::invalid(format!("{line}{e}"))
}

#[derive(Serialize, Deserialize)]
struct SampleJson {
    x: Vec<f64>,
    #[serde(default)]
    y: Vec<CoordsJson>,
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    algebra: Algebra,
    samples: Vec<SampleJson>,
}

/// Column positions decoded from a CSV header.
struct CsvLayout {
    inputs: Vec<usize>,
    re: BTreeMap<(usize, usize), usize>,
    im: BTreeMap<(usize, usize), usize>,
    outputs: usize,
    coords: usize,
}

impl CsvLayout {
    fn parse(header: &csv::StringRecord) -> Result<Self> {
        let mut xs = BTreeMap::new();
        let mut re = BTreeMap::new();
        let mut im = BTreeMap::new();
        let target = |rest: &str| -> Option<(usize, usize)> {
            let (j, k) = rest.split_once('.')?;
            Some((j.parse().ok()?, k.parse().ok()?))
        };
        for (col, name) in header.iter().enumerate() {
            let slot = if let Some(rest) = name.strip_prefix("yi") {
                target(rest).map(|key| im.insert(key, col))
            } else if let Some(rest) = name.strip_prefix('y') {
                target(rest).map(|key| re.insert(key, col))
            } else if let Some(rest) = name.strip_prefix('x') {
                rest.parse::<usize>().ok().map(|i| xs.insert(i, col))
            } else {
                None
            };
            match slot {
                Some(None) => {}
                Some(Some(_)) => return Err(Error::invalid(format!("line 1: duplicate column `{name}`"))),
                None => return Err(Error::invalid(format!("line 1: unrecognized column `{name}`"))),
            }
        }
        if xs.is_empty() {
            return Err(Error::invalid("line 1: no input columns x0, x1, .."));
        }
        if xs.keys().copied().ne(0..xs.len()) {
            return Err(Error::invalid("line 1: input columns must be x0..x{p-1} without gaps"));
        }
        let outputs = re.keys().map(|&(j, _)| j + 1).max().unwrap_or(0);
        let coords = re.keys().map(|&(_, k)| k + 1).max().unwrap_or(0);
        if re.len() != outputs * coords {
            return Err(Error::invalid(format!(
                "line 1: expected every column y<j>.<k> for j < {outputs}, k < {coords}"
            )));
        }
        if let Some(key) = im.keys().find(|key| !re.contains_key(key)) {
            return Err(Error::invalid(format!(
                "line 1: `yi{}.{}` has no real part",
                key.0, key.1
            )));
        }
        Ok(CsvLayout {
            inputs: xs.into_values().collect(),
            re,
            im,
            outputs,
            coords,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample_dataset(alg: &Algebra, seed: u64) -> Dataset {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let inputs = (0..5)
            .map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets = (0..5)
            .map(|_| (0..2).map(|_| alg.random_element(&mut r)).collect())
            .collect();
        Dataset::new(alg.clone(), inputs, targets).unwrap()
    }

    #[test]
    fn empty_inputs_report_no_samples() {
        let e = Dataset::from_csv_str("", None).unwrap_err();
        assert!(e.to_string().contains("no samples"), "{e}");
        let e = Dataset::from_csv_str("x0,y0.0\n", None).unwrap_err();
        assert!(e.to_string().contains("no samples"), "{e}");
        let e = Dataset::from_json_str("", None).unwrap_err();
        assert!(e.to_string().contains("no samples"), "{e}");
        let e = Dataset::from_json_str(r#"{"algebra":{"kind":"scalar","shape":[]},"samples":[]}"#, None).unwrap_err();
        assert!(e.to_string().contains("no samples"), "{e}");
    }

    #[test]
    fn csv_round_trip_every_algebra() {
        for (i, alg) in crate::algebra::sample_algebras().into_iter().enumerate() {
            let d = sample_dataset(&alg, i as u64);
            let text = d.to_csv_string().unwrap();
            assert_eq!(Dataset::from_csv_str(&text, None).unwrap(), d, "{alg}");
            let text = d.to_json_string().unwrap();
            assert_eq!(Dataset::from_json_str(&text, None).unwrap(), d, "{alg}");
        }
    }

    #[test]
    fn csv_and_json_encodings_agree() {
        let csv = "x0,x1,y0.0,y0.1,yi0.1\n0.5,1,2,3,4\n-1,0.25,5,6,-7\n";
        let json = r#"{"algebra":{"kind":"grid-function","shape":[2]},
            "samples":[{"x":[0.5,1],"y":[{"re":[2,3],"im":[0,4]}]},
                       {"x":[-1,0.25],"y":[{"re":[5,6],"im":[0,-7]}]}]}"#;
        let a = Dataset::from_csv_str(csv, None).unwrap();
        let b = Dataset::from_json_str(json, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.algebra(), &Algebra::grid(2).unwrap());
        assert_eq!(a.targets()[1][0].coords()[1], Complex64::new(6.0, -7.0));
    }

    #[test]
    fn descriptor_line_and_override() {
        let csv = "# algebra: circulant:2\nx0,y0.0,y0.1\n1,2,3\n";
        assert_eq!(
            Dataset::from_csv_str(csv, None).unwrap().algebra(),
            &Algebra::circulant(2).unwrap()
        );
        let dense = Algebra::dense(1).unwrap();
        let csv = "x0,y0.0\n1,2\n";
        assert_eq!(Dataset::from_csv_str(csv, None).unwrap().algebra(), &Algebra::scalar());
        assert_eq!(Dataset::from_csv_str(csv, Some(&dense)).unwrap().algebra(), &dense);
        assert!(Dataset::from_csv_str(csv, Some(&Algebra::grid(3).unwrap())).is_err());
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let csv = "x0,y0.0\n1,2\n3,abc\n";
        let e = Dataset::from_csv_str(csv, None).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let csv = "x0,y0.0\n1,2\n3\n";
        let e = Dataset::from_csv_str(csv, None).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let e = Dataset::from_csv_str("x0,z\n1,2\n", None).unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
        let e = Dataset::from_csv_str("x0,y0.0,y1.1\n1,2,3\n", None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("y<j>.<k>"), "{e}");
    }

    #[test]
    fn files_round_trip_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dataset(&Algebra::symmetric_group(3).unwrap(), 9);
        for name in ["d.csv", "d.json"] {
            let p = dir.path().join(name);
            d.save(&p, None).unwrap();
            assert_eq!(Dataset::load(&p, None, None).unwrap(), d);
        }
        let missing = dir.path().join("missing.csv");
        assert!(matches!(Dataset::load(&missing, None, None), Err(Error::Io { .. })));
        let (train, test) = d.split(0.4, 3).unwrap();
        assert_eq!((train.len(), test.len()), (3, 2));
        assert_eq!(d.split(0.4, 3).unwrap(), (train, test));
    }

    #[test]
    fn unlabelled_data_is_allowed() {
        let d = Dataset::from_csv_str("x0,x1\n1,2\n3,4\n", None).unwrap();
        assert_eq!(d.output_dim(), 0);
        assert!(d.single_targets().is_err());
    }
}
