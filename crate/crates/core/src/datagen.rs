//! Synthetic contaminated regression data: Gaussian designs, structured
//! ground truth, Gaussian noise, adversarial label corruption, and the
//! experiment presets (a)-(k).
//!
//! Everything is a pure function of a seed and context words, so distinct
//! grid cells can be generated in parallel in any order with identical
//! results. Labels follow `y = X(B* + G*) + sqrt(n) * theta* + xi`.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::GaussianStream;

// Context tags keeping the derived streams for one dataset disjoint.
const TAG_DESIGN: u64 = 1;
const TAG_TRUTH_U: u64 = 2;
const TAG_TRUTH_V: u64 = 3;
const TAG_GAMMA_POS: u64 = 4;
const TAG_NOISE: u64 = 5;

/// Shape of the structured part of the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TruthKind {
    SparseVector,
    LowRank,
    LowRankPlusSparse,
}

/// Recipe for the ground truth of one synthetic problem.
///
/// `entry_value` is the magnitude of the structured signal: the nonzero
/// coordinates for `SparseVector`, the common singular value for `LowRank`,
/// and the sparse-part entries for `LowRankPlusSparse` (whose low-rank part
/// is instead scaled so that `max|B*| * sqrt(n) = spikeness_a` exactly).
/// `outlier_value` is the magnitude written into the corrupted labels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub kind: TruthKind,
    pub s: usize,
    pub r: usize,
    pub entry_value: f64,
    pub spikeness_a: f64,
    pub outlier_value: f64,
    pub sigma: f64,
}

/// Ground truth stored with a generated dataset.
#[derive(Debug, Clone)]
pub struct Truth {
    pub spec: GroundTruthSpec,
    pub epsilon: f64,
    pub seed: u64,
    pub b_star: Array2<f64>,
    pub gamma_star: Array2<f64>,
    pub theta_star: Array1<f64>,
    pub xi: Array1<f64>,
}

/// One regression problem instance. The design is stored as an n x (d1*d2)
/// matrix whose row i is the sample matrix X_i flattened row-major; applying
/// the design operator is a matrix-vector product with that flattening.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub d1: usize,
    pub d2: usize,
    pub design: Array2<f64>,
    pub y: Array1<f64>,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.d1 * self.d2
    }

    /// Applies the design operator to a d1 x d2 parameter matrix.
    pub fn apply_design(&self, v: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if v.dim() != (self.d1, self.d2) {
            return Err(Error::ShapeMismatch(format!(
                "parameter is {:?}, expected ({}, {})",
                v.dim(),
                self.d1,
                self.d2
            )));
        }
        let flat: Array1<f64> = Array1::from_iter(v.iter().copied());
        Ok(self.design.dot(&flat))
    }

    pub fn sigma(&self) -> Option<f64> {
        self.truth.as_ref().map(|t| t.spec.sigma)
    }
}

/// Standard Gaussian design of n samples of shape d1 x d2.
///
/// Each scalar entry draws from its own stream keyed by
/// `(seed, sample, row, col)`, so any sub-block can be regenerated
/// independently and results do not depend on fill order.
pub fn gen_design(n: usize, d1: usize, d2: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::InvalidParam(format!("dimensions ({n}, {d1}, {d2}) must be positive")));
    }
    Ok(Array2::from_shape_fn((n, d1 * d2), |(i, j)| {
        let (row, col) = (j / d2, j % d2);
        GaussianStream::from_key(seed, &[TAG_DESIGN, i as u64, row as u64, col as u64])
            .standard_normal()
    }))
}

/// Structured ground truth `(B*, Gamma*)` for the given spec.
pub fn gen_truth(
    spec: &GroundTruthSpec,
    d1: usize,
    d2: usize,
    n: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let p = d1 * d2;
    if spec.s > p {
        return Err(Error::InvalidParam(format!("sparsity {} exceeds p = {p}", spec.s)));
    }
    if spec.r > d1.min(d2) {
        return Err(Error::InvalidParam(format!(
            "rank {} exceeds min(d1, d2) = {}",
            spec.r,
            d1.min(d2)
        )));
    }
    let mut b_star = Array2::zeros((d1, d2));
    let mut gamma_star = Array2::zeros((d1, d2));
    match spec.kind {
        TruthKind::SparseVector => {
            if d2 != 1 {
                return Err(Error::InvalidParam(
                    "SPARSE_VECTOR ground truth requires d2 = 1".into(),
                ));
            }
            for j in 0..spec.s {
                b_star[[j, 0]] = spec.entry_value;
            }
        }
        TruthKind::LowRank => {
            if spec.r > 0 {
                b_star = spec.entry_value * haar_pair_product(d1, d2, spec.r, seed);
            }
        }
        TruthKind::LowRankPlusSparse => {
            if !(spec.spikeness_a > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "spikeness {} must be positive",
                    spec.spikeness_a
                )));
            }
            if spec.r > 0 {
                let m0 = haar_pair_product(d1, d2, spec.r, seed);
                let linf = m0.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                // Divide by the max first so the peak entry lands on
                // spikeness_a / sqrt(n) without rounding.
                let target = spec.spikeness_a / (n as f64).sqrt();
                b_star = m0.mapv(|x| (x / linf) * target);
            }
            if spec.s > 0 {
                let mut stream = GaussianStream::from_key(seed, &[TAG_GAMMA_POS]);
                for pos in stream.sample_without_replacement(p, spec.s) {
                    gamma_star[[pos / d2, pos % d2]] = spec.entry_value;
                }
            }
        }
    }
    Ok((b_star, gamma_star))
}

fn haar_pair_product(d1: usize, d2: usize, r: usize, seed: u64) -> Array2<f64> {
    let mut su = GaussianStream::from_key(seed, &[TAG_TRUTH_U]);
    let mut sv = GaussianStream::from_key(seed, &[TAG_TRUTH_V]);
    let gu = Array2::from_shape_fn((d1, r), |_| su.standard_normal());
    let gv = Array2::from_shape_fn((d2, r), |_| sv.standard_normal());
    let u = linalg::qr_orthonormal(gu.view());
    let v = linalg::qr_orthonormal(gv.view());
    u.dot(&v.t())
}

/// Labels with adversarial corruption: `o = round(eps * n)` entries of
/// `theta*` are set to `outlier_value` (the first `o`, since the estimators
/// are sample-permutation equivariant), and
/// `y = X(B* + Gamma*) + sqrt(n) * theta* + xi` with `xi ~ N(0, sigma^2)`.
/// Returns `(y, theta_star, xi)`.
pub fn gen_labels(
    design: ArrayView2<'_, f64>,
    b_star: ArrayView2<'_, f64>,
    gamma_star: ArrayView2<'_, f64>,
    sigma: f64,
    epsilon: f64,
    outlier_value: f64,
    seed: u64,
) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::InvalidParam(format!("epsilon {epsilon} outside [0, 0.5]")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be positive")));
    }
    let n = design.nrows();
    let total = &b_star.to_owned() + &gamma_star.to_owned();
    let flat: Array1<f64> = Array1::from_iter(total.iter().copied());
    let f = design.dot(&flat);

    let o = (epsilon * n as f64).round() as usize;
    let mut theta_star = Array1::zeros(n);
    for i in 0..o {
        theta_star[i] = outlier_value;
    }
    let mut xi = Array1::zeros(n);
    let mut stream = GaussianStream::from_key(seed, &[TAG_NOISE]);
    for x in xi.iter_mut() {
        *x = sigma * stream.standard_normal();
    }
    let sqrt_n = (n as f64).sqrt();
    let y = Array1::from_shape_fn(n, |i| f[i] + sqrt_n * theta_star[i] + xi[i]);
    Ok((y, theta_star, xi))
}

/// Complete dataset for one grid cell.
pub fn make_dataset(
    spec: &GroundTruthSpec,
    d1: usize,
    d2: usize,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Dataset> {
    let design = gen_design(n, d1, d2, seed)?;
    let (b_star, gamma_star) = gen_truth(spec, d1, d2, n, seed)?;
    let (y, theta_star, xi) = gen_labels(
        design.view(),
        b_star.view(),
        gamma_star.view(),
        spec.sigma,
        epsilon,
        spec.outlier_value,
        seed,
    )?;
    Ok(Dataset {
        d1,
        d2,
        design,
        y,
        truth: Some(Truth { spec: *spec, epsilon, seed, b_star, gamma_star, theta_star, xi }),
    })
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    schema: u32,
    n: usize,
    d1: usize,
    d2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    o: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<GroundTruthSpec>,
    has_truth: bool,
}

pub(crate) fn write_f64_file(path: &Path, data: impl Iterator<Item = f64>) -> Result<()> {
    let mut buf = Vec::new();
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64_file(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::ShapeMismatch(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected_len * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl Dataset {
    /// Serializes to a directory: `meta.json` plus little-endian f64 arrays
    /// `X.bin` (row-major, sample-major), `y.bin`, and when the truth is
    /// known `B_star.bin`, `Gamma_star.bin`, `theta_star.bin`, `xi.bin`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let n = self.n();
        let meta = DatasetMeta {
            schema: 1,
            n,
            d1: self.d1,
            d2: self.d2,
            epsilon: self.truth.as_ref().map(|t| t.epsilon),
            o: self.truth.as_ref().map(|t| t.theta_star.iter().filter(|&&x| x != 0.0).count()),
            seed: self.truth.as_ref().map(|t| t.seed),
            sigma: self.truth.as_ref().map(|t| t.spec.sigma),
            spec: self.truth.as_ref().map(|t| t.spec),
            has_truth: self.truth.is_some(),
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        write_f64_file(&dir.join("X.bin"), self.design.iter().copied())?;
        write_f64_file(&dir.join("y.bin"), self.y.iter().copied())?;
        if let Some(t) = &self.truth {
            write_f64_file(&dir.join("B_star.bin"), t.b_star.iter().copied())?;
            write_f64_file(&dir.join("Gamma_star.bin"), t.gamma_star.iter().copied())?;
            write_f64_file(&dir.join("theta_star.bin"), t.theta_star.iter().copied())?;
            write_f64_file(&dir.join("xi.bin"), t.xi.iter().copied())?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        if meta.schema != 1 {
            return Err(Error::Config(format!("unsupported dataset schema {}", meta.schema)));
        }
        let p = meta.d1 * meta.d2;
        let design = Array2::from_shape_vec(
            (meta.n, p),
            read_f64_file(&dir.join("X.bin"), meta.n * p)?,
        )
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let y = Array1::from_vec(read_f64_file(&dir.join("y.bin"), meta.n)?);
        let truth = if meta.has_truth {
            let spec = meta
                .spec
                .ok_or_else(|| Error::Config("has_truth set but spec missing".into()))?;
            let shape = (meta.d1, meta.d2);
            Some(Truth {
                spec,
                epsilon: meta.epsilon.unwrap_or(0.0),
                seed: meta.seed.unwrap_or(0),
                b_star: Array2::from_shape_vec(shape, read_f64_file(&dir.join("B_star.bin"), p)?)
                    .map_err(|e| Error::ShapeMismatch(e.to_string()))?,
                gamma_star: Array2::from_shape_vec(
                    shape,
                    read_f64_file(&dir.join("Gamma_star.bin"), p)?,
                )
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?,
                theta_star: Array1::from_vec(read_f64_file(&dir.join("theta_star.bin"), meta.n)?),
                xi: Array1::from_vec(read_f64_file(&dir.join("xi.bin"), meta.n)?),
            })
        } else {
            None
        };
        Ok(Dataset { d1: meta.d1, d2: meta.d2, design, y, truth })
    }

    /// Writes `debug.csv` next to the binary arrays: labels and vectorized
    /// parameters in a plain `array,index,value` layout.
    pub fn export_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = String::from("array,index,value\n");
        let mut dump = |name: &str, it: &mut dyn Iterator<Item = f64>| {
            for (i, x) in it.enumerate() {
                out.push_str(&format!("{name},{i},{x:.16e}\n"));
            }
        };
        dump("y", &mut self.y.iter().copied());
        if let Some(t) = &self.truth {
            dump("B_star", &mut t.b_star.iter().copied());
            dump("Gamma_star", &mut t.gamma_star.iter().copied());
            dump("theta_star", &mut t.theta_star.iter().copied());
            dump("xi", &mut t.xi.iter().copied());
        }
        fs::write(dir.join("debug.csv"), out)?;
        Ok(())
    }
}

/// Configuration of one experiment family: ground-truth template, dimensions,
/// repetition count, the structural grid of (rank, sparsity) pairs, and the
/// contamination grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetData {
    pub id: char,
    pub kind: TruthKind,
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub sigma: f64,
    pub entry_value: f64,
    pub outlier_value: f64,
    pub spikeness_a: f64,
    pub reps: usize,
    /// Grid of (r, s) pairs; the irrelevant coordinate is zero.
    pub structure: Vec<(usize, usize)>,
    pub eps_grid: Vec<f64>,
}

impl PresetData {
    pub fn spec_for(&self, r: usize, s: usize) -> GroundTruthSpec {
        GroundTruthSpec {
            kind: self.kind,
            s,
            r,
            entry_value: self.entry_value,
            spikeness_a: self.spikeness_a,
            outlier_value: self.outlier_value,
            sigma: self.sigma,
        }
    }
}

/// Optional replacements applied on top of a preset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PresetOverrides {
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub eps_grid: Option<Vec<f64>>,
    pub structure: Option<Vec<(usize, usize)>>,
    pub sigma: Option<f64>,
    pub entry_value: Option<f64>,
    pub outlier_value: Option<f64>,
    /// Shrinks the preset to desk scale before the explicit overrides apply:
    /// n = 400 with 20 reps for vector problems and 10 reps for matrix
    /// problems, and the small-sparsity variant of preset b.
    pub desk: bool,
}

const EPS_SWEEP: [f64; 7] = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

/// The experiment families (a)-(k): sparse regression (a-c), low-rank trace
/// regression (d-f), and trace regression with additive decomposition,
/// uncontaminated (g, h) and contaminated (i-k).
pub fn preset(id: char, overrides: &PresetOverrides) -> Result<PresetData> {
    let sweep = EPS_SWEEP.to_vec();
    let mut data = match id {
        'a' => PresetData {
            id,
            kind: TruthKind::SparseVector,
            d1: 100,
            d2: 1,
            n: 1000,
            sigma: 1.0,
            entry_value: 10.0,
            outlier_value: 10.0,
            spikeness_a: 0.0,
            reps: 100,
            structure: vec![(0, 15), (0, 25), (0, 35)],
            eps_grid: sweep,
        },
        'b' => PresetData {
            entry_value: 50.0,
            outlier_value: 50.0,
            structure: vec![(0, 25)],
            ..preset('a', &PresetOverrides::default())?
        },
        'c' => PresetData {
            entry_value: 1.0,
            outlier_value: 1000.0,
            structure: vec![(0, 25)],
            ..preset('a', &PresetOverrides::default())?
        },
        'd' => PresetData {
            id,
            kind: TruthKind::LowRank,
            d1: 10,
            d2: 10,
            n: 1000,
            sigma: 1.0,
            entry_value: 10.0,
            outlier_value: 10.0,
            spikeness_a: 0.0,
            reps: 50,
            structure: vec![(1, 0), (2, 0), (3, 0)],
            eps_grid: sweep,
        },
        'e' => PresetData {
            entry_value: 100.0,
            outlier_value: 100.0,
            structure: vec![(5, 0)],
            ..preset('d', &PresetOverrides::default())?
        },
        'f' => PresetData {
            entry_value: 100.0,
            outlier_value: 1000.0,
            structure: vec![(5, 0)],
            ..preset('d', &PresetOverrides::default())?
        },
        'g' => PresetData {
            id,
            kind: TruthKind::LowRankPlusSparse,
            d1: 10,
            d2: 10,
            n: 1000,
            sigma: 1.0,
            entry_value: 10.0,
            outlier_value: 0.0,
            spikeness_a: 1.0,
            reps: 20,
            structure: (1..=8).flat_map(|r| [(r, 5), (r, 80)]).collect(),
            eps_grid: vec![0.0],
        },
        'h' => PresetData {
            structure: vec![(5, 5), (5, 20), (5, 40), (5, 60), (5, 80)],
            ..preset('g', &PresetOverrides::default())?
        },
        'i' => PresetData {
            outlier_value: 1.0,
            structure: vec![(1, 5), (3, 5), (5, 5)],
            eps_grid: EPS_SWEEP.to_vec(),
            ..preset('g', &PresetOverrides::default())?
        },
        'j' => PresetData {
            sigma: 0.1,
            outlier_value: 0.5,
            structure: vec![(1, 5)],
            ..preset('i', &PresetOverrides::default())?
        },
        'k' => preset('j', &PresetOverrides::default())?,
        _ => return Err(Error::Config(format!("unknown preset '{id}'"))),
    };
    data.id = id;

    if overrides.desk {
        data.n = 400;
        data.reps = if data.d2 == 1 { 20 } else { 10 };
        if id == 'b' {
            data.structure = vec![(0, 10)];
        }
        if id == 'g' {
            data.structure = (1..=6).flat_map(|r| [(r, 5), (r, 80)]).collect();
        }
    }
    if let Some(n) = overrides.n {
        data.n = n;
    }
    if let Some(reps) = overrides.reps {
        data.reps = reps;
    }
    if let Some(grid) = &overrides.eps_grid {
        data.eps_grid = grid.clone();
    }
    if let Some(st) = &overrides.structure {
        data.structure = st.clone();
    }
    if let Some(sigma) = overrides.sigma {
        data.sigma = sigma;
    }
    if let Some(v) = overrides.entry_value {
        data.entry_value = v;
    }
    if let Some(v) = overrides.outlier_value {
        data.outlier_value = v;
    }

    if data.reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    if data.eps_grid.iter().any(|&e| !(0.0..=0.5).contains(&e)) {
        return Err(Error::Config("epsilon grid must lie in [0, 0.5]".into()));
    }
    Ok(data)
}
