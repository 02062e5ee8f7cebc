//! Local Linear Map networks and local principal component analyzers.
//!
//! An LLM network is a set of competitive gating centers, each owning an
//! affine map valid in its Voronoi cell. Training runs in two phases:
//! online winner-take-all vector quantization of the centers, then a
//! per-cell ridge least-squares fit of the affine maps. Evaluation is a
//! hard winner lookup followed by the winner's affine map.

use std::io::Read as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const LLM_MAGIC: &[u8; 4] = b"NHLM";
const LLM_VERSION: u32 = 1;

/// One competitive unit: a gating center plus its local affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct LLMNode {
    pub center: DVector<f64>,
    pub offset: DVector<f64>,
    pub map: DMatrix<f64>,
}

/// Winner-take-all network of local affine maps.
#[derive(Debug, Clone, PartialEq)]
pub struct LLMNetwork {
    nodes: Vec<LLMNode>,
    input_dim: usize,
    output_dim: usize,
}

/// Per-cell principal component basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPCAAnalyzer {
    pub center: DVector<f64>,
    /// Orthonormal principal directions, one column per component.
    pub basis: DMatrix<f64>,
    /// Variances along the basis directions, sorted descending.
    pub eigenvalues: Vec<f64>,
}

/// Training parameters shared by LLM and local-PCA fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub epochs: usize,
    /// Center learning rate schedule, geometric from start to end.
    pub rate_start: f64,
    pub rate_end: f64,
    /// Ridge regularizer, scaled by the mean input-scatter trace.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 8,
            epochs: 10,
            rate_start: 0.5,
            rate_end: 0.01,
            ridge: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("train config: k must be >= 1"));
        }
        for (name, r) in [("rate_start", self.rate_start), ("rate_end", self.rate_end)] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::invalid(format!(
                    "train config: {} = {} must be in (0,1]",
                    name, r
                )));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::invalid("train config: ridge must be >= 0"));
        }
        Ok(())
    }
}

impl LLMNetwork {
    pub fn nodes(&self) -> &[LLMNode] {
        &self.nodes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Winning node index for an input: nearest center, ties to the
    /// lowest node index.
    pub fn winner(&self, x: &DVector<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, node) in self.nodes.iter().enumerate() {
            let d = (x - &node.center).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(LLM_MAGIC);
        bytes.extend_from_slice(&LLM_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.output_dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.nodes.len() as u32).to_le_bytes());
        for node in &self.nodes {
            for &v in node.center.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for &v in node.offset.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for r in 0..self.output_dim {
                for c in 0..self.input_dim {
                    bytes.extend_from_slice(&node.map[(r, c)].to_le_bytes());
                }
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8], location: &str) -> Result<Self> {
        let fail = |msg: &str| Error::parse(location.to_string(), msg.to_string());
        if bytes.len() < 20 || &bytes[0..4] != LLM_MAGIC {
            return Err(fail("bad LLM network magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != LLM_VERSION {
            return Err(fail("unsupported LLM network version"));
        }
        let input_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let output_dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let per_node = input_dim + output_dim + output_dim * input_dim;
        if bytes.len() != 20 + 8 * k * per_node {
            return Err(fail("LLM network payload length mismatch"));
        }
        let mut pos = 20;
        let mut read_f64 = |bytes: &[u8]| {
            let v = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
            pos += 8;
            v
        };
        let mut nodes = Vec::with_capacity(k);
        for _ in 0..k {
            let center = DVector::from_iterator(input_dim, (0..input_dim).map(|_| read_f64(bytes)));
            let offset =
                DVector::from_iterator(output_dim, (0..output_dim).map(|_| read_f64(bytes)));
            let mut map = DMatrix::zeros(output_dim, input_dim);
            for r in 0..output_dim {
                for c in 0..input_dim {
                    map[(r, c)] = read_f64(bytes);
                }
            }
            nodes.push(LLMNode {
                center,
                offset,
                map,
            });
        }
        Ok(LLMNetwork {
            nodes,
            input_dim,
            output_dim,
        })
    }
}

/// Evaluate the network: winner lookup plus the winner's affine map.
pub fn eval_llm(net: &LLMNetwork, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != net.input_dim {
        return Err(Error::invalid(format!(
            "eval_llm: input dim {} does not match network dim {}",
            x.len(),
            net.input_dim
        )));
    }
    let k = net.winner(x);
    let node = &net.nodes[k];
    Ok(&node.offset + &node.map * (x - &node.center))
}

fn check_samples(
    samples: &[(Vec<f64>, Vec<f64>)],
    k: usize,
) -> Result<(usize, usize)> {
    if samples.len() < k {
        return Err(Error::invalid(format!(
            "{} samples is fewer than K = {}",
            samples.len(),
            k
        )));
    }
    let input_dim = samples[0].0.len();
    let output_dim = samples[0].1.len();
    for (i, (x, y)) in samples.iter().enumerate() {
        if x.len() != input_dim || y.len() != output_dim {
            return Err(Error::invalid(format!(
                "sample {} has inconsistent dimensions",
                i
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {} is non-finite", i)));
        }
    }
    Ok((input_dim, output_dim))
}

/// Phase 1: seeded online winner-take-all vector quantization.
/// Centers are initialized from distinct training inputs.
fn vector_quantize(
    inputs: &[DVector<f64>],
    k: usize,
    cfg: &TrainConfig,
) -> Result<Vec<DVector<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // distinct inputs for initialization, in first-seen order
    let mut distinct: Vec<usize> = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        if !distinct.iter().any(|&j| inputs[j] == *x) {
            distinct.push(i);
        }
    }
    if distinct.len() < k {
        return Err(Error::invalid(format!(
            "only {} distinct inputs for K = {} centers",
            distinct.len(),
            k
        )));
    }
    distinct.shuffle(&mut rng);
    let mut centers: Vec<DVector<f64>> = distinct[..k].iter().map(|&i| inputs[i].clone()).collect();

    let total_steps = (cfg.epochs * inputs.len()).max(1);
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &inputs[i];
            // geometric learning-rate schedule over all updates
            let t = step as f64 / (total_steps as f64 - 1.0).max(1.0);
            let rate = cfg.rate_start * (cfg.rate_end / cfg.rate_start).powf(t);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = (x - c).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            let delta = (x - &centers[best]) * rate;
            centers[best] += delta;
            step += 1;
        }
    }
    Ok(centers)
}

fn nearest_center(centers: &[DVector<f64>], x: &DVector<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = (x - c).norm_squared();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Solve A (M + lambda I) = C for A, falling back to a pseudo-inverse
/// when the regularized scatter is singular.
fn solve_map(m: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let dim = m.nrows();
    let reg = m + DMatrix::identity(dim, dim) * lambda;
    match reg.clone().cholesky() {
        Some(chol) => {
            // A^T = reg^{-1} C^T
            let at = chol.solve(&c.transpose());
            at.transpose()
        }
        None => {
            let pinv = reg
                .svd(true, true)
                .pseudo_inverse(1e-12)
                .unwrap_or_else(|_| DMatrix::zeros(dim, dim));
            c * pinv
        }
    }
}

/// Two-phase LLM training: seeded vector quantization of the centers,
/// then a per-cell ridge least-squares fit of each affine map. Empty
/// cells fall back to the global target mean with a zero map.
pub fn train_llm(samples: &[(Vec<f64>, Vec<f64>)], cfg: &TrainConfig) -> Result<LLMNetwork> {
    cfg.validate()?;
    let (input_dim, output_dim) = check_samples(samples, cfg.k)?;
    let inputs: Vec<DVector<f64>> = samples
        .iter()
        .map(|(x, _)| DVector::from_column_slice(x))
        .collect();
    let targets: Vec<DVector<f64>> = samples
        .iter()
        .map(|(_, y)| DVector::from_column_slice(y))
        .collect();
    let centers = vector_quantize(&inputs, cfg.k, cfg)?;

    let global_mean =
        targets.iter().fold(DVector::zeros(output_dim), |a, y| a + y) / targets.len() as f64;

    // Phase 2: assign samples to cells, fit each cell by ridge regression
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); cfg.k];
    for (i, x) in inputs.iter().enumerate() {
        cells[nearest_center(&centers, x)].push(i);
    }
    let mut nodes = Vec::with_capacity(cfg.k);
    for (k, cell) in cells.iter().enumerate() {
        let center = centers[k].clone();
        if cell.is_empty() {
            nodes.push(LLMNode {
                center,
                offset: global_mean.clone(),
                map: DMatrix::zeros(output_dim, input_dim),
            });
            continue;
        }
        let n = cell.len() as f64;
        let u_mean = cell
            .iter()
            .fold(DVector::zeros(input_dim), |a, &i| a + (&inputs[i] - &center))
            / n;
        let y_mean = cell
            .iter()
            .fold(DVector::zeros(output_dim), |a, &i| a + &targets[i])
            / n;
        let mut scatter = DMatrix::zeros(input_dim, input_dim);
        let mut cross = DMatrix::zeros(output_dim, input_dim);
        for &i in cell {
            let du = (&inputs[i] - &center) - &u_mean;
            let dy = &targets[i] - &y_mean;
            scatter += &du * du.transpose();
            cross += dy * du.transpose();
        }
        let lambda = cfg.ridge * scatter.trace() / input_dim as f64;
        let map = solve_map(&scatter, &cross, lambda);
        let offset = &y_mean - &map * &u_mean;
        nodes.push(LLMNode {
            center,
            offset,
            map,
        });
    }
    Ok(LLMNetwork {
        nodes,
        input_dim,
        output_dim,
    })
}

/// Unsupervised counterpart of `train_llm`: the same seeded vector
/// quantization, then a per-cell eigendecomposition of the covariance.
pub fn train_local_pca(
    samples: &[Vec<f64>],
    k: usize,
    d: usize,
    cfg: &TrainConfig,
) -> Result<Vec<LocalPCAAnalyzer>> {
    cfg.validate()?;
    if samples.len() < k {
        return Err(Error::invalid(format!(
            "{} samples is fewer than K = {}",
            samples.len(),
            k
        )));
    }
    let dim = samples[0].len();
    if d > dim || d == 0 {
        return Err(Error::invalid(format!(
            "component count {} must be in 1..={}",
            d, dim
        )));
    }
    for (i, x) in samples.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::invalid(format!(
                "sample {} has inconsistent dimension",
                i
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {} is non-finite", i)));
        }
    }
    let inputs: Vec<DVector<f64>> = samples
        .iter()
        .map(|x| DVector::from_column_slice(x))
        .collect();
    let cfg_vq = TrainConfig { k, ..cfg.clone() };
    let centers = vector_quantize(&inputs, k, &cfg_vq)?;
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, x) in inputs.iter().enumerate() {
        cells[nearest_center(&centers, x)].push(i);
    }
    let mut analyzers = Vec::with_capacity(k);
    for (ci, cell) in cells.iter().enumerate() {
        let center = centers[ci].clone();
        if cell.is_empty() {
            // canonical axes with zero variance
            let mut basis = DMatrix::zeros(dim, d);
            for j in 0..d {
                basis[(j, j)] = 1.0;
            }
            analyzers.push(LocalPCAAnalyzer {
                center,
                basis,
                eigenvalues: vec![0.0; d],
            });
            continue;
        }
        let n = cell.len() as f64;
        let mean = cell
            .iter()
            .fold(DVector::zeros(dim), |a, &i| a + &inputs[i])
            / n;
        let mut cov = DMatrix::zeros(dim, dim);
        for &i in cell {
            let du = &inputs[i] - &mean;
            cov += &du * du.transpose();
        }
        cov /= n;
        let eig = cov.symmetric_eigen();
        // sort eigenpairs descending
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut basis = DMatrix::zeros(dim, d);
        let mut eigenvalues = Vec::with_capacity(d);
        for (out_col, &src) in order.iter().take(d).enumerate() {
            let mut v = eig.eigenvectors.column(src).clone_owned();
            // deterministic sign: largest-magnitude component positive
            let lead = v
                .iter()
                .cloned()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            if v[lead] < 0.0 {
                v = -v;
            }
            basis.set_column(out_col, &v);
            eigenvalues.push(eig.eigenvalues[src].max(0.0));
        }
        analyzers.push(LocalPCAAnalyzer {
            center,
            basis,
            eigenvalues,
        });
    }
    Ok(analyzers)
}
