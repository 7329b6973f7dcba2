//! Trainable parameters: two projection heads and the membership
//! discriminator.
//!
//! Each head is a two-layer MLP with ELU, `y = W2 * elu(W1 * x + b1) + b2`,
//! mapping `d`-dimensional embeddings to the `d_p`-dimensional contrastive
//! space through a hidden layer of width `d_p`. The discriminator is a
//! bilinear form `D(w, d) = w^T B d` with `B` initialized to `I / sqrt(d_p)`.
//!
//! The on-disk parameter container is flat binary: an ASCII magic
//! `HSCNTV01`, then little-endian `u32` version (1), `u32 d`, `u32 d_p`,
//! `u64 seed`, a 32-byte SHA-256 of the canonical config JSON, `u64` value
//! count, and finally the `f64` little-endian parameter values in fixed
//! order: node head `w1, b1, w2, b2`, edge head `w1, b1, w2, b2`,
//! discriminator `B` (matrices row-major).

use super::TriViewConfig;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"HSCNTV01";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParamsIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad parameter file: {0}")]
    Malformed(String),
}

/// ELU activation: identity for non-negative inputs, `exp(t) - 1` below.
pub(crate) fn elu(t: f64) -> f64 {
    if t >= 0.0 {
        t
    } else {
        t.exp() - 1.0
    }
}

/// Derivative of ELU; continuous at 0 with value 1.
pub(crate) fn elu_prime(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        t.exp()
    }
}

/// Plain scalar matrix product, `a (n x m) * b (m x p)`.
///
/// Fixed accumulation order keeps results identical on every platform;
/// the matrices here are small enough that cache-oblivious kernels would
/// buy nothing.
pub(crate) fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, m) = a.dim();
    let (m2, p) = b.dim();
    assert_eq!(m, m2, "matmul shape mismatch: {n}x{m} * {m2}x{p}");
    let mut out = Array2::zeros((n, p));
    for i in 0..n {
        for k in 0..m {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..p {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    out
}

/// One two-layer projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    /// Hidden weights, `d_p x d`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// Output weights, `d_p x d_p`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Cached intermediates of one head forward pass.
pub struct HeadForward {
    pub pre_activation: Array2<f64>,
    pub hidden: Array2<f64>,
    pub output: Array2<f64>,
}

/// Gradients of one head's parameters.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpHead {
    fn uniform_init(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut out = Array2::zeros((rows, cols));
        for v in out.iter_mut() {
            *v = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
        out
    }

    fn uniform_init_vec(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut out = Array1::zeros(len);
        for v in out.iter_mut() {
            *v = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
        out
    }

    fn init(d: usize, d_p: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w1: Self::uniform_init(d_p, d, d, rng),
            b1: Self::uniform_init_vec(d_p, d, rng),
            w2: Self::uniform_init(d_p, d_p, d_p, rng),
            b2: Self::uniform_init_vec(d_p, d_p, rng),
        }
    }

    fn zeros(d: usize, d_p: usize) -> Self {
        Self {
            w1: Array2::zeros((d_p, d)),
            b1: Array1::zeros(d_p),
            w2: Array2::zeros((d_p, d_p)),
            b2: Array1::zeros(d_p),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.nrows()
    }

    /// Row-wise forward pass over a batch `x` of shape `n x d`.
    pub fn forward(&self, x: &Array2<f64>) -> HeadForward {
        assert_eq!(
            x.ncols(),
            self.in_dim(),
            "head expects {} input columns, got {}",
            self.in_dim(),
            x.ncols()
        );
        let pre_activation = matmul(x, &self.w1.t().to_owned()) + &self.b1;
        let hidden = pre_activation.mapv(elu);
        let output = matmul(&hidden, &self.w2.t().to_owned()) + &self.b2;
        HeadForward {
            pre_activation,
            hidden,
            output,
        }
    }

    /// Accumulate parameter gradients for one batch given `d(loss)/d(output)`.
    pub fn backward_into(
        &self,
        x: &Array2<f64>,
        cache: &HeadForward,
        d_output: &Array2<f64>,
        grads: &mut HeadGrads,
    ) {
        let dw2 = matmul(&d_output.t().to_owned(), &cache.hidden);
        let db2 = d_output.sum_axis(ndarray::Axis(0));
        let d_hidden = matmul(d_output, &self.w2);
        let d_pre = &d_hidden * &cache.pre_activation.mapv(elu_prime);
        let dw1 = matmul(&d_pre.t().to_owned(), x);
        let db1 = d_pre.sum_axis(ndarray::Axis(0));
        grads.w1 += &dw1;
        grads.b1 += &db1;
        grads.w2 += &dw2;
        grads.b2 += &db2;
    }
}

impl HeadGrads {
    fn zeros(d: usize, d_p: usize) -> Self {
        Self {
            w1: Array2::zeros((d_p, d)),
            b1: Array1::zeros(d_p),
            w2: Array2::zeros((d_p, d_p)),
            b2: Array1::zeros(d_p),
        }
    }
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub node_head: MlpHead,
    pub edge_head: MlpHead,
    /// Bilinear discriminator matrix, `d_p x d_p`.
    pub discriminator: Array2<f64>,
}

/// Gradients for every trainable parameter, in the same shapes.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub node_head: HeadGrads,
    pub edge_head: HeadGrads,
    pub discriminator: Array2<f64>,
}

impl ModelParams {
    /// Deterministic seeded initialization: head weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, discriminator `I / sqrt(d_p)`.
    pub fn init(config: &TriViewConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let node_head = MlpHead::init(config.d, config.d_p, &mut rng);
        let edge_head = MlpHead::init(config.d, config.d_p, &mut rng);
        let scale = 1.0 / (config.d_p as f64).sqrt();
        let discriminator = Array2::eye(config.d_p) * scale;
        Self {
            node_head,
            edge_head,
            discriminator,
        }
    }

    pub fn zeros(d: usize, d_p: usize) -> Self {
        Self {
            node_head: MlpHead::zeros(d, d_p),
            edge_head: MlpHead::zeros(d, d_p),
            discriminator: Array2::zeros((d_p, d_p)),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.node_head.in_dim(), self.node_head.out_dim())
    }

    pub fn param_count(&self) -> usize {
        self.flat().count()
    }

    /// Values in the serialization order documented at module level.
    pub fn flat(&self) -> impl Iterator<Item = &f64> {
        self.node_head
            .w1
            .iter()
            .chain(self.node_head.b1.iter())
            .chain(self.node_head.w2.iter())
            .chain(self.node_head.b2.iter())
            .chain(self.edge_head.w1.iter())
            .chain(self.edge_head.b1.iter())
            .chain(self.edge_head.w2.iter())
            .chain(self.edge_head.b2.iter())
            .chain(self.discriminator.iter())
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.node_head
            .w1
            .iter_mut()
            .chain(self.node_head.b1.iter_mut())
            .chain(self.node_head.w2.iter_mut())
            .chain(self.node_head.b2.iter_mut())
            .chain(self.edge_head.w1.iter_mut())
            .chain(self.edge_head.b1.iter_mut())
            .chain(self.edge_head.w2.iter_mut())
            .chain(self.edge_head.b2.iter_mut())
            .chain(self.discriminator.iter_mut())
    }
}

impl ModelGrads {
    pub fn zeros(d: usize, d_p: usize) -> Self {
        Self {
            node_head: HeadGrads::zeros(d, d_p),
            edge_head: HeadGrads::zeros(d, d_p),
            discriminator: Array2::zeros((d_p, d_p)),
        }
    }

    /// Same order as [`ModelParams::flat`].
    pub fn flat(&self) -> impl Iterator<Item = &f64> {
        self.node_head
            .w1
            .iter()
            .chain(self.node_head.b1.iter())
            .chain(self.node_head.w2.iter())
            .chain(self.node_head.b2.iter())
            .chain(self.edge_head.w1.iter())
            .chain(self.edge_head.b1.iter())
            .chain(self.edge_head.w2.iter())
            .chain(self.edge_head.b2.iter())
            .chain(self.discriminator.iter())
    }

}

/// Header of a serialized parameter file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamsHeader {
    pub version: u32,
    pub d: u32,
    pub d_p: u32,
    pub seed: u64,
    pub config_sha256: [u8; 32],
}

/// SHA-256 of the canonical config JSON.
pub fn config_hash(config: &TriViewConfig) -> [u8; 32] {
    let canonical = serde_json::to_string(config).expect("config serialization");
    Sha256::digest(canonical.as_bytes()).into()
}

/// Write parameters to the flat binary container.
pub fn save_params(
    params: &ModelParams,
    config: &TriViewConfig,
    path: impl AsRef<Path>,
) -> Result<(), ParamsIoError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let (d, d_p) = params.dims();
    file.write_all(&(d as u32).to_le_bytes())?;
    file.write_all(&(d_p as u32).to_le_bytes())?;
    file.write_all(&config.seed.to_le_bytes())?;
    file.write_all(&config_hash(config))?;
    file.write_all(&(params.param_count() as u64).to_le_bytes())?;
    for value in params.flat() {
        file.write_all(&value.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

/// Read parameters back; validates magic, version, and value count.
pub fn load_params(path: impl AsRef<Path>) -> Result<(ModelParams, ParamsHeader), ParamsIoError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ParamsIoError::Malformed("bad magic".to_string()));
    }
    let version = read_u32(&mut file)?;
    if version != FORMAT_VERSION {
        return Err(ParamsIoError::Malformed(format!(
            "unsupported version {version}"
        )));
    }
    let d = read_u32(&mut file)?;
    let d_p = read_u32(&mut file)?;
    let seed = read_u64(&mut file)?;
    let mut config_sha256 = [0u8; 32];
    file.read_exact(&mut config_sha256)?;
    let count = read_u64(&mut file)? as usize;

    let mut params = ModelParams::zeros(d as usize, d_p as usize);
    if params.param_count() != count {
        return Err(ParamsIoError::Malformed(format!(
            "value count {count} does not match dims {d}x{d_p}"
        )));
    }
    for slot in params.flat_mut() {
        let mut buf = [0u8; 8];
        file.read_exact(&mut buf)?;
        *slot = f64::from_le_bytes(buf);
    }
    Ok((
        params,
        ParamsHeader {
            version,
            d,
            d_p,
            seed,
            config_sha256,
        },
    ))
}

fn read_u32(reader: &mut impl Read) -> Result<u32, ParamsIoError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(reader: &mut impl Read) -> Result<u64, ParamsIoError> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
