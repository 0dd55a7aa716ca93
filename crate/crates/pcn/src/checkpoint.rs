//! Self-describing binary checkpoints. All integers are little-endian `u32`,
//! all reals little-endian `f64`:
//!
//! ```text
//! "PCN1"  version  L  d_0 … d_L  d_out  act_0 … act_{L−1}  latent_init_scale
//! then W(0) … W(L−1), Wout, each as  rows  cols  rows·cols values (row-major)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use pcn_core::{Activation, GenerativeStack, Matrix, ModelConfig};

pub const MAGIC: &[u8; 4] = b"PCN1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"PCN1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {found}, this build reads version {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("checkpoint truncated while reading {what}: needed {needed} more bytes, {available} left")]
    Truncated { what: &'static str, needed: usize, available: usize },
    #[error("shape contradiction: {0}")]
    Shape(String),
    #[error("{0} unexpected trailing bytes after the readout matrix")]
    TrailingBytes(usize),
    #[error("invalid model configuration: {0}")]
    Config(#[from] pcn_core::PcnError),
}

/// Encodes `stack` under `config`. Identical inputs give identical bytes.
pub fn encode(stack: &GenerativeStack, config: &ModelConfig) -> Result<Vec<u8>, CheckpointError> {
    config.validate()?;
    stack.validate()?;
    if stack.dims() != config.dims || stack.output_dim() != config.output_dim || stack.activations != config.activations {
        return Err(CheckpointError::Shape("stack does not match model configuration".into()));
    }
    let layers = config.num_latent_layers();
    let mut out = Vec::with_capacity(64 + 8 * stack.param_count());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, layers as u32);
    for &d in &config.dims {
        put_u32(&mut out, d as u32);
    }
    put_u32(&mut out, config.output_dim as u32);
    for act in &config.activations {
        put_u32(&mut out, act.tag());
    }
    out.extend_from_slice(&config.latent_init_scale.to_le_bytes());
    for m in stack.weights.iter().chain(std::iter::once(&stack.readout)) {
        put_u32(&mut out, m.rows() as u32);
        put_u32(&mut out, m.cols() as u32);
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated { what, needed: n, available: self.bytes.len() });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, expected: (usize, usize), what: &'static str) -> Result<Matrix, CheckpointError> {
        let rows = self.u32(what)? as usize;
        let cols = self.u32(what)? as usize;
        if (rows, cols) != expected {
            return Err(CheckpointError::Shape(format!(
                "{what} declared {rows}x{cols}, header implies {}x{}",
                expected.0, expected.1
            )));
        }
        let payload = self.take(rows * cols * 8, what)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Matrix::from_vec(rows, cols, data)?)
    }
}

pub fn decode(bytes: &[u8]) -> Result<(GenerativeStack, ModelConfig), CheckpointError> {
    let mut r = Reader { bytes };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    let layers = r.u32("layer count")? as usize;
    if layers == 0 {
        return Err(CheckpointError::Shape("zero latent layers".into()));
    }
    // Bound the header allocation by what the file could possibly hold.
    if layers > bytes.len() {
        return Err(CheckpointError::Truncated { what: "dims", needed: 4 * (layers + 1), available: r.bytes.len() });
    }
    let dims = (0..=layers).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let output_dim = r.u32("output dim")? as usize;
    let activations = (0..layers)
        .map(|_| {
            let tag = r.u32("activation tag")?;
            Activation::from_tag(tag).ok_or_else(|| CheckpointError::Shape(format!("unknown activation tag {tag}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let latent_init_scale = r.f64("latent init scale")?;
    let config = ModelConfig { dims, output_dim, activations, latent_init_scale };
    config.validate()?;
    let weights = config
        .dims
        .windows(2)
        .map(|w| r.matrix((w[0], w[1]), "weight matrix"))
        .collect::<Result<Vec<_>, _>>()?;
    let readout = r.matrix((config.output_dim, config.top_dim()), "readout matrix")?;
    if !r.bytes.is_empty() {
        return Err(CheckpointError::TrailingBytes(r.bytes.len()));
    }
    let stack = GenerativeStack::new(weights, readout, config.activations.clone())?;
    Ok((stack, config))
}

pub fn save(stack: &GenerativeStack, config: &ModelConfig, path: &Path) -> Result<(), CheckpointError> {
    let bytes = encode(stack, config)?;
    fs::write(path, bytes).map_err(|source| CheckpointError::Io { path: path.to_owned(), source })
}

pub fn load(path: &Path) -> Result<(GenerativeStack, ModelConfig), CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.to_owned(), source })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (GenerativeStack, ModelConfig) {
        let config = ModelConfig::new(vec![2, 1], 1, Activation::Relu).unwrap();
        (GenerativeStack::init(&config, 3).unwrap(), config)
    }

    #[test]
    fn size_follows_layout() {
        let (stack, config) = small();
        let bytes = encode(&stack, &config).unwrap();
        let header = 4 + 4 + 4 + 2 * 4 + 4 + 4 + 8;
        let matrices = (8 + 2 * 8) + (8 + 8);
        assert_eq!(bytes.len(), header + matrices);
        assert_eq!(bytes.len(), 76);
    }

    #[test]
    fn distinct_errors() {
        let (stack, config) = small();
        let good = encode(&stack, &config).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(CheckpointError::BadMagic(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(CheckpointError::Version { found: 2 })));

        assert!(matches!(decode(&good[..good.len() - 3]), Err(CheckpointError::Truncated { .. })));
        assert!(matches!(decode(&good[..2]), Err(CheckpointError::Truncated { what: "magic", .. })));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode(&bad), Err(CheckpointError::TrailingBytes(1))));

        // First matrix header sits right after the 36-byte model header; claim 3 rows.
        let mut bad = good.clone();
        bad[36] = 3;
        assert!(matches!(decode(&bad), Err(CheckpointError::Shape(_))));

        let mut bad = good;
        bad[24] = 9; // activation tag
        assert!(matches!(decode(&bad), Err(CheckpointError::Shape(_))));
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let (stack, _) = small();
        let other = ModelConfig::new(vec![2, 1], 1, Activation::Tanh).unwrap();
        assert!(encode(&stack, &other).is_err());
    }
}
