//! CIFAR-10 binary batches: each record is one label byte (0..=9) followed by
//! 3072 pixel bytes, the red, green and blue 32×32 planes in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use pcn_core::{Dataset, Matrix};

pub const IMAGE_BYTES: usize = 3072;
pub const RECORD_BYTES: usize = IMAGE_BYTES + 1;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CifarError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: length {actual} bytes is not a positive multiple of the {expected}-byte record size")]
    Format { path: PathBuf, expected: usize, actual: usize },
    #[error("{path}: record {record} has label byte {label}, expected 0..=9")]
    CorruptRecord { path: PathBuf, record: usize, label: u8 },
    #[error("dataset rows have {0} features; the CIFAR-10 layout needs 3072")]
    Width(usize),
    #[error("label {0} does not fit the CIFAR-10 label range 0..=9")]
    Label(usize),
    #[error("no CIFAR-10 batch files found in {0}")]
    Missing(PathBuf),
}

/// Parses one file's worth of records.
pub fn parse(path: &Path, bytes: &[u8]) -> Result<(Vec<f64>, Vec<usize>), CifarError> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(CifarError::Format { path: path.to_owned(), expected: RECORD_BYTES, actual: bytes.len() });
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut pixels = Vec::with_capacity(n * IMAGE_BYTES);
    let mut labels = Vec::with_capacity(n);
    for (record, chunk) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = chunk[0];
        if label as usize >= NUM_CLASSES {
            return Err(CifarError::CorruptRecord { path: path.to_owned(), record, label });
        }
        labels.push(label as usize);
        pixels.extend(chunk[1..].iter().map(|&p| p as f64 / 255.0));
    }
    Ok((pixels, labels))
}

/// Loads and concatenates the given batch files, in order.
pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset, CifarError> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for p in paths {
        let path = p.as_ref();
        let bytes = fs::read(path).map_err(|source| CifarError::Io { path: path.to_owned(), source })?;
        let (px, lb) = parse(path, &bytes)?;
        pixels.extend(px);
        labels.extend(lb);
    }
    let n = labels.len();
    let inputs = Matrix::from_vec(n, IMAGE_BYTES, pixels).expect("record size fixes the row width");
    Ok(Dataset { inputs, labels, num_classes: NUM_CLASSES })
}

/// The five `data_batch_*.bin` training files of a `cifar-10-batches-bin`
/// directory, sorted by name.
pub fn train_files(dir: &Path) -> Result<Vec<PathBuf>, CifarError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| CifarError::Io { path: dir.to_owned(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("data_batch_") && n.ends_with(".bin"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CifarError::Missing(dir.to_owned()));
    }
    Ok(files)
}

pub fn test_file(dir: &Path) -> Result<PathBuf, CifarError> {
    let path = dir.join("test_batch.bin");
    if path.is_file() {
        Ok(path)
    } else {
        Err(CifarError::Missing(dir.to_owned()))
    }
}

pub fn load_train(dir: &Path) -> Result<Dataset, CifarError> {
    load_cifar10(&train_files(dir)?)
}

pub fn load_test(dir: &Path) -> Result<Dataset, CifarError> {
    load_cifar10(&[test_file(dir)?])
}

/// Serializes a dataset in the record layout, quantizing pixels with
/// `round(255 · x)`.
pub fn encode(dataset: &Dataset) -> Result<Vec<u8>, CifarError> {
    if dataset.input_dim() != IMAGE_BYTES {
        return Err(CifarError::Width(dataset.input_dim()));
    }
    let mut out = Vec::with_capacity(dataset.len() * RECORD_BYTES);
    for (i, &label) in dataset.labels.iter().enumerate() {
        if label >= NUM_CLASSES {
            return Err(CifarError::Label(label));
        }
        out.push(label as u8);
        out.extend(dataset.inputs.row(i).iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

pub fn write_cifar10(dataset: &Dataset, path: &Path) -> Result<(), CifarError> {
    let bytes = encode(dataset)?;
    fs::write(path, bytes).map_err(|source| CifarError::Io { path: path.to_owned(), source })
}
