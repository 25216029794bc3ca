//! MNIST IDX parsing and the 75-image arbitrary-class dataset.
//!
//! IDX files start with big-endian `u32` fields: a magic number, the item
//! count, and (for images) the row and column counts, followed by raw bytes.

use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;

/// Classes in the experiment: 50 learned up front, 25 injected later.
pub const DEFAULT_TRAIN: usize = 50;
pub const DEFAULT_NEW: usize = 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataError {
    #[error("bad magic number {found} (expected {expected})")]
    BadMagic { expected: u32, found: u32 },
    #[error("file too short for its header: {len} bytes, need {need}")]
    TruncatedHeader { len: usize, need: usize },
    #[error("payload length mismatch: header implies {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unsupported image dimensions {rows}x{cols} (expected 28x28)")]
    BadDimensions { rows: u32, cols: u32 },
    #[error("label {value} at index {index} is outside 0..=9")]
    BadLabel { index: usize, value: u8 },
    #[error("need at least {need} images, got {got}")]
    TooFewImages { need: usize, got: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageHeader {
    pub magic: u32,
    pub count: u32,
    pub rows: u32,
    pub cols: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelHeader {
    pub magic: u32,
    pub count: u32,
}

/// One 28x28 image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage(Box<[u8; PIXELS]>);

impl RawImage {
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; PIXELS] = bytes.try_into().ok()?;
        Some(Self(Box::new(arr)))
    }

    pub fn pixels(&self) -> &[u8; PIXELS] {
        &self.0
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn read_image_header(bytes: &[u8]) -> Result<ImageHeader, DataError> {
    if bytes.len() < 16 {
        return Err(DataError::TruncatedHeader {
            len: bytes.len(),
            need: 16,
        });
    }
    let header = ImageHeader {
        magic: be_u32(bytes, 0),
        count: be_u32(bytes, 4),
        rows: be_u32(bytes, 8),
        cols: be_u32(bytes, 12),
    };
    if header.magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            expected: IMAGE_MAGIC,
            found: header.magic,
        });
    }
    Ok(header)
}

pub fn read_label_header(bytes: &[u8]) -> Result<LabelHeader, DataError> {
    if bytes.len() < 8 {
        return Err(DataError::TruncatedHeader {
            len: bytes.len(),
            need: 8,
        });
    }
    let header = LabelHeader {
        magic: be_u32(bytes, 0),
        count: be_u32(bytes, 4),
    };
    if header.magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            expected: LABEL_MAGIC,
            found: header.magic,
        });
    }
    Ok(header)
}

/// Parses a complete IDX3 image file of 28x28 images.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<RawImage>, DataError> {
    let header = read_image_header(bytes)?;
    if header.rows as usize != SIDE || header.cols as usize != SIDE {
        return Err(DataError::BadDimensions {
            rows: header.rows,
            cols: header.cols,
        });
    }
    let payload = &bytes[16..];
    let expected = header.count as usize * PIXELS;
    if payload.len() != expected {
        return Err(DataError::LengthMismatch {
            expected,
            found: payload.len(),
        });
    }
    Ok(payload
        .chunks_exact(PIXELS)
        .map(|c| RawImage::from_bytes(c).expect("chunk is PIXELS long"))
        .collect())
}

/// Parses a complete IDX1 label file; every label must be a digit 0-9.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let header = read_label_header(bytes)?;
    let payload = &bytes[8..];
    if payload.len() != header.count as usize {
        return Err(DataError::LengthMismatch {
            expected: header.count as usize,
            found: payload.len(),
        });
    }
    if let Some((index, &value)) = payload.iter().enumerate().find(|(_, v)| **v > 9) {
        return Err(DataError::BadLabel { index, value });
    }
    Ok(payload.to_vec())
}

/// Serializes images back into an IDX3 file.
pub fn encode_idx_images(images: &[RawImage]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * PIXELS);
    for field in [IMAGE_MAGIC, images.len() as u32, SIDE as u32, SIDE as u32] {
        out.extend_from_slice(&field.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img.pixels());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    /// Learned during initial training, then discarded.
    Train,
    /// Held back and injected during the on-the-fly epoch.
    New,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub class: usize,
    pub split: Split,
    /// Zero-mean convention: byte / 255 minus the dataset mean.
    pub image: Vec<f64>,
}

/// The first `n_train + n_new` images, each its own class, normalized by a
/// single global mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    n_train: usize,
    mean: f64,
}

impl Dataset {
    /// The 50 + 25 split used by the experiment.
    pub fn build(images: &[RawImage]) -> Result<Self, DataError> {
        Self::build_with_split(images, DEFAULT_TRAIN, DEFAULT_NEW)
    }

    /// Takes images `0..n_train + n_new` in file order. Image `i` gets class `i`;
    /// the first `n_train` are [`Split::Train`], the rest [`Split::New`].
    pub fn build_with_split(images: &[RawImage], n_train: usize, n_new: usize) -> Result<Self, DataError> {
        let n = n_train + n_new;
        if n == 0 {
            return Err(DataError::InvalidSplit("dataset needs at least one class".into()));
        }
        if images.len() < n {
            return Err(DataError::TooFewImages {
                need: n,
                got: images.len(),
            });
        }
        let scaled: Vec<Vec<f64>> = images[..n]
            .iter()
            .map(|img| img.pixels().iter().map(|&b| f64::from(b) / 255.0).collect())
            .collect();
        let total: f64 = scaled.iter().flatten().sum();
        let mean = total / (n * PIXELS) as f64;
        let examples = scaled
            .into_iter()
            .enumerate()
            .map(|(class, px)| Example {
                class,
                split: if class < n_train { Split::Train } else { Split::New },
                image: px.into_iter().map(|v| v - mean).collect(),
            })
            .collect();
        Ok(Self {
            examples,
            n_train,
            mean,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Scalar subtracted from every scaled pixel.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_new(&self) -> usize {
        self.examples.len() - self.n_train
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn train(&self) -> &[Example] {
        &self.examples[..self.n_train]
    }

    pub fn new_examples(&self) -> &[Example] {
        &self.examples[self.n_train..]
    }

    pub fn class_of(&self, index: usize) -> usize {
        self.examples[index].class
    }

    pub fn split_of(&self, index: usize) -> Split {
        self.examples[index].split
    }
}
