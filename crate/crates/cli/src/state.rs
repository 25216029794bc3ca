//! Binary save/load of a trained storage/recall pair.
//!
//! Layout, all little-endian: four `u32` (pixels, hidden units, classes,
//! format version), the pixel mean as `f64`, then for the storage network and
//! then the recall network, each layer's weights (row-major) followed by its
//! bias, as `f64`.

use plm_core::nn::DenseLayer;
use plm_core::{ActivationKind, Mlp, Plm};

use crate::CliError;

pub const VERSION: u32 = 1;

pub fn encode(plm: &Plm) -> Vec<u8> {
    let dims = plm.storage().dims();
    let mut out = Vec::new();
    for v in [dims[0], dims[1], dims[2]] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&plm.pixel_mean().to_le_bytes());
    for net in [plm.storage(), plm.recall()] {
        for layer in net.layers() {
            for v in layer.weights().iter().chain(layer.bias()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CliError> {
        if self.bytes.len() < n {
            return Err(CliError::State("file is truncated".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Plm, CliError> {
    let mut r = Reader { bytes };
    let (pixels, hidden, classes) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::State(format!("unsupported version {version}")));
    }
    if pixels == 0 || hidden == 0 || classes == 0 {
        return Err(CliError::State(format!("bad dims {pixels}x{hidden}x{classes}")));
    }
    let expected = 8 * (1 + 2 * (pixels * hidden + hidden * classes) + 2 * hidden + pixels + classes);
    if r.bytes.len() != expected {
        return Err(CliError::State(format!(
            "expected {expected} bytes after the header, found {}",
            r.bytes.len()
        )));
    }
    let mean = r.f64s(1)?[0];
    let mut layer = |i: usize, o: usize, act: ActivationKind| -> Result<DenseLayer, CliError> {
        let w = r.f64s(i * o)?;
        let b = r.f64s(o)?;
        DenseLayer::new(i, o, w, b, act).map_err(|e| CliError::State(e.to_string()))
    };
    let storage = vec![
        layer(pixels, hidden, ActivationKind::BiasedSigmoid)?,
        layer(hidden, classes, ActivationKind::SoftmaxZeroBias)?,
    ];
    let recall = vec![
        layer(classes, hidden, ActivationKind::BiasedSigmoid)?,
        layer(hidden, pixels, ActivationKind::SigmoidZeroBias)?,
    ];
    let net = |layers| Mlp::from_layers(layers).map_err(|e| CliError::State(e.to_string()));
    Plm::from_networks(net(storage)?, net(recall)?, mean).map_err(|e| CliError::State(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use plm_core::{RngStream, ScheduleConfig};

    fn small() -> Plm {
        let config = ScheduleConfig {
            n_classes: 4,
            n_train: 3,
            n_new: 1,
            hidden_units: 5,
            ..ScheduleConfig::default()
        };
        let mut plm = Plm::build(9, &config, 0.25, &RngStream::new(2)).unwrap();
        plm.recall_mut().layers_mut()[0].bias_mut()[1] = 0.75;
        plm
    }

    #[test]
    fn roundtrip_is_exact() {
        let plm = small();
        let bytes = encode(&plm);
        assert_eq!(&bytes[..16], &[9, 0, 0, 0, 5, 0, 0, 0, 4, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &0.25f64.to_le_bytes());
        let expected_len = 16 + 8 * (1 + 2 * (9 * 5 + 5 * 4) + 2 * 5 + 9 + 4);
        assert_eq!(bytes.len(), expected_len);
        assert_eq!(decode(&bytes).unwrap(), plm);
    }

    #[test]
    fn damaged_files_rejected() {
        let bytes = encode(&small());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..10]).is_err());
        let mut v = bytes.clone();
        v[12] = 9;
        assert!(decode(&v).is_err());
        let mut z = bytes;
        // last value is a frozen output bias of the recall net
        let n = z.len();
        z[n - 8..].copy_from_slice(&1.0f64.to_le_bytes());
        assert!(decode(&z).is_err());
    }
}
