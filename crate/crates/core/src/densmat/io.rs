//! `QDM1` container: the 4 magic bytes `QDM1`, a little-endian `u32` dimension,
//! then `dim²` entries in row-major order, each as little-endian `f64` real
//! part followed by `f64` imaginary part.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{CMatrix, DensityMatrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QDM1";

impl DensityMatrix {
    pub fn to_qdm_bytes(&self) -> Vec<u8> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(8 + dim * dim * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        for z in self.matrix().data() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    /// Parses a `QDM1` buffer and checks the density-matrix invariants.
    pub fn from_qdm_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing QDM1 magic".into()));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if dim == 0 || !dim.is_power_of_two() || dim > 1 << super::MAX_QUBITS {
            return Err(Error::Format(format!("unsupported dimension {dim}")));
        }
        let body = &bytes[8..];
        if body.len() != dim * dim * 16 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                dim * dim * 16,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        DensityMatrix::from_matrix(CMatrix::from_row_major(dim, data).expect("checked length"))
    }

    pub fn write_qdm(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_qdm_bytes())?;
        Ok(())
    }

    pub fn read_qdm(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_qdm_bytes(&buf)
    }

    pub fn save_qdm(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_qdm_bytes())?;
        Ok(())
    }

    pub fn load_qdm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_qdm_bytes(&std::fs::read(path)?)
    }
}
