//! Binary container for signals, spectra and covariance sets.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `M2SF`                              |
//! | 4     | format version (`u32`)                    |
//! | 4     | header length `L` (`u32`)                 |
//! | L     | header, UTF-8 JSON                        |
//! | rest  | payload, `f64` re/im pairs                |
//!
//! The payload is row-major over the grid (0-based, last axis fastest), then
//! over the vector entries (signal) or the row-major matrix entries
//! (spectrum, covariance). Covariance payloads run over the lag box
//! `[-n_1, n_1] x ... ` in lexicographic order.

use std::io::{Read, Write};
use std::path::Path;

use m2spec::covariance::CovarianceSet;
use m2spec::grid::{GridShape, LagBox, MatrixField, VectorField};
use m2spec::hermitian::CMatrix;
use m2spec::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"M2SF";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Signal,
    Spectrum,
    Covariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub kind: FieldKind,
    pub d: usize,
    /// Grid sizes, or `2 n_j + 1` for covariance files.
    pub dims: Vec<usize>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Lag radii of a covariance file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_radii: Option<Vec<usize>>,
}

impl FieldHeader {
    /// Number of complex payload values the header promises.
    pub fn payload_len(&self) -> usize {
        let cells: usize = self.dims.iter().product();
        match self.kind {
            FieldKind::Signal => cells * self.m,
            FieldKind::Spectrum | FieldKind::Covariance => cells * self.m * self.m,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Format(msg));
        if self.d == 0 || self.dims.len() != self.d {
            return bad(format!("header declares d = {} but {} dims", self.d, self.dims.len()));
        }
        if self.m == 0 || self.dims.contains(&0) {
            return bad("zero-sized dimension in header".into());
        }
        match (self.kind, &self.lag_radii) {
            (FieldKind::Covariance, Some(r)) => {
                if r.len() != self.d || r.iter().zip(&self.dims).any(|(&n, &w)| 2 * n + 1 != w) {
                    return bad(format!("lag radii {r:?} do not match dims {:?}", self.dims));
                }
            }
            (FieldKind::Covariance, None) => return bad("covariance header needs lag_radii".into()),
            (_, Some(_)) => return bad("lag_radii only applies to covariance files".into()),
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub payload: Vec<Complex64>,
}

impl FieldFile {
    pub fn new(header: FieldHeader, payload: Vec<Complex64>) -> Result<Self> {
        header.validate()?;
        if payload.len() != header.payload_len() {
            return Err(CliError::Format(format!("payload holds {} values, header expects {}", payload.len(), header.payload_len())));
        }
        Ok(Self { header, payload })
    }

    pub fn from_signal(y: &VectorField<f64>) -> Self {
        let header = FieldHeader { kind: FieldKind::Signal, d: y.shape().ndim(), dims: y.shape().dims().to_vec(), m: y.channels(), epsilon: None, lag_radii: None };
        Self { header, payload: y.data().to_vec() }
    }

    pub fn from_spectrum(phi: &MatrixField<f64>, epsilon: Option<f64>) -> Self {
        let header = FieldHeader { kind: FieldKind::Spectrum, d: phi.shape().ndim(), dims: phi.shape().dims().to_vec(), m: phi.channels(), epsilon, lag_radii: None };
        Self { header, payload: phi.data().to_vec() }
    }

    pub fn from_covariances(sigma: &CovarianceSet<f64>, epsilon: Option<f64>) -> Self {
        let radii = sigma.lag_box().radii().to_vec();
        let header = FieldHeader {
            kind: FieldKind::Covariance,
            d: radii.len(),
            dims: radii.iter().map(|n| 2 * n + 1).collect(),
            m: sigma.channels(),
            epsilon,
            lag_radii: Some(radii),
        };
        Self { header, payload: sigma.matrices().iter().flat_map(|c| c.as_slice().to_vec()).collect() }
    }

    fn expect(&self, kind: FieldKind) -> Result<()> {
        if self.header.kind != kind {
            return Err(CliError::Format(format!("expected a {kind:?} file, found {:?}", self.header.kind).to_lowercase()));
        }
        Ok(())
    }

    fn shape(&self) -> Result<GridShape> {
        Ok(GridShape::new(self.header.dims.clone())?)
    }

    pub fn to_signal(&self) -> Result<VectorField<f64>> {
        self.expect(FieldKind::Signal)?;
        Ok(VectorField::from_data(self.shape()?, self.header.m, self.payload.clone())?)
    }

    pub fn to_spectrum(&self) -> Result<MatrixField<f64>> {
        self.expect(FieldKind::Spectrum)?;
        Ok(MatrixField::from_data(self.shape()?, self.header.m, self.payload.clone())?)
    }

    pub fn to_covariances(&self) -> Result<CovarianceSet<f64>> {
        self.expect(FieldKind::Covariance)?;
        let m = self.header.m;
        let lag_box = LagBox::new(self.header.lag_radii.clone().unwrap_or_default());
        let matrices = self.payload.chunks(m * m).map(|c| CMatrix::from_row_major(m, c.to_vec())).collect();
        Ok(CovarianceSet::new(lag_box, matrices)?)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        let len = u32::try_from(header.len()).map_err(|_| CliError::Format("header too long".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.payload.len() * 16);
        for z in &self.payload {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        if &word != MAGIC {
            return Err(CliError::Format("missing M2SF magic".into()));
        }
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(CliError::Format(format!("unsupported format version {version}")));
        }
        r.read_exact(&mut word)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header)?;
        let header: FieldHeader = serde_json::from_slice(&header)?;
        header.validate()?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != header.payload_len() * 16 {
            return Err(CliError::Format(format!("payload is {} bytes, header expects {}", bytes.len(), header.payload_len() * 16)));
        }
        let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        let payload = bytes.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect();
        Self::new(header, payload)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
