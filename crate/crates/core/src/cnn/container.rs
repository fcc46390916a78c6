//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "EKCN" | version u32 | input h, w, c u32 | kernel u32 | padding u8
//! | conv count u32, widths u32... | dropout flag u8, block u32, rate f32
//! | dense count u32, widths u32... | classes u32 | label indices u8...
//! | parameter count u64 | weights f32... | CRC32 of all preceding bytes
//! ```

use std::path::Path;

use super::{CnnArchitecture, CnnError, CnnModel, DropoutSpec, Network, Padding};
use crate::telemetry::EmotionLabel;

pub const MAGIC: &[u8; 4] = b"EKCN";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_model(model: &CnnModel) -> Vec<u8> {
    let arch = model.arch();
    let params = model.network.params();
    let mut out = Vec::with_capacity(64 + params.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, arch.input.0);
    put_u32(&mut out, arch.input.1);
    put_u32(&mut out, arch.input.2);
    put_u32(&mut out, arch.kernel);
    out.push(match arch.padding {
        Padding::Valid => 0,
        Padding::Same => 1,
    });
    put_u32(&mut out, arch.conv_channels.len());
    for &c in &arch.conv_channels {
        put_u32(&mut out, c);
    }
    match arch.dropout {
        Some(d) => {
            out.push(1);
            put_u32(&mut out, d.after_block);
            out.extend_from_slice(&d.rate.to_le_bytes());
        }
        None => {
            out.push(0);
            put_u32(&mut out, 0);
            out.extend_from_slice(&0f32.to_le_bytes());
        }
    }
    put_u32(&mut out, arch.dense_widths.len());
    for &w in &arch.dense_widths {
        put_u32(&mut out, w);
    }
    put_u32(&mut out, arch.classes);
    for l in &model.class_labels {
        out.push(l.index() as u8);
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CnnError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CnnError::VersionMismatch("header runs past the payload".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CnnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, CnnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f32(&mut self) -> Result<f32, CnnError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn widths(&mut self) -> Result<Vec<usize>, CnnError> {
        let n = self.u32()?;
        if n > 1024 {
            return Err(CnnError::VersionMismatch(format!("{n} layers")));
        }
        (0..n).map(|_| self.u32()).collect()
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<CnnModel, CnnError> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(CnnError::VersionMismatch("not an EKCN container".into()));
    }
    if bytes.len() < 12 {
        return Err(CnnError::ChecksumMismatch(format!("truncated at {} bytes", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(CnnError::ChecksumMismatch(format!(
            "stored {stored:08x}, computed {actual:08x}"
        )));
    }
    let mut r = Reader { bytes: body, at: 4 };
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(CnnError::VersionMismatch(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let input = (r.u32()?, r.u32()?, r.u32()?);
    let kernel = r.u32()?;
    let padding = match r.u8()? {
        0 => Padding::Valid,
        1 => Padding::Same,
        p => return Err(CnnError::VersionMismatch(format!("padding code {p}"))),
    };
    let conv_channels = r.widths()?;
    let has_dropout = r.u8()?;
    let after_block = r.u32()?;
    let rate = r.f32()?;
    let dropout = (has_dropout == 1).then_some(DropoutSpec { after_block, rate });
    let dense_widths = r.widths()?;
    let classes = r.u32()?;
    let class_labels = (0..classes)
        .map(|_| {
            let i = r.u8()? as usize;
            EmotionLabel::ALL
                .get(i)
                .copied()
                .ok_or_else(|| CnnError::VersionMismatch(format!("label index {i}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let arch = CnnArchitecture {
        input,
        conv_channels,
        kernel,
        padding,
        dropout,
        dense_widths,
        classes,
    };
    let count = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
    let expected = arch.param_count()?;
    if count != expected || body.len() - r.at != count * 4 {
        return Err(CnnError::ShapeMismatch(format!(
            "{count} stored parameters, architecture needs {expected}"
        )));
    }
    let params = body[r.at..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    CnnModel::new(Network::from_params(arch, params)?, class_labels)
}

pub fn save_model(model: &CnnModel, path: &Path) -> Result<(), CnnError> {
    std::fs::write(path, encode_model(model)).map_err(|source| CnnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<CnnModel, CnnError> {
    let bytes = std::fs::read(path).map_err(|source| CnnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}
