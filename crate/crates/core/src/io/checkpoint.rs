//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//! `"PDCK"`, u32 version, model dimensions, block table (name, rows, cols),
//! block data as f64 in declared order, optional optimizer moments, and a
//! trailing FNV-1a 64 checksum of every preceding byte.

use std::path::Path;
use std::sync::Arc;

use super::files::write_atomic;
use super::hash::fnv1a64;
use crate::autodiff::{Layout, ParamVector};
use crate::error::{Error, Result};
use crate::fields::model::{Model, ModelConfig};
use crate::fields::sdc::SdcMode;
use crate::training::AdamState;

pub const MAGIC: &[u8; 4] = b"PDCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamVector,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    /// Rebuild the model, checking that the stored layout matches.
    pub fn model(&self) -> Result<Model> {
        Model::with_layout(self.config.clone(), self.params.layout())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        let c = &self.config;
        for v in [
            c.latent_dim,
            c.prior_dim,
            c.parts,
            c.shapes,
            c.template_width,
            c.template_depth,
            c.deform_width,
            c.deform_depth,
            c.hyper_hidden,
        ] {
            b.extend_from_slice(&(v as u64).to_le_bytes());
        }
        b.extend_from_slice(&c.omega.to_le_bytes());
        b.extend_from_slice(&c.code_std.to_le_bytes());
        b.push(match c.sdc {
            SdcMode::Soft => 0,
            SdcMode::Hard => 1,
        });
        let layout = self.params.layout();
        b.extend_from_slice(&(layout.blocks().len() as u64).to_le_bytes());
        for blk in layout.blocks() {
            b.extend_from_slice(&(blk.name.len() as u64).to_le_bytes());
            b.extend_from_slice(blk.name.as_bytes());
            b.extend_from_slice(&(blk.rows as u64).to_le_bytes());
            b.extend_from_slice(&(blk.cols as u64).to_le_bytes());
        }
        let floats = |b: &mut Vec<u8>, xs: &[f64]| xs.iter().for_each(|x| b.extend_from_slice(&x.to_le_bytes()));
        floats(&mut b, self.params.data());
        match &self.adam {
            None => b.push(0),
            Some(a) => {
                b.push(1);
                b.extend_from_slice(&a.step.to_le_bytes());
                floats(&mut b, &a.m);
                floats(&mut b, &a.v);
            }
        }
        let sum = fnv1a64(b.iter().copied());
        b.extend_from_slice(&sum.to_le_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 + MAGIC.len() {
            return Err(Error::Checkpoint("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if fnv1a64(body.iter().copied()) != stored {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 9];
        for d in &mut dims {
            *d = r.usize()?;
        }
        let omega = r.f64()?;
        let code_std = r.f64()?;
        let sdc = match r.take(1)?[0] {
            0 => SdcMode::Soft,
            1 => SdcMode::Hard,
            m => return Err(Error::Checkpoint(format!("unknown sdc mode tag {m}"))),
        };
        let config = ModelConfig {
            latent_dim: dims[0],
            prior_dim: dims[1],
            parts: dims[2],
            shapes: dims[3],
            template_width: dims[4],
            template_depth: dims[5],
            deform_width: dims[6],
            deform_depth: dims[7],
            hyper_hidden: dims[8],
            omega,
            sdc,
            code_std,
        };
        let nblocks = r.usize()?;
        let mut layout = Layout::new();
        for _ in 0..nblocks {
            let len = r.usize()?;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?
                .to_string();
            let rows = r.usize()?;
            let cols = r.usize()?;
            layout.push(name, rows, cols);
        }
        let n = layout.total();
        let data = r.floats(n)?;
        let params = ParamVector::from_vec(Arc::new(layout), data).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let adam = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = r.usize()? as u64;
                let m = r.floats(n)?;
                let v = r.floats(n)?;
                Some(AdamState { m, v, step })
            }
            t => return Err(Error::Checkpoint(format!("unknown optimizer tag {t}"))),
        };
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes before checksum".into()));
        }
        let ck = Self { config, params, adam };
        ck.model().map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint("size out of range".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size out of range".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::model::tests::tiny_config;

    fn checkpoint(with_adam: bool) -> Checkpoint {
        let m = Model::new(tiny_config()).unwrap();
        let params = m.init(5);
        let adam = with_adam.then(|| {
            let mut a = AdamState::new(params.len());
            a.step = 17;
            a.m.iter_mut().enumerate().for_each(|(i, x)| *x = i as f64 * 1e-3);
            a.v.iter_mut().enumerate().for_each(|(i, x)| *x = (i as f64).sqrt());
            a
        });
        Checkpoint {
            config: m.config.clone(),
            params,
            adam,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for with_adam in [false, true] {
            let c = checkpoint(with_adam);
            let bytes = c.to_bytes();
            assert_eq!(&bytes[..4], MAGIC);
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back.params.checksum(), c.params.checksum());
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back, c);
        }
    }

    #[test]
    fn corruption_is_refused() {
        let bytes = checkpoint(true).to_bytes();
        for i in [0, 5, 40, bytes.len() / 2, bytes.len() - 1] {
            let mut b = bytes.clone();
            b[i] ^= 0x10;
            assert!(matches!(Checkpoint::from_bytes(&b), Err(Error::Checkpoint(_))), "byte {i}");
        }
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
        assert!(matches!(Checkpoint::from_bytes(b"PD"), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pdck");
        let c = checkpoint(false);
        c.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), c);
    }
}
