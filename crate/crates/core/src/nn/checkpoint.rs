//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size      field
//! 0       8         magic b"DNFRCKPT"
//! 8       4         format version (u32) = 1
//! 12      4         number of layer dims n (u32)
//! 16      8*n       layer dims (u64 each)
//! ...               per layer l: weight l row-major (f64 each), then bias l (f64 each)
//! ...     1         optimizer flag (u8): 0 = absent, 1 = present
//! if present:
//!         8         step count (u64)
//!         8*3       beta1, beta2, epsilon (f64)
//!         ...       first moments in parameter order, then second moments (f64 each)
//! ```
//!
//! Parameters are always stored as f64 regardless of the in-memory scalar type.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::adam::AdamState;
use crate::nn::model::{MlpModel, ParamBuffers};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"DNFRCKPT";
pub const VERSION: u32 = 1;

fn write_buffers<T: Scalar, W: Write>(w: &mut W, buf: &ParamBuffers<T>) -> Result<()> {
    for v in buf.tensors().flatten() {
        w.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

pub fn save<T: Scalar, W: Write>(w: &mut W, model: &MlpModel<T>, optimizer: Option<&AdamState<T>>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let dims = model.layer_dims();
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    write_buffers(w, model.params())?;
    match optimizer {
        None => w.write_all(&[0u8])?,
        Some(state) => {
            w.write_all(&[1u8])?;
            w.write_all(&state.step_count.to_le_bytes())?;
            for v in [state.beta1, state.beta2, state.epsilon] {
                w.write_all(&v.to_f64_lossy().to_le_bytes())?;
            }
            write_buffers(w, &state.first_moment)?;
            write_buffers(w, &state.second_moment)?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse_byte(self.pos, format!("truncated checkpoint while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let at = self.pos;
        let v = f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::parse_byte(at, format!("non-finite value in {what}")));
        }
        Ok(v)
    }

    fn fill<T: Scalar>(&mut self, buf: &mut ParamBuffers<T>, what: &str) -> Result<()> {
        for t in buf.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::lit(self.f64(what)?);
            }
        }
        Ok(())
    }
}

pub type Checkpoint<T> = (MlpModel<T>, Option<AdamState<T>>);

pub fn load<T: Scalar, R: Read>(r: &mut R) -> Result<Checkpoint<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8, "magic")? != MAGIC {
        return Err(Error::parse_byte(0, format!("bad magic, expected {:?}", String::from_utf8_lossy(MAGIC))));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::parse_byte(8, format!("unsupported checkpoint version {version}, expected {VERSION}")));
    }
    let n = cur.u32("layer count")? as usize;
    if !(2..=1024).contains(&n) {
        return Err(Error::parse_byte(12, format!("implausible layer-dim count {n}")));
    }
    let dims = (0..n).map(|_| cur.u64("layer dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let mut params = ParamBuffers::zeros(&dims);
    cur.fill(&mut params, "parameters")?;
    let model = MlpModel::from_params(&dims, params)?;

    let flag_at = cur.pos;
    let optimizer = match cur.take(1, "optimizer flag")?[0] {
        0 => None,
        1 => {
            let step_count = cur.u64("step count")?;
            let beta1 = T::lit(cur.f64("beta1")?);
            let beta2 = T::lit(cur.f64("beta2")?);
            let epsilon = T::lit(cur.f64("epsilon")?);
            let mut state = AdamState::with_hyperparameters(&dims, beta1, beta2, epsilon);
            state.step_count = step_count;
            cur.fill(&mut state.first_moment, "first moments")?;
            cur.fill(&mut state.second_moment, "second moments")?;
            Some(state)
        }
        other => return Err(Error::parse_byte(flag_at, format!("optimizer flag must be 0 or 1, got {other}"))),
    };
    if cur.pos != bytes.len() {
        return Err(Error::parse_byte(cur.pos, "trailing bytes after checkpoint"));
    }
    Ok((model, optimizer))
}
