//! Binary checkpoint container.
//!
//! Layout (all integers u64 little-endian, floats f64 little-endian):
//!
//! ```text
//! "ACGRX1\n"  count
//! repeated count times:
//!     name_len  name_bytes  rank  dims[rank]  data[product(dims)]
//! ```
//!
//! Parameters are stored under their own names, Adam moments under
//! `<name>.m1` / `<name>.m2`, and the step counter as the rank-0 tensor `t`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

pub const MAGIC: &[u8; 7] = b"ACGRX1\n";
const STEP_KEY: &str = "t";

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_u64(buf, name.len() as u64);
    buf.extend_from_slice(name.as_bytes());
    put_u64(buf, t.rank() as u64);
    for &d in t.shape() {
        put_u64(buf, d as u64);
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(store: &ParamStore) -> Vec<u8> {
    let (params, m1, m2, t) = store.parts();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u64(&mut buf, (3 * params.len() + 1) as u64);
    for (name, p) in params {
        put_tensor(&mut buf, name, p);
        put_tensor(&mut buf, &format!("{name}.m1"), &m1[name]);
        put_tensor(&mut buf, &format!("{name}.m2"), &m2[name]);
    }
    put_tensor(&mut buf, STEP_KEY, &Tensor::scalar(t as f64));
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let count = r.usize()?;
    let mut params = BTreeMap::new();
    let mut m1 = BTreeMap::new();
    let mut m2 = BTreeMap::new();
    let mut step = None;
    for _ in 0..count {
        let name_len = r.usize()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?
            .to_string();
        let rank = r.usize()?;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;

        if name == STEP_KEY {
            step = Some(tensor.data()[0] as u64);
        } else if let Some(base) = name.strip_suffix(".m1") {
            m1.insert(base.to_string(), tensor);
        } else if let Some(base) = name.strip_suffix(".m2") {
            m2.insert(base.to_string(), tensor);
        } else if params.insert(name.clone(), tensor).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let step = step.ok_or_else(|| Error::Checkpoint("missing step counter".into()))?;
    ParamStore::from_parts(params, m1, m2, step)
}

impl ParamStore {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, to_bytes(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        from_bytes(&fs::read(path)?)
    }
}
