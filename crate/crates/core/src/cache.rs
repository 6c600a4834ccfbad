//! On-disk cache for basic radiation and base states.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "PHTXCACH" | version u32 | kind u8 | parameter hash [32]
//! | array count u32 | (len u64, len × f64)* | SHA-256 of everything before
//! ```
//!
//! A file whose version, kind, hash or checksum disagrees is ignored with a
//! warning and the value is recomputed.

use crate::basestate::{BaseState, SuspensionParams};
use crate::error::{Error, Result};
use crate::numerics::Grid1D;
use crate::radiative::{BasicRadiation, RadiationParams};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PHTXCACH";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Radiation = 1,
    BaseState = 2,
}

pub type Key = [u8; 32];

fn hash_fields(tag: &str, fields: &[f64], sizes: &[usize]) -> Key {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(FORMAT_VERSION.to_le_bytes());
    for v in fields {
        h.update(v.to_bits().to_le_bytes());
    }
    for s in sizes {
        h.update((*s as u64).to_le_bytes());
    }
    h.finalize().into()
}

pub fn radiation_key(p: &RadiationParams, n_tau: usize) -> Key {
    hash_fields("radiation", &[p.omega, p.a1, p.b, p.tau_h, p.cos_theta0], &[n_tau])
}

pub fn base_state_key(p: &SuspensionParams, n_tau: usize, n_z: usize) -> Key {
    let c = &p.curve;
    hash_fields(
        "base-state",
        &[
            p.sc,
            p.vc,
            p.tau_h,
            p.omega,
            p.a1,
            p.b,
            p.theta_i_deg,
            p.n0,
            c.upsilon,
            c.amplitudes.0,
            c.amplitudes.1,
            c.frequencies.0,
            c.frequencies.1,
            c.pivot,
            c.gc,
        ],
        &[n_tau, n_z],
    )
}

pub fn hex(key: &Key) -> String {
    key.iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(kind: Kind, key: &Key, arrays: &[&[f64]]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(kind as u8);
    buf.extend_from_slice(key);
    buf.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for a in arrays {
        buf.extend_from_slice(&(a.len() as u64).to_le_bytes());
        for v in *a {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest: [u8; 32] = Sha256::digest(&buf).into();
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Cache("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode(bytes: &[u8], kind: Kind, key: &Key) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < 32 {
        return Err(Error::Cache("truncated file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Cache("not a cache file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    if r.take(1)?[0] != kind as u8 {
        return Err(Error::Cache("wrong record kind".into()));
    }
    if r.take(32)? != key {
        return Err(Error::Cache("parameter hash mismatch".into()));
    }
    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = usize::try_from(r.u64()?).map_err(|_| Error::Cache("array too long".into()))?;
        let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Cache("array too long".into()))?)?;
        arrays.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
    }
    if r.pos != body.len() {
        return Err(Error::Cache("trailing bytes".into()));
    }
    Ok(arrays)
}

fn expect_arrays(arrays: &[Vec<f64>], n: usize) -> Result<()> {
    if arrays.len() != n {
        return Err(Error::Cache(format!("expected {n} arrays, found {}", arrays.len())));
    }
    Ok(())
}

pub fn store_radiation(path: &Path, rad: &BasicRadiation, key: &Key) -> Result<()> {
    let meta = [rad.residual, rad.iterations as f64];
    let bytes = encode(
        Kind::Radiation,
        key,
        &[rad.tau_grid.points(), &rad.g, &rad.q, &rad.g_coll, &rad.q_coll, &meta],
    );
    write_atomic(path, &bytes)
}

pub fn load_radiation(path: &Path, params: &RadiationParams, key: &Key) -> Result<BasicRadiation> {
    let a = decode(&std::fs::read(path)?, Kind::Radiation, key)?;
    expect_arrays(&a, 6)?;
    let n = a[0].len();
    if a[1..5].iter().any(|v| v.len() != n) || a[5].len() != 2 {
        return Err(Error::Cache("inconsistent array lengths".into()));
    }
    let mut it = a.into_iter();
    let tau = it.next().expect("checked");
    let (g, q, g_coll, q_coll) = (it.next().expect("checked"), it.next().expect("checked"), it.next().expect("checked"), it.next().expect("checked"));
    let meta = it.next().expect("checked");
    Ok(BasicRadiation {
        params: *params,
        tau_grid: Grid1D::from_points(tau).map_err(|e| Error::Cache(e.to_string()))?,
        g,
        q,
        g_coll,
        q_coll,
        residual: meta[0],
        iterations: meta[1] as usize,
    })
}

pub fn store_base_state(path: &Path, bs: &BaseState, key: &Key) -> Result<()> {
    let meta = [bs.cos_theta0];
    let bytes = encode(
        Kind::BaseState,
        key,
        &[bs.z(), &bs.n_s, &bs.tau_of_z, &bs.g_s, &bs.q_s, &bs.g_s_coll, &bs.m_s, &bs.dmdg, &meta],
    );
    write_atomic(path, &bytes)
}

pub fn load_base_state(path: &Path, params: &SuspensionParams, key: &Key) -> Result<BaseState> {
    let a = decode(&std::fs::read(path)?, Kind::BaseState, key)?;
    expect_arrays(&a, 9)?;
    let n = a[0].len();
    if a[1..8].iter().any(|v| v.len() != n) || a[8].len() != 1 {
        return Err(Error::Cache("inconsistent array lengths".into()));
    }
    let mut it = a.into_iter();
    let mut next = || it.next().expect("checked");
    let z = next();
    Ok(BaseState {
        params: *params,
        z_grid: Grid1D::from_points(z).map_err(|e| Error::Cache(e.to_string()))?,
        n_s: next(),
        tau_of_z: next(),
        g_s: next(),
        q_s: next(),
        g_s_coll: next(),
        m_s: next(),
        dmdg: next(),
        cos_theta0: next()[0],
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Directory-backed cache; a disabled cache never touches the filesystem.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    fn path(&self, stem: &str, key: &Key) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{stem}-{}.bin", &hex(key)[..16])))
    }

    fn fetch<T>(
        &self,
        stem: &str,
        key: &Key,
        load: impl FnOnce(&Path) -> Result<T>,
        store: impl FnOnce(&Path, &T) -> Result<()>,
        compute: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        let Some(path) = self.path(stem, key) else {
            return compute();
        };
        if path.exists() {
            match load(&path) {
                Ok(v) => {
                    log::debug!("cache hit {}", path.display());
                    return Ok(v);
                }
                Err(e) => log::warn!("ignoring cache file {}: {e}; recomputing", path.display()),
            }
        }
        let v = compute()?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        if let Err(e) = store(&path, &v) {
            log::warn!("could not write cache file {}: {e}", path.display());
        }
        Ok(v)
    }

    pub fn radiation(
        &self,
        params: &RadiationParams,
        n_tau: usize,
        compute: impl FnOnce() -> Result<BasicRadiation>,
    ) -> Result<BasicRadiation> {
        let key = radiation_key(params, n_tau);
        self.fetch(
            "radiation",
            &key,
            |p| load_radiation(p, params, &key),
            |p, v| store_radiation(p, v, &key),
            compute,
        )
    }

    pub fn base_state(
        &self,
        params: &SuspensionParams,
        n_tau: usize,
        n_z: usize,
        compute: impl FnOnce() -> Result<BaseState>,
    ) -> Result<BaseState> {
        let key = base_state_key(params, n_tau, n_z);
        self.fetch(
            "base-state",
            &key,
            |p| load_base_state(p, params, &key),
            |p, v| store_base_state(p, v, &key),
            compute,
        )
    }
}
