use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 5] = b"GPSC1";
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Eigenpairs of a kernel matrix, eigenvalues descending.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// U′z.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(z)
    }

    /// max_i ‖Σu_i − λ_i u_i‖ / ‖Σ‖_F.
    pub fn residual(&self, sigma: &DMatrix<f64>) -> f64 {
        let norm = sigma.norm().max(f64::MIN_POSITIVE);
        (0..self.n())
            .map(|i| {
                let u = self.vectors.column(i);
                (sigma * u - u * self.values[i]).norm()
            })
            .fold(0.0, f64::max)
            / norm
    }
}

/// Symmetric eigendecomposition, sorted descending and clamped to [0, N].
pub fn decompose(sigma: &DMatrix<f64>) -> Result<Spectrum> {
    let n = sigma.nrows();
    if n == 0 || sigma.ncols() != n {
        return Err(Error::Dimension { expected: n, got: sigma.ncols() });
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix".into()));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let raw = Spectrum { values, vectors };
    let res = raw.residual(sigma);
    if res > EIGEN_RESIDUAL_TOL {
        return Err(Error::LinearAlgebra(format!("eigen residual {res:e} above tolerance")));
    }
    let cap = n as f64;
    Ok(Spectrum { values: raw.values.iter().map(|v| v.clamp(0.0, cap)).collect(), vectors: raw.vectors })
}

/// Spectra keyed by grid index. Reads are concurrent; inserts take the write lock.
#[derive(Debug, Default)]
pub struct SpectralCache {
    entries: RwLock<HashMap<i64, Arc<Spectrum>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl SpectralCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn hit_rate(&self) -> f64 {
        let (h, m) = (self.hits(), self.misses());
        if h + m == 0 {
            0.0
        } else {
            h as f64 / (h + m) as f64
        }
    }

    pub fn get(&self, key: i64) -> Option<Arc<Spectrum>> {
        self.entries.read().ok()?.get(&key).cloned()
    }

    pub fn get_or_insert_with<F>(&self, key: i64, f: F) -> Result<Arc<Spectrum>>
    where
        F: FnOnce() -> Result<Spectrum>,
    {
        if let Some(s) = self.get(key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(s);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let s = Arc::new(f()?);
        let mut w = self.entries.write().map_err(|_| Error::Cache("cache lock poisoned".into()))?;
        // Entries are immutable once present.
        Ok(w.entry(key).or_insert(s).clone())
    }

    /// Magic, u64 N, u64 count, then per entry an i64 key, N eigenvalues and N² eigenvector entries (column-major).
    pub fn save(&self, path: &Path) -> Result<()> {
        let map = self.entries.read().map_err(|_| Error::Cache("cache lock poisoned".into()))?;
        let n = map.values().next().map(|s| s.n()).unwrap_or(0);
        let mut keys: Vec<i64> = map.keys().copied().collect();
        keys.sort_unstable();
        let mut buf = Vec::with_capacity(21 + keys.len() * (8 + 8 * n * (n + 1)));
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        buf.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for k in keys {
            let s = &map[&k];
            if s.n() != n {
                return Err(Error::Cache("entries of mixed dimension".into()));
            }
            buf.extend_from_slice(&k.to_le_bytes());
            for v in s.values.iter().chain(s.vectors.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        f.write_all(&buf).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(5)? != CACHE_MAGIC {
            return Err(Error::Cache("bad magic, expected GPSC1".into()));
        }
        let n = cur.u64()? as usize;
        let count = cur.u64()? as usize;
        let mut map = HashMap::with_capacity(count);
        for _ in 0..count {
            let key = cur.u64()? as i64;
            let values: Vec<f64> = (0..n).map(|_| cur.f64()).collect::<Result<_>>()?;
            let vecs: Vec<f64> = (0..n * n).map(|_| cur.f64()).collect::<Result<_>>()?;
            if values.iter().chain(&vecs).any(|v| !v.is_finite()) {
                return Err(Error::Cache(format!("non-finite entry under key {key}")));
            }
            map.insert(key, Arc::new(Spectrum { values, vectors: DMatrix::from_vec(n, n, vecs) }));
        }
        if cur.pos != bytes.len() {
            return Err(Error::Cache("trailing bytes after last entry".into()));
        }
        Ok(Self { entries: RwLock::new(map), hits: AtomicU64::new(0), misses: AtomicU64::new(0) })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Cache("truncated cache file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
