//! Sparse symmetric real density matrices.
//!
//! Only the upper triangle (`m <= n`) is stored; a stored `(m, n)` also
//! serves `(n, m)`. The same type carries exact, sampled and truncated
//! matrices.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Basis, MAX_DENSE_SITES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Exact,
    Dmqmc,
    Truncated,
}

/// One stored upper-triangle element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub m: u32,
    pub n: u32,
    pub value: f64,
}

impl Entry {
    #[inline]
    pub fn key(&self) -> u64 {
        pair_key(self.m, self.n)
    }

    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.m == self.n
    }

    /// Number of ordered pairs this stored element stands for.
    #[inline]
    pub fn multiplicity(&self) -> usize {
        if self.is_diagonal() {
            1
        } else {
            2
        }
    }
}

/// Packs an unordered pair into a sortable key with the smaller index first.
#[inline]
pub fn pair_key(m: u32, n: u32) -> u64 {
    let (a, b) = if m <= n { (m, n) } else { (n, m) };
    ((a as u64) << 32) | b as u64
}

#[inline]
pub fn unpack_key(key: u64) -> (u32, u32) {
    ((key >> 32) as u32, key as u32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    l: usize,
    basis: Basis,
    source: Source,
    entries: Vec<Entry>,
}

impl DensityMatrix {
    /// Builds a matrix from arbitrary-order entries. Pairs are folded into
    /// the upper triangle; duplicate keys are rejected.
    pub fn from_entries(l: usize, basis: Basis, source: Source, entries: Vec<Entry>) -> Result<Self> {
        let dim = 1u64 << l;
        let mut entries: Vec<Entry> = entries
            .into_iter()
            .map(|e| {
                let (m, n) = if e.m <= e.n { (e.m, e.n) } else { (e.n, e.m) };
                Entry { m, n, value: e.value }
            })
            .collect();
        entries.sort_unstable_by_key(Entry::key);
        for w in entries.windows(2) {
            if w[0].key() == w[1].key() {
                return Err(Error::Contract(format!(
                    "duplicate density-matrix element ({}, {})",
                    w[0].m, w[0].n
                )));
            }
        }
        if let Some(e) = entries.iter().find(|e| e.n as u64 >= dim) {
            return Err(Error::Contract(format!(
                "element ({}, {}) outside the {l}-site Hilbert space",
                e.m, e.n
            )));
        }
        Ok(DensityMatrix { l, basis, source, entries })
    }

    /// Builds from a dense symmetric matrix, keeping `|value| >= threshold`.
    pub fn from_dense(mat: &Mat<f64>, l: usize, basis: Basis, source: Source, threshold: f64) -> Self {
        let dim = mat.nrows();
        let mut entries = Vec::new();
        for m in 0..dim {
            for n in m..dim {
                let v = mat[(m, n)];
                if v.abs() >= threshold && v != 0.0 {
                    entries.push(Entry { m: m as u32, n: n as u32, value: v });
                }
            }
        }
        DensityMatrix { l, basis, source, entries }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn dim(&self) -> usize {
        1usize << self.l
    }

    /// Stored upper-triangle entries sorted by key.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    /// Number of stored (upper-triangle) entries.
    pub fn stored_len(&self) -> usize {
        self.entries.len()
    }

    /// Number of nonzero ordered pairs `(m, n)`.
    pub fn ordered_len(&self) -> usize {
        self.entries.iter().map(Entry::multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Symmetric read: `rho[m][n] == rho[n][m]`; missing elements are zero.
    pub fn get(&self, m: u32, n: u32) -> f64 {
        let key = pair_key(m, n);
        match self.entries.binary_search_by_key(&key, Entry::key) {
            Ok(i) => self.entries[i].value,
            Err(_) => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries.iter().filter(|e| e.is_diagonal()).map(|e| e.value).sum()
    }

    /// Squared full-matrix Frobenius norm (off-diagonals counted twice).
    pub fn frobenius_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.multiplicity() as f64 * e.value * e.value)
            .sum()
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    /// Divides by the trace.
    pub fn normalized(mut self) -> Result<Self> {
        let tr = self.trace();
        if tr.abs() < 1e-300 {
            return Err(Error::UndefinedNormalization("density matrix has zero trace".into()));
        }
        for e in &mut self.entries {
            e.value /= tr;
        }
        Ok(self)
    }

    /// Dense symmetric materialization; guarded to `L <= 12`.
    pub fn to_dense(&self) -> Result<Mat<f64>> {
        if self.l > MAX_DENSE_SITES {
            return Err(Error::Capacity(format!(
                "dense density matrix limited to L <= {MAX_DENSE_SITES}, got L = {}",
                self.l
            )));
        }
        let dim = self.dim();
        let mut m = Mat::<f64>::zeros(dim, dim);
        for e in &self.entries {
            m[(e.m as usize, e.n as usize)] = e.value;
            m[(e.n as usize, e.m as usize)] = e.value;
        }
        Ok(m)
    }

    /// Keeps only the entries accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&Entry) -> bool) -> DensityMatrix {
        DensityMatrix {
            l: self.l,
            basis: self.basis,
            source: self.source,
            entries: self.entries.iter().copied().filter(|e| keep(e)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_read_and_folding() {
        let rho = DensityMatrix::from_entries(
            2,
            Basis::Z,
            Source::Exact,
            vec![
                Entry { m: 3, n: 1, value: 0.25 },
                Entry { m: 0, n: 0, value: 0.5 },
                Entry { m: 1, n: 1, value: 0.5 },
            ],
        )
        .unwrap();
        assert_eq!(rho.get(1, 3), 0.25);
        assert_eq!(rho.get(3, 1), 0.25);
        assert_eq!(rho.get(2, 2), 0.0);
        assert_eq!(rho.trace(), 1.0);
        assert_eq!(rho.ordered_len(), 4);
        assert!((rho.frobenius_sq() - (0.25 + 0.25 + 2.0 * 0.0625)).abs() < 1e-15);
        let dense = rho.to_dense().unwrap();
        assert_eq!(dense[(3, 1)], 0.25);
    }

    #[test]
    fn duplicates_and_range_are_rejected() {
        let dup = vec![Entry { m: 0, n: 1, value: 1.0 }, Entry { m: 1, n: 0, value: 2.0 }];
        assert!(DensityMatrix::from_entries(2, Basis::Z, Source::Exact, dup).is_err());
        let out = vec![Entry { m: 0, n: 4, value: 1.0 }];
        assert!(DensityMatrix::from_entries(2, Basis::Z, Source::Exact, out).is_err());
    }

    #[test]
    fn pair_key_roundtrip() {
        assert_eq!(unpack_key(pair_key(7, 3)), (3, 7));
        assert!(pair_key(0, 5) < pair_key(1, 1));
    }
}
