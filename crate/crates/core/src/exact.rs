//! Exact-diagonalization oracle: spectra, thermal density matrices, exact
//! Heisenberg dynamics and the thermal diagonal ensemble.
//!
//! Spectra are cached in memory (bounded) and optionally on disk. Cache hits
//! return the very same numbers as a fresh diagonalization: the disk format
//! stores raw little-endian `f64`s.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::density::{DensityMatrix, Source};
use crate::error::{Error, Result};
use crate::model::{hadamard_transform_in_place, hamiltonian_operator, Basis, ModelParams, Observable, MAX_DENSE_SITES};
use crate::series::{SeriesMeta, TimeSeries};

pub use crate::density::Entry;

/// Entries of a thermal density matrix below this magnitude are not stored.
pub const DEFAULT_STORE_THRESHOLD: f64 = 1e-16;

/// Eigenvalues closer than this are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-10;

pub(crate) fn par() -> Par {
    faer::get_global_parallelism()
}

/// Full eigendecomposition of one Hamiltonian, energies ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    params: ModelParams,
    energies: Vec<f64>,
    vectors: Mat<f64>,
}

impl Spectrum {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns.
    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        self.vectors.col_as_slice(k)
    }

    /// Boltzmann weights `exp(-beta (E_k - E_min)) / Z`.
    pub fn boltzmann_weights(&self, beta: f64) -> Result<Vec<f64>> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("inverse temperature must be finite and >= 0, got {beta}")));
        }
        let e_min = self.energies[0];
        let mut w: Vec<f64> = self.energies.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
        let z: f64 = w.iter().sum();
        for x in &mut w {
            *x /= z;
        }
        Ok(w)
    }

    /// Index ranges of degenerate levels (within [`DEGENERACY_TOL`]).
    pub fn degenerate_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=self.energies.len() {
            if k == self.energies.len() || self.energies[k] - self.energies[k - 1] > DEGENERACY_TOL {
                blocks.push(start..k);
                start = k;
            }
        }
        blocks
    }

    fn in_basis(&self, basis: Basis) -> Spectrum {
        if basis == self.params.basis {
            return self.clone();
        }
        let mut vectors = self.vectors.clone();
        for k in 0..vectors.ncols() {
            hadamard_transform_in_place(vectors.col_as_slice_mut(k));
        }
        Spectrum { params: self.params.with_basis(basis), energies: self.energies.clone(), vectors }
    }

    fn bytes(l: usize) -> usize {
        let dim = 1usize << l;
        8 * dim * (dim + 1)
    }
}

fn diagonalize_uncached(params: &ModelParams) -> Result<Spectrum> {
    let h = hamiltonian_operator(params).to_dense()?;
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let dim = h.nrows();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let energies = order.iter().map(|&k| s[k]).collect();
    let vectors = Mat::from_fn(dim, dim, |i, j| u[(i, order[j])]);
    Ok(Spectrum { params: *params, energies, vectors })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct CacheKey {
    l: usize,
    bits: [u64; 4],
    basis: Basis,
}

impl CacheKey {
    fn of(p: &ModelParams) -> Self {
        CacheKey { l: p.l, bits: [p.j.to_bits(), p.g.to_bits(), p.h.to_bits(), p.h_s.to_bits()], basis: p.basis }
    }
}

type Slot = Arc<OnceLock<Arc<Spectrum>>>;

struct SpectrumCache {
    slots: HashMap<CacheKey, Slot>,
    order: VecDeque<CacheKey>,
    budget_bytes: usize,
    disk_dir: Option<PathBuf>,
}

fn cache() -> &'static Mutex<SpectrumCache> {
    static CACHE: OnceLock<Mutex<SpectrumCache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(SpectrumCache {
            slots: HashMap::new(),
            order: VecDeque::new(),
            budget_bytes: 1 << 30,
            disk_dir: None,
        })
    })
}

/// Upper bound on memory held by cached spectra. Spectra still referenced
/// elsewhere stay alive after eviction.
pub fn set_cache_budget(bytes: usize) {
    cache().lock().unwrap().budget_bytes = bytes;
}

/// Enables the on-disk spectrum cache in `dir` (or disables it with `None`).
pub fn set_disk_cache_dir(dir: Option<PathBuf>) {
    cache().lock().unwrap().disk_dir = dir;
}

/// Drops every in-memory cached spectrum.
pub fn clear_cache() {
    let mut c = cache().lock().unwrap();
    c.slots.clear();
    c.order.clear();
}

fn slot_for(key: CacheKey) -> (Slot, Option<PathBuf>) {
    let mut c = cache().lock().unwrap();
    if let Some(slot) = c.slots.get(&key) {
        return (slot.clone(), c.disk_dir.clone());
    }
    let need = Spectrum::bytes(key.l);
    let mut used: usize = c.order.iter().map(|k| Spectrum::bytes(k.l)).sum();
    while used + need > c.budget_bytes {
        match c.order.pop_front() {
            Some(old) => {
                c.slots.remove(&old);
                used -= Spectrum::bytes(old.l);
            }
            None => break,
        }
    }
    let slot: Slot = Arc::new(OnceLock::new());
    if need <= c.budget_bytes {
        c.slots.insert(key, slot.clone());
        c.order.push_back(key);
    }
    (slot, c.disk_dir.clone())
}

/// Full real-symmetric eigendecomposition of the Hamiltonian in
/// `params.basis`; guarded to `L <= 12`.
pub fn diagonalize(params: &ModelParams) -> Result<Arc<Spectrum>> {
    params.validate()?;
    if params.l > MAX_DENSE_SITES {
        return Err(Error::Capacity(format!(
            "exact diagonalization limited to L <= {MAX_DENSE_SITES}, got L = {}; use Krylov propagation instead",
            params.l
        )));
    }
    let key = CacheKey::of(params);
    let (slot, disk) = slot_for(key);
    if let Some(s) = slot.get() {
        return Ok(s.clone());
    }
    let spectrum = if params.basis == Basis::X {
        diagonalize(&params.with_basis(Basis::Z))?.in_basis(Basis::X)
    } else {
        match disk.as_ref().and_then(|d| disk::load(d, params).ok().flatten()) {
            Some(s) => s,
            None => {
                let s = diagonalize_uncached(params)?;
                if let Some(d) = &disk {
                    if let Err(e) = disk::store(d, &s) {
                        log::warn!("could not write spectrum cache: {e}");
                    }
                }
                s
            }
        }
    };
    Ok(slot.get_or_init(|| Arc::new(spectrum)).clone())
}

mod disk {
    use super::*;

    const MAGIC: &[u8; 8] = b"TQSPEC01";

    fn file_name(p: &ModelParams) -> String {
        // FNV-1a over the parameter bit patterns.
        let mut h: u64 = 0xcbf29ce484222325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        feed(&(p.l as u64).to_le_bytes());
        for v in [p.j, p.g, p.h, p.h_s] {
            feed(&v.to_le_bytes());
        }
        format!("spectrum-{h:016x}.bin")
    }

    fn header(p: &ModelParams) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend((p.l as u64).to_le_bytes());
        for v in [p.j, p.g, p.h, p.h_s] {
            out.extend(v.to_le_bytes());
        }
        out
    }

    pub(super) fn store(dir: &std::path::Path, s: &Spectrum) -> Result<()> {
        fs::create_dir_all(dir)?;
        let path = dir.join(file_name(&s.params));
        let tmp = path.with_extension("tmp");
        let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(&header(&s.params))?;
        for e in &s.energies {
            f.write_all(&e.to_le_bytes())?;
        }
        for k in 0..s.dim() {
            for v in s.vectors.col_as_slice(k) {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        drop(f);
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub(super) fn load(dir: &std::path::Path, p: &ModelParams) -> Result<Option<Spectrum>> {
        let path = dir.join(file_name(p));
        if !path.exists() {
            return Ok(None);
        }
        let mut bytes = Vec::new();
        fs::File::open(&path)?.read_to_end(&mut bytes)?;
        let head = header(p);
        let dim = p.dim();
        if bytes.len() != head.len() + 8 * dim * (dim + 1) || bytes[..head.len()] != head[..] {
            log::warn!("ignoring mismatched spectrum cache file {}", path.display());
            return Ok(None);
        }
        let mut vals = bytes[head.len()..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let energies: Vec<f64> = vals.by_ref().take(dim).collect();
        let data: Vec<f64> = vals.collect();
        let vectors = MatRef::from_column_major_slice(&data, dim, dim).to_owned();
        Ok(Some(Spectrum { params: *p, energies, vectors }))
    }
}

/// Dense thermal state `exp(-beta H) / Z` in the basis of `spectrum`.
pub fn thermal_dense(spectrum: &Spectrum, beta: f64) -> Result<Mat<f64>> {
    let w = spectrum.boltzmann_weights(beta)?;
    let keep: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 1e-300).collect();
    let dim = spectrum.dim();
    let v = spectrum.vectors();
    let b = Mat::from_fn(dim, keep.len(), |i, j| v[(i, keep[j])] * w[keep[j]].sqrt());
    let mut rho = Mat::<f64>::zeros(dim, dim);
    matmul(rho.as_mut(), Accum::Replace, b.as_ref(), b.transpose(), 1.0, par());
    Ok(rho)
}

/// Normalized thermal density matrix with the default store threshold.
pub fn thermal_density_matrix(params: &ModelParams, beta: f64) -> Result<DensityMatrix> {
    thermal_density_matrix_with_threshold(params, beta, DEFAULT_STORE_THRESHOLD)
}

pub fn thermal_density_matrix_with_threshold(params: &ModelParams, beta: f64, threshold: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("inverse temperature must be >= 0, got {beta}")));
    }
    let spectrum = diagonalize(params)?;
    let rho = thermal_dense(&spectrum, beta)?;
    Ok(DensityMatrix::from_dense(&rho, params.l, params.basis, Source::Exact, threshold))
}

/// Observable in the eigenbasis of `spectrum`: `V^T O V`.
pub fn observable_in_eigenbasis(spectrum: &Spectrum, obs: &Observable) -> Mat<f64> {
    let ov = apply_observable_columns(spectrum, obs);
    let mut out = Mat::<f64>::zeros(spectrum.dim(), spectrum.dim());
    matmul(out.as_mut(), Accum::Replace, spectrum.vectors().transpose(), ov.as_ref(), 1.0, par());
    out
}

fn apply_observable_columns(spectrum: &Spectrum, obs: &Observable) -> Mat<f64> {
    let op = obs.operator(spectrum.params.basis);
    let dim = spectrum.dim();
    let mut ov = Mat::<f64>::zeros(dim, dim);
    for k in 0..dim {
        op.apply_real_into(spectrum.eigenvector(k), ov.col_as_slice_mut(k));
    }
    ov
}

/// Exact `Tr[rho O(t)]` with `O(t) = exp(i H1 t) O exp(-i H1 t)`, built once
/// per (quench, observable) and reusable for many density matrices.
pub struct HeisenbergOracle {
    spectrum: Arc<Spectrum>,
    obs_eig: Mat<f64>,
    obs: Observable,
}

impl HeisenbergOracle {
    pub fn new(quench: &ModelParams, obs: &Observable) -> Result<Self> {
        if obs.l != quench.l {
            return Err(Error::Contract(format!("observable on {} sites, quench on {}", obs.l, quench.l)));
        }
        let spectrum = diagonalize(quench)?;
        let obs_eig = observable_in_eigenbasis(&spectrum, obs);
        Ok(HeisenbergOracle { spectrum, obs_eig, obs: *obs })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn observable(&self) -> &Observable {
        &self.obs
    }

    pub fn expectation(&self, rho: &DensityMatrix, times: &[f64]) -> Result<TimeSeries> {
        let p = self.spectrum.params;
        if rho.l() != p.l {
            return Err(Error::Contract(format!("density matrix on {} sites, quench on {}", rho.l(), p.l)));
        }
        if rho.basis() != p.basis {
            return Err(Error::BasisMismatch(format!(
                "density matrix in the {} basis, quench Hamiltonian in the {} basis",
                rho.basis(),
                p.basis
            )));
        }
        let dim = self.spectrum.dim();
        let v = self.spectrum.vectors();
        let rho_dense = rho.to_dense()?;
        let mut tmp = Mat::<f64>::zeros(dim, dim);
        matmul(tmp.as_mut(), Accum::Replace, rho_dense.as_ref(), v, 1.0, par());
        let mut rho_eig = Mat::<f64>::zeros(dim, dim);
        matmul(rho_eig.as_mut(), Accum::Replace, v.transpose(), tmp.as_ref(), 1.0, par());
        drop(tmp);
        drop(rho_dense);
        let a = Mat::from_fn(dim, dim, |i, j| rho_eig[(i, j)] * self.obs_eig[(i, j)]);
        drop(rho_eig);

        let e = self.spectrum.energies();
        let nt = times.len();
        let c = Mat::from_fn(dim, nt, |k, t| (e[k] * times[t]).cos());
        let s = Mat::from_fn(dim, nt, |k, t| (e[k] * times[t]).sin());
        let mut ac = Mat::<f64>::zeros(dim, nt);
        let mut as_ = Mat::<f64>::zeros(dim, nt);
        matmul(ac.as_mut(), Accum::Replace, a.as_ref(), c.as_ref(), 1.0, par());
        matmul(as_.as_mut(), Accum::Replace, a.as_ref(), s.as_ref(), 1.0, par());
        let values = (0..nt)
            .map(|t| {
                let cc: f64 = c.col_as_slice(t).iter().zip(ac.col_as_slice(t)).map(|(x, y)| x * y).sum();
                let ss: f64 = s.col_as_slice(t).iter().zip(as_.col_as_slice(t)).map(|(x, y)| x * y).sum();
                cc + ss
            })
            .collect();
        let meta = SeriesMeta { source: "exact".into(), w: None, n_w: None, n_sim: None };
        Ok(TimeSeries::new(times.to_vec(), values, meta))
    }
}

/// Exact `<O(t)>_rho` over a time grid.
pub fn heisenberg_expectation(
    rho: &DensityMatrix,
    obs: &Observable,
    quench: &ModelParams,
    times: &[f64],
) -> Result<TimeSeries> {
    if rho.basis() != quench.basis {
        return Err(Error::BasisMismatch(format!(
            "density matrix in the {} basis, quench Hamiltonian in the {} basis",
            rho.basis(),
            quench.basis
        )));
    }
    HeisenbergOracle::new(quench, obs)?.expectation(rho, times)
}

/// Thermal diagonal ensemble: the late-time value of `<O(t)>` after a quench
/// from the thermal state of `h0` to `h1`.
///
/// Degenerate levels of `h1` enter through the trace of the projected block,
/// which does not depend on how the diagonalizer chose the degenerate basis.
pub fn tde_average(h0: &ModelParams, h1: &ModelParams, obs: &Observable, beta: f64) -> Result<f64> {
    if h0.l != h1.l || obs.l != h0.l {
        return Err(Error::Contract("h0, h1 and the observable must share L".into()));
    }
    let s0 = diagonalize(&h0.with_basis(Basis::Z))?;
    let w = s0.boltzmann_weights(beta)?;
    let rows: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 1e-300).collect();
    let v0 = s0.vectors();
    let v0_sig = Mat::from_fn(s0.dim(), rows.len(), |i, j| v0[(i, rows[j])] * w[rows[j]].sqrt());
    drop(s0);
    tde_from_states(v0_sig.as_ref(), h1, obs)
}

/// Diagonal-ensemble value `sum_j Tr[P_j rho P_j O]` for
/// `rho = sum_k |a_k><a_k|`, where `a_k` are the columns of `amplitudes`
/// in the z basis.
pub fn tde_from_states(amplitudes: MatRef<'_, f64>, h1: &ModelParams, obs: &Observable) -> Result<f64> {
    let s1 = diagonalize(&h1.with_basis(Basis::Z))?;
    let dim = s1.dim();
    let mut overlap = Mat::<f64>::zeros(amplitudes.ncols(), dim);
    matmul(overlap.as_mut(), Accum::Replace, amplitudes.transpose(), s1.vectors(), 1.0, par());
    let op = obs.operator(Basis::Z);
    let mut o_col = vec![0.0; dim];
    let mut total = 0.0;
    for block in s1.degenerate_blocks() {
        for l in block.clone() {
            op.apply_real_into(s1.eigenvector(l), &mut o_col);
            for lp in block.clone() {
                let o_ll: f64 = s1.eigenvector(lp).iter().zip(&o_col).map(|(a, b)| a * b).sum();
                if o_ll == 0.0 {
                    continue;
                }
                let g: f64 = (0..overlap.nrows()).map(|k| overlap[(k, l)] * overlap[(k, lp)]).sum();
                total += g * o_ll;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BasisState, ObservableKind};

    fn oracle_params() -> ModelParams {
        ModelParams::new(2, 1.0, 0.0, 0.0, 0.5, Basis::Z).unwrap()
    }

    #[test]
    fn two_site_spectrum() {
        let s = diagonalize(&oracle_params()).unwrap();
        let expected = [-3.0, -1.0, 2.0, 2.0];
        for (e, x) in s.energies().iter().zip(expected) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_chain_rejected() {
        let p = ModelParams { l: 1, j: 1.0, g: 0.0, h: 0.0, h_s: 0.0, basis: Basis::Z };
        assert!(diagonalize(&p).is_err());
        let big = ModelParams { l: 14, ..p };
        assert!(matches!(diagonalize(&big), Err(Error::Capacity(_))));
    }

    #[test]
    fn diagonal_hamiltonian_has_coordinate_eigenvectors() {
        let p = ModelParams::new(4, 1.0, 0.0, 0.3, 0.25, Basis::Z).unwrap();
        let s = diagonalize(&p).unwrap();
        for k in 0..16 {
            let v = s.eigenvector(k);
            let nonzero = v.iter().filter(|x| x.abs() > 1e-12).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn spectrum_residuals_and_orthonormality() {
        for basis in [Basis::Z, Basis::X] {
            let p = ModelParams::new(6, 1.0, 0.7, 0.4, 1.0 / 6.0, basis).unwrap();
            let s = diagonalize(&p).unwrap();
            let op = hamiltonian_operator(&p);
            let mut hv = vec![0.0; 64];
            for k in 0..64 {
                op.apply_real_into(s.eigenvector(k), &mut hv);
                let r: f64 = hv
                    .iter()
                    .zip(s.eigenvector(k))
                    .map(|(a, b)| (a - s.energies()[k] * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(r < 1e-8);
                for k2 in 0..64 {
                    let d: f64 = s.eigenvector(k).iter().zip(s.eigenvector(k2)).map(|(a, b)| a * b).sum();
                    let want = if k == k2 { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn infinite_temperature_state_is_maximally_mixed() {
        let p = ModelParams::initial(4, 0.5, 0.0).unwrap();
        let rho = thermal_density_matrix(&p, 0.0).unwrap();
        for e in rho.entries() {
            if e.is_diagonal() {
                assert!((e.value - 1.0 / 16.0).abs() < 1e-14);
            } else {
                assert!(e.value.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn low_temperature_selects_ground_state() {
        let rho = thermal_density_matrix(&oracle_params(), 50.0).unwrap();
        let neel = BasisState::from_sites("01", Basis::Z).unwrap().index() as u32;
        assert!((rho.get(neel, neel) - 1.0).abs() < 1e-12);
        assert!(rho.trace() - 1.0 < 1e-12);
    }

    #[test]
    fn thermal_state_is_a_density_matrix() {
        let p = ModelParams::initial(4, 0.5, 0.0).unwrap();
        let rho = thermal_density_matrix(&p, 1.0).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        let dense = rho.to_dense().unwrap();
        let evd = dense.self_adjoint_eigen(Side::Lower).unwrap();
        let s = evd.S().column_vector();
        for k in 0..16 {
            assert!(s[k] >= -1e-12);
        }
    }

    #[test]
    fn exact_dynamics_examples() {
        let times: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let quench = ModelParams::quench(4, 1.0, 1.0).unwrap();
        let obs = Observable::staggered_z(4);
        let p0 = ModelParams::initial(4, 0.5, 0.0).unwrap();
        let inf = thermal_density_matrix(&p0, 0.0).unwrap();
        let s = heisenberg_expectation(&inf, &obs, &quench, &times).unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));

        let neel = BasisState::neel(4, Basis::Z).index() as u32;
        let pure = DensityMatrix::from_entries(4, Basis::Z, Source::Exact, vec![Entry { m: neel, n: neel, value: 1.0 }]).unwrap();
        let s = heisenberg_expectation(&pure, &obs, &quench, &times).unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-12);

        let rho = thermal_density_matrix(&quench.with_basis(Basis::Z), 0.8).unwrap();
        let s = heisenberg_expectation(&rho, &Observable::magnetization_x(4), &quench, &times).unwrap();
        for v in &s.values {
            assert!((v - s.values[0]).abs() < 1e-10);
        }
        let xrho = thermal_density_matrix(&p0.with_basis(Basis::X), 0.8).unwrap();
        assert!(matches!(
            heisenberg_expectation(&xrho, &obs, &quench, &times),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn tde_limits() {
        let h0 = ModelParams::initial(4, 0.5, 0.0).unwrap();
        let h1 = ModelParams::quench(4, 1.0, 1.0).unwrap();
        for kind in [ObservableKind::StaggeredMagnetizationZ, ObservableKind::MagnetizationX] {
            let v = tde_average(&h0, &h1, &Observable::new(kind, 4), 0.0).unwrap();
            assert!(v.abs() < 1e-12);
        }
        // No quench and an observable that commutes with H: TDE equals the
        // thermal expectation.
        let h = ModelParams::new(4, 1.0, 0.0, 0.3, 0.25, Basis::Z).unwrap();
        let obs = Observable::staggered_z(4);
        let tde = tde_average(&h, &h, &obs, 1.3).unwrap();
        let rho = thermal_density_matrix(&h, 1.3).unwrap();
        let direct = heisenberg_expectation(&rho, &obs, &h, &[0.0]).unwrap().values[0];
        assert!((tde - direct).abs() < 1e-12);
    }

    #[test]
    fn disk_cache_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = ModelParams::initial(4, 0.9, 0.1).unwrap();
        let fresh = diagonalize_uncached(&p).unwrap();
        disk::store(dir.path(), &fresh).unwrap();
        let loaded = disk::load(dir.path(), &p).unwrap().unwrap();
        assert_eq!(fresh.energies, loaded.energies);
        assert_eq!(fresh.vectors, loaded.vectors);
        let other = ModelParams::initial(4, 0.9, 0.2).unwrap();
        assert!(disk::load(dir.path(), &other).unwrap().is_none());
    }
}
