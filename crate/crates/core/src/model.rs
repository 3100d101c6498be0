//! Spin-chain encoding and the mixed-field Ising Hamiltonian.
//!
//! Site `i` (1-based) lives in bit `i - 1` of a basis index. Bit value `b`
//! carries the local eigenvalue `1 - 2b`: of `Z_i` in the z basis, of `X_i`
//! in the x basis. Kets are written site 1 first, so `|0101>` has site 2 and
//! site 4 flipped and is the basis index `0b1010`.
//!
//! The Hamiltonian on a periodic chain is
//!
//! ```text
//! H = sum_i [ J Z_i Z_{i+1} + g X_i + h Z_i + h_s (-1)^i Z_i ]
//! ```
//!
//! For `L = 2` the periodic sum visits the single bond twice; that literal
//! double counting is kept.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest chain for which statevectors are allocated.
pub const MAX_SITES: usize = 20;

/// Largest chain for which dense matrices are materialized.
pub const MAX_DENSE_SITES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => write!(f, "z"),
            Basis::X => write!(f, "x"),
        }
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "z" => Ok(Basis::Z),
            "x" => Ok(Basis::X),
            other => Err(Error::Config(format!("unknown basis '{other}' (expected z or x)"))),
        }
    }
}

/// Couplings of one mixed-field Ising Hamiltonian together with the basis it
/// is represented in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub l: usize,
    pub j: f64,
    pub g: f64,
    pub h: f64,
    pub h_s: f64,
    pub basis: Basis,
}

impl ModelParams {
    pub fn new(l: usize, j: f64, g: f64, h: f64, h_s: f64, basis: Basis) -> Result<Self> {
        let p = ModelParams { l, j, g, h, h_s, basis };
        p.validate()?;
        Ok(p)
    }

    /// Initial Hamiltonian convention: `J = 1`, `h_s = 1/L`, z basis.
    pub fn initial(l: usize, g0: f64, h0: f64) -> Result<Self> {
        Self::new(l, 1.0, g0, h0, 1.0 / l as f64, Basis::Z)
    }

    /// Quench Hamiltonian convention: `J = 1`, `h_s = 0`, z basis.
    pub fn quench(l: usize, g: f64, h: f64) -> Result<Self> {
        Self::new(l, 1.0, g, h, 0.0, Basis::Z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 || self.l % 2 != 0 {
            return Err(Error::Domain(format!(
                "chain length L must be even and at least 2, got {}",
                self.l
            )));
        }
        if self.l > MAX_SITES {
            return Err(Error::Capacity(format!(
                "L = {} exceeds the statevector guard of {MAX_SITES} sites",
                self.l
            )));
        }
        if !(self.j > 0.0) {
            return Err(Error::Domain(format!(
                "Ising coupling J must be positive (antiferromagnetic), got {}",
                self.j
            )));
        }
        for (name, v) in [("g", self.g), ("h", self.h), ("h_s", self.h_s)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn dim(&self) -> usize {
        1usize << self.l
    }

    /// Same physical couplings, ignoring the representation basis.
    pub fn same_physics(&self, other: &ModelParams) -> bool {
        self.l == other.l
            && self.j == other.j
            && self.g == other.g
            && self.h == other.h
            && self.h_s == other.h_s
    }
}

/// Sign `(-1)^i` for the site stored in bit `k` (site `i = k + 1`).
#[inline]
pub fn staggered_sign(bit: usize) -> f64 {
    if bit % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Local eigenvalue `1 - 2b` of bit `k` of `index`.
#[inline]
pub fn local_eigenvalue(index: u64, bit: usize) -> f64 {
    1.0 - 2.0 * ((index >> bit) & 1) as f64
}

/// A computational basis label in either the z or the x basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub bits: u64,
    pub l: usize,
    pub basis: Basis,
}

impl BasisState {
    pub fn new(bits: u64, l: usize, basis: Basis) -> Result<Self> {
        if l == 0 || l > MAX_SITES {
            return Err(Error::Domain(format!("site count {l} outside 1..={MAX_SITES}")));
        }
        if bits >> l != 0 {
            return Err(Error::Domain(format!("basis index {bits} does not fit in {l} bits")));
        }
        Ok(BasisState { bits, l, basis })
    }

    /// Parses a site-ordered ket string such as `"0101"` (site 1 first).
    pub fn from_sites(sites: &str, basis: Basis) -> Result<Self> {
        let mut bits = 0u64;
        for (k, c) in sites.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << k,
                _ => return Err(Error::Domain(format!("invalid site character '{c}' in '{sites}'"))),
            }
        }
        Self::new(bits, sites.chars().count(), basis)
    }

    /// Néel state `|0101...>` (site 1 unflipped).
    pub fn neel(l: usize, basis: Basis) -> Self {
        let mut bits = 0u64;
        for k in (1..l).step_by(2) {
            bits |= 1 << k;
        }
        BasisState { bits, l, basis }
    }

    pub fn index(&self) -> usize {
        self.bits as usize
    }

    /// Local eigenvalue of site `i` (1-based).
    pub fn eigenvalue(&self, site: usize) -> f64 {
        local_eigenvalue(self.bits, site - 1)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for k in 0..self.l {
            write!(f, "{}", (self.bits >> k) & 1)?;
        }
        write!(f, ">")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservableKind {
    /// `(1/L) sum_i (-1)^i Z_i`
    #[serde(rename = "mz_pi")]
    StaggeredMagnetizationZ,
    /// `(1/L) sum_i X_i`
    #[serde(rename = "mx")]
    MagnetizationX,
}

impl ObservableKind {
    /// Basis in which the observable is diagonal.
    pub fn diagonal_basis(&self) -> Basis {
        match self {
            ObservableKind::StaggeredMagnetizationZ => Basis::Z,
            ObservableKind::MagnetizationX => Basis::X,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObservableKind::StaggeredMagnetizationZ => "mz_pi",
            ObservableKind::MagnetizationX => "mx",
        }
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mz_pi" | "mzpi" | "staggered" => Ok(ObservableKind::StaggeredMagnetizationZ),
            "mx" | "magnetization_x" => Ok(ObservableKind::MagnetizationX),
            other => Err(Error::Config(format!("unknown observable '{other}' (expected mz_pi or mx)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Observable {
    pub kind: ObservableKind,
    pub l: usize,
}

impl Observable {
    pub fn new(kind: ObservableKind, l: usize) -> Self {
        Observable { kind, l }
    }

    pub fn staggered_z(l: usize) -> Self {
        Self::new(ObservableKind::StaggeredMagnetizationZ, l)
    }

    pub fn magnetization_x(l: usize) -> Self {
        Self::new(ObservableKind::MagnetizationX, l)
    }

    /// Matrix-free representation of the observable in `basis`.
    pub fn operator(&self, basis: Basis) -> PauliSumOperator {
        let l = self.l;
        let inv_l = 1.0 / l as f64;
        match (self.kind, basis) {
            (ObservableKind::StaggeredMagnetizationZ, Basis::Z) => PauliSumOperator::from_diagonal(
                l,
                basis,
                |x| inv_l * (0..l).map(|k| staggered_sign(k) * local_eigenvalue(x, k)).sum::<f64>(),
                Vec::new(),
            ),
            (ObservableKind::StaggeredMagnetizationZ, Basis::X) => PauliSumOperator::from_diagonal(
                l,
                basis,
                |_| 0.0,
                (0..l).map(|k| (1u64 << k, staggered_sign(k) * inv_l)).collect(),
            ),
            (ObservableKind::MagnetizationX, Basis::X) => PauliSumOperator::from_diagonal(
                l,
                basis,
                |x| inv_l * (0..l).map(|k| local_eigenvalue(x, k)).sum::<f64>(),
                Vec::new(),
            ),
            (ObservableKind::MagnetizationX, Basis::Z) => PauliSumOperator::from_diagonal(
                l,
                basis,
                |_| 0.0,
                (0..l).map(|k| (1u64 << k, inv_l)).collect(),
            ),
        }
    }
}

/// Real operator of the form `D + sum_f c_f F_f`, with `D` diagonal and
/// `F_f` flipping the bits in a fixed mask.
///
/// Both the Hamiltonian (in either basis) and the order parameters have this
/// shape, so one type drives matrix-free application, dense
/// materialization and the DMQMC connection lists.
#[derive(Clone, Debug)]
pub struct PauliSumOperator {
    l: usize,
    basis: Basis,
    diag: Vec<f64>,
    flips: Vec<(u64, f64)>,
}

impl PauliSumOperator {
    fn from_diagonal(l: usize, basis: Basis, diag: impl Fn(u64) -> f64, flips: Vec<(u64, f64)>) -> Self {
        let dim = 1usize << l;
        let diag = (0..dim as u64).map(diag).collect();
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(flips.len());
        for (mask, c) in flips {
            match merged.iter_mut().find(|(m, _)| *m == mask) {
                Some(entry) => entry.1 += c,
                None => merged.push((mask, c)),
            }
        }
        merged.retain(|&(mask, c)| mask != 0 && c != 0.0);
        PauliSumOperator { l, basis, diag, flips: merged }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn diagonal(&self, index: usize) -> f64 {
        self.diag[index]
    }

    pub fn diagonal_values(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal terms as `(bit mask, coefficient)`.
    pub fn flips(&self) -> &[(u64, f64)] {
        &self.flips
    }

    pub fn is_diagonal(&self) -> bool {
        self.flips.is_empty()
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn max_abs_row_sum(&self) -> f64 {
        let off: f64 = self.flips.iter().map(|(_, c)| c.abs()).sum();
        self.diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs())) + off
    }

    /// `out = A v`.
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for ((o, &d), &x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = x * d;
        }
        for &(mask, c) in &self.flips {
            let mask = mask as usize;
            for (x, o) in out.iter_mut().enumerate() {
                *o += v[x ^ mask] * c;
            }
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim() {
            return Err(Error::Contract(format!(
                "vector length {} does not match Hilbert space dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = A v` for real vectors.
    pub fn apply_real_into(&self, v: &[f64], out: &mut [f64]) {
        for ((o, &d), &x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = x * d;
        }
        for &(mask, c) in &self.flips {
            let mask = mask as usize;
            for (x, o) in out.iter_mut().enumerate() {
                *o += v[x ^ mask] * c;
            }
        }
    }

    /// `<u|A|v>` without allocating.
    pub fn expectation(&self, u: &[C64], v: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (x, (&ux, &vx)) in u.iter().zip(v).enumerate() {
            let mut av = vx * self.diag[x];
            for &(mask, c) in &self.flips {
                av += v[x ^ mask as usize] * c;
            }
            acc += ux.conj() * av;
        }
        acc
    }

    /// Matrix element `<row|A|col>` between basis states.
    pub fn element(&self, row: usize, col: usize) -> f64 {
        if row == col {
            return self.diag[row];
        }
        let diff = (row ^ col) as u64;
        self.flips.iter().filter(|(m, _)| *m == diff).map(|(_, c)| c).sum()
    }

    /// Dense real matrix; guarded to `L <= 12`.
    pub fn to_dense(&self) -> Result<Mat<f64>> {
        if self.l > MAX_DENSE_SITES {
            return Err(Error::Capacity(format!(
                "dense materialization limited to L <= {MAX_DENSE_SITES}, got L = {}",
                self.l
            )));
        }
        let dim = self.dim();
        let mut m = Mat::<f64>::zeros(dim, dim);
        for x in 0..dim {
            m[(x, x)] = self.diag[x];
            for &(mask, c) in &self.flips {
                m[(x ^ mask as usize, x)] += c;
            }
        }
        Ok(m)
    }
}

/// Matrix-free Hamiltonian in `params.basis`.
pub fn hamiltonian_operator(params: &ModelParams) -> PauliSumOperator {
    let l = params.l;
    let ModelParams { j, g, h, h_s, .. } = *params;
    match params.basis {
        Basis::Z => PauliSumOperator::from_diagonal(
            l,
            Basis::Z,
            |x| {
                (0..l)
                    .map(|k| {
                        let z = local_eigenvalue(x, k);
                        let z_next = local_eigenvalue(x, (k + 1) % l);
                        j * z * z_next + h * z + h_s * staggered_sign(k) * z
                    })
                    .sum()
            },
            (0..l).map(|k| (1u64 << k, g)).collect(),
        ),
        Basis::X => {
            let mut flips: Vec<(u64, f64)> = (0..l)
                .map(|k| ((1u64 << k) | (1u64 << ((k + 1) % l)), j))
                .collect();
            flips.extend((0..l).map(|k| (1u64 << k, h + h_s * staggered_sign(k))));
            PauliSumOperator::from_diagonal(
                l,
                Basis::X,
                |x| g * (0..l).map(|k| local_eigenvalue(x, k)).sum::<f64>(),
                flips,
            )
        }
    }
}

/// `H v` with `H` in `params.basis`.
pub fn apply_hamiltonian(params: &ModelParams, v: &[C64]) -> Result<Vec<C64>> {
    params.validate()?;
    hamiltonian_operator(params).apply(v)
}

/// Value of a diagonal observable on a basis state.
pub fn observable_value(obs: &Observable, state: &BasisState) -> Result<f64> {
    if obs.kind.diagonal_basis() != state.basis {
        return Err(Error::BasisMismatch(format!(
            "{} is not diagonal in the {} basis; use matrix elements instead",
            obs.kind.name(),
            state.basis
        )));
    }
    if obs.l != state.l {
        return Err(Error::Contract(format!(
            "observable on {} sites applied to a {}-site state",
            obs.l, state.l
        )));
    }
    let l = state.l;
    let sum: f64 = match obs.kind {
        ObservableKind::StaggeredMagnetizationZ => {
            (0..l).map(|k| staggered_sign(k) * local_eigenvalue(state.bits, k)).sum()
        }
        ObservableKind::MagnetizationX => (0..l).map(|k| local_eigenvalue(state.bits, k)).sum(),
    };
    Ok(sum / l as f64)
}

/// In-place Walsh-Hadamard transform normalized to a unitary (the L-fold
/// single-site Hadamard).
pub fn hadamard_transform_in_place<T>(v: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let a = v[i];
                let b = v[i + h];
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    for x in v.iter_mut() {
        *x = *x * scale;
    }
}

/// Applies the L-fold Hadamard, mapping z-basis amplitudes to x-basis
/// amplitudes and back.
pub fn rotate_basis(v: &[C64], l: usize) -> Result<Vec<C64>> {
    if l > MAX_SITES || v.len() != 1usize << l {
        return Err(Error::Contract(format!(
            "vector length {} does not match 2^{l}",
            v.len()
        )));
    }
    let mut out = v.to_vec();
    hadamard_transform_in_place(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    fn unit(dim: usize, i: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[i] = C64::new(1.0, 0.0);
        v
    }

    fn random_vec(rng: &mut Pcg64, dim: usize) -> Vec<C64> {
        (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn dot(u: &[C64], v: &[C64]) -> C64 {
        u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
    }

    #[test]
    fn neel_state_classical_energy() {
        let p = ModelParams::new(4, 1.0, 0.0, 0.0, 0.0, Basis::Z).unwrap();
        let neel = BasisState::from_sites("0101", Basis::Z).unwrap();
        let hv = apply_hamiltonian(&p, &unit(16, neel.index())).unwrap();
        for (x, a) in hv.iter().enumerate() {
            let expected = if x == neel.index() { -4.0 } else { 0.0 };
            assert!((a - C64::new(expected, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn two_site_staggered_field_diagonal() {
        let p = ModelParams::new(2, 1.0, 0.0, 0.0, 0.5, Basis::Z).unwrap();
        let op = hamiltonian_operator(&p);
        let expected = [("00", 2.0), ("01", -3.0), ("10", -1.0), ("11", 2.0)];
        for (ket, e) in expected {
            let s = BasisState::from_sites(ket, Basis::Z).unwrap();
            assert!((op.diagonal(s.index()) - e).abs() < 1e-14, "{ket}");
        }
        assert!(op.is_diagonal());
    }

    #[test]
    fn transverse_field_flips_single_spins() {
        let p = ModelParams::new(4, 1.0, 1.0, 0.0, 0.0, Basis::Z).unwrap();
        let mut p0 = p;
        p0.j = 1.0;
        // J contributes only to the diagonal; remove it from the comparison.
        let hv = apply_hamiltonian(&p0, &unit(16, 0)).unwrap();
        for k in 0..4 {
            assert!((hv[1 << k] - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
        let nonzero: Vec<usize> = (1..16).filter(|&x| hv[x].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![1, 2, 4, 8]);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let mut rng = Pcg64::seed_from_u64(7);
        for basis in [Basis::Z, Basis::X] {
            let p = ModelParams::new(6, 1.0, 0.7, 0.3, 1.0 / 6.0, basis).unwrap();
            for _ in 0..10 {
                let u = random_vec(&mut rng, 64);
                let v = random_vec(&mut rng, 64);
                let hu = apply_hamiltonian(&p, &u).unwrap();
                let hv = apply_hamiltonian(&p, &v).unwrap();
                assert!((dot(&u, &hv) - dot(&hu, &v)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = ModelParams::initial(4, 0.5, 0.0).unwrap();
        assert!(matches!(apply_hamiltonian(&p, &[C64::new(1.0, 0.0); 8]), Err(Error::Contract(_))));
    }

    #[test]
    fn params_validation() {
        assert!(matches!(ModelParams::initial(3, 0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(ModelParams::initial(0, 0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(ModelParams::initial(22, 0.5, 0.0), Err(Error::Capacity(_))));
        assert!(ModelParams::new(4, -1.0, 0.0, 0.0, 0.0, Basis::Z).is_err());
    }

    #[test]
    fn order_parameters_on_basis_states() {
        let mz = Observable::staggered_z(4);
        let mx = Observable::magnetization_x(4);
        let neel = BasisState::from_sites("0101", Basis::Z).unwrap();
        let anti = BasisState::from_sites("1010", Basis::Z).unwrap();
        assert_eq!(observable_value(&mz, &neel).unwrap(), -1.0);
        assert_eq!(observable_value(&mz, &anti).unwrap(), 1.0);
        let up_x = BasisState::from_sites("0000", Basis::X).unwrap();
        assert_eq!(observable_value(&mx, &up_x).unwrap(), 1.0);
        assert!(matches!(observable_value(&mx, &neel), Err(Error::BasisMismatch(_))));
        assert_eq!(BasisState::neel(4, Basis::Z), neel);
        assert_eq!(neel.to_string(), "|0101>");
    }

    #[test]
    fn observables_bounded_and_traceless() {
        for l in [2, 4, 6] {
            for kind in [ObservableKind::StaggeredMagnetizationZ, ObservableKind::MagnetizationX] {
                let obs = Observable::new(kind, l);
                let basis = kind.diagonal_basis();
                let mut trace = 0.0;
                for x in 0..(1u64 << l) {
                    let v = observable_value(&obs, &BasisState::new(x, l, basis).unwrap()).unwrap();
                    assert!(v.abs() <= 1.0);
                    trace += v;
                }
                assert!(trace.abs() < 1e-12);
                for b in [Basis::Z, Basis::X] {
                    let op = obs.operator(b);
                    let tr: f64 = op.diagonal_values().iter().sum();
                    assert!(tr.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hadamard_examples() {
        let v = rotate_basis(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].re - s).abs() < 1e-15 && (v[1].re - s).abs() < 1e-15);
        let v = rotate_basis(&unit(4, 0), 2).unwrap();
        assert!(v.iter().all(|a| (a.re - 0.5).abs() < 1e-15 && a.im == 0.0));
    }

    #[test]
    fn hadamard_is_an_involution() {
        let mut rng = Pcg64::seed_from_u64(3);
        let v = random_vec(&mut rng, 64);
        let back = rotate_basis(&rotate_basis(&v, 6).unwrap(), 6).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn x_basis_hamiltonian_is_rotated_z_hamiltonian() {
        let mut rng = Pcg64::seed_from_u64(11);
        for (g, h, hs) in [(0.8, 0.0, 0.0), (1.0, 0.4, 1.0 / 6.0)] {
            let pz = ModelParams::new(6, 1.0, g, h, hs, Basis::Z).unwrap();
            let px = pz.with_basis(Basis::X);
            for _ in 0..5 {
                let v = random_vec(&mut rng, 64);
                let direct = apply_hamiltonian(&px, &v).unwrap();
                let via_z = rotate_basis(
                    &apply_hamiltonian(&pz, &rotate_basis(&v, 6).unwrap()).unwrap(),
                    6,
                )
                .unwrap();
                for (a, b) in direct.iter().zip(&via_z) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn observable_operator_consistent_across_bases() {
        let mut rng = Pcg64::seed_from_u64(5);
        for kind in [ObservableKind::StaggeredMagnetizationZ, ObservableKind::MagnetizationX] {
            let obs = Observable::new(kind, 4);
            let v = random_vec(&mut rng, 16);
            let direct = obs.operator(Basis::X).apply(&v).unwrap();
            let via_z = rotate_basis(
                &obs.operator(Basis::Z).apply(&rotate_basis(&v, 4).unwrap()).unwrap(),
                4,
            )
            .unwrap();
            for (a, b) in direct.iter().zip(&via_z) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_matches_matrix_free() {
        let p = ModelParams::new(4, 1.0, 0.6, 0.2, 0.25, Basis::X).unwrap();
        let op = hamiltonian_operator(&p);
        let dense = op.to_dense().unwrap();
        for row in 0..16 {
            for col in 0..16 {
                assert_eq!(dense[(row, col)], op.element(row, col));
                assert_eq!(dense[(row, col)], dense[(col, row)]);
            }
        }
        let big = ModelParams::initial(14, 0.5, 0.0).unwrap();
        assert!(matches!(hamiltonian_operator(&big).to_dense(), Err(Error::Capacity(_))));
    }
}
