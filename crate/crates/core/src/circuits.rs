//! Superposition-state preparation, matrix-element extraction from
//! expectation values, and the Hadamard test, checked on an exact
//! statevector simulator.
//!
//! Qubit `q` is bit `q` of the statevector index, so a chain basis state
//! maps onto the register without relabelling.

use std::fmt::Write as _;
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::diagonalize;
use crate::model::{staggered_sign, Basis, BasisState, ModelParams, Observable, ObservableKind, C64, MAX_SITES};

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    S(usize),
    Sdg(usize),
    Cnot { control: usize, target: usize },
    /// Dense unitary on qubits `0..k`, applied when `control` is set.
    ControlledUnitary { control: usize, unitary: Arc<Mat<C64>> },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) | Gate::S(q) | Gate::Sdg(q) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::ControlledUnitary { control, unitary } => {
                let k = unitary.nrows().trailing_zeros() as usize;
                std::iter::once(*control).chain(0..k).collect()
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::X(_) => "X",
            Gate::S(_) => "S",
            Gate::Sdg(_) => "SDG",
            Gate::Cnot { .. } => "CNOT",
            Gate::ControlledUnitary { .. } => "CU",
        }
    }
}

/// Gates grouped into layers; gates within a layer touch disjoint qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    layers: Vec<Vec<Gate>>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit { num_qubits, layers: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    /// Appends a layer after checking qubit ranges and disjointness. Empty
    /// layers are dropped.
    pub fn push_layer(&mut self, layer: Vec<Gate>) -> Result<()> {
        if layer.is_empty() {
            return Ok(());
        }
        let mut used = vec![false; self.num_qubits];
        for g in &layer {
            if let Gate::ControlledUnitary { unitary, .. } = g {
                let d = unitary.nrows();
                if !d.is_power_of_two() || unitary.ncols() != d {
                    return Err(Error::Contract("controlled unitary must be square with power-of-two size".into()));
                }
            }
            for q in g.qubits() {
                if q >= self.num_qubits {
                    return Err(Error::Contract(format!("qubit {q} outside a {}-qubit register", self.num_qubits)));
                }
                if used[q] {
                    return Err(Error::Contract(format!("qubit {q} used twice in one layer")));
                }
                used[q] = true;
            }
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Number of layers containing a CNOT.
    pub fn cnot_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.iter().any(|g| matches!(g, Gate::Cnot { .. })))
            .count()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    /// Plain-text gate list: `NAME q[,q]` per line, `---` between layers.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                s.push_str("---\n");
            }
            for g in layer {
                let qs: Vec<String> = g.qubits().iter().map(usize::to_string).collect();
                let _ = writeln!(s, "{} {}", g.name(), qs.join(","));
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `(|n> + |m>)/sqrt 2`
    PsiPlus,
    /// `(|n> - |m>)/sqrt 2`
    PsiMinus,
    /// `(|n> + i|m>)/sqrt 2`
    PhiPlus,
    /// `(|n> - i|m>)/sqrt 2`
    PhiMinus,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::PsiPlus, Variant::PsiMinus, Variant::PhiPlus, Variant::PhiMinus];

    /// Relative amplitude of `|m>`.
    pub fn phase(&self) -> C64 {
        match self {
            Variant::PsiPlus => C64::new(1.0, 0.0),
            Variant::PsiMinus => C64::new(-1.0, 0.0),
            Variant::PhiPlus => C64::new(0.0, 1.0),
            Variant::PhiMinus => C64::new(0.0, -1.0),
        }
    }

    fn is_phi(&self) -> bool {
        matches!(self, Variant::PhiPlus | Variant::PhiMinus)
    }

    fn is_minus(&self) -> bool {
        matches!(self, Variant::PsiMinus | Variant::PhiMinus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuperpositionSpec {
    pub n: BasisState,
    pub m: BasisState,
    pub variant: Variant,
}

impl SuperpositionSpec {
    pub fn new(n: BasisState, m: BasisState, variant: Variant) -> Result<Self> {
        if n.l != m.l {
            return Err(Error::Contract(format!("states on {} and {} sites", n.l, m.l)));
        }
        Ok(SuperpositionSpec { n, m, variant })
    }

    /// Exact target amplitudes.
    pub fn target(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); 1 << self.n.l];
        let r = std::f64::consts::FRAC_1_SQRT_2;
        v[self.n.index()] += C64::new(r, 0.0);
        v[self.m.index()] += self.variant.phase() * r;
        v
    }
}

/// Preparation circuit for `spec` from `|0...0>`.
///
/// With `P` the set of differing bits and the pivot its lowest element:
/// one X layer sets the common bits and the relative pattern on `P`, the
/// pivot gets H (preceded by X for a minus sign) and S for the `phi`
/// variants, a balanced CNOT fan-out over `P` copies the pivot, and a final
/// X on the pivot fixes its value in `|n>`.
pub fn synthesize(spec: &SuperpositionSpec) -> Result<Circuit> {
    let (n, m, l) = (spec.n.bits, spec.m.bits, spec.n.l);
    if n == m {
        return Err(Error::Domain("superposition needs two distinct basis states".into()));
    }
    let diff = n ^ m;
    let nodes: Vec<usize> = (0..l).filter(|&q| diff >> q & 1 == 1).collect();
    let pivot = nodes[0];
    let bit = |q: usize| (n >> q & 1) as u8;

    // Balanced doubling tree over the node list; parent[i] indexes nodes.
    let mut parent = vec![0usize; nodes.len()];
    let mut rounds: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut active = 1;
    while active < nodes.len() {
        let round: Vec<(usize, usize)> = (0..active)
            .filter(|i| i + active < nodes.len())
            .map(|i| (i, i + active))
            .collect();
        for &(p, c) in &round {
            parent[c] = p;
        }
        rounds.push(round);
        active *= 2;
    }

    let mut circuit = Circuit::new(l);
    let mut xs = Vec::new();
    for q in 0..l {
        if diff >> q & 1 == 0 && bit(q) == 1 {
            xs.push(Gate::X(q));
        }
    }
    if spec.variant.is_minus() {
        xs.push(Gate::X(pivot));
    }
    for (i, &q) in nodes.iter().enumerate().skip(1) {
        let p = nodes[parent[i]];
        let parent_bit = if p == pivot { 0 } else { bit(p) };
        if bit(q) ^ parent_bit == 1 {
            xs.push(Gate::X(q));
        }
    }
    circuit.push_layer(xs)?;
    circuit.push_layer(vec![Gate::H(pivot)])?;
    if spec.variant.is_phi() {
        circuit.push_layer(vec![Gate::S(pivot)])?;
    }
    for round in rounds {
        circuit.push_layer(
            round
                .into_iter()
                .map(|(p, c)| Gate::Cnot { control: nodes[p], target: nodes[c] })
                .collect(),
        )?;
    }
    if bit(pivot) == 1 {
        circuit.push_layer(vec![Gate::X(pivot)])?;
    }
    Ok(circuit)
}

fn apply_gate(g: &Gate, v: &mut [C64]) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match g {
        Gate::H(q) => {
            let m = 1 << q;
            for i in 0..v.len() {
                if i & m == 0 {
                    let (a, b) = (v[i], v[i | m]);
                    v[i] = (a + b) * r;
                    v[i | m] = (a - b) * r;
                }
            }
        }
        Gate::X(q) => {
            let m = 1 << q;
            for i in 0..v.len() {
                if i & m == 0 {
                    v.swap(i, i | m);
                }
            }
        }
        Gate::S(q) | Gate::Sdg(q) => {
            let phase = if matches!(g, Gate::S(_)) { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
            let m = 1 << q;
            for (i, x) in v.iter_mut().enumerate() {
                if i & m != 0 {
                    *x *= phase;
                }
            }
        }
        Gate::Cnot { control, target } => {
            let (c, t) = (1 << control, 1 << target);
            for i in 0..v.len() {
                if i & c != 0 && i & t == 0 {
                    v.swap(i, i | t);
                }
            }
        }
        Gate::ControlledUnitary { control, unitary } => {
            let d = unitary.nrows();
            let c = 1 << control;
            let mut block = vec![C64::new(0.0, 0.0); d];
            for high in (0..v.len()).step_by(d) {
                if high & c == 0 {
                    continue;
                }
                for (r, b) in block.iter_mut().enumerate() {
                    *b = (0..d).map(|k| unitary[(r, k)] * v[high + k]).sum();
                }
                v[high..high + d].copy_from_slice(&block);
            }
        }
    }
}

/// Statevector after running `c` on the basis state `initial`.
pub fn simulate(c: &Circuit, initial: usize) -> Result<Vec<C64>> {
    if c.num_qubits > MAX_SITES {
        return Err(Error::Capacity(format!("simulator limited to {MAX_SITES} qubits, got {}", c.num_qubits)));
    }
    let dim = 1usize << c.num_qubits;
    if initial >= dim {
        return Err(Error::Contract(format!("initial index {initial} outside the register")));
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[initial] = C64::new(1.0, 0.0);
    simulate_state(c, v)
}

/// Runs `c` on an arbitrary statevector.
pub fn simulate_state(c: &Circuit, mut v: Vec<C64>) -> Result<Vec<C64>> {
    if c.num_qubits > MAX_SITES {
        return Err(Error::Capacity(format!("simulator limited to {MAX_SITES} qubits, got {}", c.num_qubits)));
    }
    if v.len() != 1 << c.num_qubits {
        return Err(Error::Contract("statevector length does not match the register".into()));
    }
    for g in c.gates() {
        apply_gate(g, &mut v);
    }
    Ok(v)
}

/// Complex `O_nm(t)` from the four superposition-state expectations.
pub fn matrix_element_from_expectations(
    e_psi_plus: &[f64],
    e_psi_minus: &[f64],
    e_phi_plus: &[f64],
    e_phi_minus: &[f64],
) -> Result<Vec<C64>> {
    let len = e_psi_plus.len();
    if e_psi_minus.len() != len || e_phi_plus.len() != len || e_phi_minus.len() != len {
        return Err(Error::Contract("expectation series on different grids".into()));
    }
    Ok((0..len)
        .map(|i| C64::new(0.5 * (e_psi_plus[i] - e_psi_minus[i]), 0.5 * (e_phi_minus[i] - e_phi_plus[i])))
        .collect())
}

/// Ancilla `<Z>` of the Hadamard test for `u` on `psi`: `Re <psi|U|psi>`
/// for `a = 0`, `Im <psi|U|psi>` for `a = 1`.
///
/// The `a = 1` branch applies `S^dagger` to the ancilla before the final
/// Hadamard; `S` would return `-Im`.
pub fn hadamard_test(u: &Mat<C64>, psi: &[C64], a: u8) -> Result<f64> {
    let d = u.nrows();
    if u.ncols() != d || !d.is_power_of_two() || psi.len() != d {
        return Err(Error::Contract("unitary and state dimensions must agree".into()));
    }
    if a > 1 {
        return Err(Error::Domain(format!("a must be 0 or 1, got {a}")));
    }
    let mut dev = 0.0;
    for i in 0..d {
        for j in 0..d {
            let x: C64 = (0..d).map(|k| u[(k, i)].conj() * u[(k, j)]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            dev += (x - want).norm_sqr();
        }
    }
    if dev.sqrt() > 1e-10 {
        return Err(Error::Domain(format!("matrix is not unitary (deviation {:.3e})", dev.sqrt())));
    }
    let l = d.trailing_zeros() as usize;
    let anc = l;
    let mut c = Circuit::new(l + 1);
    c.push_layer(vec![Gate::H(anc)])?;
    c.push_layer(vec![Gate::ControlledUnitary { control: anc, unitary: Arc::new(u.clone()) }])?;
    if a == 1 {
        c.push_layer(vec![Gate::Sdg(anc)])?;
    }
    c.push_layer(vec![Gate::H(anc)])?;
    let mut v = vec![C64::new(0.0, 0.0); 2 * d];
    v[..d].copy_from_slice(psi);
    let out = simulate_state(&c, v)?;
    Ok(out
        .iter()
        .enumerate()
        .map(|(i, x)| if i >> anc & 1 == 0 { x.norm_sqr() } else { -x.norm_sqr() })
        .sum())
}

/// A Pauli string `prod_q X_q^{x_q} Z_q^{z_q}` (`X` applied after `Z`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub x_mask: u64,
    pub z_mask: u64,
}

impl PauliString {
    /// Dense matrix in the z basis on `l` qubits.
    pub fn matrix(&self, l: usize) -> Mat<C64> {
        let d = 1usize << l;
        let mut m = Mat::<C64>::zeros(d, d);
        for col in 0..d {
            let sign = if (col as u64 & self.z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(col ^ self.x_mask as usize, col)] = C64::new(sign, 0.0);
        }
        m
    }
}

/// Pauli expansion of an order parameter.
pub fn pauli_decompose(obs: &Observable) -> Vec<(f64, PauliString)> {
    let l = obs.l;
    (0..l)
        .map(|k| match obs.kind {
            ObservableKind::StaggeredMagnetizationZ => {
                (staggered_sign(k) / l as f64, PauliString { x_mask: 0, z_mask: 1 << k })
            }
            ObservableKind::MagnetizationX => (1.0 / l as f64, PauliString { x_mask: 1 << k, z_mask: 0 }),
        })
        .collect()
}

/// Dense `exp(-i H t)` in the z basis.
pub fn propagator(h: &ModelParams, t: f64) -> Result<Mat<C64>> {
    let spec = diagonalize(&h.with_basis(Basis::Z))?;
    let d = spec.dim();
    let v = spec.vectors();
    let e = spec.energies();
    let phase: Vec<C64> = e.iter().map(|x| C64::from_polar(1.0, -x * t)).collect();
    Ok(Mat::from_fn(d, d, |i, j| (0..d).map(|k| phase[k] * v[(i, k)] * v[(j, k)]).sum()))
}

fn matmul_c(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a * b
}

/// `<n|O(t)|m>` assembled from Hadamard tests, one per Pauli term of `O`,
/// with `U = exp(iHt) P exp(-iHt) prod_{j in S} X_j` and `psi = |n>`.
pub fn hadamard_test_matrix_element(
    n: &BasisState,
    m: &BasisState,
    obs: &Observable,
    h1: &ModelParams,
    t: f64,
) -> Result<C64> {
    if n.basis != Basis::Z || m.basis != Basis::Z {
        return Err(Error::BasisMismatch("Hadamard-test circuits act on z-basis states".into()));
    }
    let l = n.l;
    let fwd = propagator(h1, t)?;
    let bwd = Mat::from_fn(fwd.nrows(), fwd.ncols(), |i, j| fwd[(j, i)].conj());
    let flips = PauliString { x_mask: n.bits ^ m.bits, z_mask: 0 }.matrix(l);
    let mut psi = vec![C64::new(0.0, 0.0); 1 << l];
    psi[n.index()] = C64::new(1.0, 0.0);
    let mut total = C64::new(0.0, 0.0);
    for (c, p) in pauli_decompose(obs) {
        let u = matmul_c(&matmul_c(&matmul_c(&bwd, &p.matrix(l)), &fwd), &flips);
        let re = hadamard_test(&u, &psi, 0)?;
        let im = hadamard_test(&u, &psi, 1)?;
        total += C64::new(re, im) * c;
    }
    Ok(total)
}
