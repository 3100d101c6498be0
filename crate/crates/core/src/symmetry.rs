//! Lattice symmetries of the chain and the orbit plans built from them.
//!
//! A [`SymmetryElement`] `(s, a, b)` acts on a basis state as `T_1^b` first,
//! then `R^a`, then `S^s`:
//!
//! - `T_1` shifts every site by one (bit `k` moves to bit `k + 1 mod L`),
//! - `R` reflects the chain (site `i` to site `L - i + 1`),
//! - `S` flips every spin.
//!
//! The quench Hamiltonian (no staggered field) is invariant under
//! `R^a T_1^b`. Under that group `M^z_pi` picks up `(-1)^{a+b}` and `M^x`
//! is invariant, so `<gn|O(t)|gm> = sign(g) <n|O(t)|m>`. An orbit plan keeps
//! one representative pair per orbit and drops orbits whose contribution to
//! the real part is forced to zero.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::density::{pair_key, unpack_key, DensityMatrix, Entry};
use crate::error::{Error, Result};
use crate::model::{Basis, ModelParams, Observable, ObservableKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SymmetryElement {
    pub spin_flip: bool,
    pub reflection: bool,
    pub translation: usize,
}

impl SymmetryElement {
    pub fn new(spin_flip: bool, reflection: bool, translation: usize) -> Self {
        SymmetryElement { spin_flip, reflection, translation }
    }

    pub fn identity() -> Self {
        Self::new(false, false, 0)
    }

    pub fn translation(b: usize) -> Self {
        Self::new(false, false, b)
    }

    pub fn reflection() -> Self {
        Self::new(false, true, 0)
    }

    pub fn spin_flip() -> Self {
        Self::new(true, false, 0)
    }

    /// Image of the basis index `bits` on an `l`-site chain.
    #[inline]
    pub fn apply_bits(&self, bits: u64, l: usize) -> u64 {
        let mask = if l == 64 { u64::MAX } else { (1u64 << l) - 1 };
        let b = self.translation % l;
        let mut x = if b == 0 { bits } else { ((bits << b) | (bits >> (l - b))) & mask };
        if self.reflection {
            x = x.reverse_bits() >> (64 - l);
        }
        if self.spin_flip {
            x ^= mask;
        }
        x
    }

    pub fn apply(&self, state: &crate::model::BasisState) -> crate::model::BasisState {
        crate::model::BasisState { bits: self.apply_bits(state.bits, state.l), ..*state }
    }

    /// `self` after `inner`: the element acting as `inner` first.
    pub fn compose(&self, inner: &SymmetryElement, l: usize) -> SymmetryElement {
        // T^b R = R T^{-b}, and S commutes with both.
        let b_outer = if inner.reflection { (l - self.translation % l) % l } else { self.translation % l };
        SymmetryElement {
            spin_flip: self.spin_flip ^ inner.spin_flip,
            reflection: self.reflection ^ inner.reflection,
            translation: (b_outer + inner.translation) % l,
        }
    }

    /// Whether the element needs the spin flip (not a symmetry of the
    /// quench Hamiltonian).
    pub fn in_quench_group(&self) -> bool {
        !self.spin_flip
    }
}

/// Sign picked up by `obs` under `g` (which must not involve `S`).
pub fn sign_of(g: &SymmetryElement, obs: &Observable) -> Result<i8> {
    if g.spin_flip {
        return Err(Error::Unsupported(
            "the spin flip is not a symmetry of the quench Hamiltonian".into(),
        ));
    }
    Ok(match obs.kind {
        ObservableKind::StaggeredMagnetizationZ => {
            if (g.reflection as usize + g.translation) % 2 == 0 {
                1
            } else {
                -1
            }
        }
        ObservableKind::MagnetizationX => 1,
    })
}

/// The `2L` elements `R^a T_1^b`.
pub fn quench_group(l: usize) -> Vec<SymmetryElement> {
    (0..2)
        .flat_map(|a| (0..l).map(move |b| SymmetryElement::new(false, a == 1, b)))
        .collect()
}

/// Symmetry group of the initial Hamiltonian used for symmetrization:
/// `{S^s R^a T_1^b : s + a + b even}` without longitudinal field, otherwise
/// the even translations only.
pub fn initial_group(h0: &ModelParams) -> Vec<SymmetryElement> {
    let l = h0.l;
    if h0.h == 0.0 {
        let mut g = Vec::with_capacity(2 * l);
        for s in 0..2 {
            for a in 0..2 {
                for b in 0..l {
                    if (s + a + b) % 2 == 0 {
                        g.push(SymmetryElement::new(s == 1, a == 1, b));
                    }
                }
            }
        }
        g
    } else {
        (0..l).step_by(2).map(SymmetryElement::translation).collect()
    }
}

/// Replaces every orbit of `rho` under the initial-Hamiltonian group by its
/// average; only defined in the z basis.
pub fn symmetrize_rho(rho: &DensityMatrix, h0: &ModelParams) -> Result<DensityMatrix> {
    if rho.basis() != Basis::Z {
        return Err(Error::Unsupported("symmetrization is only implemented in the z basis".into()));
    }
    if rho.l() != h0.l {
        return Err(Error::Contract(format!("density matrix on {} sites, h0 on {}", rho.l(), h0.l)));
    }
    let group = initial_group(h0);
    let l = rho.l();
    let mut out = Vec::new();
    for e in rho.entries() {
        // Each orbit is emitted once, by its smallest stored member.
        let orbit = pair_orbit(e.m, e.n, &group, l);
        let values: Vec<f64> = orbit
            .iter()
            .map(|&k| {
                let (m, n) = unpack_key(k);
                rho.get(m, n)
            })
            .collect();
        if orbit.iter().zip(&values).any(|(&k, &v)| k < e.key() && v != 0.0) {
            continue;
        }
        let mean = values.iter().sum::<f64>() / orbit.len() as f64;
        if mean != 0.0 {
            out.extend(orbit.iter().map(|&k| {
                let (m, n) = unpack_key(k);
                Entry { m, n, value: mean }
            }));
        }
    }
    DensityMatrix::from_entries(l, rho.basis(), rho.source(), out)
}

/// Combines per-element errors over orbits in quadrature, matching the
/// orbit average of [`symmetrize_rho`]: `sqrt(sum d_i^2) / |orbit|`.
pub fn symmetrize_errors(errors: &HashMap<u64, f64>, h0: &ModelParams) -> HashMap<u64, f64> {
    let group = initial_group(h0);
    let mut out = HashMap::with_capacity(errors.len());
    let mut keys: Vec<u64> = errors.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        if out.contains_key(&key) {
            continue;
        }
        let (m, n) = unpack_key(key);
        let orbit = pair_orbit(m, n, &group, h0.l);
        let sq: f64 = orbit.iter().map(|k| errors.get(k).copied().unwrap_or(0.0).powi(2)).sum();
        let d = sq.sqrt() / orbit.len() as f64;
        for k in orbit {
            out.insert(k, d);
        }
    }
    out
}

/// Distinct folded images of `(m, n)` under `group`.
fn pair_orbit(m: u32, n: u32, group: &[SymmetryElement], l: usize) -> Vec<u64> {
    let mut keys: Vec<u64> = group
        .iter()
        .map(|g| pair_key(g.apply_bits(m as u64, l) as u32, g.apply_bits(n as u64, l) as u32))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Both states are reflection invariant.
    ReflectionFixed,
    /// Both states are invariant under an odd translation.
    OddTranslationFixed,
    /// Image of a pair with one of the two reasons above.
    SignConflict,
    /// The element is purely imaginary, so it drops out of the real trace.
    RealPartZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exclusion {
    pub pair: (u32, u32),
    pub reason: ExclusionReason,
}

/// How a retained pair is obtained from its orbit representative:
/// `O_pair = sign * O_rep`, conjugated when `conj` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Expansion {
    pub pair: (u32, u32),
    pub rep: usize,
    pub sign: i8,
    pub conj: bool,
}

#[derive(Clone, Debug)]
pub struct OrbitPlan {
    pub observable: Observable,
    pub l: usize,
    /// One stored pair `(n, m)`, `n <= m`, per simulated orbit.
    pub representatives: Vec<(u32, u32)>,
    /// Every retained, non-excluded pair exactly once.
    pub expansion: Vec<Expansion>,
    pub excluded: Vec<Exclusion>,
}

impl OrbitPlan {
    pub fn n_sim(&self) -> usize {
        self.representatives.len()
    }

    /// Plan without symmetry reduction: every retained pair is simulated.
    pub fn direct(index_set: &[(u32, u32)], obs: &Observable) -> OrbitPlan {
        let mut pairs: Vec<(u32, u32)> = index_set.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        pairs.sort_unstable();
        pairs.dedup();
        let expansion = pairs
            .iter()
            .enumerate()
            .map(|(i, &pair)| Expansion { pair, rep: i, sign: 1, conj: false })
            .collect();
        OrbitPlan { observable: *obs, l: obs.l, representatives: pairs, expansion, excluded: Vec::new() }
    }

    /// JSON form `{observable, L, representatives, expansion, excluded, N_sim}`.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }
}

impl Serialize for OrbitPlan {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct ExpansionOut {
            pair: [u32; 2],
            rep: [u32; 2],
            sign: i8,
            conj: bool,
        }
        #[derive(Serialize)]
        struct ExcludedOut {
            pair: [u32; 2],
            reason: ExclusionReason,
        }
        #[derive(Serialize)]
        struct Out {
            observable: ObservableKind,
            #[serde(rename = "L")]
            l: usize,
            representatives: Vec<[u32; 2]>,
            expansion: Vec<ExpansionOut>,
            excluded: Vec<ExcludedOut>,
            #[serde(rename = "N_sim")]
            n_sim: usize,
        }
        let out = Out {
            observable: self.observable.kind,
            l: self.l,
            representatives: self.representatives.iter().map(|&(a, b)| [a, b]).collect(),
            expansion: self
                .expansion
                .iter()
                .map(|e| {
                    let r = self.representatives[e.rep];
                    ExpansionOut { pair: [e.pair.0, e.pair.1], rep: [r.0, r.1], sign: e.sign, conj: e.conj }
                })
                .collect(),
            excluded: self
                .excluded
                .iter()
                .map(|x| ExcludedOut { pair: [x.pair.0, x.pair.1], reason: x.reason })
                .collect(),
            n_sim: self.n_sim(),
        };
        out.serialize(serializer)
    }
}

/// Outcome of enumerating one orbit under the quench group.
struct OrbitImages {
    /// Folded image key with its sign and conjugation relative to the seed.
    images: Vec<(u64, i8, bool)>,
    zero: bool,
    real_part_zero: bool,
}

fn orbit_images(n: u32, m: u32, group: &[(SymmetryElement, i8)], l: usize) -> OrbitImages {
    let mut seen: HashMap<u64, (i8, bool)> = HashMap::with_capacity(group.len());
    let mut images = Vec::with_capacity(group.len());
    let mut zero = false;
    let mut real_part_zero = false;
    for (g, sign) in group {
        let gn = g.apply_bits(n as u64, l) as u32;
        let gm = g.apply_bits(m as u64, l) as u32;
        let conj = gn > gm;
        let key = pair_key(gn, gm);
        match seen.get(&key) {
            None => {
                seen.insert(key, (*sign, conj));
                images.push((key, *sign, conj));
            }
            Some(&(s0, c0)) => {
                if c0 == conj {
                    zero |= s0 != *sign;
                } else {
                    real_part_zero |= s0 != *sign;
                }
            }
        }
    }
    OrbitImages { images, zero, real_part_zero }
}

fn exclusion_reason(n: u32, m: u32, l: usize, images: &OrbitImages) -> ExclusionReason {
    let r = SymmetryElement::reflection();
    if r.apply_bits(n as u64, l) == n as u64 && r.apply_bits(m as u64, l) == m as u64 {
        return ExclusionReason::ReflectionFixed;
    }
    let odd_fixed = (1..l).step_by(2).any(|b| {
        let t = SymmetryElement::translation(b);
        t.apply_bits(n as u64, l) == n as u64 && t.apply_bits(m as u64, l) == m as u64
    });
    if odd_fixed {
        ExclusionReason::OddTranslationFixed
    } else if images.zero {
        ExclusionReason::SignConflict
    } else {
        ExclusionReason::RealPartZero
    }
}

fn signed_group(obs: &Observable) -> Vec<(SymmetryElement, i8)> {
    quench_group(obs.l)
        .into_iter()
        .map(|g| {
            let s = sign_of(&g, obs).expect("quench group has no spin flip");
            (g, s)
        })
        .collect()
}

fn check_quench(obs: &Observable, h1: &ModelParams) -> Result<()> {
    if h1.h_s != 0.0 {
        return Err(Error::Contract(
            "orbit plans need a reflection- and translation-invariant quench Hamiltonian (h_s = 0)".into(),
        ));
    }
    if obs.l != h1.l {
        return Err(Error::Contract(format!("observable on {} sites, quench on {}", obs.l, h1.l)));
    }
    Ok(())
}

/// Groups the retained pairs into orbits of the quench group.
pub fn plan_simulations(index_set: &[(u32, u32)], obs: &Observable, h1: &ModelParams) -> Result<OrbitPlan> {
    check_quench(obs, h1)?;
    let l = obs.l;
    let group = signed_group(obs);
    let mut keys: Vec<u64> = index_set.iter().map(|&(a, b)| pair_key(a, b)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut visited = vec![false; keys.len()];
    let mut plan = OrbitPlan {
        observable: *obs,
        l,
        representatives: Vec::new(),
        expansion: Vec::with_capacity(keys.len()),
        excluded: Vec::new(),
    };
    for i in 0..keys.len() {
        if visited[i] {
            continue;
        }
        // Keys are visited in ascending order, so the seed is the smallest
        // retained member of its orbit.
        let (n, m) = unpack_key(keys[i]);
        let orbit = orbit_images(n, m, &group, l);
        let members: Vec<(usize, i8, bool)> = orbit
            .images
            .iter()
            .filter_map(|&(k, s, c)| keys.binary_search(&k).ok().map(|j| (j, s, c)))
            .collect();
        if orbit.zero || orbit.real_part_zero {
            for &(j, _, _) in &members {
                visited[j] = true;
                let (a, b) = unpack_key(keys[j]);
                let reason = exclusion_reason(a, b, l, &orbit);
                plan.excluded.push(Exclusion { pair: (a, b), reason });
            }
            continue;
        }
        let rep = plan.representatives.len();
        plan.representatives.push((n, m));
        for (j, sign, conj) in members {
            visited[j] = true;
            plan.expansion.push(Expansion { pair: unpack_key(keys[j]), rep, sign, conj });
        }
    }
    plan.expansion.sort_unstable_by_key(|e| pair_key(e.pair.0, e.pair.1));
    plan.excluded.sort_unstable_by_key(|e| pair_key(e.pair.0, e.pair.1));
    Ok(plan)
}

/// Longest magnitude-ranked prefix of `rho` whose orbit plan needs at most
/// `max_sim` simulations. Returns the number of stored elements to keep.
pub fn prefix_for_n_sim(rho: &DensityMatrix, obs: &Observable, h1: &ModelParams, max_sim: usize) -> Result<usize> {
    check_quench(obs, h1)?;
    let l = obs.l;
    let group = signed_group(obs);
    let mut ranked = rho.entries().to_vec();
    ranked.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()).then(a.key().cmp(&b.key())));
    let mut covered: HashSet<u64> = HashSet::new();
    let mut n_sim = 0;
    for (i, e) in ranked.iter().enumerate() {
        if covered.contains(&e.key()) {
            continue;
        }
        let orbit = orbit_images(e.m, e.n, &group, l);
        let excluded = orbit.zero || orbit.real_part_zero;
        if !excluded {
            if n_sim == max_sim {
                return Ok(i);
            }
            n_sim += 1;
        }
        covered.extend(orbit.images.iter().map(|x| x.0));
    }
    Ok(ranked.len())
}
