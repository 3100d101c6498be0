//! Pure-state dynamics and the reconstruction of thermal expectations.
//!
//! `<O(t)>_rho = sum_{m,n} rho_mn <n(t)|O|m(t)>`. With a real symmetric
//! `rho` each stored off-diagonal pair contributes `2 rho_mn Re O_nm(t)`,
//! so only one representative per symmetry orbit has to be propagated.
//!
//! Up to twelve sites the propagation goes through the eigenbasis of the
//! quench Hamiltonian, batching many states and times into dense matrix
//! products. Larger chains use Lanczos steppers.

use std::collections::HashMap;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat};
use rayon::prelude::*;

use crate::density::{pair_key, Entry};
use crate::error::{Error, Result};
use crate::exact::{diagonalize, par, Spectrum};
use crate::krylov::{KrylovOptions, KrylovStepper};
use crate::model::{hamiltonian_operator, BasisState, ModelParams, Observable, PauliSumOperator, C64, MAX_DENSE_SITES};
use crate::series::{trapezoid, SeriesMeta, TimeSeries};
use crate::symmetry::OrbitPlan;
use crate::truncation::TruncatedDensityMatrix;


#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    EigenDecomposition,
    Krylov,
}

impl Method {
    pub fn for_sites(l: usize) -> Method {
        if l <= MAX_DENSE_SITES {
            Method::EigenDecomposition
        } else {
            Method::Krylov
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixElementSeries {
    pub pair: (u32, u32),
    pub values: Vec<C64>,
    pub method: Method,
}

/// Budget for the dense work arrays of one batched eigenbasis evaluation.
const BATCH_BYTES: usize = 256 << 20;

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Contract("time grid contains non-finite values".into()));
    }
    Ok(())
}

/// `exp(-i H1 t) psi` for every grid time.
pub fn evolve_state(h1: &ModelParams, state: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
    evolve_state_with(h1, state, times, Method::for_sites(h1.l))
}

pub fn evolve_state_with(h1: &ModelParams, state: &[C64], times: &[f64], method: Method) -> Result<Vec<Vec<C64>>> {
    h1.validate()?;
    check_times(times)?;
    if state.len() != h1.dim() {
        return Err(Error::Contract(format!(
            "state length {} does not match 2^{}",
            state.len(),
            h1.l
        )));
    }
    match method {
        Method::EigenDecomposition => {
            let spec = diagonalize(h1)?;
            let dim = spec.dim();
            let v = spec.vectors();
            let coeff: Vec<C64> = (0..dim)
                .map(|k| spec.eigenvector(k).iter().zip(state).map(|(a, b)| b * a).sum())
                .collect();
            Ok(times
                .iter()
                .map(|&t| {
                    let c: Vec<C64> = coeff
                        .iter()
                        .zip(spec.energies())
                        .map(|(c, e)| c * C64::from_polar(1.0, -e * t))
                        .collect();
                    (0..dim).map(|i| (0..dim).map(|k| c[k] * v[(i, k)]).sum()).collect()
                })
                .collect())
        }
        Method::Krylov => {
            let op = hamiltonian_operator(h1);
            let mut stepper = KrylovStepper::new(&op, state, KrylovOptions::default())?;
            times
                .iter()
                .map(|&t| {
                    let mut out = vec![C64::new(0.0, 0.0); state.len()];
                    stepper.advance_to(t, &mut out)?;
                    Ok(out)
                })
                .collect()
        }
    }
}

/// `<n(t)|O|m(t)>` with `|x(t)> = exp(-i H1 t)|x>`.
pub fn matrix_element_series(
    n: &BasisState,
    m: &BasisState,
    obs: &Observable,
    h1: &ModelParams,
    times: &[f64],
) -> Result<MatrixElementSeries> {
    if n.l != m.l || n.l != h1.l || obs.l != h1.l {
        return Err(Error::Contract("states, observable and Hamiltonian must share L".into()));
    }
    if n.basis != h1.basis || m.basis != h1.basis {
        return Err(Error::BasisMismatch(format!(
            "states must be labelled in the {} basis of the Hamiltonian",
            h1.basis
        )));
    }
    let pair = (n.bits as u32, m.bits as u32);
    let method = Method::for_sites(h1.l);
    let values = pair_series(&[pair], obs, h1, times, method)?.pop().unwrap();
    Ok(MatrixElementSeries { pair, values, method })
}

/// Series `<n(t)|O|m(t)>` for many pairs of basis indices at once.
pub fn pair_series(
    pairs: &[(u32, u32)],
    obs: &Observable,
    h1: &ModelParams,
    times: &[f64],
    method: Method,
) -> Result<Vec<Vec<C64>>> {
    h1.validate()?;
    check_times(times)?;
    if obs.l != h1.l {
        return Err(Error::Contract(format!("observable on {} sites, Hamiltonian on {}", obs.l, h1.l)));
    }
    let dim = h1.dim() as u32;
    if pairs.iter().any(|&(a, b)| a >= dim || b >= dim) {
        return Err(Error::Contract("basis index outside the Hilbert space".into()));
    }
    match method {
        Method::EigenDecomposition => eigen_pair_series(pairs, obs, &*diagonalize(h1)?, times),
        Method::Krylov => krylov_pair_series(pairs, obs, h1, times),
    }
}

fn eigen_pair_series(pairs: &[(u32, u32)], obs: &Observable, spec: &Spectrum, times: &[f64]) -> Result<Vec<Vec<C64>>> {
    let dim = spec.dim();
    let op = obs.operator(spec.params().basis);
    let mut states: Vec<u32> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    states.sort_unstable();
    states.dedup();
    let slot: HashMap<u32, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let ns = states.len();
    let nt = times.len();
    let mut out = vec![vec![C64::new(0.0, 0.0); nt]; pairs.len()];
    if nt == 0 || pairs.is_empty() {
        return Ok(out);
    }
    let v = spec.vectors();
    let e = spec.energies();
    // Columns hold (time, state) combinations; six real dim-length arrays each.
    let per_col = 6 * 8 * dim;
    let cols = (BATCH_BYTES / per_col).max(ns);
    let t_chunk = (cols / ns).max(1);
    let mut t0 = 0;
    while t0 < nt {
        let t1 = (t0 + t_chunk).min(nt);
        let ncol = (t1 - t0) * ns;
        let col = |ti: usize, si: usize| (ti - t0) * ns + si;
        let mut br = Mat::<f64>::zeros(dim, ncol);
        let mut bi = Mat::<f64>::zeros(dim, ncol);
        for ti in t0..t1 {
            for (si, &x) in states.iter().enumerate() {
                let c = col(ti, si);
                for k in 0..dim {
                    let amp = v[(x as usize, k)];
                    let (s, co) = (-e[k] * times[ti]).sin_cos();
                    br[(k, c)] = amp * co;
                    bi[(k, c)] = amp * s;
                }
            }
        }
        let mut pr = Mat::<f64>::zeros(dim, ncol);
        let mut pi = Mat::<f64>::zeros(dim, ncol);
        matmul(pr.as_mut(), Accum::Replace, v, br.as_ref(), 1.0, par());
        matmul(pi.as_mut(), Accum::Replace, v, bi.as_ref(), 1.0, par());
        drop(br);
        drop(bi);
        let mut opr = Mat::<f64>::zeros(dim, ncol);
        let mut opi = Mat::<f64>::zeros(dim, ncol);
        for c in 0..ncol {
            op.apply_real_into(pr.col_as_slice(c), opr.col_as_slice_mut(c));
            op.apply_real_into(pi.col_as_slice(c), opi.col_as_slice_mut(c));
        }
        let vals: Vec<Vec<C64>> = pairs
            .par_iter()
            .map(|&(n, m)| {
                (t0..t1)
                    .map(|ti| {
                        let cn = col(ti, slot[&n]);
                        let cm = col(ti, slot[&m]);
                        let (ar, ai) = (pr.col_as_slice(cn), pi.col_as_slice(cn));
                        let (br, bi) = (opr.col_as_slice(cm), opi.col_as_slice(cm));
                        let mut re = 0.0;
                        let mut im = 0.0;
                        for k in 0..dim {
                            re += ar[k] * br[k] + ai[k] * bi[k];
                            im += ar[k] * bi[k] - ai[k] * br[k];
                        }
                        C64::new(re, im)
                    })
                    .collect()
            })
            .collect();
        for (o, v) in out.iter_mut().zip(vals) {
            o[t0..t1].copy_from_slice(&v);
        }
        t0 = t1;
    }
    Ok(out)
}

fn krylov_pair_series(pairs: &[(u32, u32)], obs: &Observable, h1: &ModelParams, times: &[f64]) -> Result<Vec<Vec<C64>>> {
    let h = hamiltonian_operator(h1);
    let o = obs.operator(h1.basis);
    let dim = h1.dim();
    pairs
        .par_iter()
        .map(|&(n, m)| krylov_single_pair(&h, &o, dim, n, m, times))
        .collect()
}

fn krylov_single_pair(h: &PauliSumOperator, o: &PauliSumOperator, dim: usize, n: u32, m: u32, times: &[f64]) -> Result<Vec<C64>> {
    let unit = |x: u32| {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[x as usize] = C64::new(1.0, 0.0);
        v
    };
    let opts = KrylovOptions::default();
    let mut sn = KrylovStepper::new(h, &unit(n), opts)?;
    let mut sm = if n == m { None } else { Some(KrylovStepper::new(h, &unit(m), opts)?) };
    let mut psi_n = vec![C64::new(0.0, 0.0); dim];
    let mut psi_m = vec![C64::new(0.0, 0.0); dim];
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        sn.advance_to(t, &mut psi_n)?;
        let value = match sm.as_mut() {
            Some(s) => {
                s.advance_to(t, &mut psi_m)?;
                o.expectation(&psi_n, &psi_m)
            }
            None => o.expectation(&psi_n, &psi_n),
        };
        out.push(value);
    }
    Ok(out)
}

/// Pairwise summation.
fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        x.iter().sum()
    } else {
        let (a, b) = x.split_at(x.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Imaginary residue allowed before a reconstruction is rejected.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-9;

/// Per-representative weights: `(sum over members of mult * rho * sign,
/// same restricted to diagonal members)`.
fn representative_weights(plan: &OrbitPlan, rho: &dyn Fn(u32, u32) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); plan.n_sim()];
    let mut diag_terms: Vec<Vec<f64>> = vec![Vec::new(); plan.n_sim()];
    for e in &plan.expansion {
        let (n, m) = e.pair;
        let mult = if n == m { 1.0 } else { 2.0 };
        let w = mult * rho(n, m) * e.sign as f64;
        terms[e.rep].push(w);
        if n == m {
            diag_terms[e.rep].push(w);
        }
    }
    (
        terms.iter().map(|t| pairwise_sum(t)).collect(),
        diag_terms.iter().map(|t| pairwise_sum(t)).collect(),
    )
}

/// Representative series plus the reconstructed expectation.
pub struct Reconstruction {
    pub series: TimeSeries,
    pub representative_series: Vec<Vec<C64>>,
    pub method: Method,
}

/// `<O(t)>` over the truncated density matrix, propagating one
/// representative per orbit.
pub fn reconstruct(
    trunc: &TruncatedDensityMatrix,
    plan: &OrbitPlan,
    obs: &Observable,
    h1: &ModelParams,
    times: &[f64],
) -> Result<TimeSeries> {
    Ok(reconstruct_detailed(trunc, plan, obs, h1, times, Method::for_sites(h1.l))?.series)
}

pub fn reconstruct_detailed(
    trunc: &TruncatedDensityMatrix,
    plan: &OrbitPlan,
    obs: &Observable,
    h1: &ModelParams,
    times: &[f64],
    method: Method,
) -> Result<Reconstruction> {
    let rho = &trunc.rho_w;
    if rho.l() != h1.l || plan.l != h1.l {
        return Err(Error::Contract("density matrix, plan and Hamiltonian must share L".into()));
    }
    if rho.basis() != h1.basis {
        return Err(Error::BasisMismatch(format!(
            "density matrix in the {} basis, quench Hamiltonian in the {} basis",
            rho.basis(),
            h1.basis
        )));
    }
    if plan.observable != *obs {
        return Err(Error::Contract("orbit plan was built for a different observable".into()));
    }
    let reps = pair_series(&plan.representatives, obs, h1, times, method)?;
    let (weights, diag_weights) = representative_weights(plan, &|m, n| rho.get(m, n));
    let mut values = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let re: Vec<f64> = reps.iter().zip(&weights).map(|(s, w)| w * s[ti].re).collect();
        let im: f64 = reps.iter().zip(&diag_weights).map(|(s, w)| w * s[ti].im).sum();
        if im.abs() >= IMAGINARY_RESIDUE_TOL {
            return Err(Error::Internal(format!(
                "imaginary residue {im:e} at t = {} exceeds {IMAGINARY_RESIDUE_TOL:e}",
                times[ti]
            )));
        }
        values.push(pairwise_sum(&re));
    }
    let meta = SeriesMeta {
        source: format!("{:?}", rho.source()).to_lowercase(),
        w: Some(trunc.weight),
        n_w: Some(trunc.n_w),
        n_sim: Some(plan.n_sim()),
    };
    Ok(Reconstruction { series: TimeSeries::new(times.to_vec(), values, meta), representative_series: reps, method })
}

/// Appendix-style quadrature `sqrt(sum_{m,n} (d_mn O_nm(t))^2)` over
/// ordered pairs. `series_by_pair` lists stored pairs `(m <= n)`.
pub fn statistical_band(
    series_by_pair: &[((u32, u32), Vec<C64>)],
    element_errors: &HashMap<u64, f64>,
    times: &[f64],
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; times.len()];
    for ((m, n), series) in series_by_pair {
        if series.len() != times.len() {
            return Err(Error::Contract("series length does not match the time grid".into()));
        }
        let d = *element_errors
            .get(&pair_key(*m, *n))
            .ok_or_else(|| Error::Contract(format!("no error estimate for element ({m}, {n})")))?;
        let mult = if m == n { 1.0 } else { 2.0 };
        for (a, o) in acc.iter_mut().zip(series) {
            *a += mult * d * d * o.norm_sqr();
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

/// [`statistical_band`] evaluated through an orbit plan: members share the
/// modulus of their representative's series.
pub fn statistical_band_from_plan(
    plan: &OrbitPlan,
    representative_series: &[Vec<C64>],
    element_errors: &HashMap<u64, f64>,
) -> Result<Vec<f64>> {
    let nt = representative_series.first().map_or(0, Vec::len);
    let mut per_rep = vec![0.0; plan.n_sim()];
    for e in &plan.expansion {
        let (m, n) = e.pair;
        let d = *element_errors
            .get(&pair_key(m, n))
            .ok_or_else(|| Error::Contract(format!("no error estimate for element ({m}, {n})")))?;
        let mult = if m == n { 1.0 } else { 2.0 };
        per_rep[e.rep] += mult * d * d;
    }
    Ok((0..nt)
        .map(|t| {
            per_rep
                .iter()
                .zip(representative_series)
                .map(|(w, s)| w * s[t].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Relative RMS deviation `sqrt(mean |exact - approx|^2 / mean |exact|^2)`
/// with trapezoidal time averages.
pub fn truncation_error(exact: &TimeSeries, truncated: &TimeSeries) -> Result<f64> {
    if exact.times != truncated.times {
        return Err(Error::Contract("truncation error needs identical time grids".into()));
    }
    let t = &exact.times;
    let diff: Vec<f64> = exact.values.iter().zip(&truncated.values).map(|(a, b)| (a - b).powi(2)).collect();
    let norm: Vec<f64> = exact.values.iter().map(|a| a * a).collect();
    let (num, den) = if t.len() < 2 {
        (diff.iter().sum::<f64>(), norm.iter().sum::<f64>())
    } else {
        (trapezoid(t, &diff), trapezoid(t, &norm))
    };
    if den == 0.0 {
        return Err(Error::UndefinedNormalization("exact series vanishes identically".into()));
    }
    Ok((num / den).sqrt())
}

/// Every stored pair of `entries` as its own representative, for checks that
/// bypass symmetry reduction.
pub fn stored_pairs(entries: &[Entry]) -> Vec<(u32, u32)> {
    entries.iter().map(|e| (e.m, e.n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{heisenberg_expectation, thermal_density_matrix};
    use crate::model::{Basis, ObservableKind};
    use crate::symmetry::plan_simulations;
    use crate::truncation::{truncate, TruncationTarget};

    #[test]
    fn evolution_basics() {
        let h1 = ModelParams::quench(4, 1.0, 1.0).unwrap();
        let spec = diagonalize(&h1).unwrap();
        let psi: Vec<C64> = spec.eigenvector(3).iter().map(|&x| C64::new(x, 0.0)).collect();
        let traj = evolve_state(&h1, &psi, &[0.0, 1.0, 2.5]).unwrap();
        for (i, t) in [0.0, 1.0, 2.5].iter().enumerate() {
            let overlap: C64 = psi.iter().zip(&traj[i]).map(|(a, b)| a.conj() * b).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-10);
            assert!((overlap - C64::from_polar(1.0, -spec.energies()[3] * t)).norm() < 1e-10);
        }
        for (a, b) in traj[0].iter().zip(&psi) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn neel_and_commuting_quench() {
        let times: Vec<f64> = (0..9).map(|i| 0.7 * i as f64).collect();
        let neel = BasisState::neel(4, Basis::Z);
        let h1 = ModelParams::quench(4, 1.0, 1.0).unwrap();
        let s = matrix_element_series(&neel, &neel, &Observable::staggered_z(4), &h1, &times).unwrap();
        assert!((s.values[0] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        let ising = ModelParams::quench(4, 0.0, 0.0).unwrap();
        let s = matrix_element_series(&neel, &neel, &Observable::staggered_z(4), &ising, &times).unwrap();
        assert!(s.values.iter().all(|v| (v - C64::new(-1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn full_weight_matches_oracle() {
        let times: Vec<f64> = (0..21).map(|i| 0.5 * i as f64).collect();
        let h0 = ModelParams::initial(4, 0.5, 0.0).unwrap();
        let h1 = ModelParams::quench(4, 1.0, 1.0).unwrap();
        for kind in [ObservableKind::StaggeredMagnetizationZ, ObservableKind::MagnetizationX] {
            let obs = Observable::new(kind, 4);
            let rho = thermal_density_matrix(&h0, 1.0).unwrap();
            let trunc = truncate(&rho, TruncationTarget::Cutoff(0.0)).unwrap();
            let plan = plan_simulations(&trunc.index_set, &obs, &h1).unwrap();
            let rec = reconstruct(&trunc, &plan, &obs, &h1, &times).unwrap();
            let exact = heisenberg_expectation(&rho, &obs, &h1, &times).unwrap();
            for (a, b) in rec.values.iter().zip(&exact.values) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!(truncation_error(&exact, &rec).unwrap() < 1e-9);
        }
    }

    #[test]
    fn krylov_and_eigen_pair_series_agree() {
        let times: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let h1 = ModelParams::quench(6, 1.0, 1.0).unwrap();
        let obs = Observable::staggered_z(6);
        let pairs = [(0, 0), (5, 9), (21, 42)];
        let a = pair_series(&pairs, &obs, &h1, &times, Method::EigenDecomposition).unwrap();
        let b = pair_series(&pairs, &obs, &h1, &times, Method::Krylov).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn band_examples() {
        let times = [0.0, 1.0];
        let series = vec![((1u32, 2u32), vec![C64::new(0.3, 0.4), C64::new(1.0, 0.0)])];
        let mut errs = HashMap::new();
        errs.insert(pair_key(1, 2), 0.0);
        assert_eq!(statistical_band(&series, &errs, &times).unwrap(), vec![0.0, 0.0]);
        let diag = vec![((2u32, 2u32), vec![C64::new(0.3, 0.4), C64::new(-2.0, 0.0)])];
        errs.insert(pair_key(2, 2), 0.1);
        let band = statistical_band(&diag, &errs, &times).unwrap();
        assert!((band[0] - 0.05).abs() < 1e-15 && (band[1] - 0.2).abs() < 1e-15);
        assert!(statistical_band(&diag, &HashMap::new(), &times).is_err());
    }

    #[test]
    fn truncation_error_limits() {
        let t: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        let exact = TimeSeries::new(t.clone(), v.clone(), SeriesMeta::default());
        assert_eq!(truncation_error(&exact, &exact).unwrap(), 0.0);
        let zero = TimeSeries::new(t.clone(), vec![0.0; 50], SeriesMeta::default());
        assert!((truncation_error(&exact, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!(truncation_error(&zero, &exact).is_err());
    }
}
