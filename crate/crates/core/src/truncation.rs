//! Magnitude truncation of density matrices and Frobenius weights.
//!
//! Elements are ranked by `|rho_mn|` (ties broken by ascending `(m, n)`),
//! and a prefix of that ranking is kept. The weight is the ratio of
//! full-matrix Frobenius norms before renormalization, so an off-diagonal
//! stored element contributes twice.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityMatrix, Entry, Source};
use crate::error::{Error, Result};
use crate::exact::thermal_density_matrix;
use crate::model::{Basis, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum TruncationTarget {
    /// Smallest prefix whose weight reaches the target.
    Weight(f64),
    /// Exactly this many stored (upper-triangle) elements.
    Count(usize),
    /// Every element with magnitude above the cutoff.
    Cutoff(f64),
}

#[derive(Clone, Debug)]
pub struct TruncatedDensityMatrix {
    /// Retained elements renormalized to unit trace.
    pub rho_w: DensityMatrix,
    /// Retained stored pairs `(m, n)`, `m <= n`, by descending magnitude.
    pub index_set: Vec<(u32, u32)>,
    /// Largest dropped magnitude (0 when nothing was dropped).
    pub epsilon: f64,
    /// Frobenius weight of the retained elements before renormalization.
    pub weight: f64,
    /// Retained ordered pairs; an off-diagonal stored element counts twice.
    pub n_w: usize,
}

#[derive(Serialize)]
struct ManifestEntry {
    m: u32,
    n: u32,
    value: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    epsilon: f64,
    w: f64,
    #[serde(rename = "N_w")]
    n_w: usize,
    retained: &'a [ManifestEntry],
}

impl TruncatedDensityMatrix {
    /// JSON manifest `{epsilon, w, N_w, retained: [{m, n, value}]}`.
    pub fn write_manifest<W: Write>(&self, out: W) -> Result<()> {
        let retained: Vec<ManifestEntry> = self
            .index_set
            .iter()
            .map(|&(m, n)| ManifestEntry { m, n, value: self.rho_w.get(m, n) })
            .collect();
        let manifest = Manifest { epsilon: self.epsilon, w: self.weight, n_w: self.n_w, retained: &retained };
        serde_json::to_writer_pretty(out, &manifest)?;
        Ok(())
    }
}

fn ranked(rho: &DensityMatrix) -> Vec<Entry> {
    let mut entries = rho.entries().to_vec();
    entries.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()).then(a.key().cmp(&b.key())));
    entries
}

fn mass(e: &Entry) -> f64 {
    e.multiplicity() as f64 * e.value * e.value
}

/// Truncates `rho` to the prefix of its magnitude ranking selected by
/// `target`, then renormalizes the trace.
pub fn truncate(rho: &DensityMatrix, target: TruncationTarget) -> Result<TruncatedDensityMatrix> {
    if rho.is_empty() {
        return Err(Error::Domain("cannot truncate an empty density matrix".into()));
    }
    let ranked = ranked(rho);
    let total: f64 = ranked.iter().map(mass).sum();
    let keep = match target {
        TruncationTarget::Weight(w) => {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Domain(format!("weight target must lie in (0, 1], got {w}")));
            }
            let goal = w * w * total;
            let mut acc = 0.0;
            let mut keep = ranked.len();
            for (i, e) in ranked.iter().enumerate() {
                acc += mass(e);
                if acc >= goal {
                    keep = i + 1;
                    break;
                }
            }
            keep
        }
        TruncationTarget::Count(n) => {
            if n == 0 || n > ranked.len() {
                return Err(Error::Domain(format!(
                    "count target must lie in 1..={}, got {n}",
                    ranked.len()
                )));
            }
            n
        }
        TruncationTarget::Cutoff(eps) => {
            if !(eps >= 0.0) {
                return Err(Error::Domain(format!("cutoff must be >= 0, got {eps}")));
            }
            ranked.iter().take_while(|e| e.value.abs() > eps).count()
        }
    };
    truncate_prefix(rho, ranked, keep, total)
}

fn truncate_prefix(rho: &DensityMatrix, ranked: Vec<Entry>, keep: usize, total: f64) -> Result<TruncatedDensityMatrix> {
    let epsilon = ranked.get(keep).map_or(0.0, |e| e.value.abs());
    let retained = &ranked[..keep];
    let kept_mass: f64 = retained.iter().map(mass).sum();
    let weight = if total > 0.0 { (kept_mass / total).sqrt() } else { 0.0 };
    let trace: f64 = retained.iter().filter(|e| e.is_diagonal()).map(|e| e.value).sum();
    if trace.abs() < 1e-12 {
        return Err(Error::DegenerateTruncation(format!(
            "retained {keep} elements with trace {trace:e}; keep more diagonal weight"
        )));
    }
    let index_set = retained.iter().map(|e| (e.m, e.n)).collect();
    let n_w = retained.iter().map(Entry::multiplicity).sum();
    let scaled = retained.iter().map(|e| Entry { value: e.value / trace, ..*e }).collect();
    let rho_w = DensityMatrix::from_entries(rho.l(), rho.basis(), Source::Truncated, scaled)?;
    Ok(TruncatedDensityMatrix { rho_w, index_set, epsilon, weight, n_w })
}

/// Frobenius weight of `subset` relative to `rho`.
pub fn weight_of(subset: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    let total = rho.frobenius_sq();
    if rho.is_empty() || total == 0.0 {
        return Err(Error::Domain("weight relative to an empty density matrix".into()));
    }
    Ok((subset.frobenius_sq() / total).sqrt())
}

/// One point of an `N_w` sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub l: usize,
    pub beta: f64,
    pub g0: f64,
    pub h0: f64,
    pub basis: Basis,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub w_target: f64,
    /// `Err` carries the failure message for a row that could not be built.
    pub outcome: std::result::Result<(usize, f64), String>,
}

impl SweepRow {
    pub fn n_w(&self) -> Option<usize> {
        self.outcome.as_ref().ok().map(|r| r.0)
    }
}

/// Minimal `N_w` reaching `w_target` for the exact thermal state at every
/// grid point. Failing rows are reported, the sweep continues.
pub fn sweep_nw(grid: &[SweepPoint], w_target: f64) -> Vec<SweepRow> {
    let row = |p: &SweepPoint| {
        let outcome = (|| {
            let params = ModelParams::initial(p.l, p.g0, p.h0)?.with_basis(p.basis);
            let rho = thermal_density_matrix(&params, p.beta)?;
            let t = truncate(&rho, TruncationTarget::Weight(w_target))?;
            Ok::<_, Error>((t.n_w, t.weight))
        })()
        .map_err(|e| e.to_string());
        SweepRow { point: *p, w_target, outcome }
    };
    // Large rows hold several hundred megabytes each; run them one at a time.
    let (small, large): (Vec<(usize, &SweepPoint)>, Vec<(usize, &SweepPoint)>) =
        grid.iter().enumerate().partition(|(_, p)| p.l <= 10);
    let mut rows: Vec<(usize, SweepRow)> = small.into_par_iter().map(|(i, p)| (i, row(p))).collect();
    rows.extend(large.into_iter().map(|(i, p)| (i, row(p))));
    rows.sort_by_key(|(i, _)| *i);
    rows.into_iter().map(|(_, r)| r).collect()
}

/// CSV with columns `L,beta,g0,h0,basis,w_target,N_w,achieved_w`; failed
/// rows leave the last two fields empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "L,beta,g0,h0,basis,w_target,N_w,achieved_w")?;
    for r in rows {
        let p = r.point;
        match &r.outcome {
            Ok((n_w, w)) => writeln!(out, "{},{},{},{},{},{},{},{}", p.l, p.beta, p.g0, p.h0, p.basis, r.w_target, n_w, w)?,
            Err(_) => writeln!(out, "{},{},{},{},{},{},,", p.l, p.beta, p.g0, p.h0, p.basis, r.w_target)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BasisState;

    fn rho(l: usize, entries: &[(u32, u32, f64)]) -> DensityMatrix {
        DensityMatrix::from_entries(
            l,
            Basis::Z,
            Source::Exact,
            entries.iter().map(|&(m, n, value)| Entry { m, n, value }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn keep_everything() {
        let p = ModelParams::initial(4, 0.5, 0.0).unwrap();
        let full = thermal_density_matrix(&p, 1.0).unwrap();
        let t = truncate(&full, TruncationTarget::Cutoff(0.0)).unwrap();
        assert!((t.weight - 1.0).abs() < 1e-15);
        assert_eq!(t.epsilon, 0.0);
        assert_eq!(t.n_w, full.ordered_len());
        for e in full.entries() {
            assert!((t.rho_w.get(e.m, e.n) - e.value / full.trace()).abs() < 1e-15);
        }
        let w1 = truncate(&full, TruncationTarget::Weight(1.0)).unwrap();
        assert_eq!(w1.n_w, full.ordered_len());
    }

    #[test]
    fn ground_state_dominates_at_low_temperature() {
        let p = ModelParams::new(2, 1.0, 0.0, 0.0, 0.5, Basis::Z).unwrap();
        let full = thermal_density_matrix(&p, 50.0).unwrap();
        let t = truncate(&full, TruncationTarget::Count(1)).unwrap();
        let s = BasisState::from_sites("01", Basis::Z).unwrap().index() as u32;
        assert_eq!(t.index_set, vec![(s, s)]);
        assert!((t.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_temperature_diagonal() {
        let p = ModelParams::initial(4, 1.5, 0.0).unwrap();
        let full = thermal_density_matrix(&p, 0.0).unwrap();
        let t = truncate(&full, TruncationTarget::Count(16)).unwrap();
        assert!((t.weight - 1.0).abs() < 1e-12);
        assert!(t.index_set.iter().all(|(m, n)| m == n));
        let sub = full.filtered(|e| e.is_diagonal() && e.m < 5);
        assert!((weight_of(&sub, &full).unwrap() - (5.0f64 / 16.0).sqrt()).abs() < 1e-12);
        assert_eq!(weight_of(&full, &full).unwrap(), 1.0);
        assert_eq!(weight_of(&full.filtered(|_| false), &full).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let r = rho(2, &[(0, 0, 0.5), (1, 1, 0.5), (0, 1, 0.9)]);
        assert!(matches!(truncate(&r, TruncationTarget::Weight(1.5)), Err(Error::Domain(_))));
        assert!(matches!(truncate(&r, TruncationTarget::Count(1)), Err(Error::DegenerateTruncation(_))));
        let empty = rho(2, &[]);
        assert!(truncate(&empty, TruncationTarget::Count(1)).is_err());
        assert!(weight_of(&empty, &empty).is_err());
    }

    #[test]
    fn off_diagonal_counts_twice() {
        let r = rho(2, &[(0, 0, 0.6), (1, 1, 0.4), (0, 1, 0.3)]);
        let t = truncate(&r, TruncationTarget::Count(2)).unwrap();
        assert_eq!(t.index_set, vec![(0, 0), (1, 1)]);
        assert_eq!(t.n_w, 2);
        let t = truncate(&r, TruncationTarget::Count(3)).unwrap();
        assert_eq!(t.n_w, 4);
        let expected = ((0.36 + 0.16) / (0.36 + 0.16 + 0.18f64)).sqrt();
        let t2 = truncate(&r, TruncationTarget::Weight(expected)).unwrap();
        assert_eq!(t2.index_set.len(), 2);
        assert!((t2.epsilon - 0.3).abs() < 1e-15);
    }

    #[test]
    fn manifest_and_csv() {
        let r = rho(2, &[(0, 0, 0.75), (1, 1, 0.25)]);
        let t = truncate(&r, TruncationTarget::Count(1)).unwrap();
        let mut buf = Vec::new();
        t.write_manifest(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["N_w"], 1);
        assert_eq!(v["retained"][0]["value"], 1.0);
        assert_eq!(v["epsilon"], 0.25);

        let rows = sweep_nw(
            &[
                SweepPoint { l: 4, beta: 0.0, g0: 0.5, h0: 0.0, basis: Basis::Z },
                SweepPoint { l: 3, beta: 0.0, g0: 0.5, h0: 0.0, basis: Basis::Z },
            ],
            0.93,
        );
        assert_eq!(rows[0].n_w(), Some(14));
        assert!(rows[1].outcome.is_err());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\n4,0,0.5,0,z,0.93,14,"));
        assert!(text.ends_with("3,0,0.5,0,z,0.93,,\n"));
    }
}
