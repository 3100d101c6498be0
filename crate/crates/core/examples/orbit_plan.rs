//! How far symmetries of the quench Hamiltonian cut the simulation count.
//!
//! For each observable the retained elements are grouped into orbits of
//! `{R^a T_1^b}`; each orbit needs one pure-state simulation, and some
//! orbits drop out entirely because their contribution vanishes.

use std::collections::BTreeMap;

use thermoquench::exact::thermal_density_matrix;
use thermoquench::symmetry::plan_simulations;
use thermoquench::truncation::{truncate, TruncationTarget};
use thermoquench::{Basis, ModelParams, Observable};

fn main() -> thermoquench::Result<()> {
    let l = 10;
    for (g0, basis, obs) in [
        (0.5, Basis::Z, Observable::staggered_z(l)),
        (1.0, Basis::Z, Observable::staggered_z(l)),
        (1.5, Basis::X, Observable::magnetization_x(l)),
    ] {
        let h0 = ModelParams::initial(l, g0, 0.0)?.with_basis(basis);
        let h1 = ModelParams::quench(l, 1.0, 1.0)?.with_basis(basis);
        let rho = thermal_density_matrix(&h0, 1.0)?;
        for w in [0.8, 0.9, 0.95] {
            let trunc = truncate(&rho, TruncationTarget::Weight(w))?;
            let plan = plan_simulations(&trunc.index_set, &obs, &h1)?;
            let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
            for e in &plan.excluded {
                *reasons.entry(format!("{:?}", e.reason)).or_default() += 1;
            }
            println!(
                "g0={g0} {} w={w}: N_w={} N_sim={} reduction {:.1}x, excluded {:?}",
                obs.kind.name(),
                trunc.n_w,
                plan.n_sim(),
                trunc.n_w as f64 / plan.n_sim() as f64,
                reasons
            );
        }
    }
    Ok(())
}
