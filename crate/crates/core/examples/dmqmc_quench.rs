//! Quench dynamics from a sampled initial state, with the statistical band
//! propagated from the per-element DMQMC errors.
//!
//! The sample is symmetrized over the initial-Hamiltonian group before
//! truncation, and the result is set against the exact curve.

use thermoquench::dmqmc::{element_error, sample_with, DmqmcConfig};
use thermoquench::dynamics::{reconstruct_detailed, statistical_band_from_plan, Method};
use thermoquench::exact::{heisenberg_expectation, thermal_density_matrix};
use thermoquench::series::uniform_grid;
use thermoquench::symmetry::{plan_simulations, symmetrize_errors, symmetrize_rho};
use thermoquench::truncation::{truncate, TruncationTarget};
use thermoquench::{ModelParams, Observable};

fn main() -> thermoquench::Result<()> {
    let (l, beta) = (8, 0.5);
    let h0 = ModelParams::initial(l, 1.0, 0.0)?;
    let h1 = ModelParams::quench(l, 1.0, 1.0)?;
    let obs = Observable::staggered_z(l);
    let times = uniform_grid(8.0, 33);

    let config = DmqmcConfig { n_psip: 100_000, n_loops: 8, seed: 11, ..DmqmcConfig::default() };
    let (sampled, stats) = sample_with(&h0, beta, &config)?;
    let rho = symmetrize_rho(&sampled, &h0)?;
    let trunc = truncate(&rho, TruncationTarget::Weight(0.9))?;
    let plan = plan_simulations(&trunc.index_set, &obs, &h1)?;

    let pairs: Vec<(u32, u32)> = plan.expansion.iter().map(|e| e.pair).collect();
    let errors = symmetrize_errors(&element_error(&stats, &pairs)?, &h0);
    let run = reconstruct_detailed(&trunc, &plan, &obs, &h1, &times, Method::for_sites(l))?;
    let band = statistical_band_from_plan(&plan, &run.representative_series, &errors)?;
    let exact = heisenberg_expectation(&thermal_density_matrix(&h0, beta)?, &obs, &h1, &times)?;

    println!("w={:.3} N_w={} N_sim={}", trunc.weight, trunc.n_w, plan.n_sim());
    println!("{:>5} {:>9} {:>9} {:>8}", "t", "exact", "sampled", "band");
    for i in (0..times.len()).step_by(4) {
        println!("{:5.2} {:9.4} {:9.4} {:8.4}", times[i], exact.values[i], run.series.values[i], band[i]);
    }
    Ok(())
}
