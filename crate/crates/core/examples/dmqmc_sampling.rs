//! Sampling the thermal density matrix with DMQMC and checking it against
//! exact diagonalization at L = 4.
//!
//! Each step is a first-order discretization of the Bloch equation, so the
//! sample carries a bias linear in `delta_beta` on top of the statistical
//! error; the sweep below shows it shrinking.

use thermoquench::density::pair_key;
use thermoquench::dmqmc::{element_error, sample_with, DmqmcConfig};
use thermoquench::exact::thermal_density_matrix;
use thermoquench::ModelParams;

fn main() -> thermoquench::Result<()> {
    let (l, beta) = (4, 0.5);
    let h0 = ModelParams::initial(l, 1.0, 0.0)?;
    let exact = thermal_density_matrix(&h0, beta)?;

    for delta_beta in [0.01, 0.001] {
        let config = DmqmcConfig { n_psip: 100_000, n_loops: 10, delta_beta, seed: 7, ..DmqmcConfig::default() };
        let (sampled, stats) = sample_with(&h0, beta, &config)?;
        let pairs: Vec<(u32, u32)> = sampled.entries().iter().map(|e| (e.m, e.n)).collect();
        let errors = element_error(&stats, &pairs)?;

        println!("delta_beta = {delta_beta}: {} loops, chi_diag = {}", stats.loops_used, stats.chi_diag);
        println!("{:>5} {:>5} {:>10} {:>10} {:>9} {:>7}", "m", "n", "dmqmc", "exact", "error", "z");
        let mut ranked = sampled.entries().to_vec();
        ranked.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
        for e in ranked.iter().take(6) {
            let d = errors[&pair_key(e.m, e.n)];
            let x = exact.get(e.m, e.n);
            println!("{:05b} {:05b} {:10.6} {:10.6} {:9.2e} {:7.2}", e.m, e.n, e.value, x, d, (e.value - x) / d);
        }
        println!();
    }
    Ok(())
}
