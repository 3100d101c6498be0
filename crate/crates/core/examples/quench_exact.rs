//! Thermal quench at L = 8 from an exactly diagonalized initial state.
//!
//! The density matrix is truncated to a target Frobenius weight, reduced to
//! one simulation per symmetry orbit, and the reconstruction is compared
//! against the exact Heisenberg-picture expectation.
//!
//! ```text
//! cargo run --release --example quench_exact -- [weight]
//! ```

use thermoquench::exact::{heisenberg_expectation, thermal_density_matrix};
use thermoquench::dynamics::reconstruct;
use thermoquench::series::uniform_grid;
use thermoquench::symmetry::plan_simulations;
use thermoquench::truncation::{truncate, TruncationTarget};
use thermoquench::{ModelParams, Observable};

fn main() -> thermoquench::Result<()> {
    let weight: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.95);
    let (l, beta, g0) = (8, 1.0, 0.5);

    let h0 = ModelParams::initial(l, g0, 0.0)?;
    let h1 = ModelParams::quench(l, 1.0, 1.0)?;
    let obs = Observable::staggered_z(l);
    let times = uniform_grid(10.0, 41);

    let rho = thermal_density_matrix(&h0, beta)?;
    let trunc = truncate(&rho, TruncationTarget::Weight(weight))?;
    let plan = plan_simulations(&trunc.index_set, &obs, &h1)?;
    println!(
        "L={l} beta={beta} g0={g0}: w={:.4} N_w={} N_sim={} ({} excluded)",
        trunc.weight,
        trunc.n_w,
        plan.n_sim(),
        plan.excluded.len()
    );

    let approx = reconstruct(&trunc, &plan, &obs, &h1, &times)?;
    let exact = heisenberg_expectation(&rho, &obs, &h1, &times)?;
    println!("{:>6} {:>10} {:>10}", "t", "exact", "truncated");
    for ((t, e), a) in times.iter().zip(&exact.values).zip(&approx.values).step_by(4) {
        println!("{t:6.2} {e:10.5} {a:10.5}");
    }
    Ok(())
}
