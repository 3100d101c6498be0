//! Late-time values after quenches from thermal states, compared with the
//! time average of the exact dynamics at L = 10.

use thermoquench::exact::{heisenberg_expectation, tde_average, thermal_density_matrix};
use thermoquench::series::grid_between;
use thermoquench::{Basis, ModelParams, Observable};

fn main() -> thermoquench::Result<()> {
    let l = 10;
    let times = grid_between(20.0, 60.0, 201);
    for (g0, obs) in [
        (0.5, Observable::staggered_z(l)),
        (1.0, Observable::staggered_z(l)),
        (1.5, Observable::magnetization_x(l)),
    ] {
        let h0 = ModelParams::initial(l, g0, 0.0)?;
        let h1 = ModelParams::quench(l, 1.0, 1.0)?;
        for beta in [0.0, 1.0, 4.0] {
            let tde = tde_average(&h0, &h1, &obs, beta)?;
            let rho = thermal_density_matrix(&h0.with_basis(Basis::Z), beta)?;
            let series = heisenberg_expectation(&rho, &obs, &h1, &times)?;
            let late = series.window_mean(20.0, 60.0)?;
            println!("g0={g0} beta={beta} {}: TDE {tde:+.4}, mean over [20, 60] {late:+.4}", obs.kind.name());
        }
    }
    Ok(())
}
