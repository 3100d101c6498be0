//! Number of density-matrix elements needed to reach a Frobenius weight,
//! across system sizes, temperatures and both sampling bases.
//!
//! Prints CSV to stdout.

use thermoquench::truncation::{sweep_nw, SweepPoint};
use thermoquench::Basis;

fn main() {
    let w_target = 0.93;
    let mut grid = Vec::new();
    for l in [4, 6, 8, 10] {
        for basis in [Basis::Z, Basis::X] {
            for g0 in [0.5, 1.0, 1.5] {
                for beta in [0.25, 1.0, 4.0] {
                    grid.push(SweepPoint { l, beta, g0, h0: 0.0, basis });
                }
            }
        }
    }
    println!("L,basis,g0,beta,N_w,fraction");
    for row in sweep_nw(&grid, w_target) {
        let p = row.point;
        match row.outcome {
            Ok((n_w, _)) => {
                let full = (1u64 << (2 * p.l)) as f64;
                println!("{},{},{},{},{},{:.4}", p.l, p.basis, p.g0, p.beta, n_w, n_w as f64 / full);
            }
            Err(e) => eprintln!("L={} failed: {e}", p.l),
        }
    }
}
