//! Two routes to the same matrix element `<n|O(t)|m>` at L = 4: the
//! Hadamard test on a Pauli decomposition of the observable, and direct
//! statevector propagation.

use thermoquench::circuits::hadamard_test_matrix_element;
use thermoquench::dynamics::matrix_element_series;
use thermoquench::{Basis, BasisState, ModelParams, Observable};

fn main() -> thermoquench::Result<()> {
    let l = 4;
    let h1 = ModelParams::quench(l, 1.0, 1.0)?;
    let obs = Observable::staggered_z(l);
    let n = BasisState::from_sites("0101", Basis::Z)?;
    let m = BasisState::from_sites("0110", Basis::Z)?;
    let times = [0.0, 0.5, 1.0, 2.0, 4.0];

    let direct = matrix_element_series(&n, &m, &obs, &h1, &times)?;
    println!("{:>4} {:>22} {:>22}", "t", "Hadamard test", "direct");
    for (t, d) in times.iter().zip(&direct.values) {
        let h = hadamard_test_matrix_element(&n, &m, &obs, &h1, *t)?;
        println!("{t:4.1} {:+.6} {:+.6}i {:+.6} {:+.6}i", h.re, h.im, d.re, d.im);
    }
    Ok(())
}
