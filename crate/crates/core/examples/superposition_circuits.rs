//! Preparation circuits for `(|n> + e^{i phi}|m>)/sqrt(2)` and a check of the
//! prepared amplitudes.
//!
//! ```text
//! cargo run --example superposition_circuits -- 00000000 11111111
//! ```

use thermoquench::circuits::{simulate, synthesize, SuperpositionSpec, Variant};
use thermoquench::{Basis, BasisState};

fn main() -> thermoquench::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().unwrap_or_else(|| "00000000".into());
    let m = args.next().unwrap_or_else(|| "11111111".into());
    let (n, m) = (BasisState::from_sites(&n, Basis::Z)?, BasisState::from_sites(&m, Basis::Z)?);

    for variant in Variant::ALL {
        let spec = SuperpositionSpec::new(n, m, variant)?;
        let circuit = synthesize(&spec)?;
        let state = simulate(&circuit, 0)?;
        let err = state.iter().zip(spec.target()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        println!(
            "{variant:?}: {} layers, {} CNOTs in {} layers, max amplitude error {err:.1e}",
            circuit.layers().len(),
            circuit.cnot_count(),
            circuit.cnot_layers()
        );
        if variant == Variant::PsiPlus {
            print!("{}", circuit.to_text());
        }
    }
    Ok(())
}
