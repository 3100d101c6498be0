//! Lanczos propagation `exp(-i H t) psi` for chains too large to
//! diagonalize.
//!
//! A Krylov basis built at time `t0` stays usable for every `t` with
//! `|t - t0|` below a validity radius, found from the a posteriori estimate
//! `beta_m |e_m^T exp(-i T tau) e_1| <= tol`. Grid points inside the radius
//! reuse the basis; beyond it the basis is rebuilt at the edge.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::model::{PauliSumOperator, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Maximum Krylov dimension.
    pub m_max: usize,
    /// Per-basis error tolerance.
    pub tol: f64,
    /// Radius below which a basis is considered stuck.
    pub min_step: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { m_max: 30, tol: 1e-9, min_step: 1e-7 }
    }
}

/// Krylov basis anchored at one time.
struct Anchor {
    t0: f64,
    norm: f64,
    vectors: Vec<Vec<C64>>,
    /// Eigenpairs of the tridiagonal projection.
    theta: Vec<f64>,
    /// First and last components of each Ritz vector.
    q_first: Vec<f64>,
    q_last: Vec<f64>,
    q: Mat<f64>,
    beta_last: f64,
    radius: f64,
}

impl Anchor {
    fn build(op: &PauliSumOperator, psi: &[C64], t0: f64, opts: &KrylovOptions) -> Result<Anchor> {
        let dim = psi.len();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Propagation(format!("cannot propagate a state with norm {norm}")));
        }
        let m_max = opts.m_max.min(dim).max(1);
        let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(m_max);
        vectors.push(psi.iter().map(|z| z / norm).collect());
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let mut beta_last = 0.0;
        for j in 0..m_max {
            op.apply_into(&vectors[j], &mut w);
            let a: f64 = vectors[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
            alpha.push(a);
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for v in &vectors {
                    let c: C64 = v.iter().zip(&w).map(|(vi, wi)| vi.conj() * wi).sum();
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            beta_last = b;
            if j + 1 == m_max || b < 1e-12 * (1.0 + a.abs()) {
                break;
            }
            beta.push(b);
            vectors.push(w.iter().map(|z| z / b).collect());
        }
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |i, k| {
            if i == k {
                alpha[i]
            } else if i + 1 == k || k + 1 == i {
                beta[i.min(k)]
            } else {
                0.0
            }
        });
        let evd = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Propagation(format!("tridiagonal eigensolver failed: {e:?}")))?;
        let s = evd.S().column_vector();
        let q = evd.U().to_owned();
        let theta: Vec<f64> = (0..m).map(|k| s[k]).collect();
        let q_first = (0..m).map(|k| q[(0, k)]).collect();
        let q_last = (0..m).map(|k| q[(m - 1, k)]).collect();
        let invariant = beta_last < 1e-12 * (1.0 + alpha.iter().fold(0.0f64, |x, a| x.max(a.abs())));
        let mut anchor = Anchor { t0, norm, vectors, theta, q_first, q_last, q, beta_last, radius: 0.0 };
        anchor.radius = if invariant { f64::INFINITY } else { anchor.find_radius(opts)? };
        Ok(anchor)
    }

    fn error_estimate(&self, tau: f64) -> f64 {
        let mut z = C64::new(0.0, 0.0);
        for k in 0..self.theta.len() {
            z += C64::from_polar(self.q_last[k] * self.q_first[k], -self.theta[k] * tau);
        }
        self.beta_last * z.norm()
    }

    fn find_radius(&self, opts: &KrylovOptions) -> Result<f64> {
        let spread = self.theta.iter().fold(0.0f64, |x, t| x.max(t.abs())).max(1e-3);
        let mut tau = 1.0 / spread;
        if self.error_estimate(tau) <= opts.tol {
            for _ in 0..60 {
                if self.error_estimate(2.0 * tau) > opts.tol {
                    break;
                }
                tau *= 2.0;
            }
        } else {
            while self.error_estimate(tau) > opts.tol {
                tau *= 0.5;
                if tau < opts.min_step {
                    return Err(Error::Propagation(format!(
                        "Krylov estimate {:.3e} above tolerance {:.1e} even for step {tau:.1e} (m = {})",
                        self.error_estimate(tau),
                        opts.tol,
                        self.theta.len()
                    )));
                }
            }
        }
        // Refine between tau and 2 tau by bisection.
        let (mut lo, mut hi) = (tau, 2.0 * tau);
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if self.error_estimate(mid) <= opts.tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn state_at(&self, t: f64, out: &mut [C64]) {
        let tau = t - self.t0;
        let m = self.theta.len();
        let coeffs: Vec<C64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| C64::from_polar(self.q[(i, k)] * self.q_first[k], -self.theta[k] * tau))
                    .sum::<C64>()
                    * self.norm
            })
            .collect();
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (v, c) in self.vectors.iter().zip(&coeffs) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
    }
}

/// Propagates one state to a sequence of times, reusing Krylov bases.
pub struct KrylovStepper<'a> {
    op: &'a PauliSumOperator,
    opts: KrylovOptions,
    anchor: Anchor,
    rebuilds: usize,
}

impl<'a> KrylovStepper<'a> {
    pub fn new(op: &'a PauliSumOperator, psi0: &[C64], opts: KrylovOptions) -> Result<Self> {
        if psi0.len() != op.dim() {
            return Err(Error::Contract(format!(
                "state length {} does not match dimension {}",
                psi0.len(),
                op.dim()
            )));
        }
        let anchor = Anchor::build(op, psi0, 0.0, &opts)?;
        Ok(KrylovStepper { op, opts, anchor, rebuilds: 1 })
    }

    /// Number of Krylov bases built so far.
    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    /// Writes `exp(-i H t) psi0` into `out`.
    pub fn advance_to(&mut self, t: f64, out: &mut [C64]) -> Result<()> {
        let mut guard = 0usize;
        while (t - self.anchor.t0).abs() > self.anchor.radius {
            let step = self.anchor.radius.copysign(t - self.anchor.t0);
            let t_next = self.anchor.t0 + step;
            self.anchor.state_at(t_next, out);
            self.anchor = Anchor::build(self.op, out, t_next, &self.opts)?;
            self.rebuilds += 1;
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::Propagation(format!("Krylov propagation to t = {t} did not terminate")));
            }
        }
        self.anchor.state_at(t, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::diagonalize;
    use crate::model::{hamiltonian_operator, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    #[test]
    fn matches_eigen_propagation() {
        let p = ModelParams::quench(8, 1.0, 1.0).unwrap();
        let op = hamiltonian_operator(&p);
        let spec = diagonalize(&p).unwrap();
        let mut rng = Pcg64::seed_from_u64(1);
        let mut psi: Vec<C64> = (0..256).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= n);
        let mut stepper = KrylovStepper::new(&op, &psi, KrylovOptions::default()).unwrap();
        let mut out = vec![C64::new(0.0, 0.0); 256];
        for i in 0..=20 {
            let t = 0.5 * i as f64;
            stepper.advance_to(t, &mut out).unwrap();
            let mut exact = vec![C64::new(0.0, 0.0); 256];
            for k in 0..256 {
                let v = spec.eigenvector(k);
                let c: C64 = v.iter().zip(&psi).map(|(a, b)| b * a).sum();
                let c = c * C64::from_polar(1.0, -spec.energies()[k] * t);
                for (e, a) in exact.iter_mut().zip(v) {
                    *e += c * a;
                }
            }
            let err = out.iter().zip(&exact).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-8, "t = {t}: {err}");
            let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        assert!(stepper.rebuilds() < 40);
    }

    #[test]
    fn time_reversal() {
        let p = ModelParams::quench(6, 1.0, 1.0).unwrap();
        let op = hamiltonian_operator(&p);
        let mut psi = vec![C64::new(0.0, 0.0); 64];
        psi[5] = C64::new(1.0, 0.0);
        let mut fwd = KrylovStepper::new(&op, &psi, KrylovOptions::default()).unwrap();
        let mut out = vec![C64::new(0.0, 0.0); 64];
        fwd.advance_to(3.0, &mut out).unwrap();
        let mut back = KrylovStepper::new(&op, &out, KrylovOptions::default()).unwrap();
        let mut ret = vec![C64::new(0.0, 0.0); 64];
        back.advance_to(-3.0, &mut ret).unwrap();
        for (a, b) in ret.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
