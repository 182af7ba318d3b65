use ndarray::{Array1, Array2};

use super::{check_measurements, CsConfig, SolverConfig};
use crate::error::Result;

const POWER_ITERS: usize = 100;

/// Largest eigenvalue of `AᵀA` by power iteration from the all-ones vector.
fn spectral_norm_sq(a: &Array2<f64>) -> f64 {
    let mut v = Array1::from_elem(a.ncols(), 1.0 / (a.ncols() as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..POWER_ITERS {
        let w = a.t().dot(&a.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm;
        v = w / norm;
    }
    est
}

fn soft_threshold(v: f64, tau: f64) -> f64 {
    let mag = v.abs() - tau;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// Per-encoder LASSO `min ‖q - A x‖² + λ‖x‖₁` by FISTA.
pub fn fista_decode(cfg: &CsConfig, solver: &SolverConfig, measurements: &[Array1<f64>]) -> Result<Array2<f64>> {
    solver.validate()?;
    check_measurements(cfg, measurements)?;
    let mut out = Array2::zeros((cfg.n(), cfg.t()));
    for m in 0..cfg.n() {
        let x = lasso(cfg.sensing(m), &measurements[m], solver);
        out.row_mut(m).assign(&x);
    }
    Ok(out)
}

fn lasso(a: &Array2<f64>, q: &Array1<f64>, solver: &SolverConfig) -> Array1<f64> {
    // Lipschitz constant of ∇‖q - Ax‖² = 2Aᵀ(Ax - q); 1% slack over the
    // power-iteration estimate.
    let lip = 2.0 * spectral_norm_sq(a) * 1.01;
    let mut x = Array1::<f64>::zeros(a.ncols());
    if lip == 0.0 {
        return x;
    }
    let tau = solver.lambda / lip;
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..solver.max_iters {
        let grad = a.t().dot(&(a.dot(&y) - q)) * 2.0;
        let next = (&y - &(grad / lip)).mapv(|v| soft_threshold(v, tau));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let diff = &next - &x;
        y = &next + &(&diff * ((t - 1.0) / t_next));
        let change = diff.dot(&diff).sqrt();
        let norm = next.dot(&next).sqrt();
        x = next;
        t = t_next;
        if change <= solver.tol * norm.max(1.0) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::UniformQuantizer;
    use ndarray::array;

    #[test]
    fn infinite_lambda_gives_zero() {
        let cfg = CsConfig::with_matrices(
            vec![array![[1.0, 2.0, 0.5], [0.3, -1.0, 2.0]]],
            UniformQuantizer::new(None, 2.0).unwrap(),
        )
        .unwrap();
        let solver = SolverConfig { lambda: f64::INFINITY, ..SolverConfig::new(1) };
        let x = fista_decode(&cfg, &solver, &[array![1.0, -1.0]]).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_lambda_identity_returns_measurements() {
        let cfg = CsConfig::with_matrices(vec![Array2::eye(4); 2], UniformQuantizer::new(None, 2.0).unwrap()).unwrap();
        let solver = SolverConfig { lambda: 0.0, max_iters: 500, tol: 1e-14, ..SolverConfig::new(1) };
        let q = [array![0.5, -1.0, 0.0, 3.0], array![0.0, 0.0, 0.25, 0.0]];
        let x = fista_decode(&cfg, &solver, &q).unwrap();
        for m in 0..2 {
            for i in 0..4 {
                assert!((x[(m, i)] - q[m][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        assert!((spectral_norm_sq(&a) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn lasso_matches_scalar_closed_form() {
        // min (q - x)^2 + λ|x| has solution soft(q, λ/2).
        let cfg = CsConfig::with_matrices(vec![Array2::eye(1)], UniformQuantizer::new(None, 2.0).unwrap()).unwrap();
        let solver = SolverConfig { lambda: 0.6, max_iters: 1000, tol: 1e-14, ..SolverConfig::new(1) };
        let x = fista_decode(&cfg, &solver, &[array![1.0]]).unwrap();
        assert!((x[(0, 0)] - 0.7).abs() < 1e-9);
    }
}
