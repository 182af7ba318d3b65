use ndarray::{Array1, Array2};

use super::{check_measurements, CsConfig, SolverConfig};
use crate::error::{Error, Result};

const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct QihtOutcome {
    pub estimate: Array2<f64>,
    pub iterations: usize,
    /// `‖q - Q(A x)‖` before each iteration and at the final iterate.
    pub residuals: Vec<f64>,
    /// False when the residual ever increased; such runs are kept but flagged.
    pub monotone: bool,
}

fn residual(cfg: &CsConfig, x: &Array2<f64>, measurements: &[Array1<f64>]) -> (f64, Vec<Array1<f64>>) {
    let mut total = 0.0;
    let parts = (0..cfg.n())
        .map(|m| {
            let r = &measurements[m] - &cfg.quantize_vec(cfg.sensing(m).dot(&x.row(m)));
            total += r.dot(&r);
            r
        })
        .collect();
    (total.sqrt(), parts)
}

/// Keeps the `k` largest-magnitude entries of the whole `n × t` stack (ties
/// to the lower row-major index) and zeroes the rest.
fn hard_threshold(x: &mut Array2<f64>, k: usize) {
    if k >= x.len() {
        return;
    }
    let mut order: Vec<(usize, f64)> = x.iter().map(|v| v.abs()).enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let t = x.ncols();
    for &(idx, _) in &order[k..] {
        x[(idx / t, idx % t)] = 0.0;
    }
}

/// Quantized iterative hard thresholding with a joint support across encoders:
/// `x ← H_k(x + μ Aᵀ(q - Q(A x)))`.
pub fn qiht_decode(cfg: &CsConfig, solver: &SolverConfig, measurements: &[Array1<f64>]) -> Result<QihtOutcome> {
    solver.validate()?;
    check_measurements(cfg, measurements)?;
    let mu = solver.step_size.unwrap_or(1.0 / cfg.a as f64);
    let (n, t) = (cfg.n(), cfg.t());

    let mut x = Array2::<f64>::zeros((n, t));
    let (mut res, mut parts) = residual(cfg, &x, measurements);
    let mut residuals = vec![res];
    let mut iterations = 0;
    while iterations < solver.max_iters {
        let mut next = x.clone();
        for m in 0..n {
            let grad = cfg.sensing(m).t().dot(&parts[m]);
            next.row_mut(m).scaled_add(mu, &grad);
        }
        hard_threshold(&mut next, solver.sparsity);
        iterations += 1;

        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence(format!(
                "QIHT iterate norm {norm:e} after {iterations} iterations with step {mu}"
            )));
        }
        let change = (&next - &x).iter().map(|v| v * v).sum::<f64>().sqrt();
        x = next;
        (res, parts) = residual(cfg, &x, measurements);
        residuals.push(res);
        if change <= solver.tol * norm.max(1.0) {
            break;
        }
    }
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(QihtOutcome { estimate: x, iterations, residuals, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::UniformQuantizer;
    use ndarray::array;

    fn identity(t: usize, n: usize) -> CsConfig {
        CsConfig::with_matrices(vec![Array2::eye(t); n], UniformQuantizer::new(None, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_measurements_stay_zero() {
        let cfg = identity(4, 2);
        let out = qiht_decode(&cfg, &SolverConfig::new(2), &[Array1::zeros(4), Array1::zeros(4)]).unwrap();
        assert!(out.estimate.iter().all(|v| *v == 0.0));
        assert!(out.monotone);
    }

    #[test]
    fn identity_sensing_recovers_in_one_step() {
        let cfg = identity(4, 2);
        let solver = SolverConfig { step_size: Some(1.0), max_iters: 1, ..SolverConfig::new(2) };
        let q = [array![0.0, 1.5, 0.0, 0.0], array![0.0, 0.0, -0.7, 0.0]];
        let out = qiht_decode(&cfg, &solver, &q).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.estimate, array![[0.0, 1.5, 0.0, 0.0], [0.0, 0.0, -0.7, 0.0]]);
    }

    #[test]
    fn threshold_is_joint() {
        let mut x = array![[3.0, 0.1, -2.0], [0.5, -4.0, 1.0]];
        hard_threshold(&mut x, 2);
        assert_eq!(x, array![[3.0, 0.0, 0.0], [0.0, -4.0, 0.0]]);
    }

    #[test]
    fn huge_step_diverges() {
        let cfg = identity(3, 1);
        let solver = SolverConfig { step_size: Some(1e9), ..SolverConfig::new(1) };
        let err = qiht_decode(&cfg, &solver, &[array![1.0, 0.0, 0.0]]);
        assert!(matches!(err, Err(Error::Divergence(_))));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let cfg = identity(3, 2);
        assert!(qiht_decode(&cfg, &SolverConfig::new(1), &[Array1::zeros(3)]).is_err());
        assert!(qiht_decode(&cfg, &SolverConfig::new(1), &[Array1::zeros(3), Array1::zeros(2)]).is_err());
    }
}
