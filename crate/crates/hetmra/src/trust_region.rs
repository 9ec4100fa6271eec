//! Trust-region minimizer with a Steihaug truncated-CG subproblem solver.
//!
//! Hessian-vector products are approximated by forward differences of the
//! (exact, analytic) gradient, so only cost and gradient callbacks are
//! needed. Negative-curvature directions found by CG are followed to the
//! trust-region boundary, which is what lets the method walk out of saddle
//! regions of the non-convex inversion landscape.

#[derive(Debug, Clone)]
pub struct TrustRegionOptions {
    pub max_iter: u64,
    /// Stop when the ℓ2 norm of the gradient falls below this.
    pub gtol: f64,
    /// Initial trust-region radius.
    pub delta0: f64,
    pub delta_max: f64,
    /// Step acceptance threshold on the actual/predicted reduction ratio.
    pub eta: f64,
    /// Inner CG iteration cap as a multiple of the dimension.
    pub max_cg_factor: usize,
}

impl Default for TrustRegionOptions {
    fn default() -> Self {
        TrustRegionOptions {
            max_iter: 2000,
            gtol: 1e-10,
            delta0: 1.0,
            delta_max: 1e6,
            eta: 0.1,
            max_cg_factor: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The radius collapsed without further progress; best point returned.
    Stalled,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct TrustRegionResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    pub iterations: u64,
    pub stop: StopReason,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which must write the gradient into its second argument
/// and return the cost.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &TrustRegionOptions) -> TrustRegionResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut cost = f(&x, &mut grad);
    if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        let grad_norm = norm2(&grad);
        return TrustRegionResult { x, cost, grad_norm, iterations: 0, stop: StopReason::NonFinite };
    }

    let mut delta = opts.delta0;
    let mut iterations = 0;
    let mut scratch_x = vec![0.0; n];
    let mut scratch_g = vec![0.0; n];
    let mut trial_g = vec![0.0; n];

    loop {
        let grad_norm = norm2(&grad);
        if grad_norm <= opts.gtol {
            return TrustRegionResult { x, cost, grad_norm, iterations, stop: StopReason::GradientTolerance };
        }
        if iterations >= opts.max_iter {
            return TrustRegionResult { x, cost, grad_norm, iterations, stop: StopReason::MaxIterations };
        }
        if delta < 1e-18 * (1.0 + norm2(&x)) {
            return TrustRegionResult { x, cost, grad_norm, iterations, stop: StopReason::Stalled };
        }

        // Forward-difference Hessian-vector product around the current x.
        let fd_scale = (f64::EPSILON.sqrt()) * (1.0 + norm2(&x));
        let mut hess_vec = |v: &[f64], out: &mut Vec<f64>| {
            let vn = norm2(v);
            if vn == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            let h = fd_scale / vn;
            for i in 0..n {
                scratch_x[i] = x[i] + h * v[i];
            }
            let _ = f(&scratch_x, &mut scratch_g);
            for i in 0..n {
                out[i] = (scratch_g[i] - grad[i]) / h;
            }
        };

        let (step, predicted) = steihaug_cg(&grad, grad_norm, delta, opts.max_cg_factor * n, &mut hess_vec);

        for i in 0..n {
            scratch_x[i] = x[i] + step[i];
        }
        let trial_cost = f(&scratch_x, &mut trial_g);
        iterations += 1;

        let actual = cost - trial_cost;
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };

        let step_norm = norm2(&step);
        if rho < 0.25 || !trial_cost.is_finite() {
            delta = 0.25 * step_norm.min(delta);
        } else if rho > 0.75 && step_norm >= 0.99 * delta {
            delta = (2.0 * delta).min(opts.delta_max);
        }

        if trial_cost.is_finite() && rho > opts.eta {
            x.copy_from_slice(&scratch_x);
            grad.copy_from_slice(&trial_g);
            cost = trial_cost;
        }
    }
}

/// Steihaug truncated CG: approximately minimizes
/// `gᵀp + ½ pᵀHp` subject to `‖p‖ ≤ delta`.
///
/// Returns the step and the predicted model reduction.
fn steihaug_cg<H>(
    grad: &[f64],
    grad_norm: f64,
    delta: f64,
    max_cg: usize,
    hess_vec: &mut H,
) -> (Vec<f64>, f64)
where
    H: FnMut(&[f64], &mut Vec<f64>),
{
    let n = grad.len();
    let mut p = vec![0.0; n];
    let mut r: Vec<f64> = grad.to_vec();
    let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut hd = vec![0.0; n];
    // Superlinear forcing sequence.
    let tol = grad_norm * grad_norm.sqrt().min(0.1);

    // Positive root of ‖p + τ d‖ = delta.
    let boundary_step = |p: &[f64], d: &[f64]| -> f64 {
        let pd = dot(p, d);
        let dd = dot(d, d);
        let pp = dot(p, p);
        let disc = (pd * pd + dd * (delta * delta - pp)).max(0.0);
        (-pd + disc.sqrt()) / dd
    };

    for _ in 0..max_cg.max(1) {
        hess_vec(&d, &mut hd);
        let curvature = dot(&d, &hd);
        if curvature <= 0.0 {
            // Negative curvature: follow d to the boundary.
            let tau = boundary_step(&p, &d);
            for i in 0..n {
                p[i] += tau * d[i];
            }
            break;
        }
        let r_sq = dot(&r, &r);
        let alpha = r_sq / curvature;
        let mut p_next = p.clone();
        for i in 0..n {
            p_next[i] += alpha * d[i];
        }
        if norm2(&p_next) >= delta {
            let tau = boundary_step(&p, &d);
            for i in 0..n {
                p[i] += tau * d[i];
            }
            break;
        }
        p = p_next;
        for i in 0..n {
            r[i] += alpha * hd[i];
        }
        let r_sq_next = dot(&r, &r);
        if r_sq_next.sqrt() <= tol {
            break;
        }
        let beta = r_sq_next / r_sq;
        for i in 0..n {
            d[i] = -r[i] + beta * d[i];
        }
    }

    // Predicted reduction −m(p) from one exact model evaluation.
    let mut hp = vec![0.0; n];
    hess_vec(&p, &mut hp);
    let model = dot(grad, &p) + 0.5 * dot(&p, &hp);
    (p, -model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_separable_quadratic() {
        let f = |x: &[f64], g: &mut [f64]| -> f64 {
            let mut c = 0.0;
            for i in 0..x.len() {
                let w = (i + 1) as f64;
                c += 0.5 * w * x[i] * x[i];
                g[i] = w * x[i];
            }
            c
        };
        let res = minimize(f, vec![3.0, -2.0, 7.0, 0.5], &TrustRegionOptions::default());
        assert_eq!(res.stop, StopReason::GradientTolerance);
        assert!(res.cost < 1e-18, "cost {}", res.cost);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| -> f64 {
            let (a, b) = (x[0], x[1]);
            let c = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            c
        };
        let res = minimize(f, vec![-1.2, 1.0], &TrustRegionOptions::default());
        assert!(res.cost < 1e-16, "cost {}", res.cost);
        assert!((res.x[0] - 1.0).abs() < 1e-7 && (res.x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn escapes_a_saddle_through_negative_curvature() {
        // f(x, y) = x²·y... use a simple saddle f = x² − y² + y⁴ with
        // start exactly on the unstable axis.
        let f = |x: &[f64], g: &mut [f64]| -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = 2.0 * a;
            g[1] = -2.0 * b + 4.0 * b * b * b;
            a * a - b * b + b.powi(4)
        };
        let res = minimize(f, vec![0.5, 1e-8], &TrustRegionOptions::default());
        // Minima at (0, ±1/√2) with value −1/4.
        assert!(res.cost < -0.249, "cost {}", res.cost);
    }

    #[test]
    fn reports_non_finite_objectives() {
        let f = |_: &[f64], g: &mut [f64]| -> f64 {
            g[0] = f64::NAN;
            f64::NAN
        };
        let res = minimize(f, vec![1.0], &TrustRegionOptions::default());
        assert_eq!(res.stop, StopReason::NonFinite);
    }

    #[test]
    fn respects_iteration_cap() {
        let f = |x: &[f64], g: &mut [f64]| -> f64 {
            g[0] = x[0].cos();
            x[0].sin()
        };
        let opts = TrustRegionOptions { max_iter: 3, ..Default::default() };
        let res = minimize(f, vec![0.3], &opts);
        assert!(res.iterations <= 3);
    }
}
