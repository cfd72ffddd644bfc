//! Projected descent on a sphere for nonsmooth margin landscapes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::orthonormal_complement;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentCfg {
    pub iterations: usize,
    /// Initial step, as an angle on the sphere.
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for DescentCfg {
    fn default() -> Self {
        DescentCfg {
            iterations: 200,
            initial_step: 0.05,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Minimizes `objective` over the sphere of radius `‖x0‖`.
///
/// Gradients are central differences along an orthonormal basis of the
/// tangent space, with a difference step proportional to the current value
/// so that the search can resolve zeros of a cone-shaped landscape. A step is
/// accepted only if it lowers the objective; rejected steps halve, accepted
/// ones double. Non-finite objective values act as barriers.
pub fn sphere_descent<F>(x0: &DVector<f64>, objective: F, cfg: &DescentCfg) -> DescentResult
where
    F: Fn(&DVector<f64>) -> f64,
{
    let radius = x0.norm();
    let mut x = x0.clone();
    let mut value = objective(&x);
    let mut step = cfg.initial_step;
    let mut iterations = 0;
    if !value.is_finite() || radius == 0.0 {
        return DescentResult {
            x,
            value,
            iterations,
        };
    }
    while iterations < cfg.iterations && step > cfg.min_step && value > 0.0 {
        iterations += 1;
        let basis = orthonormal_complement(&[x.clone()], x.len());
        let h = (0.1 * value).clamp(1e-10, 1e-5);
        let mut grad = DVector::zeros(x.len());
        for j in 0..basis.ncols() {
            let t = basis.column(j).into_owned();
            let plus = on_sphere(&(&x + &t * (h * radius)), radius);
            let minus = on_sphere(&(&x - &t * (h * radius)), radius);
            let (fp, fm) = (objective(&plus), objective(&minus));
            let d = if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else if fp.is_finite() {
                (fp - value) / h
            } else if fm.is_finite() {
                (value - fm) / h
            } else {
                0.0
            };
            grad += t * d;
        }
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            break;
        }
        let dir = -grad / gnorm;
        loop {
            let xhat = &x / radius;
            let candidate = on_sphere(&(xhat * step.cos() + &dir * step.sin()), radius);
            let fc = objective(&candidate);
            if fc.is_finite() && fc < value {
                x = candidate;
                value = fc;
                step = (step * 2.0).min(0.5);
                break;
            }
            step *= 0.5;
            if step <= cfg.min_step {
                break;
            }
        }
    }
    DescentResult {
        x,
        value,
        iterations,
    }
}

fn on_sphere(y: &DVector<f64>, radius: f64) -> DVector<f64> {
    y * (radius / y.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cone_tip_on_circle() {
        // |sin| of the angle to the y-axis has a kink at its zero.
        let f = |y: &DVector<f64>| (y[0] / y.norm()).abs();
        let x0 = DVector::from_vec(vec![2.0, 0.1]);
        let r = sphere_descent(&x0, f, &DescentCfg::default());
        assert!(r.value < 1e-8, "value {}", r.value);
        assert!((r.x.norm() - x0.norm()).abs() < 1e-12);
    }

    #[test]
    fn barrier_values_are_never_accepted() {
        let f = |y: &DVector<f64>| {
            if y[0] < 0.5 {
                f64::INFINITY
            } else {
                y[1].abs() + y[0]
            }
        };
        let x0 = DVector::from_vec(vec![0.8, 0.6]);
        let r = sphere_descent(&x0, f, &DescentCfg::default());
        assert!(r.x[0] >= 0.5);
        assert!(r.value <= 1.4);
    }
}
