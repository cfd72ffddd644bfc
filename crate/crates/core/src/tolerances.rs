//! Numerical thresholds shared across modules. Every field has a default and
//! can be overridden from a run configuration.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Gradients count as collinear when `|cos∠(∇h,∇ℌ)| > 1 − collinear`.
    pub collinear: f64,
    /// Relative singular-value cutoff for pseudo-inverses and for membership
    /// in `M(f)` (`σ_{p+1}(aug) < rank · σ_max(aug)`).
    pub rank: f64,
    /// Lift contracts must hold to `lift_residual · scale`.
    pub lift_residual: f64,
    /// Accepted pencil-tangency residual of the Milnor field, times scale.
    pub field_tangency: f64,
    /// `⟨∇ℌ, w_f⟩` below this (relative to `‖∇ℌ‖‖w_f‖`) leaves μ undefined.
    pub mu_undefined: f64,
    /// Tolerance of the opposite-direction predicate.
    pub opposite: f64,
    /// Normalized `σ_{p+1}(aug)` at or below which the field uses normal lifts only.
    pub blend_low: f64,
    /// Normalized `σ_{p+1}(aug)` at or above which the field uses constrained lifts only.
    pub blend_high: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            collinear: 1e-10,
            rank: 1e-8,
            lift_residual: 1e-9,
            field_tangency: 1e-7,
            mu_undefined: 1e-12,
            opposite: 1e-9,
            blend_low: 1e-2,
            blend_high: 1e-1,
        }
    }
}

impl Tolerances {
    /// Every threshold must be positive and the blend band ordered.
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("collinear", self.collinear),
            ("rank", self.rank),
            ("lift_residual", self.lift_residual),
            ("field_tangency", self.field_tangency),
            ("mu_undefined", self.mu_undefined),
            ("opposite", self.opposite),
            ("blend_low", self.blend_low),
            ("blend_high", self.blend_high),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(format!("tolerances.{name} must be positive, got {value}"));
            }
        }
        if self.blend_low >= self.blend_high {
            return Err("tolerances.blend_low must be below tolerances.blend_high".into());
        }
        Ok(())
    }
}
