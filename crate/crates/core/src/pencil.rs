//! Spherefication calculus and tangency to the members of the canonical pencil.
//!
//! With `𝔉(x) = ‖x‖ f(x)/‖f(x)‖`, the differential splits into a radial part
//! (a multiple of `𝔉(x)`) and a spherical part orthogonal to `f(x)`:
//!
//! ```text
//! D𝔉ₓ(v) = ⟨x,v⟩/‖x‖² 𝔉(x)  −  f(x)/‖f(x)‖² ⟨𝔉(x), Dfₓ(v)⟩  +  ‖x‖/‖f(x)‖ Dfₓ(v)
//!          └── radial ──┘     └──────────────── spherical ────────────────────┘
//! ```
//!
//! A vector `v` is tangent to the pencil member `E_ℓ` through `x` exactly when
//! the spherical part vanishes.

use nalgebra::{DMatrix, DVector};

use crate::polymap::Jet;
use crate::scalar::Real;

/// Spherefication differential from raw first-order data.
pub(crate) fn apply_differential<T: Real>(
    x: &DVector<T>,
    x_norm: T,
    fx: &DVector<T>,
    f_norm: T,
    spherified: &DVector<T>,
    jac: &DMatrix<T>,
    v: &DVector<T>,
) -> DVector<T> {
    let dfv = jac * v;
    let radial = x.dot(v) / (x_norm * x_norm);
    let along_f = spherified.dot(&dfv) / (f_norm * f_norm);
    spherified * radial - fx * along_f + dfv * (x_norm / f_norm)
}

/// `D𝔉ₓ(v)` via the closed formula.
pub fn d_spherefication<T: Real>(jet: &Jet<T>, v: &DVector<T>) -> DVector<T> {
    apply_differential(
        &jet.x,
        jet.x_norm,
        &jet.fx,
        jet.f_norm,
        &jet.spherified,
        &jet.jac,
        v,
    )
}

/// `‖D𝔉ₓ(v)‖²` via the closed norm identity
/// `⟨x,v⟩²/‖x‖² + (‖x‖²‖Dfₓ(v)‖² − ⟨𝔉(x),Dfₓ(v)⟩²)/‖f(x)‖²`.
pub fn d_spherefication_norm_sq<T: Real>(jet: &Jet<T>, v: &DVector<T>) -> T {
    let dfv = &jet.jac * v;
    let xv = jet.x.dot(v);
    let fdfv = jet.spherified.dot(&dfv);
    xv * xv / jet.sq_radius + (jet.sq_radius * dfv.norm_squared() - fdfv * fdfv) / jet.h
}

/// Radial and spherical parts of `D𝔉ₓ(v)` in `Rᵖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector<T: Real> {
    pub radial: DVector<T>,
    pub spherical: DVector<T>,
}

impl<T: Real> SplitVector<T> {
    pub fn total(&self) -> DVector<T> {
        &self.radial + &self.spherical
    }
}

pub fn radial_spherical_split<T: Real>(jet: &Jet<T>, v: &DVector<T>) -> SplitVector<T> {
    let dfv = &jet.jac * v;
    let radial = &jet.spherified * (jet.x.dot(v) / jet.sq_radius);
    let spherical = &dfv * (jet.x_norm / jet.f_norm) - &jet.fx * (jet.spherified.dot(&dfv) / jet.h);
    SplitVector { radial, spherical }
}

/// `‖Dfₓ(v) − f(x)⟨f(x),Dfₓ(v)⟩/‖f(x)‖²‖`; zero iff `v ∈ TₓE_ℓ`.
pub fn pencil_tangent_residual<T: Real>(jet: &Jet<T>, v: &DVector<T>) -> T {
    let dfv = &jet.jac * v;
    let proj = &jet.fx * (jet.fx.dot(&dfv) / jet.h);
    (dfv - proj).norm()
}

/// Tangency decision with threshold `1e-8 · scale · ‖v‖`.
pub fn is_pencil_tangent<T: Real>(jet: &Jet<T>, v: &DVector<T>) -> bool {
    pencil_tangent_residual(jet, v) <= T::c(1e-8) * jet.scale() * v.norm()
}
