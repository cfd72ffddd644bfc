//! Liftings of the radial field `∇g(y) = 2y` through `f` and through its
//! spherefication `𝔉`, the point classification driving the Milnor field,
//! and the collinearity coefficient `μ` on `M(f)`.
//!
//! A lift of `2f(x)` through `f` is any `w` with `Dfₓ(w) = 2f(x)`. Writing
//! `w = v + α∇h` with `v ⟂ ∇h` forces `α = 4‖f‖²/‖∇h‖²`. The *normal* lift is
//! the one with `v ⟂ ker Dfₓ`, i.e. the minimal-norm solution. The same holds
//! for `𝔉`, where the coefficient is always `β = 1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, cos_angle, min_norm_solve, orthonormal_complement};
use crate::pencil;
use crate::polymap::Jet;
use crate::scalar::Real;
use crate::tolerances::Tolerances;

/// True iff `cos∠(u,v) < −1 + tol`.
pub fn opposite_directions<T: Real>(u: &DVector<T>, v: &DVector<T>, tol: T) -> Result<bool> {
    let c = cos_angle(u, v).ok_or(Error::ZeroVector)?;
    Ok(c < -T::one() + tol)
}

/// A lift `w = v + coeff · ∇` of the radial field.
#[derive(Debug, Clone)]
pub struct Lift<T: Real> {
    pub w: DVector<T>,
    pub v: DVector<T>,
    pub coeff: T,
    /// Residual of the lift contract `‖D(w) − 2·target‖`.
    pub residual: T,
}

/// Which map the radial field is lifted through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LiftTarget {
    /// Through `f`, normal component along `∇h`.
    Map,
    /// Through the spherefication `𝔉`, normal component along `∇ℌ`.
    Spherified,
}

fn target_parts<T: Real>(
    jet: &Jet<T>,
    which: LiftTarget,
) -> (&DMatrix<T>, DVector<T>, &DVector<T>) {
    let two = T::c(2.0);
    match which {
        LiftTarget::Map => (&jet.jac, &jet.fx * two, &jet.grad_h),
        LiftTarget::Spherified => (
            &jet.d_spherified,
            &jet.spherified * two,
            &jet.grad_sq_radius,
        ),
    }
}

fn normal_lift<T: Real>(jet: &Jet<T>, which: LiftTarget, tols: &Tolerances) -> Result<Lift<T>> {
    let p = jet.p();
    let (d, rhs, grad) = target_parts(jet, which);
    let sol = min_norm_solve(d, &rhs, T::c(tols.rank));
    if sol.rank < p {
        let svals = linalg::singular_values(d);
        let sigma_min = linalg::sigma(&svals, p).to_f64_lossy();
        return Err(match which {
            LiftTarget::Map => Error::CriticalPoint {
                sigma_min,
                sigma_max: sol.sigma_max.to_f64_lossy(),
            },
            LiftTarget::Spherified => Error::DRegularityFailure {
                point: linalg::vec_f64(&jet.x),
                sigma_min,
            },
        });
    }
    let coeff = sol.x.dot(grad) / grad.norm_squared();
    let v = &sol.x - grad * coeff;
    Ok(Lift {
        w: sol.x,
        v,
        coeff,
        residual: sol.residual,
    })
}

/// Minimal-norm lift of `2f(x)` through `Dfₓ`; `coeff` is `α`.
pub fn normal_lift_f<T: Real>(jet: &Jet<T>, tols: &Tolerances) -> Result<Lift<T>> {
    normal_lift(jet, LiftTarget::Map, tols)
}

/// Minimal-norm lift of `2𝔉(x)` through `D𝔉ₓ`; `coeff` is `β`, which equals 1.
pub fn normal_lift_spherified<T: Real>(jet: &Jet<T>, tols: &Tolerances) -> Result<Lift<T>> {
    normal_lift(jet, LiftTarget::Spherified, tols)
}

/// `α = 4‖f(x)‖²/‖∇h(x)‖²`.
pub fn alpha_closed_form<T: Real>(jet: &Jet<T>) -> T {
    T::c(4.0) * jet.h / jet.grad_h.norm_squared()
}

/// Lift whose tangential part lies in `L_x = {v : ⟨v,∇h⟩ = 0, ⟨v,∇ℌ⟩ = 0}`,
/// the tangent space of the intersection of the tube and the sphere through `x`.
///
/// `v̄` is the minimal-norm solution of `D|_{L_x}(v̄) = 2·target − coeff·D(∇)`
/// in an orthonormal basis of `L_x`.
pub fn constrained_lift<T: Real>(
    jet: &Jet<T>,
    which: LiftTarget,
    tols: &Tolerances,
) -> Result<Lift<T>> {
    let cos = cos_angle(&jet.grad_h, &jet.grad_sq_radius).ok_or(Error::ZeroVector)?;
    if cos.abs() > T::one() - T::c(tols.collinear) {
        return Err(Error::Precondition(
            "constrained lift needs linearly independent grad h and grad H".into(),
        ));
    }
    let (aug_margin, _) = augmented_margin(jet);
    if aug_margin < T::c(tols.rank) {
        return Err(Error::Precondition(
            "constrained lift is undefined on M(f)".into(),
        ));
    }
    let basis = orthonormal_complement(&[jet.grad_h.clone(), jet.grad_sq_radius.clone()], jet.n());
    let (d, target, grad) = target_parts(jet, which);
    let coeff = match which {
        LiftTarget::Map => alpha_closed_form(jet),
        LiftTarget::Spherified => T::one(),
    };
    let rhs = &target - d * grad * coeff;
    let restricted = d * &basis;
    let sol = min_norm_solve(&restricted, &rhs, T::c(tols.rank));
    let tolerance = T::c(tols.lift_residual) * jet.scale();
    if !(sol.residual <= tolerance) {
        return Err(Error::SubcaseMisclassification {
            residual: sol.residual.to_f64_lossy(),
            tolerance: tolerance.to_f64_lossy(),
        });
    }
    let v = &basis * &sol.x;
    let w = &v + grad * coeff;
    let residual = (d * &w - &target).norm();
    Ok(Lift {
        w,
        v,
        coeff,
        residual,
    })
}

/// Normalized `σ_{p+1}` of the augmented Jacobian of `x ↦ (f(x), ‖x‖²)`,
/// with `σ_max`. Zero exactly on `M(f)`.
pub fn augmented_margin<T: Real>(jet: &Jet<T>) -> (T, T) {
    let s = linalg::singular_values(&jet.augmented);
    let smax = linalg::sigma(&s, 1);
    let smin = linalg::sigma(&s, jet.p() + 1);
    if smax == T::zero() {
        (T::zero(), smax)
    } else {
        (smin / smax, smax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CaseLabel {
    /// `∇h ∥ ∇ℌ`.
    Collinear,
    /// Independent gradients and `x ∉ M(f)`.
    TransverseGeneric,
    /// `x ∈ M(f)`: the fibres of `f` and `𝔉` share their tangent space.
    ExceptionalMf,
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CaseLabel::Collinear => "collinear",
            CaseLabel::TransverseGeneric => "transverse-generic",
            CaseLabel::ExceptionalMf => "exceptional-mf",
        })
    }
}

/// Margins recorded with every classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseMargins {
    pub collinearity_cos: f64,
    /// `σ_{p+1}(aug) / σ_max(aug)`.
    pub aug_sigma_min: f64,
    pub aug_sigma_max: f64,
    /// `σ_p(Dfₓ)`.
    pub df_sigma_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub label: CaseLabel,
    pub margins: CaseMargins,
}

/// Collinear is tested first, then membership in `M(f)`.
pub fn classify_point<T: Real>(jet: &Jet<T>, tols: &Tolerances) -> Classification {
    let cos = cos_angle(&jet.grad_h, &jet.grad_sq_radius).unwrap_or_else(T::zero);
    let (aug_margin, aug_max) = augmented_margin(jet);
    let df_s = linalg::singular_values(&jet.jac);
    let margins = CaseMargins {
        collinearity_cos: cos.to_f64_lossy(),
        aug_sigma_min: aug_margin.to_f64_lossy(),
        aug_sigma_max: aug_max.to_f64_lossy(),
        df_sigma_min: linalg::sigma(&df_s, jet.p()).to_f64_lossy(),
    };
    let label = if cos.abs() > T::one() - T::c(tols.collinear) {
        CaseLabel::Collinear
    } else if aug_margin < T::c(tols.rank) {
        CaseLabel::ExceptionalMf
    } else {
        CaseLabel::TransverseGeneric
    };
    Classification { label, margins }
}

/// A sampled point where `μ ≤ 0`; recorded, never discarded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeypropViolation {
    pub x: Vec<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuValue<T> {
    pub mu: T,
    pub violation: Option<KeypropViolation>,
}

/// `μ = ‖∇ℌ‖² / ⟨∇ℌ, w_f⟩`, the factor with `w_𝔉 = μ w_f` on `M(f)`.
pub fn mu<T: Real>(jet: &Jet<T>, w_f: &DVector<T>, tols: &Tolerances) -> Result<MuValue<T>> {
    let inner = jet.grad_sq_radius.dot(w_f);
    if inner.abs() <= T::c(tols.mu_undefined) * jet.grad_sq_radius.norm() * w_f.norm() {
        return Err(Error::MuUndefined {
            inner: inner.to_f64_lossy(),
        });
    }
    let mu = jet.grad_sq_radius.norm_squared() / inner;
    let violation = (mu <= T::zero()).then(|| KeypropViolation {
        x: linalg::vec_f64(&jet.x),
        mu: mu.to_f64_lossy(),
    });
    Ok(MuValue { mu, violation })
}

/// How the lifts in a [`LiftPair`] were built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LiftMode {
    Normal,
    Constrained,
    /// Convex combination `s·normal + (1−s)·constrained`.
    Blended {
        normal_weight: f64,
    },
}

/// Both lifts at a point with their decompositions and diagnostics.
#[derive(Debug, Clone)]
pub struct LiftPair<T: Real> {
    pub w_f: DVector<T>,
    pub v_f: DVector<T>,
    pub alpha: T,
    pub w_sph: DVector<T>,
    pub v_sph: DVector<T>,
    pub beta: T,
    pub case: Classification,
    pub mu: Option<T>,
    pub keyprop_violation: Option<KeypropViolation>,
    pub residual_f: T,
    pub residual_sph: T,
    pub mode: LiftMode,
}

impl<T: Real> LiftPair<T> {
    pub(crate) fn from_lifts(
        jet: &Jet<T>,
        lf: Lift<T>,
        ls: Lift<T>,
        case: Classification,
        mode: LiftMode,
        tols: &Tolerances,
    ) -> Self {
        let collinear_lifts = cos_angle(&lf.w, &ls.w)
            .map(|c| c.abs() > T::one() - T::c(tols.collinear))
            .unwrap_or(false);
        let (mu_value, keyprop_violation) =
            if case.label == CaseLabel::ExceptionalMf || collinear_lifts {
                match mu(jet, &lf.w, tols) {
                    Ok(m) => (Some(m.mu), m.violation),
                    Err(_) => (None, None),
                }
            } else {
                (None, None)
            };
        LiftPair {
            w_f: lf.w,
            v_f: lf.v,
            alpha: lf.coeff,
            w_sph: ls.w,
            v_sph: ls.v,
            beta: ls.coeff,
            case,
            mu: mu_value,
            keyprop_violation,
            residual_f: lf.residual,
            residual_sph: ls.residual,
            mode,
        }
    }

    /// Serializable record with keys `w_f, v_f, alpha, w_F, v_F, beta, case, mu, residual_f, residual_F`.
    pub fn record(&self) -> LiftRecord {
        LiftRecord {
            w_f: linalg::vec_f64(&self.w_f),
            v_f: linalg::vec_f64(&self.v_f),
            alpha: self.alpha.to_f64_lossy(),
            w_sph: linalg::vec_f64(&self.w_sph),
            v_sph: linalg::vec_f64(&self.v_sph),
            beta: self.beta.to_f64_lossy(),
            case: self.case,
            mu: self.mu.map(|m| m.to_f64_lossy()),
            keyprop_violation: self.keyprop_violation.clone(),
            residual_f: self.residual_f.to_f64_lossy(),
            residual_sph: self.residual_sph.to_f64_lossy(),
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftRecord {
    pub w_f: Vec<f64>,
    pub v_f: Vec<f64>,
    pub alpha: f64,
    #[serde(rename = "w_F")]
    pub w_sph: Vec<f64>,
    #[serde(rename = "v_F")]
    pub v_sph: Vec<f64>,
    pub beta: f64,
    pub case: Classification,
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyprop_violation: Option<KeypropViolation>,
    pub residual_f: f64,
    #[serde(rename = "residual_F")]
    pub residual_sph: f64,
    pub mode: LiftMode,
}

/// Normal lifts through `f` and `𝔉` with classification and `μ` when defined.
pub fn lift_pair<T: Real>(jet: &Jet<T>, tols: &Tolerances) -> Result<LiftPair<T>> {
    let case = classify_point(jet, tols);
    let lf = normal_lift_f(jet, tols)?;
    let ls = normal_lift_spherified(jet, tols)?;
    Ok(LiftPair::from_lifts(
        jet,
        lf,
        ls,
        case,
        LiftMode::Normal,
        tols,
    ))
}

/// Pencil-tangency residual of a lift, used by diagnostics and tests.
pub fn lift_tangency<T: Real>(jet: &Jet<T>, w: &DVector<T>) -> T {
    pencil::pencil_tangent_residual(jet, w)
}
