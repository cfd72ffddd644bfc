//! The Milnor vector field
//! `w̃ = ‖∇ℌ‖ w_f + α ‖∇h‖ w_𝔉`,
//! transverse to the tubes `‖f‖ = const` and to the spheres `‖x‖ = const`
//! and tangent to every pencil member `E_ℓ`.
//!
//! The field is evaluated pointwise. Collinear points and points of `M(f)` use
//! the normal lifts; transverse-generic points use lifts whose tangential
//! parts lie in `L_x = T_x(tube ∩ sphere)`. Those constrained lifts blow up
//! like `1/dist(x, M(f))`, so between the two charts the lifts are blended
//! with a smooth weight of the normalized augmented margin. Both charts give
//! lifts of the same vector, so the blend is again a lift and `w̃` stays
//! tangent to `E_ℓ`; positivity of the two inner products is preserved
//! because they are linear in `w̃`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::discriminant::Exclusion;
use crate::error::{Error, Result};
use crate::lifting::{
    classify_point, constrained_lift, normal_lift_f, normal_lift_spherified, CaseLabel,
    Classification, KeypropViolation, Lift, LiftMode, LiftPair, LiftRecord, LiftTarget,
};
use crate::linalg::{self, cos_angle};
use crate::pencil::pencil_tangent_residual;
use crate::polymap::{Jet, PolynomialMap};
use crate::sampling::{self, streams, SamplerCfg};
use crate::scalar::Real;
use crate::tolerances::Tolerances;

/// One evaluation of the Milnor field with its transversality diagnostics.
#[derive(Debug, Clone)]
pub struct FieldSample<T: Real> {
    pub x: DVector<T>,
    pub w_tilde: DVector<T>,
    pub case: Classification,
    /// `⟨w̃, ∇h⟩`.
    pub ip_tube: T,
    /// `⟨w̃, ∇ℌ⟩`.
    pub ip_sphere: T,
    pub tangency_residual: T,
    pub scale: T,
    pub lifts: LiftPair<T>,
    /// Both inner products positive and tangency within tolerance.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRecord {
    pub x: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub case: Classification,
    pub ip_tube: f64,
    pub ip_sphere: f64,
    pub tangency_residual: f64,
    pub scale: f64,
    pub valid: bool,
    pub lifts: LiftRecord,
}

impl<T: Real> FieldSample<T> {
    pub fn record(&self) -> FieldRecord {
        FieldRecord {
            x: linalg::vec_f64(&self.x),
            w_tilde: linalg::vec_f64(&self.w_tilde),
            case: self.case,
            ip_tube: self.ip_tube.to_f64_lossy(),
            ip_sphere: self.ip_sphere.to_f64_lossy(),
            tangency_residual: self.tangency_residual.to_f64_lossy(),
            scale: self.scale.to_f64_lossy(),
            valid: self.valid,
            lifts: self.lifts.record(),
        }
    }
}

/// `‖∇ℌ‖ w_f + α‖∇h‖ w_𝔉`.
pub fn assemble_field<T: Real>(
    jet: &Jet<T>,
    w_f: &DVector<T>,
    w_sph: &DVector<T>,
    alpha: T,
) -> DVector<T> {
    w_f * jet.grad_sq_radius.norm() + w_sph * (alpha * jet.grad_h.norm())
}

/// Weight of the normal-lift chart: 1 at or below `blend_low`, 0 at or above
/// `blend_high`, smoothstep in `log(margin)` between.
pub fn normal_weight(aug_margin: f64, tols: &Tolerances) -> f64 {
    if aug_margin <= tols.blend_low {
        return 1.0;
    }
    if aug_margin >= tols.blend_high {
        return 0.0;
    }
    let t = (aug_margin.ln() - tols.blend_low.ln()) / (tols.blend_high.ln() - tols.blend_low.ln());
    1.0 - t * t * (3.0 - 2.0 * t)
}

fn inner_products<T: Real>(jet: &Jet<T>, w: &DVector<T>) -> (T, T) {
    (w.dot(&jet.grad_h), w.dot(&jet.grad_sq_radius))
}

fn transverse<T: Real>(jet: &Jet<T>, w: &DVector<T>) -> bool {
    let (a, b) = inner_products(jet, w);
    a > T::zero() && b > T::zero()
}

fn blend_lift<T: Real>(
    jet: &Jet<T>,
    normal: &Lift<T>,
    constrained: &Lift<T>,
    s: T,
    which: LiftTarget,
) -> Lift<T> {
    let one = T::one();
    let w = &normal.w * s + &constrained.w * (one - s);
    let coeff = normal.coeff * s + constrained.coeff * (one - s);
    let two = T::c(2.0);
    let (grad, residual) = match which {
        LiftTarget::Map => (&jet.grad_h, (&jet.jac * &w - &jet.fx * two).norm()),
        LiftTarget::Spherified => (
            &jet.grad_sq_radius,
            (&jet.d_spherified * &w - &jet.spherified * two).norm(),
        ),
    };
    let v = &w - grad * coeff;
    Lift {
        w,
        v,
        coeff,
        residual,
    }
}

/// Evaluates `w̃` at a jet.
///
/// Fails when `Dfₓ` or `D𝔉ₓ` is rank deficient (the latter is a
/// d-regularity failure witness). A sample whose inner products are not both
/// positive is returned with `valid = false`.
pub fn milnor_vector<T: Real>(jet: &Jet<T>, tols: &Tolerances) -> Result<FieldSample<T>> {
    let mut case = classify_point(jet, tols);
    let nf = normal_lift_f(jet, tols)?;
    let ns = normal_lift_spherified(jet, tols)?;
    let scale = jet.scale();

    let mut weight = match case.label {
        CaseLabel::TransverseGeneric => normal_weight(case.margins.aug_sigma_min, tols),
        _ => 1.0,
    };
    let mut constrained = None;
    if weight < 1.0 {
        let cf = constrained_lift(jet, LiftTarget::Map, tols);
        let cs = constrained_lift(jet, LiftTarget::Spherified, tols);
        match (cf, cs) {
            (Ok(cf), Ok(cs)) => constrained = Some((cf, cs)),
            (Err(Error::SubcaseMisclassification { .. }), _)
            | (_, Err(Error::SubcaseMisclassification { .. })) => {
                case.label = CaseLabel::ExceptionalMf;
                weight = 1.0;
                let tol = T::c(tols.lift_residual) * scale;
                if nf.residual > tol || ns.residual > tol {
                    let residual = if nf.residual > ns.residual {
                        nf.residual
                    } else {
                        ns.residual
                    };
                    return Err(Error::SubcaseMisclassification {
                        residual: residual.to_f64_lossy(),
                        tolerance: tol.to_f64_lossy(),
                    });
                }
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }

    let (lf, ls, mode) = match constrained {
        None => (nf, ns, LiftMode::Normal),
        Some((cf, cs)) => {
            let normal_ok = transverse(jet, &assemble_field(jet, &nf.w, &ns.w, nf.coeff));
            let constrained_ok = transverse(jet, &assemble_field(jet, &cf.w, &cs.w, cf.coeff));
            let s = match (normal_ok, constrained_ok) {
                (true, false) => 1.0,
                (false, true) => 0.0,
                _ => weight,
            };
            if s == 0.0 {
                (cf, cs, LiftMode::Constrained)
            } else if s == 1.0 {
                (nf, ns, LiftMode::Normal)
            } else {
                let st = T::c(s);
                (
                    blend_lift(jet, &nf, &cf, st, LiftTarget::Map),
                    blend_lift(jet, &ns, &cs, st, LiftTarget::Spherified),
                    LiftMode::Blended { normal_weight: s },
                )
            }
        }
    };

    let w_tilde = assemble_field(jet, &lf.w, &ls.w, lf.coeff);
    let lifts = LiftPair::from_lifts(jet, lf, ls, case, mode, tols);
    let (ip_tube, ip_sphere) = inner_products(jet, &w_tilde);
    let tangency_residual = pencil_tangent_residual(jet, &w_tilde);
    let valid = ip_tube > T::zero()
        && ip_sphere > T::zero()
        && tangency_residual < T::c(tols.field_tangency) * scale;
    Ok(FieldSample {
        x: jet.x.clone(),
        w_tilde,
        case: lifts.case,
        ip_tube,
        ip_sphere,
        tangency_residual,
        scale,
        lifts,
        valid,
    })
}

/// Shell `ε_min ≤ ‖x‖ ≤ ε_max` with points where `‖f(x)‖ ≤ f_floor` removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annulus {
    pub eps_min: f64,
    pub eps_max: f64,
    pub f_floor: f64,
}

impl Annulus {
    pub fn new(eps_min: f64, eps_max: f64) -> Self {
        Annulus {
            eps_min,
            eps_max,
            f_floor: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0) {
            return Err(Error::input(
                "eps_min",
                "annulus inner radius must be positive",
            ));
        }
        if !(self.eps_max >= self.eps_min) {
            return Err(Error::input(
                "eps_max",
                "annulus outer radius below inner radius",
            ));
        }
        Ok(())
    }

    fn sample(&self, seed: u64, stream: u64, index: usize, n: usize) -> DVector<f64> {
        let mut rng = sampling::stream_rng(seed, stream, index as u64);
        let dir = sampling::unit_direction(&mut rng, n);
        dir * sampling::log_uniform(&mut rng, self.eps_min, self.eps_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodViolation {
    pub x: Vec<f64>,
    pub cos: f64,
}

/// Sampled check that `∇h` and `∇ℌ` never point in opposite directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodReport {
    pub map: String,
    pub annulus: Annulus,
    pub attempted: usize,
    pub accepted: usize,
    pub min_cos: f64,
    pub argmin: Vec<f64>,
    pub tol: f64,
    pub violations: Vec<NodViolation>,
}

pub(crate) fn map_name<T: Real>(map: &PolynomialMap<T>) -> String {
    map.name().unwrap_or("unnamed").to_string()
}

/// Samples the annulus off `V` and reports the minimum of `cos∠(∇h,∇ℌ)`.
pub fn nod_scan<T: Real>(
    map: &PolynomialMap<T>,
    annulus: &Annulus,
    sampler: &SamplerCfg,
    tols: &Tolerances,
) -> Result<NodReport> {
    annulus.validate()?;
    let n = map.n();
    let cosines: Vec<Option<(Vec<f64>, f64)>> = (0..sampler.samples)
        .into_par_iter()
        .map(|i| {
            let x64 = annulus.sample(sampler.seed, streams::NOD, i, n);
            let x: DVector<T> = linalg::from_f64_slice(x64.as_slice());
            let fx = map.eval(&x).ok()?;
            let floor = PolynomialMap::default_floor(&x);
            let fnorm = fx.norm();
            if fnorm <= floor || fnorm.to_f64_lossy() <= annulus.f_floor {
                return None;
            }
            let grad_h = map.jacobian(&x).ok()?.transpose() * &fx;
            let c = cos_angle(&grad_h, &x)?;
            Some((x64.as_slice().to_vec(), c.to_f64_lossy()))
        })
        .collect();
    let mut accepted = 0;
    let mut min_cos = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut violations = Vec::new();
    for (x, c) in cosines.into_iter().flatten() {
        accepted += 1;
        if c < min_cos {
            min_cos = c;
            argmin = x.clone();
        }
        if c < -1.0 + tols.opposite {
            violations.push(NodViolation { x, cos: c });
        }
    }
    if accepted == 0 {
        return Err(Error::EmptySample(
            "no annulus sample lies off the zero set".into(),
        ));
    }
    Ok(NodReport {
        map: map_name(map),
        annulus: *annulus,
        attempted: sampler.samples,
        accepted,
        min_cos,
        argmin,
        tol: tols.opposite,
        violations,
    })
}

/// Aggregate of Milnor-field evaluations over an annulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldScanReport {
    pub map: String,
    pub annulus: Annulus,
    pub attempted: usize,
    pub evaluated: usize,
    pub valid: usize,
    /// Samples skipped, by reason (exclusion zone or evaluation error).
    pub skipped: BTreeMap<String, usize>,
    pub case_histogram: BTreeMap<String, usize>,
    /// Minimum of `⟨w̃,∇h⟩ / (‖w̃‖‖∇h‖)`.
    pub min_cos_tube: f64,
    /// Minimum of `⟨w̃,∇ℌ⟩ / (‖w̃‖‖∇ℌ‖)`.
    pub min_cos_sphere: f64,
    /// Maximum of `tangency_residual / scale`.
    pub max_tangency_over_scale: f64,
    pub mu_defined: usize,
    /// Maximum relative error of `⟨∇ℌ,w_f⟩⟨∇h,w_𝔉⟩ = 4‖f‖²‖∇ℌ‖²` where `μ` is defined.
    pub max_sign_identity_rel_err: f64,
    pub keyprop_violations: Vec<KeypropViolation>,
    /// Full records of every invalid sample.
    pub invalid_witnesses: Vec<FieldRecord>,
}

impl FieldScanReport {
    pub fn all_valid(&self) -> bool {
        self.evaluated > 0 && self.valid == self.evaluated
    }
}

struct SampleDiag {
    cos_tube: f64,
    cos_sphere: f64,
    sign_err: Option<f64>,
}

enum FieldOutcome {
    Sample(Box<FieldRecord>, SampleDiag),
    Skipped(String),
}

fn evaluate_sample<T: Real>(
    map: &PolynomialMap<T>,
    x64: &DVector<f64>,
    annulus: &Annulus,
    exclusion: &Exclusion,
    tols: &Tolerances,
) -> FieldOutcome {
    let x: DVector<T> = linalg::from_f64_slice(x64.as_slice());
    let jet = match map.jet(&x, None) {
        Ok(j) => j,
        Err(_) => return FieldOutcome::Skipped("zero-set".into()),
    };
    if jet.f_norm.to_f64_lossy() <= annulus.f_floor {
        return FieldOutcome::Skipped("zero-set".into());
    }
    if let Some(reason) = exclusion.excludes(&jet.fx) {
        return FieldOutcome::Skipped(reason.to_string());
    }
    match milnor_vector(&jet, tols) {
        Ok(s) => {
            let cos = |g: &DVector<T>| {
                cos_angle(&s.w_tilde, g)
                    .map(|c| c.to_f64_lossy())
                    .unwrap_or(f64::NAN)
            };
            let sign_err = s.lifts.mu.map(|_| {
                let lhs = jet.grad_sq_radius.dot(&s.lifts.w_f) * jet.grad_h.dot(&s.lifts.w_sph);
                let rhs = T::c(4.0) * jet.h * jet.grad_sq_radius.norm_squared();
                ((lhs - rhs) / rhs).abs().to_f64_lossy()
            });
            let diag = SampleDiag {
                cos_tube: cos(&jet.grad_h),
                cos_sphere: cos(&jet.grad_sq_radius),
                sign_err,
            };
            FieldOutcome::Sample(Box::new(s.record()), diag)
        }
        Err(Error::CriticalPoint { .. }) => FieldOutcome::Skipped("critical-point".into()),
        Err(Error::DRegularityFailure { .. }) => {
            FieldOutcome::Skipped("d-regularity-failure".into())
        }
        Err(e) => FieldOutcome::Skipped(format!("error: {e}")),
    }
}

/// Evaluates `w̃` at seeded annulus samples outside the exclusion zone.
///
/// Returns the aggregate report and one record per evaluated sample, in
/// sample-index order.
pub fn field_scan<T: Real>(
    map: &PolynomialMap<T>,
    annulus: &Annulus,
    sampler: &SamplerCfg,
    exclusion: &Exclusion,
    tols: &Tolerances,
) -> Result<(FieldScanReport, Vec<FieldRecord>)> {
    annulus.validate()?;
    let n = map.n();
    let outcomes: Vec<FieldOutcome> = (0..sampler.samples)
        .into_par_iter()
        .map(|i| {
            let x64 = annulus.sample(sampler.seed, streams::FIELD, i, n);
            evaluate_sample(map, &x64, annulus, exclusion, tols)
        })
        .collect();

    let mut report = FieldScanReport {
        map: map_name(map),
        annulus: *annulus,
        attempted: sampler.samples,
        evaluated: 0,
        valid: 0,
        skipped: BTreeMap::new(),
        case_histogram: BTreeMap::new(),
        min_cos_tube: f64::INFINITY,
        min_cos_sphere: f64::INFINITY,
        max_tangency_over_scale: 0.0,
        mu_defined: 0,
        max_sign_identity_rel_err: 0.0,
        keyprop_violations: Vec::new(),
        invalid_witnesses: Vec::new(),
    };
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome {
            FieldOutcome::Skipped(reason) => *report.skipped.entry(reason).or_default() += 1,
            FieldOutcome::Sample(rec, diag) => {
                let rec = *rec;
                report.evaluated += 1;
                *report
                    .case_histogram
                    .entry(rec.case.label.to_string())
                    .or_default() += 1;
                report.min_cos_tube = report.min_cos_tube.min(diag.cos_tube);
                report.min_cos_sphere = report.min_cos_sphere.min(diag.cos_sphere);
                report.max_tangency_over_scale = report
                    .max_tangency_over_scale
                    .max(rec.tangency_residual / rec.scale);
                if let Some(err) = diag.sign_err {
                    report.mu_defined += 1;
                    report.max_sign_identity_rel_err = report.max_sign_identity_rel_err.max(err);
                }
                if let Some(v) = &rec.lifts.keyprop_violation {
                    report.keyprop_violations.push(v.clone());
                }
                if rec.valid {
                    report.valid += 1;
                } else {
                    report.invalid_witnesses.push(rec.clone());
                }
                records.push(rec);
            }
        }
    }
    if report.evaluated == 0 {
        return Err(Error::EmptySample(
            "no field sample outside the exclusion zone".into(),
        ));
    }
    Ok((report, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn square_map_field_at_unit_x() {
        let f = catalog::square::<f64>();
        let jet = f.jet(&v(&[1.0, 0.0]), None).unwrap();
        let s = milnor_vector(&jet, &Tolerances::default()).unwrap();
        assert_relative_eq!(s.w_tilde, v(&[4.0, 0.0]), epsilon = 1e-13);
        assert_relative_eq!(s.ip_tube, 16.0, epsilon = 1e-12);
        assert_relative_eq!(s.ip_sphere, 8.0, epsilon = 1e-12);
        assert!(s.valid);
        assert_eq!(s.case.label, CaseLabel::Collinear);
    }

    #[test]
    fn identity_field_is_radial() {
        let f = catalog::identity_2::<f64>();
        let x = v(&[0.25, -0.5]);
        let jet = f.jet(&x, None).unwrap();
        let s = milnor_vector(&jet, &Tolerances::default()).unwrap();
        assert_relative_eq!(s.w_tilde, &x * (8.0 * x.norm()), epsilon = 1e-13);
        assert!(s.ip_tube > 0.0 && s.ip_sphere > 0.0);
    }

    #[test]
    fn quadrics_field_at_generic_point() {
        let f = catalog::quadrics_3_2::<f64>();
        let jet = f.jet(&v(&[1.0, 1.0, 1.0]), None).unwrap();
        let t = Tolerances::default();
        let s = milnor_vector(&jet, &t).unwrap();
        assert_eq!(s.case.label, CaseLabel::TransverseGeneric);
        assert_eq!(s.lifts.mode, LiftMode::Constrained);
        assert!(s.tangency_residual < 1e-7 * s.scale);
        assert!(s.ip_tube > 0.0 && s.ip_sphere > 0.0);
        // Constrained lifts: both tangential parts orthogonal to both gradients, so
        // the inner products reduce to the (1 + cos θ) form.
        let cos = cos_angle(&jet.grad_h, &jet.grad_sq_radius).unwrap();
        let (nh, n_big_h) = (jet.grad_h.norm(), jet.grad_sq_radius.norm());
        let alpha = s.lifts.alpha;
        assert_relative_eq!(
            s.ip_tube,
            alpha * n_big_h * nh * nh * (1.0 + cos),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            s.ip_sphere,
            alpha * nh * n_big_h * n_big_h * (1.0 + cos),
            max_relative = 1e-9
        );
    }

    #[test]
    fn near_m_f_uses_normal_chart() {
        // Close to the coordinate plane x3 = 0, which lies in M(f) for the quadrics.
        let f = catalog::quadrics_3_2::<f64>();
        let jet = f.jet(&v(&[0.3, 0.2, 1e-5]), None).unwrap();
        let s = milnor_vector(&jet, &Tolerances::default()).unwrap();
        assert!(s.valid);
        assert_eq!(s.lifts.mode, LiftMode::Normal);
        assert!(s.w_tilde.norm() < 10.0);
    }

    #[test]
    fn blend_weight_is_monotone_and_clamped() {
        let t = Tolerances::default();
        assert_eq!(normal_weight(1e-5, &t), 1.0);
        assert_eq!(normal_weight(0.5, &t), 0.0);
        let mut last = 1.0;
        for k in 0..50 {
            let m = 1e-2 * 10f64.powf(k as f64 / 49.0);
            let w = normal_weight(m, &t);
            assert!(w <= last + 1e-15);
            last = w;
        }
    }

    #[test]
    fn nod_scan_square_and_identity() {
        let sampler = SamplerCfg {
            samples: 500,
            ..SamplerCfg::default()
        };
        let t = Tolerances::default();
        for f in [catalog::square::<f64>(), catalog::identity_2::<f64>()] {
            let r = nod_scan(&f, &Annulus::new(0.1, 1.0), &sampler, &t).unwrap();
            assert_relative_eq!(r.min_cos, 1.0, epsilon = 1e-12);
            assert!(r.violations.is_empty());
        }
    }

    #[test]
    fn nod_scan_rejects_bad_annulus() {
        let f = catalog::square::<f64>();
        let r = nod_scan(
            &f,
            &Annulus::new(0.0, 1.0),
            &SamplerCfg::default(),
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::Input { .. })));
    }

    #[test]
    fn nod_scan_empty_when_floor_covers_region() {
        let f = catalog::square::<f64>();
        let mut a = Annulus::new(0.1, 0.2);
        a.f_floor = 1.0;
        let r = nod_scan(
            &f,
            &a,
            &SamplerCfg {
                samples: 50,
                ..SamplerCfg::default()
            },
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::EmptySample(_))));
    }
}
