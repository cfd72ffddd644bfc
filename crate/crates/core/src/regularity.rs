//! d-regularity margins, the sampled and adversarial d-regularity scan, and
//! the fibre/sphere transversality sampler.
//!
//! Three margins are computed at a point off `V`:
//!
//! * the literal margin `σ_p(D𝔉ₓ)/σ₁(D𝔉ₓ)`;
//! * the balanced margin `σ_p(B)/σ₁(B)` with
//!   `B = Φ x̂ᵀ + (I − ΦΦᵀ) Dfₓ / ‖Dfₓ‖₂`, which is `D𝔉ₓ` with its radial
//!   and spherical blocks rescaled to unit size;
//! * the sphere margin `σ_{p−1}((I − ΦΦᵀ) Dfₓ Q)/‖Dfₓ‖₂` with `Q` an
//!   orthonormal basis of `x^⊥`, i.e. the rank of `DΦₓ` on the sphere.
//!
//! All three vanish on the same set. The literal margin decays like
//! `‖f(x)‖` near `V` because `D𝔉ₓ` has a spherical block of size
//! `‖x‖/‖f(x)‖`; scans therefore use the balanced margin.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discriminant::Exclusion;
use crate::error::{Error, Result};
use crate::linalg::{self, min_norm_solve, orthonormal_complement};
use crate::milnorfield::map_name;
use crate::optimize::{sphere_descent, DescentCfg};
use crate::polymap::{Jet, PolynomialMap};
use crate::sampling::{self, streams, SamplerCfg};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// `σ_p(D𝔉ₓ) / σ₁(D𝔉ₓ)`.
pub fn dreg_margin<T: Real>(jet: &Jet<T>) -> T {
    normalized_min(&jet.d_spherified, jet.p())
}

fn normalized_min<T: Real>(m: &DMatrix<T>, k: usize) -> T {
    let s = linalg::singular_values(m);
    let smax = linalg::sigma(&s, 1);
    if smax == T::zero() {
        T::zero()
    } else {
        linalg::sigma(&s, k) / smax
    }
}

fn spherical_projector<T: Real>(jet: &Jet<T>) -> DMatrix<T> {
    let p = jet.p();
    DMatrix::identity(p, p) - &jet.phi * jet.phi.transpose()
}

/// `σ_p(B)/σ₁(B)` for the balanced differential `B`.
pub fn balanced_dreg_margin<T: Real>(jet: &Jet<T>) -> T {
    let jn = linalg::spectral_norm(&jet.jac);
    if jn == T::zero() {
        return T::zero();
    }
    let xhat = &jet.x / jet.x_norm;
    let b = &jet.phi * xhat.transpose() + spherical_projector(jet) * &jet.jac / jn;
    normalized_min(&b, jet.p())
}

/// `σ_{p−1}` of `DΦₓ` restricted to `Tₓ𝕊`, normalized by `‖Dfₓ‖₂`.
pub fn sphere_margin<T: Real>(jet: &Jet<T>) -> T {
    let jn = linalg::spectral_norm(&jet.jac);
    if jn == T::zero() {
        return T::zero();
    }
    let q = orthonormal_complement(std::slice::from_ref(&jet.x), jet.n());
    let m = spherical_projector(jet) * &jet.jac * q / jn;
    linalg::sigma(&linalg::singular_values(&m), jet.p() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DregThresholds {
    pub pass: f64,
    pub fail: f64,
}

impl Default for DregThresholds {
    fn default() -> Self {
        DregThresholds {
            pass: 1e-2,
            fail: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DregOpts {
    pub thresholds: DregThresholds,
    pub exclusion: Exclusion,
    pub descent: DescentCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DregWitness {
    pub x: Vec<f64>,
    pub radius: f64,
    /// Balanced margin.
    pub margin: f64,
    pub literal_margin: f64,
    pub sphere_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginSample {
    pub index: usize,
    pub radius: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub map: String,
    pub epsilon: f64,
    pub samples: usize,
    pub evaluated: usize,
    pub excluded: usize,
    pub sample_min: f64,
    pub sample_p1: f64,
    pub sample_median: f64,
    pub sample_argmin: Vec<f64>,
    pub restarts: usize,
    pub adversarial_min: f64,
    pub adversarial_argmin: Vec<f64>,
    pub thresholds: DregThresholds,
    pub verdict: Verdict,
    pub witnesses: Vec<DregWitness>,
    /// Per-sample margins in sample order.
    #[serde(skip)]
    pub margins: Vec<MarginSample>,
}

impl RegularityReport {
    /// The witness with the smallest margin.
    pub fn worst_witness(&self) -> Option<&DregWitness> {
        self.witnesses
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

fn margin_at<T: Real>(
    map: &PolynomialMap<T>,
    x: &DVector<f64>,
    exclusion: &Exclusion,
) -> Option<Jet<T>> {
    let xt: DVector<T> = linalg::from_f64_slice(x.as_slice());
    let jet = map.jet(&xt, None).ok()?;
    if exclusion.excludes(&jet.fx).is_some() {
        return None;
    }
    Some(jet)
}

fn witness<T: Real>(jet: &Jet<T>) -> DregWitness {
    DregWitness {
        x: linalg::vec_f64(&jet.x),
        radius: jet.x_norm.to_f64_lossy(),
        margin: balanced_dreg_margin(jet).to_f64_lossy(),
        literal_margin: dreg_margin(jet).to_f64_lossy(),
        sphere_margin: sphere_margin(jet).to_f64_lossy(),
    }
}

/// Sampled d-regularity check on spheres of radius in `(ε/100, ε]`.
///
/// Samples are Gaussian directions with log-uniform radii; points on `V` or
/// in the exclusion zone are skipped. The `restarts` worst samples seed a
/// projected descent of the balanced margin on their own sphere.
pub fn dreg_scan<T: Real>(
    map: &PolynomialMap<T>,
    epsilon: f64,
    sampler: &SamplerCfg,
    opts: &DregOpts,
) -> Result<RegularityReport> {
    if !(epsilon > 0.0) {
        return Err(Error::input("epsilon", "epsilon must be positive"));
    }
    let n = map.n();
    let ex = &opts.exclusion;
    let evaluated: Vec<Option<(DVector<f64>, f64)>> = (0..sampler.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream_rng(sampler.seed, streams::DREG, i as u64);
            let dir = sampling::unit_direction(&mut rng, n);
            let x = dir * sampling::log_uniform(&mut rng, epsilon / 100.0, epsilon);
            let jet: Jet<T> = margin_at(map, &x, ex)?;
            Some((x, balanced_dreg_margin(&jet).to_f64_lossy()))
        })
        .collect();
    let mut margins = Vec::new();
    let mut points = Vec::new();
    for (i, e) in evaluated.into_iter().enumerate() {
        if let Some((x, m)) = e {
            margins.push(MarginSample {
                index: i,
                radius: x.norm(),
                margin: m,
            });
            points.push(x);
        }
    }
    if margins.is_empty() {
        return Err(Error::input(
            "sampler.samples",
            "every d-regularity sample was excluded (zero set or discriminant zone)",
        ));
    }
    let mut order: Vec<usize> = (0..margins.len()).collect();
    order.sort_by(|&a, &b| {
        margins[a]
            .margin
            .total_cmp(&margins[b].margin)
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = order.iter().map(|&k| margins[k].margin).collect();
    let quantile = |q: f64| sorted[((sorted.len() - 1) as f64 * q).floor() as usize];

    let restarts = sampler.restarts.min(order.len());
    let descended: Vec<(DVector<f64>, f64)> = order[..restarts]
        .par_iter()
        .map(|&k| {
            let objective = |y: &DVector<f64>| match margin_at::<T>(map, y, ex) {
                Some(jet) => balanced_dreg_margin(&jet).to_f64_lossy(),
                None => f64::INFINITY,
            };
            let cfg = DescentCfg {
                iterations: sampler.iterations,
                ..opts.descent
            };
            let r = sphere_descent(&points[k], objective, &cfg);
            (r.x, r.value)
        })
        .collect();

    let mut adversarial_min = sorted[0];
    let mut adversarial_argmin = points[order[0]].as_slice().to_vec();
    let mut witnesses = Vec::new();
    let fail = opts.thresholds.fail;
    for &k in &order {
        if margins[k].margin >= fail {
            break;
        }
        if let Some(jet) = margin_at::<T>(map, &points[k], ex) {
            witnesses.push(witness(&jet));
        }
    }
    for (x, value) in &descended {
        if *value < adversarial_min {
            adversarial_min = *value;
            adversarial_argmin = x.as_slice().to_vec();
        }
        if *value < fail {
            if let Some(jet) = margin_at::<T>(map, x, ex) {
                witnesses.push(witness(&jet));
            }
        }
    }
    let verdict = if !witnesses.is_empty() {
        Verdict::Fail
    } else if adversarial_min > opts.thresholds.pass {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    Ok(RegularityReport {
        map: map_name(map),
        epsilon,
        samples: sampler.samples,
        evaluated: margins.len(),
        excluded: sampler.samples - margins.len(),
        sample_min: sorted[0],
        sample_p1: quantile(0.01),
        sample_median: quantile(0.5),
        sample_argmin: points[order[0]].as_slice().to_vec(),
        restarts,
        adversarial_min,
        adversarial_argmin,
        thresholds: opts.thresholds,
        verdict,
        witnesses,
        margins,
    })
}

/// `‖Π_{ker Dfₓ}(x)‖ / ‖x‖`: positive iff the fibre through `x` meets the
/// sphere of radius `ε` transversely at `x`.
pub fn fiber_sphere_transversality<T: Real>(jet: &Jet<T>, epsilon: T) -> Result<T> {
    if jet.n() <= jet.p() {
        return Err(Error::Precondition(
            "fibre transversality needs n > p".into(),
        ));
    }
    if (jet.x_norm - epsilon).abs() > T::c(1e-9) * (T::one() + epsilon) {
        return Err(Error::input(
            "x",
            format!(
                "point is not on the sphere of radius {}: |x| = {}",
                epsilon.to_f64_lossy(),
                jet.x_norm.to_f64_lossy()
            ),
        ));
    }
    let jx = &jet.jac * &jet.x;
    let sol = min_norm_solve(&jet.jac, &jx, T::c(1e-8));
    if sol.rank < jet.p() {
        return Err(Error::CriticalPoint {
            sigma_min: linalg::sigma(&linalg::singular_values(&jet.jac), jet.p()).to_f64_lossy(),
            sigma_max: sol.sigma_max.to_f64_lossy(),
        });
    }
    Ok((&jet.x - sol.x).norm() / jet.x_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub map: String,
    pub epsilon: f64,
    pub delta: f64,
    pub attempted: usize,
    pub evaluated: usize,
    pub min_margin: f64,
    pub median_margin: f64,
    pub argmin: Vec<f64>,
}

/// Samples points of `𝕊_ε ∩ {‖f‖ ≤ δ}` off the exclusion zone and reports the
/// fibre/sphere transversality margin.
///
/// Points are obtained from uniform sphere points by alternating a
/// minimal-norm Newton step towards `‖f‖ = δ/2` with radial projection back
/// onto the sphere.
pub fn transversality_scan<T: Real>(
    map: &PolynomialMap<T>,
    epsilon: f64,
    delta: f64,
    sampler: &SamplerCfg,
    exclusion: &Exclusion,
) -> Result<TransversalityReport> {
    if map.n() <= map.p() {
        return Err(Error::Precondition(
            "fibre transversality needs n > p".into(),
        ));
    }
    if !(epsilon > 0.0 && delta > 0.0) {
        return Err(Error::input(
            "epsilon",
            "epsilon and delta must be positive",
        ));
    }
    let n = map.n();
    let eps = T::c(epsilon);
    let found: Vec<Option<(Vec<f64>, f64)>> = (0..sampler.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream_rng(sampler.seed, streams::TRANSVERSALITY, i as u64);
            let mut x: DVector<T> = linalg::from_f64_slice(
                (sampling::unit_direction(&mut rng, n) * epsilon).as_slice(),
            );
            for _ in 0..30 {
                let fx = map.eval(&x).ok()?;
                let fnorm = fx.norm();
                if fnorm <= T::c(delta) {
                    break;
                }
                let target = &fx * (T::c(0.5 * delta) / fnorm);
                let step = min_norm_solve(&map.jacobian(&x).ok()?, &(target - &fx), T::c(1e-8)).x;
                let y = &x + step;
                x = &y * (eps / y.norm());
            }
            let jet = map.jet(&x, None).ok()?;
            if jet.f_norm > T::c(delta) || exclusion.excludes(&jet.fx).is_some() {
                return None;
            }
            let m = fiber_sphere_transversality(&jet, eps).ok()?;
            Some((linalg::vec_f64(&x), m.to_f64_lossy()))
        })
        .collect();
    let found: Vec<(Vec<f64>, f64)> = found.into_iter().flatten().collect();
    if found.is_empty() {
        return Err(Error::EmptySample(
            "no sphere point reached the tube".into(),
        ));
    }
    let mut values: Vec<f64> = found.iter().map(|(_, m)| *m).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let (argmin, min_margin) = found
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("non-empty");
    Ok(TransversalityReport {
        map: map_name(map),
        epsilon,
        delta,
        attempted: sampler.samples,
        evaluated: found.len(),
        min_margin,
        median_margin: values[(values.len() - 1) / 2],
        argmin,
    })
}
