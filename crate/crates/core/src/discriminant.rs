//! Critical set `Σ`, discriminant `Δ = f(Σ)`, ray clustering of `Δ` across
//! radius shells, and the angular exclusion zone around the discriminant
//! directions `𝒜` used by the other scans.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::polymap::PolynomialMap;
use crate::sampling::{self, streams, SamplerCfg};
use crate::scalar::Real;

/// Points whose image is too small or points too close (in angle) to a
/// discriminant direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exclusion {
    /// Unit directions `𝒜` in the target space.
    pub directions: Vec<Vec<f64>>,
    /// Angular radius in radians.
    pub angle: f64,
    /// Minimum accepted `‖f(x)‖`.
    pub f_floor: f64,
}

impl Default for Exclusion {
    fn default() -> Self {
        Exclusion {
            directions: Vec::new(),
            angle: 0.05,
            f_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionReason {
    BelowFloor,
    DiscriminantProximity,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::BelowFloor => "below-f-floor",
            ExclusionReason::DiscriminantProximity => "discriminant-proximity",
        })
    }
}

impl Exclusion {
    pub fn around(directions: Vec<Vec<f64>>, angle: f64, f_floor: f64) -> Self {
        Exclusion {
            directions,
            angle,
            f_floor,
        }
    }

    /// Smallest angle between `f(x)` and a direction of `𝒜`; `None` when `𝒜`
    /// is empty or `f(x) = 0`.
    pub fn min_angle<T: Real>(&self, fx: &DVector<T>) -> Option<f64> {
        let norm = fx.norm().to_f64_lossy();
        if norm == 0.0 {
            return None;
        }
        self.directions
            .iter()
            .map(|d| {
                let dot: f64 = d
                    .iter()
                    .zip(fx.iter())
                    .map(|(a, b)| a * b.to_f64_lossy())
                    .sum();
                let dn = d.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dot / (norm * dn)).clamp(-1.0, 1.0).acos()
            })
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn excludes<T: Real>(&self, fx: &DVector<T>) -> Option<ExclusionReason> {
        if fx.norm().to_f64_lossy() <= self.f_floor {
            return Some(ExclusionReason::BelowFloor);
        }
        match self.min_angle(fx) {
            Some(a) if a <= self.angle => Some(ExclusionReason::DiscriminantProximity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalMargin<T> {
    /// `σ_p(Dfₓ) / σ₁(Dfₓ)`, in `[0, 1]`.
    pub margin: T,
    /// `Dfₓ = 0`; the margin is reported as 0.
    pub totally_degenerate: bool,
}

pub fn critical_margin<T: Real>(jac: &DMatrix<T>) -> CriticalMargin<T> {
    let s = linalg::singular_values(jac);
    let smax = linalg::sigma(&s, 1);
    if smax == T::zero() {
        return CriticalMargin {
            margin: T::zero(),
            totally_degenerate: true,
        };
    }
    CriticalMargin {
        margin: linalg::sigma(&s, jac.nrows()) / smax,
        totally_degenerate: false,
    }
}

/// Search region: the ball of radius `radius`, minus the inner ball of radius
/// `inner_fraction · radius` where every germ is singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ball {
    pub radius: f64,
    pub inner_fraction: f64,
}

impl Default for Ball {
    fn default() -> Self {
        Ball {
            radius: 0.5,
            inner_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminantCfg {
    /// Points with `critical_margin` below this are kept as critical.
    pub critical_tol: f64,
    pub newton_iterations: usize,
    /// Images closer than this angle and relative radius are merged.
    pub dedupe_angle: f64,
    pub dedupe_radius: f64,
    /// Greedy ray-clustering threshold in radians.
    pub cluster_angle: f64,
}

impl Default for DiscriminantCfg {
    fn default() -> Self {
        DiscriminantCfg {
            critical_tol: 1e-9,
            newton_iterations: 100,
            dedupe_angle: 1e-7,
            dedupe_radius: 1e-7,
            cluster_angle: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSample {
    /// Seed index the sample was found from.
    pub index: usize,
    pub x: Vec<f64>,
    pub margin: f64,
    pub image: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayCluster {
    pub direction: Vec<f64>,
    pub count: usize,
    /// Largest angle between a member and `direction`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shell {
    pub inner: f64,
    pub outer: f64,
    pub samples: usize,
    pub clusters: Vec<RayCluster>,
    /// Samples within the threshold of zero or several clusters.
    pub unclustered: usize,
    /// Cluster set matches the reference shells.
    pub agrees: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearityVerdict {
    Linear,
    NonLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Linearity {
    pub radii: Vec<f64>,
    pub shells: Vec<Shell>,
    pub verdict: LinearityVerdict,
    /// Largest tested radius up to which all shells agree.
    pub eta: Option<f64>,
    /// Agreed ray directions `𝒜`.
    pub directions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminantReport {
    pub map: String,
    pub ball: Ball,
    pub seeds: usize,
    pub critical: Vec<CriticalSample>,
    /// Critical samples whose image is numerically zero.
    pub zero_images: usize,
    /// Deduplicated nonzero images (a subset of the critical images).
    pub images: Vec<Vec<f64>>,
    pub cluster_angle: f64,
    pub linearity: Option<Linearity>,
}

impl DiscriminantReport {
    /// Exclusion zone around the agreed directions, or none when linearity
    /// has not been checked.
    pub fn exclusion(&self, angle: f64, f_floor: f64) -> Exclusion {
        let directions = self
            .linearity
            .as_ref()
            .map(|l| l.directions.clone())
            .unwrap_or_default();
        Exclusion::around(directions, angle, f_floor)
    }
}

fn smallest_left_vector(jac: &DMatrix<f64>) -> Option<DVector<f64>> {
    let svd = jac.clone().svd(true, false);
    let u = svd.u?;
    let s = &svd.singular_values;
    let imin = (0..s.len()).min_by(|&a, &b| s[a].total_cmp(&s[b]))?;
    Some(u.column(imin).into_owned())
}

/// Gauss–Newton on `F(x, u) = (Dfₓᵀ u, (‖u‖² − 1)/2) = 0`, whose solutions
/// are critical points `x` with a left null vector `u`. Steps are minimal-norm
/// and backtracked on `‖F‖`; the normalized critical margin is returned.
fn descend_to_critical<T: Real>(
    map: &PolynomialMap<T>,
    x0: DVector<f64>,
    cfg: &DiscriminantCfg,
) -> (DVector<f64>, f64) {
    let n = x0.len();
    let to_t = |x: &DVector<f64>| -> DVector<T> { linalg::from_f64_slice(x.as_slice()) };
    let jac_at = |x: &DVector<f64>| {
        map.jacobian(&to_t(x))
            .expect("dimension checked")
            .map(|v| v.to_f64_lossy())
    };
    let margin_at = |x: &DVector<f64>| critical_margin(&jac_at(x)).margin;
    let residual = |x: &DVector<f64>, u: &DVector<f64>| {
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&(jac_at(x).transpose() * u));
        r[n] = 0.5 * (u.norm_squared() - 1.0);
        r
    };
    let mut x = x0;
    let Some(mut u) = smallest_left_vector(&jac_at(&x)) else {
        return (x.clone(), margin_at(&x));
    };
    let p = u.len();
    let mut r = residual(&x, &u);
    let stop = 1e-6 * cfg.critical_tol;
    for _ in 0..cfg.newton_iterations {
        if margin_at(&x) < stop {
            break;
        }
        let jac = jac_at(&x);
        let xt = to_t(&x);
        let mut dfm = DMatrix::zeros(n + 1, n + p);
        for k in 0..n {
            let dj = map
                .jacobian_derivative(&xt, k)
                .expect("dimension checked")
                .map(|v| v.to_f64_lossy());
            dfm.view_mut((0, k), (n, 1))
                .copy_from(&(dj.transpose() * &u));
        }
        dfm.view_mut((0, n), (n, p)).copy_from(&jac.transpose());
        dfm.view_mut((n, n), (1, p)).copy_from(&u.transpose());
        let step = linalg::min_norm_solve(&dfm, &(-&r), 1e-12).x;
        let rn = r.norm();
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-8 {
            let xc = &x + step.rows(0, n) * t;
            let uc = &u + step.rows(n, p) * t;
            let rc = residual(&xc, &uc);
            if rc.norm() < rn {
                x = xc;
                u = uc;
                r = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let m = margin_at(&x);
    (x, m)
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Multi-start search for critical points in the ball and their images.
///
/// An empty `critical` list is a valid outcome (isolated critical value).
pub fn sample_discriminant<T: Real>(
    map: &PolynomialMap<T>,
    ball: &Ball,
    sampler: &SamplerCfg,
    cfg: &DiscriminantCfg,
) -> Result<DiscriminantReport> {
    if !(ball.radius > 0.0) {
        return Err(Error::input(
            "ball.radius",
            "search radius must be positive",
        ));
    }
    let n = map.n();
    let found: Vec<Option<CriticalSample>> = (0..sampler.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream_rng(sampler.seed, streams::DISCRIMINANT, i as u64);
            let x0 = sampling::ball_point(&mut rng, n, ball.radius);
            let (x, margin) = descend_to_critical(map, x0, cfg);
            let r = x.norm();
            if !(margin < cfg.critical_tol)
                || r > ball.radius
                || r < ball.inner_fraction * ball.radius
            {
                return None;
            }
            let xt: DVector<T> = linalg::from_f64_slice(x.as_slice());
            let image = linalg::vec_f64(&map.eval(&xt).ok()?);
            Some(CriticalSample {
                index: i,
                x: x.as_slice().to_vec(),
                margin,
                image,
            })
        })
        .collect();
    let critical: Vec<CriticalSample> = found.into_iter().flatten().collect();

    let mut zero_images = 0;
    let mut images: Vec<Vec<f64>> = Vec::new();
    for c in &critical {
        let r = norm(&c.image);
        if r <= 1e-12 {
            zero_images += 1;
            continue;
        }
        let duplicate = images.iter().any(|k| {
            let rk = norm(k);
            (r - rk).abs() <= cfg.dedupe_radius * r.max(rk)
                && angle_between(k, &c.image) <= cfg.dedupe_angle
        });
        if !duplicate {
            images.push(c.image.clone());
        }
    }
    Ok(DiscriminantReport {
        map: crate::milnorfield::map_name(map),
        ball: *ball,
        seeds: sampler.samples,
        critical,
        zero_images,
        images,
        cluster_angle: cfg.cluster_angle,
        linearity: None,
    })
}

/// Greedy clustering in input order: a direction joins the first cluster whose
/// seed direction lies within `threshold`, else it seeds a new cluster.
fn cluster_directions(dirs: &[Vec<f64>], threshold: f64) -> (Vec<RayCluster>, usize) {
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        match seeds.iter().position(|s| angle_between(s, d) <= threshold) {
            Some(k) => members[k].push(i),
            None => {
                seeds.push(d.clone());
                members.push(vec![i]);
            }
        }
    }
    let clusters: Vec<RayCluster> = members
        .iter()
        .map(|m| {
            let p = dirs[m[0]].len();
            let mut mean = vec![0.0; p];
            for &i in m {
                for (a, b) in mean.iter_mut().zip(&dirs[i]) {
                    *a += b;
                }
            }
            let nm = norm(&mean);
            let direction: Vec<f64> = mean.iter().map(|a| a / nm).collect();
            let spread = m
                .iter()
                .map(|&i| angle_between(&direction, &dirs[i]))
                .fold(0.0, f64::max);
            RayCluster {
                direction,
                count: m.len(),
                spread,
            }
        })
        .collect();
    let unclustered = dirs
        .iter()
        .filter(|d| {
            clusters
                .iter()
                .filter(|c| angle_between(&c.direction, d) <= threshold)
                .count()
                != 1
        })
        .count();
    (clusters, unclustered)
}

fn same_rays(a: &[RayCluster], b: &[RayCluster], threshold: f64) -> bool {
    let covered = |x: &[RayCluster], y: &[RayCluster]| {
        x.iter().all(|c| {
            y.iter()
                .any(|d| angle_between(&c.direction, &d.direction) <= threshold)
        })
    };
    covered(a, b) && covered(b, a)
}

/// Clusters the image directions per shell `[r/2, r]` for each tested radius
/// `r` and compares cluster sets across shells.
///
/// Empty shells agree with everything. The verdict is linear iff every
/// non-empty shell agrees with the innermost non-empty shell and has no
/// unclustered samples.
pub fn linearity_check(report: &DiscriminantReport, radii: &[f64]) -> Result<DiscriminantReport> {
    if radii.len() < 2 {
        return Err(Error::input(
            "radii",
            "linearity check needs at least 2 shells",
        ));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::input("radii", "shell radii must be positive"));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.total_cmp(b));
    radii.dedup();
    let threshold = report.cluster_angle;
    let mut shells = Vec::with_capacity(radii.len());
    let mut reference: Option<Vec<RayCluster>> = None;
    let mut eta = None;
    let mut all_agree = true;
    for &r in &radii {
        let dirs: Vec<Vec<f64>> = report
            .images
            .iter()
            .filter(|u| {
                let nu = norm(u);
                nu >= 0.5 * r && nu <= r
            })
            .map(|u| {
                let nu = norm(u);
                u.iter().map(|a| a / nu).collect()
            })
            .collect();
        let (clusters, unclustered) = cluster_directions(&dirs, threshold);
        let agrees = if dirs.is_empty() {
            true
        } else {
            let ok = unclustered == 0
                && reference
                    .as_ref()
                    .is_none_or(|rc| same_rays(rc, &clusters, threshold));
            if reference.is_none() {
                reference = Some(clusters.clone());
            }
            ok
        };
        all_agree &= agrees;
        if all_agree {
            eta = Some(r);
        }
        shells.push(Shell {
            inner: 0.5 * r,
            outer: r,
            samples: dirs.len(),
            clusters,
            unclustered,
            agrees,
        });
    }
    let directions = reference
        .map(|rc| rc.into_iter().map(|c| c.direction).collect())
        .unwrap_or_default();
    let mut out = report.clone();
    out.linearity = Some(Linearity {
        radii,
        shells,
        verdict: if all_agree {
            LinearityVerdict::Linear
        } else {
            LinearityVerdict::NonLinear
        },
        eta,
        directions,
    });
    Ok(out)
}

/// Default shell radii `r_max · {1/8, 1/4, 1/2, 1}` with `r_max` the largest
/// image norm (or the ball radius when `Δ` is empty).
pub fn default_radii(report: &DiscriminantReport) -> Vec<f64> {
    let rmax = report.images.iter().map(|u| norm(u)).fold(0.0, f64::max);
    let rmax = if rmax > 0.0 { rmax } else { report.ball.radius };
    [0.125, 0.25, 0.5, 1.0].iter().map(|k| k * rmax).collect()
}

/// One image sample for plotting: radius, unit direction and its shell and
/// cluster indices when it falls in a tested shell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub radius: f64,
    pub direction: Vec<f64>,
    pub shell: Option<usize>,
    pub cluster: Option<usize>,
}

pub fn delta_rows(report: &DiscriminantReport) -> Vec<DeltaRow> {
    report
        .images
        .iter()
        .map(|u| {
            let r = norm(u);
            let direction: Vec<f64> = u.iter().map(|a| a / r).collect();
            let mut shell = None;
            let mut cluster = None;
            if let Some(lin) = &report.linearity {
                if let Some(k) = lin.shells.iter().position(|s| r >= s.inner && r <= s.outer) {
                    shell = Some(k);
                    cluster = lin.shells[k].clusters.iter().position(|c| {
                        angle_between(&c.direction, &direction) <= report.cluster_angle
                    });
                }
            }
            DeltaRow {
                radius: r,
                direction,
                shell,
                cluster,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn small_sampler(samples: usize) -> SamplerCfg {
        SamplerCfg {
            samples,
            ..SamplerCfg::default()
        }
    }

    #[test]
    fn critical_margin_examples() {
        let f = catalog::nondreg_4_3::<f64>();
        let m = critical_margin(&f.jacobian(&v(&[0.0, 0.0, 1.0, 1.0])).unwrap());
        assert_eq!(m.margin, 0.0);
        let m = critical_margin(&f.jacobian(&v(&[1.0, 0.0, 0.0, 0.0])).unwrap());
        assert_relative_eq!(m.margin, 0.5, epsilon = 1e-14);
        let id = catalog::identity_2::<f64>();
        let m = critical_margin(&id.jacobian(&v(&[0.3, 0.7])).unwrap());
        assert_relative_eq!(m.margin, 1.0, epsilon = 1e-14);
        let m = critical_margin(&DMatrix::<f64>::zeros(2, 3));
        assert!(m.totally_degenerate && m.margin == 0.0);
    }

    #[test]
    fn nondreg_sigma_is_the_xy_zero_plane() {
        let f = catalog::nondreg_4_3::<f64>();
        let r = sample_discriminant(
            &f,
            &Ball::default(),
            &small_sampler(200),
            &DiscriminantCfg::default(),
        )
        .unwrap();
        assert!(!r.critical.is_empty());
        for c in &r.critical {
            assert!(c.x[0].abs() < 1e-4 && c.x[1].abs() < 1e-4, "{:?}", c.x);
        }
        for u in r.images.iter().filter(|u| norm(u) > 1e-2) {
            assert!(
                u[0].abs() < 1e-3 * norm(u) && u[1].abs() < 1e-3 * norm(u),
                "{u:?}"
            );
        }
    }

    #[test]
    fn points_on_sigma_have_tiny_margin() {
        let f = catalog::nondreg_4_3::<f64>();
        for (z, w) in [(0.1, 0.2), (-0.3, 0.05), (0.4, -0.1)] {
            let m = critical_margin(&f.jacobian(&v(&[0.0, 0.0, z, w])).unwrap());
            assert!(m.margin < 1e-9);
        }
    }

    #[test]
    fn square_map_has_no_critical_points_off_origin() {
        let f = catalog::square::<f64>();
        let r = sample_discriminant(
            &f,
            &Ball::default(),
            &small_sampler(100),
            &DiscriminantCfg::default(),
        )
        .unwrap();
        assert!(r.critical.is_empty());
        let r = linearity_check(&r, &default_radii(&r)).unwrap();
        let lin = r.linearity.unwrap();
        assert_eq!(lin.verdict, LinearityVerdict::Linear);
        assert!(lin.directions.is_empty());
    }

    #[test]
    fn quadrics_sigma_lies_on_the_axes() {
        let f = catalog::quadrics_3_2::<f64>();
        let r = sample_discriminant(
            &f,
            &Ball::default(),
            &small_sampler(100),
            &DiscriminantCfg::default(),
        )
        .unwrap();
        assert!(!r.critical.is_empty());
        for c in &r.critical {
            let mut a: Vec<f64> = c.x.iter().map(|t| t.abs()).collect();
            a.sort_by(|x, y| x.total_cmp(y));
            assert!(a[1] < 1e-4, "{:?}", c.x);
        }
    }

    fn synthetic(images: Vec<Vec<f64>>) -> DiscriminantReport {
        DiscriminantReport {
            map: "synthetic".into(),
            ball: Ball::default(),
            seeds: images.len(),
            critical: Vec::new(),
            zero_images: 0,
            images,
            cluster_angle: 1e-3,
            linearity: None,
        }
    }

    #[test]
    fn axis_discriminant_gives_two_rays() {
        let images: Vec<Vec<f64>> = (1..=200)
            .map(|k| {
                let w = if k % 2 == 0 { 1.0 } else { -1.0 } * k as f64 / 400.0;
                vec![0.0, 0.0, w]
            })
            .collect();
        let r = linearity_check(&synthetic(images), &[0.0625, 0.125, 0.25, 0.5]).unwrap();
        let lin = r.linearity.unwrap();
        assert_eq!(lin.verdict, LinearityVerdict::Linear);
        assert_eq!(lin.directions.len(), 2);
        assert_eq!(lin.eta, Some(0.5));
        for d in &lin.directions {
            assert_relative_eq!(d[2].abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn parabola_is_not_linear() {
        let images: Vec<Vec<f64>> = (1..=400)
            .map(|k| {
                let t = k as f64 / 400.0;
                vec![t, t * t]
            })
            .collect();
        let r = linearity_check(&synthetic(images), &[0.125, 0.25, 0.5, 1.0]).unwrap();
        assert_eq!(r.linearity.unwrap().verdict, LinearityVerdict::NonLinear);
    }

    #[test]
    fn clustering_is_idempotent() {
        let images: Vec<Vec<f64>> = (1..=50)
            .map(|k| vec![k as f64 * 0.01, 0.0005 * (k % 3) as f64])
            .collect();
        let a = linearity_check(&synthetic(images), &[0.125, 0.25, 0.5]).unwrap();
        let b = linearity_check(&a, &[0.125, 0.25, 0.5]).unwrap();
        assert_eq!(a.linearity, b.linearity);
    }

    #[test]
    fn linearity_needs_two_shells() {
        assert!(matches!(
            linearity_check(&synthetic(vec![]), &[0.5]),
            Err(Error::Input { .. })
        ));
    }

    #[test]
    fn exclusion_zone() {
        let ex = Exclusion::around(vec![vec![0.0, 0.0, 1.0]], 0.05, 1e-3);
        assert_eq!(
            ex.excludes(&v(&[0.0, 0.01, 1.0])),
            Some(ExclusionReason::DiscriminantProximity)
        );
        assert_eq!(ex.excludes(&v(&[0.0, 1.0, 1.0])), None);
        assert_eq!(
            ex.excludes(&v(&[0.0, 0.0, 1e-4])),
            Some(ExclusionReason::BelowFloor)
        );
        assert_eq!(Exclusion::default().excludes(&v(&[1.0, 0.0])), None);
    }
}
