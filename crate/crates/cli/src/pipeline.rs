//! Stages of the command pipelines. Each stage contributes a verdict line to
//! the human summary and a report to `summary.json`.

use anyhow::{Context, Result};
use fiblab_core::discriminant::{
    default_radii, delta_rows, linearity_check, sample_discriminant, DeltaRow, DiscriminantReport,
    Exclusion, LinearityVerdict,
};
use fiblab_core::flow::{inflate_tube, FlowTrace, InflateOpts};
use fiblab_core::lifting::lift_pair;
use fiblab_core::milnorfield::{field_scan, milnor_vector, nod_scan, Annulus};
use fiblab_core::regularity::{dreg_scan, transversality_scan, DregOpts};
use fiblab_core::{SamplerCfg, Vector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, Resolved};

/// One verdict of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: &'static str,
    pub verdict: String,
    pub detail: String,
    /// The property the verdict is evidence for.
    pub property: &'static str,
    /// Counted by `--strict`.
    pub gating: bool,
}

impl Stage {
    pub fn failed(&self) -> bool {
        self.gating && matches!(self.verdict.as_str(), "fail" | "inconclusive" | "refused")
    }
}

/// Everything a command produces.
#[derive(Default)]
pub struct Run {
    pub stages: Vec<Stage>,
    pub reports: serde_json::Map<String, Value>,
    /// Lines of `samples.jsonl`.
    pub samples: Vec<Value>,
    pub traces: Vec<(usize, FlowTrace)>,
    pub delta_rows: Vec<DeltaRow>,
    /// Extra lines of the human summary, printed before the verdicts.
    pub notes: Vec<String>,
}

impl Run {
    fn report<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.reports
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

fn pass_fail(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

fn annulus(r: &Resolved) -> Annulus {
    Annulus::new(r.epsilon / 100.0, r.epsilon)
}

/// Critical-point search, linearity check and the resulting exclusion zone.
pub fn discriminant(r: &Resolved, run: &mut Run) -> Result<Exclusion> {
    let section = &r.config.discriminant;
    let sampler = SamplerCfg {
        samples: section.seeds,
        ..r.config.sampler
    };
    let report = sample_discriminant(&r.map, &section.ball, &sampler, &section.search)?;
    let radii = match r.eta {
        Some(eta) => [0.125, 0.25, 0.5, 1.0].iter().map(|k| k * eta).collect(),
        None => default_radii(&report),
    };
    let report: DiscriminantReport = linearity_check(&report, &radii)?;
    let lin = report.linearity.as_ref().expect("linearity checked");
    let linear = lin.verdict == LinearityVerdict::Linear;
    let rays = lin
        .directions
        .iter()
        .map(|d| fmt_vec(d))
        .collect::<Vec<_>>()
        .join(" ");
    run.stages.push(Stage {
        name: "discriminant",
        verdict: if linear { "linear" } else { "non-linear" }.to_string(),
        detail: format!(
            "{} critical samples, {} ray(s){}{}",
            report.critical.len(),
            lin.directions.len(),
            if rays.is_empty() {
                String::new()
            } else {
                format!(" {rays}")
            },
            lin.eta
                .map(|e| format!(", η = {}", fmt_num(e)))
                .unwrap_or_default()
        ),
        property: "linear discriminant",
        gating: false,
    });
    run.delta_rows = delta_rows(&report);
    let exclusion = report.exclusion(section.exclusion_angle, section.f_floor);
    run.report("discriminant", &report)?;
    run.report("exclusion", &exclusion)?;
    Ok(exclusion)
}

pub fn nod(r: &Resolved, run: &mut Run) -> Result<()> {
    let report = nod_scan(&r.map, &annulus(r), &r.config.sampler, &r.config.tolerances)?;
    run.stages.push(Stage {
        name: "nod",
        verdict: pass_fail(report.violations.is_empty()),
        detail: format!(
            "{} opposite-gradient point(s) in {} samples, min cos∠(∇h,∇ℌ) = {:.3e}",
            report.violations.len(),
            report.accepted,
            report.min_cos
        ),
        property: "∇h and ∇ℌ never point in opposite directions",
        gating: true,
    });
    run.report("nod", &report)
}

pub fn field(r: &Resolved, run: &mut Run, exclusion: &Exclusion, keep_samples: bool) -> Result<()> {
    let (report, records) = field_scan(
        &r.map,
        &annulus(r),
        &r.config.sampler,
        exclusion,
        &r.config.tolerances,
    )?;
    let skipped: usize = report.skipped.values().sum();
    run.stages.push(Stage {
        name: "milnor-field",
        verdict: pass_fail(report.all_valid()),
        detail: format!(
            "{}/{} samples valid ({skipped} skipped), min cos to ∇h {:.3e}, to ∇ℌ {:.3e}, tangency {:.1e}·scale",
            report.valid, report.evaluated, report.min_cos_tube, report.min_cos_sphere, report.max_tangency_over_scale
        ),
        property: "w̃ points out of tube and sphere and is tangent to the pencil",
        gating: true,
    });
    run.stages.push(Stage {
        name: "keyprop",
        verdict: pass_fail(report.keyprop_violations.is_empty()),
        detail: format!(
            "{} violation(s) among {} samples with μ defined, sign identity rel. err {:.1e}",
            report.keyprop_violations.len(),
            report.mu_defined,
            report.max_sign_identity_rel_err
        ),
        property: "μ > 0 on M(f)",
        gating: true,
    });
    if keep_samples {
        run.samples = records
            .iter()
            .map(serde_json::to_value)
            .collect::<Result<_, _>>()?;
    }
    run.report("milnor_field", &report)
}

pub fn dreg(r: &Resolved, run: &mut Run, exclusion: &Exclusion, keep_samples: bool) -> Result<()> {
    let opts = DregOpts {
        thresholds: r.config.regularity.thresholds,
        exclusion: exclusion.clone(),
        descent: r.config.regularity.descent,
    };
    let report = dreg_scan(&r.map, r.epsilon, &r.config.sampler, &opts)?;
    let witness = report
        .worst_witness()
        .map(|w| format!("; witness margin {:.3e} at {}", w.margin, fmt_vec(&w.x)))
        .unwrap_or_default();
    run.stages.push(Stage {
        name: "d-regularity",
        verdict: report.verdict.to_string(),
        detail: format!(
            "adversarial min margin {:.3e} (pass > {}, fail < {}), {} excluded{witness}",
            report.adversarial_min,
            fmt_num(report.thresholds.pass),
            fmt_num(report.thresholds.fail),
            report.excluded
        ),
        property: "d-regularity",
        gating: true,
    });
    if keep_samples {
        run.samples = report
            .margins
            .iter()
            .map(serde_json::to_value)
            .collect::<Result<_, _>>()?;
    }
    run.report("regularity", &report)
}

pub fn transversality(r: &Resolved, run: &mut Run, exclusion: &Exclusion) -> Result<()> {
    if r.map.n() <= r.map.p() {
        return Ok(());
    }
    let report = match transversality_scan(&r.map, r.epsilon, r.delta, &r.config.sampler, exclusion)
    {
        Ok(rep) => rep,
        Err(fiblab_core::Error::EmptySample(m)) => {
            run.notes
                .push(format!("fibre/sphere transversality not sampled: {m}"));
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    run.stages.push(Stage {
        name: "transversality",
        verdict: "reported".to_string(),
        detail: format!(
            "{} points of the sphere inside the tube, min margin {:.3e}, median {:.3e}",
            report.evaluated, report.min_margin, report.median_margin
        ),
        property: "fibres meet the sphere transversely",
        gating: false,
    });
    run.report("transversality", &report)
}

pub fn flow(r: &Resolved, run: &mut Run, exclusion: &Exclusion, keep_samples: bool) -> Result<()> {
    let f = &r.config.flow;
    let opts = InflateOpts {
        flow: f.integrator,
        exclusion: exclusion.clone(),
        dreg: DregOpts {
            thresholds: r.config.regularity.thresholds,
            exclusion: exclusion.clone(),
            descent: r.config.regularity.descent,
        },
        dreg_sampler: r.config.sampler,
        drift_tolerance: f.drift_tolerance,
        round_trip_tolerance: f.round_trip_tolerance,
        refine: f.refine,
    };
    let report = inflate_tube(
        &r.map,
        r.epsilon,
        r.delta,
        &f.seeds,
        &opts,
        &r.config.tolerances,
    )?;
    let detail = match &report.refusal_witness {
        Some(w) => format!(
            "refused: d-regularity {} with witness margin {:.3e} at {}",
            report.regularity_verdict,
            w.margin,
            fmt_vec(&w.x)
        ),
        None if report.traces.is_empty() && report.failures.is_empty() => {
            format!("refused: d-regularity {}", report.regularity_verdict)
        }
        None => format!(
            "{} traces, {} failed, max Φ drift {:.2e} (< {}), max round trip {:.2e} (< {}·ε){}",
            report.traces.len(),
            report.failures.len(),
            report.max_phi_drift,
            fmt_num(report.drift_tolerance),
            report.max_round_trip_error,
            fmt_num(report.round_trip_tolerance),
            report
                .refine
                .as_ref()
                .map(|c| format!(", 10× tighter tolerances: drift {:.2e}", c.max_drift_tight))
                .unwrap_or_default()
        ),
    };
    run.stages.push(Stage {
        name: "equivalence",
        verdict: report.verdict.to_string(),
        detail,
        property: "Φ-constancy along the flow; tube and sphere fibrations equivalent",
        gating: true,
    });
    if keep_samples {
        run.samples = report
            .full_traces
            .iter()
            .zip(&report.traces)
            .flat_map(|(t, s)| {
                t.steps
                    .iter()
                    .map(move |step| json!({"seed_index": s.seed_index, "step": step}))
            })
            .collect();
    }
    run.traces = report
        .traces
        .iter()
        .map(|s| s.seed_index)
        .zip(report.full_traces.iter().cloned())
        .collect();
    run.report("equivalence", &report)
}

/// Parses `v1,…,vn` for a map with `n` inputs.
pub fn parse_point(text: &str, n: usize) -> Result<Vector, ConfigError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values =
        values.map_err(|e| ConfigError::new("--point", format!("cannot parse '{text}': {e}")))?;
    if values.len() != n {
        return Err(ConfigError::new(
            "--point",
            format!("expected {n} coordinates, got {} in '{text}'", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(
            "--point",
            format!("coordinates must be finite: '{text}'"),
        ));
    }
    Ok(Vector::from_vec(values))
}

pub fn lift(r: &Resolved, run: &mut Run, x: &Vector) -> Result<()> {
    let tols = &r.config.tolerances;
    let jet = r
        .map
        .jet(x, None)
        .with_context(|| format!("at point {}", fmt_vec(x.as_slice())))?;
    let pair =
        lift_pair(&jet, tols).with_context(|| format!("at point {}", fmt_vec(x.as_slice())))?;
    let sample =
        milnor_vector(&jet, tols).with_context(|| format!("at point {}", fmt_vec(x.as_slice())))?;
    run.notes
        .push(format!("point x = {}", fmt_vec(x.as_slice())));
    run.notes.push(format!(
        "w_f={}  α={}  w_F={}  β={}",
        fmt_vec(pair.w_f.as_slice()),
        fmt_num(pair.alpha),
        fmt_vec(pair.w_sph.as_slice()),
        fmt_num(pair.beta)
    ));
    run.notes.push(format!(
        "w̃={}  case {}  μ={}",
        fmt_vec(sample.w_tilde.as_slice()),
        pair.case.label,
        pair.mu.map(fmt_num).unwrap_or_else(|| "undefined".into())
    ));
    run.stages.push(Stage {
        name: "milnor-field",
        verdict: pass_fail(sample.valid),
        detail: format!(
            "⟨w̃,∇h⟩ = {}, ⟨w̃,∇ℌ⟩ = {}, tangency residual {:.1e}",
            fmt_num(sample.ip_tube),
            fmt_num(sample.ip_sphere),
            sample.tangency_residual
        ),
        property: "w̃ points out of tube and sphere and is tangent to the pencil",
        gating: true,
    });
    let record = sample.record();
    run.samples = vec![serde_json::to_value(&record)?];
    run.report("lift", &record)?;
    run.report("jet", &jet.to_json())
}

/// Shortest decimal that round-trips at 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || v.abs() < 1e-300 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if rounded.abs() >= 1e-4 && rounded.abs() < 1e7 {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn fmt_vec(v: &[f64]) -> String {
    format!(
        "({})",
        v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_print_short() {
        assert_eq!(fmt_num(0.25000000000000006), "0.25");
        assert_eq!(fmt_num(4.0), "4");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1e-9), "1e-9");
        assert_eq!(fmt_vec(&[1.0, 0.0]), "(1,0)");
    }

    #[test]
    fn point_parsing() {
        assert_eq!(
            parse_point("1, 0", 2).unwrap(),
            Vector::from_vec(vec![1.0, 0.0])
        );
        assert_eq!(parse_point("1,0,0", 2).unwrap_err().field, "--point");
        assert!(parse_point("1,x", 2).is_err());
    }
}
