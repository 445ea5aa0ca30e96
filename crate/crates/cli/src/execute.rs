//! Validation and execution of scenario tasks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use oscgeo::conditions::{
    bourgain_geodesic, bourgain_residual, chaotic_check, contact_order, phase_to_metric_feasibility, wolff_report,
    BourgainOptions, ChaoticOptions, ContactOptions, FeasibilityOptions, PhaseField, WolffOptions,
};
use oscgeo::geodesics::{default_steps, geodesic_bvp, geodesic_ivp, ShootingOptions};
use oscgeo::jacobi::{expansion_remainder, w_taylor, JacobiOptions, JacobiSystem};
use oscgeo::linalg::Mat;
use oscgeo::osclab::{
    decay_fit, tube_rasterize, union_volume, Amplitude, DecayMode, DecayOptions, Density, TubeSource, TubeSpec, XGrid,
};
use oscgeo::riemann::curvature;
use oscgeo::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::objects::Object;
use crate::report::{Findings, Report, Table, REPORT_SCHEMA_VERSION};
use crate::scenario::*;

/// Library tolerances, used only by single-task subcommands when a flag is omitted.
pub fn default_tolerances(kind: &TaskKind) -> BTreeMap<String, f64> {
    let pairs: &[(&str, f64)] = match kind {
        TaskKind::CheckBourgain(_) => {
            &[("tau_hold", oscgeo::conditions::TAU_HOLD), ("tau_fail", oscgeo::conditions::TAU_FAIL)]
        }
        TaskKind::ContactOrder(_) => &[("rank_tol", 1e-6)],
        TaskKind::CheckChaotic(_) => &[("tau_c", 1e-6)],
        TaskKind::Wolff(_) => &[("lower", 0.3)],
        TaskKind::PhaseMetric(_) => &[("tol", 1e-6)],
        _ => &[],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Checks everything that can be checked before running: version, references,
/// tolerance sets, expectations and id uniqueness.
pub fn validate(s: &Scenario) -> std::result::Result<(), String> {
    if s.version != SCENARIO_VERSION {
        return Err(format!("unsupported scenario version {} (expected {SCENARIO_VERSION})", s.version));
    }
    if s.output.formats.is_empty() {
        return Err("output.formats must list at least one of json, csv".into());
    }
    let mut ids = BTreeSet::new();
    for t in &s.tasks {
        if t.id.is_empty() || t.id.contains(['/', '\\']) || t.id.starts_with('.') {
            return Err(format!("task id `{}` is not a plain file name", t.id));
        }
        if !ids.insert(&t.id) {
            return Err(format!("duplicate task id `{}`", t.id));
        }
        if !s.objects.contains_key(&t.object) {
            return Err(format!("task `{}` references undeclared object `{}`", t.id, t.object));
        }
        check_tolerances(t)?;
    }
    Ok(())
}

pub fn check_tolerances(t: &Task) -> std::result::Result<(), String> {
    let keys = t.task.tolerance_keys();
    for (k, v) in &t.tolerances {
        if !keys.contains(&k.as_str()) {
            return Err(format!("task `{}`: unknown tolerance `{k}` for {}", t.id, t.task.name()));
        }
        if !(v.is_finite() && *v > 0.0) {
            return Err(format!("task `{}`: tolerance `{k}` must be positive", t.id));
        }
    }
    for k in keys {
        if !t.tolerances.contains_key(*k) {
            return Err(format!("task `{}`: {} requires tolerance `{k}`", t.id, t.task.name()));
        }
    }
    if keys.is_empty() && t.expect.is_some() {
        return Err(format!("task `{}`: {} has no verdict to expect", t.id, t.task.name()));
    }
    Ok(())
}

/// Runs one task and assembles its report and tables.
pub fn run_task(t: &Task, obj: &Object, seed: u64) -> Result<(Report, Vec<Table>)> {
    let start = Instant::now();
    let mut f = execute(&t.task, &t.tolerances, obj, seed)?;
    let tables = std::mem::take(&mut f.tables);
    let inputs = json!({
        "params": serde_json::to_value(&t.task).expect("task serializes")["params"].clone(),
        "tolerances": t.tolerances,
        "seed": seed,
    });
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        id: t.id.clone(),
        task: t.task.name().into(),
        object: t.object.clone(),
        object_label: obj.label().into(),
        inputs,
        residuals: f.residuals,
        thresholds: f.thresholds,
        rule: f.rule,
        verdict: f.verdict,
        expected: t.expect,
        diagnostics: f.diagnostics,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    Ok((report, tables))
}

fn tol(t: &BTreeMap<String, f64>, k: &str) -> Result<f64> {
    t.get(k).copied().ok_or_else(|| Error::Invalid(format!("missing tolerance `{k}`")))
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn phase_or_distance(obj: &Object, eps: Option<f64>, task: &str) -> Result<PhaseField> {
    match (obj, eps) {
        (Object::Phase(p), None) => Ok(p.clone()),
        (Object::Metric(m), Some(e)) => PhaseField::distance(m.clone(), e),
        (Object::Phase(_), Some(_)) => Err(Error::Invalid(format!("{task}: epsilon applies to metric objects only"))),
        (Object::Metric(_), None) => Err(Error::Invalid(format!("{task}: metric objects need epsilon"))),
    }
}

fn execute(kind: &TaskKind, tols: &BTreeMap<String, f64>, obj: &Object, seed: u64) -> Result<Findings> {
    match kind {
        TaskKind::Curvature(p) => curvature_task(obj.metric("curvature")?, &p.point),
        TaskKind::Geodesic(p) => geodesic_task(obj.metric("geodesic")?, p),
        TaskKind::JacobiTaylor(p) => jacobi_task(obj.metric("jacobi_taylor")?, p),
        TaskKind::CheckBourgain(p) => {
            let opts = BourgainOptions {
                tau_hold: tol(tols, "tau_hold")?,
                tau_fail: tol(tols, "tau_fail")?,
                cross_check: false,
            };
            let r = match (obj, p.epsilon) {
                (Object::Metric(m), Some(eps)) => bourgain_geodesic(m, &p.point, &p.y0, eps, &opts)?,
                _ => bourgain_residual(&phase_or_distance(obj, p.epsilon, "check_bourgain")?, &p.point, &p.y0, &opts)?,
            };
            Ok(r.into())
        }
        TaskKind::ContactOrder(p) => {
            let phi = phase_or_distance(obj, p.epsilon, "contact_order")?;
            let opts = ContactOptions { kmax: p.kmax, rank_tol: tol(tols, "rank_tol")? };
            Ok(contact_order(&phi, &p.point, &p.y0, &opts)?.into())
        }
        TaskKind::CheckChaotic(p) => {
            let opts = ChaoticOptions { directions: p.directions, tau_c: tol(tols, "tau_c")?, ..Default::default() };
            Ok(chaotic_check(obj.metric("check_chaotic")?, &p.point, &opts)?.into())
        }
        TaskKind::Wolff(p) => {
            let opts = WolffOptions { half: p.half, lower: tol(tols, "lower")?, ..Default::default() };
            Ok(wolff_report(obj.phase("wolff")?, &p.v, &p.xi, &opts)?.into())
        }
        TaskKind::PhaseMetric(p) => {
            let opts = FeasibilityOptions { grid: p.grid, tol: tol(tols, "tol")?, ..Default::default() };
            Ok(phase_to_metric_feasibility(obj.phase("phase_metric")?, &p.point, &opts)?.into())
        }
        TaskKind::OscDecay(p) => decay_task(obj.phase("osc_decay")?, p),
        TaskKind::Tubes(p) => tubes_task(obj, p, seed),
    }
}

fn curvature_task(m: &oscgeo::MetricField, p: &[f64]) -> Result<Findings> {
    let c = curvature(m, p)?;
    let n = c.dim();
    let ginv = c.metric.clone().try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
    let scalar =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| ginv[(i, j)] * c.ricci[(i, j)]).sum::<f64>();
    let (mut bianchi, mut pair) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    bianchi = bianchi.max((c.r(a, b, cc, d) + c.r(a, cc, d, b) + c.r(a, d, b, cc)).abs());
                    pair = pair.max((c.r(a, b, cc, d) - c.r(cc, d, a, b)).abs());
                }
            }
        }
    }
    let scale = c.scale().max(1.0);
    let mut planes = Table::new("sectional", &["i", "j", "sectional"]);
    let mut sectional = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
            u[i] = 1.0;
            v[j] = 1.0;
            let k = c.sectional(&u, &v)?;
            planes.push(vec![i as f64, j as f64, k]);
            sectional.push(k);
        }
    }
    let gamma: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| c.christoffel.get(k, i, j)).collect())
        .collect();
    Ok(Findings::default()
        .residual("first_bianchi", bianchi / scale)
        .residual("pair_symmetry", pair / scale)
        .diag("metric", rows(&c.metric))
        .diag("christoffel", gamma)
        .diag("riemann", &c.riemann)
        .diag("ricci", rows(&c.ricci))
        .diag("scalar", scalar)
        .diag("coordinate_sectional", sectional)
        .table(planes))
}

fn geodesic_task(m: &oscgeo::MetricField, p: &GeodesicParams) -> Result<Findings> {
    let n = m.dim();
    let (sol, f) = match (&p.target, &p.direction) {
        (Some(q), None) => {
            let opts = ShootingOptions { steps: p.steps, ..Default::default() };
            let c = geodesic_bvp(m, &p.point, q, &opts)?;
            let end = &c.geodesic.end().pos;
            let miss = end.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let f = Findings::default()
                .residual("endpoint_error", miss)
                .diag("velocity", &c.velocity)
                .diag("distance", c.distance)
                .diag("iterations", c.iterations);
            (c.geodesic, f)
        }
        (None, Some(v)) => {
            let length = p.length.ok_or_else(|| Error::Invalid("geodesic: direction needs length".into()))?;
            let sol = geodesic_ivp(m, &p.point, v, length, p.steps.unwrap_or_else(|| default_steps(length)))?;
            let f = Findings::default().diag("endpoint", &sol.end().pos);
            (sol, f)
        }
        _ => return Err(Error::Invalid("geodesic: give exactly one of target or direction".into())),
    };
    let mut header = vec!["s".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("v{i}")));
    let mut table = Table { name: "path".into(), header, rows: Vec::new() };
    let mut drift = 0.0f64;
    for s in &sol.samples {
        let g = m.eval(&s.pos)?;
        let speed2 =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| g[(i, j)] * s.vel[i] * s.vel[j]).sum::<f64>();
        drift = drift.max((speed2 - 1.0).abs());
        table.push([vec![s.s], s.pos.clone(), s.vel.clone()].concat());
    }
    Ok(f.residual("speed_drift", drift).diag("length", sol.length()).diag("steps", sol.steps()).table(table))
}

fn jacobi_task(m: &oscgeo::MetricField, p: &JacobiParams) -> Result<Findings> {
    let sys = JacobiSystem::along(m, &p.point, &p.direction, None, p.epsilon, &JacobiOptions::default())?;
    let wt = w_taylor(&sys);
    let k = sys.codim();
    let wronskian = sys.states.iter().map(|s| (s.wronskian() - Mat::identity(k, k)).amax()).fold(0.0, f64::max);
    let mut table = Table::new("taylor", &["order", "i", "j", "value"]);
    for (order, c) in sys.taylor().iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                table.push(vec![(order + 1) as f64, i as f64, j as f64, c[(i, j)]]);
            }
        }
    }
    let mut f = Findings::default()
        .residual("wronskian", wronskian)
        .residual("expansion_remainder", expansion_remainder(&sys))
        .diag("taylor", wt.derivatives.iter().map(rows).collect::<Vec<_>>())
        .diag("series", sys.series.iter().map(rows).collect::<Vec<_>>())
        .diag("end_hessian", rows(&sys.end_hessian()?))
        .diag("curvature_at_start", rows(&sys.curvature_taylor[0]))
        .table(table);
    if let Some(d) = wt.det {
        f = f.diag("det_coefficients_s2_s3_s4", d);
    }
    Ok(f)
}

fn decay_task(phi: &PhaseField, p: &DecayParams) -> Result<Findings> {
    let n = phi.dim();
    let opts =
        DecayOptions { point: p.point.clone(), grid: p.grid.map(|g| XGrid::cube(n, 0.5, g)), ..Default::default() };
    let fit = decay_fit(phi, &Amplitude::for_decay(n), &Density::one(), p.mode, &p.ns, &opts)?;
    let mut table = Table::new("decay", &["N", "norm"]);
    for (a, b) in fit.ns.iter().zip(&fit.norms) {
        table.push(vec![*a, *b]);
    }
    let mut f = Findings::default()
        .residual("slope", fit.fit.slope)
        .residual("r2", fit.fit.r2)
        .diag("intercept", fit.fit.intercept)
        .diag("norms", &fit.norms)
        .diag(
            "mode",
            match p.mode {
                DecayMode::Pointwise => "pointwise".to_string(),
                DecayMode::Lp { p } => format!("lp:{p}"),
            },
        )
        .table(table);
    if let Some(d) = fit.hessian_det {
        f = f.diag("hessian_det", d);
    }
    Ok(f)
}

fn uniform(rng: &mut ChaCha8Rng, k: usize, half: f64) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(-half..half)).collect()
}

/// Random placements from the scenario seed: phase tubes get `y` and `ω` in
/// `[−¼, ¼]ⁿ⁻¹`; geodesic tubes get anchors in `[−¼, ¼]ⁿ` and directions
/// uniform on the upper half sphere.
pub fn tube_specs(obj: &Object, count: usize, seed: u64) -> Vec<TubeSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| match obj {
            Object::Phase(p) => {
                let k = p.dim() - 1;
                TubeSpec { key: uniform(&mut rng, k, 0.25), omega: uniform(&mut rng, k, 0.25) }
            }
            Object::Metric(m) => {
                let n = m.dim();
                let dir = loop {
                    let mut v = uniform(&mut rng, n, 1.0);
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if r > 1e-3 && r <= 1.0 {
                        if v[n - 1] < 0.0 {
                            v.iter_mut().for_each(|x| *x = -*x);
                        }
                        break v.into_iter().map(|x| x / r).collect();
                    }
                };
                TubeSpec { key: dir, omega: uniform(&mut rng, n, 0.25) }
            }
        })
        .collect()
}

fn tubes_task(obj: &Object, p: &TubeParams, seed: u64) -> Result<Findings> {
    if p.count == 0 || p.deltas.is_empty() {
        return Err(Error::Invalid("tubes: need at least one tube and one δ".into()));
    }
    let specs = tube_specs(obj, p.count, seed);
    let mut table = Table::new("sweep", &["delta", "volume", "mean_tube_volume", "clipped"]);
    let (mut volumes, mut clipped_counts) = (Vec::new(), Vec::new());
    for &delta in &p.deltas {
        let source = match obj {
            Object::Phase(phi) => TubeSource::Phase(phi),
            Object::Metric(m) => TubeSource::Metric(m),
        };
        let tf = tube_rasterize(source, &specs, delta, p.lambda)?;
        let vol = union_volume(&tf);
        let mean = (0..tf.tubes.len()).map(|i| tf.tube_volume(i)).sum::<f64>() / tf.tubes.len() as f64;
        let clipped = tf.tubes.iter().filter(|t| t.clipped).count();
        table.push(vec![delta, vol, mean, clipped as f64]);
        volumes.push(vol);
        clipped_counts.push(clipped as f64);
    }
    Ok(Findings::default()
        .diag("deltas", &p.deltas)
        .diag("union_volumes", volumes)
        .diag("clipped_tubes", clipped_counts)
        .diag("tubes", p.count)
        .table(table))
}
