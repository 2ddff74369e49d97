//! Run pipelines: build a patch from a configuration, certify it, and run
//! the cyclic battery on its conformal image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::charts::{instantiate_catalog, weingarten_fit, Rect, WeingartenFit};
use crate::config::{config_hash, RunConfig, WeingartenSpec};
use crate::conformal::{pipeline_conformality, KillingField, MapPipeline, MappedHypersurface};
use crate::construction::{
    assemble_hypersurface, derive_bars, eval_r, find_admissible_intervals, select_interval,
    HypersurfacePatch, Profile, ProofConstants, WeingartenCoefficients,
};
use crate::curvature::{
    alpha_beta, cartan_conditions, curvature_bundle, guichard_pde_residuals, proof_diagnostics,
    tilde_metric, MetricJet, LITERAL_SCHOUTEN, STANDARD_SCHOUTEN,
};
use crate::cyclic::{
    equivalence_battery, killing_alignment, principal_frame, s_line_length, BatteryPlan,
    CircleFit, Distinguished, SphereFit, TraceSpec,
};
use crate::error::{Error, Result};
use crate::hypersurface::{g_angle, local_geometry, Box3, Hypersurface};
use crate::jet::dot;
use crate::report::{Bound, ReportBuilder, ResidualReport};
use crate::spaceform::Epsilon;

/// Samples per axis for a Weingarten fit in `"fit"` mode.
const FIT_SAMPLES: usize = 8;
/// Largest fit residual accepted as a linear Weingarten relation.
const FIT_ACCEPT: f64 = 1e-6;
/// Fraction of the interval trimmed at each end for the default window.
const WINDOW_MARGIN: f64 = 0.1;
/// Fraction of each parameter range trimmed for the cyclic samples.
const INTERIOR: f64 = 0.05;
/// Traces stop short of the far end of the `s`-range by this factor.
const TRACE_REACH: f64 = 0.98;
const FRAME_ORTHONORMALITY: f64 = 1e-9;
const FRAME_EIGEN: f64 = 1e-8;

/// A constructed patch together with the choices that produced it.
#[derive(Clone, Debug)]
pub struct Build {
    pub eps: Epsilon,
    pub pqr: [f64; 3],
    pub coeffs: WeingartenCoefficients,
    pub fit: Option<WeingartenFit>,
    pub intervals: Vec<(f64, f64)>,
    pub interval: (f64, f64),
    /// Base point of the profile integral.
    pub s0: f64,
    pub window: (f64, f64),
    pub patch: HypersurfacePatch,
    pub grid: [usize; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct BuildSummary {
    pub eps: i8,
    pub pqr: [f64; 3],
    pub coeffs: WeingartenCoefficients,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<WeingartenFit>,
    pub intervals: Vec<(f64, f64)>,
    pub interval: (f64, f64),
    pub s0: f64,
    pub window: (f64, f64),
    pub domain: Rect,
    pub perturbation: f64,
    pub grid: [usize; 3],
    pub config_hash: String,
}

impl Build {
    pub fn summary(&self, config_text: &str) -> BuildSummary {
        BuildSummary {
            eps: self.eps.sign(),
            pqr: self.pqr,
            coeffs: self.coeffs,
            fit: self.fit.clone(),
            intervals: self.intervals.clone(),
            interval: self.interval,
            s0: self.s0,
            window: self.window,
            domain: self.patch.chart.domain(),
            perturbation: self.patch.profile.perturbation,
            grid: self.grid,
            config_hash: config_hash(config_text),
        }
    }

    /// Sample points of the certification grid, row-major over `(i1, i2, is)`.
    pub fn grid_points(&self) -> Vec<[f64; 3]> {
        self.patch.box3().grid(self.grid)
    }

    pub fn mapped(&self, cfg: &RunConfig) -> Result<MappedHypersurface<HypersurfacePatch>> {
        let pipe = MapPipeline::new(self.eps, &cfg.maps)?;
        MappedHypersurface::new(self.patch.clone(), pipe)
    }
}

pub fn build(cfg: &RunConfig) -> Result<Build> {
    cfg.validate()?;
    let eps = cfg.eps;
    let chart = instantiate_catalog(&cfg.chart, eps)?;
    let (pqr, fit) = match &cfg.weingarten {
        WeingartenSpec::Explicit { p, q, r } => ([*p, *q, *r], None),
        WeingartenSpec::Mode(_) => {
            let fit = weingarten_fit(&chart, &chart.domain().grid(FIT_SAMPLES, FIT_SAMPLES))?;
            if fit.residual > FIT_ACCEPT {
                return Err(Error::InvalidParams(format!(
                    "chart is not linear Weingarten: fit residual {:e} exceeds {FIT_ACCEPT:e}",
                    fit.residual
                )));
            }
            (fit.pqr, Some(fit))
        }
    };
    let coeffs = derive_bars(pqr[0], pqr[1], pqr[2], eps);
    let [lo, hi] = cfg.scan;
    let intervals = find_admissible_intervals(&coeffs, eps, lo, hi, cfg.scan_points)?;
    if intervals.is_empty() {
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=cfg.scan_points {
            let r = eval_r(&coeffs, eps, lo + (hi - lo) * i as f64 / cfg.scan_points as f64);
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        return Err(Error::EmptyInterval(format!(
            "0 < r < 1 fails on [{lo}, {hi}]: r ranges over [{rmin:.6}, {rmax:.6}]"
        )));
    }
    let interval = select_interval(&intervals, cfg.s0, cfg.interval_index)?;
    // the integral needs a base point inside the interval
    let s0 = if interval.0 < cfg.s0 && cfg.s0 < interval.1 { cfg.s0 } else { 0.5 * (interval.0 + interval.1) };
    let window = match cfg.s_window {
        Some([a, b]) => (a, b),
        None => {
            let m = WINDOW_MARGIN * (interval.1 - interval.0);
            (interval.0 + m, interval.1 - m)
        }
    };
    let profile = Profile::new(coeffs, eps, s0, interval)?.with_perturbation(cfg.perturbation);
    let patch = assemble_hypersurface(chart, profile, window)?;
    Ok(Build { eps, pqr, coeffs, fit, intervals, interval, s0, window, patch, grid: cfg.grid.dims() })
}

/// Pointwise values of the certification suite.
#[derive(Clone, Debug, Default)]
struct PointChecks {
    values: Vec<(&'static str, f64, f64)>,
}

impl PointChecks {
    fn push(&mut self, name: &'static str, raw: f64, scaled: f64) {
        self.values.push((name, raw, scaled));
    }
}

/// `max |λ| + 1` with `λ` the principal curvatures.
fn kappa(lambda: &[f64]) -> f64 {
    lambda.iter().fold(0.0f64, |m, l| m.max(l.abs())) + 1.0
}

fn smallest_gap(sorted_desc: &[f64; 3]) -> f64 {
    (sorted_desc[0] - sorted_desc[1]).min(sorted_desc[1] - sorted_desc[2])
}

fn certify_point(
    build: &Build,
    mapped: &MappedHypersurface<HypersurfacePatch>,
    constants: ProofConstants,
    p: [f64; 3],
) -> Result<PointChecks> {
    let patch = &build.patch;
    let eps = build.eps;
    let mut out = PointChecks::default();

    let metric = MetricJet::from_hypersurface(patch, p)?;
    let bundle = curvature_bundle(&metric)?;
    let scale = bundle.curvature_scale();
    out.push("cotton", bundle.cotton_norm, bundle.cotton_norm / scale);
    let cod = bundle.codazzi_residual(STANDARD_SCHOUTEN);
    out.push("codazzi_schouten", cod, cod / scale);
    let lit = bundle.codazzi_residual(LITERAL_SCHOUTEN);
    out.push("codazzi_unnormalized", lit, lit / scale);

    let (al, be) = alpha_beta(&metric);
    let gr = guichard_pde_residuals(&al, &be)?;
    let tscale = curvature_bundle(&tilde_metric(p, al, be)?)?.curvature_scale();
    for (name, v) in [
        ("lemma_f23", gr.f23),
        ("lemma_h13", gr.h13),
        ("lemma_conf4", gr.conf4),
        ("lemma_conf5", gr.conf5),
        ("lemma_conf6", gr.conf6),
    ] {
        out.push(name, v, v.abs() / tscale);
    }

    let geo = local_geometry(patch, p, 2)?;
    let pr = geo.principal()?;
    let g = geo.metric();
    let lam = [pr[0].lambda, pr[1].lambda, pr[2].lambda];
    let k = kappa(&lam);
    let n = eps.product_dim();
    let mut dt = vec![0.0; n];
    dt[n - 1] = 1.0;
    let dt_tan = geo.tangential_coords(&dt)?;
    let angle = pr.iter().map(|q| g_angle(&g, &dt_tan, &q.dir)).fold(f64::INFINITY, f64::min);
    out.push("principal_angle_dt", angle, angle);
    let gap = smallest_gap(&lam);
    out.push("principal_gap", gap, gap / k);
    let mut closed = patch.closed_form_principal(p)?;
    closed.sort_by(|a, b| b.total_cmp(a));
    let dual = lam.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push("dual_route", dual, dual / k);

    let lor = geo.lorentzian;
    let nv = &geo.normal;
    let unit = (dot(lor, nv, nv) - 1.0).abs();
    out.push("normal_unit", unit, unit);
    let orth = geo
        .tangents
        .iter()
        .map(|t| dot(lor, nv, t).abs() / dot(lor, t, t).abs().sqrt())
        .fold(0.0, f64::max);
    out.push("normal_orthogonal", orth, orth);
    let reg = geo.regularity();
    out.push("regularity", reg, reg);

    let d = proof_diagnostics(patch, p, Some(constants))?;
    let pscale = 1.0 + d.varphi.abs() + d.rho_metric.abs() + d.rho_closed.abs();
    for (name, v) in [
        ("theta", d.theta),
        ("varphi_1", d.varphi_1),
        ("varphi_2", d.varphi_2),
        ("system_first", d.system_first),
        ("system_second", d.system_second),
        ("varphi_constants", d.varphi_constants.unwrap_or(f64::NAN)),
        ("rho_closed_form", d.rho_metric - d.rho_closed),
    ] {
        out.push(name, v, v.abs() / pscale);
    }
    let r_direct = eval_r(&build.coeffs, eps, p[2]);
    let r_constants = constants.r_at(eps, p[2]);
    let rt = r_direct - r_constants;
    out.push("constants_roundtrip", rt, rt.abs() / (1.0 + r_direct.abs()));

    match cartan_conditions(mapped, p, 0.0) {
        Ok(c) => {
            let k = kappa(&c.lambda);
            out.push("cartan_uno", c.uno, c.uno / k);
            out.push("cartan_dos", c.dos, c.dos / k.powi(3));
            out.push("cartan_tres", c.tres, c.tres / k);
        }
        Err(Error::MapDomain(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Declared checks of the certification suite: name, tolerance, bound,
/// diagnostic flag.
fn verify_checks(cfg: &RunConfig) -> Vec<(&'static str, f64, Bound, bool)> {
    let t = &cfg.tolerances;
    let up = Bound::Upper;
    vec![
        ("cotton", t.cotton, up, false),
        ("codazzi_schouten", t.codazzi, up, false),
        ("codazzi_unnormalized", t.codazzi, up, true),
        ("lemma_f23", t.lemma, up, false),
        ("lemma_h13", t.lemma, up, false),
        ("lemma_conf4", t.lemma, up, false),
        ("lemma_conf5", t.lemma, up, false),
        ("lemma_conf6", t.lemma, up, false),
        ("principal_angle_dt", t.principal_angle, up, false),
        ("principal_gap", t.min_gap, Bound::Lower, false),
        ("dual_route", t.dual_route, up, false),
        ("normal_unit", t.normal, up, false),
        ("normal_orthogonal", t.normal, up, false),
        ("regularity", t.regularity, Bound::Lower, false),
        ("theta", t.theta, up, false),
        ("varphi_1", t.varphi, up, false),
        ("varphi_2", t.varphi, up, false),
        ("system_first", t.system, up, false),
        ("system_second", t.system, up, false),
        ("varphi_constants", t.system, up, false),
        ("rho_closed_form", t.system, up, false),
        ("constants_roundtrip", t.roundtrip, up, false),
        ("cartan_uno", t.cartan, up, false),
        ("cartan_dos", t.cartan, up, false),
        ("cartan_tres", t.cartan, up, false),
    ]
}

/// Runs the certification suite on the build grid. Points where the map
/// pipeline is undefined skip the image-side checks only.
pub fn verify(build: &Build, cfg: &RunConfig, config_text: &str) -> Result<ResidualReport> {
    let mapped = build.mapped(cfg)?;
    let constants = ProofConstants::from_pqr(build.pqr, build.eps);
    let points = build.grid_points();
    let results: Vec<Result<PointChecks>> =
        points.par_iter().map(|&p| certify_point(build, &mapped, constants, p)).collect();
    let mut rb = ReportBuilder::new("verify");
    for (name, tol, bound, diag) in verify_checks(cfg) {
        rb.check(name, tol, bound, diag);
    }
    let mut failed = 0usize;
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(pc) => {
                for (name, raw, scaled) in pc.values {
                    rb.record(p, name, raw, scaled);
                }
            }
            // a point that cannot be evaluated counts against every check
            Err(e) => {
                failed += 1;
                rb.note(format!("point {p:?}: {e}"));
                for (name, ..) in verify_checks(cfg) {
                    rb.record(p, name, f64::NAN, f64::NAN);
                }
            }
        }
    }
    if failed > 0 {
        rb.note(format!("{failed} grid points could not be evaluated"));
    }
    rb.note("codazzi_unnormalized uses the literal 3/2 coefficient and is diagnostic only");
    Ok(rb.finish(config_text, &cfg.tolerances))
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveFitEntry {
    pub start: [f64; 3],
    pub n: usize,
    /// `null` for a straight line.
    pub radius: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub rms: f64,
    pub max: f64,
    pub scaled: f64,
    pub degenerate: bool,
    pub pencil_residual: f64,
    pub verdict: crate::report::Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceFitEntry {
    pub s: f64,
    pub n: usize,
    /// `null` for a hyperplane.
    pub radius: Option<f64>,
    pub center: Vec<f64>,
    pub rms: f64,
    pub max: f64,
    pub scaled: f64,
    pub degenerate: bool,
    pub verdict: crate::report::Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub curves: Vec<CurveFitEntry>,
    pub slices: Vec<SliceFitEntry>,
    pub config_hash: String,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn lerp(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.5 * (a + b)
    } else {
        a + (b - a) * i as f64 / (n - 1) as f64
    }
}

/// Sample sets of the cyclic suite, all inside the trimmed parameter box.
#[derive(Clone, Debug)]
pub struct CyclicSamples {
    pub interior: Box3,
    pub points: Vec<[f64; 3]>,
    pub starts: Vec<[f64; 2]>,
    pub slice_s: Vec<f64>,
}

pub fn cyclic_samples(build: &Build, cfg: &RunConfig) -> CyclicSamples {
    let interior = build.patch.box3().shrink(INTERIOR);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points = (0..cfg.cyclic.points)
        .map(|_| [0, 1, 2].map(|k| rng.random_range(interior.lo[k]..=interior.hi[k])))
        .collect();
    let n = cfg.cyclic.traces;
    let nx = (n as f64).sqrt().ceil().max(1.0) as usize;
    let ny = n.div_ceil(nx).max(1);
    let starts = (0..n)
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            [lerp(interior.lo[0], interior.hi[0], i, nx), lerp(interior.lo[1], interior.hi[1], j, ny)]
        })
        .collect();
    let slice_s =
        (0..cfg.cyclic.slices).map(|k| lerp(interior.lo[2], interior.hi[2], k, cfg.cyclic.slices)).collect();
    CyclicSamples { interior, points, starts, slice_s }
}

/// Images of an `s = const` leaf on an `n1 × n2` grid of the trimmed box.
pub fn leaf_points(hs: &dyn Hypersurface, interior: &Box3, s: f64, n1: usize, n2: usize) -> Result<Vec<Vec<f64>>> {
    let mut pts = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let x1 = lerp(interior.lo[0], interior.hi[0], i, n1);
            let x2 = lerp(interior.lo[1], interior.hi[1], j, n2);
            pts.push(hs.position([x1, x2, s])?);
        }
    }
    Ok(pts)
}

fn is_map_domain(e: &Error) -> bool {
    matches!(e, Error::MapDomain(_))
}

/// The cyclic suite on `F = M ∘ f`: the equivalence battery, the literal
/// ambient circle fits of the `e₁`-lines, frame quality, Killing-field
/// alignment and conformality of the pipeline.
pub fn map_cyclic(build: &Build, cfg: &RunConfig, config_text: &str) -> Result<(ResidualReport, FitReport)> {
    let mapped = build.mapped(cfg)?;
    let t = &cfg.tolerances;
    let samples = cyclic_samples(build, cfg);
    let rule = Distinguished::AlongS;
    let mut rb = ReportBuilder::new("map-cyclic");
    let up = Bound::Upper;
    rb.check("item_i", t.item, up, false)
        .check("item_ii", t.item, up, false)
        .check("item_iii", t.item, up, false)
        .check("item_iv_pencil", t.fit, up, false)
        .check("item_v_mu", t.item, up, false)
        .check("leaf_sphere_fit", t.fit, up, false)
        .check("circle_fit_e1", t.fit, up, false)
        .check("battery_agreement", 0.5, up, false)
        .check("frame_orthonormality", FRAME_ORTHONORMALITY, up, false)
        .check("frame_eigen", FRAME_EIGEN, up, false)
        .check("frame_gap", t.frame_gap, Bound::Lower, false)
        .check("killing_alignment", t.killing, up, false)
        .check("map_conformality", t.conformality, up, false);

    // samples where the pipeline is singular are dropped and counted
    let mut excluded = 0usize;
    let usable = |p: [f64; 3]| match mapped.position(p) {
        Err(e) if is_map_domain(&e) => Ok(false),
        Err(e) => Err(e),
        Ok(_) => Ok(true),
    };
    let mut points = Vec::new();
    for &p in &samples.points {
        if usable(p)? {
            points.push(p);
        } else {
            excluded += 1;
        }
    }
    let s_lo = samples.interior.lo[2];
    let s_hi = samples.interior.hi[2];
    let mut traces = Vec::new();
    for &[x1, x2] in &samples.starts {
        match s_line_length(&mapped, x1, x2, s_lo, s_hi) {
            Ok(len) if len.is_finite() => traces.push(TraceSpec {
                start: [x1, x2, s_lo],
                arclength: TRACE_REACH * len,
                n_steps: cfg.cyclic.steps,
            }),
            Ok(_) => excluded += 1,
            Err(e) if is_map_domain(&e) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    let [n1, n2, _] = build.grid;
    let mut leaves = Vec::new();
    let mut leaf_s = Vec::new();
    for &s in &samples.slice_s {
        match leaf_points(&mapped, &samples.interior, s, n1, n2) {
            Ok(l) => {
                leaves.push(l);
                leaf_s.push(s);
            }
            Err(e) if is_map_domain(&e) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    rb.exclude(excluded);
    if excluded > 0 {
        rb.note(format!("{excluded} samples hit the singular set of the map pipeline and were excluded"));
    }

    let plan = BatteryPlan {
        rule,
        min_gap: t.frame_gap,
        points: points.clone(),
        traces,
        leaves,
        item_tol: t.item,
        fit_tol: t.fit,
    };
    let battery = equivalence_battery(&mapped, &plan)?;
    for po in &battery.points {
        let q = &po.quantities;
        rb.record(&po.point, "item_i", po.item_i * q.scale.powi(2), po.item_i);
        rb.record(&po.point, "item_ii", q.e1_rho[0].abs().max(q.e1_rho[1].abs()), po.item_ii);
        rb.record(&po.point, "item_iii", q.item3[0].abs().max(q.item3[1].abs()), po.item_iii);
        rb.record(&po.point, "item_v_mu", q.ej_mu[0].abs().max(q.ej_mu[1].abs()), po.item_v);
    }
    let mut curves = Vec::new();
    for c in &battery.curves {
        rb.record(&c.start, "item_iv_pencil", c.pencil.residual, c.pencil.residual);
        let scaled = c.circle.scaled_residual();
        rb.record(&c.start, "circle_fit_e1", c.circle.max_residual, scaled);
        curves.push(curve_entry(c.start, c.n, &c.circle, c.pencil.residual, t.fit));
    }
    let mut slices = Vec::new();
    for ((fit, &s), pts) in battery.leaves.iter().zip(&leaf_s).zip(&plan.leaves) {
        let centre = samples.interior.center();
        rb.record(&[centre[0], centre[1], s], "leaf_sphere_fit", fit.max_residual, fit.scaled_residual());
        slices.push(slice_entry(s, pts.len(), fit, t.fit));
    }
    let centre = samples.interior.center();
    rb.record(&centre, "battery_agreement", if battery.agree { 0.0 } else { 1.0 }, if battery.agree { 0.0 } else { 1.0 });
    for it in &battery.items {
        rb.note(format!(
            "battery item {}: max scaled {:.3e} against {:.1e} ({})",
            it.item,
            it.max_scaled,
            it.tolerance,
            if it.pass { "pass" } else { "fail" }
        ));
    }

    let field = cfg.cyclic.killing.unwrap_or_else(|| KillingField::designated(build.eps));
    let per_point: Vec<Result<Vec<(&'static str, f64, f64)>>> = points
        .par_iter()
        .map(|&p| {
            let mut v = Vec::new();
            let fr = principal_frame(&mapped, p, rule, 0.0)?;
            v.push(("frame_orthonormality", fr.orthonormality, fr.orthonormality));
            v.push(("frame_eigen", fr.eigen_residual * fr.scale, fr.eigen_residual));
            v.push(("frame_gap", fr.min_gap * fr.scale, fr.min_gap));
            match killing_alignment(&mapped, field, p) {
                Ok(a) => v.push(("killing_alignment", a.angle, a.angle)),
                Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
            let x = build.patch.position(p)?;
            let c = pipeline_conformality(&mapped.pipeline, &x)?;
            v.push(("map_conformality", c.residual, c.residual));
            Ok(v)
        })
        .collect();
    let mut vanishing = 0usize;
    for (p, r) in points.iter().zip(per_point) {
        let v = r?;
        if !v.iter().any(|(n, ..)| *n == "killing_alignment") {
            vanishing += 1;
        }
        for (name, raw, scaled) in v {
            rb.record(p, name, raw, scaled);
        }
    }
    if vanishing > 0 {
        rb.note(format!("killing field {field:?} is tangentially vanishing at {vanishing} samples"));
    }
    rb.note(format!("killing field {field:?}"));
    rb.note(
        "circle_fit_e1 fits round circles of R^4 to the e1-lines; item_i is the intrinsic extrinsic-circle test",
    );
    let fits = FitReport { curves, slices, config_hash: config_hash(config_text) };
    Ok((rb.finish(config_text, t), fits))
}

fn curve_entry(start: [f64; 3], n: usize, c: &CircleFit, pencil: f64, tol: f64) -> CurveFitEntry {
    let scaled = c.scaled_residual();
    CurveFitEntry {
        start,
        n,
        radius: finite(c.radius),
        center: (!c.degenerate).then(|| c.center.clone()),
        rms: c.rms_residual,
        max: c.max_residual,
        scaled,
        degenerate: c.degenerate,
        pencil_residual: pencil,
        verdict: crate::report::Verdict::from_bool(scaled <= tol),
    }
}

fn slice_entry(s: f64, n: usize, f: &SphereFit, tol: f64) -> SliceFitEntry {
    let scaled = f.scaled_residual();
    SliceFitEntry {
        s,
        n,
        radius: finite(f.radius),
        center: f.center.clone(),
        rms: f.rms_residual,
        max: f.max_residual,
        scaled,
        degenerate: f.degenerate,
        verdict: crate::report::Verdict::from_bool(scaled <= tol),
    }
}
