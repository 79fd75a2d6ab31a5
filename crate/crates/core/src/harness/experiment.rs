//! Seeded ensembles and statistic dispatch.
//!
//! Every statistic draws replica `i` from seed `split_seed(master, i)`, so all
//! path-based statistics of one run see the same ensemble. Statistics run one
//! after another; replicas inside a statistic run in parallel.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::*;
use super::report::{Report, Runtime, StatisticOutcome, Verdict};
use crate::ensemble::{run_replicas, split_seed, Ensemble};
use crate::error::{Error, Result};
use crate::hurst::HurstFunction;
use crate::lass::{
    reference_local_times, tangent_scale, verify_lass_localtime, weighted_occupation_functional, xi_bound,
    LassSettings, ScalingPair, WeightedSettings,
};
use crate::localtime::{
    abs_normal_moment, default_dx, fit_moment_constant, local_time_increment, occupation_integral, Level,
    LocalTimeField, MomentEstimate, PiecewiseConstant, XGrid,
};
use crate::path::{SamplePath, TimeGrid};
use crate::regularity::*;
use crate::stats::{energy_test_1d, mean_se, median, quantile};
use crate::synth::{gen_fbm, FbmMethod, SynthSettings, Synthesizer};

/// Seed stream of the reference BM ensemble in Chung comparisons.
const BM_STREAM: u64 = u64::MAX - 1;
const TEST_STREAM: u64 = u64::MAX - 2;

/// Everything a statistic needs besides its own parameters.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hurst: HurstFunction,
    pub grid: TimeGrid,
    pub settings: SynthSettings,
    /// Bin width `kappa·dt^{mean H}`.
    pub dx: f64,
    synth: Synthesizer,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let hurst = cfg.hurst_function()?;
        let grid = cfg.time_grid()?;
        let settings = cfg.synth_settings();
        let synth = Synthesizer::new(&hurst, &grid, cfg.representation, &settings)?;
        let dx = default_dx(&grid, hurst.mean_over(grid.t0, grid.end()), cfg.localtime.kappa);
        Ok(Self {
            cfg: cfg.clone(),
            hurst,
            grid,
            settings,
            dx,
            synth,
        })
    }

    pub fn path(&self, seed: u64) -> Result<SamplePath> {
        self.synth.sample(seed)
    }

    /// Local-time field of `path` with a bin centred on `anchor`.
    pub fn field(&self, path: &SamplePath, anchor: f64) -> Result<LocalTimeField> {
        LocalTimeField::new(path, XGrid::covering(anchor, anchor, self.dx, anchor)?, true)
    }

    /// Maps every replica path through `f` under the configured failure budget.
    pub fn replicas<T, F>(&self, f: F) -> Result<Ensemble<T>>
    where
        T: Send,
        F: Fn(SamplePath, u64) -> Result<T> + Sync,
    {
        run_replicas(
            self.cfg.replicas,
            self.cfg.seed,
            self.cfg.thresholds.replica_failure_budget,
            |_, s| f(self.path(s)?, s),
        )
    }

    fn index(&self, t: f64) -> Result<usize> {
        self.grid
            .index_of(t)
            .ok_or_else(|| Error::Range(format!("time {t} is not a grid time")))
    }
}

/// The replica paths of a configuration.
pub fn mc_ensemble(cfg: &ExperimentConfig) -> Result<Ensemble<SamplePath>> {
    let ctx = Context::new(cfg)?;
    ctx.replicas(|p, _| Ok(p))
}

/// Result of one statistic before it is written out.
pub struct StatOutput {
    pub verdict: Verdict,
    pub replicas: usize,
    pub failures: usize,
    pub summary: serde_json::Value,
    /// `(file name, contents)`.
    pub files: Vec<(String, Vec<u8>)>,
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn curves_csv(curves: &[ModulusCurve], indices: &[usize]) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    for (k, (c, &i)) in curves.iter().zip(indices).enumerate() {
        let mut buf = Vec::new();
        c.write_csv(&mut buf, Some(i))?;
        // keep one header
        let text = if k == 0 {
            &buf[..]
        } else {
            let nl = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |p| p + 1);
            &buf[nl..]
        };
        w.extend_from_slice(text);
    }
    Ok(w)
}

fn envelope_csv(base: &Envelope, pert: &Envelope) -> Result<Vec<u8>> {
    csv_bytes(
        &["delta", "proper", "perturbed"],
        base.deltas
            .iter()
            .zip(&base.values)
            .zip(&pert.values)
            .map(|((d, a), b)| vec![d.to_string(), a.to_string(), b.to_string()]),
    )
}

fn s(x: f64) -> String {
    x.to_string()
}

/// Runs one statistic without writing anything.
pub fn run_statistic(ctx: &Context, stat: &Statistic) -> Result<StatOutput> {
    match stat {
        Statistic::OccupationIdentity(p) => occupation_identity(ctx, p),
        Statistic::VarianceBounds(p) => variance_bounds(ctx, p),
        Statistic::Moments(p) => moments(ctx, p),
        Statistic::HolderPath(p) => holder_path(ctx, p),
        Statistic::HolderLocaltime(p) => holder_localtime(ctx, p),
        Statistic::Chung(p) => path_law(ctx, p, true),
        Statistic::Lil(p) => path_law(ctx, p, false),
        Statistic::LocalModulus(p) => time_modulus(ctx, p, false),
        Statistic::UniformModulus(p) => time_modulus(ctx, p, true),
        Statistic::SpaceModulus(p) => space_modulus(ctx, p),
        Statistic::RangeInequality(p) => range_inequality(ctx, p),
        Statistic::LassLocaltime(p) => lass_localtime(ctx, p),
        Statistic::WeightedOccupation(p) => weighted_occupation(ctx, p),
    }
}

fn occupation_identity(ctx: &Context, p: &OccupationIdentity) -> Result<StatOutput> {
    let ens = ctx.replicas(|path, seed| {
        let f = ctx.field(&path, path.values[0])?;
        let xg = f.x_grid;
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, TEST_STREAM));
        let ks = [(path.grid.n - 1) / 2, path.grid.n - 1];
        let mut worst: f64 = 0.0;
        for _ in 0..p.indicators {
            let a = rng.gen_range(0..xg.m);
            let b = rng.gen_range(a + 1..=xg.m);
            let ind = PiecewiseConstant::indicator(xg.edge(a), xg.edge(b))?;
            for &k in &ks {
                let time = occupation_integral(&path, &ind, path.grid.time(k))?;
                let space = f.integrate(&ind, k);
                let den = time.abs().max(space.abs());
                if den > 0.0 {
                    worst = worst.max((time - space).abs() / den);
                }
            }
        }
        Ok(worst)
    })?;
    let max = ens.items.iter().cloned().fold(0.0, f64::max);
    Ok(StatOutput {
        verdict: Verdict::from_pass(max <= p.rel_tol),
        replicas: ens.len(),
        failures: ens.failures.len(),
        summary: json!({
            "max_rel_error": max,
            "rel_tol": p.rel_tol,
            "indicators_per_replica": p.indicators,
        }),
        files: vec![(
            "errors.csv".into(),
            csv_bytes(
                &["replica_id", "max_rel_error"],
                ens.indices.iter().zip(&ens.items).map(|(i, e)| vec![i.to_string(), s(*e)]),
            )?,
        )],
    })
}

fn variance_bounds(ctx: &Context, p: &VarianceBounds) -> Result<StatOutput> {
    let interval = p.interval.unwrap_or((ctx.grid.t0, ctx.grid.end()));
    let r = crate::synth::verify_variance_bounds(
        &ctx.hurst,
        interval,
        p.pairs,
        ctx.settings.kq,
        ctx.cfg.representation,
        ctx.cfg.seed,
    )?;
    Ok(StatOutput {
        verdict: Verdict::from_pass(r.violations() == 0),
        replicas: p.pairs,
        failures: 0,
        summary: serde_json::to_value(&r)?,
        files: Vec::new(),
    })
}

fn moments(ctx: &Context, p: &Moments) -> Result<StatOutput> {
    let t = p.t.unwrap_or(ctx.grid.t0);
    let k0 = ctx.index(t)?;
    let w = p.window.unwrap_or(ctx.grid.end() - t);
    let t1 = ctx.grid.time(ctx.index(t + w)?);
    let w = t1 - t;
    let ens = ctx.replicas(|path, _| {
        let x = match p.level {
            Level::PathPoint => path.values[k0],
            Level::Fixed(x) => x,
        };
        let f = ctx.field(&path, x)?;
        local_time_increment(&f, t, t1, x)
    })?;
    let incs = &ens.items;
    let (_, h_sup) = ctx.hurst.sup_inf(t, t1)?;
    let estimate = |xs: &[f64], m: u32, norm: f64| {
        let v: Vec<f64> = xs.iter().map(|x| (x / norm).powi(m as i32)).collect();
        let (mean, se) = mean_se(&v);
        MomentEstimate {
            m,
            mean,
            se,
            replicas: v.len(),
            normalizer: norm,
        }
    };
    let (verdict, summary, rows) = match p.mode {
        MomentMode::Levy => {
            let mut ok = true;
            let mut per = Vec::new();
            let mut rows = Vec::new();
            for &m in &p.orders {
                let e = estimate(incs, m, 1.0);
                let closed = w.powf(0.5 * m as f64) * abs_normal_moment(m);
                let z = (e.mean - closed).abs() / e.se;
                ok &= z <= p.se_multiplier;
                per.push(json!({"m": m, "mean": e.mean, "se": e.se, "closed_form": closed, "z": z}));
                rows.push(vec![m.to_string(), s(e.mean), s(e.se), s(closed)]);
            }
            (Verdict::from_pass(ok), json!({"mode": "levy", "window": w, "orders": per}), rows)
        }
        MomentMode::Fit => {
            let norm = w.powf(1.0 - h_sup);
            let fit_on = |xs: &[f64]| {
                let es: Vec<MomentEstimate> = p.orders.iter().map(|&m| estimate(xs, m, norm)).collect();
                (fit_moment_constant(&es, h_sup), es)
            };
            let (fit, es) = fit_on(incs);
            let half = incs.len() / 2;
            let (a, _) = fit_on(&incs[..half]);
            let (b, _) = fit_on(&incs[half..]);
            let rows = es
                .iter()
                .map(|e| {
                    let bound = (e.m as f64 * fit.c_hat.ln()
                        + h_sup * crate::numeric::ln_gamma(e.m as f64 + 1.0))
                    .exp();
                    vec![e.m.to_string(), s(e.mean), s(e.se), s(bound)]
                })
                .collect();
            (
                Verdict::from_pass(fit.dominated && fit.c_hat.is_finite()),
                json!({
                    "mode": "fit",
                    "window": w,
                    "normalizer": norm,
                    "h_sup": h_sup,
                    "c_hat": fit.c_hat,
                    "c_hat_halves": [a.c_hat, b.c_hat],
                    "per_order": fit.per_order,
                    "dominated": fit.dominated,
                    "moments": es,
                }),
                rows,
            )
        }
    };
    Ok(StatOutput {
        verdict,
        replicas: ens.len(),
        failures: ens.failures.len(),
        summary,
        files: vec![("moments.csv".into(), csv_bytes(&["m", "mean", "se", "reference"], rows)?)],
    })
}

fn holder_csv(e: &HolderEstimate) -> Result<Vec<u8>> {
    csv_bytes(
        &["scale", "mean_log_oscillation"],
        e.scales
            .iter()
            .zip(&e.mean_log_oscillation)
            .map(|(a, b)| vec![s(*a), s(*b)]),
    )
}

fn holder_summary(e: &HolderEstimate, target: f64, tol: f64) -> (Verdict, serde_json::Value) {
    let err = (e.alpha_hat - target).abs();
    (
        Verdict::from_pass(err <= tol),
        json!({
            "alpha_hat": e.alpha_hat,
            "ci": [e.ci.0, e.ci.1],
            "target": target,
            "abs_error": err,
            "tolerance": tol,
            "r_squared": e.r_squared,
            "degenerate": e.degenerate,
        }),
    )
}

fn holder_path(ctx: &Context, p: &HolderPath) -> Result<StatOutput> {
    let t0 = p.t0.unwrap_or(ctx.grid.time((ctx.grid.n - 1) / 2));
    let scales = dyadic_scales(p.delta_max.unwrap_or(ctx.grid.span() / 4.0), p.scales);
    check_scales(&scales, ctx.grid.dt)?;
    let ens = ctx.replicas(|path, _| path_oscillation(&path, t0, &scales))?;
    let (failures, replicas) = (ens.failures.len(), ens.len());
    let est = holder_from_oscillations(&scales, ens.items)?;
    let (verdict, summary) = holder_summary(&est, ctx.hurst.eval(t0)?, p.tolerance);
    Ok(StatOutput {
        verdict,
        replicas,
        failures,
        summary,
        files: vec![("holder.csv".into(), holder_csv(&est)?)],
    })
}

fn holder_localtime(ctx: &Context, p: &HolderLocalTime) -> Result<StatOutput> {
    let t0 = p.t0.unwrap_or(ctx.grid.t0);
    let k0 = ctx.index(t0)?;
    let scales = dyadic_scales(p.delta_max.unwrap_or(ctx.grid.end() - t0), p.scales);
    check_scales(&scales, ctx.grid.dt)?;
    let sup = SpaceSup::RangeWindow(p.range_window);
    let ens = ctx.replicas(|path, _| {
        let f = ctx.field(&path, path.values[k0])?;
        field_oscillation_at(&f, t0, &scales, sup)
    })?;
    let (failures, replicas) = (ens.failures.len(), ens.len());
    let est = holder_from_oscillations(&scales, ens.items)?;
    let (verdict, summary) = holder_summary(&est, 1.0 - ctx.hurst.eval(t0)?, p.tolerance);
    Ok(StatOutput {
        verdict,
        replicas,
        failures,
        summary,
        files: vec![("holder.csv".into(), holder_csv(&est)?)],
    })
}

fn running_csv(curves: &[ModulusCurve], chung: bool) -> Result<Vec<u8>> {
    let runs: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| if chung { c.running_inf() } else { c.running_sup() })
        .collect();
    let deltas = &curves[0].deltas;
    csv_bytes(
        &["delta", "median_running", "q25_running", "q75_running"],
        (0..deltas.len()).map(|i| {
            let col: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            vec![s(deltas[i]), s(median(&col)), s(quantile(&col, 0.25)), s(quantile(&col, 0.75))]
        }),
    )
}

fn path_law(ctx: &Context, p: &PathLaw, chung: bool) -> Result<StatOutput> {
    let t0 = p.t0.unwrap_or(ctx.grid.t0);
    let k0 = ctx.index(t0)?;
    let ladder = LadderSpec {
        delta_max: p.delta_max,
        delta_floor: p.delta_floor,
    };
    let deltas = ladder.for_grid(ctx.grid.dt, ctx.grid.end() - t0)?;
    let ens = ctx.replicas(|path, _| {
        if chung {
            chung_statistic(&path, &ctx.hurst, t0, &deltas)
        } else {
            lil_statistic(&path, &ctx.hurst, t0, &deltas, p.exponent_shift)
        }
    })?;
    if ens.is_empty() {
        return Err(Error::InsufficientReplicas { needed: 1, got: 0 });
    }
    let finals: Vec<f64> = ens
        .items
        .iter()
        .map(|c| if chung { c.final_inf() } else { c.final_sup() })
        .collect();
    let med = median(&finals);
    let (lo, hi) = if chung {
        ctx.cfg.thresholds.chung_bracket
    } else {
        ctx.cfg.thresholds.lil_bracket
    };
    let mut ok = med >= lo && med <= hi;
    let mut summary = json!({
        "statistic": if chung { "final running inf" } else { "final running sup" },
        "median": med,
        "q25": quantile(&finals, 0.25),
        "q75": quantile(&finals, 0.75),
        "bracket": [lo, hi],
        "in_bracket": ok,
        "deltas": deltas.len(),
        "exponent_shift": p.exponent_shift,
    });
    if p.compare_bm && chung {
        let bm = HurstFunction::constant(0.5)?;
        let g = TimeGrid::new(0.0, ctx.grid.dt, ctx.grid.n - k0)?;
        let reference = run_replicas(
            ctx.cfg.replicas,
            split_seed(ctx.cfg.seed, BM_STREAM),
            ctx.cfg.thresholds.replica_failure_budget,
            |_, sd| Ok(chung_statistic(&gen_fbm(0.5, &g, sd, FbmMethod::Circulant)?, &bm, 0.0, &deltas)?.final_inf()),
        )?;
        let t = energy_test_1d(
            &finals,
            &reference.items,
            crate::lass::DEFAULT_PERMUTATIONS,
            split_seed(ctx.cfg.seed, TEST_STREAM),
        )?;
        let same = t.p_value > ctx.cfg.thresholds.p_value;
        ok &= same;
        summary["bm_median"] = json!(median(&reference.items));
        summary["bm_p_value"] = json!(t.p_value);
        summary["bm_distance"] = json!(t.distance);
    }
    Ok(StatOutput {
        verdict: Verdict::from_pass(ok),
        replicas: ens.len(),
        failures: ens.failures.len(),
        summary,
        files: vec![
            ("curves.csv".into(), curves_csv(&ens.items, &ens.indices)?),
            ("running.csv".into(), running_csv(&ens.items, chung)?),
        ],
    })
}

fn modulus_verdict(ctx: &Context, base: &ModulusEnsemble, pert: &ModulusEnsemble) -> (Verdict, serde_json::Value) {
    let th = &ctx.cfg.thresholds;
    let bounded = base.envelope.is_bounded(th.bounded_growth);
    let inflation = pert.envelope.inflation_over(&base.envelope);
    let warnings: Vec<&String> = base.curves.first().map(|c| c.warnings.iter().collect()).unwrap_or_default();
    (
        Verdict::from_pass(bounded && inflation >= th.inflation),
        json!({
            "growth_exponent": base.envelope.growth_exponent,
            "growth_r_squared": base.envelope.r_squared,
            "bounded": bounded,
            "bounded_growth": th.bounded_growth,
            "perturbed_growth_exponent": pert.envelope.growth_exponent,
            "inflation": inflation,
            "inflation_threshold": th.inflation,
            "smallest_delta": base.envelope.deltas.last(),
            "normalizer": base.curves.first().map(|c| c.normalizer.clone()),
            "warnings": warnings,
        }),
    )
}

fn modulus_output(ctx: &Context, pairs: Ensemble<(ModulusCurve, ModulusCurve)>) -> Result<StatOutput> {
    let (failures, indices) = (pairs.failures.len(), pairs.indices.clone());
    let (a, b): (Vec<_>, Vec<_>) = pairs.items.into_iter().unzip();
    let base = ModulusEnsemble::new(a)?;
    let pert = ModulusEnsemble::new(b)?;
    let (verdict, summary) = modulus_verdict(ctx, &base, &pert);
    Ok(StatOutput {
        verdict,
        replicas: indices.len(),
        failures,
        summary,
        files: vec![
            ("envelope.csv".into(), envelope_csv(&base.envelope, &pert.envelope)?),
            ("curves.csv".into(), curves_csv(&base.curves, &indices)?),
        ],
    })
}

fn time_modulus(ctx: &Context, p: &TimeModulus, uniform: bool) -> Result<StatOutput> {
    let t = p.t.unwrap_or(ctx.grid.t0);
    let k0 = ctx.index(t)?;
    let ladder = LadderSpec {
        delta_max: p.delta_max,
        delta_floor: p.delta_floor,
    };
    let available = if uniform { ctx.grid.span() } else { ctx.grid.end() - t };
    let deltas = ladder.for_grid(ctx.grid.dt, available)?;
    let (s0, s1) = (p.exponent_shift, p.exponent_shift + p.perturbation);
    let pairs = ctx.replicas(|path, _| {
        if uniform {
            let x = p.x.unwrap_or(path.values[0]);
            let f = ctx.field(&path, x)?;
            Ok((
                uniform_modulus_statistic(&f, &ctx.hurst, x, &deltas, s0)?,
                uniform_modulus_statistic(&f, &ctx.hurst, x, &deltas, s1)?,
            ))
        } else {
            let x = match p.level {
                Level::PathPoint => path.values[k0],
                Level::Fixed(x) => x,
            };
            let f = ctx.field(&path, x)?;
            Ok((
                local_modulus_statistic(&f, &ctx.hurst, t, &deltas, p.level, s0)?,
                local_modulus_statistic(&f, &ctx.hurst, t, &deltas, p.level, s1)?,
            ))
        }
    })?;
    modulus_output(ctx, pairs)
}

fn space_modulus(ctx: &Context, p: &SpaceModulus) -> Result<StatOutput> {
    let (a, b) = p.interval.unwrap_or((ctx.grid.t0, ctx.grid.end()));
    let (_, h_sup) = ctx.hurst.sup_inf(a, b)?;
    let alpha = p.alpha.unwrap_or(space_exponent_bound(h_sup) - 0.1);
    let spacings = delta_ladder(
        p.spacing_max.unwrap_or(2.0 * (b - a).powf(h_sup)),
        p.spacing_min.unwrap_or(2.0 * ctx.dx),
    )?;
    let pairs = ctx.replicas(|path, _| {
        let f = ctx.field(&path, path.values[0])?;
        Ok((
            space_modulus_statistic(&f, &ctx.hurst, (a, b), &spacings, alpha)?,
            space_modulus_statistic(&f, &ctx.hurst, (a, b), &spacings, alpha + p.perturbation)?,
        ))
    })?;
    let mut out = modulus_output(ctx, pairs)?;
    out.summary["alpha"] = json!(alpha);
    out.summary["admissible_bound"] = json!(space_exponent_bound(h_sup));
    Ok(out)
}

fn range_inequality(ctx: &Context, p: &RangeInequality) -> Result<StatOutput> {
    let t0 = p.t0.unwrap_or(ctx.grid.t0);
    let k0 = ctx.index(t0)?;
    let dt = ctx.grid.dt;
    let raw = if p.deltas.is_empty() {
        dyadic_scales((ctx.grid.end() - t0) / 2.0, 8)
    } else {
        p.deltas.clone()
    };
    // snap to whole steps so that t0 + δ is a grid time
    let mut lags: Vec<usize> = raw.iter().map(|d| ((d / dt).round() as usize).max(1)).collect();
    lags.dedup();
    let ens = ctx.replicas(|path, _| {
        let f = ctx.field(&path, path.values[k0])?;
        lags.iter()
            .map(|&l| range_inequality_check(&path, &f, t0, ctx.grid.time(k0 + l) - t0))
            .collect::<Result<Vec<_>>>()
    })?;
    let checks: Vec<&RangeCheck> = ens.items.iter().flatten().collect();
    let violations = checks.iter().filter(|c| !c.holds).count();
    let min_ratio = checks
        .iter()
        .filter(|c| c.lhs > 0.0)
        .map(|c| c.rhs / c.lhs)
        .fold(f64::INFINITY, f64::min);
    let rows = ens.indices.iter().zip(&ens.items).flat_map(|(i, cs)| {
        cs.iter().map(move |c| {
            vec![i.to_string(), s(c.delta), s(c.lhs), s(c.rhs), s(c.slack), c.holds.to_string()]
        })
    });
    Ok(StatOutput {
        verdict: Verdict::from_pass(violations == 0),
        replicas: ens.len(),
        failures: ens.failures.len(),
        summary: json!({
            "checks": checks.len(),
            "violations": violations,
            "min_rhs_over_lhs": min_ratio,
        }),
        files: vec![(
            "checks.csv".into(),
            csv_bytes(&["replica_id", "delta", "lhs", "rhs", "slack", "holds"], rows)?,
        )],
    })
}

fn lass_localtime(ctx: &Context, p: &LassLocalTime) -> Result<StatOutput> {
    let settings = LassSettings {
        t0: p.t0,
        x: p.x,
        rhos: p.rhos.clone(),
        t_coords: p.t_coords.clone(),
        replicas: ctx.cfg.replicas,
        grid_n: p.grid_n,
        kappa: p.kappa,
        representation: ctx.cfg.representation,
        permutations: p.permutations,
        reference_shift: p.reference_shift,
        p_threshold: ctx.cfg.thresholds.p_value,
    };
    let r = verify_lass_localtime(&ctx.hurst, &settings, &ctx.settings, ctx.cfg.seed)?;
    let rows = r
        .per_rho
        .iter()
        .map(|x| vec![s(x.rho), s(x.distance), s(x.p_value), s(x.null_sd)])
        .collect::<Vec<_>>();
    Ok(StatOutput {
        verdict: Verdict::from_pass(r.converged),
        replicas: ctx.cfg.replicas,
        failures: r.per_rho.iter().map(|x| x.failures).sum(),
        summary: serde_json::to_value(&r)?,
        files: vec![("distances.csv".into(), csv_bytes(&["rho", "distance", "p_value", "null_sd"], rows)?)],
    })
}

fn weighted_occupation(ctx: &Context, p: &WeightedOccupation) -> Result<StatOutput> {
    let h0 = ctx.hurst.eval(p.t0)?;
    let scaling = ScalingPair {
        a: p.a,
        b: p.b.unwrap_or(p.a + 1.0 - h0),
    };
    let w = WeightedSettings {
        t0: p.t0,
        rho: p.rho,
        y: p.y,
        t: p.t,
        scaling,
        xi: p.xi.unwrap_or(0.5 * xi_bound(ctx.hurst.nu)),
        grid_n: p.grid_n,
        replicas: ctx.cfg.replicas,
        representation: ctx.cfg.representation,
    };
    let seed = ctx.cfg.seed;
    let dx = ctx.cfg.localtime.kappa * (1.0 / p.grid_n as f64).powf(h0);
    let ell: Vec<f64> = reference_local_times(
        h0,
        tangent_scale(h0, ctx.cfg.representation),
        p.y,
        &[p.t],
        p.grid_n,
        dx,
        ctx.cfg.replicas,
        split_seed(seed, u64::MAX),
    )?
    .into_iter()
    .map(|v| v[0])
    .collect();
    let mut ok = true;
    let mut per = Vec::new();
    let mut rows = Vec::new();
    for (i, f) in p.functions.iter().enumerate() {
        let xs = weighted_occupation_functional(f, &ctx.hurst, &w, &ctx.settings, split_seed(seed, i as u64))?;
        let ys: Vec<f64> = ell.iter().map(|l| l * f.integral()).collect();
        let t = energy_test_1d(&xs, &ys, p.permutations, split_seed(seed, 1_000 + i as u64))?;
        ok &= t.p_value > ctx.cfg.thresholds.p_value;
        per.push(json!({
            "function": f,
            "mean": mean_se(&xs).0,
            "reference_mean": mean_se(&ys).0,
            "distance": t.distance,
            "p_value": t.p_value,
        }));
        rows.extend(
            xs.iter()
                .zip(&ys)
                .enumerate()
                .map(|(k, (x, y))| vec![i.to_string(), k.to_string(), s(*x), s(*y)]),
        );
    }
    Ok(StatOutput {
        verdict: Verdict::from_pass(ok),
        replicas: ctx.cfg.replicas,
        failures: 0,
        summary: json!({
            "scaling": scaling,
            "mollifier_width": p.rho.powf(scaling.a - h0),
            "h0": h0,
            "functions": per,
        }),
        files: vec![(
            "samples.csv".into(),
            csv_bytes(&["function", "replica_id", "functional", "reference"], rows)?,
        )],
    })
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "statistic panicked".into())
}

/// Runs every selected statistic, writes per-statistic CSVs and `report.json`
/// under the output directory, and returns the report. A failing statistic
/// is recorded as an error and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis());
    let clock = Instant::now();
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let ctx = if cfg.statistics.is_empty() {
        None
    } else {
        Some(Context::new(cfg).map_err(|e| e.to_string()))
    };
    let mut outcomes = Vec::with_capacity(cfg.statistics.len());
    for (index, stat) in cfg.statistics.iter().enumerate() {
        let result = match ctx.as_ref().expect("context exists when statistics are selected") {
            Ok(c) => catch_unwind(AssertUnwindSafe(|| run_statistic(c, stat)))
                .unwrap_or_else(|p| Err(Error::Domain(panic_message(p))))
                .map_err(|e| e.to_string()),
            Err(e) => Err(format!("setup failed: {e}")),
        };
        outcomes.push(match result.and_then(|o| write_outputs(&dir, index, stat.name(), o)) {
            Ok(o) => o,
            Err(e) => StatisticOutcome {
                index,
                name: stat.name().into(),
                verdict: Verdict::Error,
                replicas: 0,
                failures: 0,
                summary: serde_json::Value::Null,
                files: Vec::new(),
                error: Some(e),
            },
        });
    }
    let runtime = Runtime {
        started_unix_ms: started,
        elapsed_ms: clock.elapsed().as_millis(),
        threads: rayon::current_num_threads(),
        output_dir: dir.to_string_lossy().into_owned(),
    };
    let report = Report::new(cfg, outcomes, runtime)?;
    report.write(&dir)?;
    Ok(report)
}

fn write_outputs(dir: &Path, index: usize, name: &str, o: StatOutput) -> std::result::Result<StatisticOutcome, String> {
    let sub = format!("{index:02}-{name}");
    let mut files = Vec::with_capacity(o.files.len());
    for (file, bytes) in &o.files {
        let rel = format!("{sub}/{file}");
        std::fs::create_dir_all(dir.join(&sub))
            .and_then(|_| std::fs::write(dir.join(&rel), bytes))
            .map_err(|e| format!("writing {rel}: {e}"))?;
        files.push(rel);
    }
    Ok(StatisticOutcome {
        index,
        name: name.into(),
        verdict: o.verdict,
        replicas: o.replicas,
        failures: o.failures,
        summary: o.summary,
        files,
        error: None,
    })
}

/// Writes each replica path as `path_NNNNN.csv` plus its JSON sidecar.
pub fn write_paths(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let ens = mc_ensemble(cfg)?;
    std::fs::create_dir_all(dir)?;
    ens.indices
        .iter()
        .zip(&ens.items)
        .map(|(i, p)| {
            let stem = format!("path_{i:05}");
            p.save(dir, &stem)?;
            Ok(format!("{stem}.csv"))
        })
        .collect()
}

/// Writes each replica's local-time field as `localtime_NNNNN.csv` (`t,x,L`)
/// at every `stride`-th time.
pub fn write_fields(cfg: &ExperimentConfig, dir: &Path, stride: usize) -> Result<Vec<String>> {
    let ctx = Context::new(cfg)?;
    std::fs::create_dir_all(dir)?;
    let ens = ctx.replicas(|path, _| {
        let f = ctx.field(&path, path.values[0])?;
        let mut buf = Vec::new();
        f.write_csv(&mut buf, stride)?;
        Ok(buf)
    })?;
    ens.indices
        .iter()
        .zip(&ens.items)
        .map(|(i, bytes)| {
            let name = format!("localtime_{i:05}.csv");
            std::fs::write(dir.join(&name), bytes)?;
            Ok(name)
        })
        .collect()
}
