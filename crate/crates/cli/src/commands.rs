//! Subcommand bodies. Each writes its tables under the output directory and
//! prints a short summary to stdout.

use std::f64::consts::TAU;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use pmgate_core::array::{cloud_fidelity_bound, crosstalk_map, max_infidelity_over_ratios, ArrayScene};
use pmgate_core::dynamics::{propagate, sweep_gate_components, Model, PropagationOptions, PropagationRequest, SweepRow};
use pmgate_core::lightshift::{
    addressing_infidelity_scan, critical_delta_c, dressed_basis, effective_rabi, rabi_factor, sensitivity_to_shift,
    simulate_rabi_oscillation, solve_detuning_for_factor, ExtractionSettings, FourLevelParams,
};
use pmgate_core::parallel::{candidate_centers, center_offset_search, plan_parallel, propagate_parallel, PlanOptions};
use pmgate_core::qcore::gate_fidelity;
use pmgate_core::sequence::GateProgram;
use pmgate_core::table::{crosstalk_table, fmt_g, parallel_table, scan_table, sweep_table, trace_table, Table};
use pmgate_core::Error;

use crate::config::{
    scenario_scene, ConcatCompareConfig, ConcatMode, FidelityReportConfig, FourLevelConfig, GateSweepConfig,
    LatticeMapConfig, LightshiftConfig, LightshiftMode, ParallelSimConfig, Units,
};
use crate::{CliError, Format};

pub struct Context {
    pub units: Units,
    pub hash: String,
    pub out: PathBuf,
    pub format: Format,
    pub options: PropagationOptions,
}

impl Context {
    fn write(&self, name: &str, contents: String) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|source| CliError::Io { path: self.out.clone(), source })?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    /// Write a table as `<stem>.csv`, or its records as `<stem>.json`.
    fn emit<T: Serialize>(&self, stem: &str, table: &Table, records: &T) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), table.to_csv(&[format!("config_sha256={}", self.hash)])),
            Format::Json => {
                let doc = json!({ "config_sha256": self.hash, "rows": records });
                self.write(&format!("{stem}.json"), pretty(&doc)?)
            }
        }
    }
}

fn pretty(v: &serde_json::Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn require<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing {what}")))
}

/// Exit status for a sweep with flagged rows: numeric failures win.
fn check_flags(rows: &[SweepRow]) -> Result<(), CliError> {
    let flags: Vec<&str> = rows.iter().filter_map(|r| r.flag.as_deref()).collect();
    if flags.is_empty() {
        return Ok(());
    }
    let msg = format!("{} sweep points failed ({})", flags.len(), flags[0]);
    if flags.iter().any(|f| *f == "non_convergence" || *f == "analysis") {
        Err(CliError::Numeric(msg))
    } else {
        Err(CliError::Config(msg))
    }
}

fn target_fidelity(program: &GateProgram, omega: f64, model: Model, options: PropagationOptions) -> Result<f64, CliError> {
    let target = require(program.target.gate_target(), "single-gate target")?;
    let u = propagate(&PropagationRequest::new(program, omega, model).with_options(options))?.unitary;
    Ok(gate_fidelity(&u, &target))
}

pub fn gate_sweep(ctx: &Context, cfg: &GateSweepConfig) -> Result<(), CliError> {
    let units = &ctx.units;
    let omega_m = require(cfg.gate.omega_m(units), "gate_sweep.gate.omega_m")?;
    let program = cfg.gate.program(units, omega_m, cfg.gate.order.unwrap_or(1))?;
    let ratios = cfg.ratio.values()?;
    let detunings = match &cfg.detuning {
        Some(g) => g.values()?.into_iter().map(|d| units.freq(d)).collect(),
        None => vec![0.0],
    };
    let rows = sweep_gate_components(&program, omega_m, &ratios, &detunings, cfg.model, ctx.options)?;
    let path = ctx.emit("sweep", &sweep_table(&rows), &rows)?;
    println!("wrote {}", path.display());
    println!("target fidelity at ratio 1: {}", fmt_g(target_fidelity(&program, omega_m, cfg.model, ctx.options)?));
    for r in [0.25, 0.5, 0.75] {
        let u = propagate(&PropagationRequest::new(&program, r * omega_m, cfg.model).with_options(ctx.options))?.unitary;
        let p = u.coefficients().probabilities();
        println!("zero-crossing residual at {r}: {}", fmt_g(p[1].max(p[2]).max(p[3])));
    }
    check_flags(&rows)
}

pub fn concat_compare(ctx: &Context, cfg: &ConcatCompareConfig) -> Result<(), CliError> {
    let units = &ctx.units;
    if cfg.gate.order.is_some() {
        return Err(CliError::Config("concat_compare takes 'orders', not gate.order".into()));
    }
    if cfg.orders.is_empty() {
        return Err(CliError::Config("concat_compare.orders is empty".into()));
    }
    let omega_m = require(cfg.gate.omega_m(units), "concat_compare.gate.omega_m")?;
    let k1 = cfg.gate.resolve_k(units, omega_m)?;
    let ratios = cfg.ratio.values()?;
    let detunings = match &cfg.detuning {
        Some(g) => g.values()?.into_iter().map(|d| units.freq(d)).collect(),
        None => vec![0.0],
    };
    let mut all = Vec::new();
    for &order in &cfg.orders {
        let k = match cfg.mode {
            ConcatMode::FixedEps => k1,
            ConcatMode::FixedBandwidth => {
                let scale = 1u32.checked_shl(order.saturating_sub(1)).unwrap_or(0);
                k1.checked_mul(scale).ok_or_else(|| CliError::Config(format!("order {order} too large")))?
            }
        };
        let program = cfg.gate.design.build(cfg.gate.angle, omega_m, k, order)?;
        let rows = sweep_gate_components(&program, omega_m, &ratios, &detunings, cfg.model, ctx.options)?;
        let path = ctx.emit(&format!("concat_order{order}"), &sweep_table(&rows), &rows)?;
        let flat = max_infidelity_over_ratios(&program, omega_m, (0.98, 1.02), 41, cfg.model, ctx.options)?;
        let eps = program.distinct_tones()[0].eps_m;
        println!(
            "order {order}: eps_m/omega_m = {}, center flatness (max infidelity on [0.98, 1.02]) = {}, wrote {}",
            fmt_g(eps / omega_m),
            fmt_g(flat),
            path.display()
        );
        all.extend(rows);
    }
    check_flags(&all)
}

/// Largest value per distance shell around the target, nearest shell first.
fn shell_maxima(scene: &ArrayScene, values: &[(String, f64)]) -> Vec<f64> {
    let target = scene.site(&scene.target).expect("validated scene").position;
    let mut by_distance: Vec<(f64, f64)> = values
        .iter()
        .filter_map(|(label, v)| scene.site(label).map(|s| (s.position.distance(&target), *v)))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut shells: Vec<(f64, f64)> = Vec::new();
    for (d, v) in by_distance {
        match shells.last_mut() {
            Some((d0, m)) if (d - *d0).abs() <= 1e-6 * d0.max(1.0) => *m = m.max(v),
            _ => shells.push((d, v)),
        }
    }
    shells.into_iter().map(|(_, m)| m).collect()
}

fn shell_text(shells: &[f64], i: usize) -> String {
    shells.get(i).map(|&v| fmt_g(v)).unwrap_or_else(|| "n/a".into())
}

pub fn lattice_map(ctx: &Context, cfg: &LatticeMapConfig) -> Result<(), CliError> {
    let scene = cfg.scene.build(&ctx.units)?;
    let omega_m = cfg.gate.omega_m(&ctx.units).unwrap_or_else(|| scene.target_rabi());
    let program = cfg.gate.program(&ctx.units, omega_m, cfg.gate.order.unwrap_or(1))?;
    let records = crosstalk_map(&scene, &program, cfg.model, ctx.options)?;
    let path = ctx.emit("crosstalk", &crosstalk_table(&records), &records)?;
    let spectators: Vec<(String, f64)> =
        records.iter().filter_map(|r| r.crosstalk.map(|c| (r.label.clone(), c))).collect();
    let shells = shell_maxima(&scene, &spectators);
    let target = records.iter().find(|r| r.is_target).expect("target is in the scene");
    println!("wrote {}", path.display());
    println!("target fidelity: {}", fmt_g(target.fidelity_target));
    println!("NN crosstalk: {}", shell_text(&shells, 0));
    println!("NNN crosstalk: {}", shell_text(&shells, 1));
    Ok(())
}

pub fn parallel_sim(ctx: &Context, cfg: &ParallelSimConfig) -> Result<(), CliError> {
    let scene = cfg.scene.build(&ctx.units)?;
    let eps = ctx.units.freq(cfg.eps_m);
    let targets: Vec<(String, f64)> = cfg.targets.iter().map(|t| (t.site.clone(), t.angle)).collect();
    let options = PlanOptions { distinguish_factor: cfg.distinguish_factor };
    let plan = match plan_parallel(&scene, &targets, eps, options) {
        Ok(p) => p,
        Err(e @ Error::Distinguishability { .. }) => {
            let extent = match cfg.center_search {
                Some(c) => c.extent,
                None => cfg.scene.spacing()?.unwrap_or(scene.beam.r0) / 2.0,
            };
            let points = cfg.center_search.map(|c| c.points).unwrap_or(9);
            let ranked = center_offset_search(&scene, &candidate_centers(scene.beam.center, extent, points), eps, options)?;
            let best = &ranked[0];
            eprintln!(
                "suggested beam center ({}, {}, {}) um: smallest Rabi gap {} rad/us, margin {}",
                fmt_g(best.center.x),
                fmt_g(best.center.y),
                fmt_g(best.center.z),
                fmt_g(best.min_gap),
                fmt_g(best.margin)
            );
            return Err(e.into());
        }
        Err(Error::Constraint { reason, suggested_eps_m: Some(s) }) => {
            let shown = match ctx.units.frequencies_in {
                crate::config::FrequencyUnit::MHz => s / TAU,
                crate::config::FrequencyUnit::RadPerUs => s,
            };
            return Err(CliError::Config(format!("{reason}; nearest feasible eps_m = {}", fmt_g(shown))));
        }
        Err(e) => return Err(e.into()),
    };
    let records = propagate_parallel(&scene, &plan, cfg.order, ctx.options)?;
    let path = ctx.emit("parallel", &parallel_table(&records), &records)?;
    let min_target = records
        .iter()
        .filter(|r| r.tone_index.is_some())
        .map(|r| r.fidelity_target)
        .fold(f64::INFINITY, f64::min);
    let max_spectator = records.iter().filter_map(|r| r.crosstalk).fold(0.0, f64::max);
    // Spectators whose Rabi rate matches a tone are driven like a target.
    let window = cfg.distinguish_factor * eps;
    let on_tone: Vec<&str> = records
        .iter()
        .filter(|r| r.crosstalk.is_some() && r.nearest_tone_gap < window)
        .map(|r| r.label.as_str())
        .collect();
    let max_off_tone = records
        .iter()
        .filter(|r| r.nearest_tone_gap >= window)
        .filter_map(|r| r.crosstalk)
        .fold(0.0, f64::max);
    println!("wrote {}", path.display());
    println!("duration {} us, periods per tone {:?}", fmt_g(plan.total_t), plan.ks);
    println!("min target fidelity: {}", fmt_g(min_target));
    println!("max spectator crosstalk: {}", fmt_g(max_spectator));
    if !on_tone.is_empty() {
        println!("spectators within {} rad/us of a tone: {}", fmt_g(window), on_tone.join(" "));
        println!("max crosstalk on the remaining spectators: {}", fmt_g(max_off_tone));
    }
    Ok(())
}

fn four_level(units: &Units, p: &FourLevelConfig) -> Result<(FourLevelParams, f64), CliError> {
    let (d, oc) = (units.freq(p.delta_big), units.freq(p.omega_c));
    let delta_c = match (p.delta_c, p.xi) {
        (Some(dc), _) => units.freq(dc),
        (None, Some(xi)) => solve_detuning_for_factor(xi, d, oc)?,
        (None, None) => return Err(CliError::Config("lightshift.params needs delta_c or xi".into())),
    };
    let base = FourLevelParams {
        delta_small: units.freq(p.delta_small),
        ..FourLevelParams::new(units.freq(p.omega1), units.freq(p.omega2), oc, d, delta_c)
    };
    let xi = match p.xi {
        Some(xi) => xi,
        None => rabi_factor(&base)?,
    };
    Ok((base.with_shift(units.freq(p.delta_shift)), xi))
}

pub fn lightshift(ctx: &Context, cfg: &LightshiftConfig) -> Result<(), CliError> {
    let (params, xi) = four_level(&ctx.units, &cfg.params)?;
    params.validate()?;
    let w = effective_rabi(&params)?;
    match cfg.mode {
        LightshiftMode::Analytic => {
            let b = dressed_basis(&params)?;
            let base = FourLevelParams { delta_shift: 0.0, ..params };
            let sens = sensitivity_to_shift(&base, xi)?;
            let quantities = [
                ("omega_eff", w),
                ("bare_rabi", params.bare_rabi()),
                ("xi", xi),
                ("delta_c", params.delta_c),
                ("critical_delta_c", critical_delta_c(&params)),
                ("delta_plus", b.delta_plus),
                ("delta_minus", b.delta_minus),
                ("ratio_plus", b.ratio_plus),
                ("ratio_minus", b.ratio_minus),
                ("dxi_d_delta_c", sens),
            ];
            let mut table = Table::new(&["quantity", "value"]);
            for (k, v) in quantities {
                table.push(vec![k.to_string(), fmt_g(v)]);
            }
            let rows: Vec<_> = quantities.iter().map(|(k, v)| json!({ "quantity": k, "value": v })).collect();
            let path = ctx.emit("lightshift_analytic", &table, &rows)?;
            println!("wrote {}", path.display());
            println!("effective Rabi rate: {} rad/us (xi = {})", fmt_g(w), fmt_g(xi));
            if params.perturbative_advisory() {
                println!("note: delta_big is not large against the Raman amplitudes");
            }
        }
        LightshiftMode::Simulate => {
            let duration = cfg.simulate.periods * TAU / w.abs();
            let trace = simulate_rabi_oscillation(&params, duration, cfg.simulate.samples)?;
            let path = ctx.emit("trace", &trace_table(&trace), &trace)?;
            println!("wrote {}", path.display());
            println!(
                "effective Rabi rate: analytic {} rad/us, extracted {} rad/us, relative difference {}",
                fmt_g(trace.omega_eff_analytic),
                fmt_g(trace.omega_eff_extracted),
                fmt_g(trace.omega_eff_extracted / trace.omega_eff_analytic.abs() - 1.0)
            );
        }
        LightshiftMode::Scan => {
            let scan = require(cfg.scan.as_ref(), "lightshift.scan block")?;
            let base = FourLevelParams { delta_shift: 0.0, ..params };
            let omega_m = scan.gate.omega_m(&ctx.units).unwrap_or_else(|| effective_rabi(&base).map(f64::abs).unwrap_or(w.abs()));
            let gate = scan.gate.program(&ctx.units, omega_m, scan.gate.order.unwrap_or(1))?;
            let extraction = scan
                .extract
                .then_some(ExtractionSettings { periods: cfg.simulate.periods, samples: cfg.simulate.samples });
            let range = (ctx.units.freq(scan.range[0]), ctx.units.freq(scan.range[1]));
            let result = addressing_infidelity_scan(&base, xi, range, scan.points, &gate, extraction, ctx.options)?;
            let path = ctx.emit("scan", &scan_table(&result.rows), &result.rows)?;
            println!("wrote {}", path.display());
            println!("worst infidelity over the shift range: {}", fmt_g(result.worst_infidelity));
        }
    }
    Ok(())
}

pub fn fidelity_report(ctx: &Context, cfg: &FidelityReportConfig) -> Result<(), CliError> {
    let s = &cfg.scenario;
    let units = &ctx.units;
    let omega0 = units.freq(s.omega0);
    let eps = s.eps_m.map(|e| units.freq(e)).unwrap_or(omega0 / 16.0);
    let k = s.angle * omega0 / (TAU * eps);
    if !(eps > 0.0) || (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
        return Err(CliError::Config(format!("eps_m does not give a whole number of modulation periods (k = {k})")));
    }
    let scene = scenario_scene(s, units)?;
    let mut orders = Vec::with_capacity(cfg.orders.len());
    let mut variation = 0.0;
    let mut table = Table::new(&["order", "max_infidelity", "nn_crosstalk"]);
    for &order in &cfg.orders {
        let program = s.design.build(s.angle, omega0, k.round() as u32, order)?;
        let bound = cloud_fidelity_bound(&scene, &program, &s.cloud, cfg.model, ctx.options)?;
        variation = bound.fractional_variation;
        let nn = shell_maxima(&scene, &bound.max_crosstalk_per_site).first().copied();
        table.push(vec![order.to_string(), fmt_g(bound.max_infidelity_target), nn.map(fmt_g).unwrap_or_default()]);
        println!(
            "order {order}: max infidelity {}, NN crosstalk {}",
            fmt_g(bound.max_infidelity_target),
            nn.map(fmt_g).unwrap_or_else(|| "n/a".into())
        );
        orders.push(json!({ "order": order, "max_infidelity": bound.max_infidelity_target, "nn_crosstalk": nn }));
    }
    let report = json!({
        "config_hash": ctx.hash,
        "scenario": {
            "r0_um": s.r0,
            "omega0_rad_per_us": omega0,
            "eps_m_rad_per_us": eps,
            "design": s.design,
            "angle": s.angle,
            "cloud": s.cloud,
            "fractional_variation": variation,
        },
        "orders": orders,
    });
    let path = ctx.write("report.json", pretty(&report)?)?;
    println!("wrote {}", path.display());
    if ctx.format == Format::Csv {
        let path = ctx.write("report.csv", table.to_csv(&[format!("config_sha256={}", ctx.hash)]))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
