//! Experiment dispatch: one function per operation name, producing the
//! report files for a block. Tabular series go to CSV, structured reports
//! to JSON; all randomness flows from the block seed.

use serde_json::json;

use cocycle_lab::error::CocycleError;
use cocycle_lab::linalg;
use cocycle_lab::lincocycle;
use cocycle_lab::simplicity::{self, SimplicityParams};
use cocycle_lab::skewprod::{self, FiberedPoint};
use cocycle_lab::spectrum::{self, Region};
use cocycle_lab::symbolic::{self, derive_seed};
use cocycle_lab::ustates;

use crate::config::{ExperimentBlock, ScenarioContext};

#[derive(Debug, thiserror::Error)]
pub enum OpError {
    #[error("unknown operation '{0}'")]
    UnknownOp(String),
    #[error("operation '{op}' requires {what}")]
    MissingInput { op: String, what: String },
    #[error(transparent)]
    Numerical(#[from] CocycleError),
}

/// Output files of one block: (extension, contents).
pub type Outputs = Vec<(&'static str, String)>;

pub fn run_block(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    match block.op.as_str() {
        "lyapunov_spectrum" => lyapunov_spectrum(ctx, block),
        "adjoint_spectrum" => adjoint_spectrum(ctx, block),
        "simplicity_report" => simplicity_report(ctx, block),
        "check_pinching" => check_pinching(ctx, block),
        "fiber_bunching" => fiber_bunching(ctx, block),
        "openness_probe" => openness_probe(ctx, block),
        "backward_pushforward" => backward_pushforward(ctx, block),
        "center_exponent" => center_exponent(ctx, block),
        "induced_cocycle" => induced_cocycle(ctx, block),
        "gap_functional" => gap_functional(ctx, block),
        "mostly_neutral" => mostly_neutral(ctx, block),
        "holder_norm" => holder_norm(ctx, block),
        other => Err(OpError::UnknownOp(other.to_string())),
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialization");
    s.push('\n');
    s
}

fn homoclinic<'a>(
    ctx: &'a ScenarioContext,
    op: &str,
) -> Result<&'a (symbolic::BiSequence, usize), OpError> {
    ctx.homoclinic
        .as_ref()
        .ok_or_else(|| OpError::MissingInput {
            op: op.to_string(),
            what: "a [homoclinic] section".to_string(),
        })
}

fn simplicity_params(block: &ExperimentBlock) -> SimplicityParams {
    let d = SimplicityParams::default();
    SimplicityParams {
        tol_gap: block.param("tol_gap", d.tol_gap),
        tol_margin: block.param("tol_margin", d.tol_margin),
        tol_slope: block.param("tol_slope", d.tol_slope),
        tol_dom: block.param("tol_dom", d.tol_dom),
        t_samples: block.uparam("t_samples", d.t_samples),
        t_grid: block.uparam("t_grid", d.t_grid),
        uniform_n: block.uparam("uniform_n", d.uniform_n),
        n_pinching: block.uparam("n_pinching", d.n_pinching),
        n_oseledets: block.uparam("n_oseledets", d.n_oseledets),
        orbit_len: block.uparam("orbit_len", d.orbit_len),
        tol: block.param("tol", d.tol),
    }
}

fn lyapunov_spectrum(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let est = spectrum::lyapunov_spectrum(
        &ctx.cocycle,
        &ctx.spec,
        block.uparam("n_steps", 100_000),
        block.uparam("n_orbits", 8),
        block.uparam("k_renorm", 5),
        block.seed,
    )?;
    Ok(vec![("csv", est.to_csv()), ("json", to_json(&est))])
}

fn adjoint_spectrum(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let n_steps = block.uparam("n_steps", 100_000);
    let n_orbits = block.uparam("n_orbits", 8);
    let k = block.uparam("k_renorm", 5);
    let original =
        spectrum::lyapunov_spectrum(&ctx.cocycle, &ctx.spec, n_steps, n_orbits, k, block.seed)?;
    let adj = ctx.cocycle.adjoint();
    let adjoint = spectrum::lyapunov_spectrum(
        &adj,
        &ctx.spec,
        n_steps,
        n_orbits,
        k,
        derive_seed(block.seed, 1),
    )?;
    let pooled = original.pooled_stderr(&adjoint);
    let diffs: Vec<f64> = original
        .exponents
        .iter()
        .zip(&adjoint.exponents)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let within = diffs
        .iter()
        .zip(&pooled)
        .all(|(d, p)| *d <= 3.0 * p.max(1e-12));
    Ok(vec![(
        "json",
        to_json(&json!({
            "original": original,
            "adjoint": adjoint,
            "abs_differences": diffs,
            "pooled_stderr": pooled,
            "within_3_pooled_stderr": within,
        })),
    )])
}

fn simplicity_report(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let (z, iota) = homoclinic(ctx, "simplicity_report")?;
    let params = simplicity_params(block);
    let report = simplicity::simplicity_report(&ctx.cocycle, &ctx.fixed_point, z, *iota, &params)?;
    let mut value = serde_json::to_value(&report).expect("report serialization");
    if let Some(cert) = &ctx.certificate {
        value["certificate"] = serde_json::to_value(cert).expect("certificate serialization");
    }
    Ok(vec![("json", {
        let mut s = serde_json::to_string_pretty(&value).unwrap();
        s.push('\n');
        s
    })])
}

fn check_pinching(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let report = simplicity::check_pinching(
        &ctx.cocycle,
        &ctx.fixed_point,
        block.uparam("t_samples", 4),
        block.uparam("n_steps", 4000),
        block.param("tol_gap", 5e-3),
    )?;
    Ok(vec![("json", to_json(&report))])
}

fn fiber_bunching(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let report = lincocycle::check_fiber_bunching(
        &ctx.cocycle,
        &ctx.spec,
        block.uparam("n_steps", 24),
        block.uparam("samples", 4),
        block.seed,
    )?;
    let mut csv = String::from("n,log_margin\n");
    for (n, v) in &report.log_curve {
        csv.push_str(&format!("{n},{v}\n"));
    }
    Ok(vec![("csv", csv), ("json", to_json(&report))])
}

fn openness_probe(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let (z, iota) = homoclinic(ctx, "openness_probe")?;
    let params = simplicity_params(block);
    let report = simplicity::openness_probe(
        &ctx.cocycle,
        &ctx.fixed_point,
        z,
        *iota,
        block.param("delta", 1e-4),
        block.uparam("trials", 20),
        block.seed,
        &params,
    )?;
    Ok(vec![("json", to_json(&report))])
}

fn backward_pushforward(
    ctx: &ScenarioContext,
    block: &ExperimentBlock,
) -> Result<Outputs, OpError> {
    let l = block.uparam("l", 1);
    let atoms = block.uparam("atoms", 50);
    let measures = block.uparam("measures", 3);
    let n_list: Vec<usize> = block
        .list_params
        .get("n_list")
        .map(|v| v.iter().map(|x| *x as usize).collect())
        .unwrap_or_else(|| vec![10, 25, 50, 100, 200, 350, 500]);
    let d = ctx.cocycle.dim();
    let x = symbolic::sample_point(&ctx.spec, derive_seed(block.seed, 0));
    let t = ctx.spec.sample_fiber(derive_seed(block.seed, 1));
    let point = FiberedPoint::new(x, t);

    let mut csv = String::from("measure,n,diameter\n");
    let mut limits = Vec::new();
    let mut final_diams = Vec::new();
    let mut first_small_n: Vec<Option<usize>> = Vec::new();
    for m_idx in 0..measures {
        let m0 = ustates::AtomicGrassMeasure::random_uniform(
            d,
            l,
            atoms,
            derive_seed(block.seed, 100 + m_idx as u64),
        )?;
        let stages = ustates::backward_pushforward_experiment(&ctx.cocycle, &point, &m0, &n_list)?;
        let mut small_at = None;
        for s in &stages {
            csv.push_str(&format!("{m_idx},{},{}\n", s.n, s.diameter));
            if small_at.is_none() && s.diameter < 1e-6 {
                small_at = Some(s.n);
            }
        }
        let last = stages.last().expect("nonempty n schedule");
        final_diams.push(last.diameter);
        limits.push(last.measure.medoid().clone());
        first_small_n.push(small_at);
    }
    let mut pairwise = Vec::new();
    for i in 0..limits.len() {
        for j in (i + 1)..limits.len() {
            pairwise.push(linalg::grass_distance(&limits[i], &limits[j])?);
        }
    }
    let n_max = *n_list.iter().max().unwrap_or(&0);
    let xi = ustates::section_xi(&ctx.cocycle, &point, l, n_max, 1e-6)?;
    let section_dists: Vec<f64> = limits
        .iter()
        .map(|lim| linalg::grass_distance(lim, &xi))
        .collect::<Result<_, _>>()?;
    Ok(vec![
        ("csv", csv),
        (
            "json",
            to_json(&json!({
                "rank": l,
                "atoms_per_measure": atoms,
                "final_diameters": final_diams,
                "first_n_below_1e-6": first_small_n,
                "pairwise_limit_distances": pairwise,
                "distance_to_section": section_dists,
            })),
        ),
    ])
}

fn center_exponent(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let n_steps = block.uparam("n_steps", 100_000);
    let samples = block.uparam("samples", 4);
    let threshold = block.param("threshold", 1e-8);
    let mut max_abs: f64 = 0.0;
    for s in 0..samples {
        let x = symbolic::sample_point(&ctx.spec, derive_seed(block.seed, s as u64));
        let t = ctx
            .spec
            .sample_fiber(derive_seed(block.seed, 500 + s as u64));
        let mut p = FiberedPoint::new(x, t);
        let mut log_sum = 0.0f64;
        for _ in 0..n_steps {
            log_sum += ctx.cocycle.family.derivative(&p.base, p.t).ln();
            p = skewprod::skew_step(&ctx.cocycle.family, &p, true);
        }
        max_abs = max_abs.max((log_sum / n_steps as f64).abs());
    }
    Ok(vec![(
        "json",
        to_json(&json!({
            "max_abs_center_exponent": max_abs,
            "threshold": threshold,
            "passes": max_abs < threshold,
            "n_steps": n_steps,
            "samples": samples,
        })),
    )])
}

fn induced_cocycle(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let symbol = block.uparam("cylinder_symbol", 0) as u8;
    let n_max = block.uparam("n_max", 40_000);
    let n_orbits = block.uparam("n_orbits", 8);
    let region = Region::cylinder_at_origin(symbol);
    let mut mean_returns = Vec::new();
    let mut induced_tops = Vec::new();
    let mut original_tops = Vec::new();
    for j in 0..n_orbits {
        let x = symbolic::sample_point(&ctx.spec, derive_seed(block.seed, j as u64));
        let t = ctx
            .spec
            .sample_fiber(derive_seed(block.seed, 700 + j as u64));
        let rep =
            spectrum::induced_cocycle(&ctx.cocycle, &region, &FiberedPoint::new(x, t), n_max)?;
        mean_returns.push(rep.mean_return_time);
        induced_tops.push(rep.induced_top_exponent);
        original_tops.push(rep.original_top_exponent);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let stderr = |v: &[f64]| {
        if v.len() < 2 {
            return 0.0;
        }
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 / v.len() as f64)
            .sqrt()
    };
    Ok(vec![(
        "json",
        to_json(&json!({
            "cylinder_symbol": symbol,
            "mean_return_time": mean(&mean_returns),
            "mean_return_stderr": stderr(&mean_returns),
            "induced_top_exponent": mean(&induced_tops),
            "induced_top_stderr": stderr(&induced_tops),
            "original_top_exponent": mean(&original_tops),
            "per_orbit_mean_returns": mean_returns,
        })),
    )])
}

fn gap_functional(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let l = block.uparam("l", 1);
    let n_max = block.uparam("n_max", 2000);
    let n_sections = block.uparam("n_sections", 80);
    let tol = block.param("tol", 1e-6);
    let x = symbolic::sample_point(&ctx.spec, derive_seed(block.seed, 0));
    let t = ctx.spec.sample_fiber(derive_seed(block.seed, 1));
    let point = FiberedPoint::new(x, t);
    let xi_u = ustates::invariant_line(&ctx.cocycle, &point, l, n_sections, tol)?;
    let eta_s = ustates::invariant_line(&ctx.cocycle, &point, l + 1, n_sections, tol)?;

    let mut csv = String::from("n,log_gap,rate\n");
    let mut n = 10usize;
    let mut last_rate = 0.0;
    while n <= n_max {
        let log_gap = spectrum::log_gap_functional(&ctx.cocycle, &point, n, &xi_u, &eta_s)?;
        last_rate = log_gap / n as f64;
        csv.push_str(&format!("{n},{log_gap},{last_rate}\n"));
        n *= 2;
    }
    Ok(vec![
        ("csv", csv),
        (
            "json",
            to_json(&json!({
                "split_index": l,
                "rate_at_n_max": last_rate,
            })),
        ),
    ])
}

fn mostly_neutral(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let report = skewprod::check_mostly_neutral(
        &ctx.cocycle.family,
        &ctx.spec,
        block.uparam("n_max", 1000),
        block.uparam("samples", 4),
        block.seed,
        block.param("c_config", 1.5),
    );
    Ok(vec![("json", to_json(&report))])
}

fn holder_norm(ctx: &ScenarioContext, block: &ExperimentBlock) -> Result<Outputs, OpError> {
    let est = lincocycle::holder_norm_estimate(
        &ctx.cocycle.gen,
        &ctx.spec,
        block.uparam("samples", 64),
        block.seed,
    )?;
    Ok(vec![(
        "json",
        to_json(&json!({ "holder_norm_estimate": est })),
    )])
}
