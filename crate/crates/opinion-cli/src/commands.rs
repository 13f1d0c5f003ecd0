use crate::config::ExperimentConfig;
use crate::output::{Outputs, Schema};
use crate::{Failure, Globals};
use opinion::dynamics::{
    default_step_cap, exponential_law_test, fit_arrhenius, hitting_times, spectral_gap_landscape,
    write_samples_csv, GateRecorder, HittingTimeSample, LanczosOptions, Metropolis, StateSet,
};
use opinion::landscape::{restricted_subspace, Landscape, TubeGenerator, DEFAULT_SITE_GUARD};
use opinion::lattice::{format_rational, parse_rational};
use opinion::paths::{
    build_reference_path, closed_form_phi, gamma_star, gate_family, metastable_set, sigma_a,
    stable_set, PathName,
};
use opinion::polyomino::{
    minimal_perimeter_table_with_caps, write_summary_csv, DEFAULT_AREA_CAP, DEFAULT_SIDE_CAP,
};
use opinion::verification;
use opinion::{Energy, ModelSpec, Regime, SpinConfiguration};
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

const GUARD_OVERRIDE_SITES: usize = 25;
const GUARD_OVERRIDE_AREA: usize = 16;
const GUARD_OVERRIDE_SIDE: usize = 12;

pub const PATH_HEADER: &[&str] = &["step", "energy", "is_saddle"];
pub const PATHS_SUMMARY_HEADER: &[&str] =
    &["path", "states", "max_elevation", "closed_form", "agrees"];
pub const POLYOMINO_HEADER: &[&str] = &[
    "side",
    "area",
    "winding",
    "min_perimeter",
    "minimizer_count",
    "classes",
];
pub const HISTOGRAM_HEADER: &[&str] = &["energy", "count"];
pub const STABILITY_HEADER: &[&str] = &["state", "energy", "stability_level", "config"];
pub const GAP_HEADER: &[&str] = &["beta", "gap", "rate", "residual", "iterations"];
pub const SAMPLES_HEADER: &[&str] = &[
    "replica",
    "beta",
    "steps",
    "censored",
    "gate_tag",
    "saddle_max",
];
pub const VERIFY_HEADER: &[&str] = &["criterion", "pass", "seconds", "explained", "summary"];

fn model(e: opinion::ModelError) -> Failure {
    match e {
        opinion::ModelError::Guard(msg) => Failure::guard(msg),
        opinion::ModelError::Spec(s) => Failure::spec(s.to_string()),
        other => Failure::other(other.to_string()),
    }
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::io(e.to_string())
}

fn describe(spec: &Arc<ModelSpec>, c: &SpinConfiguration) -> String {
    if c.words() == SpinConfiguration::all_minus(spec).words() {
        return "-1".into();
    }
    if c.words() == SpinConfiguration::all_plus(spec).words() {
        return "+1".into();
    }
    for l in 0..=spec.k {
        for p in 0..=spec.k {
            if sigma_a(spec, l, p).words() == c.words() {
                return format!("sigma_A({l},{p})");
            }
        }
    }
    c.to_rle()
}

#[derive(Serialize)]
struct Labelled {
    name: String,
    energy: String,
}

#[derive(Serialize)]
struct GateReport {
    from: String,
    to: String,
    gates: Vec<Vec<(String, usize)>>,
}

#[derive(Serialize)]
struct Analysis {
    spec: ModelSpec,
    regime: Regime,
    unsupported_reason: Option<String>,
    alpha_star: Option<String>,
    energy_minus: String,
    energy_plus: String,
    stable: Vec<Labelled>,
    metastable: Vec<Labelled>,
    gamma_star_height: Option<String>,
    barriers: Vec<(String, String)>,
    gates: Vec<GateReport>,
}

pub fn analyze(cfg: &ExperimentConfig, g: &Globals) -> Result<(), Failure> {
    let spec = Arc::new(cfg.spec()?);
    let regime = spec.classify_regime();
    let labelled = |cs: Vec<SpinConfiguration>| {
        cs.iter()
            .map(|c| Labelled {
                name: describe(&spec, c),
                energy: format_rational(&c.energy()),
            })
            .collect::<Vec<_>>()
    };
    let mut report = Analysis {
        spec: (*spec).clone(),
        regime,
        unsupported_reason: None,
        alpha_star: spec.alpha_star().map(|a| format_rational(&a)),
        energy_minus: format_rational(&spec.energy_all_minus()),
        energy_plus: format_rational(&spec.energy_all_plus()),
        stable: Vec::new(),
        metastable: Vec::new(),
        gamma_star_height: None,
        barriers: Vec::new(),
        gates: Vec::new(),
    };
    if regime == Regime::Unsupported {
        report.unsupported_reason = Some(
            spec.assumption_violation()
                .unwrap_or_else(|| "alpha lies in the excluded range n < alpha <= m".into()),
        );
    } else {
        report.stable = labelled(stable_set(&spec).map_err(model)?);
        report.metastable = labelled(metastable_set(&spec).map_err(model)?);
        let gs = gamma_star(&spec).map_err(model)?;
        report.gamma_star_height = Some(format_rational(&gs.height));
        report.barriers = gs
            .barrier_from
            .iter()
            .map(|(e, b)| (e.to_string(), b.clone()))
            .collect();
        report.gates = gate_family(&spec)
            .map_err(model)?
            .into_iter()
            .map(|row| GateReport {
                from: row.from.to_string(),
                to: row.to.to_string(),
                gates: row
                    .gates
                    .iter()
                    .map(|gate| gate.iter().map(|(f, s)| (f.to_string(), s.len())).collect())
                    .collect(),
            })
            .collect();
    }
    let mut out = Outputs::new(&g.out)?;
    out.json(
        "analyze.json",
        &["spec", "regime", "stable", "metastable", "gates"],
        &report,
    )?;
    out.finish("analyze", Some(&spec), g.seed.or(cfg.seed))
}

pub fn paths(cfg: &ExperimentConfig, g: &Globals) -> Result<(), Failure> {
    let spec = Arc::new(cfg.spec()?);
    let mut names = cfg.path_names()?;
    if names.is_empty() {
        names = PathName::ALL
            .into_iter()
            .filter(|p| p.valid_for(&spec))
            .collect();
    }
    if let Some(p) = names.iter().find(|p| !p.valid_for(&spec)) {
        return Err(Failure::spec(format!(
            "path {p} is not defined in regime {}",
            spec.classify_regime()
        )));
    }
    let mut out = Outputs::new(&g.out)?;
    let mut rows = Vec::new();
    for name in names {
        let path = build_reference_path(&spec, name).map_err(model)?;
        path.write_csv(out.create(&format!("path_{name}.csv"), Schema::Csv(PATH_HEADER))?)
            .map_err(model)?;
        let closed = closed_form_phi(&spec, name).map_err(model)?;
        rows.push([
            name.to_string(),
            path.len().to_string(),
            format_rational(&path.max_elevation),
            closed.map(|c| format_rational(&c)).unwrap_or_default(),
            closed.map_or(String::new(), |c| (c == path.max_elevation).to_string()),
        ]);
    }
    let mut w =
        csv::Writer::from_writer(out.create("paths.csv", Schema::Csv(PATHS_SUMMARY_HEADER))?);
    w.write_record(PATHS_SUMMARY_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::io(e.to_string()))?;
    drop(w);
    out.finish("paths", Some(&spec), g.seed.or(cfg.seed))
}

pub fn enumerate(cfg: &ExperimentConfig, g: &Globals) -> Result<(), Failure> {
    let sides = if cfg.sides.is_empty() {
        vec![4, 6, 8]
    } else {
        cfg.sides.clone()
    };
    let max_area = cfg.max_area.unwrap_or(12);
    let (area_cap, side_cap) = if g.guard_override {
        (GUARD_OVERRIDE_AREA, GUARD_OVERRIDE_SIDE)
    } else {
        (DEFAULT_AREA_CAP, DEFAULT_SIDE_CAP)
    };
    let mut rows = Vec::new();
    for side in sides {
        let table =
            minimal_perimeter_table_with_caps(max_area, side, area_cap, side_cap).map_err(model)?;
        rows.extend(
            table
                .into_iter()
                .skip(1)
                .flat_map(|r| r.into_iter().flatten()),
        );
    }
    let mut out = Outputs::new(&g.out)?;
    write_summary_csv(
        &rows,
        out.create("polyominoes.csv", Schema::Csv(POLYOMINO_HEADER))?,
    )
    .map_err(model)?;
    out.finish("enumerate", cfg.spec.as_ref(), g.seed.or(cfg.seed))
}

pub fn bruteforce(cfg: &ExperimentConfig, g: &Globals) -> Result<(), Failure> {
    let spec = Arc::new(cfg.spec()?);
    let land = match &cfg.tube {
        Some(t) => {
            let name: PathName = t
                .path
                .parse()
                .map_err(|e: opinion::ModelError| Failure::spec(e.to_string()))?;
            let window = match &t.window {
                serde_json::Value::Number(n) => n.as_i64().map(Energy::from_integer),
                serde_json::Value::String(s) => parse_rational(s).ok(),
                _ => None,
            }
            .ok_or_else(|| Failure::spec("tube window must be an integer or a \"p/q\" string"))?;
            let path = build_reference_path(&spec, name).map_err(model)?;
            restricted_subspace(&spec, &TubeGenerator::new(path.states, window), t.state_cap)
                .map_err(model)?
        }
        None => {
            let guard = if g.guard_override {
                GUARD_OVERRIDE_SITES
            } else {
                DEFAULT_SITE_GUARD
            };
            Landscape::enumerate_with_guard(&spec, guard).map_err(model)?
        }
    };
    let report = land.report();
    let mut out = Outputs::new(&g.out)?;
    let mut w = out.create(
        "landscape.json",
        Schema::Json(&["spec", "restricted", "state_count", "stable_set", "gamma_m"]),
    )?;
    writeln!(w, "{}", report.to_json()).map_err(|e| Failure::io(e.to_string()))?;
    drop(w);
    land.write_histogram_csv(out.create("histogram.csv", Schema::Csv(HISTOGRAM_HEADER))?)
        .map_err(model)?;
    let mut w =
        csv::Writer::from_writer(out.create("stability.csv", Schema::Csv(STABILITY_HEADER))?);
    w.write_record(STABILITY_HEADER).map_err(csv_err)?;
    for (v, level) in report.stability_levels.iter().enumerate() {
        w.write_record([
            v.to_string(),
            format_rational(&land.energy(v)),
            level.map_or_else(|| "inf".to_string(), |l| format_rational(&l)),
            land.config(v).to_pm_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::io(e.to_string()))?;
    drop(w);
    if !cfg.betas.is_empty() {
        let mut w =
            csv::Writer::from_writer(out.create("spectral_gap.csv", Schema::Csv(GAP_HEADER))?);
        w.write_record(GAP_HEADER).map_err(csv_err)?;
        for &beta in &cfg.betas {
            let r =
                spectral_gap_landscape(&land, beta, &LanczosOptions::default()).map_err(model)?;
            w.write_record([
                beta.to_string(),
                format!("{:e}", r.gap),
                (-r.gap.ln() / beta).to_string(),
                format!("{:e}", r.method_residual),
                r.iterations.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Failure::io(e.to_string()))?;
    }
    out.finish("bruteforce", Some(&spec), g.seed.or(cfg.seed))
}

#[derive(Serialize)]
struct BetaSummary {
    beta: f64,
    replicas: usize,
    censored: usize,
    mean_steps: f64,
    ks_statistic: Option<f64>,
    gate_counts: Option<std::collections::BTreeMap<String, usize>>,
}

#[derive(Serialize)]
struct SimulationSummary {
    spec: ModelSpec,
    start: String,
    target: String,
    seed: u64,
    step_caps: Vec<u64>,
    per_beta: Vec<BetaSummary>,
    arrhenius: Option<opinion::dynamics::ArrheniusReport>,
    censored_dominated: bool,
}

pub fn simulate(cfg: &ExperimentConfig, g: &Globals) -> Result<(), Failure> {
    let spec = Arc::new(cfg.spec()?);
    let seed = g
        .seed
        .or(cfg.seed)
        .ok_or_else(|| Failure::spec("simulate needs a seed (--seed or \"seed\" in the config)"))?;
    if cfg.betas.is_empty() {
        return Err(Failure::spec("simulate needs at least one beta"));
    }
    let supported = spec.classify_regime() != Regime::Unsupported;
    let default_row = if supported {
        gate_family(&spec).map_err(model)?.into_iter().next()
    } else {
        None
    };
    let start = match (&cfg.start, &default_row) {
        (Some(s), _) => ExperimentConfig::endpoint(s)?,
        (None, Some(r)) => r.from,
        (None, None) => {
            return Err(Failure::spec(
                "no start endpoint given and none tabulated for this spec",
            ))
        }
    };
    let target = match (&cfg.target, &default_row) {
        (Some(s), _) => ExperimentConfig::endpoint(s)?,
        (None, Some(r)) => r.to,
        (None, None) => {
            return Err(Failure::spec(
                "no target endpoint given and none tabulated for this spec",
            ))
        }
    };
    let barrier = if supported {
        gamma_star(&spec).map_err(model)?.barrier(start)
    } else {
        None
    };
    let cap_for = |beta: f64| -> Result<u64, Failure> {
        match (cfg.step_cap, barrier) {
            (Some(c), _) => Ok(c),
            (None, Some(b)) => Ok(default_step_cap(&spec, b, beta)),
            (None, None) => Err(Failure::spec(format!(
                "no barrier tabulated from {start}; set step_cap"
            ))),
        }
    };
    let recorder = if cfg.gates {
        let row = gate_family(&spec)
            .map_err(model)?
            .into_iter()
            .find(|r| r.from == start && r.to == target)
            .ok_or_else(|| Failure::spec(format!("no gate row for {start} -> {target}")))?;
        Some(GateRecorder::for_row(&spec, &row).map_err(model)?)
    } else {
        None
    };
    let replicas = cfg.replicas.unwrap_or(100);
    let start_state = &start.states(&spec)[0];
    let targets = StateSet::new(target.states(&spec));
    let mut groups: Vec<Vec<HittingTimeSample>> = Vec::new();
    let mut caps = Vec::new();
    for (i, &beta) in cfg.betas.iter().enumerate() {
        let kernel = Metropolis::new(&spec, beta).map_err(model)?;
        let cap = cap_for(beta)?;
        caps.push(cap);
        let run_seed = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        groups.push(hitting_times(
            &kernel,
            start_state,
            &targets,
            cap,
            recorder.as_ref(),
            run_seed,
            replicas,
        ));
    }
    let threshold = cfg.ks_threshold.unwrap_or(0.1);
    let per_beta: Vec<BetaSummary> = groups
        .iter()
        .zip(&cfg.betas)
        .map(|(samples, &beta)| {
            let steps: Vec<u64> = samples
                .iter()
                .filter(|s| !s.censored)
                .map(|s| s.steps)
                .collect();
            let gate_counts = recorder.as_ref().map(|_| {
                let mut m = std::collections::BTreeMap::new();
                for s in samples.iter().filter(|s| !s.censored) {
                    *m.entry(s.gate_crossed.clone().unwrap_or_default())
                        .or_insert(0) += 1;
                }
                m
            });
            BetaSummary {
                beta,
                replicas: samples.len(),
                censored: samples.len() - steps.len(),
                mean_steps: samples.iter().map(|s| s.steps as f64).sum::<f64>()
                    / samples.len().max(1) as f64,
                ks_statistic: exponential_law_test(&steps, threshold)
                    .ok()
                    .map(|k| k.statistic),
                gate_counts,
            }
        })
        .collect();
    let censored_dominated = per_beta.iter().any(|b| 2 * b.censored > b.replicas);
    let arrhenius = if cfg.betas.len() >= 3 && replicas >= 2 {
        fit_arrhenius(&groups, seed).ok()
    } else {
        None
    };
    let mut out = Outputs::new(&g.out)?;
    let all: Vec<HittingTimeSample> = groups.into_iter().flatten().collect();
    write_samples_csv(
        out.create("samples.csv", Schema::Csv(SAMPLES_HEADER))?,
        &all,
    )
    .map_err(model)?;
    let summary = SimulationSummary {
        spec: (*spec).clone(),
        start: start.to_string(),
        target: target.to_string(),
        seed,
        step_caps: caps,
        per_beta,
        arrhenius,
        censored_dominated,
    };
    out.json(
        "simulation.json",
        &["spec", "seed", "per_beta", "censored_dominated"],
        &summary,
    )?;
    out.finish("simulate", Some(&spec), Some(seed))?;
    if censored_dominated {
        return Err(Failure::censored("more than half of the replicas hit the step cap at some beta; the estimates are cap-dominated"));
    }
    Ok(())
}

pub fn verify(cfg: &ExperimentConfig, g: &Globals) -> Result<(), Failure> {
    let seed = g.seed.or(cfg.seed).unwrap_or(verification::DEFAULT_SEED);
    let ids: Vec<&str> = if cfg.criteria.is_empty() {
        verification::IDS.to_vec()
    } else {
        cfg.criteria.iter().map(String::as_str).collect()
    };
    let mut out = Outputs::new(&g.out)?;
    let mut w = csv::Writer::from_writer(out.create("verify.csv", Schema::Csv(VERIFY_HEADER))?);
    w.write_record(VERIFY_HEADER).map_err(csv_err)?;
    let mut failed = Vec::new();
    for id in ids {
        let check = verification::run(&[id], seed)
            .map_err(|e| Failure::spec(e.to_string()))?
            .remove(0);
        println!("{}", check.line());
        if !check.pass {
            failed.push(check.id);
        }
        w.write_record([
            check.id.to_string(),
            check.pass.to_string(),
            format!("{:.1}", check.seconds),
            check.explained.clone().unwrap_or_default(),
            check.summary.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::io(e.to_string()))?;
    drop(w);
    out.finish("verify", cfg.spec.as_ref(), Some(seed))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::verify(format!("failed: {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use opinion::paths::Endpoint;

    #[test]
    fn describes_named_states() {
        let spec = Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap());
        assert_eq!(describe(&spec, &SpinConfiguration::all_minus(&spec)), "-1");
        assert_eq!(describe(&spec, &sigma_a(&spec, 1, 0)), "sigma_A(1,0)");
    }

    #[test]
    fn endpoints_parse() {
        assert_eq!(ExperimentConfig::endpoint("+1").unwrap(), Endpoint::AllPlus);
        assert!(ExperimentConfig::endpoint("zero").is_err());
    }
}
