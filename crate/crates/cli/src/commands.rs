use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use rpf_core::axioms::fixtures::{CappedLinear, ConstantShare, PDependentExponent, PlantedJump};
use rpf_core::axioms::{audit, AuditConfig, Axiom, BlackBoxCsf, RpfCsf, TabulatedCsf};
use rpf_core::design::{
    default_k_grid, dissipation_from_equilibrium, dissipation_threshold, effort_curve,
    figure1_curve, figure1_value, optimal_k, proposition5_check, refine_argmax,
    rent_dissipation_ratio, write_curve_csv, DesignSpec,
};
use rpf_core::equilibrium::{self, ContestSpec};
use rpf_core::monte_carlo::{
    self, convergence_table, write_atoms_csv, write_convergence_csv, SimConfig,
};
use rpf_core::{solve_cutoff, EffortMeasure, NoiseDistribution, PerformanceFamily};

use crate::output::{CliError, CliResult, Outcome};
use crate::Common;

fn spec_path(c: &Common) -> CliResult<&Path> {
    c.spec
        .as_deref()
        .ok_or_else(|| CliError::Input("--spec <FILE> is required".into()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> rpf_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn note_unused(c: &Common, seed: bool, tol: bool) {
    if c.seed.is_some() && !seed {
        eprintln!("note: --seed has no effect on this command");
    }
    if c.tol.is_some() && !tol {
        eprintln!("note: --tol has no effect on this command");
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CutoffInput {
    family: PerformanceFamily,
    p: EffortMeasure,
    k: f64,
}

pub fn cutoff(c: &Common) -> CliResult<Outcome> {
    note_unused(c, false, false);
    let path = spec_path(c)?;
    let input: CutoffInput = read_json(path)?;
    let res = solve_cutoff(&input.family, &input.p, input.k)?;
    let mut out = Outcome::json(&json!({
        "k": input.k,
        "total_mass": input.p.total_mass(),
        "s": res.s,
        "residual": res.residual,
        "iterations": res.iterations,
    }))?;
    out.inputs.push(path.to_path_buf());
    Ok(out)
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CsfInput {
    Rpf {
        family: PerformanceFamily,
    },
    ConstantShare,
    CappedLinear,
    PDependentExponent,
    PlantedJump {
        family: PerformanceFamily,
        #[serde(default = "unit")]
        at: f64,
        size: f64,
    },
    /// Paths are relative to the spec file.
    Tabulated {
        data: PathBuf,
        measures: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AxiomsInput {
    k: f64,
    csf: CsfInput,
    #[serde(default)]
    axioms: Option<Vec<Axiom>>,
    #[serde(default)]
    config: AuditConfig,
}

pub fn axioms(c: &Common) -> CliResult<Outcome> {
    let path = spec_path(c)?;
    let input: AxiomsInput = read_json(path)?;
    let mut config = input.config;
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    if let Some(tol) = c.tol {
        config.tol = tol;
    }
    let k = input.k;
    let mut inputs = vec![path.to_path_buf()];
    let csf: Box<dyn BlackBoxCsf + Send> = match input.csf {
        CsfInput::Rpf { family } => Box::new(RpfCsf::new(family, k)?),
        CsfInput::ConstantShare => Box::new(ConstantShare { k }),
        CsfInput::CappedLinear => Box::new(CappedLinear { k }),
        CsfInput::PDependentExponent => Box::new(PDependentExponent { k }),
        CsfInput::PlantedJump { family, at, size } => Box::new(PlantedJump {
            base: RpfCsf::new(family, k)?,
            at,
            size,
        }),
        CsfInput::Tabulated { data, measures } => {
            let base = path.parent().unwrap_or(Path::new("."));
            let (data, measures) = (base.join(data), base.join(measures));
            let tab = TabulatedCsf::from_paths(k, &data, &measures)?;
            config.measure_pool = Some(tab.measures().to_vec());
            config.effort_range = tab
                .effort_range()
                .ok_or_else(|| CliError::Input(format!("{}: no rows", data.display())))?;
            inputs.extend([data, measures]);
            Box::new(tab)
        }
    };
    let which = input.axioms.unwrap_or_else(|| Axiom::ALL.to_vec());
    let report = audit(&csf, &config, &which)?;
    let mut out = Outcome::json(&report)?;
    out.exit = if report.all_pass() { 0 } else { 1 };
    out.report = Some(report.render_table());
    out.inputs = inputs;
    Ok(out)
}

pub fn equilibrium(c: &Common) -> CliResult<Outcome> {
    note_unused(c, false, false);
    let path = spec_path(c)?;
    let spec: ContestSpec = read_json(path)?;
    let r = equilibrium::solve(&spec)?;
    let mut value = serde_json::to_value(r).map_err(|e| CliError::Input(e.to_string()))?;
    let mut out_report = None;
    if !r.soc_pass {
        let msg = format!(
            "second-order condition fails (margin {:.6e}); the first-order point may not be an equilibrium",
            r.soc_margin
        );
        value["warning"] = json!(msg);
        out_report = Some(format!("warning: {msg}\n"));
    }
    let mut out = Outcome::json(&value)?;
    out.report = out_report;
    out.inputs.push(path.to_path_buf());
    Ok(out)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GridInput {
    #[serde(default)]
    k_grid: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct CurveSummary {
    file: String,
    noise: String,
    argmax_k: f64,
    max_value: f64,
    boundary: bool,
    strictly_decreasing: bool,
}

pub fn figure1(c: &Common) -> CliResult<Outcome> {
    note_unused(c, false, false);
    if c.out.is_none() {
        return Err(CliError::Input("--out <DIR> is required".into()));
    }
    let mut inputs = Vec::new();
    let grid = match &c.spec {
        Some(p) => {
            inputs.push(p.clone());
            read_json::<GridInput>(p)?
                .k_grid
                .unwrap_or_else(default_k_grid)
        }
        None => default_k_grid(),
    };
    let panels = [
        ("normal.csv", NoiseDistribution::normal()),
        ("t3.csv", NoiseDistribution::student_t(3.0)?),
        ("t1.csv", NoiseDistribution::student_t(1.0)?),
    ];
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for (file, noise) in panels {
        let curve = figure1_curve(&noise, &grid)?;
        let best = refine_argmax(&curve, |k| figure1_value(&noise, k))?;
        summary.push(CurveSummary {
            file: file.to_string(),
            noise: noise.label(),
            argmax_k: best.k_star,
            max_value: best.e_star,
            boundary: best.boundary,
            strictly_decreasing: curve.windows(2).all(|w| w[1].1 < w[0].1),
        });
        files.push((
            file.to_string(),
            csv_bytes(|b| write_curve_csv(b, "value", &curve))?,
        ));
    }
    let mut out = Outcome::json(&json!({ "points": grid.len(), "curves": summary }))?;
    out.files = files;
    out.inputs = inputs;
    Ok(out)
}

pub fn design(c: &Common) -> CliResult<Outcome> {
    note_unused(c, false, false);
    let path = spec_path(c)?;
    let spec: DesignSpec = read_json(path)?;
    spec.validate()?;
    let curve = effort_curve(&spec)?;
    let best = optimal_k(&spec)?;
    let upper: Vec<f64> = spec.k_grid.iter().copied().filter(|k| *k >= 0.5).collect();
    let monotone = if upper.len() >= 2 {
        Some(proposition5_check(&DesignSpec {
            k_grid: upper,
            ..spec.clone()
        })?)
    } else {
        None
    };
    let mut out = Outcome::json(&json!({
        "B": spec.b,
        "noise": spec.noise.label(),
        "optimal": best,
        "monotone_effort": monotone,
        "curve": curve,
    }))?;
    out.files.push((
        "effort_curve.csv".into(),
        csv_bytes(|b| write_curve_csv(b, "e_star", &curve))?,
    ));
    out.inputs.push(path.to_path_buf());
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DissipationInput {
    #[serde(rename = "A")]
    a: f64,
    k: f64,
    noise: NoiseDistribution,
    #[serde(rename = "V", default)]
    v: Option<f64>,
}

pub fn dissipation(c: &Common) -> CliResult<Outcome> {
    note_unused(c, false, false);
    let path = spec_path(c)?;
    let input: DissipationInput = read_json(path)?;
    let threshold = dissipation_threshold(input.a, input.k, &input.noise)?;
    let mut value = json!({ "A": input.a, "k": input.k, "threshold_V": threshold });
    if let Some(v) = input.v {
        let ratio = rent_dissipation_ratio(v, input.a, input.k, &input.noise)?;
        value["V"] = json!(v);
        value["ratio"] = json!(ratio);
        value["ratio_from_equilibrium"] = json!(dissipation_from_equilibrium(
            v,
            input.a,
            input.k,
            &input.noise
        )?);
        value["regime"] = json!(if ratio < 1.0 {
            "under"
        } else if ratio > 1.0 {
            "over"
        } else {
            "exact"
        });
    }
    let mut out = Outcome::json(&value)?;
    out.inputs.push(path.to_path_buf());
    Ok(out)
}

#[derive(Deserialize)]
struct SimulateInput {
    #[serde(flatten)]
    config: SimConfig,
    /// Population sizes for a convergence table.
    #[serde(default)]
    convergence: Option<Vec<usize>>,
}

pub fn simulate(c: &Common) -> CliResult<Outcome> {
    note_unused(c, true, false);
    let path = spec_path(c)?;
    let mut input: SimulateInput = read_json(path)?;
    if let Some(seed) = c.seed {
        input.config.seed = seed;
    }
    let res = monte_carlo::simulate(&input.config)?;
    let mut files = vec![(
        "atoms.csv".to_string(),
        csv_bytes(|b| write_atoms_csv(b, &res))?,
    )];
    let table = match &input.convergence {
        Some(sizes) => {
            let t = convergence_table(&input.config, sizes)?;
            files.push((
                "convergence.csv".into(),
                csv_bytes(|b| write_convergence_csv(b, &t))?,
            ));
            Some(t)
        }
        None => None,
    };
    let mut out = Outcome::json(&json!({
        "n": res.n,
        "k": res.k,
        "seed": res.seed,
        "replications": res.replications.len(),
        "winners": res.replications.iter().map(|r| r.winners).collect::<Vec<_>>(),
        "atoms": res.atoms,
        "model_cutoff": res.model_cutoff,
        "mean_cutoff": res.mean_cutoff,
        "mean_abs_err": res.mean_abs_err,
        "convergence": table,
    }))?;
    out.files = files;
    out.inputs.push(path.to_path_buf());
    Ok(out)
}
