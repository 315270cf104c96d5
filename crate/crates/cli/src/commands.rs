use std::fmt::Write as _;

use anyhow::{bail, Result};
use conformity::asch::{expression_ratio, AschRun};
use conformity::dynamics::Snapshot;
use conformity::export::{gnuplot_script, matrix_csv, series_csv, trajectory_csv, Series};
use conformity::prelude::*;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{config_hash, resolve, Format, RunConfig, SweepConfig};
use crate::output::Artifacts;

#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config_hash: String,
    config: &'a C,
}

fn provenance<C: Serialize>(cfg: &C, seed: u64) -> Provenance<'_, C> {
    Provenance {
        tool: "conformity",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_hash: config_hash(cfg),
        config: cfg,
    }
}

#[derive(Serialize)]
struct SnapshotRow<'a> {
    t: usize,
    y: &'a [f64],
    y_hat: &'a [f64],
}

fn trajectory_json(trajectory: &[Snapshot]) -> Vec<SnapshotRow<'_>> {
    trajectory
        .iter()
        .map(|s| SnapshotRow {
            t: s.t,
            y: s.y.as_slice(),
            y_hat: s.y_hat.as_slice(),
        })
        .collect()
}

fn push_trajectory(out: &mut Artifacts, result: &SimulationResult, format: Format, title: &str) {
    let n = result.final_state.n();
    match format {
        Format::Csv => out.text("trajectory.csv", trajectory_csv(&result.trajectory)),
        Format::Json => out.json("trajectory.json", &trajectory_json(&result.trajectory)),
    }
    out.text("private.csv", series_csv(&result.trajectory, Series::Private));
    out.text("expressed.csv", series_csv(&result.trajectory, Series::Expressed));
    out.text("plot.gp", gnuplot_script("private.csv", "expressed.csv", n, title));
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<Artifacts> {
    let inst = resolve(cfg)?;
    let result = simulate(&inst.y0, &inst.net, &inst.params, cfg.mode, cfg.model, cfg.stop)?;
    let mut out = Artifacts::default();
    push_trajectory(&mut out, &result, cfg.format, "opinions");
    out.json(
        "metadata.json",
        &json!({
            "provenance": provenance(cfg, cfg.seed),
            "n": inst.net.n(),
            "outcome": result.outcome,
            "iterations": result.iterations,
            "final_residual": result.residuals.last(),
            "final": {
                "y": vec_of(result.final_state.y()),
                "y_hat": vec_of(result.final_state.y_hat()),
            },
        }),
    );
    Ok(out)
}

pub fn steady_cmd(cfg: &RunConfig) -> Result<Artifacts> {
    if cfg.model != Model::Continuous {
        bail!("steady states are only defined for the continuous model");
    }
    let inst = resolve(cfg)?;
    let mut out = Artifacts::default();
    if inst.params.lambda().iter().all(|&l| l == 1.0) {
        // the R, S operators do not exist; report the consensus instead
        let alpha = consensus_value(&inst.net, &inst.params, cfg.mode, &inst.y0)?;
        out.json(
            "consensus.json",
            &json!({ "provenance": provenance(cfg, cfg.seed), "consensus_value": alpha }),
        );
        return Ok(out);
    }
    let sys = steady_state(&inst.net, &inst.params, cfg.mode)?;
    let (y_star, y_hat_star) = limits(&sys, &inst.y0)?;
    let report = discrepancy_report(&inst.y0, &sys)?;
    out.json(
        "operators.json",
        &json!({
            "provenance": provenance(cfg, cfg.seed),
            "operators": sys.to_dump(),
            "y_star": vec_of(&y_star),
            "y_hat_star": vec_of(&y_hat_star),
        }),
    );
    out.json(
        "report.json",
        &json!({ "provenance": provenance(cfg, cfg.seed), "report": report }),
    );
    if cfg.format == Format::Csv {
        out.text("R.csv", matrix_csv(&sys.r));
        out.text("S.csv", matrix_csv(&sys.s));
        let mut lim = String::from("agent,y0,y_star,y_hat_star\n");
        for i in 0..inst.net.n() {
            writeln!(lim, "{i},{},{},{}", inst.y0[i], y_star[i], y_hat_star[i]).unwrap();
        }
        out.text("limits.csv", lim);
        out.text("discrepancy.csv", report.discrepancy_csv());
    }
    Ok(out)
}

/// Options of the `asch` command beyond the scenario itself.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AschOptions {
    /// Grid points per axis for a (lambda1, phi1) grid; `None` runs one scenario.
    pub grid: Option<usize>,
    /// Thresholds to compare across seeds.
    pub taus: Vec<f64>,
    pub seeds: u64,
}

#[derive(Serialize)]
struct AschInvocation<'a> {
    scenario: &'a AschScenario,
    options: &'a AschOptions,
}

fn model_label(m: AschModel) -> String {
    match m {
        AschModel::Continuous => "continuous".into(),
        AschModel::Threshold(t) => format!("threshold:{t}"),
    }
}

/// Closed forms apply to the first variant of the continuous model with the
/// global public opinion.
fn closed_forms(spec: &AschScenario) -> Result<Option<(f64, f64)>> {
    if spec.variant != Variant::First || spec.model != AschModel::Continuous || spec.mode != PublicOpinion::Global {
        return Ok(None);
    }
    let y = closed_form_private(spec.lambda1, spec.resolved_w11())?;
    Ok(Some((y, closed_form_expressed(spec.phi1, spec.n, y)?)))
}

fn curves(n: usize) -> String {
    let mut s = String::from("x,f,g2,g4");
    write!(s, ",g{n}").unwrap();
    s.push('\n');
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        writeln!(
            s,
            "{x},{},{},{},{}",
            stubbornness_curve(x),
            expression_ratio(x, 2),
            expression_ratio(x, 4),
            expression_ratio(x, n)
        )
        .unwrap();
    }
    s
}

pub fn asch_cmd(spec: &AschScenario, opts: &AschOptions, stop: StopCriteria) -> Result<Artifacts> {
    let mut specs = Vec::new();
    match opts.grid {
        Some(k) if k < 1 => bail!("grid needs at least one point per axis"),
        Some(k) => {
            let axis = |i: usize| (i + 1) as f64 / (k + 1) as f64;
            for a in 0..k {
                for b in 0..k {
                    specs.push(AschScenario {
                        lambda1: axis(a),
                        phi1: axis(b),
                        ..*spec
                    });
                }
            }
        }
        None => specs.push(*spec),
    }
    let runs: Vec<AschRun> = specs
        .par_iter()
        .map(|s| run_scenario(s, stop))
        .collect::<conformity::Result<_>>()?;

    let mut class = String::from("lambda1,phi1,w11,variant,model,seed,y1_star,yhat1_star,classification\n");
    let mut cmp = String::from("lambda1,phi1,w11,y1_sim,y1_closed,yhat1_sim,yhat1_closed\n");
    for (s, r) in specs.iter().zip(&runs) {
        let variant = match s.variant {
            Variant::First => "first",
            Variant::Second => "second",
        };
        let label = serde_json::to_value(r.classification)?;
        writeln!(
            class,
            "{},{},{},{variant},{},{},{},{},{}",
            s.lambda1,
            s.phi1,
            s.resolved_w11(),
            model_label(s.model),
            s.seed,
            r.y1_star,
            r.yhat1_star,
            label.as_str().unwrap_or_default()
        )
        .unwrap();
        let (yc, yhc) = match closed_forms(s)? {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            cmp,
            "{},{},{},{},{yc},{},{yhc}",
            s.lambda1,
            s.phi1,
            s.resolved_w11(),
            r.y1_star,
            r.yhat1_star
        )
        .unwrap();
    }

    let mut out = Artifacts::default();
    out.text("classification.csv", class);
    out.text("comparison.csv", cmp);
    out.text("curves.csv", curves(spec.n));
    if opts.grid.is_none() {
        push_trajectory(&mut out, &runs[0].result, Format::Csv, "asch");
    }

    let mut threshold_summary = None;
    if !opts.taus.is_empty() {
        let mut table = String::from("seed");
        for t in &opts.taus {
            write!(table, ",tau_{t}").unwrap();
        }
        table.push('\n');
        let mut differing = 0;
        for seed in 0..opts.seeds {
            let row: Vec<f64> = opts
                .taus
                .iter()
                .map(|&t| {
                    let s = AschScenario {
                        model: AschModel::Threshold(t),
                        seed: spec.seed.wrapping_add(seed),
                        ..*spec
                    };
                    run_scenario(&s, stop).map(|r| r.yhat1_star)
                })
                .collect::<conformity::Result<_>>()?;
            if row.iter().any(|&v| v != row[0]) {
                differing += 1;
            }
            write!(table, "{}", spec.seed.wrapping_add(seed)).unwrap();
            for v in &row {
                write!(table, ",{v}").unwrap();
            }
            table.push('\n');
        }
        out.text("thresholds.csv", table);
        threshold_summary = Some(json!({ "seeds": opts.seeds, "differing_outcomes": differing }));
    }

    let invocation = AschInvocation {
        scenario: spec,
        options: opts,
    };
    out.json(
        "metadata.json",
        &json!({
            "provenance": provenance(&invocation, spec.seed),
            "scenarios": runs.len(),
            "thresholds": threshold_summary,
        }),
    );
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct InstanceSummary {
    index: usize,
    seed: u64,
    n: usize,
    flagged: usize,
    inequalities_hold: bool,
    bound_violated: Option<bool>,
    tau_exceeds_kappa: Option<bool>,
}

pub fn sweep_cmd(cfg: &SweepConfig) -> Result<Artifacts> {
    let presets = cfg.shapes.unwrap_or_default();
    let span = cfg.n_max - cfg.n_min + 1;
    let rows: Vec<InstanceSummary> = (0..cfg.instances)
        .into_par_iter()
        .map(|k| -> conformity::Result<InstanceSummary> {
            let n = cfg.n_min + k % span;
            let seed = cfg.seed.wrapping_add(k as u64);
            let inst = random_instance(n, seed, &presets)?;
            let sys = steady_state(&inst.net, &inst.params, cfg.mode)?;
            let rep = discrepancy_report(&inst.y0, &sys)?;
            Ok(InstanceSummary {
                index: k,
                seed,
                n,
                flagged: rep.flagged_agents.len(),
                inequalities_hold: rep.inequalities_hold(),
                bound_violated: rep.private_gap_lower_bound.map(|b| b > rep.v_y_star),
                tau_exceeds_kappa: rep.kappa.map(|k| rep.tau_s > k),
            })
        })
        .collect::<conformity::Result<_>>()?;

    let p = rows.len();
    let q = rows.iter().filter(|r| r.flagged > 0).count();
    let passes = rows.iter().filter(|r| r.inequalities_hold).count();
    let count = |f: fn(&InstanceSummary) -> Option<bool>| -> Option<usize> {
        let v: Vec<bool> = rows.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().filter(|&&b| b).count())
    };
    let mut table = String::from("index,seed,n,flagged,inequalities_hold,bound_violated,tau_exceeds_kappa\n");
    let opt = |b: Option<bool>| b.map_or(String::new(), |b| b.to_string());
    for r in &rows {
        writeln!(
            table,
            "{},{},{},{},{},{},{}",
            r.index,
            r.seed,
            r.n,
            r.flagged,
            r.inequalities_hold,
            opt(r.bound_violated),
            opt(r.tau_exceeds_kappa)
        )
        .unwrap();
    }
    let mut out = Artifacts::default();
    out.json(
        "summary.json",
        &json!({
            "provenance": provenance(cfg, cfg.seed),
            "p": p,
            "q": q,
            "q_over_p": q as f64 / p as f64,
            "inequality_pass_rate": passes as f64 / p as f64,
            "bound_violations": count(|r| r.bound_violated),
            "tau_exceeds_kappa": count(|r| r.tau_exceeds_kappa),
        }),
    );
    out.text("instances.csv", table);
    Ok(out)
}
