//! Scenario payloads. Every scenario computes all of its files in memory;
//! nothing touches the disk until the whole run has succeeded.

use barypot::analysis::{family_sweep, growth_slope, off_node, pointwise_growth_rate};
use barypot::barycentric::log_lebesgue_function;
use barypot::fh::{fh_report_csv, pole_field, poles_csv};
use barypot::{
    complex_grid_sample, fh_potential_report, fh_ratio_growth, fh_weights, lebesgue_constant, lebesgue_function, sweep,
    weights_from_nodes, DiscretePotential64, ExternalField64, FHConfig, Family64, NodeSet64, Normalization, Sweep,
    WeightSet64,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ContourConfig, Experiment, FhModeName, Scenario};
use crate::error::CliError;

/// One output file, path relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub path: String,
    pub contents: String,
}

impl Output {
    fn csv(path: impl Into<String>, contents: String) -> Self {
        Self {
            path: path.into(),
            contents,
        }
    }

    fn json(path: impl Into<String>, value: &Value) -> Self {
        let mut contents = serde_json::to_string_pretty(value).expect("json values always serialize");
        contents.push('\n');
        Self {
            path: path.into(),
            contents,
        }
    }

    /// Data rows for CSV files, `None` for JSON.
    pub fn rows(&self) -> Option<usize> {
        self.path
            .ends_with(".csv")
            .then(|| self.contents.lines().count().saturating_sub(1))
    }
}

type Res<T> = Result<T, CliError>;

/// `{:.16e}` with `inf`, `-inf` and `nan` literals.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number, or `null` when not finite.
fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn per_n(n: usize, file: &str) -> String {
    format!("n{n}/{file}")
}

pub fn run(exp: &Experiment) -> Res<Vec<Output>> {
    match exp.scenario {
        Scenario::Nodes => nodes(exp),
        Scenario::Weights => weights(exp),
        Scenario::Lebesgue => lebesgue(exp),
        Scenario::Sweep => sweep_scenario(exp),
        Scenario::Contour => contour(exp),
        Scenario::Fh => fh(exp),
        Scenario::ReproFig1 => repro_fig1(exp),
        Scenario::ReproFig4 => repro_fig4(exp),
        Scenario::ReproFig6 => repro_fig6(exp),
    }
}

fn nodes_csv(nodes: &NodeSet64) -> String {
    let mut s = String::from("i,x\n");
    for (i, x) in nodes.nodes().iter().enumerate() {
        s.push_str(&format!("{i},{}\n", num(*x)));
    }
    s
}

fn weights_csv(nodes: &NodeSet64, ws: &WeightSet64) -> String {
    let mut s = String::from("k,x,sign,log_abs_w\n");
    for (k, ((x, sign), l)) in nodes.nodes().iter().zip(ws.signs()).zip(ws.log_abs()).enumerate() {
        s.push_str(&format!("{k},{},{sign},{}\n", num(*x), num(*l)));
    }
    s
}

/// Nodes and weights for every `n` of the config.
fn instances(exp: &Experiment) -> Res<Vec<(NodeSet64, WeightSet64, ExternalField64)>> {
    let fam = exp.node_family();
    exp.n_list
        .par_iter()
        .map(|&n| {
            let nodes = fam.nodes(n)?;
            let field = exp.field_at(n);
            let ws = weights_from_nodes(&nodes, &field, exp.normalization)?;
            Ok((nodes, ws, field))
        })
        .collect()
}

fn nodes(exp: &Experiment) -> Res<Vec<Output>> {
    let fam = exp.node_family();
    exp.n_list
        .iter()
        .map(|&n| Ok(Output::csv(per_n(n, "nodes.csv"), nodes_csv(&fam.nodes(n)?))))
        .collect()
}

fn weights(exp: &Experiment) -> Res<Vec<Output>> {
    Ok(instances(exp)?
        .iter()
        .map(|(nodes, ws, _)| Output::csv(per_n(nodes.n(), "weights.csv"), weights_csv(nodes, ws)))
        .collect())
}

/// Nodes plus `samples_per_gap` equally spaced points inside every gap
/// (including the end gaps when the nodes stop short of ±1).
fn lebesgue_grid(nodes: &NodeSet64, samples_per_gap: usize) -> Vec<f64> {
    let xs = nodes.nodes();
    let mut cuts = Vec::with_capacity(xs.len() + 2);
    if xs[0] > -1.0 {
        cuts.push(-1.0);
    }
    cuts.extend_from_slice(xs);
    if xs[xs.len() - 1] < 1.0 {
        cuts.push(1.0);
    }
    let mut grid = Vec::with_capacity(cuts.len() * (samples_per_gap + 1));
    for w in cuts.windows(2) {
        for j in 0..=samples_per_gap {
            grid.push(w[0] + (w[1] - w[0]) * j as f64 / (samples_per_gap + 1) as f64);
        }
    }
    grid.push(cuts[cuts.len() - 1]);
    grid
}

fn lebesgue(exp: &Experiment) -> Res<Vec<Output>> {
    let mut out = Vec::new();
    for (nodes, ws, _) in instances(exp)? {
        let n = nodes.n();
        let report = lebesgue_constant(&nodes, &ws, exp.samples_per_gap)?;
        let grid = lebesgue_grid(&nodes, exp.samples_per_gap);
        let values = grid
            .par_iter()
            .map(|&x| lebesgue_function(&nodes, &ws, x))
            .collect::<barypot::Result<Vec<f64>>>()?;
        let mut csv = String::from("x,lambda\n");
        for (x, l) in grid.iter().zip(&values) {
            csv.push_str(&format!("{},{}\n", num(*x), num(*l)));
        }
        out.push(Output::csv(per_n(n, "lebesgue.csv"), csv));
        out.push(Output::json(
            per_n(n, "lebesgue.json"),
            &json!({
                "n": n,
                "lambda": jnum(report.lambda),
                "log_lambda": jnum(report.log_lambda),
                "argmax_x": jnum(report.argmax_x),
            }),
        ));
    }
    Ok(out)
}

fn slope_or_null(ns: &[usize], logs: &[f64]) -> Value {
    growth_slope(ns, logs).map(|g| jnum(g.slope)).unwrap_or(Value::Null)
}

/// Summary of a sweep: spacing fit, extrema and fitted growth slopes.
fn sweep_summary(sw: &Sweep<f64>, file: &str) -> Value {
    let ns: Vec<usize> = sw.rows.iter().map(|r| r.n).collect();
    let ratio: Vec<f64> = sw.rows.iter().map(|r| r.weight_ratio_log).collect();
    let lam: Vec<f64> = sw.rows.iter().map(|r| r.lebesgue.log_lambda).collect();
    json!({
        "label": sw.label,
        "file": file,
        "spacing_fit": {"a1": sw.fit.a1, "b1": sw.fit.b1, "a2": sw.fit.a2, "b2": sw.fit.b2},
        "extrema": {
            "x_max": sw.extrema.x_max,
            "x_min": sw.extrema.x_min,
            "u_max": sw.extrema.u_max,
            "u_min": sw.extrema.u_min,
            "d": sw.extrema.d,
        },
        "ratio_slope": slope_or_null(&ns, &ratio),
        "log_lambda_slope": slope_or_null(&ns, &lam),
    })
}

fn sweep_scenario(exp: &Experiment) -> Res<Vec<Output>> {
    let fam = exp.family().expect("sweep field checked during validation");
    let sw = sweep(&fam, &exp.n_list, exp.samples_per_gap)?;
    Ok(vec![
        Output::csv("sweep.csv", sw.to_csv()),
        Output::json("sweep.json", &sweep_summary(&sw, "sweep.csv")),
    ])
}

fn contour_csv(un: &DiscretePotential64, c: &ContourConfig) -> Res<String> {
    let grid = complex_grid_sample(
        un,
        (c.re_range[0], c.re_range[1]),
        (c.im_range[0], c.im_range[1]),
        c.nx,
        c.ny,
    )?;
    let mut s = String::from("re,im,u\n");
    for (x, y, u) in grid.points() {
        s.push_str(&format!("{},{},{}\n", num(x), num(y), num(u)));
    }
    Ok(s)
}

fn contour(exp: &Experiment) -> Res<Vec<Output>> {
    instances(exp)?
        .into_iter()
        .map(|(nodes, _, field)| {
            let n = nodes.n();
            let un = DiscretePotential64::new(nodes, field)?;
            Ok(Output::csv(per_n(n, "contour.csv"), contour_csv(&un, &exp.contour)?))
        })
        .collect()
}

fn fh_outputs(cfgs: &[FHConfig], report: &str, dir: impl Fn(usize) -> String) -> Res<Vec<Output>> {
    let rows = fh_potential_report(cfgs)?;
    let mut out = vec![Output::csv(report, fh_report_csv(&rows))];
    for (cfg, row) in cfgs.iter().zip(&rows) {
        out.push(Output::csv(format!("{}/poles.csv", dir(cfg.n)), poles_csv(&row.poles)));
    }
    Ok(out)
}

fn growth_json(cfgs: &[FHConfig], c_fh: f64) -> Res<Value> {
    let g = fh_ratio_growth(cfgs)?;
    Ok(json!({
        "c_fh": c_fh,
        "ns": g.ns,
        "ratio_log": g.log_values,
        "fitted_from": g.fitted_from,
        "slope": g.slope,
        "intercept": g.intercept,
        "reference_slope": c_fh * 2f64.ln(),
    }))
}

fn fh(exp: &Experiment) -> Res<Vec<Output>> {
    let cfgs = exp.n_list.iter().map(|&n| exp.fh_config(n)).collect::<barypot::Result<Vec<_>>>()?;
    let mut out = fh_outputs(&cfgs, "fh_report.csv", |n| format!("n{n}"))?;
    for cfg in &cfgs {
        let nodes = cfg.nodes::<f64>()?;
        let ws = fh_weights::<f64>(cfg, exp.normalization)?;
        out.push(Output::csv(per_n(cfg.n, "weights.csv"), weights_csv(&nodes, &ws)));
    }
    let fh = exp.fh.expect("fh section checked during validation");
    if fh.mode == FhModeName::Proportional && cfgs.len() >= 3 {
        out.push(Output::json("fh_growth.json", &growth_json(&cfgs, fh.c_fh.expect("checked"))?));
    }
    Ok(out)
}

fn repro_fig1(exp: &Experiment) -> Res<Vec<Output>> {
    let cases = [
        ("a", Family64::equidistant_polynomial()),
        ("b", Family64::chebyshev_poles()),
        ("c", Family64::equidistant_poles()),
    ];
    let mut out = Vec::new();
    let mut summary = serde_json::Map::new();
    for (k, (tag, fam)) in cases.iter().enumerate() {
        let file = format!("fig1_{tag}_sweep.csv");
        let sw = sweep(fam, &exp.n_list, exp.samples_per_gap)?;
        summary.insert(format!("d_{}", k + 1), json!(sw.extrema.d));
        summary.insert(format!("test_{tag}"), sweep_summary(&sw, &file));
        out.push(Output::csv(file, sw.to_csv()));
    }
    summary.insert("log_2".into(), json!(2f64.ln()));
    out.push(Output::json("fig1_rates.json", &Value::Object(summary)));
    Ok(out)
}

pub const FIG4_POINTS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

fn repro_fig4(exp: &Experiment) -> Res<Vec<Output>> {
    let cases = [
        ("example1", Family64::gaussian_polynomial()),
        ("example2", Family64::gaussian_poles()),
        ("example3", Family64::gaussian_equilibrium()),
    ];
    let mut out = Vec::new();
    let mut summary = serde_json::Map::new();
    for (tag, fam) in &cases {
        let file = format!("fig4_{tag}_sweep.csv");
        let sw = sweep(fam, &exp.n_list, exp.samples_per_gap)?;
        summary.insert(tag.to_string(), sweep_summary(&sw, &file));
        out.push(Output::csv(file, sw.to_csv()));
    }

    let fam = &cases[0].1;
    let u = fam.continuous()?;
    let members = family_sweep(fam, &exp.n_list, Normalization::Raw)?;
    let mut csv = String::from("n,x_hat,x,log_lambda\n");
    for x_hat in FIG4_POINTS {
        for (nodes, ws) in &members {
            let x = off_node(nodes, x_hat);
            let l = log_lebesgue_function(nodes, ws, x)?;
            csv.push_str(&format!("{},{},{},{}\n", nodes.n(), num(x_hat), num(x), num(l)));
        }
    }
    out.push(Output::csv("fig4_pointwise.csv", csv));

    let u0 = u.eval(0.0)?;
    let mut points = Vec::new();
    for x_hat in FIG4_POINTS {
        let slope = pointwise_growth_rate(&members, x_hat).map(|g| jnum(g.slope)).unwrap_or(Value::Null);
        points.push(json!({
            "x_hat": x_hat,
            "slope": slope,
            "reference_slope": u0 - u.eval(x_hat)?,
        }));
    }
    summary.insert("pointwise_example1".into(), Value::Array(points));
    out.push(Output::json("fig4_rates.json", &Value::Object(summary)));
    Ok(out)
}

pub const FIG6_FIXED_D: [usize; 3] = [0, 2, 4];
pub const FIG6_C_FH: f64 = 0.25;
/// Degrees for the weight-ratio growth fit; these need no pole recovery.
pub const FIG6_GROWTH_NS: [usize; 8] = [20, 40, 60, 80, 100, 120, 140, 160];

fn repro_fig6(exp: &Experiment) -> Res<Vec<Output>> {
    let ns = &exp.n_list;
    let mut out = Vec::new();
    for d in FIG6_FIXED_D {
        let cfgs = ns.iter().map(|&n| FHConfig::fixed(n, d)).collect::<barypot::Result<Vec<_>>>()?;
        out.extend(fh_outputs(&cfgs, &format!("fig6_fixed_d{d}.csv"), |n| format!("d{d}/n{n}"))?);
    }
    let cfgs = ns
        .iter()
        .map(|&n| FHConfig::proportional(n, FIG6_C_FH))
        .collect::<barypot::Result<Vec<_>>>()?;
    out.extend(fh_outputs(&cfgs, "fig6_proportional.csv", |n| format!("c{FIG6_C_FH}/n{n}"))?);

    // U_n with the recovered poles, d = 4 at the largest n.
    let n = *ns.last().expect("n_list is nonempty");
    let d = FIG6_FIXED_D[FIG6_FIXED_D.len() - 1];
    let cfg = FHConfig::fixed(n, d)?;
    let row = fh_potential_report(std::slice::from_ref(&cfg))?.remove(0);
    let un = DiscretePotential64::new(cfg.nodes()?, pole_field(&row.poles)?)?;
    out.push(Output::csv(format!("fig6_contour_d{d}_n{n}.csv"), contour_csv(&un, &exp.contour)?));

    let growth = FIG6_GROWTH_NS
        .iter()
        .map(|&n| FHConfig::proportional(n, FIG6_C_FH))
        .collect::<barypot::Result<Vec<_>>>()?;
    out.push(Output::json("fig6_growth.json", &growth_json(&growth, FIG6_C_FH)?));
    Ok(out)
}
