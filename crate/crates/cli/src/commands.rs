use std::collections::BTreeMap;
use std::time::Instant;

use cart_sim::cart::Channel;
use cart_sim::emission::{simulate_emission, EmissionRecord, LindbladSummary};
use cart_sim::experiments::{
    emission_grid, interfere as interfere_records, load_preset, run_birefringence_heatmap, simulate_node,
    SweepSpec,
};
use cart_sim::interference::{window_aggregate_with, CoincidenceMap, WindowedResult};
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve, FileConfig, ResolvedConfig};
use crate::output::OutDir;
use crate::{CliError, RunArgs};

fn load(args: &RunArgs, with_sweep: bool) -> Result<ResolvedConfig, CliError> {
    let file = args.config.as_deref().map(FileConfig::load).transpose()?;
    resolve(file, &args.overrides(), with_sweep)
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a ResolvedConfig,
    results: T,
}

fn manifest<'a, T: Serialize>(
    command: &'static str,
    config: &'a ResolvedConfig,
    results: T,
) -> Manifest<'a, T> {
    Manifest {
        version: cart_sim::VERSION,
        command,
        config,
        results,
    }
}

struct Timer {
    start: Instant,
    stages: BTreeMap<&'static str, f64>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            stages: BTreeMap::new(),
            last: now,
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.stages.insert(stage, (now - self.last).as_secs_f64());
        self.last = now;
    }

    fn write(mut self, out: &OutDir, command: &str) -> Result<(), CliError> {
        self.stages.insert("total", self.start.elapsed().as_secs_f64());
        out.json(
            "timings.json",
            &json!({ "command": command, "threads": rayon::current_num_threads(), "seconds": self.stages }),
        )
    }
}

#[derive(Serialize)]
struct NodeSummary {
    node: &'static str,
    emitted: f64,
    xe_loss: f64,
    recycled: f64,
    unreleased: f64,
    pure_weight: f64,
    residual_active: f64,
    channel_norms: BTreeMap<&'static str, f64>,
    lindblad: Option<LindbladSummary>,
}

fn summary(node: &'static str, rec: &EmissionRecord) -> NodeSummary {
    NodeSummary {
        node,
        emitted: rec.emitted,
        xe_loss: rec.xe_loss,
        recycled: rec.recycled,
        unreleased: rec.unreleased,
        pure_weight: rec.pure_weight,
        residual_active: rec.residual_active,
        channel_norms: Channel::ALL
            .iter()
            .map(|&c| (c.name(), rec.wavepacket.norm(c)))
            .collect(),
        lindblad: rec.lindblad,
    }
}

fn write_wavepacket(out: &OutDir, label: &str, rec: &EmissionRecord) -> Result<(), CliError> {
    let g = rec.grid();
    let mut header = vec!["t_us".to_string()];
    for c in Channel::ALL {
        header.push(format!("{}_re", c.name()));
        header.push(format!("{}_im", c.name()));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(
        &format!("wavepacket_{label}.csv"),
        &header,
        (0..g.n).map(|k| {
            let mut row = vec![g.time(k)];
            for c in Channel::ALL {
                let z = rec.channel(c)[k];
                row.push(z.re);
                row.push(z.im);
            }
            row
        }),
    )?;
    out.csv(
        &format!("intensity_{label}.csv"),
        &["t_us", "rH", "rV", "bH", "bV", "reexcitation_density"],
        (0..g.n).map(|k| {
            let mut row = vec![g.time(k)];
            row.extend(Channel::ALL.iter().map(|&c| rec.channel(c)[k].norm_sqr()));
            row.push(rec.reexcitation_density[k]);
            row
        }),
    )
}

pub fn emit(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args, false)?;
    let out = OutDir::create(&args.out)?;
    let mut timer = Timer::new();
    let it = &cfg.interference;
    let distinct = cfg.node_a != cfg.node_b;
    let nodes = if distinct {
        vec![cfg.node_a, cfg.node_b]
    } else {
        vec![cfg.node_a]
    };
    let grid = emission_grid(&nodes, it)?;
    let opts = cart_sim::emission::EmissionOptions {
        ode: it.ode,
        reexcitation: it.reexcitation,
        ..Default::default()
    };
    let mut summaries = Vec::new();
    for (label, node) in ["a", "b"].into_iter().zip(&nodes) {
        let rec = simulate_emission(node, &grid, &opts)?;
        write_wavepacket(&out, label, &rec)?;
        let s = summary(if label == "a" { "a" } else { "b" }, &rec);
        println!(
            "node {label}: emitted {:.6}  rH {:.6}  rV {:.6}  bH {:.6}  bV {:.6}",
            s.emitted,
            s.channel_norms["rH"],
            s.channel_norms["rV"],
            s.channel_norms["bH"],
            s.channel_norms["bV"]
        );
        summaries.push(s);
    }
    timer.lap("emission");
    out.json(
        "emission.json",
        &manifest("emit", &cfg, json!({ "grid": grid, "nodes": summaries })),
    )?;
    timer.write(&out, "emit")
}

fn ladder(map: &CoincidenceMap) -> Vec<f64> {
    let span = map.grid.t1 - map.grid.t0;
    (0..=40).map(|k| span * k as f64 / 40.0).collect()
}

fn write_map(out: &OutDir, map: &CoincidenceMap, csv_points: usize) -> Result<(), CliError> {
    let n = map.n();
    let stride = if csv_points == 0 || csv_points >= n {
        1
    } else {
        (n - 1).div_ceil(csv_points.max(2) - 1)
    };
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let (x, y) = match map.encoding {
        cart_sim::cart::Encoding::Polarization => ("t_h_us", "t_v_us"),
        _ if map.scheme == cart_sim::interference::DetectionScheme::Direct => ("t_c_us", "t_d_us"),
        _ => ("t_r_us", "t_b_us"),
    };
    out.csv(
        "coincidence.csv",
        &[x, y, "p", "fidelity"],
        idx.iter().flat_map(|&i| {
            idx.iter().map(move |&j| {
                let k = i * n + j;
                vec![map.grid.time(i), map.grid.time(j), map.p[k], map.fidelity[k]]
            })
        }),
    )
}

#[derive(Serialize)]
struct InterfereResults {
    windows: Vec<WindowedResult>,
    /// Window of one map-grid spacing.
    initial: WindowedResult,
    asymptotic: WindowedResult,
    asymptotic_fidelity: Option<f64>,
    visibility: Option<f64>,
    herald_probability: f64,
    nodes: Vec<NodeSummary>,
}

pub fn interfere(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args, false)?;
    let out = OutDir::create(&args.out)?;
    let mut timer = Timer::new();
    let it = &cfg.interference;
    let grid = emission_grid(&[cfg.node_a, cfg.node_b], it)?;
    let ra = simulate_node(&cfg.node_a, &grid, it)?;
    let rb = if cfg.node_a == cfg.node_b {
        ra.clone()
    } else {
        simulate_node(&cfg.node_b, &grid, it)?
    };
    timer.lap("emission");
    let map = interfere_records(&ra, &rb, it)?;
    timer.lap("interference");
    let mut windows = cfg.windows.clone().unwrap_or_else(|| ladder(&map));
    let user = windows.len();
    windows.push(map.grid.spacing());
    windows.push(f64::INFINITY);
    let mut res = window_aggregate_with(&map, &windows, it.execution)?;
    let asymptotic = res.pop().expect("requested");
    let initial = res.pop().expect("requested");
    debug_assert_eq!(res.len(), user);
    timer.lap("windows");
    write_map(&out, &map, args.csv_points)?;
    let results = InterfereResults {
        windows: res,
        initial,
        asymptotic,
        asymptotic_fidelity: asymptotic.fidelity,
        visibility: asymptotic.visibility,
        herald_probability: asymptotic.herald_probability,
        nodes: vec![summary("a", &ra), summary("b", &rb)],
    };
    println!(
        "asymptotic fidelity {}  visibility {}  herald probability {:.6e}",
        fmt_opt(asymptotic.fidelity),
        fmt_opt(asymptotic.visibility),
        asymptotic.herald_probability
    );
    out.json("windows.json", &manifest("interfere", &cfg, results))?;
    timer.lap("output");
    timer.write(&out, "interfere")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

pub fn sweep(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args, true)?;
    let out = OutDir::create(&args.out)?;
    let mut timer = Timer::new();
    if cfg.node_a != cfg.node_b {
        log::warn!("sweep uses node_a as the template for both nodes");
    }
    let s = cfg.sweep.as_ref().expect("sweep section resolved");
    let spec = SweepSpec {
        base: cfg.node_a,
        delta_a: s.delta_a,
        delta_b: s.delta_b,
        window: s.window,
        interference: cfg.interference.clone(),
    };
    let heatmap = run_birefringence_heatmap(&spec)?;
    timer.lap("sweep");
    let nan = f64::NAN;
    out.csv(
        "heatmap.csv",
        &[
            "delta_a_over_kappa",
            "delta_b_over_kappa",
            "fidelity",
            "efficiency",
        ],
        heatmap.cells.iter().map(|c| {
            let (f, e) = c
                .result
                .map_or((nan, nan), |r| (r.fidelity.unwrap_or(nan), r.efficiency));
            vec![c.delta_a, c.delta_b, f, e]
        }),
    )?;
    out.json("heatmap.json", &manifest("sweep", &cfg, &heatmap))?;
    timer.lap("output");
    timer.write(&out, "sweep")?;
    let failed = heatmap.failures();
    println!(
        "{} cells, {failed} failed, window {:.6} µs",
        heatmap.cells.len(),
        heatmap.window
    );
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} sweep cells failed; see heatmap.json"
        )));
    }
    Ok(())
}

pub fn preset(name: &str) -> Result<(), CliError> {
    let p = load_preset(name)?;
    let derived = p.derived().transpose()?;
    let text = serde_json::to_string_pretty(&json!({ "preset": p, "derived_geometry": derived }))
        .map_err(|e| CliError::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}
