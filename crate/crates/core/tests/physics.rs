use cart_sim::cart::{Channel, Encoding, NodeConfig};
use cart_sim::emission::{auto_grid, simulate_emission, EmissionOptions};
use cart_sim::experiments::{
    load_preset, run_birefringence_heatmap, run_pair, GridSpec, InterferenceSpec, SweepSpec,
};
use cart_sim::interference::window_aggregate;
use cart_sim::par::Execution;
use cart_sim::quantum::ode::OdeOptions;

fn coarse(encoding: Encoding, reexcitation: bool) -> InterferenceSpec {
    InterferenceSpec {
        encoding,
        reexcitation,
        grid: GridSpec {
            emission_points: 1025,
            map_points: 257,
            residual: 1e-5,
        },
        ..Default::default()
    }
}

fn generic() -> NodeConfig {
    load_preset("generic").unwrap().node
}

#[test]
fn weak_birefringence_gives_minor_rotated_component() {
    let cfg = generic();
    let cfg = cfg.with_delta(0.3 * cfg.kappa);
    let ode = OdeOptions::default();
    let grid = auto_grid(&cfg, 8193, 1e-5, &ode).unwrap();
    let rec = simulate_emission(&cfg, &grid, &EmissionOptions::default()).unwrap();
    let w = &rec.wavepacket;
    for (principal, rotated) in [(Channel::RH, Channel::RV), (Channel::BH, Channel::BV)] {
        let ratio = w.norm(rotated) / w.norm(principal);
        assert!(ratio > 0.0 && ratio < 0.2, "ratio {ratio}");
    }
    assert!((w.norm(Channel::RH) + w.norm(Channel::RV) - 0.5).abs() < 1e-3);
}

#[test]
fn lossless_node_emits_everything() {
    let cfg = generic();
    let ode = OdeOptions::default();
    let grid = auto_grid(&cfg, 16385, 1e-6, &ode).unwrap();
    let rec = simulate_emission(&cfg, &grid, &EmissionOptions::default()).unwrap();
    assert!((rec.wavepacket.total_norm() - 1.0).abs() < 1e-3);
    assert!((rec.emitted - 1.0).abs() < 1e-5);
    assert_eq!(rec.pure_weight, 1.0);
}

#[test]
fn heatmap_is_symmetric_with_unit_diagonal() {
    let spec = SweepSpec::square(generic(), 3, coarse(Encoding::Frequency, false)).unwrap();
    let map = run_birefringence_heatmap(&spec).unwrap();
    assert_eq!(map.failures(), 0);
    for i in 0..3 {
        let d = map.get(i, i).result.unwrap().fidelity.unwrap();
        assert!((d - 1.0).abs() < 1e-3, "diagonal {i}: {d}");
        for j in 0..3 {
            let a = map.get(i, j).result.unwrap();
            let b = map.get(j, i).result.unwrap();
            assert!((a.fidelity.unwrap() - b.fidelity.unwrap()).abs() < 1e-9);
        }
    }
    assert!(map.get(0, 2).result.unwrap().fidelity.unwrap() < 0.8);
}

#[test]
fn reexcitation_never_raises_fidelity() {
    for name in ["ca40", "ra225"] {
        let cfg = load_preset(name).unwrap().node;
        let windows = [0.02, 0.1, 0.5, f64::INFINITY];
        let without = run_pair(&cfg, &cfg, &windows, &coarse(Encoding::Frequency, false)).unwrap();
        let with = run_pair(&cfg, &cfg, &windows, &coarse(Encoding::Frequency, true)).unwrap();
        for (a, b) in without.windows.iter().zip(&with.windows) {
            let (fa, fb) = (a.fidelity.unwrap(), b.fidelity.unwrap());
            assert!(fb <= fa + 1e-9, "{name} T = {}: {fb} > {fa}", a.window);
        }
        assert!((without.windows[3].fidelity.unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn execution_policy_does_not_change_results() {
    let cfg = generic();
    let b = cfg.with_delta(cfg.kappa);
    let mut seq = coarse(Encoding::Polarization, false);
    seq.execution = Execution::Sequential;
    let par = coarse(Encoding::Polarization, false);
    let x = run_pair(&cfg, &b, &[0.1, f64::INFINITY], &seq).unwrap();
    let y = run_pair(&cfg, &b, &[0.1, f64::INFINITY], &par).unwrap();
    assert_eq!(x.map.p, y.map.p);
    assert_eq!(x.windows, y.windows);
}

#[test]
fn narrower_window_trades_efficiency_for_fidelity() {
    let cfg = generic();
    let b = cfg.with_delta(2.0 * cfg.kappa);
    let run = run_pair(&cfg, &b, &[], &coarse(Encoding::Frequency, false)).unwrap();
    let res = window_aggregate(&run.map, &[0.01, 0.05, f64::INFINITY]).unwrap();
    assert!(res[0].fidelity.unwrap() > res[2].fidelity.unwrap());
    assert!(res[0].efficiency < res[1].efficiency && res[1].efficiency < res[2].efficiency);
}
