use lzqnd_core::ame::{self, DephasingModel};
use lzqnd_core::lz;
use lzqnd_core::nonmarkov::{self, PairGrid};
use lzqnd_core::open::{self, MeterParams};
use lzqnd_core::operator::Occupancy;
use lzqnd_core::strobe::{self, NoiseSpec, StrobeOptions};
use lzqnd_core::{LzParams, Window};

fn small_meter(x0: f64) -> MeterParams {
    MeterParams::new(1.0, 2.0, Occupancy::Mean(0.0), x0, 10).unwrap()
}

#[test]
fn coherent_ame_and_decoupled_lindblad_agree() {
    let p = LzParams::new(1.0, 1.0).unwrap();
    let w = Window::symmetric(3.0).unwrap();
    let ame_run = ame::evolve_ame(&w, 1e-3, &p, &DephasingModel::coherent()).unwrap();
    let joint = open::run_continuous(&p, &small_meter(0.0), &w, 2e-3).unwrap();
    assert!((ame_run.t_final - joint.t_final).abs() < 1e-7, "{} vs {}", ame_run.t_final, joint.t_final);
}

#[test]
fn weak_coupling_lindblad_tracks_ame() {
    // fast, weakly coupled meter: the reduced dynamics is Markovian dephasing
    let p = LzParams::new(1.0, 1.0).unwrap();
    let w = Window::symmetric(3.0).unwrap();
    let m = MeterParams::new(1.0, 20.0, Occupancy::Mean(0.0), 0.3, 8).unwrap();
    let dt = open::lindblad_dt(&p, &m, &w);
    let joint = open::run_continuous(&p, &m, &w, dt).unwrap();
    let model = DephasingModel::from_meter(&m, &p);
    let reduced = ame::evolve_ame(&w, ame::ame_dt(&p, &w), &p, &model).unwrap();
    let rel = (joint.t_final - reduced.t_final).abs() / reduced.t_final;
    assert!(rel < 0.05, "{} vs {}", joint.t_final, reduced.t_final);
}

#[test]
fn long_window_coherent_run_reaches_lz_law() {
    let p = LzParams::from_adiabaticity(0.5, 1.0).unwrap();
    let w = p.long_window();
    let run = ame::evolve_ame(&w, ame::ame_dt(&p, &w), &p, &DephasingModel::coherent()).unwrap();
    let law = lz::lz_infidelity_asymptotic(&p);
    assert!((run.t_final - law).abs() / law < 0.02, "{} vs {law}", run.t_final);
}

#[test]
fn markovian_surrogate_has_no_backflow() {
    let p = LzParams::new(1.0, 1.0).unwrap();
    let w = Window::symmetric(3.0).unwrap();
    let model = DephasingModel::constant(0.5, &p).unwrap();
    let map = nonmarkov::ame_reduced_map(&p, &model, &w, 1e-3, 300).unwrap();
    let res = nonmarkov::blp_from_map(&map, &PairGrid::default()).unwrap();
    assert!(res.n_value < 1e-4, "{}", res.n_value);
}

#[test]
fn monte_carlo_is_deterministic_and_scales() {
    let p = LzParams::new(1.0, 1.0).unwrap();
    let w = Window::symmetric(2.0).unwrap();
    let m = small_meter(2.0);
    let sched = strobe::build_schedule(&w, 0.5, 0.1).unwrap();
    let opts = StrobeOptions::default();
    let run = |n_it: usize, seed: u64| {
        let noise = NoiseSpec::new(0.15, n_it, seed).unwrap();
        strobe::run_noisy_mc_with(&p, &m, &sched, 0.5, &noise, &w, 0.01, &opts).unwrap()
    };
    let a = run(8, 11);
    assert_eq!(a, run(8, 11));
    assert_ne!(a.finals, run(8, 12).finals);
    let big = run(32, 11);
    // per-sample streams: the first 8 samples are shared
    assert_eq!(&big.finals[..8], &a.finals[..]);
    let ratio = a.stderr_final() / big.stderr_final();
    assert!((1.2..3.3).contains(&ratio), "stderr ratio {ratio}");
}

#[test]
fn pulses_suppress_transitions_in_small_meter() {
    let p = LzParams::new(1.0, 1.0).unwrap();
    let w = Window::symmetric(3.0).unwrap();
    let m = MeterParams::new(1.0, 2.0, Occupancy::Mean(0.0), 10.0, 25).unwrap();
    let bare = open::run_continuous(&p, &m.with_x0(0.0), &w, 0.004).unwrap().t_final;
    let opts = StrobeOptions {
        pulse_dt: Some(5e-4),
        ..Default::default()
    };
    let mut last = bare;
    for dt in [1.0, 0.5] {
        let sched = strobe::build_schedule(&w, dt, 0.1).unwrap();
        let t = strobe::run_stroboscopic_with(&p, &m, &sched, &w, 0.004, &opts).unwrap().t_final;
        assert!(t < last, "δt {dt}: {t} !< {last}");
        last = t;
    }
}
