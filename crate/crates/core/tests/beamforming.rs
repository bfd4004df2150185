mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use risnoma::active_beamforming::{self, build_p3, solve_p3, P3Linearization, P3Objective};
use risnoma::metrics::{
    aggregate_user_channel, check_feasible, check_feasible_for, radar_snr_lb, sum_rate, sum_rate_for, ProblemKind,
};
use risnoma::numerics::cmatrix::{dotu, CMatrix, C64};
use risnoma::orchestrator::{initialize, Scenario, OUTPUT_TOL, STEP_TOL};
use risnoma::passive_beamforming::{self, build_effective_channels, build_p7, quantize_phase, solve_p7, PhaseProjection};
use risnoma::receive_filter::update_filters;
use risnoma::scenario::{rng_for, ChannelSet, RngStream, SystemConfig};

use common::{close, design, random_w, unit_phases};

fn feasible_start(seed: u64) -> (Scenario, risnoma::metrics::Design) {
    let sc = Scenario::draw(&SystemConfig::desk(), seed).unwrap();
    let (d, _) = initialize(ProblemKind::JOINT, &sc.cfg, &sc.ch, &mut rng_for(seed, RngStream::Init)).unwrap();
    (sc, d)
}

#[test]
fn p3_anchor_is_feasible_for_its_program() {
    for seed in 1..=5 {
        let (sc, d) = feasible_start(seed);
        let lin = P3Linearization::new(ProblemKind::JOINT, &sc.cfg, &sc.ch, &d);
        let prog = build_p3(&lin, P3Objective::SumRate);
        prog.program.validate().unwrap();
        let x = active_beamforming::anchor_point(&prog, 0.0);
        let (res, which) = prog.program.max_residual(&x);
        assert!(res <= 1e-6, "seed {seed}: {res} at {which:?}");
    }
}

#[test]
fn p3_reaches_scalar_capacity() {
    // h = 1, σ² = 1 W, P = 4 W: capacity log2(5)
    let cfg = SystemConfig {
        m: 1,
        k: 1,
        l: 0,
        n: 0,
        p_max_dbm: 30.0 + 10.0 * 4f64.log10(),
        noise_user_dbm: vec![30.0],
        ..SystemConfig::desk()
    };
    let ch = ChannelSet {
        h_d: vec![vec![C64::new(1.0, 0.0)]],
        h_r: vec![Vec::new()],
        g_mat: CMatrix::zeros(0, 0),
        g_d: Vec::new(),
        g_r: Vec::new(),
    };
    let w = CMatrix::from_rows(&[vec![C64::new(0.5, 0.0), C64::new(0.0, 0.0)]]);
    let mut d = design(w, Vec::new(), Vec::new());
    for _ in 0..10 {
        let lin = P3Linearization::new(ProblemKind::JOINT, &cfg, &ch, &d);
        d.w = solve_p3(&build_p3(&lin, P3Objective::SumRate), &cfg.solver_settings()).unwrap().w;
    }
    assert!(close(sum_rate(&cfg, &ch, &d), 5f64.log2(), 1e-6));
    assert!(close(d.total_power(), 4.0, 1e-6));
}

#[test]
fn repeated_p3_passes_ascend() {
    for seed in 1..=6 {
        let (sc, mut d) = feasible_start(seed);
        let mut rate = sum_rate(&sc.cfg, &sc.ch, &d);
        for pass in 0..5 {
            let lin = P3Linearization::new(ProblemKind::JOINT, &sc.cfg, &sc.ch, &d);
            let sol = solve_p3(&build_p3(&lin, P3Objective::SumRate), &sc.cfg.solver_settings()).unwrap();
            let mut next = d.clone();
            next.w = sol.w;
            update_filters(&sc.ch, &mut next).unwrap();
            let r = sum_rate(&sc.cfg, &sc.ch, &next);
            assert!(r >= rate - 1e-6, "seed {seed} pass {pass}: {r} < {rate}");
            assert!(check_feasible(&sc.cfg, &sc.ch, &next, OUTPUT_TOL).feasible(), "seed {seed} pass {pass}");
            rate = r;
            d = next;
        }
    }
}

#[test]
fn effective_channel_amplitude_matches_cascade() {
    let cfg = SystemConfig::desk();
    let sc = Scenario::draw(&cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w = random_w(cfg.m, cfg.k + 1, cfg.p_max(), &mut rng);
    let eff = build_effective_channels(&sc.ch, &w);
    for _ in 0..5 {
        let v = unit_phases(cfg.n, &mut rng);
        for i in 0..cfg.k {
            let h = aggregate_user_channel(&sc.ch, &v, i);
            for j in 0..=cfg.k {
                let want = dotu(&h, w.col(j));
                assert!((eff.amplitude(i, j, &v) - want).norm() <= 1e-12 * want.norm().max(1e-30));
            }
        }
    }
}

#[test]
fn p7_anchor_is_feasible_for_its_program() {
    for seed in 1..=5 {
        let (sc, d) = feasible_start(seed);
        let prog = build_p7(ProblemKind::JOINT, &sc.cfg, &sc.ch, &d, sc.cfg.ccp_penalty.rho0).unwrap();
        prog.program.validate().unwrap();
        let x = passive_beamforming::anchor_point(&prog, &d);
        let (res, which) = prog.program.max_residual(&x);
        assert!(res <= 1e-6, "seed {seed}: {res} at {which:?}");
    }
}

#[test]
fn p7_step_keeps_feasibility_and_rate() {
    for seed in 1..=5 {
        let (sc, d) = feasible_start(seed);
        let base = sum_rate(&sc.cfg, &sc.ch, &d);
        let prog = build_p7(ProblemKind::JOINT, &sc.cfg, &sc.ch, &d, sc.cfg.ccp_penalty.rho0).unwrap();
        let out = solve_p7(&prog, &sc.cfg, &sc.ch, &d, PhaseProjection::Continuous, STEP_TOL, &sc.cfg.solver_settings())
            .unwrap();
        assert!(sum_rate(&sc.cfg, &sc.ch, &out.design) >= base);
        assert!(check_feasible(&sc.cfg, &sc.ch, &out.design, STEP_TOL).feasible());
        assert!(out.design.v.iter().all(|x| (x.norm() - 1.0).abs() <= 1e-12));
    }
}

#[test]
fn discrete_projection_stays_on_grid() {
    let kind = ProblemKind::JOINT;
    let proj = PhaseProjection::Discrete(2);
    let mut checked = 0;
    for seed in 1..=6 {
        let (sc, mut d) = feasible_start(seed);
        proj.apply(&mut d.v);
        update_filters(&sc.ch, &mut d).unwrap();
        if !check_feasible_for(kind, &sc.cfg, &sc.ch, &d, STEP_TOL).feasible() {
            continue;
        }
        let prog = build_p7(kind, &sc.cfg, &sc.ch, &d, sc.cfg.ccp_penalty.rho0).unwrap();
        let out = solve_p7(&prog, &sc.cfg, &sc.ch, &d, proj, STEP_TOL, &sc.cfg.solver_settings()).unwrap();
        for x in &out.design.v {
            let k = x.arg() / std::f64::consts::FRAC_PI_2;
            assert!((k - k.round()).abs() < 1e-9, "{x}");
        }
        assert!(sum_rate_for(kind, &sc.cfg, &sc.ch, &out.design) >= sum_rate_for(kind, &sc.cfg, &sc.ch, &d));
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn quantizer_picks_nearest_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for bits in 1..=4u32 {
        let levels = 1usize << bits;
        for _ in 0..200 {
            let z = C64::from_polar(rng.gen_range(0.1..3.0), rng.gen_range(-4.0..4.0));
            let q = quantize_phase(z, bits);
            let best = (0..levels)
                .map(|i| C64::from_polar(1.0, std::f64::consts::TAU * i as f64 / levels as f64))
                .map(|c| (c - z / z.norm()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(close(q.norm(), 1.0, 1e-12));
            assert!((q - z / z.norm()).norm() <= best + 1e-12);
        }
    }
}

#[test]
fn radar_snr_ignores_filter_phase() {
    let (sc, mut d) = feasible_start(3);
    update_filters(&sc.ch, &mut d).unwrap();
    let before: Vec<f64> = (0..sc.cfg.l).map(|l| radar_snr_lb(&sc.cfg, &sc.ch, &d, l)).collect();
    let rot = C64::from_polar(1.0, 1.234);
    for u in &mut d.u {
        u.iter_mut().for_each(|x| *x *= rot);
    }
    for (l, b) in before.iter().enumerate() {
        assert!(close(radar_snr_lb(&sc.cfg, &sc.ch, &d, l), *b, 1e-12));
    }
}
