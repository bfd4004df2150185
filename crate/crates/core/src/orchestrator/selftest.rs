//! Quick numerical self-checks run by `risnoma selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ao_solve, initialize, matched_design, AoOptions, OUTPUT_TOL};
use crate::active_beamforming::{build_p3, solve_p3, taylor_lb_quadratic, P3Linearization, P3Objective};
use crate::metrics::{check_feasible, sum_rate_for, ProblemKind};
use crate::numerics::cmatrix::{dotu, CMatrix, C64};
use crate::receive_filter::optimal_filter;
use crate::scenario::channels::generate_channels;
use crate::scenario::{rng_for, RngStream, SystemConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rc(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn interleave(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn taylor_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    let mut tangent = 0.0_f64;
    for _ in 0..200 {
        let h: Vec<C64> = (0..4).map(|_| rc(&mut rng)).collect();
        let a: Vec<C64> = (0..4).map(|_| rc(&mut rng)).collect();
        let w: Vec<C64> = (0..4).map(|_| rc(&mut rng)).collect();
        let lb = taylor_lb_quadratic(&h, &a, 0);
        worst = worst.min(dotu(&h, &w).norm_sqr() - lb.eval(&interleave(&w)));
        tangent = tangent.max((dotu(&h, &a).norm_sqr() - lb.eval(&interleave(&a))).abs());
    }
    Check {
        name: "taylor lower bound",
        passed: worst >= -1e-12 && tangent <= 1e-9,
        detail: format!("min margin {worst:.2e}, tangent gap {tangent:.2e}"),
    }
}

fn scalar_rate() -> Check {
    let mut cfg = SystemConfig { m: 1, k: 1, l: 0, n: 0, ..SystemConfig::desk() };
    cfg.geometry.users.truncate(1);
    cfg.geometry.targets.clear();
    let result = (|| -> Result<(f64, f64), String> {
        let ch = generate_channels(&cfg, &mut rng_for(3, RngStream::Channels)).map_err(|e| e.to_string())?;
        let kind = ProblemKind::JOINT;
        let mut d = matched_design(kind, &cfg, &ch, &[]);
        d.w = d.w.scale(C64::new(0.5, 0.0));
        for _ in 0..5 {
            let lin = P3Linearization::new(kind, &cfg, &ch, &d);
            d.w = solve_p3(&build_p3(&lin, P3Objective::SumRate), &cfg.solver_settings()).map_err(|e| e.to_string())?.w;
        }
        let want = (1.0 + cfg.p_max() * ch.h_d[0][0].norm_sqr() / cfg.noise_user(0)).log2();
        Ok((sum_rate_for(kind, &cfg, &ch, &d), want))
    })();
    match result {
        Ok((got, want)) => Check {
            name: "single-user scalar rate",
            passed: ((got - want) / want).abs() <= 1e-4,
            detail: format!("{got:.6} vs log2(1 + P|h|^2/sigma^2) = {want:.6}"),
        },
        Err(e) => Check { name: "single-user scalar rate", passed: false, detail: e },
    }
}

fn filter_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = CMatrix::from_fn(4, 4, |_, _| rc(&mut rng));
    let w = CMatrix::from_fn(4, 3, |_, _| rc(&mut rng));
    let gw = g.matmul(&w).expect("shapes agree");
    let a: Vec<C64> = (0..3).flat_map(|j| gw.col(j).to_vec()).collect();
    let gain = |u: &[C64]| {
        let ua: C64 = u.iter().zip(&a).map(|(x, y)| x.conj() * y).sum();
        ua.norm_sqr() / u.iter().map(|x| x.norm_sqr()).sum::<f64>()
    };
    match optimal_filter(&g, &w) {
        Ok(u) => {
            let best = gain(&u);
            let beaten = (0..200)
                .filter(|_| {
                    let r: Vec<C64> = (0..a.len()).map(|_| rc(&mut rng)).collect();
                    gain(&r) > best * (1.0 + 1e-12)
                })
                .count();
            let full: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            Check {
                name: "receive filter optimality",
                passed: beaten == 0 && ((best - full) / full).abs() <= 1e-8,
                detail: format!("{beaten} of 200 random filters better"),
            }
        }
        Err(e) => Check { name: "receive filter optimality", passed: false, detail: e.to_string() },
    }
}

fn short_ao() -> Check {
    let cfg = SystemConfig { max_ao_iters: 3, ..SystemConfig::desk() };
    let result = (|| -> Result<(usize, f64, bool), String> {
        let ch = generate_channels(&cfg, &mut rng_for(cfg.seed, RngStream::Channels)).map_err(|e| e.to_string())?;
        let (init, _) =
            initialize(ProblemKind::JOINT, &cfg, &ch, &mut rng_for(cfg.seed, RngStream::Init)).map_err(|e| e.to_string())?;
        let (design, trace) = ao_solve(&cfg, &ch, init, AoOptions::default());
        let rates = trace.sum_rates();
        let monotone = rates.windows(2).all(|w| w[1] >= w[0] - 1e-6);
        let feasible = check_feasible(&cfg, &ch, &design, OUTPUT_TOL).feasible();
        Ok((trace.iterations.len(), *rates.last().unwrap_or(&f64::NAN), monotone && feasible))
    })();
    match result {
        Ok((iters, rate, ok)) => Check {
            name: "short AO run",
            passed: ok,
            detail: format!("{iters} iterations, sum rate {rate:.4} bits/s/Hz"),
        },
        Err(e) => Check { name: "short AO run", passed: false, detail: e },
    }
}

pub fn run() -> Vec<Check> {
    vec![taylor_bound(), scalar_rate(), filter_optimality(), short_ao()]
}
