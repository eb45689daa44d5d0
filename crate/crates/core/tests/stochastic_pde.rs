//! Monte Carlo survival on a curved strip against the heat equation.

use std::f64::consts::FRAC_PI_2;

use strip_lab_core::evolution::{evolve, EvolveOptions, HeatState};
use strip_lab_core::geometry::{linspace, FlatMetric, Metric, RuledMetric, ThetaDot};
use strip_lab_core::spectral::{assemble_hk, WeightedGrid};
use strip_lab_core::stochastic::{sde_from_metric, simulate_killed, survival_estimate, SimOptions};
use strip_lab_core::Region;

/// `P_x0(tau > t)` as `(e^{-t H} 1)(x0)` with `x0` on a grid node.
fn pde_survival(metric: &dyn Metric, x0: [f64; 2], t: f64) -> f64 {
    let a = metric.half_width();
    let l = 12.0;
    let grid = WeightedGrid::tensor(linspace(-l, l, 193), linspace(-a, a, 41), true);
    let pair = assemble_hk(metric, &grid).unwrap();
    let u = vec![1.0; pair.dim()];
    let u0 = HeatState { norm_f: pair.norm(&u), u, t: 0.0, norm_wf: None };
    let opts = EvolveOptions { dt: 2e-3, smoothing_steps: 4 };
    let out = evolve(&pair, &u0, &[t], &opts).unwrap();
    let full = grid.expand(&out[0].u);
    let node = (0..grid.n_nodes())
        .find(|&k| {
            let c = grid.coords(k);
            (c[0] - x0[0]).abs() < 1e-9 && (c[1] - x0[1]).abs() < 1e-9
        })
        .expect("x0 on the grid");
    full[node]
}

fn mc_survival(metric: &dyn Metric, x0: [f64; 2], t: f64, n: usize) -> (f64, f64) {
    let sde = sde_from_metric(metric);
    let opts = SimOptions { dt: 5e-4, n_paths: n, seed: 11, checkpoints: vec![t], x1_box: 12.0 };
    let ens = simulate_killed(&sde, x0, &opts).unwrap();
    let est = survival_estimate(&ens, Region::Whole, t).unwrap();
    (est.probability, est.half_width)
}

#[test]
fn curved_survival_matches_heat_equation() {
    let a = FRAC_PI_2;
    let ruled = RuledMetric { theta_dot: ThetaDot::Bump { amplitude: 0.44, radius: 6.0 }, a };
    let h2 = 2.0 * a / 40.0;
    let x0 = [0.0, 12.0 * h2];
    let t = 1.0;
    let pde = pde_survival(&ruled, x0, t);
    let flat = pde_survival(&FlatMetric { a }, x0, t);
    let (mc, hw) = mc_survival(&ruled, x0, t, 40_000);
    eprintln!("pde {pde:.5} flat {flat:.5} mc {mc:.5} +/- {hw:.5}");
    // the curvature must matter at this resolution for the check to bite
    assert!((pde - flat).abs() > 2.0 * hw);
    assert!((mc - pde).abs() <= hw + 5e-3, "mc {mc} vs pde {pde}");
}
