//! One function per experiment kind. Each returns the files it produced as
//! in-memory artifacts; the runner decides where they go.

use strip_lab_core::evolution::{evolve, fit_decay, weighted_initial, EvolveOptions, InitialKind};
use strip_lab_core::geometry::{bump, linspace, ruled_point, taylor_envelope, CurvatureProfile};
use strip_lab_core::oracle::{flat_survival, transverse_energy, SeriesOptions};
use strip_lab_core::spectral::{
    assemble_hk, discrete_e1, hardy_constant, hardy_verify, lowest_eigenpairs, nu_sweep,
    perturbed_threshold, transverse_mu_profile, LsOptions, TrialOptions, WeightedGrid,
};
use strip_lab_core::stochastic::{
    alive_fraction, conditional_distribution, pointwise_rate, sde_from_metric, simulate_killed,
    survival_estimate, Bins, SimOptions, MIN_RATE_POINTS,
};
use strip_lab_core::LabError;

use crate::acceptance;
use crate::config::{ExperimentConfig, ExperimentKind, StripMetric};
use crate::error::CliResult;
use crate::plot::{render, PlotKind};
use crate::table::{num, NumericCsv, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub artifacts: Vec<Artifact>,
    /// Criteria that failed, for `report`.
    pub failed: Vec<u32>,
}

impl ExperimentOutput {
    fn table(&mut self, name: &str, t: &Table) {
        self.artifacts.push(Artifact {
            name: name.into(),
            contents: t.to_csv(),
        });
    }

    fn plot(&mut self, name: &str, source: &Table, kind: PlotKind, title: &str) -> CliResult<()> {
        let data = NumericCsv::parse(&source.to_csv())?;
        self.artifacts.push(Artifact {
            name: name.into(),
            contents: render(&data, kind, title)?,
        });
        Ok(())
    }
}

/// Scalar results as `quantity, value` rows.
struct Summary(Table);

impl Summary {
    fn new() -> Self {
        Summary(Table::new(&[("quantity", "name"), ("value", "mixed")]))
    }
    fn num(&mut self, k: &str, v: f64) {
        self.0.push(vec![k.into(), num(v)]);
    }
    fn text(&mut self, k: &str, v: &str) {
        self.0.push(vec![k.into(), v.into()]);
    }
}

fn fe_grid(cfg: &ExperimentConfig) -> WeightedGrid {
    let g = &cfg.geometry;
    WeightedGrid::tensor(linspace(-g.l, g.l, g.n1), linspace(-g.a, g.a, g.n2), true)
}

pub fn run_experiment(cfg: &ExperimentConfig, kind: ExperimentKind) -> CliResult<ExperimentOutput> {
    match kind {
        ExperimentKind::Jacobi => jacobi(cfg),
        ExperimentKind::Spectrum => spectrum(cfg),
        ExperimentKind::Mu => mu(cfg),
        ExperimentKind::NuSweep => nu_experiment(cfg),
        ExperimentKind::Hardy => hardy(cfg),
        ExperimentKind::Evolve => evolve_experiment(cfg),
        ExperimentKind::Mc => mc(cfg),
        ExperimentKind::Report => report(cfg),
    }
}

fn jacobi(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, profile, geom) = StripMetric::build(cfg)?;
    let (x1, x2) = (geom.x1_nodes(), geom.x2_nodes());
    let mut t = Table::new(&[
        ("x1", "length"),
        ("x2", "length"),
        ("f", "1"),
        ("d2f", "1/length"),
        ("K", "1/length^2"),
        ("V", "1/length^2"),
    ]);
    let rows: Vec<[f64; 6]> = match &metric {
        StripMetric::Field(m) => m.rows(&profile),
        StripMetric::Flat(_) => x1
            .iter()
            .flat_map(|&a| x2.iter().map(move |&b| [a, b, 1.0, 0.0, 0.0, 0.0]))
            .collect(),
        StripMetric::Ruled(m) => x1
            .iter()
            .flat_map(|&a| {
                let w = m.theta_dot.eval(a);
                x2.iter().map(move |&b| {
                    let p = ruled_point(w, b);
                    [a, b, p.f, p.d2f, p.curvature, p.potential]
                })
            })
            .collect(),
    };
    let envelope = taylor_envelope(&profile, cfg.geometry.a, &x1)?;
    let mut env = Table::new(&[
        ("x1", "length"),
        ("lower", "1"),
        ("upper", "1"),
        ("f_min", "1"),
        ("f_max", "1"),
        ("inside", "bool"),
    ]);
    let n2 = x2.len();
    let mut all_inside = true;
    for (i, (lo, hi)) in envelope.iter().enumerate() {
        let col = &rows[i * n2..(i + 1) * n2];
        let fmin = col.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
        let fmax = col.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max);
        let inside = fmin >= lo - 1e-12 && fmax <= hi + 1e-12;
        all_inside &= inside;
        env.push(vec![num(x1[i]), num(*lo), num(*hi), num(fmin), num(fmax), u8::from(inside).to_string()]);
    }
    for r in &rows {
        t.push_nums(r);
    }
    let mut s = Summary::new();
    s.text("profile", profile.kind_name());
    s.num("xi", cfg.geometry.a * cfg.geometry.a * profile.sup_norm());
    s.text("inside_envelope", if all_inside { "true" } else { "false" });
    if let StripMetric::Field(m) = &metric {
        s.num("jacobi_residual", strip_lab_core::geometry::jacobi_residual(m, &profile));
    }
    let mut out = ExperimentOutput::default();
    out.table("metric.csv", &t);
    out.table("envelope.csv", &env);
    out.table("summary.csv", &s.0);
    Ok(out)
}

fn spectrum(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, _, _) = StripMetric::build(cfg)?;
    let grid = fe_grid(cfg);
    let pair = assemble_hk(metric.as_dyn(), &grid)?;
    let ev = lowest_eigenpairs(&pair, cfg.numerics.eigen_count, cfg.numerics.tol)?;
    let mut t = Table::new(&[("index", "1"), ("eigenvalue", "1/length^2"), ("residual", "1")]);
    for (k, (v, r)) in ev.values.iter().zip(&ev.residuals).enumerate() {
        t.push(vec![k.to_string(), num(*v), num(*r)]);
    }
    let mut s = Summary::new();
    s.num("e1", transverse_energy(cfg.geometry.a, 1));
    s.num("e1_discrete", discrete_e1(&grid.x2)?);
    s.num("iterations", ev.iterations as f64);
    let mut out = ExperimentOutput::default();
    out.table("spectrum.csv", &t);
    out.table("summary.csv", &s.0);
    Ok(out)
}

fn mu(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, profile, geom) = StripMetric::build(cfg)?;
    let x1 = geom.x1_nodes();
    let x2 = geom.x2_nodes();
    let values = transverse_mu_profile(metric.as_dyn(), &x1, &x2)?;
    let mut t = Table::new(&[("x1", "length"), ("mu", "1/length^2"), ("K_axis", "1/length^2")]);
    for (x, m) in x1.iter().zip(&values) {
        t.push_nums(&[*x, *m, profile.eval(*x, 0.0)]);
    }
    let mut out = ExperimentOutput::default();
    out.table("mu.csv", &t);
    Ok(out)
}

fn nu_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, _, geom) = StripMetric::build(cfg)?;
    let opts = LsOptions {
        tol: cfg.numerics.tol,
        ..Default::default()
    };
    let pts = nu_sweep(metric.as_dyn(), &cfg.numerics.s_values, &geom.x2_nodes(), &opts)?;
    let mut t = Table::new(&[("s", "1"), ("nu", "1"), ("residual", "1")]);
    for p in &pts {
        t.push_nums(&[p.s, p.nu, p.residual]);
    }
    let mut out = ExperimentOutput::default();
    out.table("nu.csv", &t);
    out.plot("nu-vs-s.svg", &t, PlotKind::NuVsS, "lowest self-similar eigenvalue")?;
    Ok(out)
}

/// Depths of the negative bumps used to probe criticality of a flat strip.
const CRITICALITY_DEPTHS: [f64; 4] = [0.2, 0.1, 0.05, 0.02];

fn hardy(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, profile, geom) = StripMetric::build(cfg)?;
    let m = metric.as_dyn();
    let grid = fe_grid(cfg);
    let pair = assemble_hk(m, &grid)?;
    let e1h = discrete_e1(&grid.x2)?;
    let mut out = ExperimentOutput::default();
    if matches!(profile, CurvatureProfile::Zero) {
        // no Hardy inequality: show that every attractive bump binds
        let mut t = Table::new(&[("depth", "1/length^2"), ("threshold", "1/length^2"), ("e1_discrete", "1/length^2")]);
        for eps in CRITICALITY_DEPTHS {
            let v = perturbed_threshold(&pair, m, |x1, _| -eps * bump(x1 / 2.0))?;
            t.push_nums(&[eps, v, e1h]);
        }
        out.table("criticality.csv", &t);
        return Ok(out);
    }
    let r = profile.support_radius();
    let interval = cfg
        .numerics
        .hardy_interval
        .map(|[a, b]| (a, b))
        .unwrap_or((-r, r));
    let cert = hardy_constant(m, &profile, interval, &geom.x2_nodes(), cfg.numerics.hardy_columns)?;
    let opts = TrialOptions {
        trials: cfg.numerics.trials,
        seed: cfg.numerics.seed,
        ..Default::default()
    };
    let with_rho = hardy_verify(&pair, m, |x1, _| cert.weight(x1), e1h, &opts)?;
    let without = hardy_verify(&pair, m, |_, _| 0.0, e1h, &opts)?;
    let mut s = Summary::new();
    s.num("xi", cert.xi);
    s.num("interval_lo", cert.interval.0);
    s.num("interval_hi", cert.interval.1);
    s.num("c", cert.c);
    s.num("C", cert.big_c);
    s.num("lambda_J", cert.lambda_j);
    s.num("c_K", cert.c_k);
    s.num("mu_min", cert.mu_min);
    s.num("mu_max", cert.mu_max);
    s.num("margin_rho", with_rho);
    s.num("margin_zero", without);
    s.num("e1_discrete", e1h);
    let mut w = Table::new(&[("x1", "length"), ("rho", "1/length^2")]);
    for &x in &geom.x1_nodes() {
        w.push_nums(&[x, cert.weight(x)]);
    }
    out.table("certificate.csv", &s.0);
    out.table("weight.csv", &w);
    Ok(out)
}

fn evolve_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, _, _) = StripMetric::build(cfg)?;
    let m = metric.as_dyn();
    let grid = fe_grid(cfg);
    let pair = assemble_hk(m, &grid)?;
    let e1h = discrete_e1(&grid.x2)?;
    let [t0, t1] = cfg.numerics.window;
    let u0 = weighted_initial(&pair, m, InitialKind::Mode { alpha: cfg.numerics.alpha })?;
    let samples = 200;
    let times: Vec<f64> = (0..=samples)
        .map(|k| t0 + (t1 - t0) * k as f64 / samples as f64)
        .collect();
    let mut opts = EvolveOptions::for_window(t0, t1);
    if let Some(dt) = cfg.numerics.dt {
        opts.dt = dt;
    }
    let traj = evolve(&pair, &u0, &times, &opts)?;
    let fit = fit_decay(&traj, e1h, (t0, t1))?;
    let mut t = Table::new(&[("t", "time"), ("norm_f", "1"), ("scaled_norm", "1")]);
    for st in &traj {
        t.push_nums(&[st.t, st.norm_f, st.norm_f * (e1h * st.t).exp()]);
    }
    let mut s = Summary::new();
    s.num("gamma_hat", fit.gamma_hat);
    s.num("stderr_gamma", fit.stderr_gamma);
    s.num("lambda_hat", fit.lambda_hat);
    s.num("stderr_lambda", fit.stderr_lambda);
    s.num("gamma_free", fit.gamma_free);
    s.num("lambda_exp", fit.lambda_exp);
    s.num("samples", fit.samples as f64);
    s.num("e1_discrete", e1h);
    s.num("dt", opts.dt);
    let mut out = ExperimentOutput::default();
    out.table("decay.csv", &t);
    out.table("fit.csv", &s.0);
    out.plot("decay-loglog.svg", &t, PlotKind::DecayLogLog, "weighted decay")?;
    Ok(out)
}

fn mc(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let (metric, profile, _) = StripMetric::build(cfg)?;
    let m = metric.as_dyn();
    let n = &cfg.numerics;
    let a = cfg.geometry.a;
    let sde = sde_from_metric(m);
    let ens = simulate_killed(
        &sde,
        n.x0,
        &SimOptions {
            dt: n.mc_dt,
            n_paths: n.n_paths,
            seed: n.seed,
            checkpoints: n.t_values.clone(),
            x1_box: cfg.geometry.l,
        },
    )?;
    let region = cfg.region();
    let e1 = transverse_energy(a, 1);
    let mut t = Table::new(&[
        ("t", "time"),
        ("alive", "paths"),
        ("estimate", "1"),
        ("ci_low", "1"),
        ("ci_high", "1"),
    ]);
    let mut scaled = Table::new(&[("t", "time"), ("scaled_norm", "1")]);
    let mut estimates = Vec::new();
    for &time in &n.t_values {
        let e = survival_estimate(&ens, region, time)?;
        let (lo, hi) = e.interval();
        let alive = (alive_fraction(&ens, time) * ens.n_paths as f64).round();
        t.push(vec![num(time), format!("{alive}"), num(e.probability), num(lo.max(0.0)), num(hi.min(1.0))]);
        scaled.push_nums(&[time, e.probability * (e1 * time).exp()]);
        estimates.push(e);
    }
    let mut s = Summary::new();
    s.num("escaped", ens.escaped as f64);
    s.num("e1", e1);
    if matches!(profile, CurvatureProfile::Zero) {
        for e in &estimates {
            if let Ok(v) = flat_survival(n.x0, region, e.t, a, &SeriesOptions::default()) {
                s.num(&format!("oracle_t{}", e.t), v.value);
            }
        }
    }
    if estimates.len() >= MIN_RATE_POINTS {
        match pointwise_rate(&estimates, e1) {
            Ok(r) => {
                s.num("slope", r.slope);
                s.num("slope_stderr", r.stderr);
                s.num("lambda_free", r.lambda_free);
                s.num("slope_free", r.slope_free);
            }
            Err(e @ LabError::InsufficientSignal(_)) => s.text("slope", &e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    let mut out = ExperimentOutput::default();
    let last = *n.t_values.last().unwrap_or(&0.0);
    let spread = 5.0 * (2.0 * last).sqrt() + 1.0;
    let bins = Bins {
        x1: (n.x0[0] - spread, n.x0[0] + spread, 40),
        x2: (-a, a, 8),
    };
    match conditional_distribution(&ens, last, bins) {
        Ok(h) => {
            let mut ht = Table::new(&[("x1", "length"), ("x2", "length"), ("mass", "1")]);
            for i in 0..bins.x1.2 {
                for j in 0..bins.x2.2 {
                    let c = h.bin_center(i, j);
                    ht.push_nums(&[c[0], c[1], h.mass[i * bins.x2.2 + j]]);
                }
            }
            out.table("histogram.csv", &ht);
            out.plot("histogram.svg", &ht, PlotKind::Histogram, "conditional x1 distribution")?;
        }
        Err(e @ LabError::TooFewSurvivors { .. }) => s.text("histogram", &e.to_string()),
        Err(e) => return Err(e.into()),
    }
    out.table("survival.csv", &t);
    out.table("pointwise.csv", &scaled);
    if scaled.rows.iter().any(|r| r[1].parse::<f64>().is_ok_and(|v| v > 0.0)) {
        out.plot("decay-loglog.svg", &scaled, PlotKind::DecayLogLog, "scaled survival")?;
    }
    out.table("summary.csv", &s.0);
    Ok(out)
}

fn report(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let ids: Vec<u32> = if cfg.numerics.criteria.is_empty() {
        (1..=10).collect()
    } else {
        cfg.numerics.criteria.clone()
    };
    let mut t = Table::new(&[("criterion", "id"), ("title", "text"), ("passed", "bool"), ("detail", "text")]);
    let mut out = ExperimentOutput::default();
    for id in ids {
        let c = acceptance::run(id);
        eprintln!("{}", c.line());
        t.push(vec![id.to_string(), c.title.into(), c.passed.to_string(), c.detail.clone()]);
        if !c.passed {
            out.failed.push(id);
        }
    }
    out.table("acceptance.csv", &t);
    Ok(out)
}
