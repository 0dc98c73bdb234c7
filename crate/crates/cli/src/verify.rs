//! Invariant suite run by `sim verify`.

use levy_sir::diagnostics::{eta_eps, ito_isometry_check, positivity_functional, zeta_eps};
use levy_sir::grid::laplacian_neumann;
use levy_sir::model::{basic_reproduction_number, contraction_lambda_bound, jump_multiplier};
use levy_sir::noise::{sample_jump_events, GaussianStream};
use levy_sir::{
    DiffusionOperator, Grid1D, Incidence, JumpCoefficients, JumpEvent, MarkMeasure, ModelParams,
    NoiseSpec, PathSeed, ScalarField, SchemeConfig, SchemeKind, StateField, Stepper,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_field(grid: Grid1D, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    ScalarField::from_fn(grid, |_| rng.random_range(lo..hi))
}

fn random_state(grid: Grid1D, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> StateField {
    let s = random_field(grid, rng, lo, hi);
    let i = random_field(grid, rng, lo, hi);
    let r = random_field(grid, rng, lo, hi);
    StateField::new(s, i, r).expect("same grid")
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// The discrete Laplacian must sum to zero for any input. `lap` is injectable
/// so that broken stencils can be checked against this property.
pub fn conservation_check(lap: impl Fn(&[f64], f64) -> Vec<f64>) -> Outcome {
    let grid = Grid1D::new(6.0, 37).map_err(err)?;
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let f = random_field(grid, &mut r, -1.0, 1.0);
        let out = lap(f.values(), grid.dx());
        let total: f64 = out.iter().sum::<f64>() * grid.dx();
        let scale = f.sup_norm() / grid.dx();
        worst = worst.max(total.abs() / scale);
    }
    ensure(worst <= 1e-12, || format!("mass drift {worst:e}"))?;
    Ok(format!("max relative drift {worst:.1e}"))
}

fn laplacian_symmetric() -> Outcome {
    let grid = Grid1D::new(6.0, 29).map_err(err)?;
    let mut r = rng(2);
    for _ in 0..50 {
        let f = random_field(grid, &mut r, -1.0, 1.0);
        let g = random_field(grid, &mut r, -1.0, 1.0);
        let scale = f.l2_norm() * g.l2_norm() / grid.dx().powi(2);
        let asym = (f.laplacian_neumann().dot(&g) - f.dot(&g.laplacian_neumann())).abs();
        ensure(asym <= 1e-12 * scale, || format!("asymmetry {asym:e}"))?;
        let q = f.laplacian_neumann().dot(&f);
        ensure(q <= 1e-12 * scale, || format!("positive quadratic form {q:e}"))?;
    }
    Ok("50 random pairs".into())
}

fn operator() -> Result<DiffusionOperator, String> {
    let grid = Grid1D::new(6.0, 64).map_err(err)?;
    DiffusionOperator::new(grid, [0.1, 0.5, 1.3]).map_err(err)
}

fn semigroup_laws() -> Outcome {
    let d = operator()?;
    let mut r = rng(3);
    for _ in 0..20 {
        let u = random_state(*d.grid(), &mut r, -1.0, 1.0);
        let (t, s) = (r.random_range(0.0..4.0), r.random_range(0.0..4.0));
        let id = d.semigroup_apply(0.0, &u).map_err(err)?;
        ensure(id.l2_distance(&u) <= 1e-12 * u.l2_norm(), || "S(0) != I".into())?;
        let a = d.semigroup_apply(t + s, &u).map_err(err)?;
        let b = d
            .semigroup_apply(t, &d.semigroup_apply(s, &u).map_err(err)?)
            .map_err(err)?;
        ensure(a.l2_distance(&b) <= 1e-10 * u.l2_norm(), || format!("S(t+s) != S(t)S(s) at t={t}, s={s}"))?;
        ensure(a.l2_norm() <= u.l2_norm() * (1.0 + 1e-12), || "not a contraction".into())?;
        let pos = random_state(*d.grid(), &mut r, 0.0, 1.0);
        let out = d.semigroup_apply(t, &pos).map_err(err)?;
        ensure(out.min_value() >= -1e-12, || format!("positivity lost: {}", out.min_value()))?;
    }
    Ok("20 random states".into())
}

fn resolvent_laws() -> Outcome {
    let d = operator()?;
    let mut r = rng(4);
    for theta in [0.1, 1.0, 10.0, 1e3] {
        let u = random_state(*d.grid(), &mut r, -1.0, 1.0);
        let ru = d.resolvent_apply(theta, &u).map_err(err)?;
        let back = ru.map_components(|c, f| {
            let lap = f.laplacian_neumann();
            let rate = d.rates()[c];
            ScalarField::new(*f.grid(), f.values().iter().zip(lap.values()).map(|(v, l)| theta * v - rate * l).collect())
                .expect("finite")
        });
        ensure(back.l2_distance(&u) <= 1e-10 * u.l2_norm().max(1.0), || format!("(θ−A)R u != u at θ={theta}"))?;
        let tri = d.resolvent_tridiagonal(theta, &u).map_err(err)?;
        ensure(tri.l2_distance(&ru) <= 1e-10 * ru.l2_norm(), || "spectral and tridiagonal resolvents differ".into())?;
        let y = d.yosida_apply(theta, &u).map_err(err)?;
        ensure(y.l2_norm() <= u.l2_norm() * (1.0 + 1e-12), || format!("‖θR‖ > 1 at θ={theta}"))?;
    }
    Ok("θ ∈ {0.1, 1, 10, 1000}".into())
}

fn yosida_monotone() -> Outcome {
    let d = operator()?;
    let g = *d.grid();
    let u = StateField::new(
        ScalarField::from_fn(g, |x| (-(x - 2.0f64).powi(2)).exp()),
        ScalarField::from_fn(g, |x| 0.5 + 0.3 * (x / 2.0).cos()),
        ScalarField::from_fn(g, |x| x / 6.0),
    )
    .map_err(err)?;
    let dist: Vec<f64> = [10.0, 1e2, 1e3, 1e4]
        .iter()
        .map(|&th| d.yosida_apply(th, &u).map(|y| y.l2_distance(&u)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    ensure(dist.windows(2).all(|w| w[1] < w[0]), || format!("not monotone: {dist:?}"))?;
    Ok(format!("‖θRu − u‖ at θ=1e4: {:.2e}", dist[3]))
}

fn model_values() -> Outcome {
    let t1 = ModelParams::homogeneous(4, 0.5, 0.3, 0.2, 0.2, Incidence::Standard, [0.1; 3]).map_err(err)?;
    let holling = Incidence::HollingCrowleyMartin { a: 0.1, b: 0.0 };
    let t2 = ModelParams::homogeneous(4, 0.5, 0.3, 0.05, 0.4, holling, [0.1; 3]).map_err(err)?;
    let r1 = basic_reproduction_number(&t1).map_err(err)?;
    let r2 = basic_reproduction_number(&t2).map_err(err)?;
    ensure((r1 - 2.0 / 3.0).abs() < 1e-12, || format!("R0 table 1 = {r1}"))?;
    ensure((r2 - 0.2 / 0.105).abs() < 1e-12, || format!("R0 table 2 = {r2}"))?;
    let jc = JumpCoefficients::uniform(1, 4, [0.2; 3]).map_err(err)?;
    let lam = contraction_lambda_bound(80.0, 0.2, &jc, 1.0);
    ensure((lam - 12.96).abs() < 1e-12, || format!("lambda bound {lam}"))?;
    let rate = Incidence::Standard.rate(0.9, 0.1, 0.2);
    ensure((rate - 0.018).abs() < 1e-15, || format!("standard incidence {rate}"))?;
    ensure(
        Incidence::HollingCrowleyMartin { a: 0.0, b: 0.0 }.validate().is_err(),
        || "a = b = 0 accepted".into(),
    )?;
    Ok(format!("R0 = {r1:.4}, {r2:.4}; λ = {lam}"))
}

fn model_reaction_conserves() -> Outcome {
    let grid = Grid1D::new(6.0, 16).map_err(err)?;
    let p = ModelParams::homogeneous(16, 0.0, 0.0, 0.3, 0.7, Incidence::Standard, [0.1; 3]).map_err(err)?;
    let mut r = rng(5);
    for _ in 0..20 {
        let u = random_state(grid, &mut r, 0.0, 1.0);
        let f = levy_sir::model::reaction_rhs(&p, &u);
        for j in 0..16 {
            let sum = f.s.values()[j] + f.i.values()[j] + f.r.values()[j];
            ensure(sum.abs() < 1e-14, || format!("reaction not conservative: {sum:e}"))?;
        }
    }
    Ok("Λ = μ = 0".into())
}

fn noise_poisson_counts(n: u64) -> Outcome {
    let m = MarkMeasure::single(1.0).map_err(err)?;
    let mut total = 0usize;
    for p in 0..n {
        total += sample_jump_events(PathSeed::new(77, p), &m, 80.0).map_err(err)?.len();
    }
    let mean = total as f64 / n as f64;
    let se = (80.0 / n as f64).sqrt();
    ensure((mean - 80.0).abs() <= 4.0 * se, || format!("mean count {mean}"))?;
    let a = sample_jump_events(PathSeed::new(1, 2), &m, 80.0).map_err(err)?;
    let b = sample_jump_events(PathSeed::new(1, 2), &m, 80.0).map_err(err)?;
    ensure(a == b, || "event streams not reproducible".into())?;
    Ok(format!("mean count {mean:.3} over {n} paths"))
}

fn noise_gaussian_moments() -> Outcome {
    let grid = Grid1D::new(6.0, 50).map_err(err)?;
    let mut s = GaussianStream::new(PathSeed::new(3, 0));
    let dt = 0.01;
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        for f in s.next_increments(&grid, dt) {
            for v in f.values() {
                sum += v;
                sq += v * v;
                n += 1.0;
            }
        }
    }
    let mean = sum / n;
    let var = sq / n - mean * mean;
    ensure(mean.abs() <= 4.0 * (dt / n).sqrt(), || format!("mean {mean:e}"))?;
    ensure((var / dt - 1.0).abs() <= 0.03, || format!("variance / dt = {}", var / dt))?;
    Ok(format!("variance / dt = {:.4}", var / dt))
}

fn table1(n: usize) -> Result<ModelParams, String> {
    ModelParams::homogeneous(n, 0.5, 0.3, 0.2, 0.2, Incidence::Standard, [0.1; 3]).map_err(err)
}

fn levy_noise(n: usize, c: f64) -> Result<NoiseSpec, String> {
    Ok(NoiseSpec::Levy {
        measure: MarkMeasure::single(1.0).map_err(err)?,
        coefficients: JumpCoefficients::uniform(1, n, [c; 3]).map_err(err)?,
    })
}

fn bump(grid: Grid1D) -> Result<StateField, String> {
    StateField::new(
        ScalarField::from_fn(grid, |x| 0.8 + 0.1 * (x / 2.0).cos()),
        ScalarField::from_fn(grid, |x| 0.1 * (-(x - 2.0f64).powi(2)).exp()),
        ScalarField::constant(grid, 0.05),
    )
    .map_err(err)
}

fn schemes_reduce() -> Outcome {
    let n = 20;
    let grid = Grid1D::new(6.0, n).map_err(err)?;
    let u = bump(grid)?;
    let cfg = |kind| SchemeConfig::new(0.01, 1.0, kind);
    let det = Stepper::from_params(table1(n)?, NoiseSpec::Deterministic, cfg(SchemeKind::DeterministicSplitting), grid)
        .map_err(err)?;
    let lie = det.step_lie_euler(&u).map_err(err)?;
    let gauss = NoiseSpec::Gaussian {
        sigma: [0.0; 3],
        scale_by_inv_sqrt_dx: false,
    };
    let g = Stepper::from_params(table1(n)?, gauss, cfg(SchemeKind::GaussianMilstein), grid).map_err(err)?;
    let dw = GaussianStream::new(PathSeed::new(0, 0)).next_increments(&grid, 0.01);
    let dg = g.step_gaussian_milstein(&u, &dw).map_err(err)?.sup_distance(&lie);
    ensure(dg <= 1e-12, || format!("σ = 0 Milstein differs from Lie step by {dg:e}"))?;
    let l = Stepper::from_params(table1(n)?, levy_noise(n, 0.0)?, cfg(SchemeKind::LevyEuler), grid).map_err(err)?;
    let dl = l.step_levy_euler(&u, 0.0, &[]).map_err(err)?.sup_distance(&lie);
    ensure(dl <= 1e-12, || format!("C = 0 Euler differs from Lie step by {dl:e}"))?;
    Ok(format!("deviations {dg:.1e}, {dl:.1e}"))
}

fn schemes_jump_kick() -> Outcome {
    let n = 8;
    let grid = Grid1D::new(6.0, n).map_err(err)?;
    let p = ModelParams::homogeneous(n, 0.0, 0.0, 0.0, 0.0, Incidence::Standard, [0.1; 3]).map_err(err)?;
    let jc = JumpCoefficients::uniform(1, n, [0.2; 3]).map_err(err)?;
    let st = Stepper::from_params(p, levy_noise(n, 0.2)?, SchemeConfig::new(0.01, 1.0, SchemeKind::LevyEuler), grid)
        .map_err(err)?;
    let u = StateField::constant(grid, 1.0, 1.0, 1.0);
    let before = st.step_levy_euler(&u, 0.0, &[]).map_err(err)?;
    let after = st
        .step_levy_euler(&u, 0.0, &[JumpEvent { time: 0.01, mark_index: 0 }])
        .map_err(err)?;
    let kick = jump_multiplier(&jc, 0, &before).map_err(err)?;
    for c in 0..3 {
        for j in 0..n {
            let d = after.components()[c].values()[j] - before.components()[c].values()[j];
            let k = kick.components()[c].values()[j];
            ensure((d - k).abs() < 1e-15, || format!("jump size {d} != {k}"))?;
        }
    }
    Ok("u ≡ 1 → ×1.2 after compensator".into())
}

fn schemes_mass(t_end: f64) -> Outcome {
    let n = 30;
    let grid = Grid1D::new(6.0, n).map_err(err)?;
    let p = ModelParams::homogeneous(n, 0.0, 0.0, 0.2, 0.6, Incidence::Standard, [0.1, 0.2, 0.05]).map_err(err)?;
    let cfg = SchemeConfig::new(0.01, t_end, SchemeKind::DeterministicSplitting).record_every(100);
    let st = Stepper::from_params(p, NoiseSpec::Deterministic, cfg, grid).map_err(err)?;
    let u0 = bump(grid)?;
    let rec = st.run_path(&u0, PathSeed::new(0, 0)).map_err(err)?;
    let m0 = u0.total_mass();
    let drift = rec
        .states
        .iter()
        .map(|s| (s.total_mass() - m0).abs() / m0)
        .fold(0.0, f64::max);
    ensure(drift <= 1e-9, || format!("relative mass drift {drift:e}"))?;
    Ok(format!("relative drift {drift:.1e} over (0, {t_end})"))
}

fn schemes_reproducible() -> Outcome {
    let n = 12;
    let grid = Grid1D::new(6.0, n).map_err(err)?;
    let cfg = SchemeConfig::new(0.05, 5.0, SchemeKind::LevyEuler);
    let st = Stepper::from_params(table1(n)?, levy_noise(n, 0.2)?, cfg, grid).map_err(err)?;
    let u = bump(grid)?;
    let a = st.run_path(&u, PathSeed::new(9, 1)).map_err(err)?;
    let b = st.run_path(&u, PathSeed::new(9, 1)).map_err(err)?;
    ensure(a == b, || "same seed gave different paths".into())?;
    let s = levy_sir::schemes::run_ensemble(&st, &u, 9, 17, false).map_err(err)?;
    let p = levy_sir::schemes::run_ensemble(&st, &u, 9, 17, true).map_err(err)?;
    ensure(s == p, || "serial and parallel ensembles differ".into())?;
    Ok("paths and ensembles bit-identical".into())
}

fn diagnostics_cutoffs() -> Outcome {
    let eps = 0.1;
    let v = eta_eps(eps, -2.0 * eps);
    ensure((v - 23.0 * eps * eps / 6.0).abs() < 1e-15, || format!("η(−2ε) = {v}"))?;
    let z = zeta_eps(eps, eps / 2.0);
    ensure((z - 7.0 * eps / 16.0).abs() < 1e-15, || format!("ζ(ε/2) = {z}"))?;
    let grid = Grid1D::new(6.0, 10).map_err(err)?;
    let rep = positivity_functional(eps, &StateField::constant(grid, 0.9, 0.1, 0.0)).map_err(err)?;
    ensure(rep.j_value == 0.0, || format!("J = {} on a nonnegative state", rep.j_value))?;
    Ok("η, ζ, J values".into())
}

fn diagnostics_isometry(n_paths: u64) -> Outcome {
    let m = MarkMeasure::single(1.0).map_err(err)?;
    let jc = JumpCoefficients::uniform(1, 2, [0.2; 3]).map_err(err)?;
    let chk = ito_isometry_check(&m, &jc, 0.2, 80.0, n_paths, 5).map_err(err)?;
    ensure(chk.z_score.abs() <= 4.0, || format!("z = {}", chk.z_score))?;
    Ok(format!("lhs {:.4} rhs {:.4} z {:.2}", chk.lhs, chk.rhs, chk.z_score))
}

fn sir_rhs(y: [f64; 3]) -> [f64; 3] {
    let (lambda, mu, gamma, beta) = (0.5, 0.3, 0.2, 0.2);
    let inc = beta * y[0] * y[1] / (y[0] + y[1]);
    [lambda - inc - mu * y[0], inc - (mu + gamma) * y[1], gamma * y[1] - mu * y[2]]
}

/// Classical RK4 with a fixed small step; used only as a reference.
fn rk4_reference(y0: [f64; 3], t_end: f64, steps: usize) -> [f64; 3] {
    let h = t_end / steps as f64;
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let mut y = y0;
    for _ in 0..steps {
        let k1 = sir_rhs(y);
        let k2 = sir_rhs(add(y, k1, h / 2.0));
        let k3 = sir_rhs(add(y, k2, h / 2.0));
        let k4 = sir_rhs(add(y, k3, h));
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    y
}

fn schemes_ode_oracle() -> Outcome {
    let n = 4;
    let grid = Grid1D::new(6.0, n).map_err(err)?;
    let cfg = SchemeConfig::new(1e-3, 10.0, SchemeKind::DeterministicSplitting).record_every(10_000);
    let st = Stepper::from_params(table1(n)?, NoiseSpec::Deterministic, cfg, grid).map_err(err)?;
    let rec = st
        .run_path(&StateField::constant(grid, 0.9, 0.1, 0.0), PathSeed::new(0, 0))
        .map_err(err)?;
    let exact = rk4_reference([0.9, 0.1, 0.0], 10.0, 100_000);
    let fin = rec.final_state();
    let e = (0..3)
        .map(|c| (fin.components()[c].values()[0] - exact[c]).abs())
        .fold(0.0, f64::max);
    ensure(e <= 1e-6, || format!("sup error {e:e}"))?;
    Ok(format!("sup error {e:.2e} at T = 10"))
}

fn strang_order() -> Outcome {
    let n = 32;
    let grid = Grid1D::new(6.0, n).map_err(err)?;
    let p = ModelParams::homogeneous(n, 0.5, 0.3, 0.2, 3.0, Incidence::Standard, [0.5, 1.0, 2.0]).map_err(err)?;
    let u0 = StateField::new(
        ScalarField::from_fn(grid, |x| 0.8 + 0.2 * (std::f64::consts::PI * x / 6.0).cos()),
        ScalarField::from_fn(grid, |x| 0.2 + 0.15 * (3.0 * std::f64::consts::PI * x / 6.0).cos()),
        ScalarField::zeros(grid),
    )
    .map_err(err)?;
    let run = |dt: f64| -> Result<StateField, String> {
        let cfg = SchemeConfig::new(dt, 2.0, SchemeKind::DeterministicSplitting).record_every(usize::MAX / 2);
        let st = Stepper::from_params(p.clone(), NoiseSpec::Deterministic, cfg, grid).map_err(err)?;
        Ok(st.run_path(&u0, PathSeed::new(0, 0)).map_err(err)?.final_state().clone())
    };
    let a = run(1.25e-4)?;
    let b = run(6.25e-5)?;
    let reference = b.map_components(|c, f| {
        let coarse = a.components()[c].values();
        ScalarField::new(*f.grid(), f.values().iter().zip(coarse).map(|(fb, fa)| (4.0 * fb - fa) / 3.0).collect())
            .expect("finite")
    });
    let errs = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| run(dt).map(|u| u.sup_distance(&reference)))
        .collect::<Result<Vec<_>, _>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(orders.iter().all(|&q| q >= 1.9), || format!("observed orders {orders:?}"))?;
    Ok(format!("orders {:.3}, {:.3}", orders[0], orders[1]))
}

fn slope(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn inert(n: usize) -> Result<ModelParams, String> {
    ModelParams::homogeneous(n, 0.0, 0.0, 0.0, 0.0, Incidence::Standard, [0.1; 3]).map_err(err)
}

fn milstein_order() -> Outcome {
    let grid = Grid1D::new(1.0, 2).map_err(err)?;
    let levels = [3u32, 4, 5, 6, 7];
    let finest = 1usize << 7;
    let noise = NoiseSpec::Gaussian {
        sigma: [1.0; 3],
        scale_by_inv_sqrt_dx: false,
    };
    let steppers = levels
        .iter()
        .map(|&l| {
            let cfg = SchemeConfig::new(1.0 / (1u32 << l) as f64, 1.0, SchemeKind::GaussianMilstein).clip_negatives(false);
            Stepper::from_params(inert(2)?, noise.clone(), cfg, grid).map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = rng(11);
    let mut errs = vec![0.0; levels.len()];
    let n_paths = 1000;
    for _ in 0..n_paths {
        let h = 1.0 / finest as f64;
        let fine: Vec<f64> = (0..finest)
            .map(|_| {
                let z: f64 = r.sample(StandardNormal);
                h.sqrt() * z
            })
            .collect();
        let exact = (fine.iter().sum::<f64>() - 0.5).exp();
        for (k, st) in steppers.iter().enumerate() {
            let mut u = StateField::constant(grid, 1.0, 1.0, 1.0);
            for chunk in fine.chunks(finest / st.n_steps()) {
                let dw: f64 = chunk.iter().sum();
                let inc = [0, 1, 2].map(|_| ScalarField::constant(grid, dw));
                u = st.step_gaussian_milstein(&u, &inc).map_err(err)?;
            }
            errs[k] += (u.s.values()[0] - exact).abs() / n_paths as f64;
        }
    }
    let dts: Vec<f64> = steppers.iter().map(|s| s.dt()).collect();
    let q = slope(&dts, &errs);
    ensure((q - 1.0).abs() <= 0.2, || format!("strong order {q}"))?;
    Ok(format!("strong order {q:.3}"))
}

fn levy_order() -> Outcome {
    let grid = Grid1D::new(1.0, 2).map_err(err)?;
    let c = 0.5;
    let noise = levy_noise(2, c)?;
    let measure = MarkMeasure::single(1.0).map_err(err)?;
    let dts = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let steppers = dts
        .iter()
        .map(|&dt| {
            let cfg = SchemeConfig::new(dt, 5.0, SchemeKind::LevyEuler).record_every(usize::MAX / 2);
            Stepper::from_params(inert(2)?, noise.clone(), cfg, grid).map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let u0 = StateField::constant(grid, 1.0, 1.0, 1.0);
    let mut errs = vec![0.0; dts.len()];
    let n_paths = 1000;
    for p in 0..n_paths {
        let seed = PathSeed::new(23, p);
        let jumps = sample_jump_events(seed, &measure, 5.0).map_err(err)?.len() as i32;
        let exact = (1.0 + c).powi(jumps) * (-c * 5.0f64).exp();
        for (k, st) in steppers.iter().enumerate() {
            let rec = st.run_path(&u0, seed).map_err(err)?;
            errs[k] += (rec.final_state().i.values()[0] - exact).abs() / n_paths as f64;
        }
    }
    let q = slope(&dts, &errs);
    ensure((q - 1.0).abs() <= 0.2, || format!("strong order {q}"))?;
    Ok(format!("strong order {q:.3}"))
}

type CheckFn = fn() -> Outcome;

fn quick_checks() -> Vec<(&'static str, &'static str, CheckFn)> {
    vec![
        ("grid", "laplacian conserves mass", || conservation_check(laplacian_neumann)),
        ("grid", "laplacian symmetric, nonpositive", laplacian_symmetric),
        ("semigroup", "identity, semigroup law, contraction, positivity", semigroup_laws),
        ("semigroup", "resolvent identity and bound", resolvent_laws),
        ("semigroup", "yosida convergence is monotone", yosida_monotone),
        ("model", "R0, lambda bound, incidence", model_values),
        ("model", "reaction conserves mass", model_reaction_conserves),
        ("noise", "poisson event counts", || noise_poisson_counts(2000)),
        ("noise", "gaussian increment moments", noise_gaussian_moments),
        ("schemes", "zero noise reduces to lie step", schemes_reduce),
        ("schemes", "jump kick is multiplicative", schemes_jump_kick),
        ("schemes", "mass conservation (0, 10)", || schemes_mass(10.0)),
        ("schemes", "seeded reproducibility", schemes_reproducible),
        ("diagnostics", "cutoff functions", diagnostics_cutoffs),
    ]
}

fn full_checks() -> Vec<(&'static str, &'static str, CheckFn)> {
    vec![
        ("schemes", "mass conservation (0, 80)", || schemes_mass(80.0)),
        ("schemes", "splitting matches ODE reference", schemes_ode_oracle),
        ("schemes", "strang order 2", strang_order),
        ("schemes", "milstein strong order 1", milstein_order),
        ("schemes", "jump euler strong order 1", levy_order),
        ("noise", "poisson event counts (1e4 paths)", || noise_poisson_counts(10_000)),
        ("diagnostics", "ito isometry (1e4 paths)", || diagnostics_isometry(10_000)),
    ]
}

pub fn run_checks(level: Level) -> Vec<CheckResult> {
    let mut checks = quick_checks();
    if level == Level::Full {
        checks.extend(full_checks());
    }
    checks
        .into_iter()
        .map(|(module, name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                module,
                name,
                passed,
                detail,
            }
        })
        .collect()
}

pub fn render(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{:<4}  {:<12} {:<50} {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.module,
            r.name,
            r.detail
        ));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    out.push_str(&format!("{} checks, {} failed\n", results.len(), failed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let results = run_checks(Level::Quick);
        assert!(results.iter().all(|r| r.passed), "{}", render(&results));
    }

    #[test]
    fn off_by_one_ghost_breaks_conservation() {
        // reflect across the wrong cell: ghost = f[1] instead of f[0]
        let tampered = |f: &[f64], dx: f64| {
            let n = f.len();
            (0..n)
                .map(|j| {
                    let left = if j == 0 { f[1] } else { f[j - 1] };
                    let right = if j + 1 == n { f[n - 1] } else { f[j + 1] };
                    (left - 2.0 * f[j] + right) / (dx * dx)
                })
                .collect()
        };
        assert!(conservation_check(tampered).is_err());
        assert!(conservation_check(laplacian_neumann).is_ok());
    }
}
