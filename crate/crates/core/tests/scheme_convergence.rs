use levy_sir::grid::{Grid1D, ScalarField, StateField};
use levy_sir::model::{jump_multiplier, Incidence, JumpCoefficients, ModelParams};
use levy_sir::noise::{sample_jump_events, JumpEvent, MarkMeasure, PathSeed};
use levy_sir::schemes::{NoiseSpec, SchemeConfig, SchemeKind, Stepper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn sir_rhs(p: [f64; 4], y: [f64; 3]) -> [f64; 3] {
    let [lambda, mu, gamma, beta] = p;
    let inc = beta * y[0] * y[1] / (y[0] + y[1]);
    [
        lambda - inc - mu * y[0],
        inc - (mu + gamma) * y[1],
        gamma * y[1] - mu * y[2],
    ]
}

/// Adaptive Dormand–Prince 5(4) integrator for a three-component ODE.
fn dopri5(f: impl Fn([f64; 3]) -> [f64; 3], y0: [f64; 3], t_end: f64, tol: f64) -> [f64; 3] {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut t = 0.0;
    let mut y = y0;
    let mut h: f64 = 1e-3;
    while t < t_end {
        h = h.min(t_end - t);
        let mut k = [[0.0; 3]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (m, a) in A[s].iter().enumerate().take(s) {
                for c in 0..3 {
                    ys[c] += h * a * k[m][c];
                }
            }
            k[s] = f(ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..3 {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * k[s][c];
                lo += B4[s] * k[s][c];
            }
            y5[c] += h * hi;
            err = err.max((h * (hi - lo)).abs() / (tol * (1.0 + y5[c].abs())));
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}

#[test]
fn homogeneous_splitting_matches_ode_oracle() {
    let p = [0.5, 0.3, 0.2, 0.2];
    let n = 8;
    let g = Grid1D::new(6.0, n).unwrap();
    let params = ModelParams::homogeneous(n, p[0], p[1], p[2], p[3], Incidence::Standard, [0.1; 3]).unwrap();
    let cfg = SchemeConfig::new(1e-3, 10.0, SchemeKind::DeterministicSplitting).record_every(10_000);
    let st = Stepper::from_params(params, NoiseSpec::Deterministic, cfg, g).unwrap();
    let y0 = [0.9, 0.1, 0.0];
    let rec = st
        .run_path(&StateField::constant(g, y0[0], y0[1], y0[2]), PathSeed::new(0, 0))
        .unwrap();
    let exact = dopri5(|y| sir_rhs(p, y), y0, 10.0, 1e-13);
    let fin = rec.final_state();
    for (c, field) in fin.components().iter().enumerate() {
        for v in field.values() {
            assert!((v - exact[c]).abs() <= 1e-6, "component {c}: {v} vs {}", exact[c]);
        }
    }
}

#[test]
fn oracle_reproduces_closed_form_decay() {
    let y = dopri5(|y| [-y[0], -2.0 * y[1], 0.0], [1.0, 1.0, 3.0], 2.0, 1e-12);
    assert!((y[0] - (-2.0f64).exp()).abs() < 1e-10);
    assert!((y[1] - (-4.0f64).exp()).abs() < 1e-10);
    assert_eq!(y[2], 3.0);
}

fn strang_final(dt: f64, t_end: f64) -> StateField {
    let n = 32;
    let g = Grid1D::new(6.0, n).unwrap();
    let params = ModelParams::homogeneous(n, 0.5, 0.3, 0.2, 3.0, Incidence::Standard, [0.5, 1.0, 2.0]).unwrap();
    let cfg = SchemeConfig::new(dt, t_end, SchemeKind::DeterministicSplitting).record_every(usize::MAX / 2);
    let st = Stepper::from_params(params, NoiseSpec::Deterministic, cfg, g).unwrap();
    let u0 = StateField::new(
        ScalarField::from_fn(g, |x| 0.8 + 0.2 * (std::f64::consts::PI * x / 6.0).cos()),
        ScalarField::from_fn(g, |x| 0.2 + 0.15 * (3.0 * std::f64::consts::PI * x / 6.0).cos()),
        ScalarField::zeros(g),
    )
    .unwrap();
    st.run_path(&u0, PathSeed::new(0, 0)).unwrap().final_state().clone()
}

#[test]
fn strang_splitting_is_second_order() {
    let t_end = 2.0;
    let fine = strang_final(1.25e-4, t_end);
    let finer = strang_final(6.25e-5, t_end);
    // Richardson-extrapolated reference
    let reference = StateField::new(
        ScalarField::new(*fine.grid(), fine.s.values().iter().zip(finer.s.values()).map(|(a, b)| (4.0 * b - a) / 3.0).collect()).unwrap(),
        ScalarField::new(*fine.grid(), fine.i.values().iter().zip(finer.i.values()).map(|(a, b)| (4.0 * b - a) / 3.0).collect()).unwrap(),
        ScalarField::new(*fine.grid(), fine.r.values().iter().zip(finer.r.values()).map(|(a, b)| (4.0 * b - a) / 3.0).collect()).unwrap(),
    )
    .unwrap();
    let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| strang_final(dt, t_end).sup_distance(&reference))
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    println!("strang errors {errs:?} orders {orders:?}");
    assert!(orders.iter().all(|&q| q >= 1.9), "{orders:?}");
}

fn fit_slope(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn inert_params(n: usize) -> ModelParams {
    ModelParams::homogeneous(n, 0.0, 0.0, 0.0, 0.0, Incidence::Standard, [0.1; 3]).unwrap()
}

#[test]
fn milstein_strong_order_on_geometric_brownian_motion() {
    let g = Grid1D::new(1.0, 2).unwrap();
    let t_end = 1.0;
    let levels = [3u32, 4, 5, 6, 7];
    let finest = 1usize << levels[levels.len() - 1];
    let steppers: Vec<Stepper> = levels
        .iter()
        .map(|&l| {
            let cfg = SchemeConfig::new(t_end / (1u32 << l) as f64, t_end, SchemeKind::GaussianMilstein)
                .clip_negatives(false);
            let noise = NoiseSpec::Gaussian {
                sigma: [1.0; 3],
                scale_by_inv_sqrt_dx: false,
            };
            Stepper::from_params(inert_params(2), noise, cfg, g).unwrap()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n_paths = 1000;
    let mut err = vec![0.0; levels.len()];
    let x0 = 1.0;
    for _ in 0..n_paths {
        let h = t_end / finest as f64;
        let fine: Vec<f64> = (0..finest)
            .map(|_| h.sqrt() * { let z: f64 = StandardNormal.sample(&mut rng); z })
            .collect();
        let w: f64 = fine.iter().sum();
        let exact = x0 * (w - 0.5 * t_end).exp();
        for (li, st) in steppers.iter().enumerate() {
            let m = finest / st.n_steps();
            let mut u = StateField::constant(g, x0, x0, x0);
            for chunk in fine.chunks(m) {
                let dw: f64 = chunk.iter().sum();
                let inc = [0, 1, 2].map(|_| ScalarField::constant(g, dw));
                u = st.step_gaussian_milstein(&u, &inc).unwrap();
            }
            err[li] += (u.i.values()[0] - exact).abs() / n_paths as f64;
        }
    }
    let dts: Vec<f64> = steppers.iter().map(|s| s.dt()).collect();
    let slope = fit_slope(&dts, &err);
    println!("milstein errors {err:?} slope {slope}");
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn levy_euler_strong_order_on_pure_jump_equation() {
    let g = Grid1D::new(1.0, 2).unwrap();
    let (c, rate, t_end, x0) = (0.5, 1.0, 5.0, 1.0);
    let measure = MarkMeasure::single(rate).unwrap();
    let noise = NoiseSpec::Levy {
        measure: measure.clone(),
        coefficients: JumpCoefficients::uniform(1, 2, [c; 3]).unwrap(),
    };
    let dts = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let steppers: Vec<Stepper> = dts
        .iter()
        .map(|&dt| {
            let cfg = SchemeConfig::new(dt, t_end, SchemeKind::LevyEuler).record_every(usize::MAX / 2);
            Stepper::from_params(inert_params(2), noise.clone(), cfg, g).unwrap()
        })
        .collect();
    let n_paths = 1000;
    let mut err = vec![0.0; dts.len()];
    let u0 = StateField::constant(g, x0, x0, x0);
    for p in 0..n_paths {
        let seed = PathSeed::new(23, p);
        let n_jumps = sample_jump_events(seed, &measure, t_end).unwrap().len() as i32;
        let exact = x0 * (1.0 + c).powi(n_jumps) * (-c * rate * t_end).exp();
        for (k, st) in steppers.iter().enumerate() {
            let rec = st.run_path(&u0, seed).unwrap();
            assert_eq!(rec.jump_log.len() as i32, n_jumps);
            err[k] += (rec.final_state().s.values()[1] - exact).abs() / n_paths as f64;
        }
    }
    let slope = fit_slope(&dts, &err);
    println!("levy errors {err:?} slope {slope}");
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn mass_is_conserved_without_vital_dynamics() {
    let n = 40;
    let g = Grid1D::new(6.0, n).unwrap();
    let params = ModelParams::homogeneous(n, 0.0, 0.0, 0.4, 0.9, Incidence::Standard, [0.1, 0.05, 0.2]).unwrap();
    let cfg = SchemeConfig::new(0.01, 80.0, SchemeKind::DeterministicSplitting).record_every(100);
    let st = Stepper::from_params(params, NoiseSpec::Deterministic, cfg, g).unwrap();
    let u0 = StateField::new(
        ScalarField::from_fn(g, |x| 0.9 + 0.1 * (x / 2.0).sin()),
        ScalarField::from_fn(g, |x| 0.1 * (-(x - 1.0).powi(2)).exp()),
        ScalarField::zeros(g),
    )
    .unwrap();
    let rec = st.run_path(&u0, PathSeed::new(0, 0)).unwrap();
    let m0 = u0.total_mass();
    for s in &rec.states {
        assert!((s.total_mass() - m0).abs() <= 1e-9 * m0);
    }
}

#[test]
fn yosida_terminal_states_converge_to_plain_euler() {
    let n = 24;
    let g = Grid1D::new(6.0, n).unwrap();
    let params = ModelParams::homogeneous(n, 0.5, 0.3, 0.2, 0.6, Incidence::Standard, [0.1; 3]).unwrap();
    let noise = NoiseSpec::Levy {
        measure: MarkMeasure::single(1.0).unwrap(),
        coefficients: JumpCoefficients::uniform(1, n, [0.2, 0.3, 0.1]).unwrap(),
    };
    let u0 = StateField::new(
        ScalarField::from_fn(g, |x| 0.7 + 0.2 * (x / 2.0).cos()),
        ScalarField::from_fn(g, |x| 0.2 * (-(x - 3.0).powi(2)).exp()),
        ScalarField::zeros(g),
    )
    .unwrap();
    let run = |kind| {
        let cfg = SchemeConfig::new(0.01, 10.0, kind).record_every(usize::MAX / 2);
        Stepper::from_params(params.clone(), noise.clone(), cfg, g)
            .unwrap()
            .run_path(&u0, PathSeed::new(4, 0))
            .unwrap()
            .final_state()
            .clone()
    };
    let plain = run(SchemeKind::LevyEuler);
    let dist: Vec<f64> = [10.0, 1e2, 1e3, 1e4]
        .iter()
        .map(|&theta| run(SchemeKind::LevyEulerYosida { theta }).l2_distance(&plain) / plain.l2_norm())
        .collect();
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
    assert!(dist[3] <= 1e-4, "{dist:?}");
}

#[test]
fn solutions_depend_lipschitz_on_initial_data() {
    let n = 24;
    let g = Grid1D::new(6.0, n).unwrap();
    let params = ModelParams::homogeneous(n, 0.5, 0.3, 0.2, 0.6, Incidence::Standard, [0.1; 3]).unwrap();
    let noise = NoiseSpec::Levy {
        measure: MarkMeasure::single(1.0).unwrap(),
        coefficients: JumpCoefficients::uniform(1, n, [0.2; 3]).unwrap(),
    };
    let base = StateField::new(
        ScalarField::from_fn(g, |x| 0.8 + 0.1 * (x / 2.0).cos()),
        ScalarField::from_fn(g, |x| 0.2 * (-(x - 3.0).powi(2)).exp()),
        ScalarField::zeros(g),
    )
    .unwrap();
    let gains: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&dt| {
            let cfg = SchemeConfig::new(dt, 10.0, SchemeKind::LevyEuler).record_every(usize::MAX / 2);
            let st = Stepper::from_params(params.clone(), noise.clone(), cfg, g).unwrap();
            let mut worst = 0.0f64;
            for delta in [1e-3, 1e-4, 1e-5] {
                let bumped = base.map_components(|_, f| f.map(|v| v + delta));
                let a = st.run_path(&base, PathSeed::new(6, 0)).unwrap();
                let b = st.run_path(&bumped, PathSeed::new(6, 0)).unwrap();
                let gain = a.final_state().l2_distance(b.final_state()) / base.l2_distance(&bumped);
                worst = worst.max(gain);
            }
            worst
        })
        .collect();
    assert!(gains.iter().all(|k| k.is_finite() && *k < 50.0), "{gains:?}");
    assert!((gains[0] - gains[1]).abs() <= 0.2 * gains[1], "{gains:?}");
}

#[test]
fn jump_size_equals_multiplicative_kick() {
    let n = 16;
    let g = Grid1D::new(6.0, n).unwrap();
    let params = ModelParams::homogeneous(n, 0.5, 0.3, 0.2, 0.6, Incidence::Standard, [0.1; 3]).unwrap();
    let jc = JumpCoefficients::per_mark(n, &[[0.3, -0.2, 0.1], [-0.4, 0.5, 0.0]]).unwrap();
    let noise = NoiseSpec::Levy {
        measure: MarkMeasure::new(vec![(1.0, 0.4), (2.0, 0.6)]).unwrap(),
        coefficients: jc.clone(),
    };
    let cfg = SchemeConfig::new(0.01, 1.0, SchemeKind::LevyEuler);
    let st = Stepper::from_params(params, noise, cfg, g).unwrap();
    let u = StateField::new(
        ScalarField::from_fn(g, |x| 0.6 + 0.1 * x.sin()),
        ScalarField::from_fn(g, |x| 0.1 + 0.05 * x.cos()),
        ScalarField::constant(g, 0.2),
    )
    .unwrap();
    let left = st.step_levy_euler(&u, 0.3, &[]).unwrap();
    for mark in 0..2 {
        let right = st
            .step_levy_euler(&u, 0.3, &[JumpEvent { time: 0.305, mark_index: mark }])
            .unwrap();
        let jump = jump_multiplier(&jc, mark, &left).unwrap();
        for c in 0..3 {
            for j in 0..n {
                let got = right.components()[c].values()[j] - left.components()[c].values()[j];
                assert!((got - jump.components()[c].values()[j]).abs() < 1e-15);
            }
        }
    }
}
