use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpe_core::analysis::checks::random_smooth;
use mpe_core::analysis::uniqueness::{uniqueness_experiment, Perturbation, PerturbationShape, DELTA};
use mpe_core::analysis::{capital_g, capital_g_inverse, Nonlinearity};
use mpe_core::boundary::{fill_all, fill_lateral, fill_velocity, fill_vertical, GhostRule};
use mpe_core::config::{AdvectionScheme, Config, InitialKind, ParamMode, PhysParams, ReferenceProfiles};
use mpe_core::diagnostic::{barotropic_project, continuity_residual, diagnose_w, hydrostatic_phi, ProjectionWorkspace};
use mpe_core::grid::{BoundaryRegion, Field2, Grid, HorizontalVelocity, ModelState, ScalarField3};
use mpe_core::io::{append_timeseries, read_field, read_timeseries, write_field, Snapshot};
use mpe_core::microphysics::{assemble_sources, phi_cutoff, regularized_heaviside, tau_clamp};
use mpe_core::operators::{advect, grad_inner_h, inner, laplace_h, vertical_diffusion, DiffusionSpec};

fn grid(nx: usize, ny: usize, np: usize) -> Grid {
    Grid::new(nx, ny, np, 1.0, 0.8, 1.0e4, 1.0e5).unwrap()
}

fn fields() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(fields())]

    #[test]
    fn config_text_round_trips(
        mu in 0.1f64..10.0,
        eps2 in 1e-6f64..1.0,
        nx in 4usize..40,
        dt in 1e-6f64..1e-2,
        t_surface in 250.0f64..320.0,
        f_plus in any::<bool>(),
    ) {
        let mut c = Config::defaults(ParamMode::Nondimensional);
        c.phys.mu_v = mu;
        c.phys.eps2 = eps2;
        c.phys.use_f_plus = f_plus;
        c.run.nx = nx;
        c.run.dt = dt;
        c.boundary.t_surface = t_surface;
        let back = Config::parse(&c.to_config_string()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn boundary_faces_partition(nx in 1usize..12, ny in 1usize..12, np in 1usize..8) {
        let g = grid(nx, ny, np);
        let faces = g.boundary_faces();
        let count = |r: BoundaryRegion| faces.iter().filter(|(_, x)| *x == r).count();
        prop_assert_eq!(count(BoundaryRegion::GammaU), nx * ny);
        prop_assert_eq!(count(BoundaryRegion::GammaI), nx * ny);
        prop_assert_eq!(count(BoundaryRegion::GammaL), 2 * (nx + ny) * np);
        prop_assert_eq!(faces.len(), 2 * nx * ny + 2 * (nx + ny) * np);
    }

    #[test]
    fn field_file_round_trips_bits(data in prop::collection::vec(any::<f64>(), 24), time in any::<f64>()) {
        let dir = tempfile::tempdir().unwrap();
        let s = Snapshot { name: "T".into(), nx: 2, ny: 3, np: 4, time, data };
        let p = dir.path().join("f.mpe1");
        write_field(&p, &s, false).unwrap();
        let back = read_field(&p).unwrap();
        prop_assert_eq!(back.time.to_bits(), s.time.to_bits());
        prop_assert!(back.data.iter().zip(&s.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_round_trips_values(rows in prop::collection::vec(prop::collection::vec(-1e300f64..1e300, 3), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let header: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        for r in &rows {
            append_timeseries(&p, &header, r).unwrap();
        }
        let (h, back) = read_timeseries(&p).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn laplacian_integration_by_parts(seed in any::<u64>(), nx in 4usize..12, ny in 4usize..12) {
        let g = grid(nx, ny, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_smooth(&g, &mut rng);
        let mut h = random_smooth(&g, &mut rng);
        fill_all(&mut f, &g, GhostRule::DirichletZero);
        fill_all(&mut h, &g, GhostRule::DirichletZero);
        let a = inner(&laplace_h(&f, &g), &h, &g);
        let b = -grad_inner_h(&f, &h, &g);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
    }

    #[test]
    fn vertical_diffusion_is_nonpositive(seed in any::<u64>(), np in 2usize..10) {
        let g = grid(4, 3, np);
        let phys = PhysParams::defaults(ParamMode::Nondimensional);
        let spec = DiffusionSpec::scalar(&g, &phys, &ReferenceProfiles::default(), 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_smooth(&g, &mut rng);
        fill_vertical(&mut f, &g, GhostRule::Neumann, GhostRule::Neumann);
        let a = vertical_diffusion(&f, &spec, &g);
        let scale = inner(&a, &a, &g).sqrt() * inner(&f, &f, &g).sqrt();
        prop_assert!(inner(&a, &f, &g) <= 1e-12 * scale);
    }

    #[test]
    fn upwind_step_preserves_range(seed in any::<u64>()) {
        let g = grid(10, 8, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = random_smooth(&g, &mut rng);
        vel.v2 = random_smooth(&g, &mut rng);
        let mut ws = ProjectionWorkspace::new(&g, 1e-13, 8);
        barotropic_project(&mut vel, &g, &mut ws).unwrap();
        diagnose_w(&mut vel, &g).unwrap();
        let mut f = ScalarField3::zeros(&g);
        for v in f.data.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        fill_all(&mut f, &g, GhostRule::Neumann);
        let (lo, hi) = f.min_max();
        let wmax = vel.w.data.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let rate = vel.max_speed() * (2.0 / g.dx + 2.0 / g.dy) + 2.0 * wmax / g.dp;
        let dt = 0.9 / rate;
        let mut next = f.clone();
        next.axpy(dt, &advect(&f, &vel, AdvectionScheme::Upwind, &g));
        let (a, b) = next.min_max();
        prop_assert!(a >= lo - 1e-12 && b <= hi + 1e-12, "[{a}, {b}] vs [{lo}, {hi}]");
    }

    #[test]
    fn laplacian_is_translation_equivariant(seed in any::<u64>(), shift in 1usize..3) {
        let g = grid(12, 10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = ScalarField3::zeros(&g);
        for v in f.data.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut s = ScalarField3::zeros(&g);
        for k in 0..2isize {
            for j in -1..=10isize {
                for i in -1..=12isize {
                    let src = (i + shift as isize).min(12);
                    s.set(i, j, k, f.get(src, j, k));
                }
            }
        }
        let (lf, ls) = (laplace_h(&f, &g), laplace_h(&s, &g));
        for k in 0..2 {
            for j in 0..10 {
                for i in 0..(12 - shift - 1) {
                    prop_assert_eq!(ls.at(i, j, k).to_bits(), lf.at(i + shift, j, k).to_bits());
                }
            }
        }
    }

    #[test]
    fn projection_constraint_and_idempotence(seed in any::<u64>(), nx in 4usize..14, ny in 4usize..14, np in 2usize..6) {
        let g = grid(nx, ny, np);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = random_smooth(&g, &mut rng);
        vel.v2 = random_smooth(&g, &mut rng);
        fill_lateral(&mut vel.v1, &g, GhostRule::DirichletZero);
        fill_lateral(&mut vel.v2, &g, GhostRule::DirichletZero);
        fill_velocity(&mut vel, &g);
        let mut ws = ProjectionWorkspace::new(&g, 1e-14, 8);
        barotropic_project(&mut vel, &g, &mut ws).unwrap();
        let rep = diagnose_w(&mut vel, &g).unwrap();
        prop_assert!(continuity_residual(&vel, &g) <= 1e-10 * rep.divergence_scale);
        let again = barotropic_project(&mut vel, &g, &mut ws).unwrap();
        prop_assert!(again.correction_max <= 1e-12 * vel.max_speed().max(1e-300));
    }

    #[test]
    fn geopotential_is_linear_in_temperature(seed in any::<u64>()) {
        let g = grid(5, 4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = random_smooth(&g, &mut rng);
        let t2 = random_smooth(&g, &mut rng);
        let mut sum = t1.clone();
        sum.axpy(1.0, &t2);
        let ps = Field2::zeros(g.nx, g.ny);
        let (a, b, c) = (hydrostatic_phi(&t1, &ps, &g, 287.0), hydrostatic_phi(&t2, &ps, &g, 287.0), hydrostatic_phi(&sum, &ps, &g, 287.0));
        let scale = a.data.iter().chain(&b.data).fold(1e-300f64, |m, x| m.max(x.abs()));
        for n in 0..c.data.len() {
            prop_assert!((c.data[n] - a.data[n] - b.data[n]).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn heaviside_is_lipschitz(a in -1.0f64..1.0, b in -1.0f64..1.0, eps in 1e-6f64..1.0) {
        let d = (regularized_heaviside(a, eps) - regularized_heaviside(b, eps)).abs();
        prop_assert!(d <= (a - b).abs() / eps * (1.0 + 1e-12));
    }

    #[test]
    fn switches_are_monotone(a in -500.0f64..500.0, b in -500.0f64..500.0) {
        let phys = PhysParams::defaults(ParamMode::Nondimensional);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tau_clamp(lo) <= tau_clamp(hi));
        prop_assert!(regularized_heaviside(lo, 0.01) <= regularized_heaviside(hi, 0.01));
        prop_assert!(lo.max(0.0) <= hi.max(0.0));
        if hi <= phys.t_star_hi {
            prop_assert!(phi_cutoff(lo, &phys) <= phi_cutoff(hi, &phys));
        }
    }

    #[test]
    fn inverse_of_capital_g(r in 0.0f64..10.0, which in 0usize..5) {
        let g = [
            Nonlinearity::One,
            Nonlinearity::Poly1UU2,
            Nonlinearity::Poly1U2U4,
            Nonlinearity::Poly1U2,
            Nonlinearity::Table(vec![(0.0, 1.0), (1.0, 2.0), (4.0, 2.5), (8.0, 9.0)]),
        ][which].clone();
        let back = capital_g_inverse(&g, capital_g(&g, r)).unwrap();
        prop_assert!((back - r).abs() <= 1e-10 * r.max(1.0));
    }

    #[test]
    fn quasi_positive_sources(seed in any::<u64>(), zeroed in 0usize..3) {
        let g = grid(5, 4, 4);
        let phys = PhysParams::defaults(ParamMode::Nondimensional);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ModelState::zeros(&g);
        for (f, hi) in [(&mut s.t, 320.0), (&mut s.qv, 0.05), (&mut s.qc, 0.05), (&mut s.qr, 2.0)] {
            for v in f.data.iter_mut() {
                *v = rng.gen_range(0.0..hi);
            }
        }
        for v in s.t.data.iter_mut() {
            *v += 150.0;
        }
        for w in s.vel.w.data.iter_mut() {
            *w = rng.gen_range(-1e3..1e3);
        }
        let z = [&mut s.qv, &mut s.qc, &mut s.qr];
        z.into_iter().nth(zeroed).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
        let src = assemble_sources(&s, &g, &phys, &ReferenceProfiles::default(), &ScalarField3::zeros(&g));
        let d = [&src.dqv, &src.dqc, &src.dqr][zeroed];
        let sed = &src.sedimentation;
        for k in 0..g.np {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    // rain's tendency includes sedimentation from above, itself nonnegative at q_r = 0
                    let phase = if zeroed == 2 { d.at(i, j, k) - sed.at(i, j, k) } else { d.at(i, j, k) };
                    prop_assert!(phase >= 0.0, "species {zeroed} at ({i},{j},{k}): {phase}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn initial_psi_is_quadratic(a in 1e-6f64..1e-2, vapor in any::<bool>()) {
        let mut c = Config::defaults(ParamMode::Nondimensional);
        c.run.nx = 8;
        c.run.ny = 8;
        c.run.np = 4;
        c.run.initial.kind = InitialKind::SaturatedBlob;
        let shape = if vapor { PerturbationShape::Vapor } else { PerturbationShape::Velocity };
        let psi = |amp: f64| uniqueness_experiment(&c, Perturbation { amplitude: amp, shape }, 0, DELTA, None).unwrap().psi0;
        let (p1, p2) = (psi(a), psi(2.0 * a));
        prop_assert!((p2 / p1 - 4.0).abs() <= 1e-6, "{}", p2 / p1);
    }
}

#[test]
fn saturation_rate_lipschitz_constant_is_refinement_stable() {
    let phys = PhysParams::defaults(ParamMode::Nondimensional);
    let lip = |n: usize| {
        let (lo, hi) = (100.0, 2.5 * phys.t_star_hi);
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|m| {
                let t = lo + m as f64 * h;
                let f = |t| mpe_core::microphysics::saturation_rate_f(t, 5.0e4, &phys);
                ((f(t + h) - f(t)) / h).abs()
            })
            .fold(0.0, f64::max)
    };
    let (a, b) = (lip(2_000), lip(4_000));
    assert!(a.is_finite() && b.is_finite());
    assert!((b - a).abs() <= 0.05 * a.max(b), "{a} {b}");
}
