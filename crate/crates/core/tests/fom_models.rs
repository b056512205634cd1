use hrom_core::fom::{
    godunov_burgers, residual, residual_on_submesh, rusanov_euler, solve_fom, solve_fom_with,
    FullState, InitialCondition, Mesh1d, ModelProblem, NewtonSettings, ProblemKind, SubmeshIndex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn godunov_residual_matches_hand_evaluation() {
    // u = (1,2,1,1), ν = 0, dt = Δx = 1, open ends with zero-gradient ghosts, no inflow row
    let mut problem = ModelProblem::burgers(4);
    problem.kind = ProblemKind::Burgers { viscosity: 0.0 };
    problem.mesh = Mesh1d::uniform(4, 4.0, false);
    problem.boundary = hrom_core::fom::BoundaryCondition::Transmissive;
    let u = FullState::new(vec![1.0, 2.0, 1.0, 1.0], 1).unwrap();
    let r = residual(&problem, 1.0, &u, &[u.clone()], 1.0).unwrap();

    // faces: ghost|0: (1,1) -> 0.5 ; 0|1: (1,2) rarefaction, uL>0 -> 0.5 ;
    // 1|2: (2,1) shock, speed 1.5>0 -> 2 ; 2|3: (1,1) -> 0.5 ; 3|ghost: (1,1) -> 0.5
    let faces = [0.5, 0.5, 2.0, 0.5, 0.5];
    let expected: Vec<f64> = (0..4).map(|i| faces[i + 1] - faces[i]).collect();
    assert_eq!(r, expected);
    assert_eq!(godunov_burgers(1.0, 2.0), 0.5);
}

#[test]
fn rusanov_residual_matches_direct_formula() {
    let problem = ModelProblem::euler(6);
    let mu = 4.0;
    let u = problem.initial_state(mu).unwrap();
    let dt = 1e12; // time-derivative term vanishes
    let r = residual(&problem, mu, &u, &[u.clone()], dt).unwrap();
    let g = 1.4;
    let m = 6;
    let cell = |i: usize| [u.get(0, i), u.get(1, i), u.get(2, i)];
    let phys = |w: [f64; 3]| {
        let p = (g - 1.0) * (w[2] - 0.5 * w[1] * w[1] / w[0]);
        let v = w[1] / w[0];
        ([w[1], w[1] * v + p, (w[2] + p) * v], v.abs() + (g * p / w[0]).sqrt())
    };
    let flux = |a: [f64; 3], b: [f64; 3]| {
        let (fa, sa) = phys(a);
        let (fb, sb) = phys(b);
        let s = sa.max(sb);
        [0, 1, 2].map(|k| 0.5 * (fa[k] + fb[k]) - 0.5 * s * (b[k] - a[k]))
    };
    let dx = 1.0 / 6.0;
    for i in 0..m {
        let l = if i == 0 { cell(0) } else { cell(i - 1) };
        let rr = if i == m - 1 { cell(m - 1) } else { cell(i + 1) };
        let fr = flux(cell(i), rr);
        let fl = flux(l, cell(i));
        for f in 0..3 {
            let expected = (fr[f] - fl[f]) / dx;
            assert!((r[f * m + i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
    assert_eq!(rusanov_euler(g, cell(0), cell(0))[1], phys(cell(0)).0[1]);
}

#[test]
fn periodic_burgers_conserves_mass() {
    let mut problem = ModelProblem::burgers(64).with_mesh(Mesh1d::uniform(64, 1.0, true));
    problem.kind = ProblemKind::Burgers { viscosity: 1.0 };
    problem.initial = InitialCondition::BurgersSine { amplitude: 0.3 };
    problem.t_final = 0.1;
    problem.dt_ref = 1e-3;
    let traj = solve_fom(&problem, 1.5).unwrap();
    let mass = |s: &FullState| s.values.iter().zip(problem.mesh.cell_measures()).map(|(u, h)| u * h).sum::<f64>();
    let m0 = mass(&traj.states[0]);
    for s in &traj.states {
        assert!((mass(s) - m0).abs() < 1e-8);
    }
    // strong viscosity: close to constant at the end
    let last = traj.states.last().unwrap();
    let spread = last.values.iter().fold(0.0_f64, |a, &v| a.max((v - 1.5).abs()));
    assert!(spread < 0.01, "spread {spread}");
}

#[test]
fn step_shock_moves_at_rankine_hugoniot_speed() {
    let mut problem = ModelProblem::burgers(200);
    problem.kind = ProblemKind::Burgers { viscosity: 1e-3 };
    problem.initial = InitialCondition::BurgersStep {
        x_front: 0.5,
        right_value: 0.0,
    };
    problem.t_final = 0.2;
    let dx = 1.0 / 200.0;
    for mu in [1.0, 2.0] {
        let traj = solve_fom(&problem, mu).unwrap();
        let centers = problem.mesh.centers();
        for (t, s) in traj.times.iter().zip(&traj.states).skip(20).step_by(20) {
            // front: first cell where u drops below μ/2
            let i = s.values.iter().position(|&u| u < 0.5 * mu).unwrap();
            let front = centers[i] - 0.5 * dx;
            let expected = 0.5 + 0.5 * mu * t;
            assert!((front - expected).abs() <= dx + 1e-12, "mu {mu} t {t}: {front} vs {expected}");
        }
    }
}

#[test]
fn sod_density_converges_under_refinement() {
    // self-convergence: coarse solution vs 4x finer reference, averaged onto the coarse grid
    let run = |m: usize, dt: f64| {
        // classic Sod data: pressure ratio 10, density ratio 8
        let mut p = ModelProblem::euler(m);
        p.param_range = (2.0, 10.0);
        p.initial = InitialCondition::EulerRiemann {
            x_diaphragm: 0.5,
            rho_left: 1.0,
            rho_right: 0.125,
            p_right: 0.1,
        };
        p.dt_ref = dt;
        p.t_final = 0.2;
        let traj = solve_fom(&p, 10.0).unwrap();
        for s in &traj.states {
            for i in 0..m {
                let rho = s.get(0, i);
                let pr = hrom_core::fom::euler_pressure(1.4, rho, s.get(1, i), s.get(2, i));
                assert!(rho > 0.0 && pr > 0.0);
            }
        }
        traj.states.last().unwrap().field(0).to_vec()
    };
    let coarse = run(400, 1e-3);
    let fine = run(1600, 2.5e-4);
    let fine_avg: Vec<f64> = fine.chunks(4).map(|c| c.iter().sum::<f64>() / 4.0).collect();
    let diff: Vec<f64> = coarse.iter().zip(&fine_avg).map(|(a, b)| a - b).collect();
    let rel = l2(&diff) / l2(&fine_avg);
    assert!(rel < 0.02, "relative L2 {rel}");
}

#[test]
fn submesh_residual_is_bitwise_restriction() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for problem in [ModelProblem::burgers(100), ModelProblem::euler(60)] {
        let mu = 0.5 * (problem.param_range.0 + problem.param_range.1);
        let m = problem.n_cells();
        let c = problem.n_fields();
        let base = problem.initial_state(mu).unwrap();
        for _ in 0..20 {
            let mut u = base.clone();
            for v in u.values.iter_mut() {
                *v *= 1.0 + 0.05 * rng.random_range(-1.0..1.0);
            }
            let full = residual(&problem, mu, &u, &[base.clone()], 1e-3).unwrap();
            let k = rng.random_range(1..=10);
            let mut magic: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
            magic.sort_unstable();
            magic.dedup();
            let idx = SubmeshIndex::new(&problem.mesh, &magic).unwrap();
            let sub = residual_on_submesh(
                &problem,
                mu,
                &idx.restrict(&u.values, c),
                &idx.restrict(&base.values, c),
                1e-3,
                &idx,
            )
            .unwrap();
            let expected: Vec<f64> = idx.magic_dofs(c).into_iter().map(|i| full[i]).collect();
            assert_eq!(sub.len(), expected.len());
            for (a, b) in sub.iter().zip(&expected) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn jacobian_is_banded_in_cell_ordering() {
    let problem = ModelProblem::euler(12);
    let mu = 3.0;
    let u = problem.initial_state(mu).unwrap();
    let g0 = residual(&problem, mu, &u, &[u.clone()], 1e-2).unwrap();
    let (m, c) = (12, 3);
    for g in 0..c {
        for j in 0..m {
            let mut p = u.clone();
            p.values[g * m + j] += 1e-6;
            let gp = residual(&problem, mu, &p, &[u.clone()], 1e-2).unwrap();
            for f in 0..c {
                for i in 0..m {
                    if gp[f * m + i] != g0[f * m + i] {
                        let (ri, ci) = (i * c + f, j * c + g);
                        assert!(ri.abs_diff(ci) <= 3 * c, "entry ({ri},{ci}) outside band");
                    }
                }
            }
        }
    }
}

#[test]
fn newton_reaches_tolerance_and_records_residuals() {
    let problem = ModelProblem::burgers(80);
    let settings = NewtonSettings {
        record_residuals: true,
        ..NewtonSettings::default()
    };
    let traj = solve_fom_with(&problem, 1.3, problem.dt_ref, &settings).unwrap();
    assert_eq!(traj.states.len(), problem.n_steps(problem.dt_ref) + 1);
    assert!(!traj.residual_snapshots.is_empty());
    for w in traj.states.windows(2) {
        let r = residual(&problem, 1.3, &w[1], &[w[0].clone()], problem.dt_ref).unwrap();
        assert!(l2(&r) < 1e-8);
    }
}
