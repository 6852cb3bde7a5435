use proptest::prelude::*;

use fracflow::mild_solver::{bielecki_norm, picard_solve, MomentOrder, SolverConfig};
use fracflow::nonlinearity::{cutoff, NonlinearityKind, NonlinearitySpec};
use fracflow::random_fields::{sample_field, SpectralMeasure, SpectralNoise};
use fracflow::spectral::{fractional_laplacian, semigroup_apply};
use fracflow::{FieldRealization, Grid};

fn grid_1d() -> Grid {
    Grid::new(1, 64, 5.0).unwrap()
}

fn field_from(coeffs: &[f64], grid: Grid) -> FieldRealization {
    let len = grid.len();
    FieldRealization::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let k = 2.0 * std::f64::consts::PI * m as f64 / len;
                let phase = 0.37 * m as f64;
                c * (k * x[0] + phase).cos()
            })
            .sum()
    })
}

fn arb_field() -> impl Strategy<Value = FieldRealization> {
    prop::collection::vec(-2.0f64..2.0, 1..20).prop_map(|c| field_from(&c, grid_1d()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multipliers_are_linear(u in arb_field(), v in arb_field(), a in -3.0f64..3.0, s in 0.1f64..1.0, t in 0.0f64..2.0) {
        let combo = FieldRealization::new(u.grid, u.values.iter().zip(&v.values).map(|(x, y)| a * x + y).collect(), 0.0).unwrap();
        let lhs = semigroup_apply(&combo, t, s).unwrap();
        let pu = semigroup_apply(&u, t, s).unwrap();
        let pv = semigroup_apply(&v, t, s).unwrap();
        for i in 0..lhs.values.len() {
            prop_assert!((lhs.values[i] - (a * pu.values[i] + pv.values[i])).abs() < 1e-11);
        }
        let lu = fractional_laplacian(&combo, s).unwrap();
        let la = fractional_laplacian(&u, s).unwrap();
        let lb = fractional_laplacian(&v, s).unwrap();
        for i in 0..lu.values.len() {
            prop_assert!((lu.values[i] - (a * la.values[i] + lb.values[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn semigroup_law(u in arb_field(), s in 0.1f64..1.0, t1 in 0.0f64..1.5, t2 in 0.0f64..1.5) {
        let two = semigroup_apply(&semigroup_apply(&u, t1, s).unwrap(), t2, s).unwrap();
        let one = semigroup_apply(&u, t1 + t2, s).unwrap();
        prop_assert!(two.sup_distance(&one) <= 1e-12);
    }

    #[test]
    fn semigroup_contracts_and_keeps_mean(u in arb_field(), s in 0.1f64..1.0, t in 0.0f64..3.0, dt in 0.0f64..1.0) {
        let a = semigroup_apply(&u, t, s).unwrap();
        let b = semigroup_apply(&u, t + dt, s).unwrap();
        prop_assert!(b.rms() <= a.rms());
        prop_assert!((a.mean() - u.mean()).abs() < 1e-13);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        let m = SpectralMeasure::power_law(grid_1d(), 1.0, 1.0, 0.5).unwrap();
        prop_assert_eq!(sample_field(&m, seed), sample_field(&m, seed));
        prop_assert!(SpectralNoise::draw(&m, seed).is_hermitian(&m.grid));
    }

    #[test]
    fn cutoff_is_a_contraction(x in -100.0f64..100.0, y in -100.0f64..100.0, n in 0.1f64..10.0) {
        prop_assert!((cutoff(x, n) - cutoff(y, n)).abs() <= (x - y).abs());
        prop_assert!(cutoff(x, n).abs() <= n);
        prop_assert_eq!(cutoff(cutoff(x, n), n), cutoff(x, n));
    }

    #[test]
    fn flux_bounds(x in -20.0f64..20.0, y in -20.0f64..20.0, l in 0.0f64..5.0, c in 0.0f64..3.0, q in 0.1f64..3.0, n in 0.5f64..5.0) {
        let tanh = NonlinearitySpec::tanh(l);
        prop_assert!((tanh.eval(x) - tanh.eval(y)).abs() <= l * (x - y).abs() * (1.0 + 1e-12) + 1e-15);
        let poly = NonlinearitySpec::new(NonlinearityKind::Polynomial { c, q }, None).unwrap();
        let rhs = c * (x - y).abs() * (x.abs().powf(q) + y.abs().powf(q));
        prop_assert!((poly.eval(x) - poly.eval(y)).abs() <= rhs * (1.0 + 1e-12) + 1e-12);
        let cut = NonlinearitySpec::burgers().with_cutoff(n);
        let lip = cut.lipschitz_constant().unwrap();
        prop_assert!((cut.eval(x) - cut.eval(y)).abs() <= lip * (x - y).abs() * (1.0 + 1e-12) + 1e-15);
        prop_assert_eq!(poly.eval(0.0), 0.0);
    }

    #[test]
    fn solver_conserves_mean_and_scales_norm(coeffs in prop::collection::vec(-1.0f64..1.0, 1..8), mean in -1.0f64..1.0, l in 0.0f64..2.0) {
        let mut u0 = field_from(&coeffs, grid_1d());
        u0 = u0.map(|v| v + mean);
        let mut cfg = SolverConfig::uniform(0.8, 0.5, 20);
        cfg.tol = 1e-10;
        let (traj, _) = picard_solve(&u0, &NonlinearitySpec::tanh(l), &cfg).unwrap();
        for st in &traj.states {
            prop_assert!((st.mean() - u0.mean()).abs() < 1e-12);
        }
        let a = bielecki_norm(std::slice::from_ref(&traj), 1.0, MomentOrder::Finite(3.0)).unwrap();
        let doubled = fracflow::mild_solver::Trajectory::new(traj.states.iter().map(|s| s.map(|v| -2.0 * v)).collect()).unwrap();
        let b = bielecki_norm(&[doubled], 1.0, MomentOrder::Finite(3.0)).unwrap();
        prop_assert!((b - 2.0 * a).abs() <= 1e-12 * a.max(1.0));
    }
}
