//! Structural properties of the operators, checked on random inputs.

use mlpot::dyadic::{cz_decompose, default_base, DyadicLattice};
use mlpot::grid::{FamilyKind, Grid, GridFunction};
use mlpot::kernels::Kernel;
use mlpot::operators::{apply_commutator, maximal, reference, PhiScaling, PotentialOperator};
use mlpot::orlicz::NormSpec;
use proptest::prelude::*;

fn func(grid: &Grid, vals: &[f64]) -> GridFunction {
    GridFunction::new(grid.clone(), vals.to_vec()).unwrap()
}

fn close(a: &GridFunction, b: &GridFunction, tol: f64) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

const N: usize = 16;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potential_is_multilinear(
        f in prop::collection::vec(0.0f64..2.0, N),
        g in prop::collection::vec(0.0f64..2.0, N),
        h in prop::collection::vec(0.0f64..2.0, N),
        c in -3.0f64..3.0,
    ) {
        let grid = Grid::new(1, 1.0, N).unwrap();
        let op = PotentialOperator::new(Kernel::fractional(1, 2, 1.0).unwrap(), grid.clone()).unwrap();
        let (f, g, h) = (func(&grid, &f), func(&grid, &g), func(&grid, &h));
        let mix = f.scale(c).unwrap().add(&g).unwrap();
        let lhs = op.apply(&[&mix, &h]).unwrap();
        let rhs = op.apply(&[&f, &h]).unwrap().scale(c).unwrap().add(&op.apply(&[&g, &h]).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }

    #[test]
    fn tabulated_matches_reference(
        f in prop::collection::vec(0.0f64..2.0, N),
        g in prop::collection::vec(0.0f64..2.0, N),
    ) {
        let grid = Grid::new(1, 1.0, N).unwrap();
        let k = Kernel::fractional(1, 2, 0.7).unwrap();
        let op = PotentialOperator::new(k.clone(), grid.clone()).unwrap();
        let (f, g) = (func(&grid, &f), func(&grid, &g));
        prop_assert!(close(&op.apply(&[&f, &g]).unwrap(), &reference(&k, &[&f, &g]).unwrap(), 1e-12));
    }

    #[test]
    fn commutator_vanishes_for_constant_symbols(
        f in prop::collection::vec(0.0f64..2.0, N),
        g in prop::collection::vec(0.0f64..2.0, N),
        b in -2.0f64..2.0,
    ) {
        let grid = Grid::new(1, 1.0, N).unwrap();
        let op = PotentialOperator::new(Kernel::fractional(1, 2, 1.0).unwrap(), grid.clone()).unwrap();
        let (f, g) = (func(&grid, &f), func(&grid, &g));
        let bc = GridFunction::constant(&grid, b).unwrap();
        let t = apply_commutator(&op, &[&bc, &bc], &[&f, &g]).unwrap();
        prop_assert!(t.max_abs() <= 1e-10 * (1.0 + op.apply(&[&f, &g]).unwrap().max_abs()));
    }

    #[test]
    fn maximal_is_monotone(
        f in prop::collection::vec(0.0f64..2.0, N),
        bump in prop::collection::vec(0.0f64..1.0, N),
        g in prop::collection::vec(0.0f64..2.0, N),
    ) {
        let grid = Grid::new(1, 1.0, N).unwrap();
        let family = grid.cube_family(FamilyKind::Centered);
        let f1 = func(&grid, &f);
        let f2 = f1.add(&func(&grid, &bump)).unwrap();
        let g = func(&grid, &g);
        let specs = vec![NormSpec::llog(1.0), NormSpec::lebesgue(1.0).unwrap()];
        let phi = PhiScaling::one();
        let a = maximal(&phi, &specs, &[&f1, &g], &family).unwrap();
        let b = maximal(&phi, &specs, &[&f2, &g], &family).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(*x <= y * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn cz_invariants_hold(
        seed_vals in prop::collection::vec(0.0f64..4.0, 64),
        sparsity in prop::collection::vec(any::<bool>(), 64),
    ) {
        let grid = Grid::new(1, 1.0, 64).unwrap();
        let vals: Vec<f64> = seed_vals.iter().zip(&sparsity).map(|(v, s)| if *s { *v } else { 0.0 }).collect();
        prop_assume!(vals.iter().any(|v| *v > 0.0));
        let f = func(&grid, &vals);
        let g = GridFunction::from_fn(&grid, |x| 1.0 + x[0].abs()).unwrap();
        let lat = DyadicLattice::new(&grid);
        let cz = cz_decompose(&[&f, &g], default_base(1, 2), &lat).unwrap();
        let inv = cz.invariants();
        prop_assert!(inv.e_disjoint);
        prop_assert!(inv.e_inside_q);
        prop_assert!(inv.selection_bound);
        prop_assert!(inv.union_identity);
    }
}
