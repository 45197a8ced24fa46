use popsize_core::optimizer::project_onto_admissible;
use popsize_core::rearrangement::{self, Direction, RearrangementPlan};
use popsize_core::{dirichlet_energy, mean, neumann_laplacian_apply, Field, Grid, ResourceBudget};
use proptest::prelude::*;

fn field_1d() -> impl Strategy<Value = Field> {
    prop::collection::vec(-2.0f64..2.0, 4..60)
        .prop_map(|v| Field::new(Grid::unit_interval(v.len()).unwrap(), v).unwrap())
}

fn field_2d() -> impl Strategy<Value = Field> {
    (4usize..10, 4usize..10).prop_flat_map(|(nx, ny)| {
        prop::collection::vec(-2.0f64..2.0, nx * ny)
            .prop_map(move |v| Field::new(Grid::rectangle(1.0, 2.0, nx, ny).unwrap(), v).unwrap())
    })
}

fn any_field() -> impl Strategy<Value = Field> {
    prop_oneof![field_1d(), field_2d()]
}

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::IncreasingToRight), Just(Direction::DecreasingToRight)]
}

proptest! {
    #[test]
    fn laplacian_has_zero_mean(u in any_field()) {
        let lu = neumann_laplacian_apply(&u).unwrap();
        let scale = lu.sup_norm().max(1.0);
        prop_assert!(mean(&lu).abs() <= 1e-12 * scale);
    }

    // -mean(u Δu) equals the mean Dirichlet energy
    #[test]
    fn green_identity(u in any_field()) {
        let lu = neumann_laplacian_apply(&u).unwrap();
        let lhs = -popsize_core::grid::mean_product(&u, &lu).unwrap();
        let rhs = dirichlet_energy(&u);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0), "{} {}", lhs, rhs);
    }

    #[test]
    fn rearrangement_preserves_distribution_and_is_idempotent(u in any_field(), d in direction()) {
        let plan = RearrangementPlan::all_axes(u.grid(), d);
        let r = rearrangement::symmetric_rearrangement_box(&u, &plan).unwrap();
        prop_assert_eq!(rearrangement::distribution(&r), rearrangement::distribution(&u));
        prop_assert_eq!(rearrangement::symmetric_rearrangement_box(&r, &plan).unwrap(), r);
    }

    #[test]
    fn rearrangement_lowers_energy(u in any_field(), d in direction()) {
        let plan = RearrangementPlan::all_axes(u.grid(), d);
        let (e, e_star) = rearrangement::polya_check(&u, &plan).unwrap();
        prop_assert!(e_star <= e * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn rearrangement_raises_correlation(
        (u, v) in (4usize..50).prop_flat_map(|n| (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )),
        d in direction(),
    ) {
        let g = Grid::unit_interval(u.len()).unwrap();
        let (u, v) = (Field::new(g, u).unwrap(), Field::new(g, v).unwrap());
        let (p, p_star) = rearrangement::hardy_littlewood_check(&u, &v, &RearrangementPlan::all_axes(&g, d)).unwrap();
        prop_assert!(p <= p_star + 1e-12);
    }

    #[test]
    fn projection_is_admissible_and_idempotent(u in any_field(), m0 in 0.05f64..0.95) {
        let b = ResourceBudget::new(m0, 1.0).unwrap();
        let p = project_onto_admissible(&u, &b).unwrap();
        prop_assert!((mean(&p) - m0).abs() <= 1e-10);
        prop_assert!(p.values().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let q = project_onto_admissible(&p, &b).unwrap();
        prop_assert!(p.values().iter().zip(q.values()).all(|(a, b)| (a - b).abs() <= 1e-10));
    }
}
