mod common;

use common::*;
use fredholm_bvp::boundary::BoundaryOperator;
use fredholm_bvp::characteristic::{fredholm_report, CharacteristicMatrix};
use fredholm_bvp::cli::file::{
    BoundaryFile, BoundaryTermFile, CoefficientFile, DataFile, EpsScheduleFile, FractionalKindFile,
    GridFile, IntervalFile, LimitsFile, LimitsModeFile, MatrixFile, ProblemFile, SampledTermFile,
    ScalarFunction, SystemFile, TermDirectionFile,
};
use fredholm_bvp::function::{
    integrate_product, CMatrix, CVector, CoefficientSpec, Grid, GridVectorFunction,
};
use fredholm_bvp::ode::{solve_fundamental, solve_initial_value, solve_particular};
use fredholm_bvp::solver::{solve, verify_solution, Classification};
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 256;

fn grid() -> Grid {
    Grid::new(unit(), N).unwrap()
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn materialize_and_integrate_are_linear(seed in any::<u64>(), kind in 0u32..3, w in -2.0..2.0f64, z in -2.0..2.0f64) {
        let mut r = rng(seed);
        let g = grid();
        let (p, q) = (random_coefficient_of(&mut r, 2, kind), random_coefficient_of(&mut r, 2, kind));
        let mat_p = p.materialize(&g, 1).unwrap();
        let mat_q = q.materialize(&g, 1).unwrap();
        let lhs = p.perturbed(w, &q).unwrap().materialize(&g, 1).unwrap();
        let rhs = mat_p.add_scaled(Complex64::new(w, 0.0), &mat_q).unwrap();
        prop_assert!(rel(lhs.max_level_distance(&rhs, 1).unwrap(), lhs.norm_up_to(1)) <= 1e-12);
        let (z1, z2) = (Complex64::new(w, 0.3), Complex64::new(z, -0.7));

        let kernel = cmat(&mut r, 3, 2, 1.0);
        let k = fredholm_bvp::function::GridMatrixFunction::constant(g.clone(), &kernel, 0);
        let u = mat_q.column(0);
        let v = mat_q.column(1);
        let combo = u.add_scaled(z1 - Complex64::new(1.0, 0.0), &u).unwrap().add_scaled(z2, &v).unwrap();
        let lhs = integrate_product(&k, &combo).unwrap();
        let rhs = integrate_product(&k, &u).unwrap() * z1 + integrate_product(&k, &v).unwrap() * z2;
        prop_assert!(rel((&lhs - &rhs).norm(), lhs.norm()) <= 1e-12);
    }

    #[test]
    fn interpolation_is_exact_at_nodes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = grid();
        let a = random_coefficient(&mut r, 2).materialize(&g, 2).unwrap();
        for i in (0..=N).step_by(17) {
            let t = g.nodes()[i];
            for d in 0..=2 {
                prop_assert_eq!(a.interpolate(t, d).unwrap(), a.level(d)[i].clone());
            }
        }
    }

    #[test]
    fn superposition_matches_direct_integration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = grid();
        let a = random_coefficient(&mut r, 2).materialize(&g, 1).unwrap();
        let f = random_rhs(&mut r, 2).materialize(&g, 1).unwrap().into_vector_function().unwrap();
        let q = cvec(&mut r, 2, 1.0);
        let y = solve_fundamental(&a, 2).unwrap();
        let y_p = solve_particular(&a, &f, 2).unwrap();
        let composed = y.apply(&q).unwrap().add_scaled(Complex64::new(1.0, 0.0), y_p.function()).unwrap();
        let direct = solve_initial_value(&a, Some(&f), &q, 2).unwrap();
        let err = composed.level(0).iter().zip(direct.level(0)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-7, "node error {err:e}");
    }

    #[test]
    fn fundamental_matrix_depends_continuously_on_a(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = grid();
        let s = 2;
        let base = random_coefficient(&mut r, 2);
        let dir = CoefficientSpec::Constant(cmat(&mut r, 2, 2, 1.0));
        let y = solve_fundamental(&base.materialize(&g, s - 1).unwrap(), s).unwrap();
        let mut dists = Vec::new();
        for k in [1u32, 2, 4, 8, 16] {
            let a_k = base.perturbed(1.0 / k as f64, &dir).unwrap();
            let y_k = solve_fundamental(&a_k.materialize(&g, s - 1).unwrap(), s).unwrap();
            dists.push(y_k.matrix().max_level_distance(y.matrix(), s).unwrap());
        }
        for w in dists.windows(2) {
            prop_assert!(w[1] <= 1.1 * w[0], "{dists:?}");
        }
        // first-order decay once ε is small
        prop_assert!(dists[4] <= 0.6 * dists[3], "{dists:?}");
    }

    #[test]
    fn apply_is_linear_and_terms_add(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = grid();
        let b = random_boundary(&mut r, 3, 2, 2, None);
        let y = solve_fundamental(&random_coefficient(&mut r, 2).materialize(&g, 1).unwrap(), 2).unwrap();
        let (y1, y2) = (y.apply(&cvec(&mut r, 2, 1.0)).unwrap(), y.apply(&cvec(&mut r, 2, 1.0)).unwrap());
        let (c1, c2) = (cnum(&mut r, 2.0), cnum(&mut r, 2.0));
        let combo = y1.scale(c1).add_scaled(c2, &y2).unwrap();
        let lhs = b.apply(&combo).unwrap();
        let rhs = b.apply(&y1).unwrap() * c1 + b.apply(&y2).unwrap() * c2;
        prop_assert!(rel((&lhs - &rhs).norm(), lhs.norm()) <= 1e-10);

        let mut sum = CVector::zeros(3);
        for term in b.terms() {
            let single = BoundaryOperator::new(3, 2, 2, vec![term.clone()]).unwrap();
            sum += single.apply(&y1).unwrap();
        }
        let total = b.apply(&y1).unwrap();
        if b.terms().len() == 1 {
            prop_assert_eq!(total, sum);
        } else {
            prop_assert!((&total - &sum).norm() <= 1e-14 * total.norm().max(1.0));
        }
    }

    #[test]
    fn column_rule(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = grid();
        let b = random_boundary(&mut r, 3, 2, 2, None);
        let h = random_coefficient(&mut r, 2).materialize(&g, 2).unwrap();
        let d = cvec(&mut r, 2, 1.0);
        let lhs = b.apply_to_matrix(&h).unwrap() * &d;
        let rhs = b.apply(&h.mul_vector(&d).unwrap()).unwrap();
        prop_assert!(rel((&lhs - &rhs).norm(), lhs.norm()) <= 1e-10);
    }

    #[test]
    fn index_and_cokernel_identity(seed in any::<u64>(), m in 1usize..=3, r in 1usize..=4, cap in 0usize..=3) {
        let mut g = rng(seed);
        let rank_cap = (cap > 0).then_some(cap);
        let problem = random_problem(&mut g, m, r, 2, rank_cap);
        let cm = problem.characteristic_on(&grid(), None).unwrap();
        let rep = fredholm_report(&cm);
        prop_assert_eq!(rep.index, m as i64 - r as i64);
        prop_assert_eq!(rep.dim_coker as i64 - rep.dim_ker as i64, r as i64 - m as i64);
        if let Some(k) = rank_cap {
            prop_assert!(rep.rank <= k);
        }
    }

    #[test]
    fn row_equivalent_conditions_keep_rank(seed in any::<u64>(), m in 1usize..=3, r in 1usize..=4) {
        let mut g = rng(seed);
        let problem = random_problem(&mut g, m, r, 2, None);
        // diagonally dominant, hence nonsingular
        let left = cmat(&mut g, r, r, 0.3) + CMatrix::identity(r, r) * Complex64::new(2.0, 0.0);
        let moved = problem.with_boundary(problem.boundary().left_multiplied(&left).unwrap()).unwrap();
        let a = fredholm_report(&problem.characteristic_on(&grid(), None).unwrap());
        let b = fredholm_report(&moved.characteristic_on(&grid(), None).unwrap());
        prop_assert_eq!((a.rank, a.dim_ker, a.dim_coker), (b.rank, b.dim_ker, b.dim_coker));
    }

    #[test]
    fn characteristic_matrix_ignores_f_and_c(seed in any::<u64>()) {
        let mut g = rng(seed);
        let problem = random_problem(&mut g, 2, 2, 2, None);
        let other = problem.with_data(random_rhs(&mut g, 2), cvec(&mut g, 2, 5.0)).unwrap();
        let a = problem.characteristic_on(&grid(), None).unwrap();
        let b = other.characteristic_on(&grid(), None).unwrap();
        prop_assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn kernel_functions_solve_the_homogeneous_problem(seed in any::<u64>(), m in 2usize..=3, r in 1usize..=4) {
        let mut g = rng(seed);
        let problem = random_problem(&mut g, m, r, 2, Some(1));
        let grid = grid();
        let sol = solve(&problem, &grid).unwrap();
        prop_assert_eq!(sol.kernel_basis.len(), m - sol.report.rank);
        let diag = verify_solution(&problem, &sol, &grid).unwrap();
        for k in &diag.kernel {
            prop_assert!(k.ode <= 1e-6 && k.boundary <= 1e-6, "{k:?}");
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn invertible_problems_are_never_unsolvable(seed in any::<u64>(), m in 1usize..=3) {
        let mut g = rng(seed);
        let a = random_coefficient(&mut g, m);
        let problem = two_point_problem(&mut g, m, a);
        let sol = solve(&problem, &grid()).unwrap();
        if sol.report.invertible {
            prop_assert_eq!(sol.classification, Classification::Unique);
        }
        prop_assert_ne!(sol.classification, Classification::Unsolvable);
    }

    #[test]
    fn solution_is_linear_in_data(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_coefficient(&mut g, 2);
        let problem = two_point_problem(&mut g, 2, a);
        let grid = grid();
        let full = solve(&problem, &grid).unwrap();
        prop_assume!(full.classification == Classification::Unique);
        let only_f = problem.with_data(problem.rhs().clone(), CVector::zeros(2)).unwrap();
        let only_c = problem.with_data(CoefficientSpec::zeros(2, 1), problem.data().clone()).unwrap();
        let y_f = solve(&only_f, &grid).unwrap().particular.unwrap();
        let y_c = solve(&only_c, &grid).unwrap().particular.unwrap();
        let sum = y_f.add_scaled(Complex64::new(1.0, 0.0), &y_c).unwrap();
        let y = full.particular.unwrap();
        let err = node_distance(&y, &sum);
        prop_assert!(err <= 1e-8, "{err:e}");
    }

    #[test]
    fn solution_depends_lipschitz_on_data(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_coefficient(&mut g, 2);
        let problem = two_point_problem(&mut g, 2, a);
        let grid = grid();
        let base = solve(&problem, &grid).unwrap();
        prop_assume!(base.classification == Classification::Unique);
        let df = random_rhs(&mut g, 2);
        let dc = cvec(&mut g, 2, 1.0);
        let y0 = base.particular.unwrap();
        let mut changes = Vec::new();
        for delta in [1e-2, 5e-3] {
            let f = problem.rhs().perturbed(delta, &df).unwrap();
            let c = problem.data() + &dc * Complex64::new(delta, 0.0);
            let y = solve(&problem.with_data(f, c).unwrap(), &grid).unwrap().particular.unwrap();
            changes.push(node_distance(&y, &y0));
        }
        let ratio = changes[0] / changes[1];
        prop_assert!((ratio - 2.0).abs() <= 1e-3, "ratio {ratio}");
    }
}

fn node_distance(x: &GridVectorFunction, y: &GridVectorFunction) -> f64 {
    x.level(0)
        .iter()
        .zip(y.level(0))
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = MatrixFile> {
    prop::collection::vec(prop::array::uniform2(-1e3..1e3f64), rows * cols)
        .prop_map(move |data| MatrixFile { rows, cols, data })
}

fn coefficient_strategy(rows: usize, cols: usize) -> BoxedStrategy<CoefficientFile> {
    prop_oneof![
        matrix_strategy(rows, cols).prop_map(|matrix| CoefficientFile::Constant { matrix }),
        prop::collection::vec(matrix_strategy(rows, cols), 1..3)
            .prop_map(|coeffs| CoefficientFile::Polynomial { coeffs }),
        (
            0usize..=2,
            prop::collection::vec(
                (
                    prop_oneof![
                        Just(ScalarFunction::Sin),
                        Just(ScalarFunction::Cos),
                        Just(ScalarFunction::Exp)
                    ],
                    -5.0..5.0f64,
                    matrix_strategy(rows, cols)
                )
                    .prop_map(|(func, freq, matrix)| SampledTermFile {
                        func,
                        freq,
                        matrix
                    }),
                1..3
            )
        )
            .prop_map(|(max_order, terms)| CoefficientFile::Sampled { max_order, terms }),
    ]
    .boxed()
}

fn term_strategy(r: usize, m: usize) -> impl Strategy<Value = BoundaryTermFile> {
    prop_oneof![
        (0usize..=1, 0.0..=1.0f64, matrix_strategy(r, m)).prop_map(|(order, point, coeff)| {
            BoundaryTermFile::Point {
                order,
                point,
                coeff,
            }
        }),
        coefficient_strategy(r, m).prop_map(|kernel| BoundaryTermFile::Integral { kernel }),
        (
            prop_oneof![Just(0.5), Just(1.5)],
            prop_oneof![
                Just(FractionalKindFile::Caputo),
                Just(FractionalKindFile::RiemannLiouville)
            ],
            prop_oneof![Just(0.0), Just(0.5)],
            matrix_strategy(r, m)
        )
            .prop_map(|(alpha, kind, point, coeff)| BoundaryTermFile::Fractional {
                alpha,
                kind,
                point,
                coeff
            }),
    ]
}

fn limits_strategy(m: usize, r: usize) -> impl Strategy<Value = LimitsFile> {
    let mode = prop_oneof![
        coefficient_strategy(m, m)
            .prop_map(|direction| LimitsModeFile::CoefficientDecay { direction }),
        coefficient_strategy(m, m).prop_map(|direction| LimitsModeFile::Oscillatory { direction }),
        (-0.1..0.1f64).prop_map(|shift| LimitsModeFile::PointDrift { shift }),
        matrix_strategy(r, m).prop_map(|coeff| LimitsModeFile::BoundaryDecay {
            directions: vec![TermDirectionFile { term: 0, coeff }]
        }),
    ];
    let schedule = prop_oneof![
        Just(EpsScheduleFile::Harmonic),
        Just(EpsScheduleFile::Zero),
        (0.5..3.0f64).prop_map(EpsScheduleFile::Power),
    ];
    (mode, schedule, prop::collection::btree_set(1u32..100, 1..6)).prop_map(
        |(mode, eps_schedule, ks)| LimitsFile {
            mode,
            eps_schedule,
            k_list: ks.into_iter().collect(),
        },
    )
}

fn problem_file_strategy() -> impl Strategy<Value = ProblemFile> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(m, r)| {
        (
            -5.0..0.0f64,
            0.5..5.0f64,
            coefficient_strategy(m, m),
            prop::option::of(coefficient_strategy(m, 1)),
            prop::collection::vec(term_strategy(r, m), 1..4),
            prop::collection::vec(prop::array::uniform2(-10.0..10.0f64), r),
            prop::option::of(prop_oneof![Just(256usize), Just(2048)]),
            prop::option::of(limits_strategy(m, r)),
            1usize..=3,
        )
            .prop_map(
                move |(a, len, coef, f, terms, c, n, limits, s)| ProblemFile {
                    interval: IntervalFile { a, b: a + len },
                    system: SystemFile { m, s, a: coef, f },
                    boundary: BoundaryFile { r, s: None, terms },
                    data: DataFile { c },
                    grid: n.map(|n_steps| GridFile { n_steps }),
                    limits,
                },
            )
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn problem_files_round_trip(file in problem_file_strategy()) {
        let text = file.to_toml();
        let back = ProblemFile::parse(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_toml(), text);
        prop_assert_eq!(back.hash(), file.hash());
    }
}

#[test]
fn rank_unaffected_by_scaling_whole_operator() {
    let mut g = rng(7);
    let problem = random_problem(&mut g, 2, 3, 2, Some(1));
    let scaled = problem
        .with_boundary(
            problem
                .boundary()
                .left_multiplied(&(CMatrix::identity(3, 3) * Complex64::new(1e3, 0.0)))
                .unwrap(),
        )
        .unwrap();
    let a = problem.characteristic_on(&grid(), None).unwrap();
    let b = scaled.characteristic_on(&grid(), None).unwrap();
    assert_eq!(a.rank, b.rank);
    assert_eq!(CharacteristicMatrix::new(b.matrix.clone(), None).rank, 1);
}
