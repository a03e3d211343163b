//! Property tests for schedules, sampling, assembly and meshes.

use mimcfem::assembly::{load_constant_nodal, qoi_box_nodal, AssembledProblem};
use mimcfem::coefficient::{CoefficientExpansion, ParamVector};
use mimcfem::harness::order_statistic;
use mimcfem::mesh::{
    bisect, check_conformity, lshape_initial_mesh, read_mesh, uniform_square_mesh, write_mesh,
    BoxRegion,
};
use mimcfem::multiindex::{model_cost, Experiment, ScheduleParams, Variant};
use mimcfem::quadrature::TriangleRule;
use mimcfem::sampler::{draw_omega, McEstimate, StreamKey};
use proptest::prelude::*;

fn preset() -> impl Strategy<Value = ScheduleParams> {
    (
        prop_oneof![Just(Experiment::Square), Just(Experiment::Lshape)],
        prop_oneof![Just(Variant::Plain), Just(Variant::Symmetrized)],
    )
        .prop_map(|(e, v)| ScheduleParams::preset(e, v))
}

fn omega(len: usize) -> impl Strategy<Value = ParamVector> {
    prop::collection::vec(-0.5f64..=0.5, len).prop_map(|v| ParamVector::new(v).unwrap())
}

proptest! {
    #[test]
    fn schedules_are_monotone(p in preset(), nu in 0usize..20) {
        prop_assert_eq!(p.schedule_s(0), 1);
        prop_assert!(p.schedule_s(nu + 1) >= p.schedule_s(nu));
        prop_assert!(p.schedule_m(nu + 1) > p.schedule_m(nu));
    }

    #[test]
    fn cost_grows_with_n(p in preset(), n in 0usize..10) {
        let (a, b) = (model_cost(&p, n), model_cost(&p, n + 1));
        // the new corner indices alone add at least 2^{m_{N+1}} + 4^{N+1} + s_{N+1}
        prop_assert!(b >= a + (1u128 << p.schedule_m(n + 1)) + (1u128 << (2 * n + 2)));
    }

    #[test]
    fn flip_is_an_involution(w in omega(8), keep in 0usize..=8, extra in 0usize..=8) {
        let total = (keep + extra).min(8);
        let f = w.flipped(keep, total);
        prop_assert_eq!(f.flipped(keep, total), w.clone());
        for i in 0..8 {
            let expected = if (keep..total).contains(&i) { -w[i] } else { w[i] };
            prop_assert_eq!(f[i], expected);
        }
    }

    #[test]
    fn draws_are_addressable(seed: u64, tag: u64, sample in 0u64..1000, dim in 1usize..40) {
        let key = StreamKey::new(seed, tag, 2, 3);
        let long = draw_omega(&key.stream(sample), dim + 5);
        let short = draw_omega(&key.stream(sample), dim);
        prop_assert_eq!(&long.as_slice()[..dim], short.as_slice());
        prop_assert!(long.as_slice().iter().all(|x| (-0.5..0.5).contains(x)));
    }

    #[test]
    fn estimate_statistics(values in prop::collection::vec(-1e3f64..1e3, 1..64)) {
        let est = McEstimate::from_values(&values);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(est.mean >= lo - 1e-9 && est.mean <= hi + 1e-9);
        prop_assert!(est.sample_variance >= 0.0);
        prop_assert_eq!(est.n, values.len());
    }

    #[test]
    fn order_statistic_is_monotone(mut v in prop::collection::vec(-10f64..10.0, 1..50), a in 0f64..1.0, b in 0f64..1.0) {
        v.sort_by(f64::total_cmp);
        let (q1, q2) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(order_statistic(&v, q1) <= order_statistic(&v, q2));
        prop_assert!(v.contains(&order_statistic(&v, q1)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn combined_matrix_is_symmetric_with_positive_diagonal(w in omega(6), level in 1usize..4) {
        let mesh = uniform_square_mesh(level).unwrap();
        let load = load_constant_nodal(&mesh);
        let qoi = qoi_box_nodal(&mesh, &BoxRegion::new(0.5, 1.0, 0.5, 1.0));
        let expansion = CoefficientExpansion::new(0.5, 6);
        let p = AssembledProblem::new(mesh, &expansion, 6, &load, &qoi, &TriangleRule::collapsed_gauss(6)).unwrap();
        let a = p.combine(&w, 6).unwrap();
        prop_assert!(a.asymmetry() <= 1e-14 * a.max_abs());
        prop_assert!(a.diagonal().iter().all(|&d| d > 0.0));
        // right triangles give an M-matrix, hence weak diagonal dominance
        for i in 0..a.n() {
            let (s, e) = (a.row_ptr()[i], a.row_ptr()[i + 1]);
            let off: f64 = (s..e).filter(|&k| a.col_idx()[k] != i).map(|k| a.get(i, a.col_idx()[k]).abs()).sum();
            prop_assert!(a.get(i, i) >= off - 1e-12 * a.get(i, i));
        }
    }

    #[test]
    fn bisection_stays_conforming(marks in prop::collection::vec(any::<prop::sample::Index>(), 1..6), rounds in 1usize..4) {
        let mut mesh = lshape_initial_mesh();
        for _ in 0..rounds {
            let n = mesh.n_triangles();
            let marked: Vec<usize> = marks.iter().map(|i| i.index(n)).collect();
            mesh = bisect(&mesh, &marked);
            prop_assert!(check_conformity(&mesh).is_conforming());
            prop_assert!((mesh.total_area() - 3.0).abs() <= 1e-12);
        }
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        prop_assert_eq!(back.vertices, mesh.vertices);
        prop_assert_eq!(back.triangles, mesh.triangles);
    }
}
