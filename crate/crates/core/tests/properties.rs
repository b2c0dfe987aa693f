use proptest::prelude::*;

use qsd_core::convergence::tv_distance;
use qsd_core::lyapunov::{v_eps, v_eps_bounds, VTable};
use qsd_core::model::TransitionKind;
use qsd_core::truncation::{assemble, enumerate_space, survival_probability, transient_conditional};
use qsd_core::{is_absorbed, Model, State};

fn constant_model(dim: usize) -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    (
        prop::sample::select(vec![0.5, 1.0, 2.0]),
        prop::collection::vec(0.1..5.0f64, dim),
        prop::collection::vec(0.0..2.0f64, dim),
        prop::collection::vec(prop::collection::vec(0.0..1.0f64, dim), dim),
    )
        .prop_map(move |(g, b, d, mut c)| {
            for (i, row) in c.iter_mut().enumerate() {
                row[i] += 0.05;
            }
            (g, b, d, c)
        })
}

fn model_and_state() -> impl Strategy<Value = (Model, State)> {
    (1usize..=3)
        .prop_flat_map(|dim| (constant_model(dim), prop::collection::vec(1u64..200, dim)))
        .prop_map(|((g, b, d, c), n)| (Model::constant(g, &b, &d, &c).unwrap(), State::new(n)))
}

fn probability(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, len).prop_map(|mut v| {
        let s: f64 = v.iter().sum::<f64>() + 1e-300;
        v.iter_mut().for_each(|x| *x /= s);
        v
    })
}

/// Plain summation of `j^-(1+eps)` over `(from, to]`.
fn direct_sum(from: u64, to: u64, eps: f64) -> f64 {
    ((from + 1)..=to).map(|j| 1.0 / (j as f64).powf(1.0 + eps)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn transitions_follow_the_rate_formulas((model, n) in model_and_state()) {
        let ts = model.transitions(&n).unwrap();
        let nf: Vec<f64> = n.coords().iter().map(|&x| x as f64).collect();
        let mut total = 0.0;
        for t in &ts {
            prop_assert!(t.rate > 0.0 && t.rate.is_finite());
            total += t.rate;
            let diff: Vec<i64> = t.target.coords().iter().zip(n.coords()).map(|(a, b)| *a as i64 - *b as i64).collect();
            match t.kind {
                TransitionKind::Birth { parent } => {
                    prop_assert!(diff.iter().enumerate().all(|(k, &x)| x == i64::from(k == parent)));
                    let expect = nf[parent] * model.birth(parent, &n);
                    prop_assert!((t.rate - expect).abs() <= 1e-12 * expect);
                }
                TransitionKind::Death { kind } => {
                    prop_assert!(diff.iter().enumerate().all(|(k, &x)| x == -i64::from(k == kind)));
                    let pressure: f64 = (0..n.dim()).map(|k| model.competition(kind, k, &n) * nf[k]).sum();
                    let expect = nf[kind] * (model.death(kind, &n) + pressure.powf(model.gamma()));
                    prop_assert!((t.rate - expect).abs() <= 1e-12 * expect);
                    prop_assert_eq!(is_absorbed(&t.target), n.coords()[kind] == 1);
                }
                TransitionKind::Catastrophe => prop_assert!(false, "no catastrophe declared"),
            }
        }
        prop_assert!((model.total_rate(&n).unwrap() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn v_eps_bounds_and_sandwich(m in 1u64..10_000, k in 0u64..10_000, eps in 0.01..3.0f64) {
        let n_size = m + k;
        let m_state = State::new(vec![m]);
        let n_state = State::new(vec![n_size]);
        let vm = v_eps(&m_state, eps);
        let vn = v_eps(&n_state, eps);
        let tol = 1e-12;
        prop_assert!(vn >= 1.0 - tol && vn <= 1.0 + 1.0 / eps + tol);
        prop_assert!((vn - direct_sum(0, n_size, eps)).abs() <= tol);
        let (mf, nf) = (m as f64, n_size as f64);
        let lower = ((mf + 1.0).powf(-eps) - (nf + 1.0).powf(-eps)) / eps;
        let upper = (mf.powf(-eps) - nf.powf(-eps)) / eps;
        let gap = vn - vm;
        prop_assert!(lower <= gap + tol && gap <= upper + tol, "{lower} <= {gap} <= {upper}");
        let (lib_lower, lib_upper) = v_eps_bounds(m, n_size, eps);
        prop_assert!((lib_lower - lower).abs() <= tol && (lib_upper - upper).abs() <= tol);
        let table = VTable::new(eps, n_size + 1);
        prop_assert!((table.increment(&m_state, &n_state) - direct_sum(m, n_size, eps)).abs() <= tol);
    }

    #[test]
    fn v_eps_on_several_types(n in prop::collection::vec(0u64..500, 1..4), eps in 0.05..2.0f64) {
        let s = State::new(n.clone());
        let v = v_eps(&s, eps);
        if n.contains(&0) {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!((v - direct_sum(0, n.iter().sum(), eps)).abs() <= 1e-12);
        }
    }

    #[test]
    fn tv_is_a_metric(
        (p, q, r) in (1usize..40).prop_flat_map(|len| (probability(len), probability(len), probability(len)))
    ) {
        let d = |a: &[f64], b: &[f64]| tv_distance(a, b).unwrap();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert_eq!(d(&p, &q), d(&q, &p));
        prop_assert!(d(&p, &q) <= d(&p, &r) + d(&r, &q) + 1e-15);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&d(&p, &q)));
        let half_l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        prop_assert!((d(&p, &q) - half_l1).abs() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sub_generator_structure(
        (g, b, d, c) in (1usize..=2).prop_flat_map(constant_model),
        level in 4u64..25,
    ) {
        let model = Model::constant(g, &b, &d, &c).unwrap();
        let space = enumerate_space(b.len(), level).unwrap();
        let q = assemble(&model, &space).unwrap();
        for i in 0..q.len() {
            prop_assert!(q.diag()[i] < 0.0);
            let mut off = 0.0;
            for (j, v) in q.row(i) {
                prop_assert!(j != i && v > 0.0);
                off += v;
            }
            let exit = -q.diag()[i];
            prop_assert!(off <= exit * (1.0 + 1e-12));
            let rate = model.total_rate(space.state(i)).unwrap();
            prop_assert!((exit - rate).abs() <= 1e-12 * rate);
            prop_assert!(q.uniformization() >= exit);
        }
    }

    #[test]
    fn conditional_laws_are_probabilities(
        (g, b, d, c) in (1usize..=2).prop_flat_map(constant_model),
        t in 0.0..3.0f64,
    ) {
        let model = Model::constant(g, &b, &d, &c).unwrap();
        let space = enumerate_space(b.len(), 15).unwrap();
        let q = assemble(&model, &space).unwrap();
        let mu0 = space.point_mass(&State::ones(b.len())).unwrap();
        let (mu, surv) = transient_conditional(&q, &mu0, t).unwrap();
        prop_assert!(mu.iter().all(|&x| x >= 0.0));
        prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(surv > 0.0 && surv <= 1.0 + 1e-12);
        let later = survival_probability(&q, &mu0, t + 0.5).unwrap();
        prop_assert!(later <= surv * (1.0 + 1e-12));
    }
}
