use adaptive_cs::representation::{
    cosine_similarity, degeneration_penalty, tikhonov_identity_check, ContextRepresentations,
    Representation,
};
use proptest::prelude::*;

fn raw_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..40).prop_flat_map(|dim| (raw_vec(dim), prop::collection::vec(raw_vec(dim), 1..12)))
}

fn context(reps: &[Vec<f64>]) -> ContextRepresentations {
    let mut ctx = ContextRepresentations::new();
    for r in reps {
        ctx.push(Representation::new(r.clone()).unwrap()).unwrap();
    }
    ctx
}

proptest! {
    #[test]
    fn penalty_is_max_pairwise_cosine((cand, ctx) in instance()) {
        let c = Representation::new(cand).unwrap();
        let expected = ctx
            .iter()
            .map(|r| cosine_similarity(&c, &Representation::new(r.clone()).unwrap()).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(degeneration_penalty(&c, &context(&ctx)).unwrap(), expected);
    }

    #[test]
    fn penalty_invariant_under_positive_rescaling(
        (cand, ctx) in instance(),
        s in 1e-3f64..1e3,
        t in 1e-3f64..1e3,
    ) {
        let c = Representation::new(cand.clone()).unwrap();
        let base = degeneration_penalty(&c, &context(&ctx)).unwrap();
        let scaled_c = Representation::new(cand.iter().map(|x| x * s).collect()).unwrap();
        let scaled_ctx: Vec<Vec<f64>> = ctx.iter().map(|r| r.iter().map(|x| x * t).collect()).collect();
        let scaled = degeneration_penalty(&scaled_c, &context(&scaled_ctx)).unwrap();
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn appending_never_lowers_penalty((cand, ctx) in instance(), extra_seed in raw_vec(1)) {
        let c = Representation::new(cand.clone()).unwrap();
        let mut reps = context(&ctx);
        let before = degeneration_penalty(&c, &reps).unwrap();
        let extra: Vec<f64> = (0..cand.len()).map(|i| (extra_seed[0] * (i as f64 + 1.3)).sin() + 1e-3).collect();
        reps.push(Representation::new(extra).unwrap()).unwrap();
        prop_assert!(degeneration_penalty(&c, &reps).unwrap() >= before);
    }

    #[test]
    fn identity_holds_for_unit_vectors(a in raw_vec(16), b in raw_vec(16)) {
        let a = Representation::new(a).unwrap().normalized().unwrap();
        let b = Representation::new(b).unwrap().normalized().unwrap();
        let (cos, rhs) = tikhonov_identity_check(&a, &b).unwrap();
        prop_assert!((cos - rhs).abs() <= 1e-9);
        prop_assert!((-1.0..=1.0).contains(&cos));
    }
}

#[test]
fn empty_context_penalty_is_zero() {
    let c = Representation::new(vec![1.0, 0.0]).unwrap();
    assert_eq!(
        degeneration_penalty(&c, &ContextRepresentations::new()).unwrap(),
        0.0
    );
}

#[test]
fn identity_rejects_non_unit_input() {
    let a = Representation::new(vec![2.0, 0.0]).unwrap();
    let b = Representation::new(vec![1.0, 0.0]).unwrap();
    assert!(tikhonov_identity_check(&a, &b).is_err());
}
