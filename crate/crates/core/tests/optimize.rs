use proptest::prelude::*;
use seriesfed::{nelder_mead, DesignParam, DesignVector, NelderMeadOptions};

fn start() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..5).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..10.0, n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Bowl centred anywhere, often outside the box: every evaluated point and
    // the result must stay inside, and frozen entries must not move.
    #[test]
    fn iterates_respect_bounds_and_freezes(
        (values, frozen) in start(),
        shift in -3.0f64..3.0,
        budget in 5usize..300,
    ) {
        let params: Vec<DesignParam> = values
            .iter()
            .zip(&frozen)
            .enumerate()
            .map(|(i, (&v, &f))| {
                let p = DesignParam::around(format!("p{i}"), v);
                if f { p.frozen() } else { p }
            })
            .collect();
        prop_assume!(params.iter().any(|p| !p.fixed));
        let x0 = DesignVector::new(params).unwrap();
        let centre: Vec<f64> = values.iter().map(|v| v * (1.0 + 0.2 * shift)).collect();

        let mut outside = 0;
        let f = |x: &DesignVector| {
            if !x.within_bounds() {
                outside += 1;
            }
            x.params.iter().zip(&centre).map(|(p, c)| (p.value - c).powi(2)).sum::<f64>()
        };
        let opts = NelderMeadOptions { max_evals: budget, ..Default::default() };
        let r = nelder_mead(f, &x0, &opts).unwrap();

        prop_assert_eq!(outside, 0);
        prop_assert!(r.best.within_bounds());
        prop_assert!(r.evaluations <= budget);
        prop_assert!(!r.trace.is_empty() && r.trace.len() <= r.evaluations);
        for (a, b) in r.best.params.iter().zip(&x0.params) {
            if b.fixed {
                prop_assert_eq!(a.value, b.value);
            }
        }
        prop_assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
