use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigchange::dsl::Expression;
use sigchange::gap::cumulative_simpson;
use sigchange::suites::random_expression;

fn coords() -> Vec<String> {
    vec!["t".into(), "x".into(), "y".into()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), p in prop::array::uniform3(-2.0f64..2.0)) {
        let c = coords();
        let text = random_expression(&mut ChaCha8Rng::seed_from_u64(seed), &c, 4);
        let e = Expression::parse(&text, &c).unwrap();
        let d = e.evaluate_with_gradient(&p).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let (mut a, mut b) = (p, p);
            a[i] += h;
            b[i] -= h;
            let fd = (e.evaluate(&a).unwrap() - e.evaluate(&b).unwrap()) / (2.0 * h);
            prop_assert!((fd - d.partials[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "{text}: {fd} vs {}", d.partials[i]);
        }
    }

    #[test]
    fn printing_round_trips(seed in any::<u64>(), p in prop::array::uniform3(-2.0f64..2.0)) {
        let c = coords();
        let text = random_expression(&mut ChaCha8Rng::seed_from_u64(seed), &c, 4);
        let e = Expression::parse(&text, &c).unwrap();
        let printed = e.to_string();
        let again = Expression::parse(&printed, &c).unwrap();
        prop_assert_eq!(&again.to_string(), &printed);
        let (u, v) = (e.evaluate(&p).unwrap(), again.evaluate(&p).unwrap());
        prop_assert!((u - v).abs() <= 1e-14 * (1.0 + u.abs()));
    }

    #[test]
    fn quadrature_is_exact_on_quadratics(
        mut xs in prop::collection::vec(-3.0f64..3.0, 3..30),
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
    ) {
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|u, v| (*u - *v).abs() < 1e-3);
        prop_assume!(xs.len() >= 3);
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x + c * x * x).collect();
        let prim = |x: f64| a * x + b * x * x / 2.0 + c * x * x * x / 3.0;
        let got = cumulative_simpson(&xs, &ys);
        for (k, x) in xs.iter().enumerate() {
            prop_assert!((got[k] - (prim(*x) - prim(xs[0]))).abs() < 1e-9);
        }
    }
}
