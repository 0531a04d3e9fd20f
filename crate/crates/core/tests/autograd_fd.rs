use dyspn::autograd::{backward, loss_and_grad, LossWeights};
use dyspn::gradcheck::{check_gradients, random_problem, GradcheckOptions};
use dyspn::{propagate, PropagationConfig, PropagationTape, Variant};

#[test]
fn analytic_gradients_match_finite_differences() {
    for variant in Variant::ALL {
        for steps in [1, 3] {
            for seed in 0..3 {
                let (b, gt) = random_problem(variant, 5, steps, seed);
                let cfg = PropagationConfig::with_steps(steps);
                let report = check_gradients(&b, &gt, &cfg, &GradcheckOptions::default()).unwrap();
                assert!(report.passed(), "{variant} N={steps} seed={seed}: {report:?}");
                assert!(report.classes.iter().all(|c| c.checked > 0));
            }
        }
    }
}

#[test]
fn suppression_off_gradients_match() {
    let (b, gt) = random_problem(Variant::Dilated, 5, 2, 4);
    let cfg = PropagationConfig {
        suppression: false,
        ..PropagationConfig::with_steps(2)
    };
    let report = check_gradients(&b, &gt, &cfg, &GradcheckOptions::default()).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn backward_is_linear_in_upstream() {
    let (b, gt) = random_problem(Variant::Deformable, 6, 3, 8);
    let cfg = PropagationConfig::with_steps(3);
    let view = b.bundle(&cfg).unwrap();
    let (out, tape) = propagate(&b.initial, &b.affinity, &b.attention, &b.spec, &cfg).unwrap();
    let (_, g) = loss_and_grad(&out, &gt, LossWeights::default()).unwrap();
    let base = backward(&view, &tape, g.values()).unwrap();
    for c in [-2.0, 0.5, 3.0] {
        let scaled: Vec<f64> = g.values().iter().map(|v| v * c).collect();
        let got = backward(&view, &tape, &scaled).unwrap();
        let want = base.scale(c);
        for (a, e) in [
            (&got.initial, &want.initial),
            (&got.affinity, &want.affinity),
            (&got.attention, &want.attention),
        ] {
            for (x, y) in a.iter().zip(e) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "c={c}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn backward_needs_only_the_tape() {
    let (b, gt) = random_problem(Variant::Ring7x7, 5, 3, 1);
    let cfg = PropagationConfig::with_steps(3);
    let view = b.bundle(&cfg).unwrap();
    let (out, tape) = propagate(&b.initial, &b.affinity, &b.attention, &b.spec, &cfg).unwrap();
    let (_, g) = loss_and_grad(&out, &gt, LossWeights::default()).unwrap();
    assert_eq!(tape.recorded_normalizers(), 3);
    let first = backward(&view, &tape, g.values()).unwrap();
    let again = backward(&view, &tape.clone(), g.values()).unwrap();
    assert_eq!(first, again);

    let states_only = PropagationTape::from_states(tape.states().to_vec(), tape.precision()).unwrap();
    assert!(backward(&view, &states_only, g.values()).is_err());
}
