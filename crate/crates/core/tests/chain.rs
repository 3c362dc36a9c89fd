use softcbf::sim::{unicycle, ObstacleParams, PNormBarrier, Scenario, ScenarioConfig, GOALS};
use softcbf::{
    composite_lie_derivatives, composite_value, membership, AlphaFunction, BarrierSpec,
    CompositeCBF, LieEngine, ScalarField,
};

const CIRCLE: ObstacleParams = ObstacleParams {
    b_x: 1.0,
    b_y: -0.5,
    a_x: 1.0,
    a_y: 1.0,
    c: 0.8,
};

fn circle(params: &ObstacleParams) -> ScalarField {
    ScalarField::new(PNormBarrier::obstacle(params, 2.0, 4).unwrap()).unwrap()
}

// Closed forms for a unit-scaled circle: with d = q − b, r = ‖d‖ and
// s = (d_x cos θ + d_y sin θ)/r, w = (d_x sin θ − d_y cos θ)/r:
// L_f h = v s, L_f² h = v² w²/r, L_g L_f h = (s, −v w).
fn circle_oracle(p: &ObstacleParams, x: &[f64]) -> (f64, f64, f64, [f64; 2]) {
    let (dx, dy) = (x[0] - p.b_x, x[1] - p.b_y);
    let r = dx.hypot(dy);
    let (v, th) = (x[2], x[3]);
    let s = (dx * th.cos() + dy * th.sin()) / r;
    let w = (dx * th.sin() - dy * th.cos()) / r;
    (r - p.c, v * s, v * v * w * w / r, [s, -v * w])
}

const STATES: [[f64; 4]; 4] = [
    [3.0, 1.0, 1.5, 0.3],
    [-2.0, 0.5, -0.7, 2.0],
    [1.2, 2.5, 4.0, -1.1],
    [0.0, -3.0, 0.2, 3.0],
];

#[test]
fn lie_derivatives_match_closed_form() {
    let sys = unicycle();
    let h = circle(&CIRCLE);
    let engine = LieEngine::default();
    for x in STATES {
        let (b, lf, lf2, lglf) = circle_oracle(&CIRCLE, &x);
        assert!((h.value(&x).unwrap() - b).abs() < 1e-14);
        assert!((engine.drift(&h, &sys, &x[..], 1).unwrap() - lf).abs() < 1e-13);
        assert!((engine.drift(&h, &sys, &x[..], 2).unwrap() - lf2).abs() < 1e-12);
        let lg = engine.input_row(&h, &sys, &x, 1).unwrap();
        assert_eq!(lg, vec![0.0, 0.0]);
        let row = engine.input_row(&h, &sys, &x, 2).unwrap();
        for k in 0..2 {
            assert!((row[k] - lglf[k]).abs() < 1e-13, "{row:?} vs {lglf:?}");
        }
    }
}

#[test]
fn composite_matches_hand_assembly() {
    let sys = unicycle();
    let other = ObstacleParams {
        b_x: -1.0,
        b_y: 2.0,
        ..CIRCLE
    };
    let k = 3.0;
    let rho = 2.0;
    let specs = [CIRCLE, other]
        .iter()
        .enumerate()
        .map(|(j, p)| {
            BarrierSpec::new(format!("c{j}"), circle(p), 2, vec![AlphaFunction::linear(k)]).unwrap()
        })
        .collect();
    let cbf = CompositeCBF::new(specs, rho).unwrap();
    for x in STATES {
        let parts: Vec<_> = [CIRCLE, other].iter().map(|p| circle_oracle(p, &x)).collect();
        let tops: Vec<f64> = parts.iter().map(|(b, lf, _, _)| lf + k * b).collect();
        let lf_tops: Vec<f64> = parts.iter().map(|(_, lf, lf2, _)| lf2 + k * lf).collect();
        let e: Vec<f64> = tops.iter().map(|t| (-rho * t).exp()).collect();
        let total: f64 = e.iter().sum();
        let w: Vec<f64> = e.iter().map(|v| v / total).collect();
        let h = -total.ln() / rho;
        let lf_h = w[0] * lf_tops[0] + w[1] * lf_tops[1];
        let lg_h: Vec<f64> = (0..2).map(|i| w[0] * parts[0].3[i] + w[1] * parts[1].3[i]).collect();

        let eval = cbf.evaluate(&sys, &x).unwrap();
        assert!((eval.h - h).abs() < 1e-12);
        assert!((eval.lf_h - lf_h).abs() < 1e-11);
        for i in 0..2 {
            assert!((eval.lg_h[i] - lg_h[i]).abs() < 1e-12);
            assert!((eval.weights[i] - w[i]).abs() < 1e-12);
        }
        assert!(eval.h < tops[0].min(tops[1]));
    }
}

#[test]
fn lie_derivatives_agree_with_time_derivative() {
    for cfg in [ScenarioConfig::example1(GOALS[2]), ScenarioConfig::example3(GOALS[2])] {
        let sc = Scenario::build(&cfg).unwrap();
        let sys = sc.system();
        let mut x = sc.initial_state();
        x[1] += 2.0;
        x[2] = 1.3;
        let u = vec![0.4; sys.m()];
        let (_, lf, lg) = composite_lie_derivatives(sc.cbf(), sys, &x).unwrap();
        let xdot = sys.xdot(&x, &u).unwrap();
        let dt = 1e-6;
        let shift = |s: f64| -> Vec<f64> { x.iter().zip(&xdot).map(|(a, b)| a + s * b).collect() };
        let fd = (composite_value(sc.cbf(), sys, &shift(dt)).unwrap()
            - composite_value(sc.cbf(), sys, &shift(-dt)).unwrap())
            / (2.0 * dt);
        let analytic = lf + lg.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        assert!((fd - analytic).abs() < 1e-6 * analytic.abs().max(1.0), "{fd} vs {analytic}");
    }
}

#[test]
fn membership_of_start_state() {
    let sc = Scenario::build(&ScenarioConfig::example1(GOALS[0])).unwrap();
    let m = membership(sc.cbf(), sc.system(), &sc.initial_state()).unwrap();
    assert!(m.in_ss && m.in_s && m.in_c);
    let mut inside = sc.initial_state();
    inside[0] = -5.0;
    inside[1] = -5.5;
    let m = membership(sc.cbf(), sc.system(), &inside).unwrap();
    assert!(!m.in_ss && !m.in_s);
}

#[test]
fn spec_rejects_wrong_chain_length() {
    let err = BarrierSpec::new("c", circle(&CIRCLE), 3, vec![AlphaFunction::linear(1.0)]);
    assert!(err.is_err());
    assert!(BarrierSpec::new("c", circle(&CIRCLE), 0, vec![]).is_err());
    assert!(CompositeCBF::new(vec![], 1.0).is_err());
}
