//! Fixed-step simulator against an adaptive Runge-Kutta-Fehlberg 4(5)
//! reference sharing only the right-hand side.

use microgrid_edm::model::{self, PccInput, SmParams, SmState};
use microgrid_edm::reference;
use microgrid_edm::simulator::{self, SimOptions, Trace};

fn f(y: [f64; 3], u: PccInput, p: &SmParams) -> [f64; 3] {
    model::sm_rhs(SmState::from_array(y), u, p).unwrap().to_array()
}

fn axpy(y: [f64; 3], terms: &[(f64, [f64; 3])]) -> [f64; 3] {
    let mut out = y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += c * k[i];
        }
    }
    out
}

/// Integrates one sampling interval with linearly interpolated inputs.
fn rkf45_interval(mut y: [f64; 3], u0: PccInput, u1: PccInput, dt: f64, p: &SmParams, tol: f64) -> [f64; 3] {
    let input = |s: f64| {
        let a = s / dt;
        PccInput::new(u0.v + a * (u1.v - u0.v), u0.omega + a * (u1.omega - u0.omega))
    };
    let mut t = 0.0;
    let mut h = dt / 16.0;
    while t < dt {
        h = h.min(dt - t);
        let k1 = f(y, input(t), p);
        let k2 = f(axpy(y, &[(h / 4.0, k1)]), input(t + h / 4.0), p);
        let k3 = f(axpy(y, &[(3.0 * h / 32.0, k1), (9.0 * h / 32.0, k2)]), input(t + 3.0 * h / 8.0), p);
        let k4 = f(
            axpy(y, &[(1932.0 * h / 2197.0, k1), (-7200.0 * h / 2197.0, k2), (7296.0 * h / 2197.0, k3)]),
            input(t + 12.0 * h / 13.0),
            p,
        );
        let k5 = f(
            axpy(
                y,
                &[(439.0 * h / 216.0, k1), (-8.0 * h, k2), (3680.0 * h / 513.0, k3), (-845.0 * h / 4104.0, k4)],
            ),
            input(t + h),
            p,
        );
        let k6 = f(
            axpy(
                y,
                &[
                    (-8.0 * h / 27.0, k1),
                    (2.0 * h, k2),
                    (-3544.0 * h / 2565.0, k3),
                    (1859.0 * h / 4104.0, k4),
                    (-11.0 * h / 40.0, k5),
                ],
            ),
            input(t + h / 2.0),
            p,
        );
        let y4 = axpy(
            y,
            &[(25.0 * h / 216.0, k1), (1408.0 * h / 2565.0, k3), (2197.0 * h / 4104.0, k4), (-h / 5.0, k5)],
        );
        let y5 = axpy(
            y,
            &[
                (16.0 * h / 135.0, k1),
                (6656.0 * h / 12825.0, k3),
                (28561.0 * h / 56430.0, k4),
                (-9.0 * h / 50.0, k5),
                (2.0 * h / 55.0, k6),
            ],
        );
        let err = (0..3).map(|i| (y5[i] - y4[i]).abs()).fold(0.0, f64::max);
        if err <= tol {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.84 * (tol / err).powf(0.25)).clamp(0.1, 4.0) };
        h *= factor;
    }
    y
}

fn deviation_from_reference(n_sub: usize) -> (f64, simulator::SimResult) {
    let theta = reference::scenario("3").unwrap();
    let n = 250;
    let omega: Vec<f64> = (0..n).map(|k| if k < 50 { 1.0 } else { 0.99 }).collect();
    let trace = Trace::new(0.0, 0.02, vec![1.0; n], omega).unwrap();
    let opts = SimOptions { n_sub, ..SimOptions::default() };
    let sim = simulator::simulate_from_steady_state(&theta, &trace, &opts).unwrap();

    let mut y = sim.states[0].to_array();
    let mut worst: f64 = 0.0;
    for k in 1..n {
        y = rkf45_interval(y, trace.input(k - 1), trace.input(k), trace.dt, &theta.sm, 1e-13);
        let s = sim.states[k].to_array();
        for i in 0..3 {
            worst = worst.max((s[i] - y[i]).abs());
        }
    }
    (worst, sim)
}

#[test]
fn frequency_step_matches_adaptive_reference() {
    // The default 5 ms step leaves a few 1e-5 of truncation error in the swing.
    let (coarse, sim) = deviation_from_reference(SimOptions::default().n_sub);
    assert!(coarse < 1e-4, "default step deviates {coarse:e} pu");
    let (fine, _) = deviation_from_reference(16);
    assert!(fine < 1e-6, "max state deviation {fine:e} pu");
    assert!(fine < coarse / 100.0);

    // The drop in grid frequency excites a damped swing of the machine.
    let n = sim.len();
    let p_end = sim.p_hat[n - 1];
    let dev: Vec<f64> = sim.p_hat[50..].iter().map(|p| p - p_end).collect();
    let crossings = dev.windows(2).filter(|w| w[0].signum() != w[1].signum() && w[0].abs() > 1e-3).count();
    assert!(crossings >= 2, "expected an oscillatory transient, {crossings} sign changes");
    let early = dev[..25].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let late = dev[150..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(late < 1e-3 * early, "transient not damped: early {early}, late {late}");
}

#[test]
fn bit_identical_replays() {
    let theta = reference::scenario("4").unwrap();
    let n = 300;
    let v: Vec<f64> = (0..n).map(|k| 1.0 + 0.003 * ((k / 40) % 2) as f64).collect();
    let trace = Trace::new(0.0, 0.02, v, vec![1.0; n]).unwrap();
    let a = simulator::simulate_from_steady_state(&theta, &trace, &SimOptions::default()).unwrap();
    let b = simulator::simulate_from_steady_state(&theta, &trace, &SimOptions::default()).unwrap();
    assert_eq!(a.p_hat, b.p_hat);
    assert_eq!(a.q_hat, b.q_hat);
    for k in 0..n {
        assert_eq!(a.time(k), trace.t0 + k as f64 * trace.dt);
    }
}
