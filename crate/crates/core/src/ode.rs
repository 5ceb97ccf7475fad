//! Adaptive Dormand–Prince 5(4) integrator for small autonomous-in-form systems.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub type State = [f64; 2];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

/// One Dormand–Prince step; returns the fifth-order solution and the error estimate.
pub fn dp_step(f: &impl Fn(f64, &State) -> State, t: f64, y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; 2]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for c in 0..2 {
                ys[c] += h * A[s][j] * kj[c];
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for c in 0..2 {
            y5[c] += h * B5[s] * k[s][c];
            err[c] += h * (B5[s] - B4[s]) * k[s][c];
        }
    }
    (y5, err)
}

fn error_norm(y0: &State, y1: &State, err: &State, tol: Tolerance) -> f64 {
    let mut m: f64 = 0.0;
    for c in 0..2 {
        let sc = tol.atol + tol.rtol * y0[c].abs().max(y1[c].abs());
        m = m.max((err[c] / sc).abs());
    }
    m
}

/// Why an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    Reached,
    /// `event` became true at the returned time (located by bisection inside the step).
    Event,
    /// Step size collapsed or the state overflowed.
    Breakdown,
}

/// Integrates from `t0` to `t1` (`t1 > t0`), stopping at the first time where
/// `event(y)` switches from false to true.
pub fn integrate(
    f: &impl Fn(f64, &State) -> State,
    t0: f64,
    y0: State,
    t1: f64,
    tol: Tolerance,
    h0: &mut f64,
    event: &impl Fn(&State) -> bool,
) -> (f64, State, Stop) {
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.min(t1 - t0).max(1e-14 * (t1 - t0).abs().max(1e-300));
    let mut guard = 0usize;
    while t < t1 {
        guard += 1;
        if guard > 2_000_000 {
            return (t, y, Stop::Breakdown);
        }
        let step = h.min(t1 - t);
        let (y_new, err) = dp_step(f, t, &y, step);
        let e = error_norm(&y, &y_new, &err, tol);
        if !e.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            if h < 1e-15 * t1.abs().max(1.0) {
                return (t, y, Stop::Breakdown);
            }
            continue;
        }
        if e <= 1.0 {
            if event(&y_new) {
                // bisect the step length for the event time
                let (mut lo, mut hi) = (0.0, step);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (ym, _) = dp_step(f, t, &y, mid);
                    if event(&ym) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-16 * (t + hi).abs().max(1.0) {
                        break;
                    }
                }
                let (ye, _) = dp_step(f, t, &y, hi);
                *h0 = h;
                return (t + hi, ye, Stop::Event);
            }
            t += step;
            y = y_new;
        }
        let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * fac;
        if h < 1e-15 * t1.abs().max(1.0) {
            return (t, y, Stop::Breakdown);
        }
    }
    *h0 = h;
    (t1, y, Stop::Reached)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let f = |_t: f64, y: &State| [y[1], -y[0]];
        let mut h = 1e-3;
        let tol = Tolerance { rtol: 1e-12, atol: 1e-14 };
        let (t, y, s) = integrate(&f, 0.0, [1.0, 0.0], 2.0, tol, &mut h, &|_| false);
        assert_eq!(s, Stop::Reached);
        assert!((t - 2.0).abs() < 1e-15);
        assert!((y[0] - 2f64.cos()).abs() < 1e-10);
        let mut h = 1e-3;
        let (tz, _, s) = integrate(&f, 0.0, [1.0, 0.0], 3.0, tol, &mut h, &|y| y[0] < 0.0);
        assert_eq!(s, Stop::Event);
        assert!((tz - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
