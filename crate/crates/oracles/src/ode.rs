/// Adaptive classical Runge–Kutta (order 4) with step doubling and local
/// Richardson extrapolation. Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn rk4_adaptive<F>(f: F, y0: &[f64], t0: f64, t1: f64, rtol: f64, atol: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut y = y0.to_vec();
    let mut t = t0;
    let span = t1 - t0;
    if span == 0.0 {
        return y;
    }
    let mut h = span / 100.0;
    let mut guard = 0usize;
    while t < t1 {
        guard += 1;
        assert!(guard < 10_000_000, "step size collapsed");
        if t + h > t1 {
            h = t1 - t;
        }
        let full = rk4_step(&f, t, &y, h);
        let half = rk4_step(&f, t, &y, h / 2.0);
        let two = rk4_step(&f, t + h / 2.0, &half, h / 2.0);
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let scale = atol + rtol * two[i].abs().max(y[i].abs());
            err = err.max((two[i] - full[i]).abs() / 15.0 / scale);
        }
        if err <= 1.0 {
            t += h;
            for i in 0..y.len() {
                y[i] = two[i] + (two[i] - full[i]) / 15.0;
            }
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
        h *= factor;
    }
    y
}

/// Fixed-step classical Runge–Kutta.
pub fn rk4_fixed<F>(f: F, y0: &[f64], t0: f64, t1: f64, steps: usize) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    for i in 0..steps {
        y = rk4_step(&f, t0 + i as f64 * h, &y, h);
    }
    y
}

fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let shift = |base: &[f64], k: &[f64], a: f64| -> Vec<f64> { base.iter().zip(k).map(|(b, k)| b + a * k).collect() };
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, &shift(y, &k1, h / 2.0));
    let k3 = f(t + h / 2.0, &shift(y, &k2, h / 2.0));
    let k4 = f(t + h, &shift(y, &k3, h));
    (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let f = |_t: f64, y: &[f64]| vec![y[1], -y[0]];
        let y = rk4_adaptive(f, &[1.0, 0.0], 0.0, 3.0, 1e-12, 1e-14);
        assert!((y[0] - 3f64.cos()).abs() < 1e-10);
        assert!((y[1] + 3f64.sin()).abs() < 1e-10);
    }
}
