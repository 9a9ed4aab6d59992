//! Dormand–Prince 5(4) with the Hairer–Wanner continuous extension.
//!
//! State vectors are fixed-size arrays; the right-hand side may refuse a
//! state (returns `None`), which the controller treats like a failed step.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Completed,
    /// The halt predicate fired; `t` is the first accepted point where it did.
    Halted,
    StepUnderflow,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct Sample<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
}

#[derive(Debug, Clone)]
pub struct Run<const N: usize> {
    pub samples: Vec<Sample<N>>,
    pub t: f64,
    pub y: [f64; N],
    pub stop: Stop,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-12, atol: 1e-14, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Dopri5 { rtol, atol, ..Default::default() }
    }

    /// Integrates from `t0` towards `t_end` (either direction), interpolating
    /// the dense output at each `sample_at` point (must be monotone in the
    /// direction of integration and lie in the interval). `halt` is evaluated
    /// on every accepted step.
    pub fn run<const N: usize, F, H>(&self, mut f: F, t0: f64, y0: [f64; N], t_end: f64, sample_at: &[f64], mut halt: H) -> Run<N>
    where
        F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
        H: FnMut(f64, &[f64; N]) -> bool,
    {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let span = (t_end - t0).abs();
        let mut samples = Vec::with_capacity(sample_at.len());
        let mut next = 0usize;
        while next < sample_at.len() && (sample_at[next] - t0) * dir <= 0.0 {
            samples.push(Sample { t: sample_at[next], y: y0 });
            next += 1;
        }
        let mut run = Run { samples, t: t0, y: y0, stop: Stop::Completed, steps: 0, rejected: 0 };
        if span == 0.0 {
            return run;
        }
        let mut k1 = match f(t0, &y0) {
            Some(k) => k,
            None => {
                run.stop = Stop::StepUnderflow;
                return run;
            }
        };
        let mut h = self.initial_step(&y0, &k1, span);
        let mut t = t0;
        let mut y = y0;
        let mut err_prev: f64 = 1e-4;
        let mut last_rejected = false;
        let h_min_rel = 1e-14;

        loop {
            if run.steps + run.rejected >= self.max_steps {
                run.stop = Stop::MaxSteps;
                break;
            }
            let remaining = (t_end - t).abs();
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            if !last && h < h_min_rel * t.abs().max(1.0) {
                run.stop = Stop::StepUnderflow;
                break;
            }
            let hd = h * dir;
            let stages = (|| {
                let y2 = axpy(&y, hd, &[(A21, &k1)]);
                let k2 = f(t + C2 * hd, &y2)?;
                let y3 = axpy(&y, hd, &[(A31, &k1), (A32, &k2)]);
                let k3 = f(t + C3 * hd, &y3)?;
                let y4 = axpy(&y, hd, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
                let k4 = f(t + C4 * hd, &y4)?;
                let y5 = axpy(&y, hd, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
                let k5 = f(t + C5 * hd, &y5)?;
                let y6 = axpy(&y, hd, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
                let k6 = f(t + hd, &y6)?;
                let y7 = axpy(&y, hd, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
                let k7 = f(t + hd, &y7)?;
                Some((k2, k3, k4, k5, k6, y7, k7))
            })();
            let Some((_k2, k3, k4, k5, k6, y_new, k7)) = stages else {
                h *= 0.25;
                run.rejected += 1;
                last_rejected = true;
                continue;
            };
            let mut err = 0.0;
            for i in 0..N {
                let e = hd * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                h *= 0.25;
                run.rejected += 1;
                last_rejected = true;
                continue;
            }
            if err <= 1.0 {
                // Continuous extension coefficients over [t, t + hd].
                let t_new = if last { t_end } else { t + hd };
                while next < sample_at.len() && (sample_at[next] - t_new) * dir <= 0.0 {
                    let theta = ((sample_at[next] - t) / hd).clamp(0.0, 1.0);
                    let th1 = 1.0 - theta;
                    let mut ys = [0.0; N];
                    for i in 0..N {
                        let r1 = y[i];
                        let r2 = y_new[i] - y[i];
                        let r3 = hd * k1[i] - r2;
                        let r4 = r2 - hd * k7[i] - r3;
                        let r5 = hd * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                        ys[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
                    }
                    run.samples.push(Sample { t: sample_at[next], y: ys });
                    next += 1;
                }
                t = t_new;
                y = y_new;
                k1 = k7;
                run.steps += 1;
                if halt(t, &y) {
                    run.stop = Stop::Halted;
                    break;
                }
                if last {
                    break;
                }
                // PI controller (Gustafsson) as in Hairer's DOPRI5.
                let beta = 0.04;
                let expo = 0.2 - beta * 0.75;
                let mut fac = err.max(1e-10).powf(expo) / err_prev.powf(beta) / 0.9;
                fac = fac.clamp(0.1, 5.0);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                err_prev = err.max(1e-4);
                h = h_new.min(self.h_max);
                last_rejected = false;
            } else {
                let fac = (err.powf(0.2) / 0.9).clamp(1.0, 10.0);
                h /= fac;
                run.rejected += 1;
                last_rejected = true;
            }
        }
        run.t = t;
        run.y = y;
        run
    }

    fn initial_step<const N: usize>(&self, y: &[f64; N], dy: &[f64; N], span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (dy[i] / sc).powi(2);
        }
        let d0 = (d0 / N as f64).sqrt();
        let d1 = (d1 / N as f64).sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).min(self.h_max).max(1e-12 * span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_with_dense_output() {
        let solver = Dopri5::with_tol(1e-11, 1e-14);
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let run = solver.run(|_, y: &[f64; 1]| Some([-y[0]]), 0.0, [1.0], 5.0, &ts, |_, _| false);
        assert_eq!(run.stop, Stop::Completed);
        assert_eq!(run.samples.len(), ts.len());
        for s in &run.samples {
            assert!((s.y[0] - (-s.t).exp()).abs() < 1e-9, "t={} y={}", s.t, s.y[0]);
        }
    }

    #[test]
    fn backward_harmonic_oscillator() {
        let solver = Dopri5::with_tol(1e-12, 1e-14);
        let run = solver.run(|_, y: &[f64; 2]| Some([y[1], -y[0]]), 10.0, [10f64.cos(), -10f64.sin()], 0.0, &[5.0, 0.0], |_, _| false);
        assert!((run.y[0] - 1.0).abs() < 1e-9);
        assert!((run.samples[0].y[0] - 5f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn halts_on_predicate() {
        let solver = Dopri5 { h_max: 0.5, ..Default::default() };
        let run = solver.run(|_, _y: &[f64; 1]| Some([1.0]), 0.0, [0.0], 10.0, &[], |_, y| y[0] > 3.0);
        assert_eq!(run.stop, Stop::Halted);
        assert!(run.y[0] > 3.0 && run.y[0] < 10.0);
    }
}
