//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)) for the
//! nonstiff reduced ODE systems.

use crate::{lit, Error, Float, Result};

/// One accepted integration point.
#[derive(Debug, Clone)]
pub(crate) struct OdePoint<T> {
    pub t: T,
    pub y: Vec<T>,
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction),
/// returning every accepted step. `rtol`/`atol` control the local error of
/// the embedded 5(4) pair.
pub(crate) fn integrate<T, F>(
    mut f: F,
    t0: T,
    y0: Vec<T>,
    t_end: T,
    rtol: T,
    atol: T,
) -> Result<Vec<OdePoint<T>>>
where
    T: Float,
    F: FnMut(T, &[T]) -> Vec<T>,
{
    integrate_until(&mut f, t0, y0, t_end, rtol, atol, |_, _| false)
}

/// Like [`integrate`] but stops early when `halt(t, y)` turns true at an
/// accepted step.
pub(crate) fn integrate_until<T, F, H>(
    f: &mut F,
    t0: T,
    y0: Vec<T>,
    t_end: T,
    rtol: T,
    atol: T,
    mut halt: H,
) -> Result<Vec<OdePoint<T>>>
where
    T: Float,
    F: FnMut(T, &[T]) -> Vec<T>,
    H: FnMut(T, &[T]) -> bool,
{
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    // b5 - b4: error weights of the embedded pair.
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];

    let dim = y0.len();
    let direction = if t_end >= t0 { T::one() } else { -T::one() };
    let span = (t_end - t0).abs();
    if span == T::zero() {
        return Ok(vec![OdePoint { t: t0, y: y0 }]);
    }

    let mut t = t0;
    let mut y = y0;
    let mut h = (span * lit::<T>(1e-3)).min(span) * direction;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); dim]; 7];
    k[0] = f(t, &y);

    let mut out = vec![OdePoint { t, y: y.clone() }];
    let max_steps = 2_000_000usize;

    for _ in 0..max_steps {
        if (t - t_end) * direction >= T::zero() {
            return Ok(out);
        }
        if (t + h - t_end) * direction > T::zero() {
            h = t_end - t;
        }

        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                let a = lit::<T>(A[stage][j]);
                if a != T::zero() {
                    for d in 0..dim {
                        ys[d] += h * a * kj[d];
                    }
                }
            }
            k[stage + 1] = f(t + lit::<T>(C[stage]) * h, &ys);
        }

        // 5th-order solution is the last stage evaluation point (FSAL).
        let mut ynew = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = lit::<T>(A[5][j]);
            if a != T::zero() {
                for d in 0..dim {
                    ynew[d] += h * a * kj[d];
                }
            }
        }

        let mut err_acc = T::zero();
        for d in 0..dim {
            let mut e = T::zero();
            for (j, kj) in k.iter().enumerate() {
                e += lit::<T>(E[j]) * kj[d];
            }
            e *= h;
            let scale = atol + rtol * y[d].abs().max(ynew[d].abs());
            let ratio = e / scale;
            err_acc += ratio * ratio;
        }
        let err = (err_acc / lit::<T>(dim as f64)).sqrt();

        if err <= T::one() || h.abs() < span * lit::<T>(1e-14) {
            t += h;
            let k_last = k[6].clone();
            y = ynew;
            k[0] = k_last;
            out.push(OdePoint { t, y: y.clone() });
            if halt(t, &y) {
                return Ok(out);
            }
        }
        let factor = if err == T::zero() {
            lit::<T>(5.0)
        } else {
            (lit::<T>(0.9) * err.powf(lit(-0.2)))
                .min(lit(5.0))
                .max(lit(0.2))
        };
        h = h * factor;
        if !h.is_finite() || h == T::zero() {
            return Err(Error::StiffnessFailure {
                t: t.to_f64().unwrap_or(f64::NAN),
                ds: h.to_f64().unwrap_or(f64::NAN),
                rejections: 0,
            });
        }
    }
    Err(Error::Precondition(
        "ODE integration exceeded the step budget".into(),
    ))
}
