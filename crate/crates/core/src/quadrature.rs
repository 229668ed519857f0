//! Adaptive composite quadrature for the entropy integrals.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge: {context} (error estimate {err:.3e} near x={at:.6e}, tolerance {tol:.3e})")]
    NonConvergent {
        context: &'static str,
        err: f64,
        tol: f64,
        at: f64,
    },
}

/// Controls the adaptive Simpson integration used for differential entropies.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Absolute tolerance on each integrated interval.
    pub abs_tol: f64,
    /// Maximum bisection depth before giving up.
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-8,
            max_depth: 48,
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

struct Adaptive<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    tol: f64,
    inv_total_len: f64,
    max_depth: u32,
    worst: f64,
    worst_at: f64,
    converged: bool,
}

impl<F: Fn(f64) -> f64> Adaptive<'_, F> {
    fn run(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = (left + right - whole) / 15.0;
        // Local budget proportional to interval length keeps the summed error
        // under the absolute tolerance for the whole range. Deep subdivision
        // can push the budget below the rounding noise of the panel values
        // themselves; error estimates at that scale carry no information, so
        // they count as converged rather than forcing further splits.
        let noise = 1e-13 * (left.abs() + right.abs());
        let budget = (self.tol * (b - a) * self.inv_total_len).max(noise);
        if err.abs() <= budget || depth >= self.max_depth {
            if depth >= self.max_depth && err.abs() > budget {
                self.converged = false;
                if err.abs() > self.worst {
                    self.worst = err.abs();
                    self.worst_at = m;
                }
            }
            return left + right + err;
        }
        self.run(a, m, fa, flm, fm, left, depth + 1) + self.run(m, b, fm, frm, fb, right, depth + 1)
    }
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    context: &'static str,
) -> Result<f64, QuadratureError> {
    if a >= b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    let mut state = Adaptive {
        f: &f,
        tol: spec.abs_tol,
        inv_total_len: 1.0 / (b - a),
        max_depth: spec.max_depth,
        worst: 0.0,
        worst_at: f64::NAN,
        converged: true,
    };
    let value = state.run(a, b, fa, fm, fb, whole, 0);
    if state.converged {
        Ok(value)
    } else {
        Err(QuadratureError::NonConvergent {
            context,
            err: state.worst,
            tol: spec.abs_tol,
            at: state.worst_at,
        })
    }
}

/// Merge possibly-overlapping intervals into a disjoint sorted cover.
pub fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}
