//! Two-sided Skorokhod reflection on `[0, b]`.
//!
//! [`two_sided_skorokhod_map`] evaluates the explicit inf/sup formula for the
//! reflected path directly at every sample time, and recovers the two
//! boundary processes from their coupled running-supremum characterisation.
//! [`incremental_reflect`] is the streaming one-step form used by the
//! simulator. On piecewise-constant paths whose increments do not exceed `b`
//! in magnitude the two agree exactly.

use crate::error::{invalid, Result};

/// A path observed at strictly increasing times starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(invalid("path needs equally many (and at least one) times and values"));
        }
        if times[0] != 0.0 {
            return Err(invalid("path must start at time 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("path times must be strictly increasing"));
        }
        Ok(Self { times, values })
    }

    /// Builds a path from its starting value and successive increments on a
    /// unit time grid.
    pub fn from_increments(x0: f64, increments: &[f64]) -> Self {
        let mut values = Vec::with_capacity(increments.len() + 1);
        values.push(x0);
        let mut x = x0;
        for dx in increments {
            x += dx;
            values.push(x);
        }
        let times = (0..values.len()).map(|i| i as f64).collect();
        Self { times, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The reflected path and its boundary processes at the sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct Reflection {
    pub v: Vec<f64>,
    pub l0: Vec<f64>,
    pub lb: Vec<f64>,
}

/// State carried by the streaming reflection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReflectState {
    pub v: f64,
    pub l0: f64,
    pub lb: f64,
}

impl ReflectState {
    pub fn at(v: f64) -> Self {
        Self { v, l0: 0.0, lb: 0.0 }
    }
}

/// Applies one free increment `dx` and pushes the result back into `[0, b]`.
#[inline]
pub fn incremental_reflect(state: ReflectState, dx: f64, b: f64) -> ReflectState {
    let y = state.v + dx;
    ReflectState {
        v: y.clamp(0.0, b),
        l0: state.l0 + (-y).max(0.0),
        lb: state.lb + (y - b).max(0.0),
    }
}

/// Runs [`incremental_reflect`] along the increments of `x`.
pub fn reflect_incrementally(x: &SampledPath, b: f64) -> Result<Reflection> {
    check_start(x, b)?;
    let mut state = ReflectState::at(x.values[0]);
    let mut out = Reflection {
        v: vec![state.v],
        l0: vec![0.0],
        lb: vec![0.0],
    };
    for w in x.values.windows(2) {
        state = incremental_reflect(state, w[1] - w[0], b);
        out.v.push(state.v);
        out.l0.push(state.l0);
        out.lb.push(state.lb);
    }
    Ok(out)
}

fn check_start(x: &SampledPath, b: f64) -> Result<()> {
    if !(b > 0.0) {
        return Err(invalid(format!("reflection interval needs b > 0, got {b}")));
    }
    let x0 = x.values[0];
    if !(0.0..=b).contains(&x0) {
        return Err(invalid(format!("path starts at {x0}, outside [0, {b}]")));
    }
    Ok(())
}

/// Direct evaluation of the two-sided Skorokhod map at every sample.
///
/// The reflected value is
/// `V(t) = X(t) - [ ((X(0)-b)^+ ∧ inf_{u≤t} X(u)) ∨ sup_{s≤t} ((X(s)-b) ∧ inf_{s≤u≤t} X(u)) ]`,
/// and `(L0, Lb)` is the minimal solution of
/// `L0(t) = sup_{s≤t} (Lb(s) - X(s))^+`, `Lb(t) = sup_{s≤t} (X(s) + L0(s) - b)^+`,
/// obtained by monotone fixed-point iteration. The cost is quadratic in the
/// number of samples.
pub fn two_sided_skorokhod_map(x: &SampledPath, b: f64) -> Result<Reflection> {
    check_start(x, b)?;
    let xs = &x.values;
    let n = xs.len();

    let mut v = Vec::with_capacity(n);
    let head = (xs[0] - b).max(0.0);
    let mut running_inf = f64::INFINITY;
    for t in 0..n {
        running_inf = running_inf.min(xs[t]);
        // sup over s ≤ t of (X(s) - b) ∧ inf_{s≤u≤t} X(u), scanning s downward
        let mut tail_inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for s in (0..=t).rev() {
            tail_inf = tail_inf.min(xs[s]);
            sup = sup.max((xs[s] - b).min(tail_inf));
        }
        let correction = head.min(running_inf).max(sup);
        v.push(xs[t] - correction);
    }

    let mut l0 = vec![0.0; n];
    let mut lb = vec![0.0; n];
    // each sweep propagates at least one further alternation between the
    // two boundaries, so n + 1 sweeps always suffice
    for _ in 0..=n {
        let mut changed = false;
        let mut sup0 = 0.0_f64;
        let mut supb = 0.0_f64;
        for t in 0..n {
            sup0 = sup0.max((lb[t] - xs[t]).max(0.0));
            if sup0 != l0[t] {
                l0[t] = sup0;
                changed = true;
            }
        }
        for t in 0..n {
            supb = supb.max((xs[t] + l0[t] - b).max(0.0));
            if supb != lb[t] {
                lb[t] = supb;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Reflection { v, l0, lb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_path_hits_upper_boundary_only() {
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let values = times.clone();
        let path = SampledPath::new(times.clone(), values).unwrap();
        let r = two_sided_skorokhod_map(&path, 1.0).unwrap();
        for (i, t) in times.iter().enumerate() {
            assert!((r.v[i] - t.min(1.0)).abs() < 1e-12);
            assert_eq!(r.l0[i], 0.0);
            assert!((r.lb[i] - (t - 1.0).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_constant_path_is_untouched() {
        let path = SampledPath::new(vec![0.0, 1.0, 2.0], vec![0.4; 3]).unwrap();
        let r = two_sided_skorokhod_map(&path, 1.0).unwrap();
        assert_eq!(r.v, vec![0.4; 3]);
        assert_eq!(r.l0, vec![0.0; 3]);
        assert_eq!(r.lb, vec![0.0; 3]);
    }

    #[test]
    fn single_step_updates() {
        let s = incremental_reflect(ReflectState::at(0.2), -0.5, 1.0);
        assert_eq!(s.v, 0.0);
        assert!((s.l0 - 0.3).abs() < 1e-15);
        assert_eq!(s.lb, 0.0);
        let s = incremental_reflect(ReflectState::at(0.2), 0.3, 1.0);
        assert!((s.v - 0.5).abs() < 1e-15);
        assert_eq!((s.l0, s.lb), (0.0, 0.0));
    }

    #[test]
    fn rejects_start_outside_interval() {
        let path = SampledPath::new(vec![0.0, 1.0], vec![1.5, 0.5]).unwrap();
        assert!(two_sided_skorokhod_map(&path, 1.0).is_err());
        assert!(reflect_incrementally(&path, 1.0).is_err());
        assert!(SampledPath::new(vec![0.0, 0.0], vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn alternating_boundary_hits() {
        let path = SampledPath::from_increments(0.5, &[0.9, -1.0, 0.95, -0.99, 0.2]);
        let direct = two_sided_skorokhod_map(&path, 1.0).unwrap();
        let inc = reflect_incrementally(&path, 1.0).unwrap();
        for i in 0..path.len() {
            assert!((direct.v[i] - inc.v[i]).abs() < 1e-12);
            assert!((direct.l0[i] - inc.l0[i]).abs() < 1e-12);
            assert!((direct.lb[i] - inc.lb[i]).abs() < 1e-12);
            let net = path.values[i] + direct.l0[i] - direct.lb[i];
            assert!((net - direct.v[i]).abs() < 1e-12);
        }
    }
}
