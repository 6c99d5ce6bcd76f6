#![allow(dead_code)]

use chialvo::map::{step2, step3, MapParams, PlanarParams, State, State2};
use chialvo::Param;

/// Fixed-point census parameters at flux coupling `k`.
pub fn census(k: f64) -> MapParams {
    chialvo::map::presets::fixed_point_family(k)
}

/// Central-difference Jacobian of `step3`, row-major.
pub fn fd_jacobian3(p: &MapParams, s: State, h: f64) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for c in 0..3 {
        let mut plus = s.to_array();
        let mut minus = s.to_array();
        plus[c] += h;
        minus[c] -= h;
        let fp = step3(p, State::from_array(plus)).to_array();
        let fm = step3(p, State::from_array(minus)).to_array();
        for r in 0..3 {
            j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

pub fn fd_jacobian2(p: &PlanarParams, s: State2, h: f64) -> [[f64; 2]; 2] {
    let f = |x: f64, y: f64| {
        let o = step2(p, State2::new(x, y));
        [o.x, o.y]
    };
    let dx = (f(s.x + h, s.y), f(s.x - h, s.y));
    let dy = (f(s.x, s.y + h), f(s.x, s.y - h));
    let mut j = [[0.0; 2]; 2];
    for r in 0..2 {
        j[r][0] = (dx.0[r] - dx.1[r]) / (2.0 * h);
        j[r][1] = (dy.0[r] - dy.1[r]) / (2.0 * h);
    }
    j
}

/// Largest entry error relative to the largest entry (floored at 1).
pub fn matrix_rel_err<const N: usize>(exact: &[[f64; N]; N], approx: &[[f64; N]; N]) -> f64 {
    let scale = exact.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let err = exact.iter().flatten().zip(approx.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    err / scale
}

/// Parameters with one entry overridden.
pub fn with(p: MapParams, name: &str, v: f64) -> MapParams {
    p.with(name.parse::<Param>().unwrap(), v).unwrap()
}
