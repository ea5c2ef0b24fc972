//! Fixed inputs shared by the benchmarks.

use hodograph::builtins;
use hodograph::surface::branch_times;

/// Points on a radius-2.5 circle where the cubic map has two separated
/// real roots, with the smaller root.
pub fn cubic_gamma_points(n: usize) -> Vec<(Vec<f64>, f64)> {
    let map = builtins::cubic();
    (0..)
        .map(|i| 0.1 + 0.37 * i as f64)
        .map(|a| vec![2.5 * a.cos(), 2.5 * a.sin()])
        .filter_map(|u| {
            let set = branch_times(&map, &u).ok()?;
            match set.roots.as_slice() {
                [a, b] if b.t - a.t > 0.2 * a.t.abs().max(1.0) => Some((u, a.t)),
                _ => None,
            }
        })
        .take(n)
        .collect()
}
