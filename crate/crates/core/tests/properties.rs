use hodograph::builtins;
use hodograph::expr::Expr;
use hodograph::field::{newton_tol, solve_family, solve_point};
use hodograph::frame::{complementary_basis, frame_at, null_vectors, TOL_NULL};
use hodograph::hodograph::{build_matrix, characteristic_coefficients, CharacteristicCoefficients, TOL_RANK};
use hodograph::linalg::max_abs;
use hodograph::roots::real_roots;
use hodograph::surface::branch_times;
use hodograph::vorticity::{stress_tensor, vorticity, vorticity_two_form};
use hodograph::{InitialDataMap, MapFamily};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn nonlinear_3d() -> InitialDataMap {
    let vars = ["u1", "u2", "u3"];
    let exprs = ["u2^2 + sin(u3)", "u1*u3 - u2/2", "exp(u1/2) - u2^3/3"]
        .iter()
        .map(|s| Expr::parse(s, &vars).unwrap())
        .collect();
    InitialDataMap::from_exprs("nonlinear3d", exprs)
}

/// Maps paired with a point sampler from the unit cube.
fn sample_maps() -> Vec<(InitialDataMap, fn(&[f64]) -> Vec<f64>)> {
    fn box3(p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| 6.0 * v - 3.0).collect()
    }
    fn box2(p: &[f64]) -> Vec<f64> {
        p[..2].iter().map(|v| 6.0 * v - 3.0).collect()
    }
    fn wedge(p: &[f64]) -> Vec<f64> {
        let s = 0.05 + 0.9 * p[0];
        vec![s, s.powf(1.05 + 1.9 * p[1])]
    }
    let mut maps: Vec<(InitialDataMap, fn(&[f64]) -> Vec<f64>)> = vec![
        (builtins::cubic(), box2),
        (builtins::rotational(1.0), box2),
        (builtins::linear(2, 0.7), box2),
        (builtins::jordan(1.0, 1.0, 1.0), box3),
        (nonlinear_3d(), box3),
        (builtins::analytic2d("V^3/3 + exp(V)").unwrap(), box2),
    ];
    for (name, _, _) in builtins::HARMONIC_PRESETS {
        maps.push((builtins::harmonic(name).unwrap(), box2));
    }
    for b in builtins::gaussian().branches {
        maps.push((b, wedge));
    }
    maps
}

fn unit3() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0f64, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn adjugate_identity(p in unit3(), t in -5.0..5.0f64) {
        for (map, sample) in sample_maps() {
            let u = sample(&p);
            let m = build_matrix(&map, t, &u).unwrap();
            let n = m.dim();
            let scale = max_abs(&m.entries).max(1.0).powi(n as i32);
            let defect = &m.entries * &m.adjugate - DMatrix::identity(n, n) * m.det;
            prop_assert!(max_abs(&defect) <= 1e-10 * scale, "{}: {}", map.label(), max_abs(&defect));
        }
    }

    #[test]
    fn determinant_is_characteristic_polynomial(p in unit3(), ts in proptest::collection::vec(-5.0..5.0f64, 20)) {
        for (map, sample) in sample_maps() {
            let u = sample(&p);
            let c = characteristic_coefficients(&map, &u).unwrap();
            for &t in &ts {
                let m = build_matrix(&map, t, &u).unwrap();
                let scale = max_abs(&m.entries).max(1.0).powi(m.dim() as i32);
                prop_assert!((m.det - c.eval(t)).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn analytic_jacobian_matches_differences(p in unit3()) {
        for (map, sample) in sample_maps() {
            let u = sample(&p);
            // the fixed step ε^{1/3}·max(1,|u_i|) must be small against the distance
            // to the wedge edges, where the Gaussian map has square-root singularities
            if map.name() == "gaussian" {
                let edge = [u[0], u[1], u[1] - u[0].powi(3), u[0] - u[1]].into_iter().fold(f64::INFINITY, f64::min);
                if f64::EPSILON.cbrt() > 1e-3 * edge {
                    continue;
                }
            }
            let (Ok(a), Ok(fd)) = (map.jacobian(&u), map.jacobian_fd(&u)) else { continue };
            let rel = max_abs(&(&a - &fd)) / max_abs(&a).max(1.0);
            prop_assert!(rel <= 1e-6, "{}: {rel}", map.label());
        }
    }

    #[test]
    fn rank_plus_nullity(p in unit3()) {
        for (map, sample) in sample_maps() {
            let u = sample(&p);
            let Ok(set) = branch_times(&map, &u) else { continue };
            for root in &set.roots {
                let m = build_matrix(&map, root.t, &u).unwrap();
                let rank = m.numerical_rank(TOL_RANK);
                match null_vectors(&m.entries, TOL_RANK) {
                    Ok((r, _)) => prop_assert_eq!(rank + r.len(), m.dim()),
                    Err(_) => prop_assert_eq!(rank, m.dim()),
                }
            }
        }
    }

    #[test]
    fn roots_rebuild_polynomial(p in unit3()) {
        for (map, sample) in sample_maps() {
            let u = sample(&p);
            let c = characteristic_coefficients(&map, &u).unwrap();
            let roots = real_roots(&c);
            let total: usize = roots.iter().map(|r| r.multiplicity).sum();
            if total != c.degree() {
                continue;
            }
            let flat: Vec<f64> = roots.iter().flat_map(|r| std::iter::repeat_n(r.t, r.multiplicity)).collect();
            let rebuilt = CharacteristicCoefficients::from_roots(&flat);
            let scale = c.a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in rebuilt.a.iter().zip(&c.a) {
                prop_assert!((a - b).abs() <= 1e-7 * scale, "{}: {a} vs {b}", map.label());
            }
        }
    }

    #[test]
    fn two_form_and_stress_decompose_gradient(p in unit3(), t in -5.0..5.0f64) {
        for (map, sample) in sample_maps() {
            let u = sample(&p);
            let Ok(rec) = vorticity(&map, t, &u) else { continue };
            let w = vorticity_two_form(&map, t, &u).unwrap();
            let s = stress_tensor(&map, t, &u).unwrap();
            prop_assert_eq!(&w, &(-w.transpose()));
            prop_assert_eq!(&s, &s.transpose());
            let grad = build_matrix(&map, t, &u).unwrap().derivatives_from_inverse().unwrap();
            let scale = max_abs(&grad).max(1.0);
            let defect = max_abs(&(s + w.transpose() - grad * 2.0));
            prop_assert!(defect <= 1e-12 * scale, "{}: {defect} at norm {}", map.label(), rec.norm);
        }
    }

    #[test]
    fn gradient_maps_have_no_vorticity(c in proptest::collection::vec(-2.0..2.0f64, 6), p in unit3(), t in -3.0..3.0f64) {
        let phi = format!(
            "{}*u1^3 + {}*u1^2*u2 + {}*u1*u2^2 + {}*u2^3 + {}*sin(u1*u2) + {}*exp(u1 - u2)",
            c[0], c[1], c[2], c[3], c[4], c[5]
        );
        let vars = ["u1", "u2"];
        let e = Expr::parse(&phi, &vars).unwrap();
        let map = InitialDataMap::from_exprs("gradient", vec![e.derivative(0), e.derivative(1)]);
        let u = [4.0 * p[0] - 2.0, 4.0 * p[1] - 2.0];
        if let Ok(rec) = vorticity(&map, t, &u) {
            let grad = build_matrix(&map, t, &u).unwrap().derivatives_from_inverse().unwrap();
            let scale = max_abs(&grad).max(1.0);
            prop_assert!(rec.components.iter().all(|w| w.abs() <= 1e-10 * scale), "{:?}", rec.components);
        }
    }

    #[test]
    fn frame_completeness_on_rank_deficient(entries in proptest::collection::vec(-1.0..1.0f64, 12), rank in 1usize..3) {
        // M = A Bᵀ with A, B of shape 3×rank
        let a = DMatrix::from_column_slice(3, rank, &entries[..3 * rank]);
        let b = DMatrix::from_column_slice(3, rank, &entries[6..6 + 3 * rank]);
        let m = &a * b.transpose();
        prop_assume!(m.norm() > 1e-3);
        let (r, l) = null_vectors(&m, TOL_NULL).unwrap();
        let frame = complementary_basis(&[0.0; 3], 0.0, r, l).unwrap();
        prop_assert!(frame.completeness_defect() <= 1e-12);
        prop_assert!(frame.null_residual(&m) <= 1e-10 * max_abs(&m));
    }
}

/// Times at which the round trip is exercised, as fractions of each map's
/// scale: `t_c` where a catastrophe exists, 1 otherwise.
fn round_trip_family(family: &MapFamily, t_c: f64, sampler: fn(&[f64]) -> Vec<f64>, p: &[f64]) -> Result<(), TestCaseError> {
    for frac in [0.0, 0.25, 0.5] {
        let t = frac * t_c;
        let u = sampler(p);
        let Some((b, map)) = family.branches.iter().enumerate().find(|(_, m)| m.contains(&u)) else {
            continue;
        };
        let x = map.forward(&u, t).unwrap();
        let s = if family.branches.len() == 1 {
            solve_point(map, &x, t, None)
        } else {
            solve_family(family, &x, t, None, Some(b))
        };
        let s = s.map_err(|e| TestCaseError::fail(format!("{} at {u:?}, t={t}: {e:?}", family.name)))?;
        prop_assert!(s.residual <= newton_tol(&x).max(1e-10));
        let err = s.u.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "{} at {u:?}, t={t}: got {:?}", family.name, s.u);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn newton_round_trip(p in unit3()) {
        // below t_c every characteristic is still the unique preimage
        let gauss: fn(&[f64]) -> Vec<f64> = |p| {
            let s = 0.05 + 0.9 * p[0];
            vec![s, s.powf(1.05 + 1.9 * p[1])]
        };
        round_trip_family(&builtins::gaussian(), builtins::reference::GAUSSIAN_T_C, gauss, &p)?;
        let rot = MapFamily::single(builtins::rotational(1.0));
        round_trip_family(&rot, 1.0, |p| vec![4.0 * p[0] - 2.0, 4.0 * p[1] - 2.0], &p)?;
        let lin = MapFamily::single(builtins::linear(3, 1.0));
        round_trip_family(&lin, 1.0, |p| p.iter().map(|v| 4.0 * v - 2.0).collect(), &p)?;
    }

    #[test]
    fn cubic_round_trip_from_nearby_seed(p in unit3()) {
        // no initial data, so the seed decides the preimage; below t_c every point is regular
        let map = builtins::cubic();
        let u = [6.0 * p[0] - 3.0, 6.0 * p[1] - 3.0];
        let a = std::f64::consts::TAU * p[2];
        let seed = [u[0] + 0.05 * a.cos(), u[1] + 0.05 * a.sin()];
        for frac in [0.0, 0.25, 0.5] {
            let t = frac * builtins::reference::CUBIC_T_C;
            let x = map.forward(&u, t).unwrap();
            let s = solve_point(&map, &x, t, Some(&seed)).unwrap();
            let err = s.u.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-8, "{u:?} t={t}: {:?}", s.u);
        }
    }
}

#[test]
fn frames_on_cubic_gamma_points() {
    let map = builtins::cubic();
    for i in 0..50 {
        let a = 0.1 + i as f64 * 0.12;
        let u = [2.5 * a.cos(), 2.5 * a.sin()];
        let Some(root) = branch_times(&map, &u).unwrap().roots.first().copied() else { continue };
        let frame = frame_at(&map, &u, root.t, TOL_NULL).unwrap();
        let m = build_matrix(&map, root.t, &u).unwrap();
        assert!(frame.null_residual(&m.entries) <= 1e-10 * m.norm());
        assert!(frame.completeness_defect() <= 1e-12);
        let again = frame_at(&map, &u, root.t, TOL_NULL).unwrap();
        assert_eq!(frame.stacked_p(), again.stacked_p());
        assert_eq!(frame.stacked_r(), again.stacked_r());
        let y = frame.displacement_to_y(&[0.3, -0.7]);
        let back = frame.y_to_displacement(&y);
        assert!((back[0] - 0.3).abs() < 1e-12 && (back[1] + 0.7).abs() < 1e-12);
    }
}
