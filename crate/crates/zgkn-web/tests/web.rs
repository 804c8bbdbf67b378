use zgkn_web::{beat_path, levels, potential_slice};

#[test]
fn levels_are_increasing_and_in_the_gap() {
    let v = levels(0.2, -0.3, -0.5, -1, 3).unwrap();
    assert_eq!(v.len(), 3);
    assert!((v[0].energy - 0.954_031_139_85).abs() < 1e-9);
    assert!(v.windows(2).all(|w| w[0].energy < w[1].energy));
    assert!(v.iter().all(|l| l.energy.abs() < 1.0));
}

#[test]
fn potential_flips_sign_between_sheets() {
    let (nx, ny) = (21, 21);
    let up = potential_slice(1.0, 3.0, nx, ny, false).unwrap();
    let down = potential_slice(1.0, 3.0, nx, ny, true).unwrap();
    assert_eq!(up.len(), nx * ny);
    for (u, d) in up.iter().zip(&down) {
        assert!(u.is_nan() && d.is_nan() || (u + d).abs() <= 1e-14 * u.abs().max(1.0), "{u} {d}");
    }
    // Top-left pixel is the axis point z = 3, where r = z and φ = r/(r² + a²).
    assert!((up[0] - 0.3).abs() < 1e-14);
    assert!(potential_slice(0.0, 3.0, nx, ny, false).is_err());
}

#[test]
fn single_level_path_is_a_circle() {
    let xs = beat_path(0.2, -0.3, -0.5, -1, 0.0, 1.5, 0.8, 0.5, 40).unwrap();
    assert_eq!(xs.len(), 3 * 41);
    let rho: Vec<f64> = xs.chunks(3).map(|p| p[0].hypot(p[1])).collect();
    let z: Vec<f64> = xs.chunks(3).map(|p| p[2]).collect();
    assert!(rho.iter().all(|r| (r - rho[0]).abs() < 1e-6) && z.iter().all(|v| (v - z[0]).abs() < 1e-6));
    let beat = beat_path(0.2, -0.3, -0.5, -1, 0.5, 1.5, 0.8, 0.5, 40).unwrap();
    let moved = beat.chunks(3).map(|p| (p[0].hypot(p[1]) - rho[0]).abs()).fold(0.0, f64::max);
    assert!(moved > 1e-3, "{moved}");
}
