use std::f64::consts::PI;

use proptest::prelude::*;
use zgkn::fields::phi_kn;
use zgkn::geometry::{self, sheet_swap, Chart, Sheet, SpacetimePoint};

const A: f64 = 0.7;

/// BL points away from the ring and the axis.
fn bl_point() -> impl Strategy<Value = (f64, f64, f64)> {
    (-5.0..5.0f64, 0.05..PI - 0.05, 0.0..6.2f64)
        .prop_filter("off the ring", |&(r, t, _)| geometry::ring_distance(r, t, A) > 1e-3)
}

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))
}

proptest! {
    #[test]
    fn cylindrical_roundtrip_keeps_the_sheet((r, theta, phi) in bl_point()) {
        prop_assume!(r != 0.0);
        let (rc, z, _) = geometry::os_to_cyl(r, theta, phi, A);
        let (r2, t2) = geometry::cyl_to_os(rc, z, Sheet::of_r(r), A).unwrap();
        prop_assert!(close(r, r2, 1e-12) && close(theta, t2, 1e-12), "{r} {theta} -> {r2} {t2}");
    }

    #[test]
    fn cartesian_roundtrip((r, theta, phi) in bl_point()) {
        prop_assume!(r != 0.0);
        let b = geometry::from_cartesian(geometry::cartesian(r, theta, phi, A), Sheet::of_r(r), A).unwrap();
        prop_assert!(close(b.r, r, 1e-12) && close(b.theta, theta, 1e-12) && close(b.phi, phi, 1e-12));
    }

    #[test]
    fn peripolar_roundtrip((r, theta, phi) in bl_point()) {
        let (zeta, chi, _) = geometry::peripolar(r, theta, phi, A).unwrap();
        let (r2, t2) = geometry::peripolar_to_os(zeta, chi, A).unwrap();
        prop_assert!(close(r, r2, 1e-10) && close(theta, t2, 1e-10), "{r} {theta} -> {r2} {t2}");
    }

    #[test]
    fn sheet_swap_is_an_involution((r, theta, phi) in bl_point(), t in -3.0..3.0f64) {
        let p = SpacetimePoint::bl(t, r, theta, phi);
        let q = sheet_swap(&sheet_swap(&p, A).unwrap(), A).unwrap();
        let Chart::BoyerLindquist { r: r2, theta: t2, phi: p2 } = q.chart else { unreachable!() };
        prop_assert!(close(r, r2, 1e-15) && close(theta, t2, 1e-15) && p2 == phi && q.t == t);
    }

    #[test]
    fn sheet_swap_keeps_the_projected_point((r, theta, phi) in bl_point()) {
        let x = geometry::cartesian(r, theta, phi, A);
        let y = geometry::cartesian(-r, PI - theta, phi, A);
        for k in 0..3 {
            prop_assert!(close(x[k], y[k], 1e-14));
        }
    }

    #[test]
    fn ring_potential_is_odd_under_the_swap(xi in -6.0..6.0f64, eta in -1.0..1.0f64, q in -2.0..2.0f64) {
        prop_assume!(xi * xi + eta * eta > 1e-4);
        let u = phi_kn(xi, eta, q, A).unwrap();
        let v = phi_kn(-xi, -eta, q, A).unwrap();
        prop_assert!(close(u, -v, 1e-14));
    }

    #[test]
    fn ring_distance_vanishes_only_at_the_ring((r, theta, _) in bl_point()) {
        let d = geometry::ring_distance(r, theta, A);
        let (rc, z, _) = geometry::os_to_cyl(r, theta, 0.0, A);
        prop_assert!(d > 0.0);
        prop_assert!(close(d, (rc - A).hypot(z), 1e-10));
    }
}
