//! Acceptance suite: one test per criterion, each printing a pass line and
//! holding its stated tolerance and runtime budget.
//!
//! Run with `cargo test -p billiard-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::f64::consts::TAU;
use std::process::Command;
use std::time::Instant;

use billiard_core::fitting::{self, Termination};
use billiard_core::geometry::{DeformationFn, DeformedCurve, EllipseSpec, Vec2};
use billiard_core::orbits::{self, ChainSystem};
use billiard_core::rigidity;

fn three_ellipses() -> Vec<EllipseSpec> {
    vec![
        EllipseSpec::axis_aligned(1.0, 1.0).unwrap(),
        EllipseSpec::axis_aligned(2.0, 1.0).unwrap(),
        EllipseSpec::axis_aligned(3.0, 0.5).unwrap(),
    ]
}

fn scaling_shapes(period: f64) -> Vec<DeformationFn> {
    vec![
        DeformationFn::harmonic(period, 3, 1.0, 0.0).unwrap(),
        DeformationFn::new(period, 0.0, vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.0, 0.5])
            .unwrap(),
    ]
}

const EPS_GRID: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];

fn budget(name: &str, started: Instant, limit_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < limit_s,
        "{name}: runtime {elapsed:.2}s exceeds the {limit_s}s budget"
    );
}

#[test]
fn acceptance_01_elliptic_action_closed_form() {
    let started = Instant::now();
    for e in three_ellipses() {
        let curve = DeformedCurve::ellipse(e);
        let a3 = e.normalized_area().powi(3);
        for q in 3..=12usize {
            let orbit = orbits::find_periodic_orbit(&curve, q, 0.0).unwrap();
            let closed_form = a3 * q as f64 * (TAU / q as f64).sin();
            let rel = ((orbit.action - closed_form) / closed_form).abs();
            assert!(rel <= 1e-9, "(a,b)=({},{}), q={q}: rel error {rel}", e.a, e.b);

            // independent oracle: twice the shoelace area of the polygon
            let pts: Vec<Vec2> = orbit.params.iter().map(|&t| curve.point(t)).collect();
            let mut shoelace = 0.0;
            for j in 0..pts.len() {
                let k = (j + 1) % pts.len();
                shoelace += pts[j].x * pts[k].y - pts[k].x * pts[j].y;
            }
            let rel2 = ((orbit.action - shoelace) / shoelace).abs();
            assert!(rel2 <= 1e-10, "shoelace mismatch {rel2} at q={q}");
        }
    }
    budget("criterion 1", started, 5.0);
    println!("PASS criterion 1: elliptic action matches A^3 q sin(2pi/q) and the shoelace oracle");
}

#[test]
fn acceptance_02_rational_integrability_of_ellipses() {
    let started = Instant::now();
    for e in three_ellipses() {
        let curve = DeformedCurve::ellipse(e);
        let aa = e.normalized_area();
        for q in 3..=12usize {
            let report = rigidity::integrability_witness(&curve, q, 64, 1e-9 * aa * aa);
            assert!(
                report.pass,
                "(a,b)=({},{}), q={q}: max closing residual {}",
                e.a, e.b, report.max_closing_residual
            );
            assert!(
                report.action_spread <= 1e-9 * aa.powi(3),
                "(a,b)=({},{}), q={q}: action spread {}",
                e.a, e.b, report.action_spread
            );
        }
    }
    budget("criterion 2", started, 30.0);
    println!("PASS criterion 2: ellipses are rationally integrable on the 64-point anchor grid");
}

#[test]
fn acceptance_03_jacobian_matches_finite_differences() {
    let started = Instant::now();
    let base = EllipseSpec::unit_circle();
    let n = DeformationFn::new(
        base.period(),
        0.001,
        vec![0.0, 0.003, 0.002, 0.0, 0.001],
        vec![0.002, 0.0, 0.001],
    )
    .unwrap();
    let curve = DeformedCurve::new(base, n).unwrap();
    let period = curve.period();

    // deterministic linear congruential stream for the perturbations
    let mut state = 0x2545f4914f6cdd1du64;
    let mut unit = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };

    let mut checked = 0usize;
    'outer: for q in 3..=12usize {
        for _ in 0..10 {
            let t0 = unit() * period;
            let mut sys = ChainSystem::equidistributed(&curve, q, t0).unwrap();
            for t in &mut sys.t {
                *t += (unit() - 0.5) * 0.2 * period / q as f64;
            }
            let jac = orbits::chain_jacobian(&sys).to_dense();
            let h = 1e-5;
            let m = q - 1;
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for k in 0..m {
                let mut plus = sys.clone();
                plus.t[k] += h;
                let mut minus = sys.clone();
                minus.t[k] -= h;
                let fp = orbits::chain_residual(&plus);
                let fm = orbits::chain_residual(&minus);
                for j in 0..m {
                    let fd = (fp[j] - fm[j]) / (2.0 * h);
                    err = err.max((fd - jac[(j, k)]).abs());
                    scale = scale.max(jac[(j, k)].abs());
                }
            }
            assert!(err <= 1e-6 * scale, "q={q}: normwise error {err} vs scale {scale}");
            checked += 1;
            if checked == 100 {
                break 'outer;
            }
        }
    }
    assert_eq!(checked, 100);
    budget("criterion 3", started, 10.0);
    println!("PASS criterion 3: closed-form tridiagonal Jacobian matches finite differences at 100 configurations");
}

#[test]
fn acceptance_04_quadratic_action_law() {
    let started = Instant::now();
    let base = EllipseSpec::unit_circle();
    for (si, shape) in scaling_shapes(base.period()).iter().enumerate() {
        for q in [3usize, 4, 5, 7] {
            let report = rigidity::scaling_study_fn(
                &format!("action[shape={si},q={q}]"),
                &EPS_GRID,
                |eps| rigidity::action_deviation(&base, shape, eps, q),
            )
            .unwrap();
            assert!(
                (1.8..=2.2).contains(&report.slope),
                "shape {si}, q={q}: slope {}",
                report.slope
            );
        }
    }
    budget("criterion 4", started, 60.0);
    println!("PASS criterion 4: action deviation scales quadratically (slope within [1.8, 2.2])");
}

#[test]
fn acceptance_05_linear_equidistribution_law() {
    let started = Instant::now();
    let base = EllipseSpec::unit_circle();
    // generic anchor: symmetric anchors lock resonant harmonics exactly
    let t0 = 0.37;
    for (si, shape) in scaling_shapes(base.period()).iter().enumerate() {
        for q in [3usize, 4, 5, 7] {
            let report = rigidity::scaling_study_fn(
                &format!("equidistribution[shape={si},q={q}]"),
                &EPS_GRID,
                |eps| rigidity::equidistribution_deviation(&base, shape, eps, q, t0),
            )
            .unwrap();
            assert!(
                (0.85..=1.15).contains(&report.slope),
                "shape {si}, q={q}: slope {}",
                report.slope
            );
        }
    }
    budget("criterion 5", started, 60.0);
    println!("PASS criterion 5: chain deviation from equidistribution scales linearly (slope within [0.85, 1.15])");
}

#[test]
fn acceptance_06_sine_sum_cancellation() {
    let started = Instant::now();
    let base = EllipseSpec::unit_circle();
    for (si, shape) in scaling_shapes(base.period()).iter().enumerate() {
        for q in [3usize, 4, 5, 7] {
            let values: Vec<f64> = EPS_GRID
                .iter()
                .map(|&eps| {
                    let curve = DeformedCurve::new(base, shape.scaled(eps)).unwrap();
                    let orbit = orbits::find_periodic_orbit(&curve, q, 0.0).unwrap();
                    rigidity::sine_sum_deviation(&curve, &orbit)
                })
                .collect();
            if values.iter().all(|v| *v <= 1e-13) {
                // a deformation harmonic divisible by q locks every orbit to
                // the equidistributed configuration: the cancellation is exact
                println!("  criterion 6: shape {si}, q={q} cancels exactly");
                continue;
            }
            let report =
                rigidity::scaling_study(&format!("sine[shape={si},q={q}]"), &EPS_GRID, &values)
                    .unwrap();
            assert!(
                (1.75..=2.25).contains(&report.slope),
                "shape {si}, q={q}: slope {}",
                report.slope
            );
        }
    }
    budget("criterion 6", started, 60.0);
    println!("PASS criterion 6: sine sums deviate quadratically (slope within [1.75, 2.25])");
}

#[test]
fn acceptance_07_fourier_suppression_proxy() {
    let started = Instant::now();
    let base = EllipseSpec::unit_circle();
    let family = |d: f64| EllipseSpec::axis_aligned(1.0 + d, 1.0 / (1.0 + d)).unwrap();
    let report = rigidity::fourier_suppression_study(&base, family, &EPS_GRID, 3, 8).unwrap();
    assert!(
        (0.85..=1.15).contains(&report.norm_fit.slope),
        "norm slope {}",
        report.norm_fit.slope
    );
    assert!(
        (1.8..=2.2).contains(&report.high_k_fit.slope),
        "high-harmonic slope {}",
        report.high_k_fit.slope
    );
    budget("criterion 7", started, 30.0);
    println!(
        "PASS criterion 7: nearby-ellipse deformations have linear norm ({:.3}) and quadratically suppressed high harmonics ({:.3})",
        report.norm_fit.slope, report.high_k_fit.slope
    );
}

#[test]
fn acceptance_08_smooth_decay() {
    let started = Instant::now();
    // smooth, non-band-limited over the tested range: 1/k² coefficients
    let cos: Vec<f64> = (1..=64).map(|k| 0.04 / (k * k) as f64).collect();
    let sin: Vec<f64> = (1..=64).map(|k| 0.03 / (k * k) as f64).collect();
    let n = DeformationFn::new(TAU, 0.0, cos, sin).unwrap();
    let report = rigidity::smooth_decay_check(&n, 3, 64);
    assert!(report.c_max > 0.0 && report.c_max.is_finite());
    // integration by parts bounds |∫ n e^{iqt/A}| |q| / (A² ‖n‖_C1) by 2π
    assert!(
        report.c_max <= TAU,
        "decay ratio {} escapes the 2π bound",
        report.c_max
    );
    budget("criterion 8", started, 5.0);
    println!(
        "PASS criterion 8: Fourier integrals decay like 1/q with constant {:.4} <= 2π",
        report.c_max
    );
}

#[test]
fn acceptance_09_symmetric_difference() {
    let started = Instant::now();
    let circle = EllipseSpec::unit_circle();
    let uniform = DeformationFn::constant(circle.period(), 0.1).unwrap();
    let d = rigidity::symmetric_difference(&circle, &uniform).unwrap();
    assert!(
        (d - 0.21 * std::f64::consts::PI).abs() <= 1e-10,
        "formula value {d}"
    );

    // 50 random band-limited deformations against the 2πA³ ‖n‖(1+‖n‖) bound
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut unit = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let aa = circle.normalized_area();
    for _ in 0..50 {
        let amp = 0.005 + 0.025 * unit();
        let cos: Vec<f64> = (0..8).map(|_| amp * (2.0 * unit() - 1.0)).collect();
        let sin: Vec<f64> = (0..8).map(|_| amp * (2.0 * unit() - 1.0)).collect();
        let n = DeformationFn::new(TAU, amp * (2.0 * unit() - 1.0), cos, sin).unwrap();
        let d = rigidity::symmetric_difference(&circle, &n).unwrap();
        let c1 = n.c1_norm();
        assert!(
            d <= TAU * aa.powi(3) * c1 * (1.0 + c1),
            "bound violated: d = {d}, c1 = {c1}"
        );
    }
    budget("criterion 9", started, 5.0);
    println!("PASS criterion 9: symmetric difference matches the annulus closed form and the 2πA³ bound");
}

#[test]
fn acceptance_10_closest_ellipse_rigidity_probe() {
    let started = Instant::now();
    let base = EllipseSpec::unit_circle();

    // calibrate an exact-ellipse domain so the re-expressed norm is 0.05
    let norm_of = |d: f64| {
        let domain = EllipseSpec::new(Vec2::new(0.1 * d, -0.05 * d), 1.0 + d, 1.0 / (1.0 + d), 0.3)
            .unwrap();
        let n = fitting::reexpress(&DeformedCurve::ellipse(domain), &base).unwrap();
        (domain, n)
    };
    let mut d = 0.0167;
    for _ in 0..8 {
        let (_, n) = norm_of(d);
        let c1 = n.c1_norm();
        if (c1 - 0.05).abs() <= 2e-4 {
            break;
        }
        d *= 0.05 / c1;
    }
    let (_, n) = norm_of(d);
    let c1 = n.c1_norm();
    assert!((c1 - 0.05).abs() <= 1e-3, "calibrated norm {c1}");

    let omega = DeformedCurve::new(base, n).unwrap();
    let trace = fitting::closest_ellipse(&omega, 10, 1e-8).unwrap();
    assert_eq!(trace.reason, Termination::Converged, "did not converge");
    assert!(trace.final_norm() <= 1e-8, "final norm {}", trace.final_norm());
    assert!(trace.steps.len() - 1 <= 10);
    for w in trace.steps.windows(2) {
        if w[0].c1_norm > 1e-8 {
            assert!(
                w[1].c1_norm <= 0.5 * w[0].c1_norm,
                "contraction below 2: {} -> {}",
                w[0].c1_norm,
                w[1].c1_norm
            );
        }
    }

    // genuinely non-elliptic domain: the iteration must report a remainder
    let bump = DeformationFn::harmonic(TAU, 7, 0.01, 0.0).unwrap();
    let omega = DeformedCurve::new(base, bump).unwrap();
    let trace = fitting::closest_ellipse(&omega, 25, 1e-10).unwrap();
    assert_eq!(trace.reason, Termination::NoImprovement);
    assert!(
        trace.final_norm() >= 5e-3,
        "terminal norm {} below the non-elliptic floor",
        trace.final_norm()
    );
    budget("criterion 10", started, 60.0);
    println!("PASS criterion 10: closest-ellipse contracts >= 2x per step on ellipses and stalls on a 7th-harmonic bump");
}

#[test]
fn acceptance_11_determinism_of_verify() {
    let started = Instant::now();
    let bin = env!("CARGO_BIN_EXE_billiard-lab");
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = Command::new(bin)
            .args(["verify", "action-quadratic", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "verify action-quadratic failed");
    }
    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    budget("criterion 11", started, 120.0);
    println!("PASS criterion 11: repeated verify runs produce byte-identical outputs ({} files)", names.len());
}
