//! Acceptance suite: every release criterion, one test each, printing one
//! pass/fail line per criterion. The end-to-end artifacts are computed once
//! and shared by the two criteria that read them.
//!
//! Budget note: the end-to-end leave-one-out run trains twelve folds on a
//! desk-scale CPU and takes tens of minutes; the rest finishes in seconds
//! to a few minutes each.

use std::sync::OnceLock;
use std::time::Instant;

use blinklight_core::verify::{
    check_blink_recovery, check_convolution_oracle, check_determinism, check_e2e_loocv,
    check_event_aligned_shape, check_gradient_correctness, check_highlight_rule,
    check_overfit_sanity, check_surrogate_calibration, run_e2e, CheckOutcome, E2eArtifacts,
    E2eConfig,
};

fn assert_check(c: &CheckOutcome, max_seconds: f64) {
    println!("{}", c.line());
    assert!(c.pass, "{}", c.line());
    assert!(
        c.seconds < max_seconds,
        "{} exceeded its runtime budget ({:.1} s > {max_seconds} s)",
        c.name,
        c.seconds
    );
}

#[test]
fn criterion_1_gradient_correctness() {
    assert_check(&check_gradient_correctness(), 60.0);
}

#[test]
fn criterion_2_convolution_oracle() {
    assert_check(&check_convolution_oracle(), 60.0);
}

#[test]
fn criterion_3_overfit_sanity() {
    assert_check(&check_overfit_sanity(), 300.0);
}

#[test]
fn criterion_4_surrogate_calibration() {
    assert_check(&check_surrogate_calibration(), 600.0);
}

static E2E: OnceLock<(E2eArtifacts, f64)> = OnceLock::new();

fn e2e() -> &'static (E2eArtifacts, f64) {
    E2E.get_or_init(|| {
        let started = Instant::now();
        let artifacts = run_e2e(&E2eConfig::default()).expect("end-to-end pipeline runs");
        (artifacts, started.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_5_end_to_end_loocv() {
    let (artifacts, seconds) = e2e();
    let started = Instant::now();
    let mut c = check_e2e_loocv(artifacts, started);
    c.seconds = *seconds;
    assert_check(&c, 3600.0);
}

#[test]
fn criterion_6_event_aligned_shape() {
    let (artifacts, _) = e2e();
    assert_check(&check_event_aligned_shape(artifacts, Instant::now()), 3600.0);
}

#[test]
fn criterion_7_highlight_rule() {
    assert_check(&check_highlight_rule(), 60.0);
}

#[test]
fn criterion_8_blink_recovery() {
    assert_check(&check_blink_recovery(), 300.0);
}

#[test]
fn criterion_9_determinism() {
    assert_check(&check_determinism(), 900.0);
}
