//! A corrupted log-gamma table must be caught by the constant criteria and
//! must not disturb the others.

use freelat::acceptance;
use freelat::stable::LogGamma;

fn corrupted(factor: f64) -> LogGamma {
    let mut c = *LogGamma::default().coefficients();
    c[1] *= factor;
    LogGamma::with_coefficients(c)
}

#[test]
fn corrupted_log_gamma_fails_constant_criteria() {
    let lg = corrupted(1.1);
    for id in 1..=4 {
        let r = acceptance::run_one(id, &lg).unwrap();
        println!("{}", r.line());
        assert!(!r.passed, "criterion {id} accepted a corrupted log-gamma");
    }
}

#[test]
fn corrupted_log_gamma_leaves_other_criteria_alone() {
    let lg = corrupted(1.1);
    for id in [5, 6, 7, 8, 9, 10, 12] {
        let r = acceptance::run_one(id, &lg).unwrap();
        println!("{}", r.line());
        assert!(
            r.passed,
            "criterion {id} depends on log-gamma: {}",
            r.detail
        );
    }
}

// The small-p limit has 1e-2 slack and does not see a 1% perturbation; the
// closed-form moments do.
#[test]
fn slight_corruption_fails_closed_form_moments() {
    let lg = corrupted(1.01);
    for id in [1, 2] {
        assert!(!acceptance::run_one(id, &lg).unwrap().passed);
    }
}

#[test]
fn every_criterion_is_listed_once() {
    let ids: Vec<u8> = acceptance::list().iter().map(|c| c.0).collect();
    assert_eq!(ids, (1..=12).collect::<Vec<_>>());
    assert!(acceptance::run_one(13, &LogGamma::default()).is_none());
}

#[test]
fn filter_selects_by_group() {
    let r = acceptance::run(&LogGamma::default(), Some("free-norm"));
    assert_eq!(r.iter().map(|c| c.id).collect::<Vec<_>>(), vec![8, 9]);
    assert!(r.iter().all(|c| c.passed));
}
