use qcol_wasm::{entropy_curve, sp_complexity, walkcol_trace, MAX_N};

#[test]
fn entropy_rows_follow_the_closed_form_below_condensation() {
    let rows = entropy_curve(3, 2000, 3.0, 4, 1).unwrap();
    assert_eq!(rows.len(), 16);
    for r in rows.chunks_exact(4) {
        assert_eq!(r[3], 1.0, "BP did not converge at c={}", r[0]);
        assert!((r[1] - r[2]).abs() < 0.02 * r[2].abs().max(0.1), "{r:?}");
    }
    assert_eq!(rows[0], 0.0);
    assert!((rows[1] - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn walkcol_trace_ends_solved_on_easy_graphs() {
    let rows = walkcol_trace(3, 1000, 2.0, 0.05, 1000, 3).unwrap();
    assert!(rows.len() >= 4 && rows.len() % 2 == 0);
    assert_eq!(*rows.last().unwrap(), 0.0);
    assert!(rows.chunks_exact(2).all(|r| (0.0..=1.0).contains(&r[1])));
    assert_eq!(rows, walkcol_trace(3, 1000, 2.0, 0.05, 1000, 3).unwrap());
}

#[test]
fn sp_is_trivial_at_low_connectivity() {
    let rows = sp_complexity(3, 1000, 1.0, 2.0, 2, 5).unwrap();
    for r in rows.chunks_exact(4) {
        assert_eq!(r[2], 1.0, "{r:?}");
        assert!(r[1].abs() < 1e-6);
    }
}

#[test]
fn oversized_requests_are_refused() {
    assert!(entropy_curve(3, MAX_N + 1, 1.0, 2, 0).is_err());
    assert!(walkcol_trace(1, 100, 1.0, 0.05, 10, 0).is_err());
    assert!(sp_complexity(11, 100, 1.0, 2.0, 2, 0).is_err());
}
