use gqf::{descend_json, diagonal_json, lift_json, predict_json, s_sum_value};

#[test]
fn roundtrip_and_sums() {
    let f = diagonal_json("Qsqrt:2", &["1".into(), "1".into()], &["1".into()], 1).unwrap();
    let sys = descend_json("Qsqrt:2", &f, None).unwrap();
    assert_eq!(lift_json("Qsqrt:2", &sys).unwrap(), f);
    let m = ["0".to_string(), "0".to_string()];
    let s = s_sum_value("Qsqrt:2", &f, &["3".into()], "0", &m, false).unwrap();
    let t = s_sum_value("Qsqrt:2", &f, &["3".into()], "0", &m, true).unwrap();
    assert!((s - t).norm() < 1e-6 * s.norm().max(1.0));
    assert!(descend_json("Qsqrt:2", "{\"n\": 1}", None).is_err());
}

#[test]
fn obstruction_reaches_python_layer() {
    let f = diagonal_json("Qsqrt:2", &vec!["3".to_string(); 5], &["3".into()], 1).unwrap();
    let rep: serde_json::Value = serde_json::from_str(&predict_json("Qsqrt:2", &f, "1", 8.0, 5, 3, 20_000, 1).unwrap()).unwrap();
    assert_eq!(rep["obstructed"], true);
}
