use bdris::circuits::BinaryConfig;
use bdris_web::Scenario;

#[test]
fn routes_agree_for_every_layout() {
    for layout in ["pi", "t", "dris"] {
        let s = Scenario::new(3, 0.1, layout).unwrap();
        for i in [0u64, 5, 37] {
            let bits = BinaryConfig::from_index(i % (1 << s.n_c()), s.n_c()).as_u8();
            let v = s.channel(&bits).unwrap();
            assert!(v.route_rel_diff <= 1e-10, "{layout}: {}", v.route_rel_diff);
            assert!((v.rssi - v.amplitude * v.amplitude).abs() <= 1e-15);
        }
    }
    assert!(Scenario::new(3, 0.1, "star").is_err());
}

#[test]
fn landscape_is_a_density_with_consistent_optima() {
    let s = Scenario::new(11, 0.1, "pi").unwrap();
    let l = s.landscape(40, 0).unwrap();
    assert_eq!((l.edges.len(), l.density.len()), (41, 40));
    let mass: f64 = l.density.iter().zip(l.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(l.ascent_rssi <= l.exhaustive_rssi * (1.0 + 1e-12));
    assert!((l.exhaustive_rssi - l.edges[40]).abs() <= 1e-12 * l.exhaustive_rssi);
    let at_opt = s.channel(&l.exhaustive_bits).unwrap().rssi;
    assert!((at_opt - l.exhaustive_rssi).abs() <= 1e-12 * at_opt);
}

#[test]
fn truncation_error_vanishes_under_its_bound() {
    let s = Scenario::new(2, 0.05, "t").unwrap();
    let bits = vec![1, 0, 1, 1, 0, 0, 1, 0, 1];
    let tr = s.truncation(&bits, 200).unwrap();
    assert!(tr.loop_gain < 1.0);
    assert_eq!(tr.errors.len(), 201);
    for (e, b) in tr.errors.iter().zip(&tr.bound) {
        assert!(*e <= b * (1.0 + 1e-9) + 1e-15);
    }
    assert!(tr.errors[200] < 1e-8 * tr.errors[0].max(1e-300) || tr.errors[200] < 1e-12);
    assert!(s.truncation(&bits[..4], 3).is_err());
}

#[test]
fn dris_layout_has_one_load_per_element() {
    assert_eq!(Scenario::new(0, 0.1, "dris").unwrap().n_c(), 6);
    assert_eq!(Scenario::new(0, 0.1, "pi").unwrap().n_c(), 9);
}
