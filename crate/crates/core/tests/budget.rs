mod common;

use molguide::budget::*;
use proptest::prelude::*;

fn q(v: f64, s: f64) -> Quantity {
    Quantity::new(v, s, "").unwrap()
}

#[test]
fn coupler_efficiency_examples() {
    assert_eq!(coupler_efficiency_from_throughput(&q(1.0, 0.0)).unwrap().value, 1.0);
    assert!((coupler_efficiency_from_throughput(&q(0.1225, 0.0)).unwrap().value - 0.35).abs() < 1e-12);
    // sigma_t chosen so that sigma_eta = 0.02 at eta = 0.25
    let e = coupler_efficiency_from_throughput(&q(0.0625, 0.01)).unwrap();
    assert!((e.value - 0.25).abs() < 1e-12);
    assert!((e.sigma - 0.02).abs() < 1e-12);
    assert!(coupler_efficiency_from_throughput(&q(-0.1, 0.0)).is_err());
}

#[test]
fn coupler_response_examples() {
    let m = CouplerModel::default();
    assert_eq!(coupler_response(&m, 785.0).unwrap(), 0.35);
    for l in [760.0, 810.0] {
        assert!((coupler_response(&m, l).unwrap() - 0.175).abs() < 1e-12);
    }
    let narrow = CouplerModel { bandwidth_fwhm: 0.0, ..m.clone() };
    assert!(coupler_response(&narrow, 785.0).is_err());
    assert!(coupler_response(&m, 0.0).is_err());
}

#[test]
fn propagation_examples() {
    assert_eq!(propagation_transmission(0.0, 4.9).unwrap(), 1.0);
    assert!((propagation_transmission(1.0, 4.9).unwrap() - 10f64.powf(-0.49)).abs() < 1e-15);
    assert!((propagation_transmission(1.0, 4.9).unwrap() - 0.3236).abs() < 1e-4);
    assert!((propagation_transmission(24e-4, 4.9).unwrap() - 0.99730).abs() < 1e-5);
    assert!(propagation_transmission(-1.0, 4.9).is_err());
}

#[test]
fn count_rate_beta_examples() {
    let b = EfficiencyBudget::reference_device();
    let beta = beta_from_count_rate(&b).unwrap();
    let direct = 38e3 * 2.0 * 4.2e-9 * 1.2 / 0.2 / (0.95 * 0.25 * 0.10 * 0.50);
    assert!((beta.value - direct).abs() < 1e-12 * direct);
    assert!((0.14..=0.19).contains(&beta.value));
    assert!((beta.value - 0.17).abs() < beta.sigma);
    let mut doubled = b.clone();
    doubled.eta_c.value *= 2.0;
    assert!((beta_from_count_rate(&doubled).unwrap().value - beta.value / 2.0).abs() < 1e-15);
    let mut dark = b.clone();
    dark.b.value = dark.s_c.value;
    assert_eq!(beta_from_count_rate(&dark).unwrap().value, 0.0);
    let mut no_pump = b;
    no_pump.s.value = 0.0;
    assert!(beta_from_count_rate(&no_pump).is_err());
}

#[test]
fn image_beta_examples() {
    let (ec, ef) = (q(0.25, 0.0), q(0.05, 0.0));
    assert_eq!(beta_from_images(&q(1.0, 0.0), &q(0.0, 0.0), &ec, &ef).unwrap().value, 1.0);
    assert!((beta_from_images(&q(0.25, 0.0), &q(0.05, 0.0), &ec, &ef).unwrap().value - 0.5).abs() < 1e-15);
    assert!((beta_from_images(&q(0.25, 0.0), &q(0.20, 0.0), &ec, &ef).unwrap().value - 0.2).abs() < 1e-15);
    assert!(beta_from_images(&q(1.0, 0.0), &q(1.0, 0.0), &q(0.0, 0.0), &ef).is_err());
}

#[test]
fn saturation_and_brightness_examples() {
    let s = saturation_on_chip_rate(&q(4.2, 0.0), &q(0.95, 0.0), &q(0.42, 0.0)).unwrap();
    assert!((s.value - 2.375e7).abs() < 1.0);
    assert_eq!(saturation_on_chip_rate(&q(4.2, 0.0), &q(0.95, 0.0), &q(0.0, 0.0)).unwrap().value, 0.0);
    let slow = saturation_on_chip_rate(&q(8.4, 0.0), &q(0.95, 0.0), &q(0.42, 0.0)).unwrap();
    assert!((slow.value - s.value / 2.0).abs() < 1e-6);
    let br = off_chip_brightness(&q(0.95, 0.0), &q(0.42, 0.0), &q(0.40, 0.0)).unwrap();
    assert!((br.value - 0.1596).abs() < 1e-12);
    assert_eq!(off_chip_brightness(&q(0.95, 0.0), &q(0.0, 0.0), &q(0.40, 0.0)).unwrap().value, 0.0);
    assert_eq!(off_chip_brightness(&q(1.0, 0.0), &q(1.0, 0.0), &q(1.0, 0.0)).unwrap().value, 1.0);
}

#[test]
fn detected_rate_examples() {
    let b = EfficiencyBudget::reference_device();
    let beta = beta_from_count_rate(&b).unwrap();
    let rate = expected_detected_rate(&b, &beta).unwrap();
    assert!((rate.value - 38e3).abs() < 1e-9 * 38e3);
    assert_eq!(expected_detected_rate(&b, &q(0.0, 0.0)).unwrap().value, 0.0);
    let mut strong = b.clone();
    strong.s.value = 1e12;
    let limit = 1.0 / (2.0 * 4.2e-9) * 0.95 * 0.25 * 0.10 * 0.50 * 0.3;
    assert!((expected_detected_rate(&strong, &q(0.3, 0.0)).unwrap().value - limit).abs() < 1e-9 * limit);
}

#[test]
fn json_round_trip() {
    let b = EfficiencyBudget::best_device();
    let text = b.to_json().unwrap();
    assert!(text.contains("\"QY\"") && text.contains("\"S_c\"") && text.contains("\"beta_meas\""));
    assert_eq!(EfficiencyBudget::from_json(&text).unwrap(), b);
    let bad = text.replace("0.4,", "1.4,");
    assert!(EfficiencyBudget::from_json(&bad).is_err());
}

#[test]
fn propagated_sigma_matches_monte_carlo() {
    let b = EfficiencyBudget::reference_device();
    let n = 100_000;
    let check = |name: &str, lin: f64, mc: f64| {
        assert!((lin - mc).abs() < 0.10 * mc, "{name}: linear {lin} vs MC {mc}");
    };
    let inputs = [
        (b.s_c.value, b.s_c.sigma),
        (b.b.value, b.b.sigma),
        (b.tau.value, b.tau.sigma),
        (b.s.value, b.s.sigma),
        (b.qy.value, b.qy.sigma),
        (b.eta_c.value, b.eta_c.sigma),
        (b.eta_opt.value, b.eta_opt.sigma),
        (b.eta_det.value, b.eta_det.sigma),
    ];
    let est = |x: &[f64]| (x[0] - x[1]) * 2.0 * x[2] * 1e-9 * (x[3] + 1.0) / x[3] / (x[4] * x[5] * x[6] * x[7]);
    check("beta_est", beta_from_count_rate(&b).unwrap().sigma, common::monte_carlo_sigma(est, &inputs, n, 1));

    let img = [(0.25, 0.0125), (0.20, 0.010), (0.25, 0.02), (0.05, 0.015)];
    let meas = |x: &[f64]| (x[0] / x[2]) / (x[0] / x[2] + x[1] / x[3]);
    let lin = beta_from_images(&q(0.25, 0.0125), &q(0.20, 0.010), &q(0.25, 0.02), &q(0.05, 0.015)).unwrap().sigma;
    check("beta_meas", lin, common::monte_carlo_sigma(meas, &img, n, 2));

    let t = q(0.0625, 0.01);
    let lin = coupler_efficiency_from_throughput(&t).unwrap().sigma;
    check("eta_c", lin, common::monte_carlo_sigma(|x| x[0].abs().sqrt(), &[(0.0625, 0.01)], n, 3));

    let sat = [(4.2, 0.4), (0.95, 0.095), (0.42, 0.02)];
    let lin = saturation_on_chip_rate(&q(4.2, 0.4), &q(0.95, 0.095), &q(0.42, 0.02)).unwrap().sigma;
    check("S_on_sat", lin, common::monte_carlo_sigma(|x| x[1] * x[2] / (4.0 * x[0] * 1e-9), &sat, n, 4));

    let br = [(0.95, 0.095), (0.42, 0.02), (0.40, 0.02)];
    let lin = off_chip_brightness(&q(0.95, 0.095), &q(0.42, 0.02), &q(0.40, 0.02)).unwrap().sigma;
    check("BR_off_sat", lin, common::monte_carlo_sigma(|x| x[0] * x[1] * x[2], &br, n, 5));

    let beta = q(0.17, 0.03);
    let mut fwd: Vec<(f64, f64)> = inputs[2..].to_vec();
    fwd.push((0.17, 0.03));
    let rate = |x: &[f64]| x[1] / (1.0 + x[1]) / (2.0 * x[0] * 1e-9) * x[2] * x[3] * x[4] * x[5] * x[6];
    check("detected", expected_detected_rate(&b, &beta).unwrap().sigma, common::monte_carlo_sigma(rate, &fwd, n, 6));
}

fn budget_strategy() -> impl Strategy<Value = EfficiencyBudget> {
    ((1.0f64..10.0, 0.05f64..5.0, 0.5f64..1.0), (0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0), (1e3f64..1e6, 0.0f64..0.9))
        .prop_map(|((tau, s, qy), (ec, eo, ed), (sc, bfrac))| {
            let mut b = EfficiencyBudget::reference_device();
            b.tau.value = tau;
            b.s.value = s;
            b.qy.value = qy;
            b.eta_c.value = ec;
            b.eta_opt.value = eo;
            b.eta_det.value = ed;
            b.s_c.value = sc;
            b.b.value = sc * bfrac;
            b
        })
}

proptest! {
    #[test]
    fn count_rate_round_trip(b in budget_strategy()) {
        let beta = beta_from_count_rate(&b).unwrap();
        let rate = expected_detected_rate(&b, &beta).unwrap();
        let net = b.s_c.value - b.b.value;
        prop_assert!((rate.value - net).abs() <= 1e-9 * net);
        let back = beta_from_count_rate(&EfficiencyBudget { s_c: Quantity::exact(rate.value + b.b.value, "Hz"), ..b.clone() }).unwrap();
        prop_assert!((back.value - beta.value).abs() <= 1e-9 * beta.value);
    }

    #[test]
    fn outputs_are_monotone(b in budget_strategy(), rel in 1e-4f64..1e-2) {
        let base = beta_from_count_rate(&b).unwrap().value;
        let bump = |f: &dyn Fn(&mut EfficiencyBudget)| {
            let mut c = b.clone();
            f(&mut c);
            beta_from_count_rate(&c).unwrap().value
        };
        prop_assert!(bump(&|c| c.s_c.value *= 1.0 + rel) > base);
        prop_assert!(bump(&|c| c.b.value += rel * c.s_c.value * 0.01) < base);
        prop_assert!(bump(&|c| c.tau.value *= 1.0 + rel) > base);
        prop_assert!(bump(&|c| c.s.value *= 1.0 + rel) < base);
        prop_assert!(bump(&|c| c.qy.value *= 1.0 - rel) > base);
        prop_assert!(bump(&|c| c.eta_c.value *= 1.0 - rel) > base);
        prop_assert!(bump(&|c| c.eta_opt.value *= 1.0 - rel) > base);
        prop_assert!(bump(&|c| c.eta_det.value *= 1.0 - rel) > base);

        let beta = q(0.3, 0.0);
        let r0 = expected_detected_rate(&b, &beta).unwrap().value;
        prop_assert!(expected_detected_rate(&b, &q(0.3 * (1.0 + rel), 0.0)).unwrap().value > r0);
        let mut c = b.clone();
        c.s.value *= 1.0 + rel;
        prop_assert!(expected_detected_rate(&c, &beta).unwrap().value > r0);

        let (tau, qy) = (q(b.tau.value, 0.0), q(b.qy.value, 0.0));
        let s0 = saturation_on_chip_rate(&tau, &qy, &beta).unwrap().value;
        prop_assert!(saturation_on_chip_rate(&q(b.tau.value * (1.0 + rel), 0.0), &qy, &beta).unwrap().value < s0);
        prop_assert!(saturation_on_chip_rate(&tau, &q(b.qy.value * (1.0 - rel), 0.0), &beta).unwrap().value < s0);

        let ec = q(b.eta_c.value, 0.0);
        let br = off_chip_brightness(&qy, &beta, &ec).unwrap().value;
        prop_assert!(off_chip_brightness(&qy, &beta, &q(b.eta_c.value * (1.0 - rel), 0.0)).unwrap().value < br);

        let (sc, sf, ef) = (q(0.3, 0.0), q(0.2, 0.0), q(0.05, 0.0));
        let m = beta_from_images(&sc, &sf, &ec, &ef).unwrap().value;
        prop_assert!(beta_from_images(&q(0.3 * (1.0 + rel), 0.0), &sf, &ec, &ef).unwrap().value > m);
        prop_assert!(beta_from_images(&sc, &q(0.2 * (1.0 + rel), 0.0), &ec, &ef).unwrap().value < m);
        prop_assert!(beta_from_images(&sc, &sf, &q(b.eta_c.value * (1.0 + rel), 0.0), &ef).unwrap().value < m);
        prop_assert!(beta_from_images(&sc, &sf, &ec, &q(0.05 * (1.0 + rel), 0.0)).unwrap().value > m);

        let t0 = coupler_efficiency_from_throughput(&q(0.5, 0.0)).unwrap().value;
        prop_assert!(coupler_efficiency_from_throughput(&q(0.5 * (1.0 + rel), 0.0)).unwrap().value > t0);
        prop_assert!(propagation_transmission(1.0 + rel, 4.9).unwrap() < propagation_transmission(1.0, 4.9).unwrap());
    }
}

#[test]
fn report_rows_and_note() {
    let r = budget_report(&EfficiencyBudget::reference_device(), &EfficiencyBudget::best_device()).unwrap();
    assert!((r.get(1, "p").unwrap().value - 0.7917).abs() < 1e-4);
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("table,symbol,description,kind,value,sigma,unit\n"));
    assert!(text.contains("# note: on-chip purity"));
    let mut no_ref = EfficiencyBudget::reference_device();
    no_ref.g2_on_reference = None;
    assert!(budget_report(&no_ref, &EfficiencyBudget::best_device()).unwrap().notes.is_empty());
}
