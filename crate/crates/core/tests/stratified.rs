use molguide::stratified::*;
use proptest::prelude::*;

fn stack_and_dipole() -> impl Strategy<Value = (LayerStack, DipoleSource)> {
    (
        1.0f64..2.5,
        1.0f64..2.5,
        prop::collection::vec((1.0f64..3.0, 20.0f64..400.0), 1..4),
        any::<prop::sample::Index>(),
        0.0f64..1.0,
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
    )
        .prop_filter_map("degenerate orientation", |(top, bottom, films, host, frac, (x, y, z))| {
            let norm = (x * x + y * y + z * z).sqrt();
            if norm < 1e-3 {
                return None;
            }
            let stack = LayerStack::from_parts(top, &films, bottom).ok()?;
            let layer = 1 + host.index(films.len());
            let depth = frac * films[layer - 1].1;
            let dipole = DipoleSource::new(785.0, layer, depth, [x / norm, y / norm, z / norm]).ok()?;
            Some((stack, dipole))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn channels_add_up_to_the_total((stack, dipole) in stack_and_dipole()) {
        let b = power_budget(&stack, &dipole, &RadiationConfig::default()).unwrap();
        let sum = b.up + b.down + b.trapped;
        prop_assert!(((sum - b.total) / b.total).abs() < 1e-3, "{:?} {:?} {:?}", stack, dipole, b);
        prop_assert!(b.up >= 0.0 && b.down >= 0.0 && b.trapped >= -1e-9);
    }
}

#[test]
fn uniform_medium_has_unit_rate() {
    for n in [1.0, 1.51, 1.8, 2.0] {
        let s = LayerStack::uniform(n, 300.0).unwrap();
        for o in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            let d = DipoleSource::new(785.0, 1, 120.0, o).unwrap();
            let r = relative_decay_rate(&s, &d, &RadiationConfig::default()).unwrap();
            assert!((r - 1.0).abs() < 1e-6, "n {n}: {r}");
        }
    }
}
