use scb_core::corruptions::{corrupt_dataset, CorruptionKind, CorruptionSpec, SeverityTable};
use scb_core::image::{Dataset, DeadLeaves, Image, Shape};
use scb_core::spectral::corruption_spectrum;

fn photos() -> Dataset {
    DeadLeaves::new(6, 48, 48, 21).generate().unwrap()
}

fn mean_mse(a: &Dataset, b: &Dataset) -> f64 {
    a.images().zip(b.images()).map(|(x, y)| x.mse(y).unwrap()).sum::<f64>() / a.len() as f64
}

#[test]
fn identity_is_exact() {
    let ds = photos();
    let (out, manifest) = corrupt_dataset(&ds, &CorruptionSpec::identity()).unwrap();
    assert_eq!(out.items(), ds.items());
    assert_eq!(manifest.items.len(), ds.len());
    let s = corruption_spectrum(&ds, &CorruptionSpec::identity()).unwrap();
    assert_eq!(s.max(), 0.0);
}

#[test]
fn deterministic_and_in_range() {
    let ds = photos();
    for kind in CorruptionKind::ALL {
        for sev in [1, 5] {
            let spec = CorruptionSpec::new(kind, sev, 17).unwrap();
            let (a, ma) = corrupt_dataset(&ds, &spec).unwrap();
            let (b, mb) = corrupt_dataset(&ds, &spec).unwrap();
            assert_eq!(a.digest(), b.digest(), "{kind} s{sev}");
            assert_eq!(ma, mb);
            for (x, y) in a.images().zip(ds.images()) {
                assert_eq!(x.shape(), y.shape());
                assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)), "{kind} s{sev} out of range");
            }
            if kind.is_stochastic() {
                let other = CorruptionSpec::new(kind, sev, 18).unwrap();
                assert_ne!(corrupt_dataset(&ds, &other).unwrap().0.digest(), a.digest(), "{kind} ignores seed");
            }
        }
    }
}

#[test]
fn items_draw_independent_noise() {
    let img = Image::filled(Shape::new(1, 16, 16), 0.5).unwrap();
    let ds = Dataset::new("flat", vec![("a".into(), img.clone()), ("b".into(), img)]).unwrap();
    let spec = CorruptionSpec::parse("gaussian_noise", 3, 0).unwrap();
    let (out, _) = corrupt_dataset(&ds, &spec).unwrap();
    assert_ne!(out.items()[0].1, out.items()[1].1);
}

#[test]
fn damage_grows_with_severity() {
    let ds = photos();
    let table = SeverityTable::default();
    for kind in CorruptionKind::ALL.into_iter().filter(|&k| k != CorruptionKind::Identity) {
        let mse: Vec<f64> = (1..=5)
            .map(|s| {
                let spec = CorruptionSpec::new(kind, s, 3).unwrap();
                let (out, _, _) = scb_core::corruptions::corrupt_dataset_counted(&ds, &spec, &table).unwrap();
                mean_mse(&ds, &out)
            })
            .collect();
        assert!(mse.windows(2).all(|w| w[1] > w[0]), "{kind}: {mse:?}");
    }
}

#[test]
fn unknown_names_and_severities_rejected() {
    assert!(CorruptionSpec::parse("frost", 1, 0).is_err());
    assert!(CorruptionSpec::parse("fog", 0, 0).is_err());
    assert!(CorruptionSpec::parse("fog", 6, 0).is_err());
}

#[test]
fn severity_table_overrides() {
    let default = SeverityTable::default();
    let text = serde_json::to_string(&default).unwrap();
    assert_eq!(SeverityTable::from_str(&text).unwrap(), default);
    assert!(SeverityTable::from_str("gaussian_noise = [0.1]").is_err());
}
