use num_rational::Rational64;
use opinion::dynamics::random_start;
use opinion::landscape::Landscape;
use opinion::paths::{regression_grid, sigma_a_family};
use opinion::recurrence::{Recurrence, RecurrenceClass};
use opinion::{Energy, ModelError, ModelSpec, Regime, SpinConfiguration};
use std::sync::Arc;

fn one_per_regime() -> Vec<Arc<ModelSpec>> {
    regression_grid(1).into_iter().map(Arc::new).collect()
}

#[test]
fn single_reductions_respect_the_budget_in_every_regime() {
    let specs = one_per_regime();
    assert_eq!(specs.len(), 6);
    for spec in specs {
        let rec = Recurrence::new(&spec).unwrap();
        for i in 0..10_000 {
            let c = random_start(&spec, 41, i);
            if rec.classify(&c) == RecurrenceClass::StableOrMeta {
                continue;
            }
            let cert = rec
                .reduce(&c)
                .unwrap_or_else(|e| panic!("{spec}: start {i}: {e}"));
            assert!(cert.max_climb <= rec.budget());
            assert!(cert.end().energy() < c.energy());
            assert!(cert.path.is_valid());
        }
    }
}

#[test]
fn descent_reaches_the_families_below_the_critical_value() {
    for spec in one_per_regime() {
        let regime = spec.classify_regime();
        if !matches!(
            regime,
            Regime::LowAlpha | Regime::CriticalEqual | Regime::CriticalStrict
        ) {
            continue;
        }
        let rec = Recurrence::new(&spec).unwrap();
        for i in 0..300 {
            let certs = rec.descend(&random_start(&spec, 43, i)).unwrap();
            assert!(certs.len() <= spec.num_sites());
            assert!(rec.is_special(
                certs
                    .last()
                    .map_or(&random_start(&spec, 43, i), |c| c.end())
            ));
        }
    }
}

/// Above `m + 1` the stable-family states `σ_A(ℓ, p)` are neither stable nor
/// metastable, yet every way out of them climbs more than `2(α - 1)`.
#[test]
fn descent_stalls_only_in_the_stable_family_above_the_critical_value() {
    for spec in one_per_regime() {
        if !matches!(
            spec.classify_regime(),
            Regime::MidAlpha | Regime::HighAlpha | Regime::VeryHighAlpha
        ) {
            continue;
        }
        let rec = Recurrence::new(&spec).unwrap();
        let family = sigma_a_family(&spec);
        for i in 0..4 {
            let mut cur = random_start(&spec, 47, i);
            let mut rounds = 0;
            while !rec.is_special(&cur) {
                match rec.reduce(&cur) {
                    Ok(cert) => cur = cert.end().clone(),
                    Err(ModelError::Falsified(_)) => {
                        assert!(
                            family.iter().any(|s| s.words() == cur.words()),
                            "{spec}: stalled outside the family"
                        );
                        break;
                    }
                    Err(e) => panic!("{e}"),
                }
                rounds += 1;
                assert!(rounds <= spec.num_sites());
            }
        }
    }
}

#[test]
fn certificates_bound_brute_force_stability_levels_on_the_toy() {
    let spec = Arc::new(ModelSpec::relaxed(4, 1, 1, 1, Rational64::from_integer(2)).unwrap());
    let land = Landscape::enumerate(&spec).unwrap();
    let levels = land.stability_levels();
    let rec_budget = Energy::from_integer(2);
    let special: Vec<SpinConfiguration> = (0..land.len())
        .filter(|&v| levels[v].is_none_or(|l| l > rec_budget))
        .map(|v| land.config(v))
        .collect();
    let rec = Recurrence::with_special(&spec, special);
    let (mut tight, mut total) = (0, 0);
    for v in 0..land.len() {
        let c = land.config(v);
        if rec.is_special(&c) || rec.classify(&c) == RecurrenceClass::StableOrMeta {
            continue;
        }
        let cert = rec.reduce(&c).unwrap();
        let level = levels[v].unwrap();
        assert!(
            level <= cert.max_climb,
            "certificate below the exact stability level"
        );
        assert!(cert.max_climb <= rec_budget);
        total += 1;
        if cert.max_climb == level {
            tight += 1;
        }
    }
    println!("toy certificates matching the exact stability level: {tight}/{total}");
    assert!(total > 0);
}
