mod common;

use lte_core::data::ObservabilityMode;
use lte_core::eif::DiscreteLaw;
use lte_core::nuisance::{fit_nuisances, NuisanceSpec};
use lte_core::positivity_report;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn known_randomization_reports_half_and_no_violations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (law, counts) = common::random_law(&mut rng, &[2, 2], 8);
    let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
    let spec = NuisanceSpec { known_randomization: Some(0.5), ..NuisanceSpec::saturated() };
    let ns = fit_nuisances(&table, &spec, 1).unwrap();
    let r = positivity_report(&table, &ns, 0.01).unwrap();
    assert_eq!(r.treatment_min, 0.5);
    assert_eq!(r.treatment_max, 0.5);
    assert!(r.ok(), "{:?}", r.flagged);
    assert_eq!(r.clamped, 0);
    assert_eq!(r.w1.n, table.source_counts().0);
}

#[test]
fn zero_threshold_never_flags() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (law, counts) = common::random_law(&mut rng, &[3], 6);
    let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
    let ns = fit_nuisances(&table, &NuisanceSpec::saturated(), 1).unwrap();
    let r = positivity_report(&table, &ns, 0.0).unwrap();
    assert_eq!(r.violations, 0);
    assert!(r.flagged.is_empty());
}

#[test]
fn stratum_missing_from_trial_is_flagged() {
    // Pattern L1=1 has target mass only.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, mut counts) = common::random_law(&mut rng, &[2], 6);
    let patterns = 2;
    for (i, c) in counts.iter_mut().enumerate() {
        let s = i / (patterns * 8);
        let l = (i / 8) % patterns;
        if s == 1 && l == 1 {
            *c = 0;
        }
    }
    let law = DiscreteLaw::from_counts(vec![2], 2, 2, vec![0.0, 1.0], &counts).unwrap();
    let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
    let ns = fit_nuisances(&table, &NuisanceSpec::saturated(), 1).unwrap();
    let r = positivity_report(&table, &ns, 0.01).unwrap();
    assert!(!r.ok());
    let f = r.flagged.iter().find(|f| f.pattern == "L1=1").expect("L1=1 flagged");
    assert!(f.reasons.iter().any(|x| x.contains("trial membership")), "{:?}", f.reasons);
    assert!(r.flagged.iter().all(|f| f.pattern != "L1=0"));
    assert!(r.clamped > 0);
}
