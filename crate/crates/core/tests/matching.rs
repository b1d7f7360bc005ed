mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rideshare_core::matching::{request_in_catalog, select_offer};
use rideshare_core::trips::{cloak_trip, enumerate_trips, PlannedTrip};

#[test]
fn catalog_lookup_matches_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xC0FFEE);
    let g = oracles::grid();
    let mut hits = 0;
    for _ in 0..2_000 {
        let interval = *[300u64, 900, 1_800].get(rng.gen_range(0..3)).unwrap();
        let n = rng.gen_range(2..=6);
        let route = oracles::route(&mut rng, &g, n);
        let catalog = enumerate_trips(&cloak_trip(&g, &PlannedTrip::new(route.clone()).unwrap(), interval).unwrap()).unwrap();
        let req = if rng.gen_bool(0.5) {
            oracles::near_request(&mut rng, &g, &route, interval)
        } else {
            oracles::request(&mut rng, &g, interval)
        };
        let expected = oracles::request_served(&g, &route, interval, &req);
        assert_eq!(request_in_catalog(&catalog, &req), expected);
        hits += expected as u32;
    }
    assert!(hits > 150, "instances should include matches, got {hits}");
}

#[test]
fn selection_matches_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xBEEF);
    let mut chosen = 0;
    for _ in 0..2_000 {
        let (offers, desired, prefs) = oracles::selection_instance(&mut rng);
        let got = select_offer(&offers, &desired, &prefs).map(|o| o.index);
        assert_eq!(got, oracles::select_oracle(&offers, &desired, &prefs));
        chosen += got.is_some() as u32;
    }
    assert!(chosen > 100, "instances should include feasible offers, got {chosen}");
}
