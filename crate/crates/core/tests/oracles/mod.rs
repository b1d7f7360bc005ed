//! Brute-force reference implementations and random instance generators
//! shared by the matching and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use rideshare_core::ledger::Address;
use rideshare_core::matching::{MatchPreferences, RideOffer, Weights};
use rideshare_core::trips::{cloak_point, cloak_time, DesiredTrip, GeoPoint, Grid, RideRequest, Waypoint};

pub fn grid() -> Grid {
    Grid::new(36.10, 36.13, -86.82, -86.78, 3, 3).unwrap()
}

pub fn point<R: Rng>(rng: &mut R, g: &Grid) -> GeoPoint {
    GeoPoint { lat: rng.gen_range(g.min_lat..=g.max_lat), lon: rng.gen_range(g.min_lon..=g.max_lon) }
}

/// Route with strictly increasing times.
pub fn route<R: Rng>(rng: &mut R, g: &Grid, n: usize) -> Vec<Waypoint> {
    let mut t = rng.gen_range(0..3_000);
    (0..n)
        .map(|_| {
            t += rng.gen_range(1..1_200);
            Waypoint { point: point(rng, g), time: t }
        })
        .collect()
}

pub fn request<R: Rng>(rng: &mut R, g: &Grid, interval: u64) -> RideRequest {
    RideRequest {
        origin: cloak_point(g, &point(rng, g)).unwrap(),
        window: cloak_time(rng.gen_range(0..8_000), interval),
        destination: cloak_point(g, &point(rng, g)).unwrap(),
        deadline: 0,
        max_offers: None,
    }
}

/// Request built from two waypoints of `route` (order and time jittered),
/// so roughly half the draws should be served.
pub fn near_request<R: Rng>(rng: &mut R, g: &Grid, route: &[Waypoint], interval: u64) -> RideRequest {
    let a = rng.gen_range(0..route.len());
    let b = rng.gen_range(0..route.len());
    let t = route[a].time as i64 + rng.gen_range(-(interval as i64)..=interval as i64);
    RideRequest {
        origin: cloak_point(g, &route[a].point).unwrap(),
        window: cloak_time(t.max(0) as u64, interval),
        destination: cloak_point(g, &route[b].point).unwrap(),
        deadline: 0,
        max_offers: None,
    }
}

/// Does some pair j < k of raw waypoints serve the request? Windows overlap
/// iff some second lies in both.
pub fn request_served(g: &Grid, route: &[Waypoint], interval: u64, req: &RideRequest) -> bool {
    for j in 0..route.len() {
        for k in j + 1..route.len() {
            let from = cloak_point(g, &route[j].point).unwrap();
            let to = cloak_point(g, &route[k].point).unwrap();
            let w = cloak_time(route[j].time, interval);
            let overlap = w.start.max(req.window.start) < w.end.min(req.window.end);
            if from == req.origin && to == req.destination && overlap {
                return true;
            }
        }
    }
    false
}

const R: f64 = 6_371_008.8;

fn haversine(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let h = ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * ((b.lon - a.lon).to_radians() / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().min(1.0).asin()
}

fn part(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Reference selection: filter feasible offers, score each, sort the
/// whole list by (score, bid, index) and take the head.
pub fn select_oracle(offers: &[RideOffer], d: &DesiredTrip, p: &MatchPreferences) -> Option<usize> {
    let dropoff_time = d.pickup_time + d.expected_duration;
    let feasible: Vec<&RideOffer> = offers
        .iter()
        .filter(|o| {
            haversine(&o.pickup.point, &d.pickup) <= p.walk_slack_m
                && haversine(&o.dropoff.point, &d.dropoff) <= p.walk_slack_m
                && o.pickup.time.abs_diff(d.pickup_time) <= p.time_slack_secs
                && o.dropoff.time.abs_diff(dropoff_time) <= p.time_slack_secs
        })
        .collect();
    let max_bid = feasible.iter().map(|o| o.bid).max()? as f64;
    let w = p.weights;
    let mut scored: Vec<(f64, u64, usize)> = feasible
        .iter()
        .map(|o| {
            let walk = haversine(&o.pickup.point, &d.pickup);
            let wait = o.pickup.time.abs_diff(d.pickup_time) as f64;
            let s = w.walk * part(walk, p.walk_slack_m) + w.wait * part(wait, p.time_slack_secs as f64)
                + w.bid * part(o.bid as f64, max_bid)
                - w.reputation * o.reputation.clamp(0.0, 1.0);
            (s, o.bid, o.index)
        })
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(scored[0].2)
}

pub fn selection_instance<R: Rng>(rng: &mut R) -> (Vec<RideOffer>, DesiredTrip, MatchPreferences) {
    let g = grid();
    let desired = DesiredTrip {
        pickup: point(rng, &g),
        pickup_time: rng.gen_range(1_000..5_000),
        dropoff: point(rng, &g),
        expected_duration: rng.gen_range(0..2_000),
    };
    let near = |rng: &mut R, p: GeoPoint| GeoPoint {
        lat: p.lat + rng.gen_range(-0.004..0.004),
        lon: p.lon + rng.gen_range(-0.004..0.004),
    };
    let n = rng.gen_range(0..7);
    let offers = (0..n)
        .map(|index| {
            let pt = desired.pickup_time as i64 + rng.gen_range(-700..700);
            let dt = desired.pickup_time as i64 + desired.expected_duration as i64 + rng.gen_range(-700..700);
            let mut driver = [0u8; 20];
            rng.fill(&mut driver);
            RideOffer {
                index,
                driver: Address(driver),
                pickup: Waypoint { point: near(rng, desired.pickup), time: pt.max(0) as u64 },
                dropoff: Waypoint { point: near(rng, desired.dropoff), time: dt.max(0) as u64 },
                bid: rng.gen_range(0..4),
                reputation: *[0.0, 0.5, 1.0, rng.gen_range(0.0..1.0)].get(rng.gen_range(0..4)).unwrap(),
            }
        })
        .collect();
    let weights = if rng.gen_bool(0.5) {
        Weights::default()
    } else {
        Weights {
            walk: rng.gen_range(0.0..2.0),
            wait: rng.gen_range(0.0..2.0),
            bid: rng.gen_range(0.0..2.0),
            reputation: rng.gen_range(0.1..2.0),
        }
    };
    let prefs = MatchPreferences {
        walk_slack_m: *[0.0, 200.0, 400.0, 600.0].get(rng.gen_range(0..4)).unwrap(),
        time_slack_secs: *[0u64, 300, 600, 900].get(rng.gen_range(0..4)).unwrap(),
        weights,
    };
    (offers, desired, prefs)
}
