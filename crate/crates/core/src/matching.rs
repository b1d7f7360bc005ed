//! Spatio-temporal feasibility checks and offer selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ledger::{Address, Amount};
use crate::trips::{DesiredTrip, RideRequest, TripCatalog, Waypoint};

/// True iff some catalog triple starts and ends in the request's cells and
/// its origin window overlaps the request window.
pub fn request_in_catalog(catalog: &TripCatalog, request: &RideRequest) -> bool {
    catalog.entries.iter().any(|e| {
        e.origin == request.origin && e.destination == request.destination && e.window.overlaps(&request.window)
    })
}

/// A decrypted offer as seen by the rider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideOffer {
    /// Submission order on the ledger.
    pub index: usize,
    pub driver: Address,
    pub pickup: Waypoint,
    pub dropoff: Waypoint,
    /// Price per distance unit.
    pub bid: Amount,
    /// Reputation ratio in `[0, 1]` at the time of selection.
    pub reputation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub walk: f64,
    pub wait: f64,
    pub bid: f64,
    pub reputation: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { walk: 1.0, wait: 1.0, bid: 1.0, reputation: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchPreferences {
    /// Maximum walking distance in meters.
    pub walk_slack_m: f64,
    /// Maximum tolerated delay in seconds.
    pub time_slack_secs: u64,
    #[serde(default)]
    pub weights: Weights,
}

impl MatchPreferences {
    pub fn is_valid(&self) -> bool {
        let w = self.weights;
        let ws = [w.walk, w.wait, w.bid, w.reputation];
        self.walk_slack_m >= 0.0
            && self.walk_slack_m.is_finite()
            && ws.iter().all(|x| *x >= 0.0 && x.is_finite())
            && ws.iter().any(|x| *x > 0.0)
    }
}

pub fn spatial_match(offer: &RideOffer, desired: &DesiredTrip, walk_slack_m: f64) -> bool {
    offer.pickup.point.distance_m(&desired.pickup) <= walk_slack_m
        && offer.dropoff.point.distance_m(&desired.dropoff) <= walk_slack_m
}

pub fn temporal_match(offer: &RideOffer, desired: &DesiredTrip, time_slack_secs: u64) -> bool {
    offer.pickup.time.abs_diff(desired.pickup_time) <= time_slack_secs
        && offer.dropoff.time.abs_diff(desired.dropoff_time()) <= time_slack_secs
}

pub fn is_feasible(offer: &RideOffer, desired: &DesiredTrip, prefs: &MatchPreferences) -> bool {
    spatial_match(offer, desired, prefs.walk_slack_m) && temporal_match(offer, desired, prefs.time_slack_secs)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Weighted score of one offer; lower is better. `max_bid` is the largest
/// bid among the candidates being compared.
pub fn offer_score(offer: &RideOffer, desired: &DesiredTrip, prefs: &MatchPreferences, max_bid: Amount) -> f64 {
    let w = prefs.weights;
    let walk = offer.pickup.point.distance_m(&desired.pickup);
    let wait = offer.pickup.time.abs_diff(desired.pickup_time) as f64;
    w.walk * ratio(walk, prefs.walk_slack_m) + w.wait * ratio(wait, prefs.time_slack_secs as f64)
        + w.bid * ratio(offer.bid as f64, max_bid as f64)
        - w.reputation * offer.reputation.clamp(0.0, 1.0)
}

/// Picks the feasible offer with the lowest score. Ties go to the lower bid,
/// then to the earlier submission.
pub fn select_offer<'a>(
    offers: &'a [RideOffer],
    desired: &DesiredTrip,
    prefs: &MatchPreferences,
) -> Option<&'a RideOffer> {
    let feasible: Vec<&RideOffer> = offers.iter().filter(|o| is_feasible(o, desired, prefs)).collect();
    let max_bid = feasible.iter().map(|o| o.bid).max()?;
    feasible
        .into_iter()
        .map(|o| (offer_score(o, desired, prefs, max_bid), o))
        .min_by(|(sa, a), (sb, b)| {
            sa.partial_cmp(sb)
                .unwrap_or(Ordering::Equal)
                .then(a.bid.cmp(&b.bid))
                .then(a.index.cmp(&b.index))
        })
        .map(|(_, o)| o)
}
