//! Rider and driver agents and the discrete-event simulation that drives
//! them against a ledger.

pub mod auth;
mod runner;

use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::contracts::OfferRecord;
use crate::crypto::{offer_decrypt, Certificate, KeyPair, PairingContext, PublicKey, Scalar};
use crate::ledger::derive_address;
use crate::matching::RideOffer;
use crate::trips::{encode_location, Cell, GeoPoint, Grid, PlannedTrip, RideRequest, TripCatalog, Waypoint};

pub use runner::{run_scenario, RunOutput, TimingReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverProfile {
    #[default]
    Honest,
    /// Deposits but never shows up.
    NoShow,
    /// Proves arrival, takes the deposit and leaves.
    ClaimAndAbandon,
    /// Asks the rider to co-sign an inflated distance mid-trip.
    DistanceCheat,
    /// Bids but never matches the rider's deposit.
    Uncommitted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiderBehavior {
    /// Selects an offer but never opens the deposit.
    pub skip_deposit: bool,
    /// Corrupts the signature on the true pick-up element.
    pub rigged_setup: bool,
    /// Stops co-signing after this many segments.
    pub stop_signing_after: Option<u64>,
    /// Tries once to submit a segment without the driver's signature.
    pub forge_segment: bool,
    /// Someone else shows up at the pick-up point first.
    pub impostor: bool,
}

/// What a driver encrypts to the requester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferPlaintext {
    pub request_id: u64,
    pub certificate: Certificate,
    pub pickup: Waypoint,
    pub dropoff: Waypoint,
}

/// Exact waypoints a driver offers for a request, taken from the first
/// catalog triple that serves it.
pub fn find_offer(catalog: &TripCatalog, route: &PlannedTrip, request: &RideRequest) -> Option<(Waypoint, Waypoint)> {
    let entry = catalog.entries.iter().find(|e| {
        e.origin == request.origin && e.destination == request.destination && e.window.overlaps(&request.window)
    })?;
    let w = route.waypoints();
    Some((w[entry.origin_index], w[entry.destination_index]))
}

/// Decrypts and checks one offer record. Returns `None` for anything the
/// rider cannot trust: bad ciphertext, a certificate not issued by the
/// authority, or a certificate for another key than the bidder's.
pub fn open_offer(
    ctx: &PairingContext,
    key: &KeyPair,
    authority: &PublicKey,
    request_id: u64,
    index: usize,
    record: &OfferRecord,
    reputation: f64,
) -> Option<(OfferPlaintext, RideOffer)> {
    let bytes = offer_decrypt(key.secret(), &record.ciphertext).ok()?;
    let plain: OfferPlaintext = serde_json::from_slice(&bytes).ok()?;
    if plain.request_id != request_id
        || !plain.certificate.verify(ctx, authority)
        || derive_address(&plain.certificate.public) != record.driver
    {
        return None;
    }
    let offer = RideOffer {
        index,
        driver: record.driver,
        pickup: plain.pickup,
        dropoff: plain.dropoff,
        bid: record.bid,
        reputation,
    };
    Some((plain, offer))
}

/// The set φ: the true pick-up element and `k - 1` distinct decoys drawn
/// uniformly from the same cell, shuffled.
pub fn decoy_set<R: RngCore + CryptoRng>(
    grid: &Grid,
    cell: Cell,
    truth: &GeoPoint,
    k: usize,
    precision: u8,
    rng: &mut R,
) -> Option<Vec<Scalar>> {
    let first = encode_location(truth, precision).ok()?;
    let mut set = vec![first];
    let (min_lat, max_lat, min_lon, max_lon) = grid.cell_bounds(cell);
    let mut attempts = 0;
    while set.len() < k {
        attempts += 1;
        if attempts > 64 * k {
            return None;
        }
        let p = GeoPoint { lat: rng.gen_range(min_lat..max_lat), lon: rng.gen_range(min_lon..max_lon) };
        let e = encode_location(&p, precision).ok()?;
        if !set.contains(&e) {
            set.push(e);
        }
    }
    set.shuffle(rng);
    Some(set)
}

/// Trip length in whole distance units, at least one.
pub fn distance_units(from: &GeoPoint, to: &GeoPoint, unit_m: f64) -> u64 {
    ((from.distance_m(to) / unit_m).ceil() as u64).max(1)
}

/// Splits `total` into `parts` near-equal positive pieces, remainder last.
pub fn split_distance(total: u64, parts: u64) -> Vec<u64> {
    let parts = parts.clamp(1, total.max(1));
    let base = total / parts;
    let mut v = vec![base; parts as usize];
    *v.last_mut().unwrap() += total - base * parts;
    v
}
