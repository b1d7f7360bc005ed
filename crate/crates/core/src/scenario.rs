//! Scenario files: the JSON input of a simulation run.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{DriverProfile, RiderBehavior};
use crate::ledger::Amount;
use crate::matching::{MatchPreferences, Weights};
use crate::trips::{cloak_point, GeoPoint, Grid, PlannedTrip, Timestamp, Waypoint, DEFAULT_INTERVAL_SECS};
use crate::zksm::{Coverage, DEFAULT_SET_SIZE};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error("simulation engine error: {0}")]
    Engine(String),
}

fn schema<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Schema(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub grid: Grid,
    #[serde(default = "default_interval")]
    pub interval_secs: u64,
    #[serde(default)]
    pub zksm: ZksmSettings,
    #[serde(default)]
    pub bidding: BiddingSettings,
    #[serde(default)]
    pub deposits: DepositSettings,
    #[serde(default)]
    pub payment: PaymentSettings,
    #[serde(default)]
    pub reputation: ReputationSettings,
    pub location_provers: Vec<LocationProverSpec>,
    pub drivers: Vec<DriverSpec>,
    pub riders: Vec<RiderSpec>,
}

fn default_interval() -> u64 {
    DEFAULT_INTERVAL_SECS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZksmSettings {
    pub set_size: usize,
    /// Decimal places kept when embedding locations into the set.
    pub precision: u8,
}

impl Default for ZksmSettings {
    fn default() -> Self {
        Self { set_size: DEFAULT_SET_SIZE, precision: crate::trips::DEFAULT_LOCATION_PRECISION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiddingSettings {
    /// How long before the desired pick-up a request is published.
    pub request_lead_secs: u64,
    /// How long drivers may bid after publication.
    pub offer_window_secs: u64,
}

impl Default for BiddingSettings {
    fn default() -> Self {
        Self { request_lead_secs: 1_800, offer_window_secs: 300 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepositSettings {
    pub rider: Amount,
    pub driver: Amount,
    pub accept_window_secs: u64,
    /// Expiration is this long after the end of the pick-up window.
    pub expiration_grace_secs: u64,
}

impl Default for DepositSettings {
    fn default() -> Self {
        Self { rider: 40, driver: 40, accept_window_secs: 120, expiration_grace_secs: 1_800 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaymentSettings {
    pub distance_unit_m: f64,
    pub segment_secs: u64,
    /// Expiration is this long after the planned drop-off.
    pub expiration_grace_secs: u64,
}

impl Default for PaymentSettings {
    fn default() -> Self {
        Self { distance_unit_m: 100.0, segment_secs: 60, expiration_grace_secs: 3_600 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReputationSettings {
    pub threshold: f64,
    pub bond: Amount,
    pub claim_timeout_secs: u64,
}

impl Default for ReputationSettings {
    fn default() -> Self {
        Self { threshold: crate::contracts::reputation::DEFAULT_THRESHOLD, bond: 100, claim_timeout_secs: 3_600 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationProverSpec {
    pub name: String,
    pub coverage: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverSpec {
    pub name: String,
    pub identity: String,
    #[serde(default)]
    pub profile: DriverProfile,
    /// Price per distance unit.
    pub bid: Amount,
    pub balance: Amount,
    pub route: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiderSpec {
    pub name: String,
    /// Funds on each one-time request address.
    pub budget_per_trip: Amount,
    pub preferences: MatchPreferences,
    #[serde(default)]
    pub behavior: RiderBehavior,
    pub trips: Vec<TripSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripSpec {
    pub pickup: GeoPoint,
    pub pickup_time: Timestamp,
    pub dropoff: GeoPoint,
    pub expected_duration: u64,
    #[serde(default)]
    pub max_offers: Option<u32>,
    /// Publication time; defaults to `pickup_time - request_lead_secs`.
    #[serde(default)]
    pub request_time: Option<Timestamp>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return schema(format!("unsupported version {}, expected {SCENARIO_VERSION}", self.version));
        }
        self.grid.validate().map_err(|e| ScenarioError::Schema(format!("grid: {e}")))?;
        if self.interval_secs == 0 {
            return schema("interval_secs must be positive");
        }
        if !(2..=256).contains(&self.zksm.set_size) {
            return schema("zksm.set_size must be within 2..=256");
        }
        if !(3..=6).contains(&self.zksm.precision) {
            return schema("zksm.precision must be within 3..=6");
        }
        if self.deposits.rider == 0 {
            return schema("deposits.rider must be positive");
        }
        if !(self.payment.distance_unit_m > 0.0 && self.payment.distance_unit_m.is_finite()) {
            return schema("payment.distance_unit_m must be positive");
        }
        if self.payment.segment_secs == 0 {
            return schema("payment.segment_secs must be positive");
        }
        if !(0.0..=1.0).contains(&self.reputation.threshold) {
            return schema("reputation.threshold must be within [0, 1]");
        }
        let mut names = std::collections::BTreeSet::new();
        for lp in &self.location_provers {
            if !names.insert(format!("lp:{}", lp.name)) {
                return schema(format!("duplicate location prover name {}", lp.name));
            }
        }
        for d in &self.drivers {
            if !names.insert(format!("agent:{}", d.name)) {
                return schema(format!("duplicate agent name {}", d.name));
            }
            if d.route.len() < 2 {
                return schema(format!("driver {}: route needs at least two waypoints", d.name));
            }
            PlannedTrip::new(d.route.clone()).map_err(|e| ScenarioError::Schema(format!("driver {}: {e}", d.name)))?;
            for w in &d.route {
                cloak_point(&self.grid, &w.point).map_err(|e| ScenarioError::Schema(format!("driver {}: {e}", d.name)))?;
            }
        }
        for r in &self.riders {
            if !names.insert(format!("agent:{}", r.name)) {
                return schema(format!("duplicate agent name {}", r.name));
            }
            if !r.preferences.is_valid() {
                return schema(format!("rider {}: invalid preferences", r.name));
            }
            for t in &r.trips {
                for p in [&t.pickup, &t.dropoff] {
                    cloak_point(&self.grid, p).map_err(|e| ScenarioError::Schema(format!("rider {}: {e}", r.name)))?;
                }
                if t.max_offers == Some(0) {
                    return schema(format!("rider {}: max_offers must be positive", r.name));
                }
            }
        }
        Ok(())
    }

    /// A random but well-formed scenario mixing every driver profile and
    /// rider misbehaviour, for conservation and determinism sweeps.
    pub fn random(seed: u64) -> Scenario {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let grid = Grid {
            min_lat: 36.0,
            max_lat: 36.4,
            min_lon: -87.0,
            max_lon: -86.5,
            rows: rng.gen_range(1..=3),
            cols: rng.gen_range(1..=3),
        };
        let in_box = |rng: &mut ChaCha20Rng| GeoPoint {
            lat: rng.gen_range(grid.min_lat + 0.01..grid.max_lat - 0.01),
            lon: rng.gen_range(grid.min_lon + 0.01..grid.max_lon - 0.01),
        };
        let jitter = |rng: &mut ChaCha20Rng, p: GeoPoint| GeoPoint {
            lat: (p.lat + rng.gen_range(-0.0008..0.0008)).clamp(grid.min_lat, grid.max_lat),
            lon: (p.lon + rng.gen_range(-0.0008..0.0008)).clamp(grid.min_lon, grid.max_lon),
        };
        let whole_box = Coverage::Polygon {
            vertices: vec![
                GeoPoint { lat: grid.min_lat, lon: grid.min_lon },
                GeoPoint { lat: grid.min_lat, lon: grid.max_lon },
                GeoPoint { lat: grid.max_lat, lon: grid.max_lon },
                GeoPoint { lat: grid.max_lat, lon: grid.min_lon },
            ],
        };
        let mut location_provers = vec![LocationProverSpec { name: "rsu-box".into(), coverage: whole_box }];
        if rng.gen_bool(0.5) {
            location_provers.push(LocationProverSpec {
                name: "rsu-spot".into(),
                coverage: Coverage::Circle { center: in_box(&mut rng), radius_m: 2_000.0 },
            });
        }
        let profiles = [
            DriverProfile::Honest,
            DriverProfile::NoShow,
            DriverProfile::ClaimAndAbandon,
            DriverProfile::DistanceCheat,
            DriverProfile::Uncommitted,
        ];
        let drivers: Vec<DriverSpec> = (0..rng.gen_range(1..=4))
            .map(|i| {
                let mut t = rng.gen_range(3_600..7_200);
                let route = (0..rng.gen_range(3..=6))
                    .map(|_| {
                        t += rng.gen_range(300..900);
                        Waypoint { point: in_box(&mut rng), time: t }
                    })
                    .collect();
                DriverSpec {
                    name: format!("driver-{i}"),
                    identity: format!("TN-{i:04}"),
                    profile: *profiles.choose(&mut rng).unwrap(),
                    bid: rng.gen_range(1..=5),
                    balance: rng.gen_range(0..2_000),
                    route,
                }
            })
            .collect();
        let riders = (0..rng.gen_range(1..=3))
            .map(|i| {
                let trips = (0..rng.gen_range(1..=2))
                    .map(|_| {
                        let d = drivers.choose(&mut rng).unwrap();
                        let j = rng.gen_range(0..d.route.len() - 1);
                        let k = rng.gen_range(j + 1..d.route.len());
                        let (a, b) = (d.route[j], d.route[k]);
                        let pickup_time = a.time + rng.gen_range(0..120) - 60;
                        TripSpec {
                            pickup: jitter(&mut rng, a.point),
                            pickup_time,
                            dropoff: jitter(&mut rng, b.point),
                            expected_duration: b.time - a.time,
                            max_offers: if rng.gen_bool(0.2) { Some(rng.gen_range(1..=3)) } else { None },
                            request_time: None,
                        }
                    })
                    .collect();
                RiderSpec {
                    name: format!("rider-{i}"),
                    budget_per_trip: rng.gen_range(50..6_000),
                    preferences: MatchPreferences { walk_slack_m: 500.0, time_slack_secs: 600, weights: Weights::default() },
                    behavior: RiderBehavior {
                        skip_deposit: rng.gen_bool(0.1),
                        rigged_setup: rng.gen_bool(0.1),
                        stop_signing_after: if rng.gen_bool(0.15) { Some(rng.gen_range(0..4)) } else { None },
                        forge_segment: rng.gen_bool(0.15),
                        impostor: rng.gen_bool(0.15),
                    },
                    trips,
                }
            })
            .collect();
        Scenario {
            version: SCENARIO_VERSION,
            seed,
            grid,
            interval_secs: DEFAULT_INTERVAL_SECS,
            zksm: ZksmSettings { set_size: *[2usize, 4, 8].choose(&mut rng).unwrap(), precision: 5 },
            bidding: BiddingSettings::default(),
            deposits: DepositSettings {
                rider: rng.gen_range(1..60),
                driver: rng.gen_range(0..60),
                ..DepositSettings::default()
            },
            payment: PaymentSettings { segment_secs: rng.gen_range(60..400), ..PaymentSettings::default() },
            reputation: ReputationSettings { bond: rng.gen_range(0..150), ..ReputationSettings::default() },
            location_provers,
            drivers,
            riders,
        }
    }
}
