//! Geographic grid, spatial and temporal cloaking, driver trip catalogs and
//! rider request generalization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Scalar;

/// Seconds since the simulation epoch.
pub type Timestamp = u64;

pub const DEFAULT_INTERVAL_SECS: u64 = 15 * 60;
pub const DEFAULT_LOCATION_PRECISION: u8 = 5;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TripError {
    #[error("point ({lat}, {lon}) lies outside the grid bounding box")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid coordinates ({lat}, {lon})")]
    InvalidCoordinates { lat: f64, lon: f64 },
    #[error("a trip catalog needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint timestamps must be strictly increasing")]
    NonIncreasingTimes,
    #[error("grid needs rows >= 1, cols >= 1 and a non-empty bounding box")]
    InvalidGrid,
    #[error("location precision must be within 3..=6 decimal places, got {0}")]
    InvalidPrecision(u8),
    #[error("time interval must be positive")]
    InvalidInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, TripError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TripError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(TripError::InvalidCoordinates { lat: self.lat, lon: self.lon })
        }
    }

    /// Great-circle distance in meters (haversine).
    pub fn distance_m(&self, other: &GeoPoint) -> f64 {
        let (phi1, phi2) = (self.lat.to_radians(), other.lat.to_radians());
        let dphi = phi2 - phi1;
        let dlambda = (other.lon - self.lon).to_radians();
        let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub id: u32,
    pub row: u32,
    pub col: u32,
}

/// Uniform row-major partition of a lat/lon bounding box. Row 0 is the
/// northernmost row and column 0 the westernmost, so the NW corner is cell 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
    pub rows: u32,
    pub cols: u32,
}

/// Index of the band containing `offset` out of `bands` equal bands spanning
/// `extent`. Points on a shared edge go to the lower band.
fn band(offset: f64, extent: f64, bands: u32) -> u32 {
    let scaled = offset * bands as f64 / extent;
    let idx = scaled.ceil() as i64 - 1;
    idx.clamp(0, bands as i64 - 1) as u32
}

impl Grid {
    pub fn new(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64, rows: u32, cols: u32) -> Result<Self, TripError> {
        let grid = Self { min_lat, max_lat, min_lon, max_lon, rows, cols };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), TripError> {
        let finite = [self.min_lat, self.max_lat, self.min_lon, self.max_lon]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.rows == 0 || self.cols == 0 || self.min_lat >= self.max_lat || self.min_lon >= self.max_lon {
            return Err(TripError::InvalidGrid);
        }
        GeoPoint::new(self.min_lat, self.min_lon).map_err(|_| TripError::InvalidGrid)?;
        GeoPoint::new(self.max_lat, self.max_lon).map_err(|_| TripError::InvalidGrid)?;
        Ok(())
    }

    pub fn cell_count(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn cell_height(&self) -> f64 {
        (self.max_lat - self.min_lat) / self.rows as f64
    }

    pub fn cell_width(&self) -> f64 {
        (self.max_lon - self.min_lon) / self.cols as f64
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    pub fn cell(&self, row: u32, col: u32) -> Option<Cell> {
        (row < self.rows && col < self.cols).then(|| Cell { id: row * self.cols + col, row, col })
    }

    pub fn cell_by_id(&self, id: u32) -> Option<Cell> {
        (id < self.cell_count()).then(|| Cell { id, row: id / self.cols, col: id % self.cols })
    }

    /// Bounding box of a cell as `(min_lat, max_lat, min_lon, max_lon)`.
    pub fn cell_bounds(&self, cell: Cell) -> (f64, f64, f64, f64) {
        let top = self.max_lat - cell.row as f64 * self.cell_height();
        let left = self.min_lon + cell.col as f64 * self.cell_width();
        (top - self.cell_height(), top, left, left + self.cell_width())
    }

    pub fn cell_center(&self, cell: Cell) -> GeoPoint {
        let (s, n, w, e) = self.cell_bounds(cell);
        GeoPoint { lat: (s + n) / 2.0, lon: (w + e) / 2.0 }
    }
}

pub fn cloak_point(grid: &Grid, point: &GeoPoint) -> Result<Cell, TripError> {
    if !grid.contains(point) {
        return Err(TripError::OutOfBounds { lat: point.lat, lon: point.lon });
    }
    let row = band(grid.max_lat - point.lat, grid.max_lat - grid.min_lat, grid.rows);
    let col = band(point.lon - grid.min_lon, grid.max_lon - grid.min_lon, grid.cols);
    Ok(Cell { id: row * grid.cols + col, row, col })
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeWindow {
    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// # Panics
/// If `interval_len` is zero.
pub fn cloak_time(t: Timestamp, interval_len: u64) -> TimeWindow {
    assert!(interval_len > 0, "time interval must be positive");
    let start = t / interval_len * interval_len;
    TimeWindow { start, end: start + interval_len }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub point: GeoPoint,
    pub time: Timestamp,
}

/// A driver's exact route with arrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrip {
    waypoints: Vec<Waypoint>,
}

impl PlannedTrip {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, TripError> {
        if waypoints.windows(2).any(|w| w[0].time >= w[1].time) {
            return Err(TripError::NonIncreasingTimes);
        }
        for w in &waypoints {
            w.point.validate()?;
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloakedStop {
    pub cell: Cell,
    pub window: TimeWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloakedTrip {
    pub stops: Vec<CloakedStop>,
}

pub fn cloak_trip(grid: &Grid, trip: &PlannedTrip, interval_len: u64) -> Result<CloakedTrip, TripError> {
    if interval_len == 0 {
        return Err(TripError::InvalidInterval);
    }
    let stops = trip
        .waypoints()
        .iter()
        .map(|w| {
            Ok(CloakedStop {
                cell: cloak_point(grid, &w.point)?,
                window: cloak_time(w.time, interval_len),
            })
        })
        .collect::<Result<Vec<_>, TripError>>()?;
    Ok(CloakedTrip { stops })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub origin: Cell,
    pub window: TimeWindow,
    pub destination: Cell,
    /// Index of the first (origin, destination) waypoint pair producing this triple.
    pub origin_index: usize,
    pub destination_index: usize,
    /// How many waypoint pairs produced this same triple.
    pub multiplicity: usize,
}

/// Every sub-trip `(C_j, T_j, C_k)` with `j < k` a driver can serve, in
/// first-occurrence order, with identical triples merged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripCatalog {
    pub entries: Vec<CatalogEntry>,
    /// Pair count before merging: `n(n-1)/2`.
    pub raw_count: usize,
}

impl TripCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn enumerate_trips(cloaked: &CloakedTrip) -> Result<TripCatalog, TripError> {
    let n = cloaked.stops.len();
    if n < 2 {
        return Err(TripError::TooFewWaypoints(n));
    }
    let mut entries: Vec<CatalogEntry> = Vec::new();
    let mut raw_count = 0;
    for (j, from) in cloaked.stops.iter().enumerate() {
        for (k, to) in cloaked.stops.iter().enumerate().skip(j + 1) {
            raw_count += 1;
            let existing = entries
                .iter_mut()
                .find(|e| e.origin == from.cell && e.window == from.window && e.destination == to.cell);
            match existing {
                Some(e) => e.multiplicity += 1,
                None => entries.push(CatalogEntry {
                    origin: from.cell,
                    window: from.window,
                    destination: to.cell,
                    origin_index: j,
                    destination_index: k,
                    multiplicity: 1,
                }),
            }
        }
    }
    Ok(TripCatalog { entries, raw_count })
}

/// What the rider actually wants, kept off-ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesiredTrip {
    pub pickup: GeoPoint,
    pub pickup_time: Timestamp,
    pub dropoff: GeoPoint,
    /// Expected ride duration; gives the target drop-off time.
    pub expected_duration: u64,
}

impl DesiredTrip {
    pub fn dropoff_time(&self) -> Timestamp {
        self.pickup_time + self.expected_duration
    }
}

/// The generalized request `(C_o, T_o, C_d)` that goes on the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RideRequest {
    pub origin: Cell,
    pub window: TimeWindow,
    pub destination: Cell,
    /// Last ledger time at which offers are accepted (inclusive).
    pub deadline: Timestamp,
    pub max_offers: Option<u32>,
}

pub fn generalize_request(
    grid: &Grid,
    desired: &DesiredTrip,
    interval_len: u64,
    deadline: Timestamp,
    max_offers: Option<u32>,
) -> Result<RideRequest, TripError> {
    if interval_len == 0 {
        return Err(TripError::InvalidInterval);
    }
    Ok(RideRequest {
        origin: cloak_point(grid, &desired.pickup)?,
        window: cloak_time(desired.pickup_time, interval_len),
        destination: cloak_point(grid, &desired.dropoff)?,
        deadline,
        max_offers,
    })
}

/// Quantizes a coordinate to `precision` decimal places.
pub fn quantize(point: &GeoPoint, precision: u8) -> (u32, u32) {
    let scale = 10f64.powi(precision as i32);
    let lat = ((point.lat + 90.0) * scale).round() as u32;
    let lon = ((point.lon + 180.0) * scale).round() as u32;
    (lat, lon)
}

pub fn dequantize(lat: u32, lon: u32, precision: u8) -> GeoPoint {
    let scale = 10f64.powi(precision as i32);
    GeoPoint { lat: lat as f64 / scale - 90.0, lon: lon as f64 / scale - 180.0 }
}

/// Spreads the low 32 bits of `v` to the even bit positions of a u64.
fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// Embeds a location into the scalar field: quantize both coordinates
/// (offset to be non-negative), interleave their bits (latitude on odd
/// positions) and read the result as an integer. Injective over the
/// quantized domain since both halves fit in 32 bits at precision <= 6.
///
/// `(0, 0)` at precision 5 quantizes to `(9_000_000, 18_000_000)` and
/// encodes to the scalar `423_889_219_903_488`.
pub fn encode_location(point: &GeoPoint, precision: u8) -> Result<Scalar, TripError> {
    if !(3..=6).contains(&precision) {
        return Err(TripError::InvalidPrecision(precision));
    }
    point.validate()?;
    let (lat, lon) = quantize(point, precision);
    let word = (spread_bits(lat) << 1) | spread_bits(lon);
    Ok(Scalar::from(word))
}
