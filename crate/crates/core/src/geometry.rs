//! Scene geometry: points, blocker trajectories, walls, and propagation
//! paths traced with the image method.
//!
//! Coordinates are metric with z up. Antenna and blocker heights are
//! carried in the points themselves; walls are vertical rectangles, so
//! all steering geometry is azimuth-only. Reflected paths are found by
//! mirroring the receiver across a wall plane and intersecting the
//! straight segment to the image with the wall rectangle, which makes
//! specularity (angle in equals angle out) hold by construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("trajectory needs at least one waypoint")]
    EmptyTrajectory,
    #[error("trajectory times must be strictly increasing (waypoint {0})")]
    NonIncreasingTimes(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid wall: {0}")]
    InvalidWall(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("degenerate link: TX and RX coincide")]
    DegenerateLink,
}

// ---------------------------------------------------------------- points

/// 3D point in metres; doubles as a vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Point {
    fn from(a: [f64; 3]) -> Self {
        Point { x: a[0], y: a[1], z: a[2] }
    }
}

impl From<Point> for [f64; 3] {
    fn from(p: Point) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point { x, y, z }
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Length of the horizontal (x, y) part.
    pub fn norm_xy(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn lerp(self, o: Point, alpha: f64) -> Point {
        self.add(o.sub(self).scale(alpha))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Wraps an angle in degrees into [-180, 180).
pub fn wrap_deg(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}

/// Horizontal azimuth of a direction vector, degrees in [-180, 180].
pub fn azimuth_deg(v: Point) -> f64 {
    v.y.atan2(v.x).to_degrees()
}

// ----------------------------------------------------------- trajectories

/// Timed position sample of a moving blocker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub pos: Point,
}

/// Piecewise-linear motion through a list of waypoints.
///
/// Times are strictly increasing; positions before the first and after
/// the last waypoint clamp to the endpoints, so a trajectory is defined
/// for every query time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Waypoint>", into = "Vec<Waypoint>")]
pub struct Trajectory {
    waypoints: Vec<Waypoint>,
}

impl TryFrom<Vec<Waypoint>> for Trajectory {
    type Error = GeometryError;
    fn try_from(w: Vec<Waypoint>) -> Result<Self, GeometryError> {
        Trajectory::new(w)
    }
}

impl From<Trajectory> for Vec<Waypoint> {
    fn from(t: Trajectory) -> Self {
        t.waypoints
    }
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, GeometryError> {
        if waypoints.is_empty() {
            return Err(GeometryError::EmptyTrajectory);
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !w.t.is_finite() || !w.pos.is_finite() {
                return Err(GeometryError::NonFinite("waypoint"));
            }
            if i > 0 && w.t <= waypoints[i - 1].t {
                return Err(GeometryError::NonIncreasingTimes(i));
            }
        }
        Ok(Trajectory { waypoints })
    }

    /// Fixed position for the whole measurement.
    pub fn stationary(pos: Point) -> Self {
        Trajectory { waypoints: vec![Waypoint { t: 0.0, pos }] }
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    /// Linear interpolation at time `t`, clamped to the first and last
    /// waypoints outside the covered interval.
    pub fn position_at(&self, t: f64) -> Point {
        let w = &self.waypoints;
        if t <= w[0].t {
            return w[0].pos;
        }
        if t >= w[w.len() - 1].t {
            return w[w.len() - 1].pos;
        }
        // first waypoint with time > t; the one before it exists
        let hi = w.partition_point(|p| p.t <= t);
        let (a, b) = (&w[hi - 1], &w[hi]);
        let alpha = (t - a.t) / (b.t - a.t);
        a.pos.lerp(b.pos, alpha)
    }
}

// -------------------------------------------------------------- blockers

pub const DEFAULT_BLOCKER_WIDTH_M: f64 = 0.4;
pub const DEFAULT_BLOCKER_HEIGHT_M: f64 = 1.8;

/// Moving person modelled as a vertical screen of fixed size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blocker {
    pub width_m: f64,
    pub height_m: f64,
    pub trajectory: Trajectory,
}

impl Blocker {
    pub fn new(width_m: f64, height_m: f64, trajectory: Trajectory) -> Self {
        Blocker { width_m, height_m, trajectory }
    }

    /// Blocker with default body dimensions (0.4 m wide, 1.8 m tall).
    pub fn person(trajectory: Trajectory) -> Self {
        Blocker::new(DEFAULT_BLOCKER_WIDTH_M, DEFAULT_BLOCKER_HEIGHT_M, trajectory)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.width_m > 0.0 && self.height_m > 0.0)
            || !self.width_m.is_finite()
            || !self.height_m.is_finite()
        {
            return Err(GeometryError::NonFinite("blocker dimensions"));
        }
        Ok(())
    }
}

/// Vertical screen standing on the floor, used for knife-edge
/// attenuation. `center.z` is half the height; `normal` is horizontal
/// and unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Screen {
    pub center: Point,
    pub width_m: f64,
    pub height_m: f64,
    pub normal: Point,
}

impl Screen {
    /// In-plane horizontal axis (normal rotated 90 degrees left).
    pub fn lateral(&self) -> Point {
        Point::new(-self.normal.y, self.normal.x, 0.0)
    }
}

/// Grounded screen of the given size at `pos`, facing the horizontal
/// TX-RX direction. Only the horizontal part of `pos` is used; the
/// screen stands on the floor.
pub fn screen_facing(pos: Point, width_m: f64, height_m: f64, tx: Point, rx: Point) -> Screen {
    let d = rx.sub(tx);
    let nxy = d.norm_xy();
    let normal = if nxy > 1e-12 {
        Point::new(d.x / nxy, d.y / nxy, 0.0)
    } else {
        // vertical link; orientation is arbitrary in that case
        Point::new(1.0, 0.0, 0.0)
    };
    Screen {
        center: Point::new(pos.x, pos.y, height_m / 2.0),
        width_m,
        height_m,
        normal,
    }
}

/// Screen for `blocker` at time `t`, oriented perpendicular to the
/// horizontal TX-RX direction, bottom on the floor and top at the
/// blocker height.
pub fn screen_at(blocker: &Blocker, t: f64, tx: Point, rx: Point) -> Screen {
    let p = blocker.trajectory.position_at(t);
    screen_facing(p, blocker.width_m, blocker.height_m, tx, rx)
}

// ----------------------------------------------------------------- walls

/// Reflective vertical rectangle. `origin` is the bottom corner from
/// which the rectangle spans `width_m` along the horizontal in-plane
/// axis and `height_m` upward; `normal` is the horizontal unit normal
/// on the room side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub origin: Point,
    pub normal: Point,
    pub width_m: f64,
    pub height_m: f64,
    pub reflection_loss_db: f64,
}

impl Wall {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.origin.is_finite() || !self.normal.is_finite() {
            return Err(GeometryError::InvalidWall("non-finite wall".into()));
        }
        if self.normal.z.abs() > 1e-9 {
            return Err(GeometryError::InvalidWall("wall normal must be horizontal".into()));
        }
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidWall("wall normal must be unit length".into()));
        }
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(GeometryError::InvalidWall("wall extent must be positive".into()));
        }
        if !(self.reflection_loss_db >= 0.0) {
            return Err(GeometryError::InvalidWall("reflection loss must be >= 0 dB".into()));
        }
        Ok(())
    }

    /// Horizontal in-plane axis along which `width_m` is measured.
    pub fn lateral(&self) -> Point {
        Point::new(-self.normal.y, self.normal.x, 0.0)
    }

    /// Signed distance of `p` from the wall plane along the normal.
    pub fn side(&self, p: Point) -> f64 {
        p.sub(self.origin).dot(self.normal)
    }

    /// Mirror image of `p` across the wall plane.
    pub fn mirror(&self, p: Point) -> Point {
        p.sub(self.normal.scale(2.0 * self.side(p)))
    }

    /// True if an on-plane point lies inside the rectangular extent.
    pub fn contains(&self, p: Point) -> bool {
        let d = p.sub(self.origin);
        let u = d.dot(self.lateral());
        let v = p.z - self.origin.z;
        (0.0..=self.width_m).contains(&u) && (0.0..=self.height_m).contains(&v)
    }
}

// ----------------------------------------------------------------- scene

/// Static link geometry plus the moving blockers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room_min: Point,
    pub room_max: Point,
    pub tx: Point,
    pub rx: Point,
    /// TX array boresight azimuth, degrees.
    pub tx_boresight_az_deg: f64,
    /// RX array boresight azimuth, degrees.
    pub rx_boresight_az_deg: f64,
    pub walls: Vec<Wall>,
    pub blockers: Vec<Blocker>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let (lo, hi) = (self.room_min, self.room_max);
        if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            return Err(GeometryError::InvalidScene("room extent is empty".into()));
        }
        for (name, p) in [("tx", self.tx), ("rx", self.rx)] {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite("antenna position"));
            }
            let inside = (lo.x..=hi.x).contains(&p.x)
                && (lo.y..=hi.y).contains(&p.y)
                && (lo.z..=hi.z).contains(&p.z);
            if !inside {
                return Err(GeometryError::InvalidScene(format!("{name} outside the room")));
            }
        }
        if self.tx.distance(self.rx) < 1e-9 {
            return Err(GeometryError::DegenerateLink);
        }
        for b in [self.tx_boresight_az_deg, self.rx_boresight_az_deg] {
            if !(-180.0..=180.0).contains(&b) {
                return Err(GeometryError::InvalidScene("boresight outside [-180, 180]".into()));
            }
        }
        for w in &self.walls {
            w.validate()?;
        }
        for b in &self.blockers {
            b.validate()?;
        }
        Ok(())
    }
}

// ----------------------------------------------------------------- paths

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    Los,
    /// First-order reflection off the wall with this index.
    Reflected { wall: usize },
}

/// One propagation path from TX to RX.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// TX, any reflection point, RX.
    pub vertices: Vec<Point>,
    pub length_m: f64,
    /// Departure azimuth relative to the TX boresight, degrees.
    pub aod_az_deg: f64,
    /// Arrival azimuth relative to the RX boresight, degrees.
    pub aoa_az_deg: f64,
    pub reflection_loss_db: f64,
}

/// Traces the LOS path and all first-order wall reflections, sorted by
/// increasing length (ties broken LOS first, then by wall index).
///
/// A reflection exists only when TX and RX lie strictly on the same side
/// of the wall plane and the specular point falls inside the wall's
/// rectangular extent.
pub fn trace_paths(scene: &Scene) -> Result<Vec<PropagationPath>, GeometryError> {
    scene.validate()?;
    let (tx, rx) = (scene.tx, scene.rx);
    let mut paths = Vec::with_capacity(1 + scene.walls.len());

    paths.push(PropagationPath {
        kind: PathKind::Los,
        vertices: vec![tx, rx],
        length_m: tx.distance(rx),
        aod_az_deg: wrap_deg(azimuth_deg(rx.sub(tx)) - scene.tx_boresight_az_deg),
        aoa_az_deg: wrap_deg(azimuth_deg(tx.sub(rx)) - scene.rx_boresight_az_deg),
        reflection_loss_db: 0.0,
    });

    for (id, wall) in scene.walls.iter().enumerate() {
        let (s_tx, s_rx) = (wall.side(tx), wall.side(rx));
        if s_tx.abs() < 1e-9 || s_rx.abs() < 1e-9 || (s_tx > 0.0) != (s_rx > 0.0) {
            continue;
        }
        let rx_img = wall.mirror(rx);
        // segment to the image crosses the plane strictly between the ends
        let t = s_tx / (s_tx + s_rx);
        let w = tx.lerp(rx_img, t);
        if !wall.contains(w) {
            continue;
        }
        paths.push(PropagationPath {
            kind: PathKind::Reflected { wall: id },
            vertices: vec![tx, w, rx],
            length_m: tx.distance(rx_img),
            aod_az_deg: wrap_deg(azimuth_deg(w.sub(tx)) - scene.tx_boresight_az_deg),
            aoa_az_deg: wrap_deg(azimuth_deg(w.sub(rx)) - scene.rx_boresight_az_deg),
            reflection_loss_db: wall.reflection_loss_db,
        });
    }

    paths.sort_by(|a, b| {
        let key = |p: &PropagationPath| {
            let wall = match p.kind {
                PathKind::Los => 0,
                PathKind::Reflected { wall } => wall + 1,
            };
            (p.length_m, wall)
        };
        let (la, wa) = key(a);
        let (lb, wb) = key(b);
        la.total_cmp(&lb).then(wa.cmp(&wb))
    });
    Ok(paths)
}
