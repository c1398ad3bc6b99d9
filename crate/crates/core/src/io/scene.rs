//! JSON scene configuration.
//!
//! A scene file bundles everything one simulation run needs: room
//! extents, antenna placement, reflective walls, moving blockers, beam
//! codebook parameters, and the scan configuration. Parsing is strict:
//! unknown fields are rejected so a typo such as `hpbw_degg` fails
//! loudly instead of silently falling back to a default, and schema
//! errors carry the JSON path of the offending field.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::array::{self, Codebook};
use crate::geometry::{
    Blocker, Point, Scene, Trajectory, Wall, Waypoint, DEFAULT_BLOCKER_HEIGHT_M,
    DEFAULT_BLOCKER_WIDTH_M,
};
use crate::io::IoError;
use crate::sounder::ScanConfig;

/// Beam codebook knobs; every field falls back to the stock 12-beam
/// 60 GHz pattern.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookParams {
    pub n_beams: usize,
    pub steering_range_deg: f64,
    pub peak_gain_dbi: f64,
    pub hpbw_deg: f64,
    pub sidelobe_floor_db: f64,
}

impl Default for CodebookParams {
    fn default() -> Self {
        CodebookParams {
            n_beams: array::DEFAULT_BEAM_COUNT,
            steering_range_deg: array::DEFAULT_STEERING_RANGE_DEG,
            peak_gain_dbi: array::DEFAULT_PEAK_GAIN_DBI,
            hpbw_deg: array::DEFAULT_HPBW_DEG,
            sidelobe_floor_db: array::DEFAULT_SIDELOBE_FLOOR_DB,
        }
    }
}

impl CodebookParams {
    pub fn build(&self) -> Result<Codebook, crate::array::ArrayError> {
        array::make_codebook(
            self.n_beams,
            self.steering_range_deg,
            self.peak_gain_dbi,
            self.hpbw_deg,
            self.sidelobe_floor_db,
        )
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub min: Point,
    pub max: Point,
}

/// Antenna placement. When `boresight_az_deg` is omitted the array is
/// aimed straight at the opposite antenna.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSpec {
    pub position: Point,
    #[serde(default)]
    pub boresight_az_deg: Option<f64>,
}

fn default_blocker_width() -> f64 {
    DEFAULT_BLOCKER_WIDTH_M
}

fn default_blocker_height() -> f64 {
    DEFAULT_BLOCKER_HEIGHT_M
}

/// Moving blocker: a screen of the given size following waypoints.
/// Dimensions default to a walking person (0.4 m by 1.8 m).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockerSpec {
    #[serde(default = "default_blocker_width")]
    pub width_m: f64,
    #[serde(default = "default_blocker_height")]
    pub height_m: f64,
    pub waypoints: Vec<Waypoint>,
}

/// Top-level scene document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub room: RoomSpec,
    pub tx: AntennaSpec,
    pub rx: AntennaSpec,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub blockers: Vec<BlockerSpec>,
    /// Codebook used by both ends unless overridden per side.
    #[serde(default)]
    pub codebook: CodebookParams,
    #[serde(default)]
    pub tx_codebook: Option<CodebookParams>,
    #[serde(default)]
    pub rx_codebook: Option<CodebookParams>,
    #[serde(default)]
    pub scan: ScanConfig,
}

/// A fully validated scene ready to hand to the sounder.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub scene: Scene,
    pub config: ScanConfig,
    pub tx_codebook: Codebook,
    pub rx_codebook: Codebook,
}

fn aim_azimuth_deg(from: Point, to: Point) -> f64 {
    (to.y - from.y).atan2(to.x - from.x).to_degrees()
}

impl SceneFile {
    /// Resolves defaults and validates every part of the document.
    pub fn realize(self) -> Result<LoadedScene, IoError> {
        let tx = self.tx.position;
        let rx = self.rx.position;
        let mut blockers = Vec::with_capacity(self.blockers.len());
        for b in self.blockers {
            let trajectory = Trajectory::new(b.waypoints)?;
            blockers.push(Blocker::new(b.width_m, b.height_m, trajectory));
        }
        let scene = Scene {
            room_min: self.room.min,
            room_max: self.room.max,
            tx,
            rx,
            tx_boresight_az_deg: self
                .tx
                .boresight_az_deg
                .unwrap_or_else(|| aim_azimuth_deg(tx, rx)),
            rx_boresight_az_deg: self
                .rx
                .boresight_az_deg
                .unwrap_or_else(|| aim_azimuth_deg(rx, tx)),
            walls: self.walls,
            blockers,
        };
        scene.validate()?;
        self.scan.validate()?;
        let tx_codebook = self.tx_codebook.unwrap_or(self.codebook).build()?;
        let rx_codebook = self.rx_codebook.unwrap_or(self.codebook).build()?;
        Ok(LoadedScene { scene, config: self.scan, tx_codebook, rx_codebook })
    }
}

/// Parses a scene document from JSON text. Schema violations include
/// the JSON path of the offending field.
pub fn parse_scene(text: &str) -> Result<LoadedScene, IoError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: SceneFile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| IoError::SceneSchema(format!("{} at {}", e.inner(), e.path())))?;
    file.realize()
}

/// Loads and validates a scene file.
pub fn load_scene(path: &Path) -> Result<LoadedScene, IoError> {
    parse_scene(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "room": { "min": [0, 0, 0], "max": [6, 5, 3] },
        "tx": { "position": [1, 2, 1] },
        "rx": { "position": [5, 2, 1] }
    }"#;

    #[test]
    fn minimal_scene_fills_every_default() {
        let loaded = parse_scene(MINIMAL).unwrap();
        assert_eq!(loaded.scene.tx_boresight_az_deg, 0.0);
        assert_eq!(loaded.scene.rx_boresight_az_deg, 180.0);
        assert!(loaded.scene.walls.is_empty());
        assert!(loaded.scene.blockers.is_empty());
        assert_eq!(loaded.config, ScanConfig::default());
        assert_eq!(loaded.tx_codebook.beams().len(), array::DEFAULT_BEAM_COUNT);
        assert_eq!(loaded.rx_codebook.beams().len(), array::DEFAULT_BEAM_COUNT);
    }

    #[test]
    fn boresight_defaults_aim_at_the_peer() {
        let text = r#"{
            "room": { "min": [0, 0, 0], "max": [6, 6, 3] },
            "tx": { "position": [1, 1, 1] },
            "rx": { "position": [4, 4, 1] }
        }"#;
        let loaded = parse_scene(text).unwrap();
        assert!((loaded.scene.tx_boresight_az_deg - 45.0).abs() < 1e-12);
        assert!((loaded.scene.rx_boresight_az_deg - -135.0).abs() < 1e-12);
    }

    #[test]
    fn missing_tx_field_is_reported_by_name() {
        let text = r#"{
            "room": { "min": [0, 0, 0], "max": [6, 5, 3] },
            "rx": { "position": [5, 2, 1] }
        }"#;
        let err = parse_scene(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tx"), "error should name the missing field: {msg}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_path() {
        let text = r#"{
            "room": { "min": [0, 0, 0], "max": [6, 5, 3] },
            "tx": { "position": [1, 2, 1] },
            "rx": { "position": [5, 2, 1] },
            "codebook": { "hpbw_degg": 30.0 }
        }"#;
        let err = parse_scene(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("hpbw_degg"), "unexpected message: {msg}");
        assert!(msg.contains("codebook"), "path should reach the bad field: {msg}");
    }

    #[test]
    fn blocker_dimensions_default_to_a_person() {
        let text = r#"{
            "room": { "min": [0, 0, 0], "max": [6, 5, 3] },
            "tx": { "position": [1, 2, 1] },
            "rx": { "position": [5, 2, 1] },
            "blockers": [
                { "waypoints": [ { "t": 0.0, "pos": [3, 0, 0] },
                                 { "t": 4.0, "pos": [3, 4, 0] } ] }
            ]
        }"#;
        let loaded = parse_scene(text).unwrap();
        assert_eq!(loaded.scene.blockers.len(), 1);
        assert_eq!(loaded.scene.blockers[0].width_m, DEFAULT_BLOCKER_WIDTH_M);
        assert_eq!(loaded.scene.blockers[0].height_m, DEFAULT_BLOCKER_HEIGHT_M);
    }

    #[test]
    fn per_side_codebook_overrides_apply() {
        let text = r#"{
            "room": { "min": [0, 0, 0], "max": [6, 5, 3] },
            "tx": { "position": [1, 2, 1] },
            "rx": { "position": [5, 2, 1] },
            "codebook": { "n_beams": 8 },
            "rx_codebook": { "n_beams": 16, "peak_gain_dbi": 20.0 }
        }"#;
        let loaded = parse_scene(text).unwrap();
        assert_eq!(loaded.tx_codebook.beams().len(), 8);
        assert_eq!(loaded.rx_codebook.beams().len(), 16);
    }

    #[test]
    fn invalid_geometry_is_rejected_after_parsing() {
        // RX coincides with TX: parses fine, fails scene validation
        let text = r#"{
            "room": { "min": [0, 0, 0], "max": [6, 5, 3] },
            "tx": { "position": [1, 2, 1] },
            "rx": { "position": [1, 2, 1] }
        }"#;
        assert!(parse_scene(text).is_err());
    }

    #[test]
    fn bundled_scenes_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes");
        for name in ["midlink_crossing.json", "living_room.json", "three_blockers.json"] {
            let loaded = load_scene(&dir.join(name))
                .unwrap_or_else(|e| panic!("{name} should load: {e}"));
            assert!(loaded.config.scan_count() > 0);
        }

        // the living-room link is 4 m long at 1 m antenna height
        let living = load_scene(&dir.join("living_room.json")).unwrap();
        assert!((living.scene.tx.distance(living.scene.rx) - 4.0).abs() < 1e-12);
        assert_eq!(living.scene.tx.z, 1.0);
        assert_eq!(living.scene.rx.z, 1.0);

        // the three-blocker scenario carries three trajectories
        let three = load_scene(&dir.join("three_blockers.json")).unwrap();
        assert_eq!(three.scene.blockers.len(), 3);
        assert_eq!(three.scene.walls.len(), 2);
    }
}
