//! The reference restaurant scenario, as shipped configuration files.

use dalia_core::{load_snapshot, DirectorySnapshot};

use crate::server::ServerConfig;

pub const FOOD_CONFIG: &str = include_str!("../fixtures/food.json");
pub const MAP_CONFIG: &str = include_str!("../fixtures/map.json");
pub const SCENARIO_DIRECTORY: &str = include_str!("../fixtures/directory.json");

pub fn food_config() -> ServerConfig {
    ServerConfig::from_json(FOOD_CONFIG).expect("bundled food config is valid")
}

pub fn map_config() -> ServerConfig {
    ServerConfig::from_json(MAP_CONFIG).expect("bundled map config is valid")
}

pub fn scenario_directory() -> DirectorySnapshot {
    load_snapshot(SCENARIO_DIRECTORY.as_bytes()).expect("bundled directory is valid")
}
