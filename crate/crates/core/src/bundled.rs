//! Documents shipped with the crate.

pub const PEDESTRIAN_SPACE: &str = include_str!("../data/pedestrian_space.toml");
pub const DEVICE_MODEL: &str = include_str!("../data/device_model.toml");
pub const PEDESTRIAN_MODES: &str = include_str!("../data/pedestrian_modes.toml");
pub const PEDESTRIAN_FSM: &str = include_str!("../data/pedestrian_fsm.toml");
