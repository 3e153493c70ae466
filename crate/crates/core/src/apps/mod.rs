pub mod baseline;
pub mod game;
pub mod generate;
pub mod meb;
pub mod smooth_max;
