pub mod attention;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod checkpoint;
pub mod meta;
pub mod metrics;
pub mod params;
pub mod path_encoder;
pub mod tape;
