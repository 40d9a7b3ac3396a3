pub mod analysis;
pub mod corpus;
pub mod encoder;
pub mod evaluation;
pub mod heads;
pub mod linalg;
pub mod model;
pub mod textprep;
pub mod training;
