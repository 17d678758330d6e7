//! Visual chunking: candidate chunk generation by region growing over
//! superpixels, and diverse list prediction by imitating a greedy matching
//! oracle, with exact brute-force harnesses for every guarantee.

pub mod assignment;
pub mod features;
pub mod grower;
pub mod imitation;
pub mod learner;
pub mod metrics;
pub mod pipeline;
pub mod rational;
pub mod report;
pub mod scene;
pub mod synth;
pub mod verify;
