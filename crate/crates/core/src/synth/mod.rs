//! Seeded synthetic data: GNSS scenarios, pseudorange geometry and floor
//! layouts with walked trajectories.

mod geometry;
mod layout;
mod scenario;

use thiserror::Error;

pub use geometry::{pseudorange, random_geometry, Pseudorange, SatelliteGeometry, EARTH_RADIUS, ORBIT_HEIGHT, SPEED_OF_LIGHT};
pub use layout::{generate_trajectories, GeneratedLayout, LayoutSpec, LandmarkSpec};
pub use scenario::{generate_labeled_dataset, ClassProfile, Dist, GeneratedScenario, Recording, ScenarioSpec, LATENT_NAMES};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("non-physical range {0} m")]
    NonPhysical(f64),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}
