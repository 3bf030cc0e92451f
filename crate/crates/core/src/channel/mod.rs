//! Propagation model: close-in path loss, correlated shadowing, sparse
//! directional clusters, penetration and blockage.

pub mod clusters;
pub mod composite;
pub mod pathloss;
pub mod penetration;
pub mod shadowing;

pub use clusters::{sample_clusters, sample_clusters_with, Angles, Cluster, ClusterModel, ClusterSet};
pub use composite::{cluster_gains, ClusterGain, CompositeGain, Environment, Shadowing};
pub use pathloss::{free_space_db, path_loss_db, Band, LinkType, PathLossParams, UseCase};
pub use penetration::{penetration_loss_db, Material};
pub use shadowing::ShadowField;
