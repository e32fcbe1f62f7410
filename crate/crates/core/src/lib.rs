//! Clustering-based probabilistic I/O scheduling for burst-buffer equipped
//! HPC platforms, with a deterministic discrete-event simulator and two
//! baseline schedulers.

pub mod cluster;
pub mod error;
pub mod load;
pub mod model;
pub mod partition;
pub mod scheduler;
pub mod sim;
pub mod updater;
