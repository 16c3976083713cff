//! Output writers and the configuration format.

mod config;
mod csv;
mod vtk;

pub use config::{echo_config, load_config, parse_config, validate_config, ConfigError};
pub use csv::{write_timeseries, TimeseriesWriter, TIMESERIES_COLUMNS};
pub use vtk::{read_vtk, vtk_string, write_vtk, VtkDocument, VtkError, VTK_TETRA, VTK_TRIANGLE};
