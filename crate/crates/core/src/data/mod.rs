//! Multi-source observed data `(S, L, A*, M, Y*)` under partial observability.

mod csv_io;
mod spec;
mod table;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use spec::{ColumnSpec, Kind, ObservabilityMode, Role, TableSpec};
pub use table::{Columns, Covariate, ObservationTable, Row};
