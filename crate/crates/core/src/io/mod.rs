//! Text formats: the CSV dataset layout, neighbor schedules, and the JSON
//! run record.

pub mod dataset;
pub mod record;
pub mod schedule;

pub use dataset::{read_dataset, write_dataset, CsvOptions};
pub use record::RunRecord;
pub use schedule::parse_neighbor_schedule;
