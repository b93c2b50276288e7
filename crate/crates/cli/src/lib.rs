//! Scenario simulator: seeds a database, runs whole timetables through the
//! back-end and the recognition engine under virtual time, and compares
//! the resulting attendance with an oracle read off the scenario script.

pub mod oracle;
pub mod report;
pub mod run;

pub use oracle::oracle_report;
pub use report::{diff_tables, RunReport};
pub use run::{run_scenario, Mode, RunOptions};
