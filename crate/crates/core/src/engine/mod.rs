//! Fixed-step numerical machinery shared by both closed loops.

mod history;
mod rk4;
mod tridiag;
mod trajectory;

pub use history::HistoryBuffer;
pub use rk4::rk4_step;
pub use tridiag::{crank_nicolson_heat_step, solve_tridiagonal, RightBoundary};
pub use trajectory::{format_sig17, Field, Sample, Trajectory, CSV_HEADER};
