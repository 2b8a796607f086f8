pub mod qber_scan;
pub mod renyi;
pub mod simulate;
pub mod timetag;
