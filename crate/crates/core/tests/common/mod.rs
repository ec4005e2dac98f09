#![allow(dead_code)]

use std::path::PathBuf;

use crashvol_core::{parse_monthly_csv, MonthlySeries, YearMonth};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn first_window() -> MonthlySeries {
    parse_monthly_csv(data_path("dc_2010_2014.csv")).unwrap()
}

pub fn second_window() -> MonthlySeries {
    parse_monthly_csv(data_path("dc_2015_2019.csv")).unwrap()
}

pub fn both_windows() -> MonthlySeries {
    first_window().merge(&second_window()).unwrap()
}

pub fn ym(year: i32, month: u32) -> YearMonth {
    YearMonth::new(year, month).unwrap()
}
