use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Timelike, Weekday};

use crate::error::{Error, Result};
use crate::series::{csv_err, csv_io, Timestamp};

pub const CALENDAR_COLUMNS: [&str; 9] = [
    "hour",
    "year",
    "month_sin",
    "month_cos",
    "day_of_month",
    "day_of_week",
    "national_holiday",
    "school_holiday",
    "days_to_school",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolidayKind {
    National,
    School,
}

/// National and school holidays over a covered range of years.
#[derive(Debug, Clone, PartialEq)]
pub struct HolidayCalendar {
    national: BTreeSet<NaiveDate>,
    school: BTreeSet<NaiveDate>,
    first_year: i32,
    last_year: i32,
}

impl HolidayCalendar {
    pub fn new(entries: &[(NaiveDate, HolidayKind)], first_year: i32, last_year: i32) -> Self {
        let mut cal = HolidayCalendar {
            national: BTreeSet::new(),
            school: BTreeSet::new(),
            first_year,
            last_year,
        };
        for (d, k) in entries {
            match k {
                HolidayKind::National => cal.national.insert(*d),
                HolidayKind::School => cal.school.insert(*d),
            };
        }
        cal
    }

    /// Coverage defaults to the span of years present in the entries.
    pub fn from_entries(entries: &[(NaiveDate, HolidayKind)]) -> Self {
        let first = entries.iter().map(|(d, _)| d.year()).min().unwrap_or(0);
        let last = entries.iter().map(|(d, _)| d.year()).max().unwrap_or(-1);
        Self::new(entries, first, last)
    }

    pub fn covers(&self, year: i32) -> bool {
        (self.first_year..=self.last_year).contains(&year)
    }

    pub fn coverage(&self) -> (i32, i32) {
        (self.first_year, self.last_year)
    }

    pub fn is_national(&self, d: NaiveDate) -> bool {
        self.national.contains(&d)
    }

    pub fn is_school_holiday(&self, d: NaiveDate) -> bool {
        self.school.contains(&d)
    }

    pub fn is_school_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
            && !self.is_national(d)
            && !self.is_school_holiday(d)
    }

    /// Days until the next school day strictly after `d`.
    pub fn days_to_next_school_day(&self, d: NaiveDate) -> u32 {
        let mut k = 1;
        while !self.is_school_day(d + Duration::days(k as i64)) && k < 400 {
            k += 1;
        }
        k
    }

    pub fn entries(&self) -> Vec<(NaiveDate, HolidayKind)> {
        let mut out: Vec<_> = self
            .national
            .iter()
            .map(|d| (*d, HolidayKind::National))
            .chain(self.school.iter().map(|d| (*d, HolidayKind::School)))
            .collect();
        out.sort_by_key(|(d, k)| (*d, *k == HolidayKind::School));
        out
    }

    /// Reads `date,kind` with kind in {national, school}.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = path.display().to_string();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| csv_err(&file, e))?;
            if rec.len() < 2 {
                return Err(Error::parse(&file, line, "expected date,kind"));
            }
            let d = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d")
                .map_err(|_| Error::parse(&file, line, format!("bad date {:?}", &rec[0])))?;
            let k = match rec[1].trim() {
                "national" => HolidayKind::National,
                "school" => HolidayKind::School,
                other => return Err(Error::parse(&file, line, format!("unknown kind {other:?}"))),
            };
            entries.push((d, k));
        }
        Ok(Self::from_entries(&entries))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["date", "kind"]).map_err(|e| csv_io(path, e))?;
        for (d, k) in self.entries() {
            let kind = match k {
                HolidayKind::National => "national",
                HolidayKind::School => "school",
            };
            w.write_record([d.format("%Y-%m-%d").to_string(), kind.to_string()])
                .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Calendar feature encoder with the normalization constants taken from the training span.
#[derive(Debug, Clone, PartialEq)]
pub struct CalendarEncoder {
    pub holidays: HolidayCalendar,
    pub year0: i32,
    pub year_span: f64,
    /// Largest days-to-next-school-day gap seen in training.
    pub d_max: f64,
}

impl CalendarEncoder {
    pub fn fit(holidays: HolidayCalendar, train_start: &Timestamp, train_end: &Timestamp) -> Self {
        let year0 = train_start.year();
        let last = (*train_end - Duration::seconds(1)).year();
        let mut d_max = 1u32;
        let mut d = train_start.date_naive();
        let end = train_end.date_naive();
        while d < end {
            d_max = d_max.max(holidays.days_to_next_school_day(d));
            d += Duration::days(1);
        }
        CalendarEncoder {
            holidays,
            year0,
            year_span: ((last - year0).max(1)) as f64,
            d_max: d_max as f64,
        }
    }

    pub fn encode(&self, ts: &Timestamp) -> Result<[f64; 9]> {
        if !self.holidays.covers(ts.year()) {
            return Err(Error::OutsideCalendar(crate::series::format_timestamp(ts)));
        }
        let date = ts.date_naive();
        let month_angle = 2.0 * PI * (ts.month0() as f64) / 12.0;
        Ok([
            ts.hour() as f64 / 23.0,
            (ts.year() - self.year0) as f64 / self.year_span,
            month_angle.sin(),
            month_angle.cos(),
            ts.day0() as f64 / 30.0,
            ts.weekday().num_days_from_monday() as f64 / 6.0,
            self.holidays.is_national(date) as u8 as f64,
            self.holidays.is_school_holiday(date) as u8 as f64,
            self.holidays.days_to_next_school_day(date) as f64 / self.d_max,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn encoder() -> CalendarEncoder {
        let cal = HolidayCalendar::new(&[], 2017, 2019);
        let s = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
        let e = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        CalendarEncoder::fit(cal, &s, &e)
    }

    fn month_vec(enc: &CalendarEncoder, m: u32) -> (f64, f64) {
        let v = enc.encode(&Utc.with_ymd_and_hms(2018, m, 1, 0, 0, 0).unwrap()).unwrap();
        (v[2], v[3])
    }

    fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }

    #[test]
    fn december_january_as_close_as_january_february() {
        let enc = encoder();
        let (jan, feb, dec) = (month_vec(&enc, 1), month_vec(&enc, 2), month_vec(&enc, 12));
        assert!((dist(jan, dec) - dist(jan, feb)).abs() < 1e-12);
    }

    #[test]
    fn july_is_opposite_of_january() {
        let (s, c) = month_vec(&encoder(), 7);
        assert!(s.abs() < 1e-15);
        assert_eq!(c, -1.0);
    }

    #[test]
    fn friday_to_monday_is_three_days() {
        // 2018-03-09 is a Friday, no holidays around it.
        let cal = HolidayCalendar::new(&[], 2018, 2018);
        let fri = NaiveDate::from_ymd_opt(2018, 3, 9).unwrap();
        assert_eq!(fri.weekday(), Weekday::Fri);
        assert_eq!(cal.days_to_next_school_day(fri), 3);
        // a national holiday on Monday pushes it to Tuesday
        let mon = NaiveDate::from_ymd_opt(2018, 3, 12).unwrap();
        let cal = HolidayCalendar::new(&[(mon, HolidayKind::National)], 2018, 2018);
        assert_eq!(cal.days_to_next_school_day(fri), 4);
    }

    #[test]
    fn outside_coverage_is_error() {
        let enc = encoder();
        let ts = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        assert!(matches!(enc.encode(&ts), Err(Error::OutsideCalendar(_))));
    }

    #[test]
    fn hour_and_weekday_ranges() {
        let enc = encoder();
        let v = enc.encode(&Utc.with_ymd_and_hms(2018, 1, 7, 23, 0, 0).unwrap()).unwrap();
        assert_eq!(v[0], 1.0); // 23h
        assert_eq!(v[5], 1.0); // Sunday
        assert_eq!(v[1], 1.0);
    }
}
