//! CSV readers and writers for incidents, daily weather, events, and
//! holidays.
//!
//! Formats:
//! - incidents: `timestamp,latitude,longitude,category` (ISO-8601 UTC)
//! - weather: `date,<column>,<column>,...` with one row per day
//! - events: `timestamp,latitude,longitude,expected_participants`
//! - holidays: `date,kind`

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub timestamp: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub category: String,
}

/// Daily rows of named weather columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherTable {
    pub columns: Vec<String>,
    pub rows: BTreeMap<NaiveDate, Vec<f64>>,
}

impl WeatherTable {
    pub fn value(&self, date: NaiveDate, column: usize) -> Result<f64> {
        self.rows
            .get(&date)
            .map(|r| r[column])
            .ok_or_else(|| Error::Data(format!("no weather row for {date}")))
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<WeatherTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.columns
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::Data(format!("unknown weather column {n}")))
            })
            .collect::<Result<_>>()?;
        Ok(WeatherTable {
            columns: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|(d, r)| (*d, idx.iter().map(|&i| r[i]).collect()))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub timestamp: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub expected_participants: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolidayRecord {
    pub date: NaiveDate,
    pub kind: String,
}

/// All external inputs of a pipeline run; every part is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalData {
    pub weather: Option<WeatherTable>,
    pub events: Vec<EventRecord>,
    pub holidays: Vec<HolidayRecord>,
}

impl ExternalData {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Distinct holiday kinds in first-appearance order.
    pub fn holiday_kinds(&self) -> Vec<String> {
        let mut kinds = Vec::new();
        for h in &self.holidays {
            if !kinds.contains(&h.kind) {
                kinds.push(h.kind.clone());
            }
        }
        kinds
    }

    pub fn is_holiday(&self, date: NaiveDate, kind: &str) -> bool {
        self.holidays.iter().any(|h| h.date == date && h.kind == kind)
    }
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Data(format!("bad timestamp '{s}': {e}")))
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Data(format!("bad date '{s}': {e}")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Data(format!("bad {what} '{s}': {e}")))
}

pub fn read_incidents_csv(path: &Path) -> Result<Vec<IncidentRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 4 {
            return Err(Error::Data(format!("incident row needs 4 fields, got {}", row.len())));
        }
        out.push(IncidentRecord {
            timestamp: parse_timestamp(&row[0])?,
            latitude: parse_f64(&row[1], "latitude")?,
            longitude: parse_f64(&row[2], "longitude")?,
            category: row[3].to_string(),
        });
    }
    Ok(out)
}

pub fn write_incidents_csv(path: &Path, records: &[IncidentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "latitude", "longitude", "category"])?;
    for r in records {
        w.write_record([
            r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            format!("{}", r.latitude),
            format!("{}", r.longitude),
            r.category.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_weather_csv(path: &Path) -> Result<WeatherTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || &headers[0] != "date" {
        return Err(Error::Data("weather CSV must start with a 'date' column".into()));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut rows = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let date = parse_date(&row[0])?;
        let values: Vec<f64> = (1..row.len())
            .map(|i| parse_f64(&row[i], &format!("weather column {}", columns[i - 1])))
            .collect::<Result<_>>()?;
        if values.len() != columns.len() {
            return Err(Error::Data(format!("weather row for {date} has wrong width")));
        }
        rows.insert(date, values);
    }
    Ok(WeatherTable { columns, rows })
}

pub fn write_weather_csv(path: &Path, table: &WeatherTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date".to_string()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header)?;
    for (date, values) in &table.rows {
        let mut rec = vec![date.format("%Y-%m-%d").to_string()];
        rec.extend(values.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EventRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push(EventRecord {
            timestamp: parse_timestamp(&row[0])?,
            latitude: parse_f64(&row[1], "latitude")?,
            longitude: parse_f64(&row[2], "longitude")?,
            expected_participants: parse_f64(&row[3], "expected_participants")?,
        });
    }
    Ok(out)
}

pub fn write_events_csv(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "latitude", "longitude", "expected_participants"])?;
    for e in events {
        w.write_record([
            e.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            format!("{}", e.latitude),
            format!("{}", e.longitude),
            format!("{}", e.expected_participants),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_holidays_csv(path: &Path) -> Result<Vec<HolidayRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push(HolidayRecord {
            date: parse_date(&row[0])?,
            kind: row[1].to_string(),
        });
    }
    Ok(out)
}

pub fn write_holidays_csv(path: &Path, holidays: &[HolidayRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "kind"])?;
    for h in holidays {
        w.write_record([h.date.format("%Y-%m-%d").to_string(), h.kind.clone()])?;
    }
    w.flush()?;
    Ok(())
}
