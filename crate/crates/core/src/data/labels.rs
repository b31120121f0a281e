use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use chrono::{Months, NaiveDate};

use crate::data::panel::{Instance, Panel, RowKey};
use crate::error::{Error, Result};

/// One activist engagement. `end == None` means still running.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignEvent {
    pub company_id: String,
    pub start: NaiveDate,
    pub end: Option<NaiveDate>,
}

impl CampaignEvent {
    pub fn new(company_id: impl Into<String>, start: NaiveDate, end: Option<NaiveDate>) -> Result<Self> {
        let company_id = company_id.into();
        if let Some(e) = end {
            if e < start {
                return Err(Error::invalid(format!(
                    "campaign for `{company_id}` ends ({e}) before it starts ({start})"
                )));
            }
        }
        Ok(CampaignEvent {
            company_id,
            start,
            end,
        })
    }
}

pub type SnapshotDates = HashMap<RowKey, NaiveDate>;

#[derive(Debug, Clone)]
pub struct LabelingOutcome {
    pub panel: Panel,
    /// Rows dropped because the snapshot fell inside a running campaign.
    pub excluded_rows: usize,
    /// Campaigns whose company never appears in the panel.
    pub unknown_company_campaigns: usize,
}

fn parse_date(raw: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        row,
        message: format!("bad ISO-8601 date `{raw}`: {e}"),
    })
}

/// Campaign CSV: `company_id,start_date[,end_date]`.
pub fn load_campaigns(path: impl AsRef<Path>) -> Result<Vec<CampaignEvent>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_campaigns(file)
}

pub fn read_campaigns<R: std::io::Read>(reader: R) -> Result<Vec<CampaignEvent>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = pos("company_id").ok_or_else(|| Error::Schema("missing `company_id`".into()))?;
    let start_col = pos("start_date").ok_or_else(|| Error::Schema("missing `start_date`".into()))?;
    let end_col = pos("end_date");
    if let Some(h) = headers
        .iter()
        .find(|h| !["company_id", "start_date", "end_date"].contains(&h.trim()))
    {
        return Err(Error::Schema(format!("unknown campaign column `{h}`")));
    }
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec?;
        let start = parse_date(&rec[start_col], line)?;
        let end = match end_col.map(|c| rec.get(c).unwrap_or("").trim()) {
            None | Some("") => None,
            Some(s) => Some(parse_date(s, line)?),
        };
        let ev = CampaignEvent::new(rec[id_col].trim(), start, end).map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        out.push(ev);
    }
    Ok(out)
}

/// December 31 of each row's year.
pub fn year_end_snapshots(panel: &Panel) -> SnapshotDates {
    panel
        .rows()
        .iter()
        .map(|r| (r.key(), year_end(r.year)))
        .collect()
}

fn year_end(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year-end date")
}

/// Explicit snapshot CSV: `company_id,year,snapshot_date`.
pub fn load_snapshots(path: impl AsRef<Path>) -> Result<SnapshotDates> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("snapshot file missing `{name}`")))
    };
    let (id, yr, dt) = (pos("company_id")?, pos("year")?, pos("snapshot_date")?);
    let mut out = SnapshotDates::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec?;
        let year = rec[yr].trim().parse().map_err(|_| Error::Parse {
            row: line,
            message: format!("bad year `{}`", &rec[yr]),
        })?;
        let key = RowKey {
            company_id: rec[id].trim().to_string(),
            year,
        };
        out.insert(key, parse_date(&rec[dt], line)?);
    }
    Ok(out)
}

/// Label each row 1 when one of its company's campaigns starts within the
/// twelve months after the snapshot (start in `(snapshot, snapshot + 12m]`).
/// Rows whose snapshot lies inside a campaign interval `[start, end]` are
/// removed. Open-ended campaigns run through December 31 of the last year
/// observed in the panel.
pub fn assign_labels(
    panel: &Panel,
    campaigns: &[CampaignEvent],
    snapshots: &SnapshotDates,
) -> Result<LabelingOutcome> {
    let mut seen = HashSet::new();
    for r in panel.rows() {
        if !seen.insert((r.company_id.as_str(), r.year)) {
            return Err(Error::invalid(format!("duplicate row {}", r.key())));
        }
    }
    let last_year = panel.rows().iter().map(|r| r.year).max();
    let companies: HashSet<&str> = panel.rows().iter().map(|r| r.company_id.as_str()).collect();

    let mut by_company: HashMap<&str, Vec<(NaiveDate, NaiveDate)>> = HashMap::new();
    let mut unknown = 0;
    for c in campaigns {
        if !companies.contains(c.company_id.as_str()) {
            unknown += 1;
            continue;
        }
        let end = match c.end {
            Some(e) => e,
            None => last_year.map_or(c.start, |y| year_end(y).max(c.start)),
        };
        by_company
            .entry(c.company_id.as_str())
            .or_default()
            .push((c.start, end));
    }

    let mut rows: Vec<Instance> = Vec::with_capacity(panel.len());
    let mut excluded = 0;
    for r in panel.rows() {
        let key = r.key();
        let snap = *snapshots
            .get(&key)
            .ok_or_else(|| Error::invalid(format!("no snapshot date for row {key}")))?;
        let horizon = snap
            .checked_add_months(Months::new(12))
            .ok_or_else(|| Error::invalid(format!("snapshot {snap} out of range")))?;
        let events = by_company.get(r.company_id.as_str()).map_or(&[][..], |v| v);
        if events.iter().any(|&(s, e)| s <= snap && snap <= e) {
            excluded += 1;
            continue;
        }
        let targeted = events.iter().any(|&(s, _)| snap < s && s <= horizon);
        rows.push(Instance {
            label: Some(targeted),
            ..r.clone()
        });
    }
    Ok(LabelingOutcome {
        panel: Panel::from_parts_unchecked(panel.schema_arc(), rows),
        excluded_rows: excluded,
        unknown_company_campaigns: unknown,
    })
}
