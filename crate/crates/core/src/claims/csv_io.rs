//! Row-per-payment CSV format.
//!
//! Header: `claim_id,claim_type,accident_date,reporting_date,payment_date,amount`.
//! A claim with several payments spans several rows; a claim without payments is
//! one row with empty `payment_date` and `amount`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use super::{ClaimRecord, ClaimType, PaymentEvent, Portfolio};
use crate::error::{Error, Result};
use crate::time::Day;

const HEADER: [&str; 6] = ["claim_id", "claim_type", "accident_date", "reporting_date", "payment_date", "amount"];

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Overrides the cutoff otherwise taken as the latest date seen.
    pub data_cutoff: Option<Day>,
    /// Fail on the first batch of rejected rows instead of dropping them.
    pub strict: bool,
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Diagnostics collected while ingesting.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub rejected: Vec<RowError>,
    /// Rows with negative amounts (recoveries); kept as data.
    pub negative_amount_lines: Vec<u64>,
    /// Rows that exactly repeat an earlier row; kept, since equal same-day payments happen.
    pub duplicate_row_lines: Vec<u64>,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty() && self.negative_amount_lines.is_empty() && self.duplicate_row_lines.is_empty()
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.rejected {
            writeln!(f, "error: {e}")?;
        }
        for l in &self.negative_amount_lines {
            writeln!(f, "warning: line {l}: negative payment amount (recovery)")?;
        }
        for l in &self.duplicate_row_lines {
            writeln!(f, "warning: line {l}: exact duplicate of an earlier row")?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub portfolio: Portfolio,
    pub report: IngestReport,
}

struct Draft {
    claim_type: ClaimType,
    accident: Day,
    reporting: Day,
    payments: Vec<PaymentEvent>,
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<(String, ClaimType, Day, Day, Option<PaymentEvent>), String> {
    if rec.len() != HEADER.len() {
        return Err(format!("expected {} fields, found {}", HEADER.len(), rec.len()));
    }
    let id = rec[0].trim();
    if id.is_empty() {
        return Err("empty claim_id".into());
    }
    let claim_type: ClaimType = rec[1].parse().map_err(|e: Error| e.to_string())?;
    let accident = Day::parse_iso(&rec[2]).map_err(|e| e.to_string())?;
    let reporting = Day::parse_iso(&rec[3]).map_err(|e| e.to_string())?;
    if reporting < accident {
        return Err(format!("reporting date {reporting} before accident date {accident}"));
    }
    let (pd, amt) = (rec[4].trim(), rec[5].trim());
    let payment = match (pd.is_empty(), amt.is_empty()) {
        (true, true) => None,
        (false, false) => {
            let date = Day::parse_iso(pd).map_err(|e| e.to_string())?;
            let amount: f64 = amt.parse().map_err(|_| format!("bad amount '{amt}'"))?;
            if !amount.is_finite() || amount == 0.0 {
                return Err(format!("payment amount must be finite and non-zero, got '{amt}'"));
            }
            if date < reporting {
                return Err(format!("payment date {date} before reporting date {reporting}"));
            }
            Some(PaymentEvent { date, amount })
        }
        _ => return Err("payment_date and amount must both be present or both empty".into()),
    };
    Ok((id.to_string(), claim_type, accident, reporting, payment))
}

/// Reads a portfolio from CSV.
///
/// Invalid rows are rejected with their line number. In strict mode any
/// rejection fails the whole ingestion; otherwise rejected rows are dropped and
/// reported. Rows whose accident or reporting date disagree with the first row of
/// the same claim are rejected as inconsistent.
pub fn ingest_csv<R: Read>(source: R, options: &IngestOptions) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Data(format!(
            "line 1: expected header '{}', found '{}'",
            HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut report = IngestReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut drafts: HashMap<String, Draft> = HashMap::new();
    let mut seen_rows: HashSet<Vec<String>> = HashSet::new();
    let mut max_date = None::<Day>;

    for result in reader.records() {
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let (id, claim_type, accident, reporting, payment) = match parse_row(&rec) {
            Ok(v) => v,
            Err(message) => {
                report.rejected.push(RowError { line, message });
                continue;
            }
        };
        if let Some(d) = drafts.get(&id) {
            if d.claim_type != claim_type || d.accident != accident || d.reporting != reporting {
                report.rejected.push(RowError {
                    line,
                    message: format!("claim {id}: type or dates inconsistent with its earlier rows"),
                });
                continue;
            }
        }
        if !seen_rows.insert(rec.iter().map(str::to_string).collect()) {
            report.duplicate_row_lines.push(line);
        }
        let draft = drafts.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Draft { claim_type, accident, reporting, payments: Vec::new() }
        });
        let mut latest = reporting;
        if let Some(p) = payment {
            if p.amount < 0.0 {
                report.negative_amount_lines.push(line);
            }
            latest = latest.max(p.date);
            draft.payments.push(p);
        }
        max_date = Some(max_date.map_or(latest, |m: Day| m.max(latest)));
    }

    if options.strict && !report.rejected.is_empty() {
        let lines: Vec<String> = report.rejected.iter().map(ToString::to_string).collect();
        return Err(Error::Data(lines.join("; ")));
    }

    let mut claims = Vec::with_capacity(order.len());
    for id in order {
        let d = drafts.remove(&id).expect("draft exists for every id");
        claims.push(ClaimRecord::new(id, d.claim_type, d.accident, d.reporting, d.payments)?);
    }
    let cutoff = match (options.data_cutoff, max_date) {
        (Some(c), _) => c,
        (None, Some(m)) => m,
        (None, None) => Day::EPOCH,
    };
    let portfolio = Portfolio::new(claims, cutoff)?;
    Ok(Ingested { portfolio, report })
}

fn format_amount(x: f64) -> String {
    // Shortest representation that parses back to the same value.
    format!("{x}")
}

/// Writes a portfolio in the ingestion format.
pub fn write_csv<W: Write>(p: &Portfolio, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HEADER)?;
    for c in p.claims() {
        let (acc, rep) = (c.accident_date.to_string(), c.reporting_date.to_string());
        if c.payments.is_empty() {
            w.write_record([c.claim_id.as_str(), c.claim_type.as_str(), &acc, &rep, "", ""])?;
        }
        for pay in &c.payments {
            w.write_record([
                c.claim_id.as_str(),
                c.claim_type.as_str(),
                &acc,
                &rep,
                &pay.date.to_string(),
                &format_amount(pay.amount),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
