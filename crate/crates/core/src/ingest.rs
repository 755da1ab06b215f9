//! Transaction ingestion and ownership-spell reconstruction.
//!
//! A parcel sold on dates `d1 < d2 < ... < dn` yields closed spells
//! `[d1, d2), ..., [d(n-1), dn)` and one right-censored spell
//! `[dn, observation_end)`. Closed spells carry the terms of the sale that
//! ended them, which is what [`filter_genuine`] inspects.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARLIEST_SALE: NaiveDate = match NaiveDate::from_ymd_opt(1984, 1, 1) {
    Some(d) => d,
    None => panic!("valid date"),
};

pub fn default_observation_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 31).expect("valid date")
}

pub fn default_covid_cutoff() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 11).expect("valid date")
}

/// The eight neighborhood labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Neighborhood {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl Neighborhood {
    pub const ALL: [Neighborhood; 8] = [
        Neighborhood::A,
        Neighborhood::B,
        Neighborhood::C,
        Neighborhood::D,
        Neighborhood::E,
        Neighborhood::F,
        Neighborhood::G,
        Neighborhood::H,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Neighborhood::A => "A",
            Neighborhood::B => "B",
            Neighborhood::C => "C",
            Neighborhood::D => "D",
            Neighborhood::E => "E",
            Neighborhood::F => "F",
            Neighborhood::G => "G",
            Neighborhood::H => "H",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Neighborhood {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Neighborhood::A),
            "B" => Ok(Neighborhood::B),
            "C" => Ok(Neighborhood::C),
            "D" => Ok(Neighborhood::D),
            "E" => Ok(Neighborhood::E),
            "F" => Ok(Neighborhood::F),
            "G" => Ok(Neighborhood::G),
            "H" => Ok(Neighborhood::H),
            other => Err(format!("unknown neighborhood {other:?} (expected A-H)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeedKind {
    Warranty,
    Quitclaim,
    Trustee,
    Other,
}

impl FromStr for DeedKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "warranty" => Ok(DeedKind::Warranty),
            "quitclaim" => Ok(DeedKind::Quitclaim),
            "trustee" => Ok(DeedKind::Trustee),
            "other" => Ok(DeedKind::Other),
            other => Err(format!("unknown deed kind {other:?}")),
        }
    }
}

/// One raw sale event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub parcel_id: String,
    pub neighborhood: Neighborhood,
    pub sale_date: NaiveDate,
    pub price: f64,
    pub deed_kind: DeedKind,
    pub seller_is_builder: bool,
    pub appraisal: Option<f64>,
    pub sqft: Option<f64>,
}

/// One owner's tenure on one parcel.
///
/// Invariant: `censored == exit_date.is_none()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnershipSpell {
    pub parcel_id: String,
    pub neighborhood: Neighborhood,
    pub entry_date: NaiveDate,
    pub exit_date: Option<NaiveDate>,
    pub duration_days: u32,
    pub censored: bool,
    pub genuine: bool,
    /// Set when the closing sale fell on the same date as the opening one.
    pub duplicate: bool,
    pub exit_price: Option<f64>,
    pub exit_deed_kind: Option<DeedKind>,
    pub exit_seller_is_builder: Option<bool>,
    pub appraisal: Option<f64>,
}

impl OwnershipSpell {
    pub fn is_event(&self) -> bool {
        !self.censored
    }

    pub fn duration_years(&self) -> f64 {
        f64::from(self.duration_days) / crate::scalar::DAYS_PER_YEAR
    }
}

/// Per-row diagnostic from [`parse_transactions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the input file (header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub records: Vec<TransactionRecord>,
    pub errors: Vec<RowError>,
}

/// Canonical column names in input order.
pub const TRANSACTION_COLUMNS: [&str; 8] = [
    "parcel_id",
    "neighborhood",
    "sale_date",
    "price",
    "deed_kind",
    "seller_is_builder",
    "appraisal",
    "sqft",
];

/// Maps a foreign export onto the canonical transaction schema.
///
/// Loaded from a flat `key = value` file:
///
/// ```text
/// # canonical column = native header
/// column.parcel_id = PARCELID
/// column.sale_date = SALEDATE
/// date_format = %m/%d/%Y
/// # native deed code = canonical deed kind
/// deed.WD = warranty
/// deed.QC = quitclaim
/// true_values = Y, YES, 1, TRUE
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaAdapter {
    pub columns: HashMap<String, String>,
    pub date_format: String,
    pub deed_codes: HashMap<String, DeedKind>,
    pub true_values: Vec<String>,
    pub false_values: Vec<String>,
    pub neighborhood_codes: HashMap<String, Neighborhood>,
}

impl Default for SchemaAdapter {
    fn default() -> Self {
        SchemaAdapter {
            columns: HashMap::new(),
            date_format: "%Y-%m-%d".to_string(),
            deed_codes: HashMap::new(),
            true_values: ["true", "1", "yes", "y", "t"].map(String::from).to_vec(),
            false_values: ["false", "0", "no", "n", "f", ""].map(String::from).to_vec(),
            neighborhood_codes: HashMap::new(),
        }
    }
}

impl SchemaAdapter {
    pub fn parse(text: &str) -> Result<Self> {
        let mut adapter = SchemaAdapter::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("adapter line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(col) = key.strip_prefix("column.") {
                if !TRANSACTION_COLUMNS.contains(&col) {
                    return Err(Error::Config(format!(
                        "adapter line {}: unknown canonical column {col:?}",
                        lineno + 1
                    )));
                }
                adapter.columns.insert(col.to_string(), value.to_string());
            } else if let Some(code) = key.strip_prefix("deed.") {
                let kind = value
                    .parse::<DeedKind>()
                    .map_err(|e| Error::Config(format!("adapter line {}: {e}", lineno + 1)))?;
                adapter.deed_codes.insert(code.to_ascii_lowercase(), kind);
            } else if let Some(code) = key.strip_prefix("neighborhood.") {
                let n = value
                    .parse::<Neighborhood>()
                    .map_err(|e| Error::Config(format!("adapter line {}: {e}", lineno + 1)))?;
                adapter.neighborhood_codes.insert(code.to_ascii_lowercase(), n);
            } else {
                match key {
                    "date_format" => adapter.date_format = value.to_string(),
                    "true_values" => adapter.true_values = split_list(value),
                    "false_values" => adapter.false_values = split_list(value),
                    _ => {
                        return Err(Error::Config(format!(
                            "adapter line {}: unknown key {key:?}",
                            lineno + 1
                        )))
                    }
                }
            }
        }
        Ok(adapter)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    fn header_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.columns.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    fn deed(&self, raw: &str) -> std::result::Result<DeedKind, String> {
        match self.deed_codes.get(&raw.trim().to_ascii_lowercase()) {
            Some(kind) => Ok(*kind),
            None => raw.parse(),
        }
    }

    fn neighborhood(&self, raw: &str) -> std::result::Result<Neighborhood, String> {
        match self.neighborhood_codes.get(&raw.trim().to_ascii_lowercase()) {
            Some(n) => Ok(*n),
            None => raw.parse(),
        }
    }

    fn boolean(&self, raw: &str) -> std::result::Result<bool, String> {
        let v = raw.trim().to_ascii_lowercase();
        if self.true_values.iter().any(|t| t.eq_ignore_ascii_case(&v)) {
            Ok(true)
        } else if self.false_values.iter().any(|f| f.eq_ignore_ascii_case(&v)) {
            Ok(false)
        } else {
            Err(format!("unrecognised boolean {raw:?}"))
        }
    }
}

fn split_list(value: &str) -> Vec<String> {
    value.split(',').map(|s| s.trim().to_ascii_lowercase()).collect()
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub observation_end: NaiveDate,
    pub adapter: SchemaAdapter,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            observation_end: default_observation_end(),
            adapter: SchemaAdapter::default(),
        }
    }
}

/// Parses a transaction table. Malformed rows are reported, never dropped
/// silently; a missing required header is fatal.
pub fn parse_transactions<R: Read>(reader: R, opts: &ParseOptions) -> Result<ParseReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let adapter = &opts.adapter;

    let mut index = [usize::MAX; 8];
    for (slot, canonical) in TRANSACTION_COLUMNS.iter().enumerate() {
        let name = adapter.header_for(canonical);
        match headers.iter().position(|h| h == name) {
            Some(i) => index[slot] = i,
            // appraisal and sqft are optional columns
            None if slot >= 6 => {}
            None => {
                return Err(Error::InvalidInput(format!(
                    "missing required column {name:?} (canonical {canonical:?})"
                )))
            }
        }
    }

    let mut report = ParseReport::default();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                report.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, &index, opts) {
            Ok(rec) => report.records.push(rec),
            Err(message) => report.errors.push(RowError { line, message }),
        }
    }
    Ok(report)
}

pub fn parse_transactions_file(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<ParseReport> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    parse_transactions(std::io::BufReader::new(file), opts)
}

/// Writes records in the canonical schema, readable with default
/// [`ParseOptions`].
pub fn write_transactions<W: Write>(writer: W, records: &[TransactionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRANSACTION_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    for r in records {
        w.write_record([
            r.parcel_id.clone(),
            r.neighborhood.label().to_string(),
            r.sale_date.format("%Y-%m-%d").to_string(),
            format!("{:.2}", r.price),
            format!("{:?}", r.deed_kind).to_ascii_lowercase(),
            r.seller_is_builder.to_string(),
            opt(r.appraisal),
            opt(r.sqft),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<transaction table>", e))?;
    Ok(())
}

fn parse_row(
    row: &csv::StringRecord,
    index: &[usize; 8],
    opts: &ParseOptions,
) -> std::result::Result<TransactionRecord, String> {
    let field = |slot: usize| -> Option<&str> {
        if index[slot] == usize::MAX {
            None
        } else {
            row.get(index[slot])
        }
    };
    let required = |slot: usize| -> std::result::Result<&str, String> {
        field(slot).ok_or_else(|| format!("missing field {}", TRANSACTION_COLUMNS[slot]))
    };
    let adapter = &opts.adapter;

    let parcel_id = required(0)?.to_string();
    if parcel_id.is_empty() {
        return Err("empty parcel_id".into());
    }
    let neighborhood = adapter.neighborhood(required(1)?)?;
    let raw_date = required(2)?;
    let sale_date = NaiveDate::parse_from_str(raw_date, &adapter.date_format)
        .map_err(|e| format!("sale_date {raw_date:?}: {e}"))?;
    if sale_date < EARLIEST_SALE || sale_date > opts.observation_end {
        return Err(format!(
            "sale_date {sale_date} outside [{EARLIEST_SALE}, {}]",
            opts.observation_end
        ));
    }
    let price = parse_money(required(3)?).map_err(|e| format!("price: {e}"))?;
    let deed_kind = adapter.deed(required(4)?)?;
    let seller_is_builder = adapter.boolean(required(5)?)?;
    let appraisal = match field(6) {
        Some(s) if !s.is_empty() => Some(parse_money(s).map_err(|e| format!("appraisal: {e}"))?),
        _ => None,
    };
    let sqft = match field(7) {
        Some(s) if !s.is_empty() => {
            let v: f64 = s.parse().map_err(|_| format!("sqft {s:?} is not a number"))?;
            if !(v > 0.0) {
                return Err(format!("sqft {v} must be positive"));
            }
            Some(v)
        }
        _ => None,
    };
    Ok(TransactionRecord {
        parcel_id,
        neighborhood,
        sale_date,
        price,
        deed_kind,
        seller_is_builder,
        appraisal,
        sqft,
    })
}

fn parse_money(s: &str) -> std::result::Result<f64, String> {
    let cleaned: String = s.chars().filter(|c| !matches!(c, '$' | ',' | ' ')).collect();
    let v: f64 = cleaned.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("{v} must be a non-negative amount"));
    }
    Ok(v)
}

/// Reconstructs ownership spells, one parcel at a time.
pub fn build_spells(records: &[TransactionRecord], observation_end: NaiveDate) -> Vec<OwnershipSpell> {
    let mut by_parcel: BTreeMap<&str, Vec<&TransactionRecord>> = BTreeMap::new();
    for r in records {
        by_parcel.entry(r.parcel_id.as_str()).or_default().push(r);
    }

    let mut spells = Vec::with_capacity(records.len());
    for (_, mut sales) in by_parcel {
        sales.sort_by_key(|s| s.sale_date);
        for pair in sales.windows(2) {
            let (open, close) = (pair[0], pair[1]);
            let days = (close.sale_date - open.sale_date).num_days();
            spells.push(OwnershipSpell {
                parcel_id: open.parcel_id.clone(),
                neighborhood: open.neighborhood,
                entry_date: open.sale_date,
                exit_date: Some(close.sale_date),
                duration_days: days.max(1) as u32,
                censored: false,
                genuine: true,
                duplicate: days == 0,
                exit_price: Some(close.price),
                exit_deed_kind: Some(close.deed_kind),
                exit_seller_is_builder: Some(close.seller_is_builder),
                appraisal: open.appraisal,
            });
        }
        let last = sales.last().expect("non-empty group");
        let days = (observation_end - last.sale_date).num_days();
        spells.push(OwnershipSpell {
            parcel_id: last.parcel_id.clone(),
            neighborhood: last.neighborhood,
            entry_date: last.sale_date,
            exit_date: None,
            duration_days: days.max(1) as u32,
            censored: true,
            genuine: true,
            duplicate: false,
            exit_price: None,
            exit_deed_kind: None,
            exit_seller_is_builder: None,
            appraisal: last.appraisal,
        });
    }
    spells
}

/// Rules that mark a closed spell as a legal transfer rather than a move-out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenuineFilterPolicy {
    pub builder_max_days: u32,
    pub exclude_zero_price: bool,
    pub exclude_quitclaim: bool,
    pub exclude_trustee: bool,
}

impl Default for GenuineFilterPolicy {
    fn default() -> Self {
        GenuineFilterPolicy {
            builder_max_days: 548,
            exclude_zero_price: true,
            exclude_quitclaim: true,
            exclude_trustee: true,
        }
    }
}

impl GenuineFilterPolicy {
    pub fn is_genuine(&self, spell: &OwnershipSpell) -> bool {
        if spell.censored {
            return true;
        }
        if self.exclude_zero_price && spell.exit_price == Some(0.0) {
            return false;
        }
        match spell.exit_deed_kind {
            Some(DeedKind::Quitclaim) if self.exclude_quitclaim => return false,
            Some(DeedKind::Trustee) if self.exclude_trustee => return false,
            _ => {}
        }
        !(spell.exit_seller_is_builder == Some(true) && spell.duration_days <= self.builder_max_days)
    }
}

/// Sets the `genuine` flag on every spell. Idempotent.
pub fn filter_genuine(spells: &[OwnershipSpell], policy: &GenuineFilterPolicy) -> Vec<OwnershipSpell> {
    spells
        .iter()
        .map(|s| OwnershipSpell {
            genuine: policy.is_genuine(s),
            ..s.clone()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSegmentation {
    pub cutoff_date: NaiveDate,
    pub observation_end: NaiveDate,
}

impl Default for PeriodSegmentation {
    fn default() -> Self {
        PeriodSegmentation {
            cutoff_date: default_covid_cutoff(),
            observation_end: default_observation_end(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Pre,
    Post,
}

#[derive(Debug, Clone, Default)]
pub struct PeriodSplit {
    pub pre: Vec<OwnershipSpell>,
    pub post: Vec<OwnershipSpell>,
}

impl PeriodSegmentation {
    /// Which period(s) a spell belongs to.
    pub fn periods(&self, spell: &OwnershipSpell) -> (bool, bool) {
        let starts_before = spell.entry_date < self.cutoff_date;
        let open_at_cutoff = match spell.exit_date {
            Some(exit) => exit > self.cutoff_date,
            None => true,
        };
        (starts_before, !starts_before || open_at_cutoff)
    }
}

/// Splits spells at the cutoff.
///
/// A spell straddling the cutoff appears in both sets: re-censored at the
/// cutoff in `pre`, unchanged in `post`.
pub fn segment_periods(spells: &[OwnershipSpell], seg: &PeriodSegmentation) -> Result<PeriodSplit> {
    if seg.cutoff_date >= seg.observation_end {
        return Err(Error::Config(format!(
            "cutoff {} must precede observation end {}",
            seg.cutoff_date, seg.observation_end
        )));
    }
    if let Some(first) = spells.iter().map(|s| s.entry_date).min() {
        if seg.cutoff_date <= first {
            return Err(Error::Config(format!(
                "cutoff {} precedes the first observed entry {first}",
                seg.cutoff_date
            )));
        }
    }

    let mut split = PeriodSplit::default();
    for s in spells {
        let (in_pre, in_post) = seg.periods(s);
        if in_pre {
            let closed_before = matches!(s.exit_date, Some(exit) if exit <= seg.cutoff_date);
            if closed_before {
                split.pre.push(s.clone());
            } else {
                let days = (seg.cutoff_date - s.entry_date).num_days().max(1) as u32;
                split.pre.push(OwnershipSpell {
                    exit_date: None,
                    duration_days: days,
                    censored: true,
                    exit_price: None,
                    exit_deed_kind: None,
                    exit_seller_is_builder: None,
                    ..s.clone()
                });
            }
        }
        if in_post {
            split.post.push(s.clone());
        }
    }
    Ok(split)
}

/// Counts reported alongside the spell table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub records: usize,
    pub rejected_rows: usize,
    pub rejects: Vec<RowError>,
    pub parcels: usize,
    pub spells: usize,
    pub closed_spells: usize,
    pub censored_spells: usize,
    pub genuine_closed_spells: usize,
    pub non_genuine_spells: usize,
    pub duplicate_sales: usize,
}

impl IngestSummary {
    pub fn new(report: &ParseReport, spells: &[OwnershipSpell]) -> Self {
        let parcels = spells
            .iter()
            .map(|s| s.parcel_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        IngestSummary {
            records: report.records.len(),
            rejected_rows: report.errors.len(),
            rejects: report.errors.clone(),
            parcels,
            spells: spells.len(),
            closed_spells: spells.iter().filter(|s| !s.censored).count(),
            censored_spells: spells.iter().filter(|s| s.censored).count(),
            genuine_closed_spells: spells.iter().filter(|s| !s.censored && s.genuine).count(),
            non_genuine_spells: spells.iter().filter(|s| !s.genuine).count(),
            duplicate_sales: spells.iter().filter(|s| s.duplicate).count(),
        }
    }
}

pub fn write_spells<W: Write>(writer: W, spells: &[OwnershipSpell]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in spells {
        wtr.serialize(s)?;
    }
    wtr.flush().map_err(|e| Error::io("<spell table>", e))?;
    Ok(())
}

pub fn read_spells<R: Read>(reader: R) -> Result<Vec<OwnershipSpell>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let spell: OwnershipSpell = row?;
        if spell.censored != spell.exit_date.is_none() {
            return Err(Error::InvalidInput(format!(
                "spell on parcel {} has censored={} but exit_date={:?}",
                spell.parcel_id, spell.censored, spell.exit_date
            )));
        }
        out.push(spell);
    }
    Ok(out)
}

pub fn read_spells_file(path: impl AsRef<Path>) -> Result<Vec<OwnershipSpell>> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    read_spells(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn sale(parcel: &str, date: NaiveDate) -> TransactionRecord {
        TransactionRecord {
            parcel_id: parcel.into(),
            neighborhood: Neighborhood::A,
            sale_date: date,
            price: 300_000.0,
            deed_kind: DeedKind::Warranty,
            seller_is_builder: false,
            appraisal: None,
            sqft: None,
        }
    }

    fn closed(days: u32) -> OwnershipSpell {
        OwnershipSpell {
            parcel_id: "p".into(),
            neighborhood: Neighborhood::A,
            entry_date: d(2000, 1, 1),
            exit_date: Some(d(2000, 1, 1) + chrono::Duration::days(days.into())),
            duration_days: days,
            censored: false,
            genuine: true,
            duplicate: false,
            exit_price: Some(350_000.0),
            exit_deed_kind: Some(DeedKind::Warranty),
            exit_seller_is_builder: Some(false),
            appraisal: None,
        }
    }

    const HEADER: &str = "parcel_id,neighborhood,sale_date,price,deed_kind,seller_is_builder,appraisal,sqft\n";

    #[test]
    fn header_only_is_empty() {
        let rep = parse_transactions(HEADER.as_bytes(), &ParseOptions::default()).unwrap();
        assert!(rep.records.is_empty());
        assert!(rep.errors.is_empty());
    }

    #[test]
    fn bad_month_is_reported_with_line() {
        let text = format!("{HEADER}p1,A,2001-02-03,100000,warranty,false,,\np2,B,2026-13-01,1,warranty,false,,\n");
        let rep = parse_transactions(text.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.errors.len(), 1);
        assert_eq!(rep.errors[0].line, 3);
        assert!(rep.errors[0].message.contains("sale_date"), "{}", rep.errors[0].message);
    }

    #[test]
    fn missing_header_is_fatal() {
        let err = parse_transactions("parcel_id,neighborhood\n".as_bytes(), &ParseOptions::default());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn adapter_maps_native_columns() {
        let adapter = SchemaAdapter::parse(
            "column.parcel_id = PARCEL\ncolumn.sale_date = SALE DATE\ndate_format = %m/%d/%Y\ndeed.WD = warranty\ntrue_values = Y\nfalse_values = N\n",
        )
        .unwrap();
        let text = "PARCEL,neighborhood,SALE DATE,price,deed_kind,seller_is_builder\n\
                    x9,c,06/15/2004,\"$250,000\",WD,N\n";
        let opts = ParseOptions {
            adapter,
            ..Default::default()
        };
        let rep = parse_transactions(text.as_bytes(), &opts).unwrap();
        assert!(rep.errors.is_empty(), "{:?}", rep.errors);
        let r = &rep.records[0];
        assert_eq!(r.sale_date, d(2004, 6, 15));
        assert_eq!(r.neighborhood, Neighborhood::C);
        assert_eq!(r.price, 250_000.0);
        assert_eq!(r.deed_kind, DeedKind::Warranty);
        assert!(!r.seller_is_builder);
    }

    #[test]
    fn three_sales_give_two_closed_and_one_censored() {
        let recs = vec![
            sale("p", d(2012, 6, 1)),
            sale("p", d(2000, 1, 1)),
            sale("p", d(2005, 1, 1)),
        ];
        let spells = build_spells(&recs, default_observation_end());
        let durations: Vec<_> = spells.iter().map(|s| (s.duration_days, s.censored)).collect();
        // 2000-01-01 → 2005-01-01 spans two leap days; 2005-01-01 → 2012-06-01 spans 2008 and 2012.
        assert_eq!(durations[0], (1827, false));
        assert_eq!(durations[1], (2708, false));
        assert!(durations[2].1);
        assert_eq!(durations[2].0, (d(2025, 1, 31) - d(2012, 6, 1)).num_days() as u32);
    }

    #[test]
    fn single_late_sale_is_31_day_censored_spell() {
        let spells = build_spells(&[sale("q", d(2024, 12, 31))], default_observation_end());
        assert_eq!(spells.len(), 1);
        assert_eq!(spells[0].duration_days, 31);
        assert!(spells[0].censored);
        assert!(build_spells(&[], default_observation_end()).is_empty());
    }

    #[test]
    fn same_day_sales_collapse_to_one_day_spell() {
        let recs = vec![sale("p", d(2010, 5, 5)), sale("p", d(2010, 5, 5))];
        let spells = build_spells(&recs, default_observation_end());
        assert_eq!(spells.len(), 2);
        assert_eq!(spells[0].duration_days, 1);
        assert!(spells[0].duplicate);
    }

    #[test]
    fn genuine_filter_rules() {
        let policy = GenuineFilterPolicy::default();

        let mut builder = closed(300);
        builder.exit_seller_is_builder = Some(true);
        assert!(!policy.is_genuine(&builder));

        assert!(policy.is_genuine(&closed(4000)));

        let mut qc = closed(3000);
        qc.exit_deed_kind = Some(DeedKind::Quitclaim);
        assert!(!policy.is_genuine(&qc));

        let mut free = closed(3000);
        free.exit_price = Some(0.0);
        assert!(!policy.is_genuine(&free));

        let mut long_builder = closed(549);
        long_builder.exit_seller_is_builder = Some(true);
        assert!(policy.is_genuine(&long_builder));
    }

    #[test]
    fn segmentation_examples() {
        let seg = PeriodSegmentation::default();
        let mk = |entry: NaiveDate, exit: Option<NaiveDate>| {
            let end = exit.unwrap_or(seg.observation_end);
            OwnershipSpell {
                exit_date: exit,
                censored: exit.is_none(),
                entry_date: entry,
                duration_days: (end - entry).num_days() as u32,
                ..closed(1)
            }
        };
        let before = mk(d(2010, 1, 1), Some(d(2018, 1, 1)));
        let straddle = mk(d(2015, 1, 1), Some(d(2022, 1, 1)));
        let after = mk(d(2021, 1, 1), None);
        let split = segment_periods(&[before.clone(), straddle.clone(), after.clone()], &seg).unwrap();

        assert_eq!(split.pre.len(), 2);
        assert_eq!(split.pre[0], before);
        assert!(split.pre[1].censored);
        assert_eq!(
            split.pre[1].duration_days as i64,
            (seg.cutoff_date - d(2015, 1, 1)).num_days()
        );
        assert_eq!(split.post.len(), 2);
        assert_eq!(split.post[0], straddle);
        assert_eq!(split.post[1], after);
    }

    #[test]
    fn cutoff_outside_range_is_fatal() {
        let seg = PeriodSegmentation {
            cutoff_date: d(2026, 1, 1),
            observation_end: default_observation_end(),
        };
        assert!(matches!(segment_periods(&[], &seg), Err(Error::Config(_))));
        let early = PeriodSegmentation {
            cutoff_date: d(1990, 1, 1),
            ..Default::default()
        };
        assert!(matches!(segment_periods(&[closed(10)], &early), Err(Error::Config(_))));
    }

    #[test]
    fn spell_table_round_trips() {
        let recs = vec![sale("p", d(2000, 1, 1)), sale("p", d(2005, 1, 1))];
        let spells = build_spells(&recs, default_observation_end());
        let mut buf = Vec::new();
        write_spells(&mut buf, &spells).unwrap();
        assert_eq!(read_spells(buf.as_slice()).unwrap(), spells);
    }
}
