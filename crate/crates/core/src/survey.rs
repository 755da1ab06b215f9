//! Survey encoding, willingness-to-pay score, group means, post-stratified
//! weights and tenure binning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Neighborhood;
use crate::scalar::Real;
use crate::stats::welch_from_moments;

pub const MIN_GROUP_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generation {
    Silent,
    Boomer,
    GenX,
    Millennial,
    GenZ,
}

impl Generation {
    pub const ALL: [Generation; 5] = [
        Generation::Silent,
        Generation::Boomer,
        Generation::GenX,
        Generation::Millennial,
        Generation::GenZ,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Generation::Silent => "Silent",
            Generation::Boomer => "Boomer",
            Generation::GenX => "GenX",
            Generation::Millennial => "Millennial",
            Generation::GenZ => "GenZ",
        }
    }
}

impl fmt::Display for Generation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Generation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "silent" | "silentgeneration" => Generation::Silent,
            "boomer" | "boomers" | "babyboomer" | "babyboomers" => Generation::Boomer,
            "genx" | "generationx" => Generation::GenX,
            "millennial" | "millennials" => Generation::Millennial,
            "genz" | "generationz" => Generation::GenZ,
            _ => return Err(Error::InvalidInput(format!("unknown generation {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WtpLabel {
    UltraFrugal,
    CautiouslyConservative,
    BalancedBudgeter,
    MaintenanceMinded,
    CommunityInvestor,
}

impl WtpLabel {
    pub fn name(self) -> &'static str {
        match self {
            WtpLabel::UltraFrugal => "Ultra Frugal",
            WtpLabel::CautiouslyConservative => "Cautiously Conservative",
            WtpLabel::BalancedBudgeter => "Balanced Budgeter",
            WtpLabel::MaintenanceMinded => "Maintenance-Minded",
            WtpLabel::CommunityInvestor => "Community Investor",
        }
    }
}

/// Willingness to pay higher fees, 1 (least) to 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WtpScore {
    pub score: u8,
    pub label: WtpLabel,
}

/// `round_half_up(((6 − minimize) + increase) / 2)`.
pub fn wtp_score(minimize_fee_support: u8, increase_fee_support: u8) -> Result<WtpScore> {
    for (name, v) in [("minimize", minimize_fee_support), ("increase", increase_fee_support)] {
        if !(1..=5).contains(&v) {
            return Err(Error::InvalidInput(format!("{name} fee support {v} outside 1..=5")));
        }
    }
    let doubled = 6 - minimize_fee_support + increase_fee_support;
    let score = doubled.div_ceil(2);
    let label = match score {
        1 => WtpLabel::UltraFrugal,
        2 => WtpLabel::CautiouslyConservative,
        3 => WtpLabel::BalancedBudgeter,
        4 => WtpLabel::MaintenanceMinded,
        _ => WtpLabel::CommunityInvestor,
    };
    Ok(WtpScore { score, label })
}

/// One household's encoded answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub respondent_id: String,
    pub neighborhood: Neighborhood,
    pub tenure_years: Option<f64>,
    pub generation: Generation,
    pub satisfaction: u8,
    pub recommit: Option<bool>,
    pub minimize_fee_support: u8,
    pub increase_fee_support: u8,
    #[serde(default)]
    pub amenity_usage: BTreeMap<String, u8>,
}

impl SurveyResponse {
    pub fn wtp(&self) -> Result<WtpScore> {
        wtp_score(self.minimize_fee_support, self.increase_fee_support)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Raw text (identifiers, neighborhood and generation labels).
    #[default]
    Label,
    Numeric,
    Ordinal,
    OneHot,
    Frequency,
    Ignore,
}

/// How one raw column is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Target: `respondent_id`, `neighborhood`, `tenure_years`, `generation`,
    /// `satisfaction`, `recommit`, `minimize_fee_support`,
    /// `increase_fee_support` or `amenity.<name>`. Unused for `ignore`.
    #[serde(default)]
    pub field: String,
    #[serde(default)]
    pub encoding: Encoding,
    /// Answer text to code. Label columns use it to rename values.
    #[serde(default)]
    pub map: BTreeMap<String, serde_json::Value>,
}

/// Maps every column of a raw survey table to a response field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    /// Cell values read as missing (after trimming). Empty cells always are.
    #[serde(default)]
    pub missing: Vec<String>,
    pub columns: BTreeMap<String, ColumnSpec>,
}

impl Codebook {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Identity codebook for the table written by [`write_responses`].
    pub fn canonical() -> Self {
        let col = |field: &str, encoding| ColumnSpec {
            field: field.to_string(),
            encoding,
            map: BTreeMap::new(),
        };
        let mut recommit = col("recommit", Encoding::OneHot);
        recommit.map.insert("true".into(), 1.into());
        recommit.map.insert("false".into(), 0.into());
        let columns = BTreeMap::from([
            ("respondent_id".to_string(), col("respondent_id", Encoding::Label)),
            ("neighborhood".to_string(), col("neighborhood", Encoding::Label)),
            ("tenure_years".to_string(), col("tenure_years", Encoding::Numeric)),
            ("generation".to_string(), col("generation", Encoding::Label)),
            ("satisfaction".to_string(), col("satisfaction", Encoding::Ordinal)),
            ("recommit".to_string(), recommit),
            (
                "minimize_fee_support".to_string(),
                col("minimize_fee_support", Encoding::Ordinal),
            ),
            (
                "increase_fee_support".to_string(),
                col("increase_fee_support", Encoding::Ordinal),
            ),
        ]);
        Codebook {
            missing: vec!["NA".into()],
            columns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop rows missing a required field; optional fields stay empty.
    #[default]
    Drop,
    /// Fill gaps with the neighborhood's mode (categorical) or median
    /// (numerical and Likert), falling back to the whole sample.
    Impute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodeReport {
    pub responses: Vec<SurveyResponse>,
    pub dropped: Vec<DroppedRow>,
    /// Number of cells filled by imputation.
    pub imputed: usize,
}

#[derive(Debug, Clone, Default)]
struct Partial {
    line: u64,
    id: Option<String>,
    neighborhood: Option<Neighborhood>,
    tenure: Option<f64>,
    generation: Option<Generation>,
    satisfaction: Option<u8>,
    recommit: Option<bool>,
    minimize: Option<u8>,
    increase: Option<u8>,
    amenities: BTreeMap<String, u8>,
}

fn coded(spec: &ColumnSpec, raw: &str) -> std::result::Result<f64, String> {
    if let Some(v) = spec.map.get(raw) {
        return v.as_f64().ok_or_else(|| format!("code for {raw:?} is not a number"));
    }
    let folded = spec.map.iter().find(|(k, _)| k.eq_ignore_ascii_case(raw));
    if let Some((_, v)) = folded {
        return v.as_f64().ok_or_else(|| format!("code for {raw:?} is not a number"));
    }
    raw.parse::<f64>().map_err(|_| format!("value {raw:?} has no code"))
}

fn likert(v: f64, field: &str) -> std::result::Result<u8, String> {
    if v.fract() == 0.0 && (1.0..=5.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(format!("{field} code {v} outside 1..=5"))
    }
}

fn relabel(spec: &ColumnSpec, raw: &str) -> String {
    match spec.map.get(raw) {
        Some(serde_json::Value::String(s)) => s.clone(),
        _ => raw.to_string(),
    }
}

fn assign(p: &mut Partial, spec: &ColumnSpec, raw: &str) -> std::result::Result<(), String> {
    let field = spec.field.as_str();
    match field {
        "respondent_id" => p.id = Some(relabel(spec, raw)),
        "neighborhood" => {
            p.neighborhood = Some(relabel(spec, raw).parse::<Neighborhood>()?);
        }
        "generation" => {
            p.generation = Some(relabel(spec, raw).parse::<Generation>().map_err(|e| e.to_string())?);
        }
        "tenure_years" => {
            let v = coded(spec, raw)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("tenure {v} is negative or not finite"));
            }
            p.tenure = Some(v);
        }
        "satisfaction" => p.satisfaction = Some(likert(coded(spec, raw)?, field)?),
        "minimize_fee_support" => p.minimize = Some(likert(coded(spec, raw)?, field)?),
        "increase_fee_support" => p.increase = Some(likert(coded(spec, raw)?, field)?),
        "recommit" => {
            p.recommit = Some(match coded(spec, raw)? {
                1.0 => true,
                0.0 => false,
                v => return Err(format!("recommit code {v} is not 0 or 1")),
            });
        }
        other => {
            let Some(name) = other.strip_prefix("amenity.") else {
                return Err(format!("unknown target field {other:?}"));
            };
            let v = coded(spec, raw)?;
            if !((0.0..=255.0).contains(&v) && v.fract() == 0.0) {
                return Err(format!("frequency code {v} for {name} is not a small integer"));
            }
            p.amenities.insert(name.to_string(), v as u8);
        }
    }
    Ok(())
}

/// Reads a raw survey table through `codebook`.
///
/// Every header must appear in the codebook; unmapped headers are reported
/// together. A cell that cannot be coded is an error naming its line.
pub fn encode_responses<R: Read>(reader: R, codebook: &Codebook, policy: MissingPolicy) -> Result<EncodeReport> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let unmapped: Vec<&str> = headers
        .iter()
        .filter(|h| !codebook.columns.contains_key(h.trim()))
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::InvalidInput(format!(
            "unmapped survey columns: {}",
            unmapped.join(", ")
        )));
    }
    let specs: Vec<&ColumnSpec> = headers.iter().map(|h| &codebook.columns[h.trim()]).collect();
    let missing: BTreeSet<&str> = codebook.missing.iter().map(|s| s.as_str()).collect();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut p = Partial {
            line,
            ..Partial::default()
        };
        for (cell, spec) in record.iter().zip(&specs) {
            let raw = cell.trim();
            if spec.encoding == Encoding::Ignore || raw.is_empty() || missing.contains(raw) {
                continue;
            }
            assign(&mut p, spec, raw).map_err(|m| Error::InvalidInput(format!("line {line}: {m}")))?;
        }
        rows.push(p);
    }

    let mut report = EncodeReport::default();
    if policy == MissingPolicy::Impute {
        report.imputed = impute(&mut rows);
    }
    for (i, p) in rows.into_iter().enumerate() {
        let id = p.id.clone().unwrap_or_else(|| format!("row{}", i + 1));
        let required = [
            ("neighborhood", p.neighborhood.is_none()),
            ("generation", p.generation.is_none()),
            ("satisfaction", p.satisfaction.is_none()),
            ("minimize_fee_support", p.minimize.is_none()),
            ("increase_fee_support", p.increase.is_none()),
        ];
        let absent: Vec<&str> = required.iter().filter(|(_, m)| *m).map(|(n, _)| *n).collect();
        if !absent.is_empty() {
            report.dropped.push(DroppedRow {
                line: p.line,
                reason: format!("missing {}", absent.join(", ")),
            });
            continue;
        }
        report.responses.push(SurveyResponse {
            respondent_id: id,
            neighborhood: p.neighborhood.expect("checked"),
            tenure_years: p.tenure,
            generation: p.generation.expect("checked"),
            satisfaction: p.satisfaction.expect("checked"),
            recommit: p.recommit,
            minimize_fee_support: p.minimize.expect("checked"),
            increase_fee_support: p.increase.expect("checked"),
            amenity_usage: p.amenities,
        });
    }
    Ok(report)
}

pub fn encode_responses_file(
    path: impl AsRef<Path>,
    codebook: &Codebook,
    policy: MissingPolicy,
) -> Result<EncodeReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    encode_responses(std::io::BufReader::new(file), codebook, policy)
}

/// Most frequent value; ties go to the smallest.
fn mode<V: Ord + Copy>(values: impl Iterator<Item = V>) -> Option<V> {
    let mut counts: BTreeMap<V, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let top = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == top).map(|(v, _)| v)
}

/// Lower median, so an ordinal answer stays on the scale.
fn lower_median(mut v: Vec<u8>) -> Option<u8> {
    v.sort_unstable();
    v.get((v.len().max(1) - 1) / 2).copied()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn impute(rows: &mut [Partial]) -> usize {
    type Fill = (Option<f64>, Option<Generation>, [Option<u8>; 3], Option<bool>);
    let fills = |subset: &[&Partial]| -> Fill {
        let likert = |get: fn(&Partial) -> Option<u8>| lower_median(subset.iter().filter_map(|p| get(p)).collect());
        (
            median(subset.iter().filter_map(|p| p.tenure).collect()),
            mode(subset.iter().filter_map(|p| p.generation)),
            [
                likert(|p| p.satisfaction),
                likert(|p| p.minimize),
                likert(|p| p.increase),
            ],
            mode(subset.iter().filter_map(|p| p.recommit)),
        )
    };
    let all: Vec<&Partial> = rows.iter().collect();
    let overall = fills(&all);
    let mut by_nbhd: BTreeMap<Neighborhood, Fill> = BTreeMap::new();
    for n in Neighborhood::ALL {
        let subset: Vec<&Partial> = rows.iter().filter(|p| p.neighborhood == Some(n)).collect();
        if !subset.is_empty() {
            by_nbhd.insert(n, fills(&subset));
        }
    }

    let mut filled = 0;
    for p in rows.iter_mut() {
        let Some(n) = p.neighborhood else { continue };
        let local = &by_nbhd[&n];
        let mut take = |slot_empty: bool| {
            if slot_empty {
                filled += 1;
            }
            slot_empty
        };
        if take(p.tenure.is_none()) {
            p.tenure = local.0.or(overall.0);
        }
        if take(p.generation.is_none()) {
            p.generation = local.1.or(overall.1);
        }
        if take(p.satisfaction.is_none()) {
            p.satisfaction = local.2[0].or(overall.2[0]);
        }
        if take(p.minimize.is_none()) {
            p.minimize = local.2[1].or(overall.2[1]);
        }
        if take(p.increase.is_none()) {
            p.increase = local.2[2].or(overall.2[2]);
        }
        if take(p.recommit.is_none()) {
            p.recommit = local.3.or(overall.3);
        }
    }
    filled
}

/// Writes responses in the layout [`Codebook::canonical`] reads.
pub fn write_responses<W: Write>(writer: W, responses: &[SurveyResponse]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "respondent_id",
        "neighborhood",
        "tenure_years",
        "generation",
        "satisfaction",
        "recommit",
        "minimize_fee_support",
        "increase_fee_support",
    ])?;
    for r in responses {
        w.write_record([
            r.respondent_id.clone(),
            r.neighborhood.to_string(),
            r.tenure_years.map_or(String::new(), |t| format!("{t:.4}")),
            r.generation.to_string(),
            r.satisfaction.to_string(),
            r.recommit.map_or(String::new(), |b| b.to_string()),
            r.minimize_fee_support.to_string(),
            r.increase_fee_support.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<survey table>", e))?;
    Ok(())
}

/// Post-stratification weight of one neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumWeight {
    pub neighborhood: Neighborhood,
    pub population_share: f64,
    pub sample_share: f64,
    pub weight: f64,
}

/// Weights `population_share / sample_share`, optionally shrunk toward 1 by
/// `tau ∈ [0, 1]` (`w' = (1 − τ) w + τ`). Both forms keep `Σ n_h w_h = n`.
pub fn post_stratify(
    responses: &[SurveyResponse],
    population: &BTreeMap<Neighborhood, f64>,
    tau: f64,
) -> Result<Vec<StratumWeight>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("shrinkage {tau} outside [0, 1]")));
    }
    if responses.is_empty() {
        return Err(Error::Precondition("post-stratification of an empty sample".into()));
    }
    let mut sample: BTreeMap<Neighborhood, usize> = BTreeMap::new();
    for r in responses {
        *sample.entry(r.neighborhood).or_default() += 1;
    }
    if let Some(n) = sample.keys().find(|n| !population.contains_key(n)) {
        return Err(Error::InvalidInput(format!("no population count for neighborhood {n}")));
    }
    if let Some((n, c)) = population.iter().find(|(_, &c)| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "population count {c} for neighborhood {n} must be positive"
        )));
    }
    if let Some(n) = population.keys().find(|n| !sample.contains_key(n)) {
        return Err(Error::Precondition(format!(
            "neighborhood {n} has no responses to weight"
        )));
    }
    let pop_total: f64 = population.values().sum();
    let n = responses.len() as f64;
    Ok(population
        .iter()
        .map(|(&nb, &count)| {
            let population_share = count / pop_total;
            let sample_share = sample[&nb] as f64 / n;
            let raw = population_share / sample_share;
            StratumWeight {
                neighborhood: nb,
                population_share,
                sample_share,
                weight: (1.0 - tau) * raw + tau,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Neighborhood,
    Generation,
    WtpScore,
    /// Ascending split points; bins are `[s_i, s_{i+1})`.
    TenureBin(Vec<f64>),
}

/// Mean satisfaction and recommitment of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GroupSummary<T> {
    pub group: String,
    pub mean_satisfaction: T,
    /// Over members that answered the recommitment question.
    pub mean_recommit: Option<T>,
    pub n: usize,
    /// Sum of member weights (equals `n` when unweighted).
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GroupTable<T> {
    pub groups: Vec<GroupSummary<T>>,
    /// Groups with fewer members than the minimum size.
    pub suppressed: Vec<String>,
}

fn tenure_bin_label(edges: &[f64], t: f64) -> String {
    let i = edges.partition_point(|&e| e <= t);
    let lo = if i == 0 { 0.0 } else { edges[i - 1] };
    match edges.get(i) {
        Some(hi) => format!("[{lo}, {hi})"),
        None => format!("[{lo}, inf)"),
    }
}

fn group_key(r: &SurveyResponse, by: &GroupBy) -> Result<Option<(usize, String)>> {
    Ok(match by {
        GroupBy::Neighborhood => Some((r.neighborhood.index(), r.neighborhood.to_string())),
        GroupBy::Generation => Some((r.generation as usize, r.generation.to_string())),
        GroupBy::WtpScore => {
            let s = r.wtp()?.score;
            Some((s as usize, s.to_string()))
        }
        GroupBy::TenureBin(edges) => r
            .tenure_years
            .map(|t| (edges.partition_point(|&e| e <= t), tenure_bin_label(edges, t))),
    })
}

/// Per-group (weighted) means; groups under `min_size` are suppressed.
pub fn aggregate_groups<T: Real>(
    responses: &[SurveyResponse],
    by: &GroupBy,
    weights: Option<&[StratumWeight]>,
    min_size: usize,
) -> Result<GroupTable<T>> {
    if let GroupBy::TenureBin(edges) = by {
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "tenure bin edges must be strictly increasing".into(),
            ));
        }
    }
    let weight_of = |r: &SurveyResponse| -> Result<f64> {
        match weights {
            None => Ok(1.0),
            Some(ws) => ws
                .iter()
                .find(|w| w.neighborhood == r.neighborhood)
                .map(|w| w.weight)
                .ok_or_else(|| Error::InvalidInput(format!("no weight for neighborhood {}", r.neighborhood))),
        }
    };

    #[derive(Default)]
    struct Acc {
        label: String,
        n: usize,
        w: f64,
        sat: f64,
        rec_w: f64,
        rec: f64,
    }
    let mut groups: BTreeMap<usize, Acc> = BTreeMap::new();
    for r in responses {
        let Some((key, label)) = group_key(r, by)? else {
            continue;
        };
        let w = weight_of(r)?;
        let acc = groups.entry(key).or_insert_with(|| Acc {
            label,
            ..Acc::default()
        });
        acc.n += 1;
        acc.w += w;
        acc.sat += w * f64::from(r.satisfaction);
        if let Some(rc) = r.recommit {
            acc.rec_w += w;
            acc.rec += w * if rc { 1.0 } else { 0.0 };
        }
    }
    if groups.is_empty() {
        return Err(Error::Precondition("no responses fall into any group".into()));
    }
    let mut table = GroupTable {
        groups: Vec::new(),
        suppressed: Vec::new(),
    };
    for acc in groups.into_values() {
        if acc.n < min_size {
            table.suppressed.push(acc.label);
            continue;
        }
        table.groups.push(GroupSummary {
            group: acc.label,
            mean_satisfaction: T::lit(acc.sat / acc.w),
            mean_recommit: (acc.rec_w > 0.0).then(|| T::lit(acc.rec / acc.rec_w)),
            n: acc.n,
            weight: T::lit(acc.w),
        });
    }
    Ok(table)
}

/// `group,mean_satisfaction,mean_recommit,n,weight`
pub fn write_group_table<T: Real, W: Write>(writer: W, table: &GroupTable<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "mean_satisfaction", "mean_recommit", "n", "weight"])?;
    for g in &table.groups {
        w.write_record([
            g.group.clone(),
            format!("{:.6}", g.mean_satisfaction),
            g.mean_recommit.map_or(String::new(), |v| format!("{v:.6}")),
            g.n.to_string(),
            format!("{:.6}", g.weight),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<group table>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCorrection {
    /// Multiply each node's best p-value by its number of candidate splits.
    #[default]
    Bonferroni,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenureBinOptions {
    pub min_bin_n: usize,
    pub alpha: f64,
    pub correction: SplitCorrection,
}

impl Default for TenureBinOptions {
    fn default() -> Self {
        TenureBinOptions {
            min_bin_n: 30,
            alpha: 0.01,
            correction: SplitCorrection::Bonferroni,
        }
    }
}

/// Greedy binary splitting of satisfaction on tenure.
///
/// Each node tries every cut between distinct tenures that leaves at least
/// `min_bin_n` on both sides, keeps the cut with the smallest Welch p-value
/// and accepts it if that p (after correction) is below `alpha`. Accepted
/// nodes are split again. Cuts sit midway between neighbouring tenures.
pub fn tenure_bin_search(responses: &[SurveyResponse], opts: &TenureBinOptions) -> Result<Vec<f64>> {
    let mut pts: Vec<(f64, f64)> = responses
        .iter()
        .filter_map(|r| r.tenure_years.map(|t| (t, f64::from(r.satisfaction))))
        .collect();
    if opts.min_bin_n < 2 {
        return Err(Error::InvalidInput("min_bin_n must be at least 2".into()));
    }
    if pts.len() < 3 * opts.min_bin_n {
        return Err(Error::Precondition(format!(
            "tenure binning needs at least {} responses with tenure, got {}",
            3 * opts.min_bin_n,
            pts.len()
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut prefix = vec![(0.0, 0.0); pts.len() + 1];
    for (i, &(_, y)) in pts.iter().enumerate() {
        prefix[i + 1] = (prefix[i].0 + y, prefix[i].1 + y * y);
    }
    let mut splits = Vec::new();
    let mut stack = vec![(0usize, pts.len())];
    while let Some((lo, hi)) = stack.pop() {
        if let Some(cut) = best_cut(&pts, &prefix, lo, hi, opts) {
            splits.push(0.5 * (pts[cut - 1].0 + pts[cut].0));
            stack.push((lo, cut));
            stack.push((cut, hi));
        }
    }
    splits.sort_by(f64::total_cmp);
    Ok(splits)
}

fn moments(prefix: &[(f64, f64)], lo: usize, hi: usize) -> (f64, f64, f64) {
    let n = (hi - lo) as f64;
    let s = prefix[hi].0 - prefix[lo].0;
    let ss = prefix[hi].1 - prefix[lo].1;
    let mean = s / n;
    let var = ((ss - s * mean) / (n - 1.0)).max(0.0);
    (n, mean, var)
}

fn best_cut(pts: &[(f64, f64)], prefix: &[(f64, f64)], lo: usize, hi: usize, opts: &TenureBinOptions) -> Option<usize> {
    let m = opts.min_bin_n;
    if hi - lo < 2 * m {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    let mut candidates = 0usize;
    for cut in lo + m..=hi - m {
        if pts[cut - 1].0 == pts[cut].0 {
            continue;
        }
        candidates += 1;
        let r = welch_from_moments(moments(prefix, lo, cut), moments(prefix, cut, hi));
        if r.p.is_nan() {
            continue;
        }
        if best.is_none_or(|(p, _)| r.p < p) {
            best = Some((r.p, cut));
        }
    }
    let (p, cut) = best?;
    let adjusted = match opts.correction {
        SplitCorrection::Bonferroni => (p * candidates as f64).min(1.0),
        SplitCorrection::None => p,
    };
    (adjusted < opts.alpha).then_some(cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn resp(id: usize, nb: Neighborhood, sat: u8, rec: Option<bool>, tenure: Option<f64>) -> SurveyResponse {
        SurveyResponse {
            respondent_id: id.to_string(),
            neighborhood: nb,
            tenure_years: tenure,
            generation: Generation::Boomer,
            satisfaction: sat,
            recommit: rec,
            minimize_fee_support: 3,
            increase_fee_support: 3,
            amenity_usage: BTreeMap::new(),
        }
    }

    #[test]
    fn wtp_anchor_cases() {
        assert_eq!(wtp_score(5, 1).unwrap().score, 1);
        assert_eq!(wtp_score(5, 1).unwrap().label, WtpLabel::UltraFrugal);
        assert_eq!(wtp_score(1, 5).unwrap().label, WtpLabel::CommunityInvestor);
        assert_eq!(wtp_score(5, 5).unwrap().label, WtpLabel::BalancedBudgeter);
        assert_eq!(wtp_score(5, 5).unwrap().label.name(), "Balanced Budgeter");
        assert!(wtp_score(0, 3).is_err());
        assert!(wtp_score(3, 6).is_err());
    }

    #[test]
    fn wtp_is_monotone() {
        for m in 1..=5u8 {
            for i in 1..=5u8 {
                let s = wtp_score(m, i).unwrap().score;
                if i < 5 {
                    assert!(wtp_score(m, i + 1).unwrap().score >= s);
                }
                if m < 5 {
                    assert!(wtp_score(m + 1, i).unwrap().score <= s);
                }
            }
        }
    }

    fn codebook() -> Codebook {
        Codebook::from_json(
            r#"{
              "missing": ["NA"],
              "columns": {
                "id": {"field": "respondent_id"},
                "Neighborhood": {"field": "neighborhood"},
                "Years": {"field": "tenure_years", "encoding": "numeric"},
                "Gen": {"field": "generation", "map": {"Baby Boomer": "Boomer"}},
                "Overall": {"field": "satisfaction", "encoding": "ordinal",
                            "map": {"Very dissatisfied": 1, "Dissatisfied": 2, "Neutral": 3,
                                    "Satisfied": 4, "Very satisfied": 5}},
                "Again": {"field": "recommit", "encoding": "one_hot", "map": {"Yes": 1, "No": 0}},
                "KeepLow": {"field": "minimize_fee_support", "encoding": "ordinal"},
                "Raise": {"field": "increase_fee_support", "encoding": "ordinal"},
                "Golf": {"field": "amenity.golf", "encoding": "frequency",
                         "map": {"Never": 0, "Monthly": 1, "Weekly": 2}},
                "Comment": {"encoding": "ignore"}
              }
            }"#,
        )
        .unwrap()
    }

    const TABLE: &str = "\
id,Neighborhood,Years,Gen,Overall,Again,KeepLow,Raise,Golf,Comment
1,A,3.5,Baby Boomer,Very satisfied,Yes,2,4,Weekly,fine
2,A,,GenX,Satisfied,No,5,1,Never,
3,B,12,Silent,Neutral,NA,3,3,Monthly,x
4,B,8,Millennial,,Yes,1,5,Never,
";

    #[test]
    fn encoding_with_drop_policy() {
        let r = encode_responses(TABLE.as_bytes(), &codebook(), MissingPolicy::Drop).unwrap();
        assert_eq!(r.responses.len(), 3);
        assert_eq!(r.dropped.len(), 1);
        assert_eq!(r.dropped[0].line, 5);
        let first = &r.responses[0];
        assert_eq!(first.satisfaction, 5);
        assert_eq!(first.recommit, Some(true));
        assert_eq!(first.generation, Generation::Boomer);
        assert_eq!(first.amenity_usage["golf"], 2);
        // renter without tenure stays in, just without a tenure
        assert_eq!(r.responses[1].tenure_years, None);
        assert_eq!(r.responses[1].recommit, Some(false));
        assert_eq!(r.responses[2].recommit, None);
    }

    #[test]
    fn encoding_with_imputation() {
        let r = encode_responses(TABLE.as_bytes(), &codebook(), MissingPolicy::Impute).unwrap();
        assert_eq!(r.responses.len(), 4);
        // B has one observed satisfaction (3)
        assert_eq!(r.responses[3].satisfaction, 3);
        assert_eq!(r.responses[1].tenure_years, Some(3.5));
        assert_eq!(r.responses[2].recommit, Some(true));
        assert_eq!(r.imputed, 3);
    }

    #[test]
    fn unmapped_columns_are_listed() {
        let table = "id,Neighborhood,Mystery,Other\n1,A,2,3\n";
        let err = encode_responses(table.as_bytes(), &codebook(), MissingPolicy::Drop).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Mystery") && msg.contains("Other"), "{msg}");
    }

    #[test]
    fn uncoded_answer_names_line() {
        let table = "id,Neighborhood,Overall\n1,A,Ecstatic\n";
        let err = encode_responses(table.as_bytes(), &codebook(), MissingPolicy::Drop).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn canonical_round_trip() {
        let rs = vec![
            resp(1, Neighborhood::C, 4, Some(true), Some(2.25)),
            resp(2, Neighborhood::H, 2, None, None),
        ];
        let mut buf = Vec::new();
        write_responses(&mut buf, &rs).unwrap();
        let back = encode_responses(buf.as_slice(), &Codebook::canonical(), MissingPolicy::Drop).unwrap();
        assert_eq!(back.responses, rs);
    }

    #[test]
    fn post_stratification_ratio() {
        let mut rs = Vec::new();
        for i in 0..10 {
            rs.push(resp(
                i,
                if i < 5 { Neighborhood::A } else { Neighborhood::B },
                4,
                None,
                None,
            ));
        }
        let pop = BTreeMap::from([(Neighborhood::A, 600.0), (Neighborhood::B, 400.0)]);
        let w = post_stratify(&rs, &pop, 0.0).unwrap();
        assert_relative_eq!(w[0].weight, 1.2, epsilon = 1e-12);
        assert_relative_eq!(w[1].weight, 0.8, epsilon = 1e-12);
        let total: f64 = w.iter().map(|s| s.weight * s.sample_share).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);

        let equal = BTreeMap::from([(Neighborhood::A, 5.0), (Neighborhood::B, 5.0)]);
        assert!(post_stratify(&rs, &equal, 0.0)
            .unwrap()
            .iter()
            .all(|s| (s.weight - 1.0).abs() < 1e-12));

        let shrunk = post_stratify(&rs, &pop, 0.5).unwrap();
        assert_relative_eq!(shrunk[0].weight, 1.1, epsilon = 1e-12);
    }

    #[test]
    fn empty_stratum_is_an_error() {
        let rs = vec![resp(1, Neighborhood::A, 4, None, None)];
        let pop = BTreeMap::from([(Neighborhood::A, 6.0), (Neighborhood::B, 4.0)]);
        assert!(post_stratify(&rs, &pop, 0.0).is_err());
    }

    #[test]
    fn aggregation_basics() {
        let rs: Vec<_> = (0..6)
            .map(|i| resp(i, Neighborhood::D, 2 + (i % 3) as u8, Some(i % 2 == 0), None))
            .collect();
        let t = aggregate_groups::<f64>(&rs, &GroupBy::Neighborhood, None, MIN_GROUP_SIZE).unwrap();
        assert_eq!(t.groups.len(), 1);
        assert_relative_eq!(t.groups[0].mean_satisfaction, 3.0, epsilon = 1e-12);
        assert_relative_eq!(t.groups[0].mean_recommit.unwrap(), 0.5, epsilon = 1e-12);

        let small = aggregate_groups::<f64>(&rs[..4], &GroupBy::Neighborhood, None, MIN_GROUP_SIZE).unwrap();
        assert!(small.groups.is_empty());
        assert_eq!(small.suppressed, vec!["D".to_string()]);

        assert!(aggregate_groups::<f64>(&[], &GroupBy::Generation, None, MIN_GROUP_SIZE).is_err());
    }

    #[test]
    fn weighted_constant_is_constant() {
        let mut rs = Vec::new();
        for i in 0..20 {
            rs.push(resp(
                i,
                if i < 14 { Neighborhood::A } else { Neighborhood::E },
                4,
                None,
                Some(i as f64),
            ));
        }
        let pop = BTreeMap::from([(Neighborhood::A, 1.0), (Neighborhood::E, 3.0)]);
        let w = post_stratify(&rs, &pop, 0.0).unwrap();
        let t = aggregate_groups::<f64>(&rs, &GroupBy::TenureBin(vec![10.0]), Some(&w), 1).unwrap();
        assert_eq!(t.groups.len(), 2);
        assert!(t.groups.iter().all(|g| (g.mean_satisfaction - 4.0).abs() < 1e-12));
        assert_eq!(t.groups[0].group, "[0, 10)");
        assert_eq!(t.groups[1].group, "[10, inf)");
    }

    #[test]
    fn bin_search_finds_obvious_step() {
        let rs: Vec<_> = (0..300)
            .map(|i| {
                let t = i as f64 / 10.0;
                let sat = if t < 15.0 { 2 + (i % 2) as u8 } else { 4 + (i % 2) as u8 };
                resp(i, Neighborhood::A, sat, None, Some(t))
            })
            .collect();
        let splits = tenure_bin_search(&rs, &TenureBinOptions::default()).unwrap();
        assert_eq!(splits.len(), 1);
        assert!((splits[0] - 14.95).abs() < 1e-9, "{splits:?}");
    }

    #[test]
    fn bin_search_needs_enough_data() {
        let rs: Vec<_> = (0..50)
            .map(|i| resp(i, Neighborhood::A, 3, None, Some(i as f64)))
            .collect();
        assert!(tenure_bin_search(&rs, &TenureBinOptions::default()).is_err());
    }
}
