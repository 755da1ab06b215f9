//! Stages of a run and the files each one writes.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use tenure_core::covid::{cii_by_neighborhood, write_cii_table};
use tenure_core::hazard::{daily_hazard, HazardProfile};
use tenure_core::hazardfit::{compare_families_with, MixtureModel, WeibullParams};
use tenure_core::ingest::{
    build_spells, filter_genuine, parse_transactions_file, read_spells_file, segment_periods, write_spells,
    write_transactions, IngestSummary, Neighborhood, OwnershipSpell, ParseOptions, ParseReport, PeriodSplit,
    SchemaAdapter,
};
use tenure_core::scalar::DAYS_PER_YEAR;
use tenure_core::seed::{derive_seed, streams};
use tenure_core::simlab::{gen_parcel_histories, gen_survey_synthetic, spells_to_transactions, SimSpec, UShape};
use tenure_core::stats::{
    anova_tukey, kruskal_wallis, mann_whitney_u, ols_standardized, shapiro_wilk_seeded, simple_linear_r2, welch_t,
    SampleVector,
};
use tenure_core::survey::{
    aggregate_groups, encode_responses_file, post_stratify, tenure_bin_search, write_group_table, write_responses,
    Codebook, Generation, GroupBy, StratumWeight, SurveyResponse,
};
use tenure_core::survival::{bootstrap_median_ci_spells, kaplan_meier, log_rank_spells, median_tenure, nelson_aalen};

use crate::bundle::{Bundle, StageStatus};
use crate::config::{RunConfig, SimlabConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Survival,
    Hazard,
    Fit,
    Cii,
    Stats,
    Survey,
}

impl Stage {
    pub const REPORT: [Stage; 7] = [
        Stage::Ingest,
        Stage::Survival,
        Stage::Hazard,
        Stage::Fit,
        Stage::Cii,
        Stage::Stats,
        Stage::Survey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Survival => "survival",
            Stage::Hazard => "hazard",
            Stage::Fit => "fit",
            Stage::Cii => "cii",
            Stage::Stats => "stats",
            Stage::Survey => "survey",
        }
    }

    fn needs_spells(self) -> bool {
        !matches!(self, Stage::Survey)
    }
}

const CI_LEVEL: f64 = 0.95;

fn years(days: f64) -> f64 {
    days / DAYS_PER_YEAR
}

fn in_nbhd(spells: &[OwnershipSpell], nb: Neighborhood) -> Vec<OwnershipSpell> {
    spells.iter().filter(|s| s.neighborhood == nb).cloned().collect()
}

fn has_genuine(spells: &[OwnershipSpell]) -> bool {
    spells.iter().any(|s| s.genuine)
}

/// Result as JSON, or `{"error": ...}` when a single test cannot run.
fn attempt<T: Serialize>(f: impl FnOnce() -> Result<T>) -> Value {
    match f() {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": format!("{e:#}") }),
    }
}

struct Spells {
    all: Vec<OwnershipSpell>,
    split: PeriodSplit,
}

pub struct Run {
    cfg: RunConfig,
    seed: u64,
    bundle: Bundle,
    spells: Option<Spells>,
}

impl Run {
    pub fn new(cfg: RunConfig, bundle: Bundle) -> Result<Self> {
        let seed = cfg.seed()?;
        Ok(Run {
            cfg,
            seed,
            bundle,
            spells: None,
        })
    }

    /// Runs `stages` in order. Missing inputs skip a stage when `lenient`
    /// and fail it otherwise. Returns whether every stage succeeded.
    pub fn execute(mut self, command: &str, stages: &[Stage], lenient: bool) -> Result<bool> {
        if self.cfg.simlab.is_some() && command == "report" {
            self.materialize_simlab()?;
        }
        self.cfg.check_inputs()?;
        self.bundle.record_inputs(&self.cfg)?;
        let mut ingest_failed = false;
        for &stage in stages {
            let missing = if stage.needs_spells() {
                if ingest_failed {
                    Some("ingest failed")
                } else if self.cfg.transactions.is_none() && self.cfg.spells.is_none() {
                    Some("no transactions or spells input")
                } else {
                    None
                }
            } else if self.cfg.survey.is_none() {
                Some("no survey input")
            } else {
                None
            };
            if let Some(why) = missing {
                let status = if lenient || ingest_failed {
                    StageStatus::Skipped
                } else {
                    StageStatus::Failed
                };
                self.bundle.stage(stage.name(), status, Some(why.to_string()));
                continue;
            }
            let outcome = match stage {
                Stage::Ingest => self.ingest(),
                Stage::Survival => self.survival(),
                Stage::Hazard => self.hazard(),
                Stage::Fit => self.fit(),
                Stage::Cii => self.cii(),
                Stage::Stats => self.stats(),
                Stage::Survey => self.survey(),
            };
            match outcome {
                Ok(()) => self.bundle.stage(stage.name(), StageStatus::Ok, None),
                Err(e) => {
                    eprintln!("stage {} failed: {e:#}", stage.name());
                    ingest_failed |= stage == Stage::Ingest;
                    self.bundle
                        .stage(stage.name(), StageStatus::Failed, Some(format!("{e:#}")));
                }
            }
        }
        self.bundle.finish(command, &self.cfg)
    }

    fn spells(&self) -> Result<&Spells> {
        self.spells.as_ref().ok_or_else(|| anyhow!("spells are not loaded"))
    }

    /// Writes synthetic inputs under `inputs/` and points the config at them.
    fn materialize_simlab(&mut self) -> Result<()> {
        let sim = self.cfg.simlab.clone().unwrap_or_default();
        let files = simulate(&sim, &self.cfg, self.seed)?;
        for (key, name, bytes) in [
            ("transactions", "inputs/transactions.csv", &files.transactions),
            ("survey", "inputs/survey.csv", &files.survey),
            ("codebook", "inputs/codebook.json", &files.codebook),
        ] {
            self.bundle.write(name, bytes)?;
            let path = self.bundle.dir().join(name);
            self.cfg.set_generated_input(key, path, &format!("simlab:{name}"));
        }
        self.bundle.write("inputs/simlab_truth.json", &files.truth)?;
        Ok(())
    }

    fn ingest(&mut self) -> Result<()> {
        let end = self.cfg.segmentation.observation_end;
        let (report, raw) = if let Some(path) = &self.cfg.transactions {
            let adapter = match &self.cfg.adapter {
                Some(p) => SchemaAdapter::load(p)?,
                None => SchemaAdapter::default(),
            };
            let report = parse_transactions_file(
                path,
                &ParseOptions {
                    observation_end: end,
                    adapter,
                },
            )?;
            if report.records.is_empty() {
                bail!("no valid transaction rows in {}", path.display());
            }
            let spells = build_spells(&report.records, end);
            (report, spells)
        } else {
            let path = self.cfg.spells.as_ref().expect("checked by the caller");
            (ParseReport::default(), read_spells_file(path)?)
        };
        let all = filter_genuine(&raw, &self.cfg.policy);
        let split = segment_periods(&all, &self.cfg.segmentation)?;
        self.bundle.write_with("spells.csv", |w| write_spells(w, &all))?;
        let summary = IngestSummary::new(&report, &all);
        self.bundle.write_json(
            "ingest_summary.json",
            &json!({
                "summary": summary,
                "pre_spells": split.pre.len(),
                "post_spells": split.post.len(),
                "cutoff_date": self.cfg.segmentation.cutoff_date,
                "observation_end": end,
            }),
        )?;
        self.spells = Some(Spells { all, split });
        Ok(())
    }

    fn survival(&mut self) -> Result<()> {
        let b = self.cfg.bootstrap_replicates;
        let boot_seed = derive_seed(self.seed, streams::BOOTSTRAP_MEDIAN);
        let sp = self.spells()?;
        let mut curves = Vec::new();
        let mut medians = Vec::new();
        let mut groups: Vec<(String, Vec<OwnershipSpell>)> = Neighborhood::ALL
            .iter()
            .map(|&nb| (nb.label().to_string(), in_nbhd(&sp.all, nb)))
            .filter(|(_, s)| has_genuine(s))
            .collect();
        let present: Vec<String> = groups.iter().map(|(g, _)| g.clone()).collect();
        groups.push(("ALL".into(), sp.all.clone()));
        for (group, spells) in &groups {
            let curve = kaplan_meier::<f64>(spells)?;
            let mut buf = Vec::new();
            curve.write_table(&mut buf, years)?;
            curves.push((format!("fig1_km_{group}.csv"), buf));
            let m = bootstrap_median_ci_spells::<f64>(spells, b, boot_seed, CI_LEVEL)?.years();
            medians.push(json!({
                "group": group,
                "n": curve.n,
                "events": curve.events.iter().sum::<usize>(),
                "median_years": m.value,
                "ci_lower": m.ci_lower,
                "ci_upper": m.ci_upper,
                "unstable": m.unstable,
                "not_reached_fraction": m.not_reached_fraction,
            }));
        }
        let nb_groups: Vec<&[OwnershipSpell]> = groups[..groups.len() - 1].iter().map(|(_, s)| s.as_slice()).collect();
        let across = if nb_groups.len() >= 2 {
            attempt(|| Ok(log_rank_spells::<f64>(&nb_groups)?))
        } else {
            json!({ "error": "fewer than two neighborhoods" })
        };
        let prepost = attempt(|| Ok(log_rank_spells::<f64>(&[&sp.split.pre, &sp.split.post])?));
        let na = nelson_aalen::<f64>(&sp.all);
        let mut cum = String::from("time_years,cumulative_hazard\n");
        for (t, h) in na.event_times.iter().zip(&na.hazard) {
            cum.push_str(&format!("{:.6},{:.8}\n", years(*t), h));
        }
        let summary = json!({
            "neighborhoods": present,
            "bootstrap_replicates": b,
            "ci_level": CI_LEVEL,
            "medians": medians,
            "log_rank_neighborhoods": across,
            "log_rank_pre_post": prepost,
        });
        for (name, buf) in curves {
            self.bundle.write(&name, &buf)?;
        }
        self.bundle.write("cumulative_hazard.csv", cum.as_bytes())?;
        self.bundle.write_json("survival_medians.json", &summary)
    }

    fn hazard(&mut self) -> Result<()> {
        let sp = self.spells()?;
        let daily = daily_hazard::<f64>(&sp.all)?;
        let profile = HazardProfile::from_daily(
            &daily,
            self.cfg.hazard_aggregation,
            self.cfg.hazard_window,
            self.cfg.hazard_min_excess,
        )?;
        let mut csv = String::from("day,events,at_risk,rate\n");
        for i in 0..daily.len() {
            csv.push_str(&format!(
                "{},{},{},{:.8}\n",
                daily.index[i], daily.events[i], daily.at_risk[i], daily.rate[i]
            ));
        }
        self.bundle.write("hazard_daily.csv", csv.as_bytes())?;
        self.bundle.write_with("fig3_hazard.csv", |w| profile.write_table(w))?;
        self.bundle.write_json("fig3_hazard.json", &profile)
    }

    fn fit(&mut self) -> Result<()> {
        let sp = self.spells()?;
        let durations: Vec<f64> = sp
            .all
            .iter()
            .filter(|s| s.genuine && s.is_event())
            .map(OwnershipSpell::duration_years)
            .collect();
        let ranking = compare_families_with::<f64>(
            &durations,
            &self.cfg.families,
            self.cfg.fit_bin_years,
            self.seed,
            self.cfg.fit_restarts,
        )?;
        let label = |m: &MixtureModel<f64>| format!("{}_{}", m.family.name(), m.n_components());
        let rows: Vec<Value> = ranking
            .fits
            .iter()
            .enumerate()
            .map(|(rank, f)| {
                let params: BTreeMap<&str, f64> = f
                    .parameter_names
                    .iter()
                    .map(String::as_str)
                    .zip(f.parameters.iter().copied())
                    .collect();
                json!({
                    "rank": rank + 1,
                    "model": label(&f.model),
                    "family": f.model.family,
                    "n_components": f.model.n_components(),
                    "rmse": f.rmse,
                    "aic": f.aic,
                    "sse": f.sse,
                    "parameters": params,
                    "converged": f.converged,
                    "degenerate": f.degenerate,
                    "restarts_converged": f.n_restarts_converged,
                    "restarts": f.n_restarts_used,
                })
            })
            .collect();
        let mut csv = String::from("lo,hi,count,density");
        for f in &ranking.fits {
            csv.push(',');
            csv.push_str(&label(&f.model));
        }
        csv.push('\n');
        let bins = &ranking.fits[0].bins;
        for (j, bin) in bins.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{:.8}", bin.lo, bin.hi, bin.count, bin.density));
            for f in &ranking.fits {
                csv.push_str(&format!(",{:.8}", f.bins[j].fitted));
            }
            csv.push('\n');
        }
        self.bundle.write("fit_histogram.csv", csv.as_bytes())?;
        self.bundle.write_json(
            "fit_families.json",
            &json!({
                "n_durations": durations.len(),
                "bin_years": self.cfg.fit_bin_years,
                "unstable": ranking.unstable,
                "ranking": rows,
            }),
        )
    }

    fn cii(&mut self) -> Result<()> {
        let sp = self.spells()?;
        let rows = cii_by_neighborhood(&sp.split, self.cfg.bootstrap_replicates, self.seed)?;
        self.bundle.write_with("table1.csv", |w| write_cii_table(w, &rows))?;
        self.bundle.write_json("table1.json", &rows)
    }

    fn stats(&mut self) -> Result<()> {
        let seed = self.seed;
        let sp = self.spells()?;
        let closed = |s: &&OwnershipSpell| s.genuine && s.is_event();

        let mut groups = Vec::new();
        for nb in Neighborhood::ALL {
            let d: Vec<f64> = sp
                .all
                .iter()
                .filter(|s| s.neighborhood == nb)
                .filter(closed)
                .map(OwnershipSpell::duration_years)
                .collect();
            if d.len() >= 2 {
                groups.push(SampleVector::labeled(d, nb.label())?);
            }
        }
        let anova = attempt(|| {
            let (test, pairs) = anova_tukey(&groups)?;
            let labels: Vec<_> = groups.iter().map(|g| g.group_label.clone()).collect();
            let pairs: Vec<Value> = pairs
                .iter()
                .map(|p| {
                    json!({
                        "a": labels[p.i],
                        "b": labels[p.j],
                        "mean_diff": p.mean_diff,
                        "q": p.q,
                        "p_adj": p.p_adj,
                    })
                })
                .collect();
            Ok(json!({ "anova": test, "tukey": pairs }))
        });
        let all_closed: Vec<f64> = sp
            .all
            .iter()
            .filter(closed)
            .map(OwnershipSpell::duration_years)
            .collect();
        let shapiro = attempt(|| Ok(shapiro_wilk_seeded(&SampleVector::new(all_closed)?, seed)?));

        // neighborhood median tenure against mean appraisal
        let mut fig2 = String::from("neighborhood,median_tenure_years,mean_appraisal,n_appraised\n");
        let (mut mt, mut app) = (Vec::new(), Vec::new());
        for nb in Neighborhood::ALL {
            let s = in_nbhd(&sp.all, nb);
            if !has_genuine(&s) {
                continue;
            }
            let median = median_tenure(&kaplan_meier::<f64>(&s)?).value.map(years);
            let vals: Vec<f64> = s.iter().filter_map(|x| x.appraisal).collect();
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            let cell = |v: Option<f64>, p: usize| v.map_or("NA".to_string(), |x| format!("{x:.prec$}", prec = p));
            fig2.push_str(&format!("{nb},{},{},{}\n", cell(median, 4), cell(mean, 2), vals.len()));
            if let (Some(m), Some(a)) = (median, mean) {
                mt.push(m);
                app.push(a);
            }
        }
        let r2 = attempt(|| {
            if mt.len() < 3 {
                bail!("fewer than three neighborhoods with both a median and appraisals");
            }
            Ok(simple_linear_r2(&app, &mt)?)
        });
        let ols = attempt(|| Ok(ols_standardized(&mt, &[("appraisal", app.as_slice())])?));

        self.bundle.write("fig2_tenure_appraisal.csv", fig2.as_bytes())?;
        self.bundle.write_json(
            "stats_tenure.json",
            &json!({
                "anova_by_neighborhood": anova,
                "shapiro_durations": shapiro,
                "appraisal_r2": r2,
                "appraisal_ols": ols,
            }),
        )
    }

    fn survey(&mut self) -> Result<()> {
        let path = self.cfg.survey.as_ref().expect("checked by the caller");
        let codebook = match &self.cfg.codebook {
            Some(p) => Codebook::load(p)?,
            None => Codebook::canonical(),
        };
        let enc = encode_responses_file(path, &codebook, self.cfg.missing)?;
        let rs = &enc.responses;
        if rs.is_empty() {
            bail!("no usable survey responses in {}", path.display());
        }
        let min = self.cfg.min_group_size;

        let cuts = tenure_bin_search(rs, &self.cfg.tenure_bins);
        let cut_list = cuts.as_ref().map(Vec::clone).unwrap_or_default();
        let tables = |w: Option<&[StratumWeight]>| -> Result<Vec<(&'static str, Vec<u8>)>> {
            let mut out = Vec::new();
            for (name, by) in [
                ("fig4_wtp", GroupBy::WtpScore),
                ("fig6_tenure_bins", GroupBy::TenureBin(cut_list.clone())),
                ("fig7_generation", GroupBy::Generation),
                ("survey_neighborhood", GroupBy::Neighborhood),
            ] {
                let t = aggregate_groups::<f64>(rs, &by, w, min)?;
                let mut buf = Vec::new();
                write_group_table(&mut buf, &t)?;
                out.push((name, buf));
            }
            Ok(out)
        };
        for (name, buf) in tables(None)? {
            self.bundle.write(&format!("{name}.csv"), &buf)?;
        }
        self.bundle
            .write("fig5_wtp_generation.csv", wtp_by_generation(rs)?.as_bytes())?;
        if !self.cfg.population.is_empty() {
            let weights = post_stratify(rs, &self.cfg.population, self.cfg.survey_tau)?;
            let mut csv = String::from("neighborhood,population_share,sample_share,weight\n");
            for w in &weights {
                csv.push_str(&format!(
                    "{},{:.6},{:.6},{:.6}\n",
                    w.neighborhood, w.population_share, w.sample_share, w.weight
                ));
            }
            self.bundle.write("survey_weights.csv", csv.as_bytes())?;
            for (name, buf) in tables(Some(&weights))? {
                self.bundle.write(&format!("{name}_weighted.csv"), &buf)?;
            }
        }

        self.bundle.write_json("appendix_pairwise.json", &wtp_battery(rs)?)?;
        self.bundle.write_json("appendix_r2.json", &r2_ladder(rs)?)?;

        let by_generation = |f: fn(&SurveyResponse) -> Option<f64>| {
            attempt(|| {
                let groups: Vec<SampleVector<f64>> = Generation::ALL
                    .iter()
                    .filter_map(|&g| {
                        let v: Vec<f64> = rs.iter().filter(|r| r.generation == g).filter_map(f).collect();
                        (v.len() >= 2).then(|| SampleVector::labeled(v, g.label()))
                    })
                    .collect::<tenure_core::Result<_>>()?;
                Ok(kruskal_wallis(&groups)?)
            })
        };
        let sat_gen = by_generation(|r| Some(f64::from(r.satisfaction)));
        let rec_gen = by_generation(|r| r.recommit.map(|b| if b { 1.0 } else { 0.0 }));
        self.bundle.write_json(
            "survey_tests.json",
            &json!({
                "responses": rs.len(),
                "dropped": enc.dropped,
                "imputed": enc.imputed,
                "tenure_bin_cuts": match &cuts {
                    Ok(c) => json!(c),
                    Err(e) => json!({ "error": e.to_string() }),
                },
                "satisfaction_by_generation": sat_gen,
                "recommit_by_generation": rec_gen,
            }),
        )
    }
}

fn wtp_of(r: &SurveyResponse) -> Result<u8> {
    Ok(r.wtp()?.score)
}

/// Share of each WTP score within each generation.
fn wtp_by_generation(rs: &[SurveyResponse]) -> Result<String> {
    let mut counts: BTreeMap<Generation, [usize; 5]> = BTreeMap::new();
    for r in rs {
        counts.entry(r.generation).or_default()[usize::from(wtp_of(r)?) - 1] += 1;
    }
    let mut csv = String::from("generation,n,mean_wtp,share_1,share_2,share_3,share_4,share_5\n");
    for (g, c) in counts {
        let n: usize = c.iter().sum();
        let mean = c.iter().enumerate().map(|(i, k)| (i + 1) * k).sum::<usize>() as f64 / n as f64;
        csv.push_str(&format!("{g},{n},{mean:.6}"));
        for k in c {
            csv.push_str(&format!(",{:.6}", k as f64 / n as f64));
        }
        csv.push('\n');
    }
    Ok(csv)
}

fn satisfaction_by_wtp(rs: &[SurveyResponse]) -> Result<Vec<(u8, Vec<f64>)>> {
    let mut by: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for r in rs {
        by.entry(wtp_of(r)?).or_default().push(f64::from(r.satisfaction));
    }
    Ok(by.into_iter().collect())
}

/// Kruskal-Wallis over the WTP groups and every pairwise comparison.
fn wtp_battery(rs: &[SurveyResponse]) -> Result<Value> {
    let groups = satisfaction_by_wtp(rs)?;
    let samples: Vec<(u8, SampleVector<f64>)> = groups
        .iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(s, v)| Ok((*s, SampleVector::labeled(v.clone(), s.to_string())?)))
        .collect::<Result<_>>()?;
    let kw = attempt(|| {
        let v: Vec<_> = samples.iter().map(|(_, s)| s.clone()).collect();
        Ok(kruskal_wallis(&v)?)
    });
    let mut pairs = Vec::new();
    for (i, (a, x)) in samples.iter().enumerate() {
        for (b, y) in &samples[i + 1..] {
            pairs.push(json!({
                "a": a,
                "b": b,
                "n_a": x.values().len(),
                "n_b": y.values().len(),
                "mann_whitney": attempt(|| Ok(mann_whitney_u(x, y)?)),
                "welch_t": attempt(|| Ok(welch_t(x, y)?)),
            }));
        }
    }
    Ok(json!({
        "group_sizes": groups.iter().map(|(s, v)| (s.to_string(), v.len())).collect::<BTreeMap<_, _>>(),
        "kruskal_wallis": kw,
        "pairs": pairs,
    }))
}

/// Satisfaction against WTP score at household, neighborhood and group level.
fn r2_ladder(rs: &[SurveyResponse]) -> Result<Value> {
    let wtp: Vec<f64> = rs.iter().map(|r| wtp_of(r).map(f64::from)).collect::<Result<_>>()?;
    let sat: Vec<f64> = rs.iter().map(|r| f64::from(r.satisfaction)).collect();
    let household = attempt(|| Ok(simple_linear_r2(&wtp, &sat)?));

    let mut by_nb: BTreeMap<Neighborhood, (f64, f64, usize)> = BTreeMap::new();
    for (r, w) in rs.iter().zip(&wtp) {
        let e = by_nb.entry(r.neighborhood).or_default();
        e.0 += w;
        e.1 += f64::from(r.satisfaction);
        e.2 += 1;
    }
    let (nx, ny): (Vec<f64>, Vec<f64>) = by_nb.values().map(|(w, s, n)| (w / *n as f64, s / *n as f64)).unzip();
    let neighborhood = attempt(|| Ok(simple_linear_r2(&nx, &ny)?));

    let groups = satisfaction_by_wtp(rs)?;
    let (gx, gy): (Vec<f64>, Vec<f64>) = groups
        .iter()
        .map(|(s, v)| (f64::from(*s), v.iter().sum::<f64>() / v.len() as f64))
        .unzip();
    let group = attempt(|| Ok(simple_linear_r2(&gx, &gy)?));
    Ok(json!({
        "household": { "n": wtp.len(), "r2": household },
        "neighborhood": { "n": nx.len(), "r2": neighborhood },
        "wtp_group": { "n": gx.len(), "r2": group },
    }))
}

pub struct SimFiles {
    pub transactions: Vec<u8>,
    pub survey: Vec<u8>,
    pub codebook: Vec<u8>,
    pub truth: Vec<u8>,
}

/// Synthetic transactions and survey responses with known parameters.
pub fn simulate(sim: &SimlabConfig, cfg: &RunConfig, seed: u64) -> Result<SimFiles> {
    let [w, k1, l1, k2, l2] = sim.mixture;
    let mixture = MixtureModel::weibull_pair(w, WeibullParams::new(k1, l1)?, WeibullParams::new(k2, l2)?)
        .context("simlab.mixture")?;
    let mut spec = SimSpec::new(mixture.clone(), sim.n_parcels, cfg.segmentation.observation_end, seed);
    spec.entry_process = sim.entry;
    let spells = gen_parcel_histories(&spec)?;
    let mut transactions = Vec::new();
    write_transactions(&mut transactions, &spells_to_transactions(&spells))?;

    let shape = UShape {
        dip_start: sim.dip_start,
        dip_end: sim.dip_end,
        dip_depth: sim.dip_depth,
    };
    let responses = gen_survey_synthetic(sim.n_survey, shape, seed)?;
    let mut survey = Vec::new();
    write_responses(&mut survey, &responses)?;

    let mut codebook = serde_json::to_vec_pretty(&Codebook::canonical())?;
    codebook.push(b'\n');
    let mut truth = serde_json::to_vec_pretty(&json!({
        "seed": seed,
        "mixture": mixture,
        "n_parcels": sim.n_parcels,
        "entry_process": sim.entry,
        "censor_date": cfg.segmentation.observation_end,
        "survey": { "n": sim.n_survey, "shape": shape },
    }))?;
    truth.push(b'\n');
    Ok(SimFiles {
        transactions,
        survey,
        codebook,
        truth,
    })
}
