use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::claims::{ClaimRecord, ClaimType, Portfolio};
use crate::copula::{
    copula_observations, fit_outer, select_copula, CopulaFamily, CopulaFit, CopulaSpec, DelayCountPair, FamilyTag,
    HacSpec, OuterFit,
};
use crate::delay::{fit_delay, DelayFit, DelayModel, DelayVariant};
use crate::error::{Error, Result};
use crate::freq::{CountFamily, FamilyChoice, OccurrenceModel};
use crate::payment::{fit_intensity, CountProcess, IntensityFit, IntensityVariant, PaymentHistory};
use crate::severity::{fit_severity, IidFamily, SeverityFit, SeverityModel, SeverityVariant};
use crate::time::{Day, DAYS_PER_YEAR};

/// The fitted components for one claim type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeModel {
    pub claim_type: ClaimType,
    /// Earliest accident date covered; no occurrences are simulated before it.
    pub exposure_start: Day,
    pub occurrence: OccurrenceModel,
    pub delay: DelayModel,
    pub payments: CountProcess,
    pub severity: SeverityModel,
    pub copula: CopulaSpec,
}

/// How bodily-injury and material-damage claims are paired for the inter-type copula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind")]
pub enum MatchKey {
    /// Claims sharing an accident date are paired in claim-id order.
    #[default]
    AccidentDate,
    /// Claims sharing an accident date and the claim-id prefix before `separator`.
    IdPrefix { separator: char },
}

impl MatchKey {
    fn key<'a>(&self, c: &'a ClaimRecord) -> (Day, &'a str) {
        match self {
            MatchKey::AccidentDate => (c.accident_date, ""),
            MatchKey::IdPrefix { separator } => {
                (c.accident_date, c.claim_id.split(*separator).next().unwrap_or(&c.claim_id))
            }
        }
    }

    /// Index pairs `(i, j)` of matched claims from the two lists.
    pub fn pair(&self, first: &[ClaimRecord], second: &[ClaimRecord]) -> Vec<(usize, usize)> {
        let mut groups: BTreeMap<(Day, &str), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, c) in first.iter().enumerate() {
            groups.entry(self.key(c)).or_default().0.push(i);
        }
        for (j, c) in second.iter().enumerate() {
            groups.entry(self.key(c)).or_default().1.push(j);
        }
        let mut out = Vec::new();
        for (_, (mut xs, mut ys)) in groups {
            xs.sort_by(|&a, &b| first[a].claim_id.cmp(&first[b].claim_id));
            ys.sort_by(|&a, &b| second[a].claim_id.cmp(&second[b].claim_id));
            out.extend(xs.into_iter().zip(ys));
        }
        out
    }
}

/// Per-type components plus the copula linking the two claim types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularModel {
    pub types: Vec<TypeModel>,
    /// Present when two claim types are modelled; leaves mirror the per-type copulas.
    pub inter_type: Option<HacSpec>,
}

impl GranularModel {
    pub fn type_model(&self, ty: ClaimType) -> Option<&TypeModel> {
        self.types.iter().find(|m| m.claim_type == ty)
    }

    /// The outer copula when it couples the two types, `None` under independence.
    pub fn coupling(&self) -> Option<&HacSpec> {
        self.inter_type.as_ref().filter(|h| h.outer != CopulaFamily::Independence)
    }

    /// Same model with every payment amount multiplied by `c`.
    pub fn with_severity_scale(&self, c: f64) -> GranularModel {
        let mut m = self.clone();
        for t in &mut m.types {
            t.severity = t.severity.scaled(c);
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<GranularModel> {
        let m: GranularModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<GranularModel> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        GranularModel::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.types.is_empty() {
            return Err(Error::InvalidParameter("model has no claim types".into()));
        }
        for t in &self.types {
            t.copula.validate()?;
            if t.occurrence.years.is_empty() {
                return Err(Error::InvalidParameter(format!("{}: occurrence model has no years", t.claim_type)));
            }
        }
        if let Some(h) = &self.inter_type {
            HacSpec::new(h.outer, h.leaves)?;
        }
        Ok(())
    }
}

/// Model families and options for each fitting phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub occurrence: FamilyChoice<CountFamily>,
    pub delay: DelayVariant,
    pub intensity: FamilyChoice<IntensityVariant>,
    pub severity: SeverityVariant,
    pub copula_families: Vec<FamilyTag>,
    pub copula_time_varying: bool,
    /// Fit the copula across claim types when both are present.
    pub inter_type: bool,
    pub match_key: MatchKey,
    /// Years whose accidents are reported by the cutoff with at least this average
    /// probability count as complete for the occurrence model.
    pub completeness: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            occurrence: FamilyChoice::Aic(CountFamily::ALL.to_vec()),
            delay: DelayVariant::WeibullTv,
            intensity: FamilyChoice::Aic(vec![IntensityVariant::ExponentialDecay, IntensityVariant::PowerDecay]),
            severity: SeverityVariant::Iid(FamilyChoice::Aic(vec![IidFamily::LogNormal, IidFamily::Gamma])),
            copula_families: FamilyTag::ALL.to_vec(),
            copula_time_varying: true,
            inter_type: true,
            match_key: MatchKey::AccidentDate,
            completeness: 0.99,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: i32,
    pub family: CountFamily,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeFitReport {
    pub claim_type: ClaimType,
    pub n_claims: usize,
    pub n_payments: usize,
    pub occurrence: Vec<YearSummary>,
    pub last_complete_year: Option<i32>,
    pub delay: DelayFit,
    /// Every candidate that fitted, best first.
    pub intensity: Vec<IntensityFit>,
    pub severity: SeverityFit,
    /// Every candidate that fitted, best first.
    pub copula: Vec<CopulaFit>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub data_cutoff: Day,
    pub types: Vec<TypeFitReport>,
    pub inter_type: Option<OuterFit>,
    pub notices: Vec<String>,
}

fn intensity_aic(f: &IntensityFit) -> f64 {
    2.0 * f.estimates.len() as f64 - 2.0 * f.log_likelihood
}

/// Mean probability that an accident of `year` is reported by the end of `cutoff`.
fn reported_share(delay: &DelayModel, year: i32, first: Day, cutoff: Day) -> f64 {
    let lo = Day::year_start(year).max(first);
    let hi = Day::year_start(year + 1).offset(-1).min(cutoff);
    if hi < lo {
        return 1.0;
    }
    let n = lo.days_until(hi) + 1;
    let sum: f64 = (0..n)
        .map(|i| {
            let d = lo.offset(i);
            delay.cdf(f64::from(d.0), f64::from(d.days_until(cutoff)) + 1.0)
        })
        .sum();
    sum / f64::from(n)
}

fn fit_type(p: &Portfolio, ty: ClaimType, cfg: &FitConfig) -> Result<(TypeModel, TypeFitReport)> {
    let cutoff = p.data_cutoff();
    let claims = p.claims();
    let mut warnings = Vec::new();
    let phase = |name: &str| format!("{name} fit for {ty}");

    let mut occurrence = OccurrenceModel::fit(p, &cfg.occurrence).map_err(|e| e.context(phase("occurrence")))?;
    let delay_fit = fit_delay(p, cfg.delay).map_err(|e| e.context(phase("delay")))?;
    warnings.extend(delay_fit.warnings.iter().cloned());
    let delay = delay_fit.model.clone();

    // Late years lack their unreported accidents; their gaps look too long.
    let first = claims[0].accident_date;
    let complete: Vec<i32> = occurrence
        .years
        .iter()
        .map(|y| y.year)
        .filter(|&y| reported_share(&delay, y, first, cutoff) >= cfg.completeness)
        .collect();
    let last_year = occurrence.years.last().expect("fitted years").year;
    occurrence.last_complete_year = match complete.last() {
        Some(&y) if y == last_year => None,
        Some(&y) => {
            warnings.push(format!("occurrence years after {y} are incompletely reported; {y} is carried forward"));
            Some(y)
        }
        None => {
            let y = occurrence.years[0].year;
            warnings.push(format!("no accident year is {:.0}% reported; using {y} throughout", cfg.completeness * 100.0));
            Some(y)
        }
    };
    if occurrence.last_complete_year.is_some() {
        warnings.push("delay fitted on reported claims only; not corrected for right truncation".into());
    }

    let histories: Vec<PaymentHistory> = claims.iter().map(|c| PaymentHistory::from_claim(c, cutoff)).collect();
    let variants = match &cfg.intensity {
        FamilyChoice::Fixed(v) => vec![*v],
        FamilyChoice::Aic(v) => v.clone(),
    };
    let mut intensity = Vec::new();
    let mut last_err = None;
    for v in variants {
        match fit_intensity(&histories, v) {
            Ok(f) => intensity.push(f),
            Err(e) => last_err = Some(e),
        }
    }
    if intensity.is_empty() {
        let e = last_err.unwrap_or_else(|| Error::InvalidParameter("no intensity variants requested".into()));
        return Err(e.context(phase("payment intensity")));
    }
    intensity.sort_by(|a, b| intensity_aic(a).total_cmp(&intensity_aic(b)));
    if intensity[0].at_bound {
        warnings.push("payment intensity estimate on a search bound".into());
    }
    let payments = CountProcess::new(intensity[0].intensity);

    let amounts: Vec<Vec<f64>> = claims.iter().map(|c| c.payments.iter().map(|x| x.amount).collect()).collect();
    let severity = fit_severity(&amounts, &cfg.severity).map_err(|e| e.context(phase("severity")))?;
    warnings.extend(severity.warnings.iter().cloned());

    let pairs: Vec<DelayCountPair> = claims
        .iter()
        .map(|c| DelayCountPair {
            t: f64::from(c.accident_date.0),
            w: f64::from(c.reporting_delay()) + 0.5,
            n: c.payments.len() as u64,
            tau: (f64::from(c.reporting_date.days_until(cutoff)) + 1.0) / DAYS_PER_YEAR,
        })
        .collect();
    let obs = copula_observations(&pairs, &delay, &payments);
    let copula = select_copula(&obs, &cfg.copula_families, cfg.copula_time_varying)
        .map_err(|e| e.context(phase("copula")))?;
    if copula[0].boundary {
        warnings.push(format!("{:?} copula estimate on a search bound", copula[0].spec.family));
    }

    let occurrence_summary = occurrence
        .years
        .iter()
        .map(|y| YearSummary {
            year: y.year,
            family: y.fit.distribution.family(),
            estimates: y.fit.estimates.clone(),
            std_errors: y.fit.std_errors.clone(),
            log_likelihood: y.fit.log_likelihood,
            aic: y.fit.aic(),
        })
        .collect();
    let model = TypeModel {
        claim_type: ty,
        exposure_start: first,
        occurrence: occurrence.clone(),
        delay,
        payments,
        severity: severity.model.clone(),
        copula: copula[0].spec,
    };
    let report = TypeFitReport {
        claim_type: ty,
        n_claims: claims.len(),
        n_payments: claims.iter().map(|c| c.payments.len()).sum(),
        occurrence: occurrence_summary,
        last_complete_year: occurrence.last_complete_year,
        delay: delay_fit,
        intensity,
        severity,
        copula,
        warnings,
    };
    Ok((model, report))
}

/// Fits every phase in order, margins before copulas, on the claims reported by the
/// portfolio's cutoff.
pub fn fit_model(p: &Portfolio, cfg: &FitConfig) -> Result<(GranularModel, FitReport)> {
    let mut types = Vec::new();
    let mut reports = Vec::new();
    let mut notices = Vec::new();
    for ty in p.claim_types() {
        let (m, r) = fit_type(&p.of_type(ty), ty, cfg)?;
        types.push(m);
        reports.push(r);
    }
    if types.is_empty() {
        return Err(Error::InsufficientData("portfolio has no claims".into()));
    }

    let mut inter_type = None;
    let mut outer_fit = None;
    if types.len() == 2 && cfg.inter_type {
        let leaves = [types[0].copula, types[1].copula];
        let family = leaves[0].family;
        let nestable = family == leaves[1].family && matches!(family, FamilyTag::Clayton | FamilyTag::Gumbel);
        if nestable {
            let first = p.of_type(types[0].claim_type);
            let second = p.of_type(types[1].claim_type);
            let u = |m: &TypeModel, c: &ClaimRecord| {
                m.delay.cdf(f64::from(c.accident_date.0), f64::from(c.reporting_delay()) + 0.5)
            };
            let pairs: Vec<(f64, f64)> = cfg
                .match_key
                .pair(first.claims(), second.claims())
                .into_iter()
                .map(|(i, j)| (u(&types[0], &first.claims()[i]), u(&types[1], &second.claims()[j])))
                .collect();
            match fit_outer(&pairs, family, &leaves) {
                Ok(f) => {
                    if f.projected {
                        notices.push("inter-type copula projected onto the nesting bound".into());
                    }
                    inter_type = Some(HacSpec::new(f.outer, leaves)?);
                    outer_fit = Some(f);
                }
                Err(e) => {
                    notices.push(format!("inter-type copula not fitted ({e}); types treated as independent"));
                    inter_type = Some(HacSpec::independent(leaves));
                }
            }
        } else {
            notices.push(format!(
                "claim-type copulas {:?} and {:?} do not nest; types treated as independent",
                leaves[0].family, leaves[1].family
            ));
            inter_type = Some(HacSpec::independent(leaves));
        }
    } else if types.len() == 1 {
        notices.push(format!("only {} claims present; inter-type stage skipped", types[0].claim_type));
    }
    for n in &notices {
        log::info!("{n}");
    }
    let model = GranularModel { types, inter_type };
    Ok((model, FitReport { data_cutoff: p.data_cutoff(), types: reports, inter_type: outer_fit, notices }))
}
