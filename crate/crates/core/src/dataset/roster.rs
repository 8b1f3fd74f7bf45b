//! Company rosters: the bundled list, CSV input and seeded synthetic names.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

const BUNDLED: &str = include_str!("../../data/companies.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRecord {
    pub name: String,
    pub ticker: String,
    pub aliases: Vec<String>,
}

#[derive(Deserialize, Serialize)]
struct CsvRow {
    name: String,
    ticker: String,
    aliases: String,
}

/// The three ways a query or question can refer to a company.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceForm {
    Name,
    Ticker,
    Alias,
}

impl SurfaceForm {
    pub const CYCLE: [SurfaceForm; 3] = [SurfaceForm::Name, SurfaceForm::Ticker, SurfaceForm::Alias];
}

impl CompanyRecord {
    pub fn new(name: impl Into<String>, ticker: impl Into<String>, aliases: Vec<String>) -> Self {
        Self { name: name.into(), ticker: ticker.into(), aliases }
    }

    /// Lowercase name with every run of non-alphanumerics collapsed to `_`.
    pub fn slug(&self) -> String {
        slugify(&self.name)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |why: &str| DatasetError::InvalidCompany(format!("{}: {why}", self.name));
        if self.slug().is_empty() {
            return Err(bad("name has no letters or digits"));
        }
        if self.ticker.is_empty() || self.ticker != self.ticker.to_uppercase() {
            return Err(bad("ticker must be non-empty and uppercase"));
        }
        if self.aliases.is_empty() || self.aliases.iter().any(|a| a.trim().is_empty()) {
            return Err(bad("aliases must be a non-empty list of non-empty strings"));
        }
        Ok(())
    }

    /// First alias that differs from the name, or the name itself.
    pub fn alias(&self) -> &str {
        self.aliases.iter().find(|a| **a != self.name).unwrap_or(&self.name)
    }

    pub fn surface(&self, form: SurfaceForm) -> &str {
        match form {
            SurfaceForm::Name => &self.name,
            SurfaceForm::Ticker => &self.ticker,
            SurfaceForm::Alias => self.alias(),
        }
    }
}

pub fn slugify(text: &str) -> String {
    let mut slug = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            slug.push(c);
        } else if !slug.is_empty() && !slug.ends_with('_') {
            slug.push('_');
        }
    }
    slug.trim_end_matches('_').to_owned()
}

/// Rejects empty rosters, invalid records and repeated slugs or tickers.
pub fn validate_roster(companies: &[CompanyRecord]) -> Result<(), DatasetError> {
    if companies.is_empty() {
        return Err(DatasetError::EmptyRoster);
    }
    let mut slugs = HashSet::new();
    let mut tickers = HashSet::new();
    for c in companies {
        c.validate()?;
        if !slugs.insert(c.slug()) || !tickers.insert(c.ticker.clone()) {
            return Err(DatasetError::DuplicateCompany(c.name.clone()));
        }
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<CompanyRecord>, DatasetError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| DatasetError::Csv(e.to_string()))?;
            let mut aliases: Vec<String> =
                row.aliases.split('|').map(str::trim).filter(|a| !a.is_empty()).map(str::to_owned).collect();
            if aliases.is_empty() {
                aliases.push(row.name.trim().to_owned());
            }
            Ok(CompanyRecord::new(row.name.trim(), row.ticker.trim(), aliases))
        })
        .collect()
}

pub fn load_csv(path: &Path) -> Result<Vec<CompanyRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

pub fn to_csv(companies: &[CompanyRecord]) -> Result<String, DatasetError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for c in companies {
        writer
            .serialize(CsvRow { name: c.name.clone(), ticker: c.ticker.clone(), aliases: c.aliases.join("|") })
            .map_err(|e| DatasetError::Csv(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| DatasetError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn bundled_roster() -> Vec<CompanyRecord> {
    parse_csv(BUNDLED).expect("bundled roster parses")
}

const STEMS: [&str; 30] = [
    "Nor", "Vel", "Quan", "Zen", "Ard", "Bel", "Cor", "Dra", "Elk", "Fen", "Gal", "Hal", "Ix", "Jor", "Kel",
    "Lum", "Mar", "Nex", "Orb", "Pax", "Quil", "Ros", "Syl", "Tor", "Ul", "Vor", "Wex", "Xan", "Yor", "Zel",
];
const ENDINGS: [&str; 10] = ["ara", "ex", "ion", "ova", "ent", "ium", "ar", "is", "on", "yx"];
const SECTORS: [&str; 8] = ["Holdings", "Systems", "Labs", "Foods", "Energy", "Motors", "Health", "Logistics"];

/// The bundled roster followed by seeded synthetic companies, `n` in total.
pub fn standard_roster(n: usize, seed: u64) -> Vec<CompanyRecord> {
    let mut out: Vec<CompanyRecord> = bundled_roster().into_iter().take(n).collect();
    let mut slugs: HashSet<String> = out.iter().map(CompanyRecord::slug).collect();
    let mut tickers: HashSet<String> = out.iter().map(|c| c.ticker.clone()).collect();
    let mut candidates: Vec<(String, &str)> = STEMS
        .iter()
        .flat_map(|s| ENDINGS.iter().map(move |e| format!("{s}{e}")))
        .flat_map(|word| SECTORS.iter().map(move |sector| (word.clone(), *sector)))
        .collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (word, sector) in candidates {
        if out.len() >= n {
            break;
        }
        let name = format!("{word} {sector}");
        if !slugs.insert(slugify(&name)) {
            continue;
        }
        let stem: String = word.to_uppercase().chars().take(3).collect();
        let base = format!("{stem}{}", &sector[..1]);
        let two = &stem[..2];
        let ticker = std::iter::once(base.clone())
            .chain(('A'..='Z').map(|c| format!("{stem}{c}")))
            .chain(('A'..='Z').flat_map(|a| ('A'..='Z').map(move |b| format!("{two}{a}{b}"))))
            .find(|t| !tickers.contains(t))
            .expect("ticker space is large enough");
        tickers.insert(ticker.clone());
        out.push(CompanyRecord::new(name, ticker, vec![format!("{word} Group")]));
    }
    assert_eq!(out.len(), n, "synthetic roster is limited to {} companies", STEMS.len() * ENDINGS.len() * SECTORS.len());
    out
}
