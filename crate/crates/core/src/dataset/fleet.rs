//! Per-company tool fleets and the MCP service that backs them.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::market::{SyntheticMarket, TARGET_TYPES, TIMELINES};
use super::roster::{validate_roster, CompanyRecord};
use super::DatasetError;
use crate::mcp::{ToolDescriptor, ToolOutcome, ToolService};
use crate::tool_model::{ParamKind, ParameterSpec, ToolDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToolTemplate {
    pub suffix: &'static str,
    pub description: &'static str,
}

pub const TOOL_TEMPLATES: [ToolTemplate; 5] = [
    ToolTemplate {
        suffix: "current_stock_price",
        description: "Return the most recent trading price for {company}'s stock, or -1 if unavailable.",
    },
    ToolTemplate {
        suffix: "stock_price_history",
        description: "Retrieve the closing stock prices for {company} over the past year with a daily, weekly, or monthly resolution. Returns the last 10 values.",
    },
    ToolTemplate {
        suffix: "analyst_price_targets",
        description: "Fetch a specific analyst price target for {company}, such as current, high, low, mean, or median forecasted price.",
    },
    ToolTemplate {
        suffix: "revenue",
        description: "Get {company}'s total revenue by year. If no year is provided, returns all available revenue data.",
    },
    ToolTemplate {
        suffix: "net_income",
        description: "Get {company}'s net income by year. If no year is specified, returns all available net income data.",
    },
];

impl ToolTemplate {
    pub fn by_suffix(suffix: &str) -> Option<&'static ToolTemplate> {
        TOOL_TEMPLATES.iter().find(|t| t.suffix == suffix)
    }

    pub fn parameters(&self) -> Vec<ParameterSpec> {
        match self.suffix {
            "stock_price_history" => vec![ParameterSpec::enumeration(
                "timeline",
                TIMELINES,
                "Resolution: d (daily), w (weekly) or m (monthly)",
            )],
            "analyst_price_targets" => {
                vec![ParameterSpec::enumeration("target_type", TARGET_TYPES, "Which price target to return")]
            }
            "revenue" | "net_income" => vec![ParameterSpec::new("year", ParamKind::OptionalInteger, "Fiscal year")],
            _ => vec![],
        }
    }

    pub fn tool_name(&self, slug: &str) -> String {
        format!("get_{slug}_{}", self.suffix)
    }

    pub fn instantiate(&self, company: &CompanyRecord) -> ToolDocument {
        let slug = company.slug();
        let name = self.tool_name(&slug);
        ToolDocument {
            tool_id: name.clone(),
            name,
            description: self.description.replace("{company}", &company.name),
            parameters: self.parameters(),
            synthetic_questions: vec![],
            origin_server: slug,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyServer {
    pub server_id: String,
    pub company: CompanyRecord,
    pub tools: Vec<ToolDocument>,
}

pub fn generate_fleet(companies: &[CompanyRecord]) -> Result<Vec<CompanyServer>, DatasetError> {
    validate_roster(companies)?;
    Ok(companies
        .iter()
        .map(|c| CompanyServer {
            server_id: c.slug(),
            company: c.clone(),
            tools: TOOL_TEMPLATES.iter().map(|t| t.instantiate(c)).collect(),
        })
        .collect())
}

/// One company's MCP server, answering from the synthetic market.
pub struct CompanyService {
    server: CompanyServer,
    market: SyntheticMarket,
}

impl CompanyService {
    pub fn new(server: CompanyServer, data_seed: u64) -> Self {
        Self { server, market: SyntheticMarket::new(data_seed) }
    }

    pub fn server(&self) -> &CompanyServer {
        &self.server
    }

    fn answer(&self, name: &str, args: &Map<String, Value>) -> Result<Value, String> {
        let doc = self.server.tools.iter().find(|t| t.name == name).ok_or_else(|| format!("unknown tool `{name}`"))?;
        check_arguments(doc, args)?;
        let slug = &self.server.server_id;
        let ticker = &self.server.company.ticker;
        let suffix = &name[format!("get_{slug}_").len()..];
        let text = |key: &str| args.get(key).and_then(Value::as_str).unwrap_or_default().to_owned();
        match suffix {
            "current_stock_price" => Ok(json!({ "ticker": ticker, "price": self.market.current_price(slug) })),
            "stock_price_history" => {
                let timeline = text("timeline");
                let prices = self.market.price_history(slug, &timeline).ok_or("bad timeline")?;
                Ok(json!({ "ticker": ticker, "timeline": timeline, "prices": prices }))
            }
            "analyst_price_targets" => {
                let target_type = text("target_type");
                let value = self.market.price_target(slug, &target_type).ok_or("bad target_type")?;
                Ok(json!({ "ticker": ticker, "target_type": target_type, "value": value }))
            }
            "revenue" | "net_income" => {
                let year = args.get("year").and_then(Value::as_i64);
                self.market.yearly(slug, suffix, year)
            }
            _ => Err(format!("unknown tool `{name}`")),
        }
    }
}

/// Checks call arguments against the tool's declared parameters.
pub fn check_arguments(doc: &ToolDocument, args: &Map<String, Value>) -> Result<(), String> {
    if let Some(extra) = args.keys().find(|k| !doc.parameters.iter().any(|p| &p.name == *k)) {
        return Err(format!("unknown argument `{extra}` for `{}`", doc.name));
    }
    for p in &doc.parameters {
        let value = args.get(&p.name).filter(|v| !v.is_null());
        let Some(value) = value else {
            if p.is_required() {
                return Err(format!("missing required argument `{}`", p.name));
            }
            continue;
        };
        let ok = match p.kind {
            ParamKind::String => value.is_string(),
            ParamKind::Integer | ParamKind::OptionalInteger => value.is_i64(),
            ParamKind::Enum => value
                .as_str()
                .is_some_and(|s| p.allowed_values.as_ref().is_some_and(|a| a.iter().any(|v| v == s))),
        };
        if !ok {
            return Err(format!("invalid value {value} for argument `{}`", p.name));
        }
    }
    Ok(())
}

impl ToolService for CompanyService {
    fn server_name(&self) -> &str {
        &self.server.server_id
    }

    fn tools(&self) -> Vec<ToolDescriptor> {
        self.server
            .tools
            .iter()
            .map(|t| ToolDescriptor { name: t.name.clone(), description: t.description.clone(), input_schema: t.input_schema() })
            .collect()
    }

    fn call(&self, name: &str, arguments: &Map<String, Value>) -> ToolOutcome {
        match self.answer(name, arguments) {
            Ok(v) => ToolOutcome::Ok(v),
            Err(e) => ToolOutcome::Err(e),
        }
    }
}
