use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PromptError;

/// Scale a template asks the model to answer on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerScale {
    /// "between 0 and 100%": a bare number in (1, 100] is read as a percentage.
    Percent,
    /// "between 0 and 1".
    Unit,
    /// Intermediate step; no probability expected.
    #[default]
    None,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    placeholders: Vec<String>,
    #[serde(default)]
    literals: Vec<String>,
    #[serde(default)]
    scale: AnswerScale,
}

/// A prompt body with square-bracket placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub id: String,
    pub body: String,
    /// Bracketed names substituted at render time.
    pub placeholders: Vec<String>,
    /// Bracketed tokens that are part of the prompt text itself.
    pub literals: Vec<String>,
    pub scale: AnswerScale,
}

pub type Bindings = BTreeMap<String, String>;

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]\n]+)\]").expect("static regex"))
}

impl PromptTemplate {
    /// Builds a template and checks that every bracketed token in `body` is
    /// declared either as a placeholder or as a literal, and that every
    /// declared placeholder occurs.
    pub fn new(
        id: impl Into<String>,
        body: impl Into<String>,
        placeholders: Vec<String>,
        literals: Vec<String>,
        scale: AnswerScale,
    ) -> Result<Self, PromptError> {
        let tpl = PromptTemplate {
            id: id.into(),
            body: body.into(),
            placeholders,
            literals,
            scale,
        };
        for cap in token_re().captures_iter(&tpl.body) {
            let name = &cap[1];
            if !tpl.placeholders.iter().any(|p| p == name) && !tpl.literals.iter().any(|l| l == name) {
                return Err(PromptError::UndeclaredPlaceholder {
                    template: tpl.id.clone(),
                    name: name.to_string(),
                });
            }
        }
        for p in &tpl.placeholders {
            if !tpl.body.contains(&format!("[{p}]")) {
                return Err(PromptError::TemplateLoad(format!(
                    "{}: declared placeholder [{p}] does not occur in the body",
                    tpl.id
                )));
            }
        }
        Ok(tpl)
    }

    fn parse(id: &str, body: &str, sidecar: &str) -> Result<Self, PromptError> {
        let meta: Sidecar = toml::from_str(sidecar)
            .map_err(|e| PromptError::TemplateLoad(format!("{id}: sidecar: {e}")))?;
        // files end with a newline that is not part of the prompt
        let body = body.strip_suffix('\n').unwrap_or(body);
        Self::new(id, body, meta.placeholders, meta.literals, meta.scale)
    }

    /// Substitutes every placeholder in one pass; bound values are never
    /// rescanned, so a value containing `[name]` stays literal.
    pub fn render(&self, bindings: &Bindings) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut last = 0;
        for cap in token_re().captures_iter(&self.body) {
            let whole = cap.get(0).expect("group 0");
            let name = &cap[1];
            if !self.placeholders.iter().any(|p| p == name) {
                continue;
            }
            let value = bindings
                .get(name)
                .ok_or_else(|| PromptError::UnboundPlaceholder(name.to_string()))?;
            out.push_str(&self.body[last..whole.start()]);
            out.push_str(value);
            last = whole.end();
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

macro_rules! builtin_templates {
    ($($id:literal),* $(,)?) => {
        &[$(
            (
                $id,
                include_str!(concat!("../../templates/", $id, ".txt")),
                include_str!(concat!("../../templates/", $id, ".toml")),
            ),
        )*]
    };
}

const BUILTIN: &[(&str, &str, &str)] = builtin_templates![
    "basic/predict",
    "forecaster/predict",
    "base_rate/question",
    "base_rate/answer",
    "base_rate/predict",
    "both_sides/pros",
    "both_sides/cons",
    "both_sides/predict",
    "sequences/positive",
    "sequences/opposite",
    "sequences/negative",
    "sequences/predict",
    "crowd/persona",
    "crowd/predict",
    "news/keywords",
    "news/hn_filter",
    "news/nyt_extract",
    "news/nyt_paraphrase",
    "news/predict",
    "news/no_headlines",
    "rationale/predict",
    "extraction/extract",
];

/// Ids of the templates transcribed from the published workflows, in
/// workflow order. The remaining builtins (rationale, extraction, the
/// no-headlines notice) are authored for this crate.
pub const WORKFLOW_TEMPLATE_IDS: [&str; 19] = [
    "basic/predict",
    "forecaster/predict",
    "base_rate/question",
    "base_rate/answer",
    "base_rate/predict",
    "both_sides/pros",
    "both_sides/cons",
    "both_sides/predict",
    "sequences/positive",
    "sequences/opposite",
    "sequences/negative",
    "sequences/predict",
    "crowd/persona",
    "crowd/predict",
    "news/keywords",
    "news/hn_filter",
    "news/nyt_extract",
    "news/nyt_paraphrase",
    "news/predict",
];

/// Lookup table of templates by id (`<strategy>/<step>`).
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: HashMap<String, PromptTemplate>,
}

impl TemplateRegistry {
    /// Templates compiled into the crate from `templates/`.
    pub fn builtin() -> &'static TemplateRegistry {
        static REG: OnceLock<TemplateRegistry> = OnceLock::new();
        REG.get_or_init(|| {
            let templates = BUILTIN
                .iter()
                .map(|(id, body, meta)| {
                    let t = PromptTemplate::parse(id, body, meta)
                        .unwrap_or_else(|e| panic!("builtin template {id}: {e}"));
                    (id.to_string(), t)
                })
                .collect();
            TemplateRegistry { templates }
        })
    }

    /// Loads `<dir>/<strategy>/<step>.txt` with its `.toml` sidecar for
    /// every builtin id, so a directory can override the shipped prompts.
    pub fn load_dir(dir: &Path) -> Result<TemplateRegistry, PromptError> {
        let mut templates = HashMap::new();
        for (id, _, _) in BUILTIN {
            let read = |ext: &str| {
                let p = dir.join(format!("{id}.{ext}"));
                std::fs::read_to_string(&p)
                    .map_err(|e| PromptError::TemplateLoad(format!("{}: {e}", p.display())))
            };
            let t = PromptTemplate::parse(id, &read("txt")?, &read("toml")?)?;
            templates.insert(id.to_string(), t);
        }
        Ok(TemplateRegistry { templates })
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.templates.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}
