//! Prompt templates.
//!
//! Templates are plain text with `{name}` placeholders, optionally split
//! into named sections by lines of the form `## section-name`. Text before
//! the first marker becomes an implicit `body` section, so a marker-free
//! template renders verbatim. Bundled templates live under `assets/templates`
//! and are registered by id.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template id {0}")]
    UnknownTemplate(String),
    #[error("unresolved placeholder {0}")]
    UnresolvedPlaceholder(String),
}

/// A parsed template: ordered named sections of placeholder text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub sections: Vec<(String, String)>,
}

impl Template {
    /// Parse template text. Section markers are lines starting with `## `;
    /// everything before the first marker is the `body` section.
    pub fn parse(text: &str) -> Self {
        let mut sections: Vec<(String, String)> = Vec::new();
        let mut name = String::from("body");
        let mut buf = String::new();
        for line in text.lines() {
            if let Some(marker) = line.strip_prefix("## ") {
                if !buf.trim().is_empty() {
                    sections.push((name.clone(), buf.trim_end().to_string()));
                }
                name = marker.trim().to_string();
                buf.clear();
            } else {
                buf.push_str(line);
                buf.push('\n');
            }
        }
        if !buf.trim().is_empty() {
            sections.push((name, buf.trim_end().to_string()));
        }
        Template { sections }
    }

    /// Substitute `{name}` placeholders in every section. Unknown names
    /// fail; placeholder values are inserted literally, never re-scanned.
    pub fn render(
        &self,
        values: &BTreeMap<&str, String>,
    ) -> Result<Vec<(String, String)>, TemplateError> {
        self.sections
            .iter()
            .map(|(name, text)| Ok((name.clone(), substitute(text, values)?)))
            .collect()
    }
}

/// One-pass `{placeholder}` substitution.
pub fn substitute(
    text: &str,
    values: &BTreeMap<&str, String>,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                match values.get(key) {
                    Some(value) => out.push_str(value),
                    None => return Err(TemplateError::UnresolvedPlaceholder(key.to_string())),
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Bundled templates, looked up by id.
pub fn bundled(id: &str) -> Result<Template, TemplateError> {
    let text = match id {
        "area_label_v1" => include_str!("../assets/templates/area_label_v1.txt"),
        "cf_score_v1" => include_str!("../assets/templates/cf_score_v1.txt"),
        "xml" => include_str!("../assets/templates/prompt_xml.txt"),
        "narrative" => include_str!("../assets/templates/prompt_narrative.txt"),
        other => return Err(TemplateError::UnknownTemplate(other.to_string())),
    };
    Ok(Template::parse(text))
}

/// Ids of all bundled templates.
pub fn bundled_ids() -> &'static [&'static str] {
    &["area_label_v1", "cf_score_v1", "xml", "narrative"]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn template_without_placeholders_is_verbatim()  {
        let template = Template::parse("Plain instructions, no substitution.");
        let rendered = template.render(&BTreeMap::new()).unwrap();
        assert_eq!(rendered.len(), 1);
        assert_eq!(rendered[0].0, "body");
        assert_eq!(rendered[0].1, "Plain instructions, no substitution.");
    }

    #[test]
    fn substitution_fills_named_placeholders() {
        let out = substitute("goal: {goal}!", &values(&[("goal", "wash pan")])).unwrap();
        assert_eq!(out, "goal: wash pan!");
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        let err = substitute("{missing}", &BTreeMap::new()).unwrap_err();
        assert_eq!(
            err,
            TemplateError::UnresolvedPlaceholder("missing".to_string())
        );
        assert!(err.to_string().contains("unresolved placeholder missing"));
    }

    #[test]
    fn values_are_not_rescanned() {
        let out = substitute("{a}", &values(&[("a", "{b}")])).unwrap();
        assert_eq!(out, "{b}");
    }

    #[test]
    fn sections_are_split_on_markers() {
        let template = Template::parse("## task\nGoal: {goal}\n\n## instructions\nAnswer.\n");
        assert_eq!(template.sections.len(), 2);
        assert_eq!(template.sections[0].0, "task");
        assert_eq!(template.sections[1].1, "Answer.");
    }

    #[test]
    fn all_bundled_templates_parse() {
        for id in bundled_ids() {
            let template = bundled(id).unwrap();
            assert!(!template.sections.is_empty(), "template {id} is empty");
        }
    }

    #[test]
    fn unknown_bundled_id_errors() {
        assert_eq!(
            bundled("nope").unwrap_err(),
            TemplateError::UnknownTemplate("nope".to_string())
        );
    }
}
