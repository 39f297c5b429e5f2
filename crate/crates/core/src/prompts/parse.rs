//! Deterministic probability extraction from free text.
//!
//! Every numeric mention is a candidate. `35%` (or `35 percent`) maps to
//! 0.35; a bare number already in [0, 1] maps to itself; a bare number in
//! (1, 100] counts as a percentage only when the prompt asked for a 0-100%
//! answer. The last surviving candidate wins, since rationales end with the
//! final answer. Dates, list markers, and counts like "30 days" are skipped.

use std::sync::OnceLock;

use regex::Regex;

use super::AnswerScale;

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(\d+(?:\.\d+)?|\.\d+)(\s*(?:%|percent\b))?").expect("static regex")
    })
}

/// Words that may follow a bare number that is itself the probability.
const PROBABILITY_WORDS: &[&str] = &[
    "probability",
    "likelihood",
    "chance",
    "chances",
    "likely",
    "odds",
    "confidence",
];

fn is_date_sep(c: char) -> bool {
    matches!(c, '-' | '/' | ':')
}

/// All candidate probabilities in order of appearance.
pub fn probability_candidates(text: &str, scale: AnswerScale) -> Vec<f64> {
    let mut out = Vec::new();
    for cap in number_re().captures_iter(text) {
        let m = cap.get(1).expect("number group");
        let before: Vec<char> = text[..m.start()].chars().rev().take(2).collect();
        let after_num = &text[m.end()..];
        let mut after = after_num.chars();
        let next = after.next();
        let next2 = after.next();

        // part of an identifier ("L3", "COVID19") or a longer token
        if let Some(&p) = before.first() {
            if p.is_alphanumeric() || matches!(p, '_' | '.' | '$' | '€' | '£') {
                continue;
            }
            // dates and times (2022-08-01, 8/1/2022, 10:30) and "1,000"
            if (is_date_sep(p) || p == ',') && before.get(1).is_some_and(|c| c.is_ascii_digit()) {
                continue;
            }
        }
        if let (Some(n), Some(n2)) = (next, next2) {
            // dates continue with a separator, "1,000" with a comma
            if (is_date_sep(n) || n == ',') && n2.is_ascii_digit() {
                continue;
            }
        }

        let value: f64 = match m.as_str().parse() {
            Ok(v) => v,
            Err(_) => continue,
        };

        if cap.get(2).is_some() {
            let v = value / 100.0;
            if (0.0..=1.0).contains(&v) {
                out.push(v);
            }
            continue;
        }

        if next.is_some_and(|c| c.is_alphabetic()) {
            // "10x", "3rd"
            continue;
        }
        // "1. Joe Biden ..." list markers at the start of a line
        let line_start = text[..m.start()]
            .rsplit('\n')
            .next()
            .is_some_and(|l| l.trim().is_empty());
        if line_start
            && matches!(next, Some('.') | Some(')'))
            && next2.map_or(true, char::is_whitespace)
        {
            continue;
        }
        // bare number followed by a word: keep only "0.7 likelihood"-style
        let following_word: String = after_num
            .trim_start_matches([' ', '\t'])
            .chars()
            .take_while(|c| c.is_alphabetic())
            .collect::<String>()
            .to_lowercase();
        let has_decimal = m.as_str().contains('.');
        if !following_word.is_empty()
            && !PROBABILITY_WORDS.contains(&following_word.as_str())
            && !(has_decimal && value <= 1.0)
        {
            continue;
        }

        if (0.0..=1.0).contains(&value) {
            out.push(value);
        } else if scale == AnswerScale::Percent && value <= 100.0 {
            out.push(value / 100.0);
        }
    }
    out
}

/// Last probability mentioned in `text`, read on the given answer scale.
pub fn parse_probability_scaled(text: &str, scale: AnswerScale) -> Option<f64> {
    probability_candidates(text, scale).last().copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        let p = |t| parse_probability_scaled(t, AnswerScale::Unit);
        assert_eq!(p("The probability is 35%."), Some(0.35));
        assert_eq!(p("I estimate 0.7 likelihood."), Some(0.7));
        assert_eq!(p("could be 10%... but final answer: 5%"), Some(0.05));
        assert_eq!(p("no numbers here"), None);
    }

    #[test]
    fn skips_structure() {
        let p = |t| parse_probability_scaled(t, AnswerScale::Percent);
        assert_eq!(p("Currently the date is 2022-08-01."), None);
        assert_eq!(p("1. Joe Biden decides\n2. Kamala wins"), None);
        assert_eq!(p("in the next 30 days"), None);
        assert_eq!(p("L3 autonomy"), None);
        assert_eq!(p("I'd say 35."), Some(0.35));
    }
}
