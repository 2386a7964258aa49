use super::{word_count, ExplanationKind, ExplanationText};

/// Allowed relative deviation of the non-directive word count from the mean
/// directive word count.
pub const BALANCE_BAND: f64 = 0.25;

/// Whether `count` lies within the band around the mean of `reference`.
pub fn within_band(count: usize, reference: &[usize]) -> bool {
    if reference.is_empty() {
        return true;
    }
    let mean = reference.iter().sum::<usize>() as f64 / reference.len() as f64;
    (count as f64 - mean).abs() <= BALANCE_BAND * mean + 1e-9
}

fn end_sentence(s: &mut String) {
    while s.ends_with([',', ';', ':', ' ']) {
        s.pop();
    }
    if !s.is_empty() && !s.ends_with(['.', '!', '?']) {
        s.push('.');
    }
}

/// Grows the filler of a non-directive text with `elaborations` (cycled in
/// order) or truncates it word by word, until its word count lies within
/// the band around the mean of `reference`. Texts already inside the band
/// and directive texts are returned unchanged.
pub fn balance_filler(nd: &ExplanationText, reference: &[usize], elaborations: &[String]) -> ExplanationText {
    let mut out = nd.clone();
    if nd.kind != ExplanationKind::NonDirective || within_band(nd.word_count, reference) {
        return out;
    }
    let mean = reference.iter().sum::<usize>() as f64 / reference.len() as f64;
    let lo = ((1.0 - BALANCE_BAND) * mean - 1e-9).ceil() as usize;
    let hi = ((1.0 + BALANCE_BAND) * mean + 1e-9).floor() as usize;
    let mut filler = out.clauses.filler.clone().unwrap_or_default();
    let fixed = out.word_count - word_count(&filler);

    let usable: Vec<&String> = elaborations.iter().filter(|e| word_count(e) > 0).collect();
    let mut k = 0;
    while fixed + word_count(&filler) < lo && !usable.is_empty() {
        if !filler.is_empty() {
            filler.push(' ');
        }
        filler.push_str(usable[k % usable.len()]);
        k += 1;
    }
    if fixed + word_count(&filler) > hi {
        let keep = hi.saturating_sub(fixed);
        let mut cut = filler.split_whitespace().take(keep).collect::<Vec<_>>().join(" ");
        end_sentence(&mut cut);
        filler = cut;
    }
    out.clauses.filler = Some(filler);
    out.refresh();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainer::Clauses;

    fn nd(cf: &str, filler: &str) -> ExplanationText {
        let mut e = ExplanationText {
            kind: ExplanationKind::NonDirective,
            clauses: Clauses {
                greeting: String::new(),
                global: String::new(),
                decision: String::new(),
                counterfactual: cf.into(),
                filler: Some(filler.into()),
                action: None,
            },
            text: String::new(),
            word_count: 0,
        };
        e.refresh();
        e
    }

    #[test]
    fn balanced_text_is_unchanged() {
        let t = nd("one two three four.", "five six.");
        assert_eq!(balance_filler(&t, &[6, 6], &["x y z.".into()]), t);
    }

    #[test]
    fn short_text_grows_into_band() {
        let t = nd("one two.", "three.");
        let e = vec!["more words here.".to_string(), "and again.".to_string()];
        let b = balance_filler(&t, &[20, 24], &e);
        assert!(within_band(b.word_count, &[20, 24]), "{}", b.word_count);
        assert!(b.text.starts_with("one two. three. more words here. and again."));
        assert_eq!(b.word_count, word_count(&b.text));
    }

    #[test]
    fn long_text_is_truncated_to_a_sentence() {
        let t = nd("a b.", &"w ".repeat(40));
        let b = balance_filler(&t, &[10, 10], &[]);
        assert!(within_band(b.word_count, &[10, 10]));
        assert!(b.text.ends_with('.'));
    }

    #[test]
    fn band_edges() {
        assert!(within_band(75, &[100]));
        assert!(within_band(125, &[100]));
        assert!(!within_band(74, &[100]));
        assert!(!within_band(126, &[100]));
    }
}
