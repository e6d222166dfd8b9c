/// Leading filler stripped from generated captions, tried in order.
const FILLER_PREFIXES: [&str; 9] = [
    "it is a ",
    "it is an ",
    "it's a ",
    "it's an ",
    "this is a ",
    "this is an ",
    "a ",
    "an ",
    "the ",
];

/// Trims a generated caption to the part that describes the image.
///
/// Strips at most one filler prefix (case-insensitive); an empty result becomes `"unknown"`.
pub fn postprocess_caption(text: &str) -> String {
    let text = text.trim();
    let stripped = FILLER_PREFIXES
        .iter()
        .find(|prefix| {
            text.get(..prefix.len())
                .is_some_and(|head| head.eq_ignore_ascii_case(prefix))
        })
        .map_or(text, |prefix| &text[prefix.len()..])
        .trim();
    if stripped.is_empty() {
        "unknown".to_owned()
    } else {
        stripped.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_filler() {
        assert_eq!(postprocess_caption("it is a bar chart"), "bar chart");
        assert_eq!(postprocess_caption("It is an area chart"), "area chart");
        assert_eq!(postprocess_caption("a map of Europe"), "map of Europe");
        assert_eq!(postprocess_caption("  The table "), "table");
        assert_eq!(postprocess_caption("anatomy drawing"), "anatomy drawing");
    }

    #[test]
    fn only_one_prefix_is_stripped() {
        assert_eq!(postprocess_caption("it is a the map"), "the map");
    }

    #[test]
    fn empty_becomes_unknown() {
        assert_eq!(postprocess_caption(""), "unknown");
        assert_eq!(postprocess_caption("   "), "unknown");
    }

    #[test]
    fn non_ascii_input_is_safe() {
        assert_eq!(postprocess_caption("é carte"), "é carte");
        assert_eq!(postprocess_caption("a carte d'Europe"), "carte d'Europe");
    }
}
