//! Identifier subtokenization following code naming conventions.

/// Split an identifier on underscores and other separators, camel-case
/// boundaries (including acronym runs), and letter/digit boundaries; pieces
/// are lowercased. A token with no alphanumeric characters yields nothing.
pub fn split_identifier(token: &str) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    let mut pieces = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                pieces.push(std::mem::take(&mut current));
            }
            continue;
        }
        let boundary = match chars.get(i.wrapping_sub(1)).filter(|_| i > 0) {
            Some(&p) if !p.is_alphanumeric() => false, // fresh piece already
            Some(&p) => {
                let lower_to_upper = (p.is_lowercase() || p.is_numeric()) && c.is_uppercase();
                // End of an acronym run: "HTTPResponse" splits before "R".
                let acronym_end = p.is_uppercase()
                    && c.is_uppercase()
                    && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                let digit_edge = p.is_numeric() != c.is_numeric();
                lower_to_upper || acronym_end || digit_edge
            }
            None => false,
        };
        if boundary && !current.is_empty() {
            pieces.push(std::mem::take(&mut current));
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    pieces
}
