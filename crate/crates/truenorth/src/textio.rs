//! Helpers for the line-oriented text formats used by every file interface.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Splits a header line of the form `magic v1 key=value key=value ...`.
///
/// Returns the tokens before the first `key=value` pair and the pair map.
pub fn parse_header(line: &str, line_no: usize) -> Result<(Vec<String>, HashMap<String, String>)> {
    let mut words = Vec::new();
    let mut pairs = HashMap::new();
    for tok in line.split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            if k.is_empty() || v.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("malformed key=value token '{tok}'"),
                });
            }
            pairs.insert(k.to_string(), v.to_string());
        } else if pairs.is_empty() {
            words.push(tok.to_string());
        } else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("positional token '{tok}' after key=value pairs"),
            });
        }
    }
    Ok((words, pairs))
}

pub fn require_magic(words: &[String], magic: &str, version: &str, line_no: usize) -> Result<()> {
    if words.len() < 2 || words[0] != magic || words[1] != version {
        return Err(Error::UnsupportedFormat(format!(
            "expected '{magic} {version}' header on line {line_no}, got '{}'",
            words.join(" ")
        )));
    }
    Ok(())
}

pub fn parse_field<T: std::str::FromStr>(tok: &str, what: &str, line_no: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("cannot parse {what} from '{tok}'"),
    })
}

pub fn required<'a>(
    pairs: &'a HashMap<String, String>,
    key: &str,
    line_no: usize,
) -> Result<&'a str> {
    pairs.get(key).map(String::as_str).ok_or_else(|| Error::Parse {
        line: line_no,
        msg: format!("missing header field '{key}'"),
    })
}

/// Iterates non-empty, non-comment lines with their 1-based line numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_words_and_pairs() {
        let (words, pairs) = parse_header("tracks v1 projection=er width=1920", 1).unwrap();
        assert_eq!(words, vec!["tracks", "v1"]);
        assert_eq!(pairs["projection"], "er");
        assert_eq!(pairs["width"], "1920");
    }

    #[test]
    fn header_rejects_trailing_positional() {
        assert!(parse_header("tracks v1 width=5 oops", 1).is_err());
    }

    #[test]
    fn comment_and_blank_lines_are_skipped() {
        let lines: Vec<_> = content_lines("a\n\n# c\nb\n").collect();
        assert_eq!(lines, vec![(1, "a"), (4, "b")]);
    }
}
