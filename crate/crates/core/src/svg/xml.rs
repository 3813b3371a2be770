//! Byte-level tag scanner for the dialect and for mockup rewriting.
//!
//! Never panics: every slice boundary falls on an ASCII delimiter.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token<'a> {
    Start {
        name: &'a str,
        attrs: Vec<(&'a str, &'a str)>,
        self_closing: bool,
    },
    End {
        name: &'a str,
    },
}

/// A token plus the byte span it occupies in the source.
#[derive(Debug, Clone)]
pub(crate) struct Spanned<'a> {
    pub token: Token<'a>,
    pub start: usize,
    pub end: usize,
}

pub(crate) struct Scanner<'a> {
    src: &'a str,
    pos: usize,
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'-' | b'.')
}

fn find(hay: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    if from > hay.len() {
        return None;
    }
    hay[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

impl<'a> Scanner<'a> {
    pub fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    /// Next tag, skipping text, comments, CDATA and processing instructions.
    pub fn next_tag(&mut self) -> Option<Spanned<'a>> {
        let bytes = self.src.as_bytes();
        loop {
            let lt = find(bytes, self.pos, b"<")?;
            let rest = &bytes[lt..];
            if rest.starts_with(b"<!--") {
                self.pos = find(bytes, lt + 4, b"-->").map(|p| p + 3).unwrap_or(bytes.len());
                continue;
            }
            if rest.starts_with(b"<![CDATA[") {
                self.pos = find(bytes, lt + 9, b"]]>").map(|p| p + 3).unwrap_or(bytes.len());
                continue;
            }
            if rest.starts_with(b"<?") {
                self.pos = find(bytes, lt + 2, b"?>").map(|p| p + 2).unwrap_or(bytes.len());
                continue;
            }
            if rest.starts_with(b"<!") {
                self.pos = find(bytes, lt + 2, b">").map(|p| p + 1).unwrap_or(bytes.len());
                continue;
            }
            match self.tag_at(lt) {
                Some(t) => {
                    self.pos = t.end;
                    return Some(t);
                }
                None => {
                    self.pos = lt + 1;
                }
            }
        }
    }

    fn tag_at(&self, lt: usize) -> Option<Spanned<'a>> {
        let bytes = self.src.as_bytes();
        let mut i = lt + 1;
        let closing = bytes.get(i) == Some(&b'/');
        if closing {
            i += 1;
        }
        let name_start = i;
        while i < bytes.len() && is_name_byte(bytes[i]) {
            i += 1;
        }
        if i == name_start || !bytes[name_start].is_ascii_alphabetic() {
            return None;
        }
        let name = &self.src[name_start..i];
        if closing {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if bytes.get(i) != Some(&b'>') {
                return None;
            }
            return Some(Spanned {
                token: Token::End { name },
                start: lt,
                end: i + 1,
            });
        }
        let mut attrs = Vec::new();
        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            match bytes.get(i) {
                None => return None,
                Some(b'>') => {
                    return Some(Spanned {
                        token: Token::Start {
                            name,
                            attrs,
                            self_closing: false,
                        },
                        start: lt,
                        end: i + 1,
                    })
                }
                Some(b'/') => {
                    if bytes.get(i + 1) == Some(&b'>') {
                        return Some(Spanned {
                            token: Token::Start {
                                name,
                                attrs,
                                self_closing: true,
                            },
                            start: lt,
                            end: i + 2,
                        });
                    }
                    i += 1;
                }
                Some(b'<') => return None,
                Some(&b) if is_name_byte(b) => {
                    let ks = i;
                    while i < bytes.len() && is_name_byte(bytes[i]) {
                        i += 1;
                    }
                    let key = &self.src[ks..i];
                    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    if bytes.get(i) != Some(&b'=') {
                        attrs.push((key, ""));
                        continue;
                    }
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    match bytes.get(i) {
                        Some(&q) if q == b'"' || q == b'\'' => {
                            let vs = i + 1;
                            let ve = vs + bytes[vs..].iter().position(|&c| c == q)?;
                            attrs.push((key, &self.src[vs..ve]));
                            i = ve + 1;
                        }
                        Some(_) => {
                            let vs = i;
                            while i < bytes.len()
                                && !bytes[i].is_ascii_whitespace()
                                && bytes[i] != b'>'
                                && bytes[i] != b'/'
                            {
                                i += 1;
                            }
                            // stop at the first non-ASCII-safe boundary
                            if !self.src.is_char_boundary(i) {
                                return None;
                            }
                            attrs.push((key, &self.src[vs..i]));
                        }
                        None => return None,
                    }
                }
                Some(_) => {
                    // stray byte inside a tag; skip to a char boundary
                    i += 1;
                    while i < bytes.len() && !self.src.is_char_boundary(i) {
                        i += 1;
                    }
                }
            }
        }
    }
}

pub(crate) fn attr<'a>(attrs: &[(&'a str, &'a str)], key: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

/// Escapes text for element content and attribute values.
pub fn escape(s: &str) -> alloc::string::String {
    let mut out = alloc::string::String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<Token<'_>> {
        let mut sc = Scanner::new(s);
        let mut v = Vec::new();
        while let Some(t) = sc.next_tag() {
            v.push(t.token);
        }
        v
    }

    #[test]
    fn scans_attributes_and_closers() {
        let t = tags("hi <rect x='1' y=\"2\" hidden/> a < b <!-- <svg> --></svg >");
        assert_eq!(
            t[0],
            Token::Start {
                name: "rect",
                attrs: alloc::vec![("x", "1"), ("y", "2"), ("hidden", "")],
                self_closing: true
            }
        );
        assert_eq!(t[1], Token::End { name: "svg" });
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn unterminated_tags_are_ignored() {
        assert!(tags("<rect x=\"1").is_empty());
        assert!(tags("<<<>>>").is_empty());
        assert!(tags("<é>").is_empty());
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
