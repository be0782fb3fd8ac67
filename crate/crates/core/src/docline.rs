//! The knowledge-document line grammar. Every CKM fact is rendered as one
//! line of the form
//!
//! `transmitter_1 at (0.00, 0.00, 10.00) transmits the signal to receiver_2
//! at (50.00, 0.00, 1.50) with channel gain -72.40 dB.`
//!
//! Coordinates and gains carry exactly two decimal places, which makes the
//! render/parse round trip exact. The parser is the inverse used by the
//! rule-based extractor and by flat retrieval.

use std::sync::OnceLock;

use regex::Regex;

use crate::geom::Point3;

/// One parsed document line.
#[derive(Debug, Clone, PartialEq)]
pub struct DocLine {
    pub tx_label: u32,
    pub rx_label: u32,
    pub tx_pos: Point3,
    pub rx_pos: Point3,
    pub gain_db: f64,
}

/// Render a coordinate triple the way document lines carry it.
pub fn render_coordinate(p: &Point3) -> String {
    format!("({:.2}, {:.2}, {:.2})", p.x, p.y, p.z)
}

pub fn render_line(
    tx_label: u32,
    tx_pos: &Point3,
    rx_label: u32,
    rx_pos: &Point3,
    gain_db: f64,
) -> String {
    format!(
        "transmitter_{} at {} transmits the signal to receiver_{} at {} with channel gain {:.2} dB.",
        tx_label,
        render_coordinate(tx_pos),
        rx_label,
        render_coordinate(rx_pos),
        gain_db,
    )
}

/// Query rendering for flat retrieval: the same phrasing minus labels and the
/// gain clause, so the embedding shares coordinate and connective tokens with
/// stored lines.
pub fn render_query_line(tx_pos: &Point3, rx_pos: &Point3) -> String {
    format!(
        "transmitter at {} transmits the signal to receiver at {}",
        render_coordinate(tx_pos),
        render_coordinate(rx_pos),
    )
}

fn line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^transmitter_([0-9]+) at \((-?[0-9]+\.[0-9]{2}), (-?[0-9]+\.[0-9]{2}), (-?[0-9]+\.[0-9]{2})\) transmits the signal to receiver_([0-9]+) at \((-?[0-9]+\.[0-9]{2}), (-?[0-9]+\.[0-9]{2}), (-?[0-9]+\.[0-9]{2})\) with channel gain (-?[0-9]+\.[0-9]{2}) dB\.$",
        )
        .expect("line grammar regex is valid")
    })
}

/// Parse one document line. Returns `None` if the line does not match the
/// grammar; the caller decides whether that is an error or a skip.
pub fn parse_line(line: &str) -> Option<DocLine> {
    let caps = line_regex().captures(line)?;
    let num = |i: usize| caps.get(i).unwrap().as_str();
    Some(DocLine {
        tx_label: num(1).parse().ok()?,
        tx_pos: Point3::new(
            num(2).parse().ok()?,
            num(3).parse().ok()?,
            num(4).parse().ok()?,
        ),
        rx_label: num(5).parse().ok()?,
        rx_pos: Point3::new(
            num(6).parse().ok()?,
            num(7).parse().ok()?,
            num(8).parse().ok()?,
        ),
        gain_db: num(9).parse().ok()?,
    })
}
