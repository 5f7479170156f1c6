//! Static SVG scatter plot of a run: landmarks as stars, particles as open
//! circles, the true position as a square and per-trial estimates as filled
//! circles. Output depends only on the inputs, so a fixed seed gives a
//! byte-identical file.

use std::fmt::Write;

use pfloc_core::{FingerprintMap, Point2};

const CANVAS: f64 = 640.0;
const MARGIN: f64 = 40.0;

pub struct PlotData<'a> {
    pub map: &'a FingerprintMap,
    pub particles: &'a [Point2],
    pub truth: Point2,
    pub estimates: &'a [Point2],
    pub title: &'a str,
}

struct Transform {
    scale: f64,
    height: f64,
}

impl Transform {
    fn new(map: &FingerprintMap) -> Self {
        let span = map.area_length().max(map.area_width());
        let scale = (CANVAS - 2.0 * MARGIN) / span;
        Self {
            scale,
            height: map.area_width(),
        }
    }

    // y axis points up in the map frame and down in SVG
    fn apply(&self, p: Point2) -> (f64, f64) {
        (MARGIN + p.x * self.scale, MARGIN + (self.height - p.y) * self.scale)
    }
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    let mut pts = Vec::with_capacity(10);
    for k in 0..10 {
        let radius = if k % 2 == 0 { r } else { r * 0.45 };
        let a = std::f64::consts::PI * (k as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
        pts.push(format!("{:.2},{:.2}", cx + radius * a.cos(), cy + radius * a.sin()));
    }
    pts.join(" ")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(data: &PlotData) -> String {
    let t = Transform::new(data.map);
    let w = MARGIN * 2.0 + data.map.area_length() * t.scale;
    let h = MARGIN * 2.0 + data.map.area_width() * t.scale;
    let mut s = String::new();
    // writing into a String cannot fail
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w:.2}" height="{h:.2}" fill="white"/>"#);
    let (x0, y0) = t.apply(Point2::new(0.0, data.map.area_width()));
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="1"/>"#,
        data.map.area_length() * t.scale,
        data.map.area_width() * t.scale
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN:.2}" y="{:.2}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN - 14.0,
        escape(data.title)
    );

    let _ = writeln!(s, r#"<g id="landmarks" fill="gold" stroke="black" stroke-width="0.5">"#);
    for lm in data.map.landmarks() {
        let (x, y) = t.apply(lm.position);
        let _ = writeln!(s, r#"<polygon points="{}"/>"#, star(x, y, 6.0));
    }
    s.push_str("</g>\n");

    let _ = writeln!(s, r#"<g id="particles" fill="none" stroke="blue" stroke-width="0.6">"#);
    for &p in data.particles {
        let (x, y) = t.apply(p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2"/>"#);
    }
    s.push_str("</g>\n");

    let _ = writeln!(s, r#"<g id="estimates" fill="green" stroke="darkgreen" stroke-width="0.5">"#);
    for &p in data.estimates {
        let (x, y) = t.apply(p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4"/>"#);
    }
    s.push_str("</g>\n");

    let (x, y) = t.apply(data.truth);
    let _ = writeln!(
        s,
        r#"<rect id="truth" x="{:.2}" y="{:.2}" width="10" height="10" fill="none" stroke="green" stroke-width="2"/>"#,
        x - 5.0,
        y - 5.0
    );
    s.push_str("</svg>\n");
    s
}
