//! Binary PPM (P6) rendering of annotated snapshots.
//!
//! White background, object silhouettes in gray shaded by depth, bounding
//! boxes and tag strips in pure red, tag text in white using a 3x5 bitmap
//! font. Output bytes depend only on the inputs.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use super::annotate::AnnotatedSnapshot;
use super::render::Snapshot;

pub const RED: [u8; 3] = [255, 0, 0];
pub const WHITE: [u8; 3] = [255, 255, 255];

const GLYPH_W: u32 = 3;
const GLYPH_H: u32 = 5;

fn glyph(c: char) -> Option<[u8; 5]> {
    let rows = match c.to_ascii_lowercase() {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 2, 2],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'a' => [2, 5, 7, 5, 5],
        'b' => [6, 5, 6, 5, 6],
        'c' => [3, 4, 4, 4, 3],
        'd' => [6, 5, 5, 5, 6],
        'e' => [7, 4, 6, 4, 7],
        'f' => [7, 4, 6, 4, 4],
        'g' => [3, 4, 5, 5, 3],
        'h' => [5, 5, 7, 5, 5],
        'i' => [7, 2, 2, 2, 7],
        'j' => [1, 1, 1, 5, 2],
        'k' => [5, 5, 6, 5, 5],
        'l' => [4, 4, 4, 4, 7],
        'm' => [5, 7, 7, 5, 5],
        'n' => [6, 5, 5, 5, 5],
        'o' => [2, 5, 5, 5, 2],
        'p' => [6, 5, 6, 4, 4],
        'q' => [2, 5, 5, 6, 3],
        'r' => [6, 5, 6, 5, 5],
        's' => [3, 4, 2, 1, 6],
        't' => [7, 2, 2, 2, 2],
        'u' => [5, 5, 5, 5, 7],
        'v' => [5, 5, 5, 5, 2],
        'w' => [5, 5, 7, 7, 5],
        'x' => [5, 5, 2, 5, 5],
        'y' => [5, 5, 2, 2, 2],
        'z' => [7, 1, 2, 4, 7],
        '_' => [0, 0, 0, 0, 7],
        '-' => [0, 0, 7, 0, 0],
        _ => return None,
    };
    Some(rows)
}

struct Canvas {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    fn fill(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.put(x, y, color);
            }
        }
    }

    fn text(&mut self, x0: i64, y0: i64, s: &str, color: [u8; 3]) {
        let mut x = x0;
        for c in s.chars() {
            if let Some(rows) = glyph(c) {
                for (dy, bits) in rows.iter().enumerate() {
                    for dx in 0..GLYPH_W {
                        if bits & (1 << (GLYPH_W - 1 - dx)) != 0 {
                            self.put(x + dx as i64, y0 + dy as i64, color);
                        }
                    }
                }
            }
            x += GLYPH_W as i64 + 1;
        }
    }
}

/// Gray level for a surface at `depth` meters: near is dark, far is light.
pub fn depth_shade(depth: f64) -> u8 {
    (60.0 + 20.0 * depth).clamp(60.0, 200.0).round() as u8
}

/// Width in pixels of a rendered tag label.
pub fn text_width(s: &str) -> u32 {
    (s.chars().count() as u32 * (GLYPH_W + 1)).saturating_sub(1)
}

/// Encodes an annotated snapshot as a binary PPM.
pub fn render_ppm(snapshot: &Snapshot, annotated: &AnnotatedSnapshot, tag_offset: u32) -> Vec<u8> {
    let (w, h) = (snapshot.width, snapshot.height);
    let mut canvas = Canvas { width: w, height: h, rgb: alloc::vec![255; w as usize * h as usize * 3] };
    for y in 0..h {
        for x in 0..w {
            let d = snapshot.depth_at(x, y);
            if d.is_finite() {
                let g = depth_shade(d);
                canvas.put(x as i64, y as i64, [g, g, g]);
            }
        }
    }
    for a in &annotated.annotations {
        let b = a.bbox;
        let (x0, y0, x1, y1) = (b.x_min as i64, b.y_min as i64, b.x_max as i64, b.y_max as i64);
        canvas.fill(x0, y0, x1, y0, RED);
        canvas.fill(x0, y1, x1, y1, RED);
        canvas.fill(x0, y0, x0, y1, RED);
        canvas.fill(x1, y0, x1, y1, RED);

        let label = a.object_id.as_str();
        let strip_h = tag_offset.max(GLYPH_H + 2) as i64;
        let ax = a.tag_anchor.x as i64;
        let ay = a.tag_anchor.y as i64;
        let strip_w = text_width(label) as i64 + 2;
        canvas.fill(ax, ay, ax + strip_w - 1, ay + strip_h - 1, RED);
        canvas.text(ax + 1, ay + 1, label, WHITE);
    }

    let mut out = alloc::format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&canvas.rgb);
    out
}
