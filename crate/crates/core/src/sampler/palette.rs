//! Label colour palettes.
//!
//! Text format, one class per line, in class-index order:
//!
//! ```text
//! # comment
//! 128,128,128 Sky
//! 128,0,0 Building
//! rest Void
//! ```
//!
//! Exactly one `rest` line is required; any colour not listed maps to it.
//! The name after `rest` is optional.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{with_path, Error, Result};
use crate::image_io::LabelImage;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaletteClass {
    /// `None` for the catch-all class.
    pub color: Option<[u8; 3]>,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    classes: Vec<PaletteClass>,
    rest: usize,
    lookup: HashMap<[u8; 3], usize>,
}

const CAMVID: &str = "\
128,128,128 Sky
128,0,0 Building
192,192,128 Column-Pole
128,64,128 Road
0,0,192 Sidewalk
128,128,0 Tree
192,128,128 Sign-Symbol
64,64,128 Fence
64,0,128 Car
64,64,0 Pedestrian
0,128,192 Bicyclist
rest Void
";

impl Palette {
    pub fn new(classes: Vec<PaletteClass>) -> Result<Self> {
        let rests: Vec<usize> = classes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.color.is_none().then_some(i))
            .collect();
        let rest = match rests.as_slice() {
            [r] => *r,
            [] => return Err(Error::format("palette", "missing the rest class")),
            _ => return Err(Error::format("palette", "more than one rest class")),
        };
        if classes.len() > 256 {
            return Err(Error::format(
                "palette",
                format!("{} classes exceed the limit of 256", classes.len()),
            ));
        }
        let mut lookup = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            if let Some(color) = c.color {
                if lookup.insert(color, i).is_some() {
                    return Err(Error::format("palette", format!("colour {color:?} listed twice")));
                }
            }
        }
        Ok(Self { classes, rest, lookup })
    }

    /// The 11 CamVid classes commonly evaluated, plus the rest class.
    pub fn camvid() -> Self {
        Self::parse(CAMVID).expect("built-in palette is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, name) = match line.split_once(char::is_whitespace) {
                Some((h, rest)) => (h, rest.trim()),
                None => (line, ""),
            };
            if head.eq_ignore_ascii_case("rest") {
                classes.push(PaletteClass {
                    color: None,
                    name: if name.is_empty() { "rest".into() } else { name.into() },
                });
                continue;
            }
            let parts: Vec<&str> = head.split(',').collect();
            let color = match parts.as_slice() {
                [r, g, b] => [r, g, b].map(|p| p.trim().parse::<u8>()),
                _ => {
                    return Err(Error::format("palette", format!("line {}: expected R,G,B name", n + 1)));
                }
            };
            let [Ok(r), Ok(g), Ok(b)] = color else {
                return Err(Error::format(
                    "palette",
                    format!("line {}: colour components must be 0-255", n + 1),
                ));
            };
            if name.is_empty() {
                return Err(Error::format("palette", format!("line {}: missing class name", n + 1)));
            }
            classes.push(PaletteClass {
                color: Some([r, g, b]),
                name: name.into(),
            });
        }
        Self::new(classes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| with_path(e.into(), path))?;
        Self::parse(&text).map_err(|e| with_path(e, path))
    }

    pub fn to_text(&self) -> String {
        self.classes
            .iter()
            .map(|c| match c.color {
                Some([r, g, b]) => format!("{r},{g},{b} {}\n", c.name),
                None => format!("rest {}\n", c.name),
            })
            .collect()
    }

    pub fn classes(&self) -> &[PaletteClass] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn rest_class(&self) -> usize {
        self.rest
    }

    pub fn class_of(&self, color: [u8; 3]) -> usize {
        self.lookup.get(&color).copied().unwrap_or(self.rest)
    }

    /// Colour used when rendering a class. The rest class gets the first of
    /// black, white, then greys that no other class uses.
    pub fn render_color(&self, class: usize) -> [u8; 3] {
        if let Some(c) = self.classes[class].color {
            return c;
        }
        std::iter::once(0u8)
            .chain(std::iter::once(255))
            .chain(1..255)
            .map(|g| [g; 3])
            .find(|c| !self.lookup.contains_key(c))
            .expect("palette has at most 255 coloured classes")
    }

    /// Rendering colours for every class, indexable by class index.
    pub fn render_colors(&self) -> Vec<[u8; 3]> {
        (0..self.class_count()).map(|c| self.render_color(c)).collect()
    }
}

/// Class index of every pixel of a label image, in row-major order.
pub fn create_targets(labels: &LabelImage, palette: &Palette, width: usize, height: usize) -> Result<Vec<usize>> {
    if labels.width != width {
        return Err(Error::shape("label width", width, labels.width));
    }
    if labels.height != height {
        return Err(Error::shape("label height", height, labels.height));
    }
    Ok(labels.pixels.iter().map(|&p| palette.class_of(p)).collect())
}
