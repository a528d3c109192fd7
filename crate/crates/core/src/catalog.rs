//! Built-in furniture catalog: sizes, host surfaces and style tags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    LivingRoom,
    Kitchen,
    Bathroom,
    Bedroom,
}

impl Style {
    pub const ALL: [Style; 4] = [Style::LivingRoom, Style::Kitchen, Style::Bathroom, Style::Bedroom];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::LivingRoom => "living_room",
            Style::Kitchen => "kitchen",
            Style::Bathroom => "bathroom",
            Style::Bedroom => "bedroom",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Style::LivingRoom => LIV,
            Style::Kitchen => KIT,
            Style::Bathroom => BAT,
            Style::Bedroom => BED,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown style `{0}` (expected living_room, kitchen, bathroom or bedroom)")]
pub struct UnknownStyle(pub String);

impl FromStr for Style {
    type Err = UnknownStyle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "living_room" | "living" => Ok(Style::LivingRoom),
            "kitchen" => Ok(Style::Kitchen),
            "bathroom" => Ok(Style::Bathroom),
            "bedroom" => Ok(Style::Bedroom),
            _ => Err(UnknownStyle(s.to_string())),
        }
    }
}

const LIV: u8 = 1;
const KIT: u8 = 2;
const BAT: u8 = 4;
const BED: u8 = 8;

/// Where an entry may be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mount {
    /// Stands on the floor.
    Floor,
    /// Small item resting on a host surface (or the floor when none fits).
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    styles: u8,
    /// Width (x), depth (z), height (y) in meters at yaw 0.
    pub size: [f64; 3],
    /// Height of the top surface that can carry props.
    pub surface_height: Option<f64>,
    pub interactable: bool,
    pub mount: Mount,
    pub color: [u8; 3],
}

impl CatalogEntry {
    pub fn has_style(&self, style: Style) -> bool {
        self.styles & style.bit() != 0
    }

    pub fn style_tags(&self) -> Vec<Style> {
        Style::ALL.into_iter().filter(|s| self.has_style(*s)).collect()
    }

    pub fn footprint_area(&self) -> f64 {
        self.size[0] * self.size[1]
    }
}

const fn floor(name: &'static str, styles: u8, size: [f64; 3], top: bool, color: [u8; 3]) -> CatalogEntry {
    CatalogEntry {
        name,
        styles,
        size,
        surface_height: if top { Some(size[2]) } else { None },
        interactable: false,
        mount: Mount::Floor,
        color,
    }
}

const fn small(name: &'static str, styles: u8, size: [f64; 3], color: [u8; 3]) -> CatalogEntry {
    CatalogEntry {
        name,
        styles,
        size,
        surface_height: None,
        interactable: false,
        mount: Mount::Surface,
        color,
    }
}

pub static CATALOG: &[CatalogEntry] = &[
    // living room
    floor("sofa", LIV, [2.0, 0.9, 0.85], false, [96, 72, 140]),
    floor("armchair", LIV | BED, [0.9, 0.85, 0.9], false, [140, 90, 60]),
    floor("coffee_table", LIV, [1.2, 0.6, 0.45], true, [120, 80, 40]),
    floor("tv_stand", LIV | BED, [1.6, 0.45, 0.55], true, [60, 60, 66]),
    floor("bookshelf", LIV | BED, [1.0, 0.35, 1.9], false, [150, 110, 70]),
    floor("side_table", LIV | BED, [0.5, 0.5, 0.6], true, [170, 130, 90]),
    floor("floor_lamp", LIV | BED, [0.35, 0.35, 1.7], false, [230, 220, 160]),
    floor("potted_plant", LIV | KIT | BAT | BED, [0.45, 0.45, 1.1], false, [50, 140, 60]),
    floor("cabinet", LIV | KIT | BED, [0.9, 0.45, 0.9], true, [130, 100, 80]),
    floor("ottoman", LIV, [0.6, 0.6, 0.42], false, [180, 60, 60]),
    floor("piano", LIV, [1.5, 0.6, 1.25], true, [30, 30, 30]),
    floor("console_table", LIV, [1.2, 0.4, 0.8], true, [110, 90, 70]),
    // kitchen
    floor("dining_table", KIT | LIV, [1.6, 0.9, 0.75], true, [160, 120, 80]),
    floor("chair", KIT | LIV | BED, [0.45, 0.5, 0.9], false, [150, 100, 60]),
    floor("fridge", KIT, [0.8, 0.7, 1.8], false, [225, 225, 230]),
    floor("stove", KIT, [0.75, 0.65, 0.9], true, [70, 70, 75]),
    floor("counter", KIT, [1.8, 0.65, 0.9], true, [200, 195, 180]),
    floor("sink_unit", KIT, [1.0, 0.6, 0.9], true, [190, 200, 210]),
    floor("kitchen_island", KIT, [1.5, 0.9, 0.92], true, [170, 150, 120]),
    floor("bar_stool", KIT, [0.4, 0.4, 0.75], false, [90, 60, 40]),
    floor("trash_bin", KIT | BAT | LIV, [0.35, 0.35, 0.6], false, [100, 110, 100]),
    floor("pantry_shelf", KIT, [0.9, 0.4, 1.8], false, [140, 120, 90]),
    floor("dishwasher", KIT, [0.6, 0.6, 0.85], true, [180, 180, 185]),
    // bathroom
    floor("bathtub", BAT, [1.7, 0.75, 0.6], false, [240, 240, 245]),
    floor("toilet", BAT, [0.4, 0.7, 0.8], false, [245, 245, 250]),
    floor("vanity", BAT, [1.0, 0.55, 0.85], true, [160, 150, 140]),
    floor("shower_stall", BAT, [0.9, 0.9, 2.0], false, [180, 210, 220]),
    floor("laundry_basket", BAT | BED, [0.45, 0.35, 0.55], false, [200, 180, 140]),
    floor("towel_rack", BAT, [0.6, 0.3, 1.1], false, [150, 150, 160]),
    floor("linen_cabinet", BAT, [0.6, 0.4, 1.6], false, [200, 190, 170]),
    floor("washing_machine", BAT, [0.6, 0.6, 0.85], true, [230, 230, 235]),
    floor("bath_stool", BAT, [0.4, 0.4, 0.45], true, [120, 160, 170]),
    floor("storage_bench", BAT | BED | LIV, [1.1, 0.45, 0.5], true, [140, 110, 90]),
    // bedroom
    floor("bed", BED, [1.6, 2.0, 0.6], false, [200, 190, 230]),
    floor("nightstand", BED, [0.5, 0.45, 0.55], true, [150, 110, 80]),
    floor("wardrobe", BED, [1.2, 0.6, 2.0], false, [120, 90, 70]),
    floor("dresser", BED, [1.2, 0.5, 0.85], true, [160, 120, 90]),
    floor("desk", BED | LIV, [1.2, 0.6, 0.75], true, [180, 140, 100]),
    floor("rocking_chair", BED | LIV, [0.6, 0.9, 1.0], false, [110, 80, 50]),
    floor("vanity_table", BED, [0.9, 0.45, 0.75], true, [210, 180, 170]),
    // small items
    small("vase", LIV | BED | KIT, [0.18, 0.18, 0.35], [70, 110, 180]),
    small("table_lamp", LIV | BED, [0.25, 0.25, 0.45], [240, 210, 140]),
    small("book_stack", LIV | BED, [0.25, 0.2, 0.12], [150, 40, 40]),
    small("fruit_bowl", KIT | LIV, [0.3, 0.3, 0.12], [230, 140, 40]),
    small("kettle", KIT, [0.22, 0.18, 0.25], [190, 190, 200]),
    small("cutting_board", KIT, [0.4, 0.28, 0.03], [200, 160, 110]),
    small("coffee_maker", KIT, [0.25, 0.3, 0.35], [40, 40, 40]),
    small("soap_dispenser", BAT, [0.08, 0.08, 0.2], [120, 200, 190]),
    small("towel_stack", BAT, [0.35, 0.3, 0.15], [240, 230, 210]),
    small("toothbrush_cup", BAT, [0.08, 0.08, 0.12], [100, 180, 230]),
    small("alarm_clock", BED, [0.15, 0.08, 0.12], [220, 60, 60]),
    small("jewelry_box", BED, [0.2, 0.14, 0.08], [120, 30, 90]),
    small("picture_frame", LIV | BED, [0.25, 0.05, 0.3], [180, 170, 130]),
    small("candle", LIV | BAT | BED, [0.08, 0.08, 0.18], [250, 245, 220]),
];

pub fn lookup(name: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name)
}

pub fn entries_for(style: Style) -> impl Iterator<Item = &'static CatalogEntry> {
    CATALOG.iter().filter(move |e| e.has_style(style))
}
