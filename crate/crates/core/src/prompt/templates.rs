//! Prompt templates P0..P9 for every dataset family.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttrValue, AttributeKey, AttributeSet, GeneralDescriptionBank};
use crate::error::{Error, Result};

/// Families of datasets sharing one set of prompt templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFamily {
    Endoscopy,
    Isic,
    Dfu,
    Camus,
    Busi,
    Chexlocalize,
}

impl DatasetFamily {
    pub const ALL: [DatasetFamily; 6] = [
        DatasetFamily::Endoscopy,
        DatasetFamily::Isic,
        DatasetFamily::Dfu,
        DatasetFamily::Camus,
        DatasetFamily::Busi,
        DatasetFamily::Chexlocalize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetFamily::Endoscopy => "endoscopy",
            DatasetFamily::Isic => "isic",
            DatasetFamily::Dfu => "dfu",
            DatasetFamily::Camus => "camus",
            DatasetFamily::Busi => "busi",
            DatasetFamily::Chexlocalize => "chexlocalize",
        }
    }

    /// Photographic families share the endoscopy template list.
    pub fn is_photographic(self) -> bool {
        matches!(self, DatasetFamily::Endoscopy | DatasetFamily::Isic | DatasetFamily::Dfu)
    }

    pub fn max_prompt_type(self) -> PromptType {
        match self {
            DatasetFamily::Endoscopy | DatasetFamily::Isic | DatasetFamily::Dfu => PromptType::P9,
            DatasetFamily::Camus => PromptType::P7,
            DatasetFamily::Busi | DatasetFamily::Chexlocalize => PromptType::P6,
        }
    }

    pub fn prompt_types(self) -> Vec<PromptType> {
        PromptType::ALL.iter().copied().filter(|p| *p <= self.max_prompt_type()).collect()
    }

    pub fn supports(self, ptype: PromptType) -> bool {
        ptype <= self.max_prompt_type()
    }

    /// Class keyword used by the photographic templates.
    pub fn default_class_keyword(self) -> Option<&'static str> {
        match self {
            DatasetFamily::Endoscopy => Some("polyp"),
            DatasetFamily::Isic => Some("skin melanoma"),
            DatasetFamily::Dfu => Some("foot ulcer"),
            DatasetFamily::Busi => Some("tumor"),
            DatasetFamily::Camus | DatasetFamily::Chexlocalize => None,
        }
    }
}

impl fmt::Display for DatasetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == lower)
            .ok_or_else(|| Error::Config(format!("unknown dataset family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptType {
    P0,
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
}

impl PromptType {
    pub const ALL: [PromptType; 10] = [
        PromptType::P0,
        PromptType::P1,
        PromptType::P2,
        PromptType::P3,
        PromptType::P4,
        PromptType::P5,
        PromptType::P6,
        PromptType::P7,
        PromptType::P8,
        PromptType::P9,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index())
    }
}

impl FromStr for PromptType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix(['P', 'p'])
            .and_then(|d| d.parse::<usize>().ok())
            .and_then(Self::from_index)
            .ok_or_else(|| Error::Config(format!("unknown prompt type `{s}`")))
    }
}

/// Which alternative phrasing and which bank description to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateChoice {
    pub phrasing: usize,
    pub description: usize,
}

/// Number of alternative phrasings the template for `(family, ptype)` has.
pub fn phrasing_count(family: DatasetFamily, ptype: PromptType) -> usize {
    match family {
        DatasetFamily::Camus if ptype != PromptType::P0 => 2,
        DatasetFamily::Busi if ptype >= PromptType::P2 => 2,
        _ => 1,
    }
}

fn needs_description(family: DatasetFamily, ptype: PromptType) -> bool {
    family.is_photographic() && ptype >= PromptType::P7
}

/// Composes prompt strings from attribute sets.
#[derive(Debug, Clone, Default)]
pub struct PromptComposer {
    bank: GeneralDescriptionBank,
}

impl PromptComposer {
    pub fn new(bank: GeneralDescriptionBank) -> Self {
        Self { bank }
    }

    pub fn bank(&self) -> &GeneralDescriptionBank {
        &self.bank
    }

    /// Draw a uniformly random phrasing and bank description.
    pub fn draw_choice<R: Rng + ?Sized>(&self, family: DatasetFamily, ptype: PromptType, rng: &mut R) -> TemplateChoice {
        let phrasing = match phrasing_count(family, ptype) {
            1 => 0,
            n => rng.random_range(0..n),
        };
        let description = if needs_description(family, ptype) {
            let n = self.bank.descriptions(family).map_or(1, <[String]>::len).max(1);
            rng.random_range(0..n)
        } else {
            0
        };
        TemplateChoice { phrasing, description }
    }

    pub fn compose<R: Rng + ?Sized>(
        &self,
        family: DatasetFamily,
        ptype: PromptType,
        attrs: &AttributeSet,
        rng: &mut R,
    ) -> Result<String> {
        if !family.supports(ptype) {
            return Err(Error::PromptTypeUnavailable { family, ptype });
        }
        let choice = self.draw_choice(family, ptype, rng);
        self.compose_with(family, ptype, attrs, choice)
    }

    pub fn compose_with(
        &self,
        family: DatasetFamily,
        ptype: PromptType,
        attrs: &AttributeSet,
        choice: TemplateChoice,
    ) -> Result<String> {
        if !family.supports(ptype) {
            return Err(Error::PromptTypeUnavailable { family, ptype });
        }
        if ptype == PromptType::P0 {
            return Ok(String::new());
        }
        let slots = Slots { attrs };
        match family {
            DatasetFamily::Endoscopy | DatasetFamily::Isic | DatasetFamily::Dfu => {
                self.photographic(family, ptype, &slots, choice)
            }
            DatasetFamily::Chexlocalize => chexlocalize(ptype, &slots),
            DatasetFamily::Camus => camus(ptype, &slots, choice.phrasing),
            DatasetFamily::Busi => busi(ptype, &slots, choice.phrasing),
        }
    }

    fn description(&self, family: DatasetFamily, slots: &Slots<'_>, index: usize) -> Result<String> {
        if let Some(v) = slots.attrs.value(AttributeKey::GeneralClassInfo) {
            if !v.is_empty() {
                return Ok(v.render());
            }
        }
        self.bank
            .descriptions(family)
            .and_then(|list| list.get(index % list.len().max(1)))
            .cloned()
            .ok_or(Error::MissingAttribute(AttributeKey::GeneralClassInfo))
    }

    fn photographic(
        &self,
        family: DatasetFamily,
        ptype: PromptType,
        s: &Slots<'_>,
        choice: TemplateChoice,
    ) -> Result<String> {
        use PromptType::*;
        let class = s.get(AttributeKey::ClassKeyword)?;
        let described = |lead: String| -> Result<String> {
            Ok(format!("{lead}, which is {}", self.description(family, s, choice.description)?))
        };
        let full = || -> Result<String> {
            Ok(format!(
                "{} {} {} {} {class}",
                s.get(AttributeKey::Number)?,
                s.get(AttributeKey::Size)?,
                s.get(AttributeKey::Color)?,
                s.get(AttributeKey::Shape)?,
            ))
        };
        Ok(match ptype {
            P0 => String::new(),
            P1 => class,
            P2 => format!("{} {class}", s.get(AttributeKey::Shape)?),
            P3 => format!("{} {} {class}", s.get(AttributeKey::Color)?, s.get(AttributeKey::Shape)?),
            P4 => format!(
                "{} {} {} {class}",
                s.get(AttributeKey::Size)?,
                s.get(AttributeKey::Color)?,
                s.get(AttributeKey::Shape)?
            ),
            P5 => full()?,
            P6 => format!("{}, located in the {} of the image", full()?, s.get(AttributeKey::Location)?),
            P7 => described(class)?,
            P8 => described(full()?)?,
            P9 => {
                let lead = described(full()?)?;
                format!("{lead} located in the {} of the image", s.get(AttributeKey::Location)?)
            }
        })
    }
}

struct Slots<'a> {
    attrs: &'a AttributeSet,
}

impl Slots<'_> {
    fn get(&self, key: AttributeKey) -> Result<String> {
        self.attrs.require(key)
    }

    fn raw(&self, key: AttributeKey) -> Result<&AttrValue> {
        match self.attrs.value(key) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::MissingAttribute(key)),
        }
    }
}

fn chexlocalize(ptype: PromptType, s: &Slots<'_>) -> Result<String> {
    use PromptType::*;
    let labels = s.get(AttributeKey::ClassKeyword)?;
    let located = || -> Result<String> {
        Ok(format!(
            "{labels} of shape {}, and located in {} of the {} view of a Chest Xray.",
            s.get(AttributeKey::Shape)?,
            s.get(AttributeKey::Location)?,
            s.get(AttributeKey::View)?
        ))
    };
    Ok(match ptype {
        P1 => format!("{labels} in a chest Xray."),
        P2 => format!("{labels} in the {} view of a Chest Xray.", s.get(AttributeKey::View)?),
        P3 => format!(
            "{labels} of shape {} in the {} view of a Chest Xray.",
            s.get(AttributeKey::Shape)?,
            s.get(AttributeKey::View)?
        ),
        P4 => located()?,
        P5 => format!("{} {} are present.", located()?, s.get(AttributeKey::Pathology)?),
        P6 => format!("{labels} in a Chest Xray. {} are present.", s.get(AttributeKey::Pathology)?),
        _ => unreachable!("guarded by supports()"),
    })
}

fn camus(ptype: PromptType, s: &Slots<'_>, phrasing: usize) -> Result<String> {
    use PromptType::*;
    let context = if phrasing % 2 == 0 { "of the heart" } else { "in the cardiac ultrasound" };
    let class = s.get(AttributeKey::ClassKeyword)?;
    if ptype == P1 {
        return Ok(format!("{class} {context}"));
    }
    let view = s.get(AttributeKey::View)?;
    let head = if ptype == P7 {
        format!("{class} of {} shape in {view} view {context}", s.get(AttributeKey::Shape)?)
    } else {
        format!("{class} in {view} view {context}")
    };
    if ptype == P2 {
        return Ok(format!("{head}."));
    }
    let cycle = format!("{head} at the end of the {} cycle", s.get(AttributeKey::CardiacCycle)?);
    let gender = || s.get(AttributeKey::Gender);
    let age = || s.get(AttributeKey::Age);
    Ok(match ptype {
        P3 => format!("{cycle}."),
        P4 => format!("{cycle} of a {}.", gender()?),
        P5 => format!("{cycle} of a {} {}.", age()?, gender()?),
        P6 | P7 => format!(
            "{cycle} of a {} {} with {} image quality.",
            age()?,
            gender()?,
            s.get(AttributeKey::ImageQuality)?
        ),
        _ => unreachable!("guarded by supports()"),
    })
}

/// Descriptor form of a tumour type used by the alternative phrasing.
fn tumor_descriptor(kind: &str, with_shape: bool) -> String {
    let base = match kind.to_ascii_lowercase().as_str() {
        "benign" => "regular",
        "malignant" => "irregular",
        _ => return kind.to_string(),
    };
    if with_shape {
        base.to_string()
    } else {
        format!("{base}-shaped")
    }
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn busi(ptype: PromptType, s: &Slots<'_>, phrasing: usize) -> Result<String> {
    use PromptType::*;
    const TAIL: &str = "in the breast ultrasound image";
    let class = s.get(AttributeKey::ClassKeyword)?;
    if ptype == P1 {
        let none = s.attrs.value(AttributeKey::Number).is_some_and(|n| n.render().eq_ignore_ascii_case("no"));
        return Ok(if none {
            format!("No {class} {TAIL}")
        } else {
            format!("{class} {TAIL}")
        });
    }
    let raw_type = s.get(AttributeKey::TumorType)?;
    let kind = if phrasing % 2 == 0 {
        raw_type
    } else {
        tumor_descriptor(&raw_type, ptype == P6)
    };
    if ptype == P2 {
        return Ok(capitalize_first(&format!("{kind} {class} {TAIL}")));
    }
    let number = s.get(AttributeKey::Number)?;
    let noun = if number.eq_ignore_ascii_case("one") {
        class
    } else {
        format!("{class}s")
    };
    let text = match ptype {
        P3 => format!("{number} {kind} {noun} {TAIL}"),
        P4 => format!("{number} {} {kind} {noun} {TAIL}", s.get(AttributeKey::Size)?),
        P5 => format!(
            "{number} {} {kind} {noun} at the {} {TAIL}",
            s.get(AttributeKey::Size)?,
            s.raw(AttributeKey::Location)?.render()
        ),
        P6 => format!(
            "{number} {} {} {kind} {noun} at the {} {TAIL}",
            s.get(AttributeKey::Size)?,
            s.get(AttributeKey::Shape)?,
            s.raw(AttributeKey::Location)?.render()
        ),
        _ => unreachable!("guarded by supports()"),
    };
    Ok(capitalize_first(&text))
}

/// Compose with the built-in description bank.
pub fn compose_prompt<R: Rng + ?Sized>(
    family: DatasetFamily,
    ptype: PromptType,
    attrs: &AttributeSet,
    rng: &mut R,
) -> Result<String> {
    PromptComposer::default().compose(family, ptype, attrs, rng)
}
