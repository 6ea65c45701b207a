//! Script and language identification for English, Bengali and Banglish text.
//!
//! Script is decided by the share of letters in the Bengali Unicode block.
//! Roman-script text is further split into English and Banglish (romanized
//! Bengali, often code-switched with English) using a lexicon of common
//! romanized Bengali tokens.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum share of letters in the Bengali block for text to count as Bengali
/// script, as a (numerator, denominator) pair: 30%.
pub const BENGALI_SCRIPT_SHARE: (usize, usize) = (3, 10);

/// Minimum number of lexicon hits for Roman-script text to count as Banglish.
pub const BANGLISH_MIN_HITS: usize = 2;

const BENGALI_BLOCK: std::ops::RangeInclusive<char> = '\u{0980}'..='\u{09FF}';

// Romanized Bengali function words, pronouns and verb forms. Words that double
// as common English tokens ("to", "er", "e", "are", "pore") are left out.
const BANGLISH_LEXICON: &[&str] = &[
    "ami", "amar", "amake", "amra", "amader", "apni", "apnar", "apnake", "apnara", "apnader",
    "tumi", "tomar", "tomake", "tomra", "tader", "oder", "ora", "uni", "unar",
    "ki", "keno", "kno", "kemon", "kothay", "kothai", "kokhon", "kobe", "koto", "kon", "kivabe",
    "kibhabe", "kivave", "kemne",
    "hocche", "hosse", "hoche", "hoy", "hoyni", "hobe", "hoyeche", "hoye", "holo", "hoyna", "hoina",
    "chilo", "ache", "ase", "achhe", "nai", "nei", "na", "thakle", "thake", "thakbe",
    "korte", "korbo", "korben", "korchi", "korlam", "kore", "koren", "korun", "korechi", "korar",
    "korbe", "korche", "korlei", "koreo",
    "parchi", "parbo", "paren", "parina", "pari", "parlam", "pacchi", "pachchi", "paini", "pabo",
    "pelam", "pai",
    "dekhte", "dekhchi", "dekhacche", "dekhasse", "dekhay", "dekhen", "dekhun", "dekhlam", "dekhi",
    "chai", "chacchi", "dite", "dicchi", "diben", "deben", "dilam", "dicche", "dey", "deya",
    "niye", "nite", "nibo", "jabe", "jacche", "jay", "jai", "geche", "gelo", "gese",
    "ashche", "asche", "aschhe", "ashe", "ashlo", "lagche", "lagbe", "laglo",
    "jodi", "tahole", "tahle", "tale", "tobe", "kintu", "ebong", "abar", "ekhon", "ekhono",
    "akhon", "akhono", "ajke", "aaj", "kalke", "onek", "khub", "ekta", "akta", "ekti", "ekjon",
    "ta", "ti", "gulo", "guli", "theke", "jonno", "jnno", "diye", "sathe", "shathe", "shudhu",
    "sudhu", "ei", "oi", "eta", "ota", "oita", "eita", "kichu", "keu", "kew", "bhai", "vai",
    "dada", "apu", "accha", "thik", "bhalo", "valo", "kharap", "somossa", "shomossa", "somoshsha",
    "taka", "mash", "masher", "bochor", "baki", "bhul", "vul", "bolun", "bolben", "janan",
    "janaben", "janben", "bujhte", "bujhchi", "majhe", "atke", "khulte", "khulche", "por",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LanguageError {
    #[error("text is empty")]
    EmptyText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    English,
    Bengali,
    Banglish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Script {
    Roman,
    Bengali,
}

/// Detected language and script of a user utterance.
///
/// Only three combinations exist: English in Roman script, Bengali in Bengali
/// script, and Banglish (Bengali in Roman script).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "LanguageTagRepr", try_from = "LanguageTagRepr")]
pub enum LanguageTag {
    English,
    Bengali,
    Banglish,
}

impl LanguageTag {
    pub const ALL: [LanguageTag; 3] = [LanguageTag::English, LanguageTag::Bengali, LanguageTag::Banglish];

    pub fn language(self) -> Language {
        match self {
            LanguageTag::English => Language::English,
            LanguageTag::Bengali => Language::Bengali,
            LanguageTag::Banglish => Language::Banglish,
        }
    }

    pub fn script(self) -> Script {
        match self {
            LanguageTag::Bengali => Script::Bengali,
            LanguageTag::English | LanguageTag::Banglish => Script::Roman,
        }
    }

    /// Short code used in judgment and annotation files.
    pub fn code(self) -> &'static str {
        match self {
            LanguageTag::English => "en",
            LanguageTag::Bengali => "bn",
            LanguageTag::Banglish => "banglish",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "en" => Some(LanguageTag::English),
            "bn" => Some(LanguageTag::Bengali),
            "banglish" => Some(LanguageTag::Banglish),
            _ => None,
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LanguageTag::English => "English",
            LanguageTag::Bengali => "Bengali",
            LanguageTag::Banglish => "Banglish",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LanguageTagRepr {
    language: Language,
    script: Script,
}

impl From<LanguageTag> for LanguageTagRepr {
    fn from(tag: LanguageTag) -> Self {
        LanguageTagRepr {
            language: tag.language(),
            script: tag.script(),
        }
    }
}

impl TryFrom<LanguageTagRepr> for LanguageTag {
    type Error = String;

    fn try_from(r: LanguageTagRepr) -> Result<Self, Self::Error> {
        match (r.language, r.script) {
            (Language::English, Script::Roman) => Ok(LanguageTag::English),
            (Language::Bengali, Script::Bengali) => Ok(LanguageTag::Bengali),
            (Language::Banglish, Script::Roman) | (Language::Bengali, Script::Roman) => {
                Ok(LanguageTag::Banglish)
            }
            (l, s) => Err(format!("unsupported language/script pair {l:?}/{s:?}")),
        }
    }
}

pub fn is_bengali_char(c: char) -> bool {
    BENGALI_BLOCK.contains(&c)
}

pub fn contains_bengali(text: &str) -> bool {
    text.chars().any(is_bengali_char)
}

/// Lowercased ASCII-alphabetic tokens of `text`.
fn roman_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
}

pub fn banglish_lexicon_hits(text: &str) -> usize {
    roman_tokens(text)
        .filter(|t| BANGLISH_LEXICON.contains(&t.as_str()))
        .count()
}

pub fn detect_language_and_script(text: &str) -> Result<LanguageTag, LanguageError> {
    if text.trim().is_empty() {
        return Err(LanguageError::EmptyText);
    }
    let (letters, bengali) = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(l, b), c| (l + 1, b + is_bengali_char(c) as usize));
    let bengali_script = if letters == 0 {
        contains_bengali(text)
    } else {
        let (num, den) = BENGALI_SCRIPT_SHARE;
        bengali * den >= letters * num
    };
    if bengali_script {
        Ok(LanguageTag::Bengali)
    } else if banglish_lexicon_hits(text) >= BANGLISH_MIN_HITS {
        Ok(LanguageTag::Banglish)
    } else {
        Ok(LanguageTag::English)
    }
}
