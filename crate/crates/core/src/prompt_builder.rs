//! Generation prompt assembly.
//!
//! The instruction message is built from a layout with named slots:
//! `{{preamble}}`, `{{guidelines}}`, `{{examples}}`, `{{context}}` and
//! `{{reply_language}}`. The user message layout holds the single
//! `{{question}}` slot, so the question never appears in the instruction message.
//!
//! Override files are plain text: the instruction layout, then a line that is
//! exactly `[user]`, then the user layout.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::knowledge_base::FaqId;
use crate::language::LanguageTag;
use crate::providers::ChatMessage;

/// Opening marker of a context block; the FAQ id follows, then `]`.
pub const CONTEXT_OPEN: &str = "[context id=";
pub const CONTEXT_CLOSE: &str = "[/context]";

const SLOT_PREAMBLE: &str = "{{preamble}}";
const SLOT_GUIDELINES: &str = "{{guidelines}}";
const SLOT_EXAMPLES: &str = "{{examples}}";
const SLOT_CONTEXT: &str = "{{context}}";
const SLOT_REPLY_LANGUAGE: &str = "{{reply_language}}";
const SLOT_QUESTION: &str = "{{question}}";
const USER_SECTION_MARKER: &str = "[user]";

pub const LANGUAGE_RULE: &str = "Always reply in the same language AND the same script as the \
customer: Bengali script for Bengali script, English for English, and Bengali written with Roman \
letters (Banglish) for Banglish, even when the context is written in another language.";

pub const CONTEXT_RULE: &str = "Answer only with information found in the context below. Do not \
add facts, prices, links or steps that the context does not contain.";

pub const ESCALATION_RULE: &str = "If the context does not contain the answer, say that you cannot \
answer this from the available information, ask the customer for the missing details, or offer to \
connect them with a human operator.";

pub const CONTACT_RULE: &str = "Never invent e-mail addresses, phone numbers or other contact \
channels. When the customer needs further help, offer to connect them with a human operator.";

pub const STYLE_RULE: &str = "Be polite and concise. Do not add salutations, signatures or \
placeholders such as [Your Name].";

const DEFAULT_PREAMBLE: &str = "You are the customer service agent of StreamBox, a video streaming \
platform. You always act in the name and in the interest of StreamBox and help customers resolve \
their problems with the platform and its services.";

const NO_CONTEXT_NOTICE: &str = "(No FAQ entry matched this question.)\nNo relevant context was \
found. Follow the rule for missing information: do not guess, ask for details or offer a human \
operator.";

const DEFAULT_INSTRUCTION_LAYOUT: &str = "{{preamble}}

Guidelines:
{{guidelines}}

Example of matching the customer's language and script:
{{examples}}

Context:
{{context}}

{{reply_language}}";

const DEFAULT_USER_LAYOUT: &str = "{{question}}";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("template slot {slot} must appear exactly once in the {part} (found {count})")]
    SlotCount {
        slot: &'static str,
        part: &'static str,
        count: usize,
    },
    #[error("template is missing the `[user]` section marker")]
    MissingUserSection,
    #[error("guidelines must include the language/script rule and the escalation rule")]
    MissingRequiredGuideline,
    #[error("cannot read template file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotExample {
    pub user: String,
    pub reply: String,
}

impl FewShotExample {
    fn new(user: &str, reply: &str) -> Self {
        FewShotExample {
            user: user.to_owned(),
            reply: reply.to_owned(),
        }
    }
}

/// A context block handed to the generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextBlock {
    pub faq_id: FaqId,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role_preamble: String,
    pub guidelines: Vec<String>,
    pub few_shot_examples: Vec<FewShotExample>,
    instruction_layout: String,
    user_layout: String,
}

/// Instruction message followed by one user message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptMessages {
    pub instruction: ChatMessage,
    pub user: ChatMessage,
}

impl PromptMessages {
    pub fn to_vec(&self) -> Vec<ChatMessage> {
        vec![self.instruction.clone(), self.user.clone()]
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            role_preamble: DEFAULT_PREAMBLE.to_owned(),
            guidelines: [LANGUAGE_RULE, CONTEXT_RULE, ESCALATION_RULE, CONTACT_RULE, STYLE_RULE]
                .map(str::to_owned)
                .to_vec(),
            few_shot_examples: vec![
                FewShotExample::new(
                    "আমার ভিডিও বারবার আটকে যাচ্ছে।",
                    "দুঃখিত, ভিডিও আটকে যাওয়ার জন্য। অনুগ্রহ করে অন্য একটি ইন্টারনেট সংযোগে চেষ্টা করুন এবং অ্যাপের ক্যাশ মুছে আবার চালু করুন।",
                ),
                FewShotExample::new(
                    "My video keeps stopping.",
                    "Sorry about the interruptions. Please try a different internet connection and clear the app cache before restarting the app.",
                ),
                FewShotExample::new(
                    "amar video ta bar bar atke jacche",
                    "Video atke jawar jonno dukkhito. Onugroho kore onno ekta internet connection e try korun ar app er cache clear kore abar chalu korun.",
                ),
            ],
            instruction_layout: DEFAULT_INSTRUCTION_LAYOUT.to_owned(),
            user_layout: DEFAULT_USER_LAYOUT.to_owned(),
        }
    }
}

/// Reply-language directive appended to every instruction message.
pub fn reply_language_directive(lang: LanguageTag) -> &'static str {
    match lang {
        LanguageTag::English => "Reply in English using Roman script.",
        LanguageTag::Bengali => "Reply in Bengali using Bengali script.",
        LanguageTag::Banglish => "Reply in Bengali written in Roman script (Banglish).",
    }
}

fn check_slot(text: &str, slot: &'static str, part: &'static str, expected: usize) -> Result<(), PromptError> {
    let count = text.matches(slot).count();
    if count != expected {
        return Err(PromptError::SlotCount { slot, part, count });
    }
    Ok(())
}

fn render_context(contexts: &[ContextBlock]) -> String {
    if contexts.is_empty() {
        return NO_CONTEXT_NOTICE.to_owned();
    }
    contexts
        .iter()
        .map(|c| format!("{CONTEXT_OPEN}{}]\nQ: {}\nA: {}\n{CONTEXT_CLOSE}", c.faq_id, c.question, c.answer))
        .collect::<Vec<_>>()
        .join("\n")
}

impl PromptTemplate {
    /// Custom layouts; the default preamble, guidelines and examples are kept.
    pub fn with_layouts(instruction_layout: impl Into<String>, user_layout: impl Into<String>) -> Result<Self, PromptError> {
        let t = PromptTemplate {
            instruction_layout: instruction_layout.into(),
            user_layout: user_layout.into(),
            ..Default::default()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut instruction = Vec::new();
        let mut user: Option<Vec<&str>> = None;
        for line in text.lines() {
            match &mut user {
                None if line.trim_end() == USER_SECTION_MARKER => user = Some(Vec::new()),
                None => instruction.push(line),
                Some(u) => u.push(line),
            }
        }
        let user = user.ok_or(PromptError::MissingUserSection)?;
        Self::with_layouts(instruction.join("\n").trim_end(), user.join("\n").trim())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path).map_err(|e| PromptError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        check_slot(&self.instruction_layout, SLOT_CONTEXT, "instruction", 1)?;
        check_slot(&self.instruction_layout, SLOT_QUESTION, "instruction", 0)?;
        check_slot(&self.user_layout, SLOT_QUESTION, "user message", 1)?;
        check_slot(&self.user_layout, SLOT_CONTEXT, "user message", 0)?;
        // Guidelines are either a slot filled from `self.guidelines` or written
        // inline in the layout (as in the rendered docs).
        let has = |rule: &str| match self.instruction_layout.matches(SLOT_GUIDELINES).count() {
            0 => self.instruction_layout.contains(rule),
            _ => self.guidelines.iter().any(|g| g == rule),
        };
        check_slot(
            &self.instruction_layout,
            SLOT_GUIDELINES,
            "instruction",
            self.instruction_layout.matches(SLOT_GUIDELINES).count().min(1),
        )?;
        if !has(LANGUAGE_RULE) || !has(ESCALATION_RULE) {
            return Err(PromptError::MissingRequiredGuideline);
        }
        Ok(())
    }

    fn render_guidelines(&self, emphasize_escalation: bool) -> String {
        self.guidelines
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if emphasize_escalation && g == ESCALATION_RULE {
                    format!("{}. IMPORTANT: {g}", i + 1)
                } else {
                    format!("{}. {g}", i + 1)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render_examples(&self) -> String {
        self.few_shot_examples
            .iter()
            .map(|e| format!("Customer: {}\nAgent: {}", e.user, e.reply))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Resolves preamble, guidelines and examples, leaving the per-request
    /// slots in place. Output uses the override file format.
    pub fn render_template_docs(&self) -> String {
        let instruction = self
            .instruction_layout
            .replace(SLOT_PREAMBLE, &self.role_preamble)
            .replace(SLOT_GUIDELINES, &self.render_guidelines(false))
            .replace(SLOT_EXAMPLES, &self.render_examples());
        format!("{instruction}\n{USER_SECTION_MARKER}\n{}\n", self.user_layout)
    }

    pub fn build_prompt(
        &self,
        question: &str,
        contexts: &[ContextBlock],
        lang: LanguageTag,
    ) -> Result<PromptMessages, PromptError> {
        if question.trim().is_empty() {
            return Err(PromptError::EmptyQuestion);
        }
        // Slots are filled in a single pass so slot-like text inside FAQ content
        // or the question is never expanded.
        let instruction = fill_slots(
            &self.instruction_layout,
            &[
                (SLOT_PREAMBLE, self.role_preamble.clone()),
                (SLOT_GUIDELINES, self.render_guidelines(contexts.is_empty())),
                (SLOT_EXAMPLES, self.render_examples()),
                (SLOT_CONTEXT, render_context(contexts)),
                (SLOT_REPLY_LANGUAGE, reply_language_directive(lang).to_owned()),
            ],
        );
        let user = fill_slots(&self.user_layout, &[(SLOT_QUESTION, question.to_owned())]);
        Ok(PromptMessages {
            instruction: ChatMessage::system(instruction),
            user: ChatMessage::user(user),
        })
    }
}

fn fill_slots(layout: &str, values: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(layout.len());
    let mut rest = layout;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        match values.iter().find(|(slot, _)| tail.starts_with(slot)) {
            Some((slot, value)) => {
                out.push_str(value);
                rest = &tail[slot.len()..];
            }
            None => {
                out.push_str("{{");
                rest = &tail[2..];
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn build_prompt(question: &str, contexts: &[ContextBlock], lang: LanguageTag) -> Result<PromptMessages, PromptError> {
    PromptTemplate::default().build_prompt(question, contexts, lang)
}

pub fn render_template_docs() -> String {
    PromptTemplate::default().render_template_docs()
}
