//! Prompt templates, integrated connectives and the virtual answer space.

mod answer_space;
mod connectives;
mod template;

pub use answer_space::{
    aggregate_relation_scores, build_answer_space, gold_answer, init_virtual_answers, Answer,
    AnswerSpace, Granularity, MappingRow, MappingTable,
};
pub use connectives::{
    normalize_connective, register_integrated_connectives, ConnectiveInventory,
    IntegratedConnective,
};
pub use template::{
    build_student_prompt, build_teacher_prompt, register_template_tokens, virtual_token_name,
    PromptInstance, TemplateKind, TemplateSpec,
};
