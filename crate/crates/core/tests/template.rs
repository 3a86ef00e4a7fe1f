use adaptprompt::corpus::Instance;
use adaptprompt::corpus::{SenseHierarchy, Split};
use adaptprompt::prompting::*;
use adaptprompt::vocab::{self, Vocabulary};
use adaptprompt::Error;

fn inst(arg1_len: usize, arg2_len: usize) -> Instance {
    let h = SenseHierarchy::bundled();
    Instance {
        id: "x".into(),
        arg1: vec!["a"; arg1_len].join(" "),
        arg2: vec!["b"; arg2_len].join(" "),
        connective: "because".into(),
        senses: vec![h.resolve("Contingency.Cause.Reason").unwrap().clone()],
        split: Split::Train,
    }
}

fn vocab() -> Vocabulary {
    let mut v = Vocabulary::default();
    for t in ["a", "b", "because"] {
        v.add_token(t).unwrap();
    }
    for i in 1..=6 {
        v.add_token(&virtual_token_name(i)).unwrap();
    }
    v
}

#[test]
fn continuous_layout() {
    let v = vocab();
    let p = build_student_prompt(&inst(2, 3), &TemplateSpec::default(), &v).unwrap();
    assert_eq!(p.ids.len(), 100);
    assert_eq!(p.ids[0], vocab::CLS);
    assert_eq!(p.slot_pos, 1 + 2 + 3);
    assert_eq!(p.ids[p.slot_pos], vocab::MASK);
    let vid = |i| v.id(&virtual_token_name(i)).unwrap();
    assert_eq!(&p.ids[3..6], &[vid(1), vid(2), vid(3)]);
    assert_eq!(&p.ids[7..10], &[vid(4), vid(5), vid(6)]);
    assert_eq!(p.ids[13], vocab::SEP);
    assert_eq!(p.attn_mask.iter().filter(|&&m| m == 1).count(), 14);
    assert!(p.ids[14..].iter().all(|&i| i == vocab::PAD));
    assert!(p.attn_mask[14..].iter().all(|&m| m == 0));
}

#[test]
fn arg1_truncated_to_fifty() {
    let v = vocab();
    let p = build_student_prompt(&inst(60, 3), &TemplateSpec::default(), &v).unwrap();
    let a = v.id("a").unwrap();
    assert_eq!(p.ids.iter().filter(|&&i| i == a).count(), 50);
    assert_eq!(p.ids.len(), 100);
}

#[test]
fn arg2_truncated_keeps_sep() {
    let v = vocab();
    let p = build_student_prompt(&inst(50, 80), &TemplateSpec::default(), &v).unwrap();
    assert_eq!(p.ids.len(), 100);
    assert_eq!(p.ids[99], vocab::SEP);
    assert!(p.attn_mask.iter().all(|&m| m == 1));
}

#[test]
fn discrete_layout_has_no_virtual_tokens() {
    let v = vocab();
    let p = build_student_prompt(&inst(2, 2), &TemplateSpec::discrete(), &v).unwrap();
    assert_eq!(&p.ids[..6], &[vocab::CLS, 5, 5, vocab::MASK, 6, 6]);
    assert_eq!(p.ids[6], vocab::SEP);
}

#[test]
fn empty_arg2_after_truncation_is_an_error() {
    let v = vocab();
    // [CLS] + 11 + 6 [V] + slot + [SEP] = 20 leaves nothing for arg2
    let spec = TemplateSpec {
        total_len: 20,
        ..Default::default()
    };
    let r = build_student_prompt(&inst(11, 3), &spec, &v);
    assert!(matches!(r, Err(Error::EmptyArgument(_))));
}

#[test]
fn odd_m_rejected() {
    let spec = TemplateSpec {
        m: 5,
        ..Default::default()
    };
    assert!(build_student_prompt(&inst(2, 2), &spec, &vocab()).is_err());
}
