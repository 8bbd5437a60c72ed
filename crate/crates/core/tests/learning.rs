use tdassist_core::drawing::AdjacencyParams;
use tdassist_core::ilp::{corpus, induce, Bias, LearningTask, SearchParams};
use tdassist_core::logic::{parse_program, PredKey, Program};
use tdassist_core::synth;

const BIAS: &str = "\
head header(+cell)
head materials(+index, +cell)
head part_description(+cell)
head author(+cell)
head date(+cell)
body zero(+index)
body succ(-index, +index)
body above_below(+cell, -cell)
body above_below(-cell, +cell)
body left_right(+cell, -cell)
body cell_contains(+cell, #token)
";

#[test]
fn learns_header_and_materials() {
    let drawings = corpus(synth::corpus(&[1, 2, 3, 4, 5], 11), &AdjacencyParams::default());
    let bias = Bias::parse(BIAS).unwrap();
    let t = std::time::Instant::now();
    let task = LearningTask::from_corpus(PredKey::new("header", 1), &drawings, &bias, SearchParams::default()).unwrap();
    let header = induce(&task).unwrap();
    eprintln!("{}\n{:?} {:?}", header.program, header.training, t.elapsed());
    assert_eq!(header.program.to_string().trim(), "header(A) :- above_below(A,B), cell_contains(B,'LIST').");

    let mut bias2 = bias.clone();
    bias2.add(bias.head_mode(&PredKey::new("header", 1)).unwrap().as_body());
    let mut task = LearningTask::from_corpus(PredKey::new("materials", 2), &drawings, &bias2, SearchParams::default()).unwrap();
    task.background = header.program.clone();
    let t = std::time::Instant::now();
    let m = induce(&task).unwrap();
    eprintln!("{}\n{:?} {:?}", m.program, m.training, t.elapsed());
    let expected: Program = parse_program(
        "materials(A,B) :- zero(A), above_below(B,C), header(C).\n\
         materials(A,B) :- succ(C,A), above_below(B,D), materials(C,D).",
    )
    .unwrap();
    assert_eq!(m.program.len(), 2);
    for c in &expected.clauses {
        assert!(m.program.clauses.iter().any(|x| x.normalized() == c.normalized()), "{c}");
    }
}

#[test]
fn standard_materials_is_larger() {
    let drawings = corpus(synth::corpus(&[1, 2, 3, 4, 5], 11), &AdjacencyParams::default());
    let bias = Bias::parse(BIAS).unwrap();
    let task = LearningTask::from_corpus(PredKey::new("materials", 2), &drawings, &bias, SearchParams::default()).unwrap();
    let t = std::time::Instant::now();
    let m = induce(&task).unwrap();
    eprintln!("{}\n{:?} {:?}", m.program, m.training, t.elapsed());
    assert!(m.program.literal_count() > 8);
}
