#![allow(dead_code)]

pub mod oracle;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use fictionist::{PtbTag, TagRecord};

/// One gold sentence: input, gold tags of its paradigm pronouns in order,
/// and the hand-written expected perturbation.
pub struct GoldSentence {
    pub input: String,
    pub tags: Vec<String>,
    pub expected: String,
}

pub fn gold_corpus() -> Vec<GoldSentence> {
    let text = include_str!("../fixtures/gold.tsv");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols.len(), 3, "bad gold row: {l}");
            GoldSentence {
                input: cols[0].to_string(),
                tags: cols[1].split_whitespace().map(str::to_string).collect(),
                expected: cols[2].to_string(),
            }
        })
        .collect()
}

/// Tag records for a gold sentence: paradigm pronouns get their gold tag,
/// every other word a content tag.
pub fn gold_records(sentence: &GoldSentence, paradigm: &fictionist::PronounParadigm) -> Vec<TagRecord> {
    let mut gold = sentence.tags.iter();
    let records: Vec<TagRecord> = fictionist::tokenize(&sentence.input)
        .iter()
        .filter(|t| t.is_word())
        .map(|t| {
            if paradigm.is_source(&t.lowercase()) {
                let tag = gold.next().unwrap_or_else(|| panic!("too few gold tags: {}", sentence.input));
                assert!(PtbTag::from_ptb(tag) != PtbTag::Other, "bad gold tag {tag}");
                TagRecord::new(t.surface, tag)
            } else {
                TagRecord::new(t.surface, "NN")
            }
        })
        .collect();
    assert!(gold.next().is_none(), "too many gold tags: {}", sentence.input);
    records
}

/// Uniform-ish random Unicode strings, biased toward the interesting classes.
pub fn random_utf8(rng: &mut StdRng) -> String {
    let len = rng.gen_range(0..48);
    (0..len)
        .map(|_| match rng.gen_range(0..6) {
            0 => rng.gen_range(' '..='~'),
            1 => *[' ', '\t', '\u{a0}', '\u{2003}', '\r', '\u{3000}'].choose(rng).unwrap(),
            2 => *['\'', '’', '-', '@', '—', '́', '\u{200d}', '🙂'].choose(rng).unwrap(),
            3 => *"hHeEsSrRiImMxX".as_bytes().choose(rng).unwrap() as char,
            _ => loop {
                if let Some(c) = char::from_u32(rng.gen_range(0..0x11_0000)) {
                    if c != '\n' {
                        break c;
                    }
                }
            },
        })
        .collect()
}

const NAMES: [&str; 12] = [
    "Ada Lovelace", "Senjō Tanaka", "José Álvarez", "Mary Shelley", "Søren Kierkegaard",
    "Ngozi Okonkwo", "Émile Zola", "Li Wei", "Björk Guðmundsdóttir", "Kwame Mensah",
    "Olga Tokarczuk", "Marcus Garvey",
];
const PLACES: [&str; 10] = [
    "Zürich", "São Paulo", "New South Wales", "Kraków", "Ōsaka", "Dublin", "Lagos", "Québec",
    "Tromsø", "Cairo",
];
const NOUNS: [&str; 16] = [
    "father", "mother", "career", "album", "novel", "brother", "team", "estate", "studies",
    "regiment", "ship", "students", "manuscript", "campaign", "wife", "husband",
];

struct Forms {
    nom: &'static str,
    acc: &'static str,
    poss: &'static str,
    indep: &'static str,
    refl: &'static str,
}

const FEMININE: Forms = Forms { nom: "she", acc: "her", poss: "her", indep: "hers", refl: "herself" };
const MASCULINE: Forms = Forms { nom: "he", acc: "him", poss: "his", indep: "his", refl: "himself" };

const TEMPLATES: [&str; 24] = [
    "{Nom} was born in {place} in {year} , where {poss} {noun} worked as a clerk .",
    "In {year} , {nom} moved to {place} with {poss} {noun} .",
    "Critics praised {poss} {noun} , and the press described {acc} as \" a singular talent \" .",
    "The university awarded {acc} an honorary degree in {year} .",
    "{Poss} {noun} later recalled that {nom} \" never rested \" .",
    "After {poss} death in {year} , {poss} {noun} passed to {poss} {noun} .",
    "{Nom} described {refl} as a \" reluctant politician \" .",
    "The painting , once {indep} , now hangs in {place} .",
    "Her @-@ era contemporaries ; no , {poss} rivals , often wrote to {acc} .",
    "The {noun} was dedicated to {acc} and to {poss} {noun} .",
    "{Nom} 's {noun} reached number 3 on the chart , selling 1 @,@ 200 @,@ 000 copies .",
    "Many historians consider {acc} the founder of the movement .",
    "The decision was {indep} alone .",
    "{Nom} taught {refl} Latin , Greek and the 2 @.@ 5 @-@ octave scale .",
    "According to {poss} biographer , {nom} was \" difficult but fair \" .",
    "The crew of the {noun} refused to follow {acc} ; {nom} resigned in {year} .",
    "{Nom} and {poss} {noun} founded a school in {place} .",
    "The prize went to {acc} in {year} .",
    "( {Nom} later denied this . )",
    "A statue of {acc} stands in {place} – unveiled {year} .",
    "{Poss} first {noun} , published in {year} , was a commercial failure .",
    "When asked , {nom} said the idea was {indep} .",
    "THE LIFE OF {NAME} : {NOM} AND {POSS} {NOUN}",
    "{name} ( Japanese : 戦場のヴァルキュリア , lit . \" {nom} of the battlefield \" ) returned {year} .",
];

fn fill(template: &str, forms: &Forms, name: &str, rng: &mut StdRng) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = rest[start..].find('}').unwrap() + start;
        let key = &rest[start + 1..end];
        let value: String = match key.to_lowercase().as_str() {
            "nom" => forms.nom.into(),
            "acc" => forms.acc.into(),
            "poss" => forms.poss.into(),
            "indep" => forms.indep.into(),
            "refl" => forms.refl.into(),
            "noun" => NOUNS.choose(rng).unwrap().to_string(),
            "place" => PLACES.choose(rng).unwrap().to_string(),
            "year" => rng.gen_range(1700..2020).to_string(),
            "name" => name.to_string(),
            other => panic!("unknown slot {other}"),
        };
        let value = if key.chars().all(|c| c.is_uppercase()) {
            value.to_uppercase()
        } else if key.starts_with(char::is_uppercase) {
            let mut c = value.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        } else {
            value
        };
        out.push_str(&value);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

/// Deterministic corpus in the raw wikitext-103 line format: ` = Title = `
/// headings, ` = = Section = = ` subheadings, blank separator lines and
/// space-tokenized paragraphs with `@-@` style escapes.
pub fn wikitext_sample(lines: usize, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(lines);
    let sections = ["Early life", "Career", "Later years", "Personal life", "Legacy", "Reception"];
    while out.len() < lines {
        let name = *NAMES.choose(&mut rng).unwrap();
        let forms = if rng.gen_bool(0.5) { &FEMININE } else { &MASCULINE };
        out.push(" ".to_string());
        out.push(format!(" = {name} = "));
        out.push(" ".to_string());
        for _ in 0..rng.gen_range(1..4) {
            out.push(" ".to_string());
            out.push(format!(" = = {} = = ", sections.choose(&mut rng).unwrap()));
            out.push(" ".to_string());
            for _ in 0..rng.gen_range(1..4) {
                let sentences: Vec<String> = (0..rng.gen_range(1..7))
                    .map(|_| fill(TEMPLATES.choose(&mut rng).unwrap(), forms, name, &mut rng))
                    .collect();
                out.push(format!(" {} ", sentences.join(" ")));
            }
        }
    }
    out.truncate(lines);
    out
}
