//! Keyword retrieval of task packages.

use std::collections::BTreeSet;

use crate::package::{Corpus, TaskPackage};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "the", "me", "my", "us", "our", "please", "for", "of", "to", "with", "into", "from", "on", "in",
    "at", "up", "some", "make", "do", "can", "could", "you", "i", "it", "is", "be", "then", "also", "get", "let",
];

/// Lowercased alphanumeric words, `_` splitting object names, with a
/// trailing plural `s` dropped and stopwords removed.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
        .map(|w| match w.strip_suffix('s') {
            Some(stem) if stem.len() >= 3 && !stem.ends_with('s') => stem.to_string(),
            _ => w.to_string(),
        })
        .collect()
}

fn package_tokens(p: &TaskPackage) -> BTreeSet<String> {
    let mut text = p.title.clone();
    for s in &p.steps {
        text.push(' ');
        text.push_str(s.target());
        if let Some(src) = s.source() {
            text.push(' ');
            text.push_str(src);
        }
    }
    tokens(&text)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Retrieval {
    pub scene: Option<String>,
    pub environment: String,
    pub packages: Vec<TaskPackage>,
}

impl Retrieval {
    pub fn is_empty(&self) -> bool {
        self.packages.is_empty()
    }

    pub fn report(&self) -> String {
        match &self.scene {
            Some(scene) if !self.is_empty() => {
                let ids: Vec<String> = self.packages.iter().map(|p| p.package_id.to_string()).collect();
                format!("{scene}: packages {}", ids.join(", "))
            }
            _ => "no package found".to_string(),
        }
    }
}

/// Picks the scene with the largest total overlap (first scene on ties) and
/// returns, in corpus order, its packages sharing at least one token with
/// the instruction.
pub fn retrieve_packages(instruction: &str, corpus: &Corpus) -> Retrieval {
    let wanted = tokens(instruction);
    let mut best: Option<(usize, &String)> = None;
    for (name, scene) in &corpus.scenes {
        let score: usize = scene.entries.iter().map(|e| package_tokens(&e.package).intersection(&wanted).count()).sum();
        if score > 0 && best.map_or(true, |(b, _)| score > b) {
            best = Some((score, name));
        }
    }
    let Some((_, name)) = best else {
        return Retrieval::default();
    };
    let scene = &corpus.scenes[name];
    Retrieval {
        scene: Some(name.clone()),
        environment: scene.environment.clone(),
        packages: scene
            .entries
            .iter()
            .filter(|e| package_tokens(&e.package).intersection(&wanted).next().is_some())
            .map(|e| e.package.clone())
            .collect(),
    }
}
