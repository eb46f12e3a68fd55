//! Unary rule language: "Each X is a Y." / "Xs are Ys." / "Xs are not Z."
//! sentences parsed into (antecedent category, relation, object) form, plus
//! claims about a single entity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adjectives from the shipped prompt fixtures that a naive plural test
/// would misread as nouns.
const KNOWN_ADJECTIVES: [&str; 16] = [
    "bony",
    "six-legged",
    "multicellular",
    "unicellular",
    "small",
    "positive",
    "prime",
    "composite",
    "real",
    "imaginary",
    "segmented",
    "cold-blooded",
    "herbivorous",
    "not",
    "fictional",
    "transparent",
];

/// Singularize the final word of a category phrase.
pub fn singularize(phrase: &str) -> String {
    let mut words: Vec<&str> = phrase.split(' ').collect();
    let last = words.pop().unwrap_or("");
    let singular = if let Some(stem) = last.strip_suffix("ies") {
        format!("{stem}y")
    } else if last.ends_with("uses") || last.ends_with("sses") || last.ends_with("xes") {
        last[..last.len() - 2].to_string()
    } else if last.ends_with('s') && !last.ends_with("ss") {
        last[..last.len() - 1].to_string()
    } else {
        last.to_string()
    };
    if words.is_empty() {
        singular
    } else {
        format!("{} {}", words.join(" "), singular)
    }
}

/// Pluralize the final word of a category phrase.
pub fn pluralize(phrase: &str) -> String {
    let mut words: Vec<&str> = phrase.split(' ').collect();
    let last = words.pop().unwrap_or("");
    let plural = if let Some(stem) = last.strip_suffix('y') {
        if stem.ends_with(['a', 'e', 'i', 'o', 'u']) {
            format!("{last}s")
        } else {
            format!("{stem}ies")
        }
    } else if last.ends_with('s') || last.ends_with('x') || last.ends_with("ch") || last.ends_with("sh") {
        format!("{last}es")
    } else {
        format!("{last}s")
    };
    if words.is_empty() {
        plural
    } else {
        format!("{} {}", words.join(" "), plural)
    }
}

fn article_for(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u' | 'A' | 'E' | 'I' | 'O' | 'U') => "an",
        _ => "a",
    }
}

fn looks_like_adjective(phrase: &str) -> bool {
    KNOWN_ADJECTIVES.contains(&phrase)
        || phrase.contains('-')
        || phrase.ends_with("ous")
        || phrase.ends_with("ed")
        || phrase.ends_with("al")
        || phrase.ends_with("ful")
        || phrase.ends_with("less")
}

/// A category membership or a property.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Singular category name ("butterfly", "natural number").
    Category(String),
    /// Adjective ("bony", "six-legged").
    Property(String),
}

impl Predicate {
    fn render(&self, positive: bool) -> String {
        let negation = if positive { "" } else { "not " };
        match self {
            Predicate::Category(c) => format!("{negation}{} {c}", article_for(c)),
            Predicate::Property(p) => format!("{negation}{p}"),
        }
    }
}

/// One rule sentence: antecedent category implies the object predicate with
/// the given polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    /// The verbatim sentence, as it appears in the fact list.
    pub text: String,
    /// Singular antecedent category.
    pub antecedent: String,
    pub consequent: Predicate,
    /// False for "are not" / "is not" rules.
    pub positive: bool,
}

impl Rule {
    /// Parse a rule sentence of the supported grammar.
    pub fn parse(sentence: &str) -> Result<Self> {
        let text = sentence.trim();
        let body = text.trim_end_matches('.');
        let (subject, object, quantified) = if let Some(rest) = body
            .strip_prefix("Each ")
            .or_else(|| body.strip_prefix("Every "))
        {
            let (subject, object) = rest
                .split_once(" is ")
                .ok_or_else(|| Error::Parse(format!("bad rule: {text:?}")))?;
            (subject.to_string(), object, true)
        } else if let Some((subject, object)) = body.split_once(" are ") {
            (singularize(&lowercase_first(subject)), object, false)
        } else {
            return Err(Error::Parse(format!("bad rule: {text:?}")));
        };
        let (object, positive) = match object.strip_prefix("not ") {
            Some(rest) => (rest, false),
            None => (object, true),
        };
        let consequent = if let Some(c) = object
            .strip_prefix("a ")
            .or_else(|| object.strip_prefix("an "))
        {
            Predicate::Category(c.to_string())
        } else if quantified {
            // "Each whale is bony." — no article means a property.
            Predicate::Property(object.to_string())
        } else if looks_like_adjective(object) {
            Predicate::Property(object.to_string())
        } else if object.split(' ').next_back().map_or(false, |w| w.ends_with('s')) {
            Predicate::Category(singularize(object))
        } else {
            Predicate::Property(object.to_string())
        };
        Ok(Rule {
            text: text.to_string(),
            antecedent: subject,
            consequent,
            positive,
        })
    }
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => format!("{}{}", first.to_lowercase(), chars.as_str()),
        None => String::new(),
    }
}

/// A claim about the query entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub entity: String,
    pub predicate: Predicate,
    pub positive: bool,
}

impl Claim {
    pub fn new(entity: impl Into<String>, predicate: Predicate, positive: bool) -> Self {
        Self {
            entity: entity.into(),
            predicate,
            positive,
        }
    }

    /// Parse "Sally is a butterfly." / "Sally is not bony." / "127 is real."
    pub fn parse(sentence: &str) -> Result<Self> {
        let body = sentence.trim().trim_end_matches('.');
        let (entity, object) = body
            .split_once(" is ")
            .ok_or_else(|| Error::Parse(format!("bad claim: {sentence:?}")))?;
        let (object, positive) = match object.strip_prefix("not ") {
            Some(rest) => (rest, false),
            None => (object, true),
        };
        let predicate = if let Some(c) = object
            .strip_prefix("a ")
            .or_else(|| object.strip_prefix("an "))
        {
            Predicate::Category(c.to_string())
        } else {
            Predicate::Property(object.to_string())
        };
        Ok(Claim::new(entity, predicate, positive))
    }

    /// Whether this claim decides `query`: same entity and predicate, in
    /// either polarity.
    pub fn decides(&self, query: &Claim) -> bool {
        self.entity == query.entity && self.predicate == query.predicate
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} is {}.",
            self.entity,
            self.predicate.render(self.positive)
        )
    }
}

/// A fact set plus the membership statement for the query entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ontology {
    pub rules: Vec<Rule>,
    /// The entity's starting category claim ("Sally is a painted lady.").
    pub membership: Claim,
}

impl Ontology {
    pub fn new(rules: Vec<Rule>, membership: Claim) -> Result<Self> {
        // Reject contradictory duplicates: same antecedent and consequent
        // with opposite polarity.
        for (i, a) in rules.iter().enumerate() {
            for b in &rules[i + 1..] {
                if a.antecedent == b.antecedent
                    && a.consequent == b.consequent
                    && a.positive != b.positive
                {
                    return Err(Error::Parse(format!(
                        "contradictory rules: {:?} vs {:?}",
                        a.text, b.text
                    )));
                }
            }
        }
        Ok(Self { rules, membership })
    }

    /// Parse a fact list (one sentence per entry) plus a membership sentence.
    pub fn parse(facts: &[String], membership: &str) -> Result<Self> {
        let rules = facts
            .iter()
            .map(|f| Rule::parse(f))
            .collect::<Result<Vec<_>>>()?;
        let membership = Claim::parse(membership)?;
        if !matches!(membership.predicate, Predicate::Category(_)) || !membership.positive {
            return Err(Error::Parse(
                "membership must be a positive category claim".into(),
            ));
        }
        Self::new(rules, membership)
    }

    /// Facts joined into the prompt's single-line form.
    pub fn facts_line(&self) -> String {
        self.rules
            .iter()
            .map(|r| r.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Perform a one-hop deduction: substitute the rule's consequent for the
/// claim's category, propagating negative-rule polarity.
pub fn deduce(claim: &Claim, rule: &Rule) -> Result<Claim> {
    if !claim.positive {
        return Err(Error::NotApplicable(format!(
            "cannot chain from the negative claim {claim}"
        )));
    }
    match &claim.predicate {
        Predicate::Category(c) if *c == rule.antecedent => Ok(Claim::new(
            claim.entity.clone(),
            rule.consequent.clone(),
            rule.positive,
        )),
        _ => Err(Error::NotApplicable(format!(
            "rule {:?} does not match claim {claim}",
            rule.text
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quantified_category_rule() {
        let rule = Rule::parse("Each lepidopteran is an insect.").unwrap();
        assert_eq!(rule.antecedent, "lepidopteran");
        assert_eq!(rule.consequent, Predicate::Category("insect".into()));
        assert!(rule.positive);
    }

    #[test]
    fn parses_plural_category_rule() {
        let rule = Rule::parse("Butterflies are lepidopterans.").unwrap();
        assert_eq!(rule.antecedent, "butterfly");
        assert_eq!(rule.consequent, Predicate::Category("lepidopteran".into()));
    }

    #[test]
    fn parses_negative_property_rule() {
        let rule = Rule::parse("Arthropods are not bony.").unwrap();
        assert_eq!(rule.antecedent, "arthropod");
        assert_eq!(rule.consequent, Predicate::Property("bony".into()));
        assert!(!rule.positive);
    }

    #[test]
    fn parses_adjective_that_ends_in_s() {
        let rule = Rule::parse("Every carnivore is not herbivorous.").unwrap();
        assert_eq!(rule.consequent, Predicate::Property("herbivorous".into()));
        assert!(!rule.positive);
    }

    #[test]
    fn parses_multiword_categories() {
        let rule = Rule::parse("Mersenne primes are prime numbers.").unwrap();
        assert_eq!(rule.antecedent, "Mersenne prime");
        assert_eq!(
            rule.consequent,
            Predicate::Category("prime number".into())
        );
        let rule = Rule::parse("Prime numbers are prime.").unwrap();
        assert_eq!(rule.consequent, Predicate::Property("prime".into()));
    }

    #[test]
    fn deduce_propagates_negative_polarity() {
        let claim = Claim::parse("Sally is an arthropod.").unwrap();
        let rule = Rule::parse("Arthropods are not bony.").unwrap();
        let next = deduce(&claim, &rule).unwrap();
        assert_eq!(next.to_string(), "Sally is not bony.");
    }

    #[test]
    fn deduce_category_chain() {
        let claim = Claim::parse("127 is a natural number.").unwrap();
        let rule = Rule::parse("Natural numbers are integers.").unwrap();
        let next = deduce(&claim, &rule).unwrap();
        assert_eq!(next.to_string(), "127 is an integer.");
    }

    #[test]
    fn deduce_rejects_mismatched_antecedent() {
        let claim = Claim::parse("Sally is a butterfly.").unwrap();
        let rule = Rule::parse("Arthropods are not bony.").unwrap();
        assert!(matches!(
            deduce(&claim, &rule),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn claim_round_trip() {
        for text in [
            "Sally is a butterfly.",
            "Sally is not bony.",
            "127 is an integer.",
            "Fae is not cold-blooded.",
        ] {
            assert_eq!(Claim::parse(text).unwrap().to_string(), text);
        }
    }

    #[test]
    fn contradictory_duplicates_rejected() {
        let rules = vec![
            Rule::parse("Whales are bony.").unwrap(),
            Rule::parse("Whales are not bony.").unwrap(),
        ];
        let membership = Claim::parse("Moby is a whale.").unwrap();
        assert!(Ontology::new(rules, membership).is_err());
    }

    #[test]
    fn plural_helpers() {
        assert_eq!(singularize("butterflies"), "butterfly");
        assert_eq!(singularize("wumpuses"), "wumpus");
        assert_eq!(singularize("natural numbers"), "natural number");
        assert_eq!(pluralize("butterfly"), "butterflies");
        assert_eq!(pluralize("wumpus"), "wumpuses");
        assert_eq!(pluralize("natural number"), "natural numbers");
    }
}
