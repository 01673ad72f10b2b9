//! Synthetic corpus generators for behavioral tests and demos.
//!
//! The context corpus isolates one phenomenon: a bare city-name answer whose
//! correct tag (origin vs destination) is decided entirely by the system
//! prompt before it. Any model without access to that prompt is at chance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::{Corpus, DialogueTurn};

/// The two system prompts of the ambiguous-city corpus, with the entity type
/// each one implies for the user's answer.
pub const AMBIGUOUS_CITY_PROMPTS: [(&str, &str); 2] = [
    ("which city do you fly from ?", "or_city"),
    ("what city are you flying to ?", "dst_city"),
];

/// City answers usable as either origin or destination. A few are multi-token
/// so that `I-` tags occur.
const CITY_VALUES: [&str; 18] = [
    "paris",
    "london",
    "berlin",
    "madrid",
    "rome",
    "lisbon",
    "oslo",
    "vienna",
    "prague",
    "dublin",
    "athens",
    "cairo",
    "mumbai",
    "tokyo",
    "sydney",
    "toronto",
    "new york",
    "hong kong",
];

const FOOD_VALUES: [&str; 8] = [
    "italian",
    "chinese",
    "mexican",
    "thai",
    "greek",
    "japanese",
    "north indian",
    "south indian",
];

const PRICE_VALUES: [&str; 6] = [
    "cheap",
    "moderate",
    "expensive",
    "affordable",
    "upscale",
    "pricey",
];

const NEUTRAL_PROMPTS: [&str; 2] = [
    "anything else i can help you with ?",
    "could you tell me a bit more ?",
];

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_string()).collect()
}

fn value_tags(value_tokens: &[String], entity: &str) -> Vec<String> {
    let mut tags = vec![format!("B-{entity}")];
    tags.resize(value_tokens.len(), format!("I-{entity}"));
    tags
}

fn turn(id: String, system: &str, user: &str, entity: &str, lang: &str) -> DialogueTurn {
    let user_tokens = words(user);
    let tags = value_tags(&user_tokens, entity);
    DialogueTurn {
        dialogue_id: id,
        turn_index: 1,
        system_tokens: words(system),
        user_tokens,
        tags,
        lang: lang.to_string(),
    }
}

/// Turns whose gold tag is decided only by the preceding system prompt.
///
/// Each sampled city value is emitted once under each of the two prompts
/// before the corpus is shuffled, so per value the tag marginal is exactly
/// 50/50 and the tag is a function of the prompt alone. Odd `n_turns` leave
/// one unpaired origin-prompt turn at the end.
pub fn generate_context_corpus(n_turns: usize, seed: u64) -> Result<Corpus> {
    if n_turns < 2 {
        return Err(Error::Config(format!(
            "context corpus needs at least 2 turns, got {n_turns}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = Vec::with_capacity(n_turns);
    let mut i = 0;
    while turns.len() + 2 <= n_turns {
        let value = CITY_VALUES[rng.gen_range(0..CITY_VALUES.len())];
        for (prompt, entity) in AMBIGUOUS_CITY_PROMPTS {
            turns.push(turn(format!("ctx-{i}"), prompt, value, entity, "en"));
            i += 1;
        }
    }
    if turns.len() < n_turns {
        let value = CITY_VALUES[rng.gen_range(0..CITY_VALUES.len())];
        let (prompt, entity) = AMBIGUOUS_CITY_PROMPTS[0];
        turns.push(turn(format!("ctx-{i}"), prompt, value, entity, "en"));
    }
    turns.shuffle(&mut rng);
    Corpus::from_turns(turns)
}

/// Turns whose gold tag is decided by the answer token itself; the system
/// prompt is sampled independently of the tag and carries no signal.
pub fn generate_unambiguous_corpus(n_turns: usize, seed: u64) -> Result<Corpus> {
    if n_turns < 2 {
        return Err(Error::Config(format!(
            "unambiguous corpus needs at least 2 turns, got {n_turns}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = Vec::with_capacity(n_turns);
    for i in 0..n_turns {
        let (value, entity) = if i % 2 == 0 {
            (FOOD_VALUES[rng.gen_range(0..FOOD_VALUES.len())], "food")
        } else {
            (
                PRICE_VALUES[rng.gen_range(0..PRICE_VALUES.len())],
                "price_range",
            )
        };
        let prompt = NEUTRAL_PROMPTS[rng.gen_range(0..NEUTRAL_PROMPTS.len())];
        turns.push(turn(format!("plain-{i}"), prompt, value, entity, "en"));
    }
    turns.shuffle(&mut rng);
    Corpus::from_turns(turns)
}

/// Half context-dependent city turns, half token-determined turns, shuffled
/// together under one label set.
pub fn generate_blended_corpus(n_turns: usize, seed: u64) -> Result<Corpus> {
    if n_turns < 4 {
        return Err(Error::Config(format!(
            "blended corpus needs at least 4 turns, got {n_turns}"
        )));
    }
    let half = n_turns / 2;
    let ctx = generate_context_corpus(half, seed)?;
    let plain = generate_unambiguous_corpus(n_turns - half, seed.wrapping_add(1))?;
    let mut turns: Vec<DialogueTurn> = ctx.turns.into_iter().chain(plain.turns).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    turns.shuffle(&mut rng);
    Corpus::from_turns(turns)
}

/// A single-pattern corpus for overfitting runs: every turn is
/// `i want <food value> food` under one fixed prompt.
pub fn generate_overfit_corpus(n_turns: usize, seed: u64) -> Result<Corpus> {
    if n_turns == 0 {
        return Err(Error::Config("overfit corpus needs at least 1 turn".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prompt = "what kind of food would you like ?";
    let mut turns = Vec::with_capacity(n_turns);
    for i in 0..n_turns {
        let value = FOOD_VALUES[rng.gen_range(0..FOOD_VALUES.len())];
        let value_tokens = words(value);
        let mut user_tokens = vec!["i".to_string(), "want".to_string()];
        let mut tags = vec!["O".to_string(), "O".to_string()];
        tags.extend(value_tags(&value_tokens, "food"));
        user_tokens.extend(value_tokens);
        user_tokens.push("food".to_string());
        tags.push("O".to_string());
        turns.push(DialogueTurn {
            dialogue_id: format!("overfit-{i}"),
            turn_index: 1,
            system_tokens: words(prompt),
            user_tokens,
            tags,
            lang: "en".to_string(),
        });
    }
    Corpus::from_turns(turns)
}
