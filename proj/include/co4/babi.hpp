#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace co4 {

// Roster and sizing for the synthetic story generator. Location-event
// sentences always render as "<name> <verb> to the <place>" (5 tokens);
// distractor templates must stay at <= 4 tokens so the worst-case story,
// separator and question fit max_tokens exactly.
struct StoryConfig {
  std::vector<std::string> names;
  std::vector<std::string> places;
  std::vector<std::string> distractor_templates;  // "{name}" is substituted
  int min_sentences = 8;
  int max_sentences = 12;
  int max_location_events = 8;
  // Chance that a distractor slot instead becomes a location event for a
  // different person; raises the retrieval difficulty (the model must match
  // the questioned person, not just find a location event).
  double confuser_p = 0.0;
  int max_tokens = 60;
  std::uint64_t seed = 0;

  static StoryConfig defaults();
  void validate() const;  // throws on empty rosters or impossible sizing
  // Worst-case token length of story + SEP + question under this roster.
  int longest_possible_tokens() const;
};

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSep = 2;

  std::vector<std::string> id_to_token;  // [0..2] reserved
  std::unordered_map<std::string, int> token_to_id;

  int add(const std::string& token);           // idempotent
  int id(const std::string& token) const;      // kUnk fallback
  int size() const { return static_cast<int>(id_to_token.size()); }
};

// Deterministic vocabulary over the roster, ordered by first occurrence in
// the canonical enumeration (names, places, verbs, glue words, templates,
// question words).
Vocab build_vocab(const StoryConfig& cfg);

struct StorySample {
  std::vector<std::string> sentences;
  std::string question;      // "Where is <Name>?"
  int answer = -1;           // index into cfg.places
  std::vector<int> token_ids;  // story ++ SEP ++ question, padded to max_tokens
  int answer_position = -1;  // sentence index of the target event
};

// Lowercase, split on whitespace and punctuation (punctuation is dropped).
std::vector<std::string> tokenize_words(const std::string& text);

// Map words to ids with UNK fallback and right-pad with PAD. Throws when the
// sequence exceeds max_tokens, naming the offending text.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab,
                          int max_tokens);

// Pure function of (cfg.seed, index). The target person's final location
// event sits at answer_position; no later sentence moves the target person.
StorySample generate_story(const StoryConfig& cfg, std::uint64_t index,
                           const Vocab& vocab);

void write_stories_jsonl(const StoryConfig& cfg,
                         const std::vector<StorySample>& samples,
                         const std::string& path);

}  // namespace co4
