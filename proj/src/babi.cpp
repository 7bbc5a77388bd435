#include "co4/babi.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <stdexcept>

#include "co4/rng.hpp"
#include "json.hpp"

namespace co4 {

namespace {

const std::vector<std::string> kLocationVerbs = {"moved", "went", "journeyed",
                                                 "traveled"};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string fill_template(const std::string& tmpl, const std::string& name) {
  const auto pos = tmpl.find("{name}");
  if (pos == std::string::npos) return tmpl;
  return tmpl.substr(0, pos) + name + tmpl.substr(pos + 6);
}

int template_tokens(const std::string& tmpl) {
  return static_cast<int>(tokenize_words(fill_template(tmpl, "x")).size());
}

}  // namespace

StoryConfig StoryConfig::defaults() {
  StoryConfig cfg;
  cfg.names = {"mary", "john", "sandra", "daniel"};
  cfg.places = {"kitchen", "garden", "office", "bathroom", "hallway", "bedroom"};
  cfg.distractor_templates = {
      "{name} grabbed the ball", "{name} smiled",       "the weather was nice",
      "{name} took the apple",   "{name} dropped the book",
      "birds sang outside",      "{name} read quietly", "the door creaked",
  };
  return cfg;
}

int StoryConfig::longest_possible_tokens() const {
  int worst_distractor = 0;
  for (const auto& t : distractor_templates)
    worst_distractor = std::max(worst_distractor, template_tokens(t));
  const int loc = std::min(max_location_events, max_sentences);
  const int story = 5 * loc + worst_distractor * (max_sentences - loc);
  return story + 1 /*SEP*/ + 3 /*where is <name>*/;
}

void StoryConfig::validate() const {
  if (names.empty() || places.empty())
    throw std::invalid_argument("story config: names and places must be non-empty");
  if (distractor_templates.empty())
    throw std::invalid_argument("story config: need at least one distractor template");
  if (min_sentences < 1 || max_sentences < min_sentences)
    throw std::invalid_argument("story config: bad sentence range");
  if (max_location_events < 1)
    throw std::invalid_argument("story config: max_location_events must be >= 1");
  const int longest = longest_possible_tokens();
  if (max_tokens < longest)
    throw std::invalid_argument("story config: max_tokens " + std::to_string(max_tokens) +
                                " < longest possible sample " + std::to_string(longest));
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id.find(token);
  if (it != token_to_id.end()) return it->second;
  const int id = size();
  token_to_id.emplace(token, id);
  id_to_token.push_back(token);
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

Vocab build_vocab(const StoryConfig& cfg) {
  Vocab v;
  v.add("<pad>");
  v.add("<unk>");
  v.add("<sep>");
  for (const auto& n : cfg.names) v.add(n);
  for (const auto& p : cfg.places) v.add(p);
  for (const auto& verb : kLocationVerbs) v.add(verb);
  v.add("to");
  v.add("the");
  for (const auto& t : cfg.distractor_templates)
    for (const auto& w : tokenize_words(fill_template(t, cfg.names[0]))) v.add(w);
  v.add("where");
  v.add("is");
  return v;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab,
                          int max_tokens) {
  const auto words = tokenize_words(text);
  if (static_cast<int>(words.size()) > max_tokens)
    throw std::runtime_error("tokenize: sequence of " + std::to_string(words.size()) +
                             " tokens exceeds max_tokens=" + std::to_string(max_tokens) +
                             " for \"" + text + "\"");
  std::vector<int> ids;
  ids.reserve(max_tokens);
  for (const auto& w : words) ids.push_back(vocab.id(w));
  ids.resize(max_tokens, Vocab::kPad);
  return ids;
}

StorySample generate_story(const StoryConfig& cfg, std::uint64_t index,
                           const Vocab& vocab) {
  cfg.validate();
  Rng rng(Rng::derive(cfg.seed, index, 0xbab1));
  const int n_names = static_cast<int>(cfg.names.size());
  const int n_places = static_cast<int>(cfg.places.size());

  const int n_sent = cfg.min_sentences +
                     static_cast<int>(rng.below(cfg.max_sentences - cfg.min_sentences + 1));
  const int target_name = static_cast<int>(rng.below(n_names));
  const int target_place = static_cast<int>(rng.below(n_places));
  const int answer_position = static_cast<int>(rng.below(n_sent));

  // Sentence plan: 0 = distractor, 1 = location event. The designated target
  // event is the target person's only location event; with probability
  // confuser_p a distractor slot becomes another person's location event.
  std::vector<int> kind(n_sent, 0);
  std::vector<int> who(n_sent, -1);
  std::vector<int> where(n_sent, -1);
  kind[answer_position] = 1;
  who[answer_position] = target_name;
  where[answer_position] = target_place;
  int loc_events = 1;
  for (int pos = 0; pos < n_sent; ++pos) {
    if (kind[pos]) continue;
    if (loc_events < cfg.max_location_events && n_names > 1 &&
        cfg.confuser_p > 0.0 && rng.coin(cfg.confuser_p)) {
      int other = static_cast<int>(rng.below(n_names - 1));
      if (other >= target_name) ++other;
      kind[pos] = 1;
      who[pos] = other;
      where[pos] = static_cast<int>(rng.below(n_places));
      ++loc_events;
    }
  }

  StorySample s;
  s.sentences.reserve(n_sent);
  for (int pos = 0; pos < n_sent; ++pos) {
    if (kind[pos]) {
      const auto& verb = kLocationVerbs[rng.below(kLocationVerbs.size())];
      s.sentences.push_back(capitalize(cfg.names[who[pos]]) + " " + verb +
                            " to the " + cfg.places[where[pos]] + ".");
    } else {
      const auto& tmpl = cfg.distractor_templates[rng.below(cfg.distractor_templates.size())];
      const auto& name = cfg.names[rng.below(n_names)];
      s.sentences.push_back(capitalize(fill_template(tmpl, name)) + ".");
    }
  }
  s.question = "Where is " + capitalize(cfg.names[target_name]) + "?";
  s.answer = target_place;
  s.answer_position = answer_position;

  std::string story_text;
  for (const auto& sent : s.sentences) {
    if (!story_text.empty()) story_text.push_back(' ');
    story_text += sent;
  }
  std::vector<int> ids;
  for (const auto& w : tokenize_words(story_text)) ids.push_back(vocab.id(w));
  ids.push_back(Vocab::kSep);
  for (const auto& w : tokenize_words(s.question)) ids.push_back(vocab.id(w));
  if (static_cast<int>(ids.size()) > cfg.max_tokens)
    throw std::runtime_error("generate_story: sample " + std::to_string(index) +
                             " tokenizes to " + std::to_string(ids.size()) +
                             " > max_tokens=" + std::to_string(cfg.max_tokens));
  ids.resize(cfg.max_tokens, Vocab::kPad);
  s.token_ids = std::move(ids);
  return s;
}

void write_stories_jsonl(const StoryConfig& cfg,
                         const std::vector<StorySample>& samples,
                         const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_stories_jsonl: cannot open " + path);
  for (const auto& s : samples) {
    nlohmann::json j;
    j["sentences"] = s.sentences;
    j["question"] = s.question;
    j["answer"] = cfg.places.at(s.answer);
    j["token_ids"] = s.token_ids;
    const std::string line = j.dump();
    std::fwrite(line.data(), 1, line.size(), f);
    std::fputc('\n', f);
  }
  std::fclose(f);
}

}  // namespace co4
