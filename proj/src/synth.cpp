#include "kabem/synth.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace kabem {

namespace {

using Words = std::vector<std::string>;

const Words kActs = {"request", "inform",  "offer",  "confirm_question", "affirm", "negate",
                     "accept",  "reject",  "thank",  "bye",              "hold",   "ack"};
const Words kSlots = {"city",     "cuisine",       "genre",          "pricing",
                      "date",     "starttime",     "numberofpeople", "numberoftickets"};
const Words kKnowledgeSlots = {"city", "cuisine", "genre"};

const Words kPricing = {"cheap", "expensive", "moderate", "affordable", "upscale", "budget"};
const Words kDates = {"today",    "tomorrow", "tonight", "monday",   "tuesday", "wednesday",
                      "thursday", "friday",   "saturday", "sunday", "weekend"};
const Words kRegions = {"north", "south", "coast", "valley", "highlands", "lakeside"};
const Words kIngredients = {"rice", "noodles", "spice", "cheese", "fish", "beans"};
const Words kMoods = {"story", "laughs", "suspense", "romance", "action", "mystery"};
const Words kDistractors = {"stone", "river", "music", "paper",  "light", "window", "garden",
                            "metal", "cloud", "chair", "letter", "glass", "horse",  "bridge",
                            "candle", "mirror", "forest", "engine", "pencil", "shadow"};

// Real-word seeds placed ahead of the generated names in each pool.
const std::map<std::string, Words> kSeedTrain = {
    {"city", {"boston", "denver", "austin", "portland"}},
    {"cuisine", {"italian", "thai", "mexican", "indian"}},
    {"genre", {"comedy", "drama", "thriller", "horror"}},
};
const std::map<std::string, Words> kSeedTest = {
    {"city", {"seattle"}},
    {"cuisine", {"ethiopian"}},
    {"genre", {"western"}},
};

enum class Domain { restaurant, movie };

struct Template {
  Words words;  // "{slot}" placeholders; "{kb}" is a knowledge slot picked per domain
  std::set<std::string> acts;
};

const std::vector<Template> kRestaurantOpen = {
    {{"i", "am", "looking", "for", "a", "{pricing}", "{cuisine}", "restaurant", "in", "{city}"}, {"request"}},
    {{"find", "me", "{cuisine}", "food", "in", "{city}", "{date}"}, {"request"}},
    {{"is", "there", "a", "{pricing}", "place", "serving", "{cuisine}", "?"}, {"request"}},
    {{"i", "want", "to", "eat", "{cuisine}", "near", "{city}"}, {"request"}},
    {{"i", "need", "a", "table", "{date}", "in", "{city}"}, {"request"}},
};
const std::vector<Template> kMovieOpen = {
    {{"is", "there", "something", "that", "is", "maybe", "a", "good", "{genre}", "?"}, {"request"}},
    {{"i", "want", "to", "see", "a", "{genre}", "movie", "in", "{city}", "{date}"}, {"request"}},
    {{"any", "{genre}", "films", "playing", "{date}", "?"}, {"request"}},
    {{"find", "me", "a", "{genre}", "near", "{city}"}, {"request"}},
};
// The slot type of {kb} is not recoverable from the surrounding words.
const std::vector<Template> kAmbiguousInform = {
    {{"how", "about", "{kb}"}, {"inform"}},
    {{"what", "about", "{kb}", "?"}, {"inform"}},
    {{"maybe", "{kb}", "then"}, {"inform"}},
    {{"{kb}", "would", "be", "nice"}, {"inform"}},
    {{"i", "like", "{kb}"}, {"inform"}},
    {{"{kb}", "or", "{kb}", "please"}, {"inform"}},
};

const std::vector<Words> kPositiveBare = {{"yes"}, {"sure"}, {"ok"}, {"sounds", "good"}, {"yes", "please"}, {"that", "works"}};
const std::vector<Words> kNegativeBare = {{"no"}, {"no", "thanks"}, {"not", "really"}, {"nah"}};
const std::vector<Words> kAcceptExplicit = {{"yes", "i", "will", "take", "it"}, {"great", ",", "i", "will", "go", "with", "that", "one"}};
const std::vector<Words> kRejectExplicit = {{"no", ",", "i", "do", "not", "like", "that", "one"}, {"no", ",", "show", "me", "another", "one"}};
const std::vector<Words> kAffirmExplicit = {{"yes", "please", "do", "that"}, {"yes", ",", "go", "ahead"}};
const std::vector<Words> kNegateExplicit = {{"no", ",", "do", "not", "do", "that"}, {"no", ",", "please", "do", "not"}};

// Stalling turns that can sit between a question and its bare answer.
const std::vector<Words> kHolds = {{"hmm", "let", "me", "think"}, {"one", "moment"}, {"let", "me", "check", "with", "my", "partner"}};
const std::vector<std::pair<Words, Words>> kSideQuestions = {
    {{"is", "there", "parking", "?"}, {"yes", "there", "is", "a", "garage", "next", "door"}},
    {{"what", "is", "the", "address", "?"}, {"it", "is", "on", "main", "street"}},
    {{"how", "long", "does", "it", "take", "?"}, {"about", "two", "hours"}},
};

enum class SystemMove { ask_count, ask_time, ask_date, ask_preference, offer, offer_confirm, confirm, booked, ack };

class Generator {
 public:
  Generator(const GenConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    build_pools();
  }

  SyntheticData run() {
    SyntheticData out;
    out.acts = kActs;
    out.slots = kSlots;
    testing_ = false;
    for (std::size_t i = 0; i < cfg_.train_dialogues; ++i)
      out.train.push_back(dialogue("train-" + std::to_string(i)));
    freeze_train_values();
    testing_ = true;
    for (std::size_t i = 0; i < cfg_.test_dialogues; ++i)
      out.test.push_back(dialogue("test-" + std::to_string(i)));
    out.kb = build_kb();
    return out;
  }

 private:
  // --- lexicons ----------------------------------------------------------

  std::string pseudo_word() {
    static const std::string cons = "bdfgklmnprstvz";
    static const std::string vows = "aeiou";
    std::uniform_int_distribution<std::size_t> c(0, cons.size() - 1), v(0, vows.size() - 1),
        syl(2, 3), tail(0, 2);
    while (true) {
      std::string w;
      const std::size_t n = syl(rng_);
      for (std::size_t i = 0; i < n; ++i) {
        w += cons[c(rng_)];
        w += vows[v(rng_)];
      }
      if (tail(rng_) == 0) w += cons[c(rng_)];
      if (reserved_.insert(w).second) return w;
    }
  }

  void build_pools() {
    auto reserve = [&](const auto& lists) {
      for (const auto& l : lists) reserved_.insert(l.begin(), l.end());
    };
    for (const auto* group : {&kRestaurantOpen, &kMovieOpen, &kAmbiguousInform})
      for (const auto& t : *group) reserved_.insert(t.words.begin(), t.words.end());
    reserve(kPositiveBare);
    reserve(kNegativeBare);
    reserve(kAcceptExplicit);
    reserve(kRejectExplicit);
    reserve(kAffirmExplicit);
    reserve(kNegateExplicit);
    reserve(kHolds);
    for (const auto& [q, a] : kSideQuestions) {
      reserved_.insert(q.begin(), q.end());
      reserved_.insert(a.begin(), a.end());
    }
    for (const auto* l : {&kPricing, &kDates, &kRegions, &kIngredients, &kMoods, &kDistractors,
                          &kActs, &kSlots})
      reserved_.insert(l->begin(), l->end());
    for (const auto& [_, w] : kSeedTrain) reserved_.insert(w.begin(), w.end());
    for (const auto& [_, w] : kSeedTest) reserved_.insert(w.begin(), w.end());
    for (const char* w : {"people", "tickets", "please", "just", "for", "at", "around", "pm", "am",
                          "works", "hmm", "let", "me", "think", "take", "your", "time", "thanks",
                          "bye", "thank", "you", "enjoy", "!", "booking", "done", "any", "preference", "?",
                          "what", "are", "in", "the", "mood"})
      reserved_.insert(w);

    for (const auto& type : kKnowledgeSlots) {
      auto& train = train_pool_[type];
      auto& test = test_pool_[type];
      train = kSeedTrain.at(type);
      test = kSeedTest.at(type);
      while (train.size() < cfg_.train_entities) train.push_back(pseudo_word());
      while (test.size() < cfg_.test_entities) test.push_back(pseudo_word());
      train.resize(cfg_.train_entities);
      test.resize(cfg_.test_entities);
    }
  }

  // --- sampling helpers ----------------------------------------------------

  template <class T>
  const T& pick(const std::vector<T>& v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng_)];
  }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  Words raw_value(const std::string& slot) {
    if (slot == "pricing") return {pick(kPricing)};
    if (slot == "date") return {pick(kDates)};
    if (slot == "starttime") {
      std::uniform_int_distribution<int> h(1, 12);
      return {std::to_string(h(rng_)), coin(0.7) ? "pm" : "am"};
    }
    if (slot == "numberofpeople" || slot == "numberoftickets") {
      std::uniform_int_distribution<int> n(1, 9);
      return {std::to_string(n(rng_))};
    }
    return {pick(train_pool_.at(slot))};
  }

  // Returns the value tokens and whether it is a test-only entity.
  std::pair<Words, bool> value(const std::string& slot) {
    const bool knowledge = std::find(kKnowledgeSlots.begin(), kKnowledgeSlots.end(), slot) !=
                           kKnowledgeSlots.end();
    if (!testing_) {
      Words w = raw_value(slot);
      used_[slot].insert(w);
      return {w, false};
    }
    if (knowledge && coin(cfg_.knowledge_rate)) return {{pick(test_pool_.at(slot))}, true};
    const auto& seen = frozen_.at(slot);
    if (seen.empty()) return {raw_value(slot), false};
    return {pick(seen), false};
  }

  void freeze_train_values() {
    for (const auto& s : kSlots) {
      auto& v = frozen_[s];
      v.assign(used_[s].begin(), used_[s].end());
    }
  }

  // --- utterances ------------------------------------------------------------

  Utterance fill(Speaker speaker, const Template& t, Domain domain, const std::string& count_slot = "") {
    Utterance u;
    u.speaker = speaker;
    u.acts = t.acts;
    for (const auto& w : t.words) {
      if (w.size() < 3 || w.front() != '{' || w.back() != '}') {
        u.tokens.push_back(w);
        continue;
      }
      std::string slot = w.substr(1, w.size() - 2);
      if (slot == "kb") slot = domain == Domain::restaurant ? pick(Words{"city", "cuisine"}) : pick(Words{"city", "genre"});
      if (slot == "count") slot = count_slot;
      auto [tokens, kb_only] = value(slot);
      const std::size_t start = u.tokens.size();
      u.tokens.insert(u.tokens.end(), tokens.begin(), tokens.end());
      if (kb_only) u.kb_only_spans.insert(u.slots.size());
      u.slots.push_back({slot, start, u.tokens.size()});
    }
    return u;
  }

  Utterance plain(Speaker s, Words words, std::set<std::string> acts) {
    Utterance u;
    u.speaker = s;
    u.tokens = std::move(words);
    u.acts = std::move(acts);
    return u;
  }

  Utterance system_turn(SystemMove m, Domain domain) {
    const std::string count_slot = domain == Domain::restaurant ? "numberofpeople" : "numberoftickets";
    switch (m) {
      case SystemMove::ask_count:
        return domain == Domain::restaurant
                   ? plain(Speaker::system, {"how", "many", "people", "will", "be", "joining", "?"}, {"request"})
                   : plain(Speaker::system, {"how", "many", "tickets", "should", "i", "get", "?"}, {"request"});
      case SystemMove::ask_time:
        return plain(Speaker::system, {"what", "time", "would", "you", "like", "?"}, {"request"});
      case SystemMove::ask_date:
        return plain(Speaker::system, {"which", "day", "works", "for", "you", "?"}, {"request"});
      case SystemMove::ask_preference:
        return coin(0.5) ? plain(Speaker::system, {"any", "preference", "?"}, {"request"})
                         : plain(Speaker::system, {"what", "are", "you", "in", "the", "mood", "for", "?"}, {"request"});
      case SystemMove::offer:
        return domain == Domain::restaurant
                   ? fill(Speaker::system, {{"i", "found", "a", "{pricing}", "{cuisine}", "place", "in", "{city}"}, {"offer"}}, domain)
                   : fill(Speaker::system, {{"there", "is", "a", "{genre}", "showing", "in", "{city}", "at", "{starttime}"}, {"offer"}}, domain);
      case SystemMove::offer_confirm:
        return domain == Domain::restaurant
                   ? fill(Speaker::system, {{"{cuisine}", "in", "{city}", "is", "all", "i", "see", ".", "would", "you", "like", "to", "try", "that", "?"}, {"inform", "confirm_question"}}, domain)
                   : fill(Speaker::system, {{"{genre}", "is", "the", "only", "option", "in", "your", "area", ".", "would", "you", "like", "to", "try", "that", "?"}, {"inform", "confirm_question"}}, domain);
      case SystemMove::confirm:
        return coin(0.5) ? fill(Speaker::system, {{"shall", "i", "book", "it", "for", "{date}", "?"}, {"confirm_question"}}, domain)
                         : fill(Speaker::system, {{"do", "you", "want", "{count}", "seats", "at", "{starttime}", "?"}, {"confirm_question"}}, domain, count_slot);
      case SystemMove::booked:
        return coin(0.5) ? plain(Speaker::system, {"your", "booking", "is", "done"}, {"inform"})
                         : plain(Speaker::system, {"enjoy", "!"}, {"bye"});
      case SystemMove::ack:
        return plain(Speaker::system, {"sure", ",", "take", "your", "time"}, {"ack"});
    }
    throw std::logic_error("unhandled system move");
  }

  // Reply to an offer (accept/reject) or a confirmation question (affirm/negate).
  Utterance yes_no_reply(bool to_offer, Domain domain, bool bare) {
    const bool positive = coin(0.6);
    const std::string act = to_offer ? (positive ? "accept" : "reject") : (positive ? "affirm" : "negate");
    if (bare) {
      Utterance u = plain(Speaker::user, positive ? pick(kPositiveBare) : pick(kNegativeBare), {act});
      u.context_act = true;
      if (!positive && coin(0.3)) {
        // "no , how about X": the refusal part still depends on the context.
        Utterance alt = fill(Speaker::user, pick(kAmbiguousInform), domain);
        const std::size_t shift = u.tokens.size() + 1;
        u.tokens.push_back(",");
        u.tokens.insert(u.tokens.end(), alt.tokens.begin(), alt.tokens.end());
        for (auto s : alt.slots) u.slots.push_back({s.name, s.start + shift, s.end + shift});
        for (auto k : alt.kb_only_spans) u.kb_only_spans.insert(k);
        u.acts.insert("inform");
      }
      return u;
    }
    const auto& forms = to_offer ? (positive ? kAcceptExplicit : kRejectExplicit)
                                 : (positive ? kAffirmExplicit : kNegateExplicit);
    return plain(Speaker::user, pick(forms), {act});
  }

  Utterance count_reply(const std::string& count_slot) {
    // Bare numbers take their slot from the question; the explicit forms name it.
    if (coin(0.5)) {
      static const std::vector<Template> bare = {
          {{"{count}", "please"}, {"inform"}}, {{"just", "{count}"}, {"inform"}}, {{"{count}"}, {"inform"}}};
      return fill(Speaker::user, pick(bare), Domain::restaurant, count_slot);
    }
    const std::string noun = count_slot == "numberofpeople" ? "people" : "tickets";
    const std::vector<Template> expl = {{{"{count}", noun, "please"}, {"inform"}},
                                        {{"for", "{count}", noun}, {"inform"}}};
    return fill(Speaker::user, pick(expl), Domain::restaurant, count_slot);
  }

  // A hold, or a side question whose answer the next system turn gives.
  Utterance stall() {
    if (coin(0.5)) return plain(Speaker::user, pick(kHolds), {"hold"});
    const auto& qa = pick(kSideQuestions);
    pending_answer_ = &qa.second;
    return plain(Speaker::user, qa.first, {"request"});
  }

  Dialogue dialogue(const std::string& id) {
    Dialogue d;
    d.id = id;
    const Domain domain = coin(0.5) ? Domain::restaurant : Domain::movie;
    std::uniform_int_distribution<std::size_t> len(cfg_.min_turns, cfg_.max_turns);
    const std::size_t n = len(rng_);

    d.turns.push_back(fill(Speaker::user, pick(domain == Domain::restaurant ? kRestaurantOpen : kMovieOpen), domain));
    SystemMove last = SystemMove::ack;
    // While a bare reply is deferred, `stalls` more user turns (holds or side
    // questions) come before it.
    bool deferred = false;
    bool deferred_to_offer = false;
    std::size_t stalls = 0;
    pending_answer_ = nullptr;
    while (d.turns.size() < n) {
      const std::size_t remaining = n - d.turns.size();
      if (d.turns.back().speaker == Speaker::user) {
        if (deferred) {
          if (pending_answer_) {
            d.turns.push_back(plain(Speaker::system, *pending_answer_, {"inform"}));
            pending_answer_ = nullptr;
          } else {
            d.turns.push_back(system_turn(SystemMove::ack, domain));
          }
          last = SystemMove::ack;
          continue;
        }
        static const std::vector<std::pair<SystemMove, double>> weights = {
            {SystemMove::ask_count, 0.08}, {SystemMove::ask_time, 0.05}, {SystemMove::ask_date, 0.05},
            {SystemMove::ask_preference, 0.15}, {SystemMove::offer, 0.40},     {SystemMove::offer_confirm, 0.15},
            {SystemMove::confirm, 0.20},   {SystemMove::booked, 0.02}};
        std::vector<double> w;
        for (const auto& [_, p] : weights) w.push_back(p);
        std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
        last = weights[dist(rng_)].first;
        d.turns.push_back(system_turn(last, domain));
        continue;
      }

      // User turn, answering `last`.
      const std::string count_slot = domain == Domain::restaurant ? "numberofpeople" : "numberoftickets";
      if (deferred) {
        if (stalls > 0) {
          --stalls;
          d.turns.push_back(stall());
          continue;
        }
        deferred = false;
        d.turns.push_back(yes_no_reply(deferred_to_offer, domain, true));
        continue;
      }
      switch (last) {
        case SystemMove::ask_count:
          d.turns.push_back(count_reply(count_slot));
          break;
        case SystemMove::ask_time:
          d.turns.push_back(fill(Speaker::user, pick(std::vector<Template>{{{"at", "{starttime}"}, {"inform"}}, {{"around", "{starttime}", "please"}, {"inform"}}}), domain));
          break;
        case SystemMove::ask_date:
          d.turns.push_back(fill(Speaker::user, pick(std::vector<Template>{{{"{date}", "works"}, {"inform"}}, {{"maybe", "{date}"}, {"inform"}}}), domain));
          break;
        case SystemMove::offer:
        case SystemMove::offer_confirm:
        case SystemMove::confirm: {
          const bool to_offer = last == SystemMove::offer;
          const bool bare = coin(cfg_.context_rate);
          if (bare && remaining >= 3) {
            deferred = true;
            deferred_to_offer = to_offer;
            // hold, ack, then (stall, answer) pairs, then the reply
            stalls = 0;
            while (3 + 2 * (stalls + 1) <= remaining && coin(0.5)) ++stalls;
            d.turns.push_back(stall());
          } else {
            d.turns.push_back(yes_no_reply(to_offer, domain, bare));
          }
          break;
        }
        case SystemMove::booked:
          d.turns.push_back(coin(0.5) ? plain(Speaker::user, {"thanks", "bye"}, {"thank", "bye"})
                                      : plain(Speaker::user, {"thank", "you"}, {"thank"}));
          break;
        case SystemMove::ask_preference:
        case SystemMove::ack:
          d.turns.push_back(fill(Speaker::user, pick(kAmbiguousInform), domain));
          break;
      }
    }
    validate(d);
    return d;
  }

  // --- knowledge base ------------------------------------------------------

  std::vector<KnowledgeTriple> build_kb() {
    std::vector<KnowledgeTriple> kb;
    std::uniform_real_distribution<double> strong(0.9, 1.0), medium(0.5, 0.85), weak(0.05, 0.45);
    std::uniform_int_distribution<int> extra(0, 4), noise(1, 3);
    auto entity_triples = [&](const std::string& e, const std::string& type) {
      kb.push_back({e, "is a", type, strong(rng_)});
      const int k = extra(rng_);
      for (int i = 0; i < k; ++i) {
        if (type == "city") {
          kb.push_back({e, i % 2 == 0 ? "part of" : "located in", pick(kRegions), medium(rng_)});
        } else if (type == "cuisine") {
          kb.push_back({e, i % 2 == 0 ? "related to" : "made of", i % 2 == 0 ? "food" : pick(kIngredients), medium(rng_)});
        } else {
          kb.push_back({e, i % 2 == 0 ? "related to" : "has", i % 2 == 0 ? "film" : pick(kMoods), medium(rng_)});
        }
      }
      const int m = noise(rng_);
      for (int i = 0; i < m; ++i) kb.push_back({e, "related to", pick(kDistractors), weak(rng_)});
    };
    for (const auto& type : kKnowledgeSlots) {
      for (const auto& e : train_pool_.at(type)) entity_triples(e, type);
      for (const auto& e : test_pool_.at(type)) entity_triples(e, type);
    }
    // Ordinary words with background knowledge; numbers and times have none.
    const std::vector<KnowledgeTriple> common = {
        {"cheap", "related to", "affordable", 0.99}, {"cheap", "related to", "chintzy", 3e-7},
        {"cheap", "related to", "twopenny", 5e-5},   {"cheap", "related to", "gimcrack", 8e-6},
        {"affordable", "related to", "cheap", 0.9},  {"budget", "related to", "cheap", 0.8},
        {"expensive", "related to", "costly", 0.95}, {"upscale", "related to", "costly", 0.8},
        {"moderate", "related to", "average", 0.7},  {"tomorrow", "antonym", "yesterday", 0.9},
        {"tomorrow", "related to", "later on", 5e-2}, {"tomorrow", "is a", "day", 4e-6},
        {"today", "is a", "day", 0.8},               {"tonight", "related to", "evening", 0.8},
        {"weekend", "is a", "day", 0.6},             {"comedy", "related to", "comic", 0.7},
        {"comedy", "is a", "drama", 0.6},            {"area", "is a", "region", 0.8},
        {"food", "related to", "meal", 0.8},         {"movie", "related to", "film", 0.9},
        {"films", "related to", "film", 0.9},        {"restaurant", "related to", "food", 0.9},
    };
    kb.insert(kb.end(), common.begin(), common.end());
    for (const auto& day : {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"})
      kb.push_back({day, "is a", "day", 0.9});
    return kb;
  }

  GenConfig cfg_;
  std::mt19937_64 rng_;
  std::set<std::string> reserved_;
  std::map<std::string, Words> train_pool_, test_pool_;
  std::map<std::string, std::set<Words>> used_;
  std::map<std::string, std::vector<Words>> frozen_;
  bool testing_ = false;
  const Words* pending_answer_ = nullptr;
};

double to_rate(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace

bool GenConfig::apply(const std::string& key, const std::string& value) {
  std::map<std::string, std::size_t*> sizes = {
      {"train_dialogues", &train_dialogues}, {"test_dialogues", &test_dialogues},
      {"min_turns", &min_turns},             {"max_turns", &max_turns},
      {"train_entities", &train_entities},   {"test_entities", &test_entities}};
  if (auto it = sizes.find(key); it != sizes.end()) {
    *it->second = static_cast<std::size_t>(std::stoull(value));
    return true;
  }
  if (key == "knowledge_rate") {
    knowledge_rate = to_rate(key, value);
    return true;
  }
  if (key == "context_rate") {
    context_rate = to_rate(key, value);
    return true;
  }
  return false;
}

std::vector<std::pair<std::string, std::string>> GenConfig::items() const {
  return {{"train_dialogues", std::to_string(train_dialogues)},
          {"test_dialogues", std::to_string(test_dialogues)},
          {"knowledge_rate", format_double(knowledge_rate)},
          {"context_rate", format_double(context_rate)},
          {"min_turns", std::to_string(min_turns)},
          {"max_turns", std::to_string(max_turns)},
          {"train_entities", std::to_string(train_entities)},
          {"test_entities", std::to_string(test_entities)}};
}

void GenConfig::validate() const {
  auto rate = [](double r, const char* name) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must lie in [0, 1], got " + format_double(r));
    }
  };
  rate(knowledge_rate, "knowledge_rate");
  rate(context_rate, "context_rate");
  if (min_turns < 2 || max_turns < min_turns) {
    throw std::invalid_argument("turn range must satisfy 2 <= min_turns <= max_turns");
  }
  if (train_entities < 8 || test_entities < 2) {
    throw std::invalid_argument("entity pools too small (train >= 8, test >= 2)");
  }
}

const std::vector<std::string>& knowledge_slot_names() { return kKnowledgeSlots; }

SyntheticData generate_synthetic(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  return Generator(config, seed).run();
}

void save_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dialogues(data.train, dir / "train.jsonl");
  save_dialogues(data.test, dir / "test.jsonl");
  save_triples(data.kb, dir / "kb.tsv");
  save_labels(data.acts, dir / "acts.txt");
  save_labels(data.slots, dir / "slots.txt");
}

}  // namespace kabem
