#include "kabem/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

namespace kabem {

using json = nlohmann::json;

std::string to_string(Speaker s) { return s == Speaker::user ? "user" : "system"; }

Speaker speaker_from_string(const std::string& s) {
  if (s == "user") return Speaker::user;
  if (s == "system") return Speaker::system;
  throw CorpusError("unknown speaker '" + s + "'");
}

// --- BIO -----------------------------------------------------------------

TagSequence encode_bio(const std::vector<SlotSpan>& spans, std::size_t length) {
  TagSequence tags(length, "O");
  std::vector<bool> used(length, false);
  for (const auto& s : spans) {
    if (s.name.empty()) throw CorpusError("span with empty slot name");
    if (s.start >= s.end || s.end > length) {
      throw CorpusError("span " + s.name + " [" + std::to_string(s.start) + ", " +
                        std::to_string(s.end) + ") invalid for length " + std::to_string(length));
    }
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (used[i]) throw CorpusError("overlapping spans at token " + std::to_string(i));
      used[i] = true;
      tags[i] = (i == s.start ? "B-" : "I-") + s.name;
    }
  }
  return tags;
}

namespace {

struct ParsedTag {
  char kind;  // 'O', 'B', 'I'
  std::string name;
};

ParsedTag parse_tag(const std::string& t) {
  if (t == "O") return {'O', {}};
  if (t.size() > 2 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-') return {t[0], t.substr(2)};
  throw CorpusError("malformed BIO tag '" + t + "'");
}

}  // namespace

std::vector<SlotSpan> decode_bio(const TagSequence& tags) {
  std::vector<SlotSpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto p = parse_tag(tags[i]);
    if (p.kind == 'O') continue;
    if (p.kind == 'B') {
      spans.push_back({p.name, i, i + 1});
      continue;
    }
    if (spans.empty() || spans.back().end != i || spans.back().name != p.name) {
      throw CorpusError("I-" + p.name + " at token " + std::to_string(i) +
                        " does not continue a " + p.name + " span");
    }
    spans.back().end = i + 1;
  }
  return spans;
}

bool is_valid_bio(const TagSequence& tags) {
  try {
    decode_bio(tags);
    return true;
  } catch (const CorpusError&) {
    return false;
  }
}

TagSequence repair_bio(TagSequence tags) {
  std::string open;  // name of the span the previous token belongs to
  for (auto& t : tags) {
    const auto p = parse_tag(t);
    if (p.kind == 'O') {
      open.clear();
    } else if (p.kind == 'B') {
      open = p.name;
    } else if (open != p.name) {
      t = "B-" + p.name;
      open = p.name;
    }
  }
  return tags;
}

void validate(const Utterance& u) {
  if (u.tokens.empty()) throw CorpusError("utterance has no tokens");
  if (u.tokens.size() > kMaxSeqLen) {
    throw CorpusError("utterance of " + std::to_string(u.tokens.size()) +
                      " tokens exceeds max length " + std::to_string(kMaxSeqLen));
  }
  if (u.acts.empty()) throw CorpusError("utterance has an empty act set");
  const auto tags = encode_bio(u.slots, u.tokens.size());
  if (decode_bio(tags) != u.slots) throw CorpusError("slot spans are not ordered by start");
  for (auto idx : u.kb_only_spans) {
    if (idx >= u.slots.size()) throw CorpusError("kb_only index out of range");
  }
}

void validate(const Dialogue& d) {
  if (d.turns.empty()) throw CorpusError("dialogue '" + d.id + "' has no turns");
  for (const auto& u : d.turns) validate(u);
}

// --- JSON ----------------------------------------------------------------

std::string dialogue_to_json_line(const Dialogue& d) {
  json turns = json::array();
  for (const auto& u : d.turns) {
    json slots = json::array();
    for (std::size_t k = 0; k < u.slots.size(); ++k) {
      const auto& s = u.slots[k];
      json js = {{"name", s.name}, {"start", s.start}, {"end", s.end}};
      if (u.kb_only_spans.count(k)) js["kb_only"] = true;
      slots.push_back(std::move(js));
    }
    json jt = {{"speaker", to_string(u.speaker)},
               {"tokens", u.tokens},
               {"acts", std::vector<std::string>(u.acts.begin(), u.acts.end())},
               {"slots", std::move(slots)}};
    if (u.context_act) jt["context_act"] = true;
    turns.push_back(std::move(jt));
  }
  json j = {{"id", d.id}, {"turns", std::move(turns)}};
  return j.dump();
}

Dialogue dialogue_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorpusError(std::string("invalid JSON: ") + e.what());
  }
  try {
    Dialogue d;
    d.id = j.at("id").get<std::string>();
    for (const auto& jt : j.at("turns")) {
      Utterance u;
      u.speaker = speaker_from_string(jt.at("speaker").get<std::string>());
      u.tokens = jt.at("tokens").get<std::vector<std::string>>();
      for (const auto& a : jt.at("acts")) u.acts.insert(a.get<std::string>());
      for (const auto& js : jt.at("slots")) {
        SlotSpan s{js.at("name").get<std::string>(), js.at("start").get<std::size_t>(),
                   js.at("end").get<std::size_t>()};
        if (js.value("kb_only", false)) u.kb_only_spans.insert(u.slots.size());
        u.slots.push_back(std::move(s));
      }
      std::sort(u.slots.begin(), u.slots.end(),
                [](const SlotSpan& a, const SlotSpan& b) { return a.start < b.start; });
      u.context_act = jt.value("context_act", false);
      d.turns.push_back(std::move(u));
    }
    validate(d);
    return d;
  } catch (const json::exception& e) {
    throw CorpusError(std::string("schema violation: ") + e.what());
  }
}

Corpus load_dialogues(const std::filesystem::path& path,
                      const std::optional<std::vector<std::string>>& act_inventory) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Dialogue d = dialogue_from_json_line(line);
      if (act_inventory) {
        for (const auto& u : d.turns)
          for (const auto& a : u.acts)
            if (std::find(act_inventory->begin(), act_inventory->end(), a) == act_inventory->end())
              throw CorpusError("unknown act label '" + a + "'");
      }
      corpus.push_back(std::move(d));
    } catch (const CorpusError& e) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

void save_dialogues(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& d : corpus) out << dialogue_to_json_line(d) << '\n';
}

std::vector<std::string> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return labels;
}

void save_labels(const std::vector<std::string>& labels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& l : labels) out << l << '\n';
}

std::vector<std::string> slot_tag_inventory(const std::vector<std::string>& slot_names) {
  std::vector<std::string> tags{"O"};
  for (const auto& n : slot_names) {
    tags.push_back("B-" + n);
    tags.push_back("I-" + n);
  }
  return tags;
}

}  // namespace kabem
