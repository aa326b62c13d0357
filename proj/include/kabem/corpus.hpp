#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace kabem {

inline constexpr std::size_t kMaxSeqLen = 60;

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Speaker { user, system };
std::string to_string(Speaker s);
Speaker speaker_from_string(const std::string& s);

// Token range [start, end) carrying one slot value.
struct SlotSpan {
  std::string name;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const SlotSpan&) const = default;
};

struct Utterance {
  Speaker speaker = Speaker::user;
  std::vector<std::string> tokens;
  std::set<std::string> acts;
  std::vector<SlotSpan> slots;  // ordered by start

  // Generator annotations (optional in files). kb_only_spans indexes `slots`
  // whose value never occurs in training text; context_act marks act labels
  // that are decided by an earlier turn rather than this utterance's words.
  std::set<std::size_t> kb_only_spans;
  bool context_act = false;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> turns;

  bool operator==(const Dialogue&) const = default;
};

using Corpus = std::vector<Dialogue>;

// --- BIO -----------------------------------------------------------------

using TagSequence = std::vector<std::string>;

// Throws CorpusError on overlapping or out-of-range spans.
TagSequence encode_bio(const std::vector<SlotSpan>& spans, std::size_t length);
// Throws CorpusError on malformed tags or an I-x not preceded by B-x / I-x.
std::vector<SlotSpan> decode_bio(const TagSequence& tags);
bool is_valid_bio(const TagSequence& tags);
// Orphan I-x (no preceding B-x / I-x of the same name) becomes B-x.
TagSequence repair_bio(TagSequence tags);

// Checks every Utterance invariant; throws CorpusError describing the first
// violation.
void validate(const Utterance& u);
void validate(const Dialogue& d);

// --- files ---------------------------------------------------------------

// JSONL, one dialogue per line. When `act_inventory` is given, acts outside it
// are rejected. Errors carry the 1-based line number.
Corpus load_dialogues(const std::filesystem::path& path,
                      const std::optional<std::vector<std::string>>& act_inventory = std::nullopt);
void save_dialogues(const Corpus& corpus, const std::filesystem::path& path);
std::string dialogue_to_json_line(const Dialogue& d);
Dialogue dialogue_from_json_line(const std::string& line);

std::vector<std::string> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<std::string>& labels, const std::filesystem::path& path);

// "O" followed by B-x, I-x for each slot name in order.
std::vector<std::string> slot_tag_inventory(const std::vector<std::string>& slot_names);

}  // namespace kabem
