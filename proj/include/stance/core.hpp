#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stance/error.hpp"

namespace stance {

enum class StanceLabel : std::uint8_t { Favor = 0, Against = 1, None = 2 };

inline constexpr std::array<StanceLabel, 3> kAllLabels = {
    StanceLabel::Favor, StanceLabel::Against, StanceLabel::None};
inline constexpr std::size_t kNumLabels = 3;

inline constexpr std::size_t index_of(StanceLabel label) {
  return static_cast<std::size_t>(label);
}

std::string_view to_string(StanceLabel label);
// Accepts "FAVOR"/"AGAINST"/"NONE" in any case; nullopt otherwise.
std::optional<StanceLabel> parse_label(std::string_view text);
StanceLabel flip(StanceLabel label);

// Relation between an explicit object's label and the specified target's
// label. Only -1, 0 and +1 are representable.
enum class Alignment : std::int8_t { Opposite = -1, Unrelated = 0, Same = 1 };

inline constexpr int to_int(Alignment a) { return static_cast<int>(a); }
Alignment alignment_from_int(int value);  // throws FormatError outside {-1,0,1}

enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Valid,
                                                    Split::Test};

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct StanceRecord {
  std::string id;
  std::string text;    // raw post, case and hashtags preserved
  std::string target;  // specified object
  StanceLabel label = StanceLabel::None;
  std::string corpus;
  Split split = Split::Train;
  std::string domain;

  bool operator==(const StanceRecord&) const = default;
};

// A stance-bearing span of the record text. Offsets are byte offsets into
// the UTF-8 text; the JSON form carries code-point offsets instead.
struct ExplicitObject {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  StanceLabel label = StanceLabel::None;

  bool operator==(const ExplicitObject&) const = default;
};

struct AlignmentPair {
  std::size_t explicit_object_index = 0;
  Alignment alignment = Alignment::Unrelated;

  bool operator==(const AlignmentPair&) const = default;
};

struct EnrichedRecord {
  StanceRecord base;
  std::vector<ExplicitObject> explicit_objects;
  bool explicit_mention = false;
  std::vector<AlignmentPair> alignments;

  bool operator==(const EnrichedRecord&) const = default;
};

// Label of the specified target implied by an explicit object's label and
// the alignment between them. Throws UndefinedComposition for a None object
// with nonzero alignment.
StanceLabel compose_label(StanceLabel explicit_label, Alignment alignment);

// Inverse of compose_label. Throws UndefinedAlignment for a None object
// paired with a polar target.
Alignment derive_alignment(StanceLabel explicit_label, StanceLabel target_label);

// Lists every broken EnrichedRecord invariant; empty when the record is valid.
std::vector<std::string> validate_enriched(const EnrichedRecord& rec);

// Record-level checks shared with the corpus module.
std::vector<std::string> validate_record(const StanceRecord& rec);

// Canonical JSON forms.
nlohmann::json to_json(const StanceRecord& rec);
StanceRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnrichedRecord& rec);
EnrichedRecord enriched_from_json(const nlohmann::json& j);

// UTF-8 helpers for the byte <-> code point offset mapping.
std::size_t byte_to_codepoint_offset(std::string_view text, std::size_t byte_offset);
std::size_t codepoint_to_byte_offset(std::string_view text, std::size_t cp_offset);
bool is_valid_utf8(std::string_view text);

}  // namespace stance
